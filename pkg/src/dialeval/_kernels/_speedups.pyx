# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled token kernels; same contracts as dialeval._kernels.pure."""

from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc, qsort

from . import pure as _pure

BACKEND = "compiled"


cdef int* _to_c_array(seq, Py_ssize_t* length) except NULL:
    cdef Py_ssize_t n = len(seq)
    cdef int* data = <int*> malloc((n if n > 0 else 1) * sizeof(int))
    if data == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        data[i] = seq[i]
    length[0] = n
    return data


def lcs_length(a, b):
    """Length of the longest common subsequence of two id sequences."""
    cdef Py_ssize_t n = 0, m = 0
    cdef int* xa = _to_c_array(a, &n)
    cdef int* xb
    try:
        xb = _to_c_array(b, &m)
    except:  # noqa: E722 - release xa on allocation failure
        free(xa)
        raise
    cdef int* prev
    cdef int* cur
    cdef int* tmp
    cdef Py_ssize_t i, j
    cdef int result, pj, cj
    try:
        prev = <int*> malloc((m + 1) * sizeof(int))
        cur = <int*> malloc((m + 1) * sizeof(int))
        if prev == NULL or cur == NULL:
            if prev != NULL:
                free(prev)
            if cur != NULL:
                free(cur)
            raise MemoryError()
        for j in range(m + 1):
            prev[j] = 0
            cur[j] = 0
        for i in range(n):
            for j in range(1, m + 1):
                if xa[i] == xb[j - 1]:
                    cur[j] = prev[j - 1] + 1
                else:
                    pj = prev[j]
                    cj = cur[j - 1]
                    cur[j] = pj if pj >= cj else cj
            tmp = prev
            prev = cur
            cur = tmp
        result = prev[m]
        free(prev)
        free(cur)
        return result
    finally:
        free(xa)
        free(xb)


cdef int _cmp_u64(const void* pa, const void* pb) noexcept nogil:
    cdef uint64_t a = (<const uint64_t*> pa)[0]
    cdef uint64_t b = (<const uint64_t*> pb)[0]
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def ngram_overlap(cand, ref, int n):
    """Clipped n-gram overlap; returns (clipped, cand_total, ref_total).

    Packs up to four 16-bit ids per gram into a sortable 64-bit code;
    wider ids or orders defer to the pure implementation.
    """
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    cdef Py_ssize_t nc = 0, nr = 0
    cdef Py_ssize_t i, k
    cdef int maxid = 0
    cdef int* xc = _to_c_array(cand, &nc)
    cdef int* xr
    try:
        xr = _to_c_array(ref, &nr)
    except:  # noqa: E722
        free(xc)
        raise
    cdef Py_ssize_t ct = nc - n + 1
    cdef Py_ssize_t rt = nr - n + 1
    cdef uint64_t* gc
    cdef uint64_t* gr
    cdef uint64_t code
    cdef Py_ssize_t ic = 0, ir = 0, jc, jr
    cdef Py_ssize_t clipped = 0
    cdef Py_ssize_t cnt_c, cnt_r
    try:
        if ct <= 0 or rt <= 0:
            return 0, max(ct, 0), max(rt, 0)
        for i in range(nc):
            if xc[i] > maxid:
                maxid = xc[i]
        for i in range(nr):
            if xr[i] > maxid:
                maxid = xr[i]
        if n > 4 or maxid >= 0xFFFF or maxid < 0:
            return _pure.ngram_overlap(list(cand), list(ref), n)
        gc = <uint64_t*> malloc(ct * sizeof(uint64_t))
        gr = <uint64_t*> malloc(rt * sizeof(uint64_t))
        if gc == NULL or gr == NULL:
            if gc != NULL:
                free(gc)
            if gr != NULL:
                free(gr)
            raise MemoryError()
        for i in range(ct):
            code = 0
            for k in range(n):
                code = (code << 16) | <uint64_t> (xc[i + k] + 1)
            gc[i] = code
        for i in range(rt):
            code = 0
            for k in range(n):
                code = (code << 16) | <uint64_t> (xr[i + k] + 1)
            gr[i] = code
        qsort(gc, ct, sizeof(uint64_t), _cmp_u64)
        qsort(gr, rt, sizeof(uint64_t), _cmp_u64)
        while ic < ct and ir < rt:
            if gc[ic] < gr[ir]:
                ic += 1
            elif gc[ic] > gr[ir]:
                ir += 1
            else:
                code = gc[ic]
                jc = ic
                while jc < ct and gc[jc] == code:
                    jc += 1
                jr = ir
                while jr < rt and gr[jr] == code:
                    jr += 1
                cnt_c = jc - ic
                cnt_r = jr - ir
                clipped += cnt_c if cnt_c < cnt_r else cnt_r
                ic = jc
                ir = jr
        free(gc)
        free(gr)
        return clipped, ct, rt
    finally:
        free(xc)
        free(xr)


cdef struct AlignState:
    int* cand
    int* ref
    Py_ssize_t n
    Py_ssize_t m
    unsigned char* avail     # per ref position
    int* avail_c             # per word id: undecided candidate occurrences
    int* need_rem            # per word id: required matches still open
    int* pos_start           # per word id: offset into pos_list
    int* pos_list            # ref positions grouped by word id
    int run_cap
    int best


cdef void _dfs(AlignState* st, Py_ssize_t i, int open_need, int segs) noexcept:
    cdef int w, wv
    cdef Py_ssize_t j, limit, t
    cdef int length
    cdef Py_ssize_t p
    if open_need == 0:
        if segs < st.best:
            st.best = segs
        return
    if segs + (open_need + st.run_cap - 1) // st.run_cap >= st.best:
        return
    if i == st.n:
        return
    w = st.cand[i]
    if st.need_rem[w] > 0:
        for p in range(st.pos_start[w], st.pos_start[w + 1]):
            j = st.pos_list[p]
            if not st.avail[j]:
                continue
            limit = 0
            while (i + limit < st.n and j + limit < st.m
                   and st.cand[i + limit] == st.ref[j + limit]
                   and st.avail[j + limit]):
                wv = st.cand[i + limit]
                st.avail[j + limit] = 0
                st.avail_c[wv] -= 1
                st.need_rem[wv] -= 1
                limit += 1
            for length in range(<int> limit, 0, -1):
                _dfs(st, i + length, open_need - length, segs + 1)
                wv = st.cand[i + length - 1]
                st.avail[j + length - 1] = 1
                st.avail_c[wv] += 1
                st.need_rem[wv] += 1
    if st.avail_c[w] - 1 >= st.need_rem[w]:
        st.avail_c[w] -= 1
        _dfs(st, i + 1, open_need, segs)
        st.avail_c[w] += 1


def meteor_stats(cand, ref):
    """(maximum matches, minimum chunks) for exact unigram alignment."""
    cdef Py_ssize_t n = 0, m = 0
    cdef int* xc = _to_c_array(cand, &n)
    cdef int* xr
    try:
        xr = _to_c_array(ref, &m)
    except:  # noqa: E722
        free(xc)
        raise
    cdef int vocab = 0
    cdef Py_ssize_t i, j
    cdef int w, total_need, run, best_run
    cdef AlignState st
    cdef int* count_c = NULL
    cdef int* count_r = NULL
    cdef int* fill = NULL
    cdef int* run_row = NULL
    st.avail = NULL
    st.avail_c = NULL
    st.need_rem = NULL
    st.pos_start = NULL
    st.pos_list = NULL
    try:
        for i in range(n):
            if xc[i] + 1 > vocab:
                vocab = xc[i] + 1
        for i in range(m):
            if xr[i] + 1 > vocab:
                vocab = xr[i] + 1
        if vocab == 0:
            return 0, 0
        count_c = <int*> malloc(vocab * sizeof(int))
        count_r = <int*> malloc(vocab * sizeof(int))
        st.avail_c = <int*> malloc(vocab * sizeof(int))
        st.need_rem = <int*> malloc(vocab * sizeof(int))
        st.pos_start = <int*> malloc((vocab + 1) * sizeof(int))
        st.pos_list = <int*> malloc((m if m > 0 else 1) * sizeof(int))
        st.avail = <unsigned char*> malloc((m if m > 0 else 1) * sizeof(unsigned char))
        fill = <int*> malloc(vocab * sizeof(int))
        run_row = <int*> malloc((m + 1) * sizeof(int))
        if (count_c == NULL or count_r == NULL or st.avail_c == NULL
                or st.need_rem == NULL or st.pos_start == NULL
                or st.pos_list == NULL or st.avail == NULL or fill == NULL
                or run_row == NULL):
            raise MemoryError()
        for w in range(vocab):
            count_c[w] = 0
            count_r[w] = 0
        for i in range(n):
            count_c[xc[i]] += 1
        for i in range(m):
            count_r[xr[i]] += 1
        total_need = 0
        for w in range(vocab):
            st.need_rem[w] = count_c[w] if count_c[w] < count_r[w] else count_r[w]
            st.avail_c[w] = count_c[w]
            total_need += st.need_rem[w]
        if total_need == 0:
            return 0, 0
        # ref positions grouped by word
        st.pos_start[0] = 0
        for w in range(vocab):
            st.pos_start[w + 1] = st.pos_start[w] + count_r[w]
        for w in range(vocab):
            fill[w] = st.pos_start[w]
        for j in range(m):
            st.pos_list[fill[xr[j]]] = j
            fill[xr[j]] += 1
        for j in range(m):
            st.avail[j] = 1
        # longest common contiguous run (branch-and-bound lower bound)
        best_run = 0
        for j in range(m + 1):
            run_row[j] = 0
        for i in range(n):
            for j in range(m, 0, -1):
                if xc[i] == xr[j - 1]:
                    run = run_row[j - 1] + 1
                    run_row[j] = run
                    if run > best_run:
                        best_run = run
                else:
                    run_row[j] = 0
            run_row[0] = 0
        st.cand = xc
        st.ref = xr
        st.n = n
        st.m = m
        st.run_cap = best_run
        st.best = total_need
        _dfs(&st, 0, total_need, 0)
        return total_need, st.best
    finally:
        free(xc)
        free(xr)
        if count_c != NULL:
            free(count_c)
        if count_r != NULL:
            free(count_r)
        if st.avail_c != NULL:
            free(st.avail_c)
        if st.need_rem != NULL:
            free(st.need_rem)
        if st.pos_start != NULL:
            free(st.pos_start)
        if st.pos_list != NULL:
            free(st.pos_list)
        if st.avail != NULL:
            free(st.avail)
        if fill != NULL:
            free(fill)
        if run_row != NULL:
            free(run_row)
