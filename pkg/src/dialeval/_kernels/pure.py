"""Pure-Python token kernels.

Reference implementations of the hot per-instance loops: LCS length,
clipped n-gram overlap, and the exact-match alignment statistics behind
the chunk-penalty metric.  The compiled extension in ``_speedups.pyx``
mirrors these signatures; callers must not care which one is active.

All functions take token *id* sequences (small nonnegative ints produced
by a per-pair interning pass) rather than strings.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

BACKEND = "pure"


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two id sequences."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    cur = [0] * (len(b) + 1)
    for x in a:
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = cur[j - 1]
                cur[j] = pj if pj >= cj else cj
        prev, cur = cur, prev
    return prev[len(b)]


def ngram_overlap(cand: Sequence[int], ref: Sequence[int], n: int) -> tuple[int, int, int]:
    """Clipped n-gram overlap between candidate and reference.

    Returns ``(clipped, cand_total, ref_total)`` where ``clipped`` is the
    candidate n-gram count clipped per gram by the reference count and the
    totals are the number of n-grams on each side (0 when shorter than n).
    """
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    ct = len(cand) - n + 1
    rt = len(ref) - n + 1
    if ct <= 0 or rt <= 0:
        return 0, max(ct, 0), max(rt, 0)
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(ct))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(rt))
    clipped = sum(min(c, ref_grams.get(g, 0)) for g, c in cand_grams.items())
    return clipped, ct, rt


def _longest_common_run(a: Sequence[int], b: Sequence[int]) -> int:
    """Longest common contiguous run; bound helper for the aligner."""
    best = 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                v = prev[j - 1] + 1
                cur[j] = v
                if v > best:
                    best = v
        prev = cur
    return best


def meteor_stats(cand: Sequence[int], ref: Sequence[int]) -> tuple[int, int]:
    """Alignment statistics ``(matches, chunks)`` for exact unigram matching.

    ``matches`` is the maximum 1:1 match count (per word, the minimum of
    the two occurrence counts; every maximum alignment attains exactly
    that per word).  ``chunks`` is the minimum number of contiguous
    aligned runs over all alignments achieving the maximum, found by
    branch-and-bound over aligned segments.  Worst case is exponential,
    but sentence-scale inputs resolve in microseconds.
    """
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    need = {w: min(c, ref_counts[w]) for w, c in cand_counts.items() if w in ref_counts}
    total_need = sum(need.values())
    if total_need == 0:
        return 0, 0

    n, m = len(cand), len(ref)
    ref_positions: dict[int, list[int]] = {}
    for j, w in enumerate(ref):
        ref_positions.setdefault(w, []).append(j)

    avail = [True] * m
    avail_c = dict(cand_counts)  # undecided candidate occurrences per word
    need_rem = dict(need)
    run_cap = _longest_common_run(cand, ref)

    best = total_need  # the all-singleton alignment is always feasible

    def dfs(i: int, open_need: int, segs: int) -> None:
        nonlocal best
        if open_need == 0:
            if segs < best:
                best = segs
            return
        # lower bound: each further segment covers at most run_cap matches
        if segs + -(-open_need // run_cap) >= best:
            return
        if i == n:
            return
        w = cand[i]
        # Matching never starves a word (each match consumes one required
        # occurrence on both sides), so any segment over available positions
        # is feasible; only skips need a guard.
        if need_rem.get(w, 0) > 0:
            for j in ref_positions[w]:
                if not avail[j]:
                    continue
                limit = 0
                while (
                    i + limit < n
                    and j + limit < m
                    and cand[i + limit] == ref[j + limit]
                    and avail[j + limit]
                ):
                    wv = cand[i + limit]
                    avail[j + limit] = False
                    avail_c[wv] -= 1
                    need_rem[wv] -= 1
                    limit += 1
                for length in range(limit, 0, -1):  # longest first
                    dfs(i + length, open_need - length, segs + 1)
                    wv = cand[i + length - 1]
                    avail[j + length - 1] = True
                    avail_c[wv] += 1
                    need_rem[wv] += 1
        if avail_c[w] - 1 >= need_rem.get(w, 0):
            # leave cand[i] unmatched; later occurrences still cover the need
            avail_c[w] -= 1
            dfs(i + 1, open_need, segs)
            avail_c[w] += 1

    dfs(0, total_need, 0)
    return total_need, best
