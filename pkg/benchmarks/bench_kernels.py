"""Benchmark the compiled token kernels against the pure-Python fallback.

Times the three kernels on synthetic sentence pairs and a full metric
sweep (BLEU-1..4, ROUGE-1/2/L, chunk-penalty metric) over a batch of
instances, then prints per-kernel speedups.

Run:  python benchmarks/bench_kernels.py [--pairs 2000] [--len 25]
"""

from __future__ import annotations

import argparse
import random
import time

from dialeval._kernels import pure

try:
    from dialeval._kernels import _speedups as compiled
except ImportError:
    compiled = None


def make_pairs(n_pairs: int, length: int, vocab: int, seed: int = 0):
    rng = random.Random(seed)
    pairs = []
    for _ in range(n_pairs):
        ref = [rng.randrange(vocab) for _ in range(length)]
        cand = ref[:]
        # realistic candidates: partially corrupted references
        for i in range(len(cand)):
            if rng.random() < 0.3:
                cand[i] = rng.randrange(vocab)
        if rng.random() < 0.5:
            cand = cand[: max(1, int(len(cand) * rng.uniform(0.5, 1.0)))]
        pairs.append((cand, ref))
    return pairs


def time_kernel(fn, pairs, repeats=1):
    start = time.perf_counter()
    for _ in range(repeats):
        for cand, ref in pairs:
            fn(cand, ref)
    return time.perf_counter() - start


def bench(impl, pairs):
    return {
        "lcs_length": time_kernel(impl.lcs_length, pairs),
        "ngram_overlap(2)": time_kernel(
            lambda c, r: impl.ngram_overlap(c, r, 2), pairs
        ),
        "ngram_overlap(4)": time_kernel(
            lambda c, r: impl.ngram_overlap(c, r, 4), pairs
        ),
        "meteor_stats": time_kernel(impl.meteor_stats, pairs),
    }


def bench_metric_sweep(pairs) -> dict[str, float]:
    """Full generation-metric sweep per backend via the public API."""
    import importlib
    import os

    timings = {}
    for backend, env in (("compiled", "0"), ("pure", "1")):
        if backend == "compiled" and compiled is None:
            continue
        os.environ["DIALEVAL_PURE"] = env
        import dialeval._kernels
        import dialeval.metrics

        importlib.reload(dialeval._kernels)
        importlib.reload(dialeval.metrics)
        from dialeval.metrics import bleu_n, meteor, rouge_l, rouge_n

        token_pairs = [
            ([f"w{t}" for t in cand], [f"w{t}" for t in ref]) for cand, ref in pairs
        ]
        start = time.perf_counter()
        for cand, ref in token_pairs:
            for n in (1, 2, 3, 4):
                bleu_n(cand, ref, n)
            rouge_n(cand, ref, 1)
            rouge_n(cand, ref, 2)
            rouge_l(cand, ref)
            meteor(cand, ref)
        timings[backend] = time.perf_counter() - start
    os.environ.pop("DIALEVAL_PURE", None)
    return timings


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--len", dest="length", type=int, default=25)
    parser.add_argument("--vocab", type=int, default=40)
    args = parser.parse_args()

    pairs = make_pairs(args.pairs, args.length, args.vocab)
    print(f"{args.pairs} pairs, length ~{args.length}, vocab {args.vocab}\n")

    pure_times = bench(pure, pairs)
    if compiled is None:
        print("compiled extension not built; pure timings only")
        for name, t in pure_times.items():
            print(f"  {name:<18} pure {t * 1e3:8.1f} ms")
        return

    compiled_times = bench(compiled, pairs)
    print(f"{'kernel':<18}{'pure':>12}{'compiled':>12}{'speedup':>10}")
    for name in pure_times:
        tp, tc = pure_times[name], compiled_times[name]
        print(f"{name:<18}{tp * 1e3:>10.1f}ms{tc * 1e3:>10.1f}ms{tp / tc:>9.1f}x")

    sweep = bench_metric_sweep(pairs)
    if len(sweep) == 2:
        print(
            f"\nfull metric sweep: pure {sweep['pure'] * 1e3:.1f} ms, "
            f"compiled {sweep['compiled'] * 1e3:.1f} ms, "
            f"speedup {sweep['pure'] / sweep['compiled']:.1f}x"
        )


if __name__ == "__main__":
    main()
