"""Time the per-item statistics kernel: compiled extension vs numpy fallback.

    python3 benchmarks/bench_kernels.py [--items 2000] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from rppkit._backend import compiled_item_stats, python_item_stats
from rppkit.model import ModelConfig, PackedCorpus, PriorParams
from rppkit.simulation import ThetaSpec, simulate_corpus


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--items", type=int, default=2000)
    ap.add_argument("--window", type=float, default=10.0)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    cfg = ModelConfig()
    corpus = simulate_corpus(PriorParams(4, 4), ThetaSpec(), args.items, cfg, args.window, seed=0)
    pk = PackedCorpus(corpus.sequences, cfg)
    items = np.arange(len(pk.n))
    mu = np.ones(items.size)
    sigma = np.ones(items.size)
    call = (pk.log_t, pk.offsets, pk.log_T, mu, sigma, pk.m, items)
    print(f"{items.size} items, {int(pk.n.sum())} events, {args.repeat} calls each")

    kernels = {"python": python_item_stats}
    if compiled_item_stats is not None:
        kernels["cython"] = compiled_item_stats
        diff = np.max(np.abs(compiled_item_stats(*call) - python_item_stats(*call)))
        print(f"max abs difference between backends: {diff:.3g}")
    else:
        print("compiled extension not built; timing the fallback only")
    best = {}
    for name, fn in kernels.items():
        best[name] = min(timeit.repeat(lambda: fn(*call), number=1, repeat=args.repeat))
        print(f"{name:>7}: {best[name] * 1e3:8.3f} ms per call")
    if len(best) == 2:
        print(f"speed-up: {best['python'] / best['cython']:.2f}x")


if __name__ == "__main__":
    main()
