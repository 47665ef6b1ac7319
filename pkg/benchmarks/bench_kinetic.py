"""Time the compiled and pure-Python exchange loops on identical draws.

    python3 benchmarks/bench_kinetic.py --steps 1000000 --agents 1000
"""
import argparse
import time

import numpy as np

from tokenwealth.kinetic import Variant, available_backends, draw_pairs, get_kernel
from tokenwealth.kinetic.engine import propensities
from tokenwealth.kinetic.rules import KineticModel
from tokenwealth.seeding import substream


def bench(backend, model, n, steps, repeat, seed=0):
    js, ks, eps = draw_pairs(substream(seed, "pairs"), n, steps)
    lam = propensities(model, n, seed)
    kernel = get_kernel(backend)
    best = float("inf")
    for _ in range(repeat):
        w = np.full(n, 10.0)
        t0 = time.perf_counter()
        kernel(w, lam, int(model.variant), js, ks, eps)
        best = min(best, time.perf_counter() - t0)
    return best, w


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--agents", type=int, default=1000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}; {args.steps} trades among {args.agents} agents, best of {args.repeat}")
    print(f"{'model':<20}" + "".join(f"{b + ' [Mtr/s]':>18}" for b in backends) + f"{'speedup':>10}{'identical':>11}")
    for v in Variant:
        model = KineticModel(v, lam=0.5)
        times, finals = {}, {}
        for b in backends:
            times[b], finals[b] = bench(b, model, args.agents, args.steps, args.repeat)
        rates = "".join(f"{args.steps / times[b] / 1e6:>18.2f}" for b in backends)
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        same = all(np.array_equal(finals[backends[0]], finals[b]) for b in backends)
        print(f"{v.name.lower():<20}{rates}{speedup:>10.1f}{str(same):>11}")


if __name__ == "__main__":
    main()
