"""Compare the numba and numpy kernel backends.

Kernel timings call both namespaces in one process. The end-to-end row runs
the optimizer's inner evaluation in a subprocess per backend, because the
backend is fixed at import time by SEQREVEAL_BACKEND.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 50]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from seqreveal import _kernels as K

E2E = """
import time
from seqreveal.environment import Environment
from seqreveal.optimizer import seeds, _evaluate
from seqreveal import _kernels as K
env = Environment.linear()
dv = seeds(env, env.delta, 30)[0]
K.warmup(); _evaluate(dv, env, env.delta, 1.0)
t = time.perf_counter()
for _ in range({reps}):
    _evaluate(dv, env, env.delta, 1.0)
print((time.perf_counter() - t) / {reps})
"""


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    n_coh = max(n // 40, 1)
    lengths = rng.integers(1, 60, n_coh)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    rew = rng.uniform(0, 1, offsets[-1])
    tails = rng.uniform(0, 1, n_coh)
    ids = np.where(rng.uniform(size=n) < 0.8, rng.integers(0, n_coh, n), -1).astype(np.int64)
    masses = np.where(ids >= 0, rng.uniform(0, 1e-3, n), 0.0)
    return dict(
        discounted_backward=(rng.uniform(0, 1, n), 0.5, 0.99),
        stopping_backward=(rng.uniform(0, 1, n), rng.uniform(0, 1, n), 0.5, 0.99),
        segment_values=(offsets, rew, tails, 0.99),
        segment_sup=(offsets, rew, tails, 0.99),
        scatter_cohorts=(ids, masses, offsets, rew, tails, n + 100),
        split_rent_constant=(rng.uniform(0.01, 0.1, n), rng.uniform(0.2, 0.5, n), 0.99),
    )


def time_kernel(ns, name, args, repeat):
    fn = getattr(ns, name)
    fn(*args)  # compile / warm caches
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000, help="window length of the synthetic inputs")
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--e2e-reps", type=int, default=300, help="evaluations per backend in the end-to-end row")
    args = ap.parse_args()

    if K.NUMBA is None:
        sys.exit("numba is not installed; nothing to compare")
    print(f"{'kernel':<22}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>10}")
    for name, a in inputs(args.n).items():
        t_jit = time_kernel(K.NUMBA, name, a, args.repeat)
        t_np = time_kernel(K.NUMPY, name, a, args.repeat)
        print(f"{name:<22}{t_jit * 1e6:>12.1f}{t_np * 1e6:>12.1f}{t_np / t_jit:>10.2f}")

    res = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SEQREVEAL_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", E2E.format(reps=args.e2e_reps)], env=env,
                             capture_output=True, text=True, check=True)
        res[backend] = float(out.stdout.strip())
    print(f"{'optimizer evaluation':<22}{res['numba'] * 1e6:>12.1f}{res['numpy'] * 1e6:>12.1f}"
          f"{res['numpy'] / res['numba']:>10.2f}")


if __name__ == "__main__":
    main()
