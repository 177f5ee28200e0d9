"""Compare the compiled and pure-Python kernel backends.

Times the three hot kernels (standardize, accumulate, alias table) and a
full GEE fit on simulated panels, once per available backend, and checks
that both backends agree numerically.

    python benchmarks/bench_kernels.py --m 10000 --repeat 20
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gee_subsample import _kernels
from gee_subsample.simulate import SimConfig, simulate


def _best(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def kernel_rows(m, n, p, repeat, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n, p))
    y = (rng.random((m, n)) < 0.4).astype(float)
    beta = 0.3 * rng.standard_normal(p)
    k = np.arange(n)
    Rinv = np.linalg.inv(0.5 ** np.abs(np.subtract.outer(k, k)))
    w = rng.random(m) + 0.5
    pi = rng.random(m)
    pi /= pi.sum()

    rows, outputs = [], {}
    for name in _kernels.available_backends():
        scale, resid, *_ = _kernels.standardize(X, y, beta, 2, backend=name)
        jobs = {
            "standardize": lambda: _kernels.standardize(X, y, beta, 2, backend=name),
            "accumulate": lambda: _kernels.accumulate(X, scale, resid, Rinv, w, True, backend=name),
            "alias_table": lambda: _kernels.alias_table(pi, backend=name),
        }
        for kernel, func in jobs.items():
            rows.append((kernel, name, _best(func, repeat)))
            outputs[kernel, name] = func()
    return rows, outputs


def max_disagreement(outputs):
    names = sorted({b for _, b in outputs})
    if len(names) < 2:
        return {}
    out = {}
    for kernel in sorted({k for k, _ in outputs}):
        a, b = outputs[kernel, names[0]], outputs[kernel, names[1]]
        out[kernel] = max(
            float(np.max(np.abs(np.asarray(u, float) - np.asarray(v, float))))
            for u, v in zip(a, b)
            if u is not None and np.ndim(u) > 0
        )
    return out


def fit_time(backend, m, repeat):
    """Full binary AR(1) fit time in a subprocess pinned to ``backend``."""
    code = (
        "import timeit;from gee_subsample import fit,simulate,SimConfig;"
        f"P=simulate(SimConfig('binary',m={m},seed=1));"
        f"print(min(timeit.repeat(lambda: fit(P,'binomial','ar1'),number=1,repeat={repeat})))"
    )
    env = dict(os.environ)
    env["GEE_SUBSAMPLE_PURE_PYTHON"] = "1" if backend == "python" else "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=10000)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--p", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    print(f"backends: {', '.join(_kernels.available_backends())} (active: {_kernels.BACKEND})")
    print(f"panel: m={args.m} n={args.n} p={args.p}\n")
    rows, outputs = kernel_rows(args.m, args.n, args.p, args.repeat)
    times = {(k, b): t for k, b, t in rows}
    print(f"{'kernel':<14}{'backend':<10}{'best ms':>10}{'speedup':>10}")
    for kernel, backend, t in rows:
        ref = times.get((kernel, "python"), t)
        print(f"{kernel:<14}{backend:<10}{t * 1e3:>10.3f}{ref / t:>9.1f}x")

    diffs = max_disagreement(outputs)
    if diffs:
        print("\nmax |cython - python|: " + ", ".join(f"{k} {v:.1e}" for k, v in diffs.items()))

    print("\nfull binary AR(1) fit:")
    for backend in _kernels.available_backends():
        t = fit_time(backend, args.m, max(3, args.repeat // 4))
        print(f"  {backend:<8}{t * 1e3:>10.1f} ms")


if __name__ == "__main__":
    main()
