"""Independent grid-mode reference run of the consensus+innovations RKHS
recursion on the 10-node benchmark network.

Used once to calibrate the sup-error thresholds frozen into the acceptance
suite. Pure numpy/scipy, shares no code with the Rust implementation.

    python3 grid_oracle.py --seeds 5 --steps 100000
"""
import argparse

import numpy as np
from scipy.linalg import solve_banded

EDGES = [(1, 2, .2), (1, 4, .4), (2, 3, .1), (2, 4, .3), (3, 5, .5), (4, 5, .6),
         (4, 6, .8), (5, 6, .7), (6, 7, .3), (7, 8, .2), (8, 9, .9), (9, 10, .1)]
N = 10


def laplacian():
    a = np.zeros((N, N))
    for i, j, w in EDGES:
        a[i - 1, j - 1] = a[j - 1, i - 1] = w
    return np.diag(a.sum(1)) - a


def natural_second_derivs(z, vals):
    # vals: (knots, nodes)
    h = np.diff(z)
    n = len(z)
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = h[1:-1]
    ab[1, :] = 2 * (h[:-1] + h[1:])
    ab[2, :-1] = h[1:-1]
    rhs = 6 * ((vals[2:] - vals[1:-1]) / h[1:, None] - (vals[1:-1] - vals[:-2]) / h[:-1, None])
    m = np.zeros_like(vals)
    m[1:-1] = solve_banded((1, 1), ab, rhs)
    return m


def spline_eval(z, vals, m, x):
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        j = min(max(np.searchsorted(z, xi) - 1, 0), len(z) - 2)
        h = z[j + 1] - z[j]
        a = (z[j + 1] - xi) / h
        b = (xi - z[j]) / h
        out[i] = (a * vals[j, i] + b * vals[j + 1, i]
                  + ((a ** 3 - a) * m[j, i] + (b ** 3 - b) * m[j + 1, i]) * h * h / 6)
    return out


def run(seed, steps, checkpoints, knots=1001):
    rng = np.random.default_rng(seed)
    z = -2 + 6 * np.arange(knots) / 1000.0
    lap = laplacian()
    f = np.zeros((knots, N))
    fstar = np.exp(-(z - 1) ** 2)
    out = {}
    for t in range(steps):
        k = t // 2
        if t % 2 == 0:
            x = rng.uniform(-2, 4 - 3 / (k + 1), N)
        else:
            x = rng.uniform(3 / (k + 1) - 2, 4, N)
        y = np.exp(-(x - 1) ** 2) + rng.normal(0, np.sqrt(0.1), N)
        a = (t + 1) ** -0.6
        b = (t + 1) ** -1.0
        m = natural_second_derivs(z, f)
        fx = spline_eval(z, f, m, x)
        kern = np.exp(-(x[None, :] - z[:, None]) ** 2)
        f = f + a * (y - fx)[None, :] * kern - b * f @ lap.T
        if t + 1 in checkpoints:
            gap = max(np.abs(f[:, i] - f[:, j]).max() for i in range(N) for j in range(i + 1, N))
            out[t + 1] = (np.abs(f - fstar[:, None]).max(0), gap)
    return out


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--steps", type=int, default=100000)
    args = p.parse_args()
    for s in range(args.seeds):
        res = run(s, args.steps, {1000, args.steps})
        for k, (v, gap) in sorted(res.items()):
            print(f"seed={s} k={k} max_sup={v.max():.4f} min_sup={v.min():.4f} gap={gap:.4f}", flush=True)
