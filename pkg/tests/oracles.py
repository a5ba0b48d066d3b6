"""Independent reference implementations used as test oracles.

Everything here is written for clarity rather than speed and deliberately
avoids calling into the package's internals, so agreement with the library
is evidence rather than tautology.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.stats import binom


# -- step rules -------------------------------------------------------------


def rank_active(stats):
    """Stream labels sorted by (value, label)."""
    return sorted(stats, key=lambda k: (stats[k], k))


def brute_accept_count(sorted_values, K, a):
    """Largest m whose m-th smallest value is at or below -(K - a - m + 1)."""
    qualifying = [
        m for m in range(1, len(sorted_values) + 1)
        if sorted_values[m - 1] <= -(K - a - m + 1)
    ]
    return max(qualifying, default=0)


def brute_reject_count(sorted_values, K, r):
    """Largest m whose m-th largest value is at or above K - r - m + 1."""
    desc = sorted(sorted_values, reverse=True)
    qualifying = [m for m in range(1, len(desc) + 1) if desc[m - 1] >= K - r - m + 1]
    return max(qualifying, default=0)


def brute_first_rejective_rank(sorted_values):
    """Smallest rank l with the l-th smallest value at or above l, else None."""
    hits = [l for l in range(1, len(sorted_values) + 1) if sorted_values[l - 1] >= l]
    return min(hits, default=None)


def continues(sorted_values, K, a):
    """True when every rank-l value sits strictly inside (-(K-a-l+1), a+l)."""
    return all(
        -(K - a - l + 1) < v < a + l for l, v in enumerate(sorted_values, start=1)
    )


# -- standardizer -----------------------------------------------------------


def interp_standardizer(lower, upper):
    """Full standardizing map for a ladder with distinct knots, via np.interp."""
    K = len(lower)
    xs = np.concatenate([lower, upper[::-1]])
    ys = np.concatenate([-np.arange(K, 0, -1.0), np.arange(1.0, K + 1)])

    def phi(x):
        if x < xs[0]:
            return ys[0] + (x - xs[0])
        if x > xs[-1]:
            return ys[-1] + (x - xs[-1])
        return float(np.interp(x, xs, ys))

    return phi


def reference_sbh(paths, lowers, uppers):
    """Plain-loop interpreter of the fully sequential accept/reject procedure.

    ``paths[k][n-1]`` is stream k's raw statistic after n observations.
    Returns a list of (stream, verdict, stage, n) tuples.
    """
    K = len(paths)
    phis = [interp_standardizer(lowers[k], uppers[k]) for k in range(K)]
    active = list(range(K))
    a = r = 0
    stage = 1
    log = []
    n = 0
    while active:
        n += 1
        stats = {k: phis[k](paths[k][n - 1]) for k in active}
        order = rank_active(stats)
        values = [stats[k] for k in order]
        if continues(values, K, a):
            continue
        m_acc = brute_accept_count(values, K, a)
        m_rej = brute_reject_count(values, K, r)
        acc = sorted(order[:m_acc])
        rej = sorted(order[len(order) - m_rej:]) if m_rej else []
        log += [(k, "accept", stage, n) for k in acc]
        log += [(k, "reject", stage, n) for k in rej]
        active = [k for k in active if k not in acc and k not in rej]
        a += len(acc)
        r += len(rej)
        stage += 1
    return log


def sprt(path, lower, upper):
    """Classic SPRT on a statistic path: (verdict, stopping time) or None."""
    for n, value in enumerate(path, start=1):
        if value >= upper:
            return "reject", n
        if value <= lower:
            return "accept", n
    return None


# -- fixed-sample BH --------------------------------------------------------


def brute_bh(p, alpha):
    """Largest-size rejection set of the form {i : p_i <= t} allowed by BH.

    Enumerates every subset and keeps the largest one that is closed under
    smaller p-values and satisfies max p <= |S| alpha / K.
    """
    K = len(p)
    best = set()
    for size in range(1, K + 1):
        for subset in itertools.combinations(range(K), size):
            chosen = set(subset)
            rest = [p[i] for i in range(K) if i not in chosen]
            top = max(p[i] for i in chosen)
            if rest and min(rest) < top:
                continue
            if top <= size * alpha / K and size > len(best):
                best = chosen
    return best


# -- likelihood oracles -----------------------------------------------------


def _zoom_min(f, lo, hi, points=10_001, rounds=3):
    """Grid-search minimum of a vectorized f on [lo, hi].

    After each pass the grid is rebuilt on the two cells around the best
    point, so three passes resolve the argmin to about 1e-12.
    """
    best_x, best_f = lo, math.inf
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        vals = f(grid)
        i = int(np.argmin(vals))
        if vals[i] < best_f:
            best_x, best_f = grid[i], float(vals[i])
        step = grid[1] - grid[0]
        lo, hi = max(lo, grid[i] - step), min(hi, grid[i] + step)
    return best_x, best_f


def product_binomial_loglik(counts, trials, p):
    """Sum of binomial log-pmfs; each entry of ``p`` may be an array."""
    return sum(binom.logpmf(y, t, q) for y, t, q in zip(counts, trials, p))


def two_sample_lr_oracle(counts, n, m1, m2, delta=None, eps=1e-12):
    """Log likelihood ratio of the unconstrained MLE against a constrained fit.

    ``delta=None`` constrains p1 == p2; otherwise |p1 - p2| == delta.
    Works directly with exact binomial log-likelihoods.
    """
    trials = (n * m1, n * m2)
    p_hat = (counts[0] / trials[0], counts[1] / trials[1])
    top = float(product_binomial_loglik(counts, trials, p_hat))
    if delta is None:
        _, f = _zoom_min(
            lambda t: -product_binomial_loglik(counts, trials, (t, t)), eps, 1 - eps
        )
        return top + f
    best = math.inf
    for lo, hi, shift in ((delta + eps, 1 - eps, -delta), (eps, 1 - delta - eps, delta)):
        _, f = _zoom_min(
            lambda t: -product_binomial_loglik(counts, trials, (t, t + shift)), lo, hi
        )
        best = min(best, f)
    return top + best


def bernoulli_lr_oracle(successes, n, p0):
    """Exact log likelihood ratio of the MLE against p0 for n Bernoulli trials."""
    p_hat = successes / n
    return float(
        product_binomial_loglik([successes], [n], [p_hat])
        - product_binomial_loglik([successes], [n], [p0])
    )
