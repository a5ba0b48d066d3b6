"""Monte Carlo operating characteristics of the sequential BH procedures.

Streams are either independent Bernoulli or jointly normal with unit
variances and a given correlation matrix; each stream is tested with a
simple-vs-simple log-likelihood ratio and Wald critical values.  The fixed
sample BH procedure (FBH) is simulated alongside as a baseline.

Replication ``i`` draws all of its data from generators seeded by
``(seed, i)``, so results do not depend on how replications are grouped
into blocks or spread across threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import binom, norm

from .errors import ConfigError, NotPositiveDefinite
from .procedure import (
    ACCEPT,
    FULL,
    REJECT,
    REJECTIVE,
    Decision,
    batch_rejective_step,
    batch_sbh_step,
)
from .ladders import build_full_standardizer, build_rejective_standardizer
from .statistics import INWARD, SimpleTestSpec, WaldConfig, sbh_wald_ladder

STREAM_CAP = 100_000
BLOCK_SIZE = 512
CHUNK = 64

COVARIANCES = {
    "M1": [[1, 0.8], [0.8, 1]],
    "M2": [[1, -0.8], [-0.8, 1]],
    "M3": [
        [1, 0.8, -0.6, -0.8],
        [0.8, 1, -0.6, -0.8],
        [-0.6, -0.6, 1, 0.8],
        [-0.8, -0.8, 0.8, 1],
    ],
    "M4": [
        [1, 0.8, 0.6, -0.4, -0.6, -0.8],
        [0.8, 1, 0.8, -0.4, -0.6, -0.8],
        [0.6, 0.8, 1, -0.4, -0.6, -0.8],
        [-0.4, -0.4, -0.4, 1, 0.8, 0.6],
        [-0.6, -0.6, -0.6, 0.8, 1, 0.8],
        [-0.8, -0.8, -0.8, 0.6, 0.8, 1],
    ],
}


def cholesky_factor(M):
    """Lower-triangular L with L @ L.T == M.

    Raises:
        NotPositiveDefinite: naming the first pivot that is not positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    d = M.shape[0]
    L = np.zeros_like(M)
    for j in range(d):
        pivot = M[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0:
            raise NotPositiveDefinite(j, pivot)
        L[j, j] = math.sqrt(pivot)
        L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def delta_factor(K):
    """Harmonic sum 1 + 1/2 + ... + 1/K, computed exactly then rounded once."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return float(sum(Fraction(1, k) for k in range(1, K + 1)))


# -- stream models ----------------------------------------------------------


@dataclass(frozen=True)
class StreamModelSpec:
    """Joint law of one time step across the K streams.

    ``kind`` is ``"bernoulli"`` (``params`` are success probabilities) or
    ``"normal"`` (``params`` are means; ``covariance`` is required).
    """

    kind: str
    params: tuple
    covariance: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.kind == "bernoulli":
            if not all(0 < p < 1 for p in params):
                raise ConfigError("model.p", "Bernoulli probabilities must lie in (0, 1)")
        elif self.kind == "normal":
            if self.covariance is None:
                cov = np.eye(len(params))
            else:
                cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (len(params), len(params)):
                raise ConfigError(
                    "model.covariance",
                    f"shape {cov.shape} does not match {len(params)} streams",
                )
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_chol", cholesky_factor(cov))
        else:
            raise ConfigError("model.kind", f"unknown stream model {self.kind!r}")

    @property
    def K(self):
        return len(self.params)

    def draw(self, rng, steps):
        """``steps`` consecutive time steps, shape (steps, K)."""
        p = np.asarray(self.params)
        if self.kind == "bernoulli":
            return (rng.random((steps, self.K)) < p).astype(float)
        z = rng.standard_normal((steps, self.K))
        return p + z @ self._chol.T

    def draw_means(self, rng, n):
        """Per-stream sample means and success counts of ``n`` steps, for FBH."""
        p = np.asarray(self.params)
        if self.kind == "bernoulli":
            return rng.binomial(n, p).astype(float)
        z = rng.standard_normal(self.K)
        return p + (self._chol @ z) / math.sqrt(n)


def generate_step(spec, rng):
    """One observation per stream."""
    return spec.draw(rng, 1)[0]


# -- fixed-sample baseline --------------------------------------------------


def fixed_sample_bh(p_values, alpha):
    """Benjamini-Hochberg step-up rejections, returned as a set of indices."""
    p = np.asarray(p_values, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    K = p.size
    order = np.argsort(p, kind="stable")
    passed = np.nonzero(p[order] <= alpha * np.arange(1, K + 1) / K)[0]
    if passed.size == 0:
        return set()
    return {int(k) for k in order[: passed[-1] + 1]}


def _batch_bh(p, alpha):
    R, K = p.shape
    order = np.argsort(p, axis=1, kind="stable")
    srt = np.take_along_axis(p, order, axis=1)
    ok = srt <= alpha * np.arange(1, K + 1) / K
    count = np.where(ok.any(axis=1), K - np.argmax(ok[:, ::-1], axis=1), 0)
    out = np.zeros((R, K), dtype=bool)
    np.put_along_axis(out, order, np.arange(K)[None, :] < count[:, None], axis=1)
    return out


def fixed_sample_pvalue(kind, n, observed, null=None):
    """One-sided fixed-sample p-value.

    ``kind="bernoulli"``: ``observed`` is the success count and ``null`` the
    null success probability; returns P(X >= observed).  ``kind="normal"``:
    ``observed`` is the sample mean of unit-variance data and ``null`` the
    null mean (default 0); returns the upper normal tail of
    ``sqrt(n) * (mean - null)``.
    """
    if kind == "bernoulli":
        return binom.sf(np.asarray(observed) - 1, n, null)
    if kind == "normal":
        null = 0.0 if null is None else null
        return norm.sf(math.sqrt(n) * (np.asarray(observed) - null))
    raise ValueError(f"unknown p-value kind {kind!r}")


# -- experiment ------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One scenario: stream law, hypotheses, error levels and Monte Carlo size.

    ``null``/``alt`` are the simple hypotheses each stream is tested with
    (``p0``/``p1`` for Bernoulli, ``0``/``delta`` for normal means).  A stream's
    null hypothesis is true when its parameter is at or below ``null``.
    ``fbh_n`` is the per-stream fixed sample size of the baseline.
    """

    model: StreamModelSpec
    null: float
    alt: float
    alpha: float = 0.05
    beta: float = 0.2
    rho: float = 0.0
    overshoot: str = INWARD
    replications: int = 10_000
    seed: int = 0
    group_size: int = 1
    variant: str = FULL
    truncation: int | None = None
    fbh_n: int | None = None
    name: str = ""
    notes: str = ""

    def __post_init__(self):
        if not self.null < self.alt:
            raise ConfigError("hypotheses", f"need null < alternative, got {self.null} and {self.alt}")
        if self.model.kind == "bernoulli" and not (0 < self.null < 1 and 0 < self.alt < 1):
            raise ConfigError("hypotheses", "Bernoulli hypotheses must lie in (0, 1)")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError("replications", f"must be a positive integer, got {self.replications!r}")
        if not isinstance(self.group_size, int) or self.group_size < 1:
            raise ConfigError("group_size", f"must be a positive integer, got {self.group_size!r}")
        if self.variant not in (FULL, REJECTIVE):
            raise ConfigError("variant", f"must be 'full' or 'rejective', got {self.variant!r}")
        if self.variant == REJECTIVE and (
            not isinstance(self.truncation, int) or self.truncation < 1
        ):
            raise ConfigError("truncation", "the rejective variant needs a positive integer truncation")
        if self.fbh_n is not None and (not isinstance(self.fbh_n, int) or self.fbh_n < 1):
            raise ConfigError("fbh_n", f"must be a positive integer, got {self.fbh_n!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", f"must be a non-negative integer, got {self.seed!r}")
        try:
            self.wald_config()
        except ValueError as exc:
            raise ConfigError("levels", str(exc)) from None

    @property
    def K(self):
        return self.model.K

    @property
    def truth_null(self):
        return np.asarray(self.model.params) <= self.null

    def test_spec(self):
        if self.model.kind == "bernoulli":
            return SimpleTestSpec.bernoulli(self.null, self.alt)
        return SimpleTestSpec.normal_mean(self.null, self.alt)

    def wald_config(self):
        return WaldConfig(self.alpha, self.beta, self.K, self.rho, self.overshoot)

    def ladder(self):
        return sbh_wald_ladder(self.wald_config())

    def schedule_hit(self, n):
        if self.variant == REJECTIVE and n >= self.truncation:
            return True
        return n % self.group_size == 0


@dataclass(frozen=True)
class McReport:
    name: str
    K: int
    K0: int
    replications: int
    fdr_hat: float
    fdr_se: float
    fnr_hat: float
    fnr_se: float
    en_hat: float
    en_se: float
    bound_fdr: float
    bound_fnr: float
    delta: float
    fbh_fdr: float | None = None
    fbh_fdr_se: float | None = None
    fbh_fnr: float | None = None
    fbh_fnr_se: float | None = None
    fbh_total_n: int | None = None
    savings_vs_fbh: float | None = None
    cap_hits: int = 0
    notes: str = ""

    @property
    def K1(self):
        return self.K - self.K0


def _rep_rng(seed, rep, purpose):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, purpose)))


def replication_observations(cfg, rep, steps):
    """First ``steps`` raw observations of replication ``rep``, shape (steps, K)."""
    return cfg.model.draw(_rep_rng(cfg.seed, rep, 0), steps)


@dataclass
class BlockResult:
    """Per-replication outcome arrays for a block of replications."""

    verdict: np.ndarray  # +1 reject, -1 accept
    decision_n: np.ndarray
    decision_stage: np.ndarray
    cap_hit: np.ndarray

    def decisions(self, i):
        """Decision log of row ``i`` ordered like the procedure records it."""
        rows = []
        for k in range(self.verdict.shape[1]):
            verdict = REJECT if self.verdict[i, k] > 0 else ACCEPT
            rows.append(Decision(k, verdict, int(self.decision_stage[i, k]), int(self.decision_n[i, k])))
        rows.sort(key=lambda d: (d.stage, d.verdict != ACCEPT, d.stream))
        return rows


def simulate_block(cfg, reps, cap=STREAM_CAP):
    """Run the sequential procedure for the given replication indices."""
    reps = np.asarray(reps)
    R, K = reps.size, cfg.K
    spec = cfg.test_spec()
    slope, drift = float(spec.slope[0]), spec.drift
    ladder = cfg.ladder()
    if cfg.variant == REJECTIVE:
        stdz = build_rejective_standardizer(ladder, K)
        horizon = min(cap, cfg.truncation)
    else:
        stdz = build_full_standardizer(ladder, K)
        horizon = cap

    rngs = [_rep_rng(cfg.seed, int(i), 0) for i in reps]
    buf = np.empty((R, CHUNK, K))
    sums = np.zeros((R, K))
    active = np.ones((R, K), dtype=bool)
    a = np.zeros(R, dtype=int)
    r = np.zeros(R, dtype=int)
    stage = np.ones(R, dtype=int)
    verdict = np.zeros((R, K), dtype=int)
    decision_n = np.zeros((R, K), dtype=int)
    decision_stage = np.zeros((R, K), dtype=int)
    cap_hit = np.zeros(R, dtype=bool)

    running = np.arange(R)
    n = 0
    while running.size:
        if n % CHUNK == 0:
            for i in running:
                buf[i] = cfg.model.draw(rngs[i], CHUNK)
        n += 1
        x = buf[running, (n - 1) % CHUNK, :]
        sums[running] += np.where(active[running], x, 0.0)
        if not (cfg.schedule_hit(n) or n >= horizon):
            continue
        act = active[running]
        z = stdz(slope * sums[running] - n * drift)
        if n >= horizon:
            acc_mask, rej_mask = act, np.zeros_like(act)
            if cfg.variant == FULL or cfg.truncation > cap:
                cap_hit[running] = True
        elif cfg.variant == REJECTIVE:
            acc_mask, rej_mask = np.zeros_like(act), batch_rejective_step(z, act)
        else:
            acc_mask, rej_mask = batch_sbh_step(z, act, a[running], r[running])
        decided = acc_mask | rej_mask
        hit = decided.any(axis=1)
        if not hit.any():
            continue
        rows = running[hit]
        dec = decided[hit]
        verdict[rows] += np.where(rej_mask[hit], 1, np.where(acc_mask[hit], -1, 0))
        decision_n[rows] = np.where(dec, n, decision_n[rows])
        decision_stage[rows] = np.where(dec, stage[rows][:, None], decision_stage[rows])
        a[rows] += acc_mask[hit].sum(axis=1)
        r[rows] += rej_mask[hit].sum(axis=1)
        stage[rows] += 1
        active[rows] &= ~dec
        running = running[active[running].any(axis=1)]
    return BlockResult(verdict, decision_n, decision_stage, cap_hit)


def _fbh_block(cfg, reps):
    n = cfg.fbh_n
    kind = cfg.model.kind
    obs = np.stack([cfg.model.draw_means(_rep_rng(cfg.seed, int(i), 1), n) for i in reps])
    p = fixed_sample_pvalue(kind, n, obs, cfg.null)
    return _batch_bh(np.asarray(p, dtype=float), cfg.alpha)


def _rates(rejected, truth_null):
    V = (rejected & truth_null).sum(axis=1)
    R = rejected.sum(axis=1)
    U = (~rejected & ~truth_null).sum(axis=1)
    S = (~rejected).sum(axis=1)
    return V / np.maximum(R, 1), U / np.maximum(S, 1)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else 0.0
    return float(x.mean()), float(se)


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SEQBH_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_monte_carlo(cfg, threads=None, block_size=BLOCK_SIZE, cap=STREAM_CAP):
    """Estimate FDR, FNR and expected total sample size for one scenario."""
    reps = np.arange(cfg.replications)
    blocks = [reps[i:i + block_size] for i in range(0, reps.size, block_size)]
    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        results = list(pool.map(lambda b: simulate_block(cfg, b, cap), blocks))
        fbh = list(pool.map(lambda b: _fbh_block(cfg, b), blocks)) if cfg.fbh_n else None

    truth = cfg.truth_null[None, :]
    rejected = np.concatenate([res.verdict for res in results]) > 0
    total_n = np.concatenate([res.decision_n.sum(axis=1) for res in results])
    cap_hits = int(sum(res.cap_hit.sum() for res in results))
    fdp, fnp = _rates(rejected, truth)
    fdr, fdr_se = _mean_se(fdp)
    fnr, fnr_se = _mean_se(fnp)
    en, en_se = _mean_se(total_n)

    K, K0 = cfg.K, int(cfg.truth_null.sum())
    extra = {}
    if fbh is not None:
        fbh_rej = np.concatenate(fbh)
        f_fdp, f_fnp = _rates(fbh_rej, truth)
        fbh_total = cfg.fbh_n * K
        extra = dict(
            zip(("fbh_fdr", "fbh_fdr_se"), _mean_se(f_fdp)),
            **dict(zip(("fbh_fnr", "fbh_fnr_se"), _mean_se(f_fnp))),
            fbh_total_n=fbh_total,
            savings_vs_fbh=100.0 * (1.0 - en / fbh_total),
        )
    return McReport(
        name=cfg.name,
        K=K,
        K0=K0,
        replications=cfg.replications,
        fdr_hat=fdr,
        fdr_se=fdr_se,
        fnr_hat=fnr,
        fnr_se=fnr_se,
        en_hat=en,
        en_se=en_se,
        bound_fdr=K0 * cfg.alpha / K,
        bound_fnr=(K - K0) * cfg.beta / K,
        delta=delta_factor(K),
        cap_hits=cap_hits,
        notes=cfg.notes,
        **extra,
    )
