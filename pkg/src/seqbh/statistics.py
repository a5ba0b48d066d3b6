"""Per-stream sequential test statistics and their critical values.

Covers simple-vs-simple log-likelihood ratios with closed-form Wald
ladders, exponential-family helpers (cumulant, KL information), sequential
GLR statistics with their signed roots, and the two-sample binomial GLR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logit, xlogy

from .errors import DomainError, NumericalError
from .ladders import CriticalLadder, RejectiveLadder

# Overshoot correction for continuous data (Siegmund's constant).
RHO_CONTINUOUS = 0.583

_MIN_TOL = 1e-12


# -- Wald ladders -----------------------------------------------------------


OUTWARD = "outward"
INWARD = "inward"


def _rho_sign(overshoot):
    if overshoot == OUTWARD:
        return 1.0
    if overshoot == INWARD:
        return -1.0
    raise DomainError(f"overshoot must be 'outward' or 'inward', got {overshoot!r}")


def wald_ab(a, b, rho=0.0, overshoot=OUTWARD):
    """Wald's approximate SPRT boundaries for type I/II levels ``a`` and ``b``.

    Returns ``(log(b/(1-a)) - rho, log((1-b)/a) + rho)``.  With
    ``overshoot="inward"`` the correction is applied the other way,
    ``(log(b/(1-a)) + rho, log((1-b)/a) - rho)``, which compensates for the
    statistic overshooting the boundary.
    """
    if not (0 < a < 1 and 0 < b < 1):
        raise DomainError(f"levels must lie in (0, 1), got a={a}, b={b}")
    if a + b > 1:
        raise DomainError(f"a + b must not exceed 1, got {a + b}")
    if rho < 0:
        raise DomainError(f"rho must be non-negative, got {rho}")
    shift = _rho_sign(overshoot) * rho
    lo = math.log(b / (1 - a)) - shift
    hi = math.log((1 - b) / a) + shift
    if not lo < hi:
        raise DomainError(f"degenerate boundaries A={lo} and B={hi}")
    return lo, hi


@dataclass(frozen=True)
class WaldConfig:
    alpha: float
    beta: float
    K: int
    rho: float = 0.0
    overshoot: str = OUTWARD

    def __post_init__(self):
        _rho_sign(self.overshoot)
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if self.alpha + self.beta > 1:
            raise DomainError(f"alpha + beta must not exceed 1, got {self.alpha + self.beta}")
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K}")
        if self.rho < 0:
            raise DomainError(f"rho must be non-negative, got {self.rho}")


def fractional_levels(cfg, s):
    """Return ``(alpha_s, beta_s)`` used to build the s-th rung of the ladder."""
    K, a, b = cfg.K, cfg.alpha, cfg.beta
    if not 1 <= s <= K:
        raise DomainError(f"s must lie in 1..{K}, got {s}")
    alpha_s = a * (K - s * b) / (K * (K - b))
    beta_s = b * (K - s * a) / (K * (K - a))
    return alpha_s, beta_s


def sbh_wald_ladder(cfg):
    """Closed-form critical values A_s, B_s for a simple-vs-simple LLR."""
    K, a, b = cfg.K, cfg.alpha, cfg.beta
    rho = _rho_sign(cfg.overshoot) * cfg.rho
    lower = np.empty(K)
    upper = np.empty(K)
    for s in range(1, K + 1):
        alpha_s, beta_s = fractional_levels(cfg, s)
        lower[s - 1] = math.log(s * b / ((1 - alpha_s) * K)) - rho
        upper[s - 1] = math.log((1 - beta_s) * K / (s * a)) + rho
    if np.any(np.diff(lower) < 0) or np.any(np.diff(upper) > 0):  # pragma: no cover
        raise AssertionError("Wald ladder is not monotone")
    return CriticalLadder(lower, upper)


def rejective_llr_ladder(alpha, K, rho=0.0):
    """Upper critical values ``log(K/(s*alpha)) + rho`` for the rejective procedure.

    For a likelihood ratio these satisfy the type I bound for every horizon,
    not only approximately.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    s = np.arange(1, K + 1)
    return RejectiveLadder(np.log(K / (s * alpha)) + rho)


# -- exponential families ---------------------------------------------------


class ExpFamilyModel:
    """Natural exponential family ``exp(theta.x - psi(theta))``.

    Subclasses provide the cumulant ``psi``, the mean map ``grad_psi`` and its
    inverse.  ``kl_from_mean`` evaluates the KL information using the MLE's
    mean, which stays finite when the MLE sits on the boundary.
    """

    dimension = 1

    def psi(self, theta):
        raise NotImplementedError

    def grad_psi(self, theta):
        raise NotImplementedError

    def grad_psi_inv(self, mean):
        raise NotImplementedError

    def kl_from_mean(self, mean, lam):
        theta = self.grad_psi_inv(mean)
        return float(np.dot(theta - lam, mean) - (self.psi(theta) - self.psi(lam)))


class NormalModel(ExpFamilyModel):
    """Independent unit-variance normal coordinates."""

    def __init__(self, dimension=1):
        self.dimension = dimension

    def psi(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(0.5 * np.dot(theta, theta))

    def grad_psi(self, theta):
        return np.asarray(theta, dtype=float).copy()

    def grad_psi_inv(self, mean):
        return np.asarray(mean, dtype=float).copy()

    def kl_from_mean(self, mean, lam):
        diff = np.asarray(mean, dtype=float) - np.asarray(lam, dtype=float)
        return float(0.5 * np.dot(diff, diff))


class BinomialModel(ExpFamilyModel):
    """Independent Bin(m_i, p_i) coordinates in logit parametrization.

    ``BinomialModel((1,))`` is the Bernoulli family.
    """

    def __init__(self, trials=(1,)):
        self.trials = np.asarray(trials, dtype=float)
        if np.any(self.trials < 1):
            raise DomainError(f"trial counts must be >= 1, got {trials}")
        self.dimension = self.trials.size

    def psi(self, theta):
        return float(np.sum(self.trials * np.logaddexp(0.0, theta)))

    def grad_psi(self, theta):
        return self.trials * expit(theta)

    def grad_psi_inv(self, mean):
        return logit(np.asarray(mean, dtype=float) / self.trials)

    def kl_from_mean(self, mean, lam):
        p = np.asarray(mean, dtype=float) / self.trials
        q = expit(lam)
        return float(np.sum(self.trials * bernoulli_kl(p, q)))


def bernoulli_kl(p, q):
    """KL(Bern(p) || Bern(q)) with the convention 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        return xlogy(p, p) - xlogy(p, q) + xlogy(1 - p, 1 - p) - xlogy(1 - p, 1 - q)


def bernoulli_natural(p):
    """Logit of a success probability."""
    if not 0 < p < 1:
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    return math.log(p / (1 - p))


def bernoulli_psi(theta):
    return float(np.logaddexp(0.0, theta))


def kl_info(model, theta, lam):
    """KL information ``(theta-lam).grad_psi(theta) - [psi(theta) - psi(lam)]``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    value = np.dot(theta - lam, model.grad_psi(theta)) - (
        model.psi(theta) - model.psi(lam)
    )
    return float(value)


# -- simple hypotheses ------------------------------------------------------


@dataclass(frozen=True)
class SimpleTestSpec:
    """Simple null ``theta = eta`` against simple alternative ``theta = gamma``."""

    model: ExpFamilyModel
    eta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if np.array_equal(eta, gamma):
            raise DomainError("null and alternative parameters must differ")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def slope(self):
        """Coefficient vector of the sufficient statistic in the LLR."""
        return self.gamma - self.eta

    @property
    def drift(self):
        """Per-observation offset ``psi(gamma) - psi(eta)``."""
        return self.model.psi(self.gamma) - self.model.psi(self.eta)

    @classmethod
    def bernoulli(cls, p0, p1):
        return cls(BinomialModel((1,)), bernoulli_natural(p0), bernoulli_natural(p1))

    @classmethod
    def normal_mean(cls, theta0, theta1):
        return cls(NormalModel(1), theta0, theta1)


def llr_increment(spec, x):
    """One observation's contribution to the log-likelihood ratio."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.dot(spec.slope, x) - spec.drift)


class StatisticAccumulator:
    """Running sufficient statistic ``S_n`` and the statistic built from it."""

    def __init__(self, dimension=1):
        self.n = 0
        self.total = np.zeros(dimension)
        self.value = 0.0

    def update(self, x):
        self.n += 1
        self.total = self.total + np.atleast_1d(np.asarray(x, dtype=float))
        self.value = self._statistic()
        return self.value

    def _statistic(self):
        raise NotImplementedError

    def supply(self, observations):
        """Yield the statistic after each observation."""
        for x in observations:
            yield self.update(x)


class LLRAccumulator(StatisticAccumulator):
    def __init__(self, spec):
        super().__init__(spec.model.dimension)
        self.spec = spec

    def _statistic(self):
        return float(np.dot(self.spec.slope, self.total) - self.n * self.spec.drift)


# -- composite hypotheses ---------------------------------------------------


@dataclass(frozen=True)
class LevelPiece:
    """A curve ``t -> lambda(t)`` on ``[lo, hi]``; a point when lo == hi."""

    curve: Callable
    lo: float
    hi: float


@dataclass(frozen=True)
class GlrSpec:
    """Composite test ``u(theta) <= u0`` against ``u(theta) >= u1``.

    ``level_set(c)`` returns the pieces parametrizing ``{lambda : u(lambda) = c}``
    in natural coordinates.
    """

    model: ExpFamilyModel
    u: Callable
    u0: float
    u1: float
    level_set: Callable = field(repr=False)

    def __post_init__(self):
        if not self.u0 < self.u1:
            raise DomainError(f"need u0 < u1, got u0={self.u0}, u1={self.u1}")

    @classmethod
    def normal_mean(cls, u0, u1):
        return cls(
            NormalModel(1),
            lambda th: float(np.atleast_1d(th)[0]),
            u0,
            u1,
            lambda c: [LevelPiece(lambda t: np.array([t]), c, c)],
        )

    @classmethod
    def bernoulli(cls, p0, p1):
        def level(c):
            return [LevelPiece(lambda t: np.array([t]), logit(c), logit(c))]

        return cls(
            BinomialModel((1,)),
            lambda th: float(expit(np.atleast_1d(th)[0])),
            p0,
            p1,
            level,
        )

    @classmethod
    def two_sample_binomial(cls, m1, m2, delta):
        """``u = (p1 - p2)^2`` with ``u0 = 0`` and ``u1 = delta^2``."""
        if not 0 < delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {delta}")

        def level(c):
            d = math.sqrt(c)
            eps = 1e-12
            if d == 0:
                return [LevelPiece(lambda t: logit(np.array([t, t])), eps, 1 - eps)]
            return [
                LevelPiece(lambda t: logit(np.array([t, t - d])), d + eps, 1 - eps),
                LevelPiece(lambda t: logit(np.array([t, t + d])), eps, 1 - d - eps),
            ]

        def u(th):
            p = expit(np.asarray(th, dtype=float))
            return float((p[0] - p[1]) ** 2)

        return cls(BinomialModel((m1, m2)), u, 0.0, delta**2, level)


def _bounded_min(f, lo, hi):
    """Minimum of a unimodal f on [lo, hi], endpoints included.

    Bounded Brent never evaluates the endpoints themselves, so a minimum
    sitting on the boundary would otherwise be missed by roughly the tolerance.
    """
    res = minimize_scalar(
        f, bounds=(lo, hi), method="bounded", options={"xatol": _MIN_TOL, "maxiter": 2000}
    )
    if not res.success:
        raise NumericalError(f"bounded minimization failed: {res.message}")
    return min(float(res.fun), float(f(lo)), float(f(hi)))


def _level_infimum(model, mean, pieces):
    best = math.inf
    for piece in pieces:
        if piece.lo == piece.hi:
            value = model.kl_from_mean(mean, piece.curve(piece.lo))
        else:
            value = _bounded_min(
                lambda t: model.kl_from_mean(mean, piece.curve(t)), piece.lo, piece.hi
            )
        best = min(best, value)
    return max(best, 0.0)


def glr_statistics(spec, acc):
    """Log-GLR statistics ``(Lambda_H, Lambda_G)`` from an accumulator.

    Each is ``n`` times the smallest KL information between the MLE and the
    level set ``u = u0`` (respectively ``u = u1``).
    """
    if acc.n < 1:
        raise DomainError("need at least one observation")
    mean = acc.total / acc.n
    lam_h = acc.n * _level_infimum(spec.model, mean, spec.level_set(spec.u0))
    lam_g = acc.n * _level_infimum(spec.model, mean, spec.level_set(spec.u1))
    return lam_h, lam_g


def signed_root(lambda_h, lambda_g, u_hat, u0):
    """Signed-root statistic: +sqrt(2 Lambda_H) above the null boundary, else -sqrt(2 Lambda_G).

    ``lambda_h`` and ``lambda_g`` already include the factor n.
    """
    if lambda_h < 0 or lambda_g < 0:
        raise DomainError("GLR statistics must be non-negative")
    if u_hat > u0 and lambda_h >= lambda_g:
        return math.sqrt(2 * lambda_h)
    return -math.sqrt(2 * lambda_g)


class GLRAccumulator(StatisticAccumulator):
    """Signed-root GLR statistic updated one observation at a time."""

    def __init__(self, spec):
        super().__init__(spec.model.dimension)
        self.spec = spec

    def _statistic(self):
        lam_h, lam_g = glr_statistics(self.spec, self)
        theta_hat = self.spec.model.grad_psi_inv(self.total / self.n)
        return signed_root(lam_h, lam_g, self.spec.u(theta_hat), self.spec.u0)


# -- two-sample binomial ----------------------------------------------------


@dataclass(frozen=True)
class TwoSampleBinomialSpec:
    m1: int
    m2: int
    delta: float = 0.0

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise DomainError(f"trials per step must be >= 1, got {self.m1}, {self.m2}")
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")


def _two_sample_kl(p_hat, pi, m):
    return float(np.sum(m * bernoulli_kl(p_hat, pi)))


def two_sample_binomial_glr(spec, counts, n, alternative=False):
    """Log-GLR for ``p1 == p2`` (or ``|p1 - p2| == delta``) from cumulative counts.

    Each time step contributes m_i Bernoulli trials to sample i, so each KL
    term is weighted by m_i; with m1 == m2 == 1 this is the familiar
    unweighted two-sample form.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    m = np.array([spec.m1, spec.m2], dtype=float)
    y = np.asarray(counts, dtype=float)
    if np.any(y < 0) or np.any(y > n * m):
        raise DomainError(f"counts {tuple(counts)} outside [0, n*m_i]")
    p_hat = y / (n * m)
    if not alternative or spec.delta == 0:
        pooled = y.sum() / (n * m.sum())
        return n * _two_sample_kl(p_hat, np.array([pooled, pooled]), m)

    d = spec.delta
    if math.isclose(abs(p_hat[0] - p_hat[1]), d, rel_tol=0.0, abs_tol=1e-12):
        return 0.0
    best = math.inf
    eps = 1e-12
    for sign, lo, hi in ((1.0, d, 1.0), (-1.0, 0.0, 1.0 - d)):
        value = _bounded_min(
            lambda t: _two_sample_kl(p_hat, np.array([t, t - sign * d]), m),
            lo + eps,
            hi - eps,
        )
        best = min(best, value)
    return n * max(best, 0.0)


class TwoSampleBinomialAccumulator(StatisticAccumulator):
    """Signed-root two-sample binomial GLR over paired counts ``(Y1, Y2)``."""

    def __init__(self, spec):
        super().__init__(2)
        if spec.delta <= 0:
            raise DomainError("the signed-root statistic needs delta > 0")
        self.spec = spec

    def _statistic(self):
        lam_h = two_sample_binomial_glr(self.spec, self.total, self.n)
        lam_g = two_sample_binomial_glr(self.spec, self.total, self.n, alternative=True)
        p_hat = self.total / (self.n * np.array([self.spec.m1, self.spec.m2]))
        return signed_root(lam_h, lam_g, (p_hat[0] - p_hat[1]) ** 2, 0.0)


# -- Monte Carlo calibration ------------------------------------------------


def _extreme_paths(make_accumulator, sampler, horizon, reps, rng, reducer):
    out = np.empty(reps)
    for i in range(reps):
        acc = make_accumulator()
        path = [acc.update(x) for x in sampler(rng, horizon)]
        out[i] = reducer(path)
    return out


def calibrate_ladder_mc(
    make_accumulator,
    null_sampler,
    K,
    alpha,
    horizon,
    reps,
    rng,
    alt_sampler=None,
    beta=None,
):
    """Critical values from simulated statistic paths.

    ``B_s`` is the upper ``s*alpha/K`` quantile of ``max_{n <= horizon}
    Lambda_n`` under the null sampler.  With an alternative sampler, ``A_s``
    is the lower ``s*beta/K`` quantile of the running minimum under it.
    Dropping the no-prior-crossing condition makes both choices conservative.

    Samplers are called as ``sampler(rng, horizon)`` and return an iterable
    of ``horizon`` observations.
    """
    s = np.arange(1, K + 1)
    highs = _extreme_paths(make_accumulator, null_sampler, horizon, reps, rng, max)
    upper = np.quantile(highs, 1 - s * alpha / K)
    if alt_sampler is None:
        return RejectiveLadder(upper)
    if beta is None:
        raise DomainError("beta is required when an alternative sampler is given")
    lows = _extreme_paths(make_accumulator, alt_sampler, horizon, reps, rng, min)
    lower = np.quantile(lows, s * beta / K)
    return CriticalLadder(lower, upper)
