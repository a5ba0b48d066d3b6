"""Stage-wise accept/reject machinery for the sequential BH procedures.

Two variants are provided.  The *full* procedure stops a stream early to
accept or to reject and controls both FDR and FNR.  The *rejective*
procedure only stops early to reject; every stream still active at the
truncation point is accepted.

Everything here works on standardized statistics (see :mod:`seqbh.ladders`)
and knows nothing about the underlying data model.  Stream labels are the
integers ``0..K-1``; ties between equal standardized values are broken by
ascending label.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import StreamUnderrun, UsageError
from .ladders import (
    CriticalLadder,
    build_full_standardizer,
    build_rejective_standardizer,
)

ACCEPT = "accept"
REJECT = "reject"
FULL = "full"
REJECTIVE = "rejective"


@dataclass(frozen=True)
class Decision:
    stream: int
    verdict: str
    stage: int
    sample_size: int


@dataclass(frozen=True)
class StepOutcome:
    kind: str
    accepted: frozenset = frozenset()
    rejected: frozenset = frozenset()

    def __post_init__(self):
        if self.accepted & self.rejected:
            raise AssertionError(
                f"streams {sorted(self.accepted & self.rejected)} both accepted and rejected"
            )


CONTINUE = StepOutcome("continue")


@dataclass
class ProcedureState:
    """Bookkeeping for one run: active set, counters, stage and decision log."""

    K: int
    active: set = field(default_factory=set)
    accepted_count: int = 0
    rejected_count: int = 0
    stage: int = 1
    n: int = 0
    decisions: list = field(default_factory=list)

    @classmethod
    def initial(cls, K):
        if K < 1:
            raise UsageError(f"K must be at least 1, got {K}")
        return cls(K=K, active=set(range(K)))

    @property
    def terminal(self):
        return not self.active

    def check_conservation(self):
        total = self.accepted_count + self.rejected_count + len(self.active)
        if total != self.K:
            raise AssertionError(f"a + r + |I| = {total} != K = {self.K}")

    def _record(self, accepted, rejected):
        for k in sorted(accepted):
            self.decisions.append(Decision(k, ACCEPT, self.stage, self.n))
        for k in sorted(rejected):
            self.decisions.append(Decision(k, REJECT, self.stage, self.n))
        self.active -= accepted | rejected
        self.accepted_count += len(accepted)
        self.rejected_count += len(rejected)
        self.stage += 1
        self.check_conservation()


def _ranked(state, stats):
    if state.terminal:
        raise UsageError("procedure has already terminated")
    keys = set(stats)
    if keys != state.active:
        missing = sorted(state.active - keys)
        extra = sorted(keys - state.active)
        raise UsageError(
            f"statistics must cover exactly the active streams "
            f"(missing {missing}, unexpected {extra})"
        )
    for k, v in stats.items():
        if math.isnan(v):
            raise UsageError(f"statistic for stream {k} is NaN")
    order = sorted(state.active, key=lambda k: (stats[k], k))
    return order, [float(stats[k]) for k in order]


def accept_count(values, K, a):
    """Largest m with the m-th smallest value <= -(K - a - m + 1), else 0."""
    m_j = 0
    for m in range(1, len(values) + 1):
        if values[m - 1] <= -(K - a - m + 1):
            m_j = m
    return m_j


def reject_count(values, K, r):
    """Largest m with the m-th largest value >= K - r - m + 1, else 0."""
    size = len(values)
    m_j = 0
    for m in range(1, size + 1):
        if values[size - m] >= K - r - m + 1:
            m_j = m
    return m_j


def sbh_step(state, stats):
    """Apply one boundary check of the full procedure at sample size ``state.n``.

    ``stats`` maps each active stream to its standardized statistic.  Returns
    ``CONTINUE`` if every ranked statistic is strictly inside its interval;
    otherwise accepts the m_j lowest and rejects the m_j' highest ranked
    streams, updating ``state`` in place.
    """
    order, values = _ranked(state, stats)
    m_acc = accept_count(values, state.K, state.accepted_count)
    m_rej = reject_count(values, state.K, state.rejected_count)
    if m_acc == 0 and m_rej == 0:
        return CONTINUE
    accepted = frozenset(order[:m_acc])
    rejected = frozenset(order[len(order) - m_rej:])
    outcome = StepOutcome("decide", accepted, rejected)
    state._record(accepted, rejected)
    return outcome


def rejective_step(state, stats, n, truncation):
    """Apply one boundary check of the rejective procedure at sample size ``n``.

    Below the truncation point, rejects every stream ranked at or above
    ``l_j = min{l : l-th smallest standardized statistic >= l}``.  At the
    truncation point all active streams are accepted.
    """
    if n > truncation:
        raise UsageError(f"sample size {n} exceeds truncation point {truncation}")
    state.n = n
    order, values = _ranked(state, stats)
    if n == truncation:
        accepted = frozenset(order)
        state._record(accepted, frozenset())
        return StepOutcome("decide", accepted, frozenset())
    first = next((l for l in range(1, len(values) + 1) if values[l - 1] >= l), None)
    if first is None:
        return CONTINUE
    rejected = frozenset(order[first - 1:])
    state._record(frozenset(), rejected)
    return StepOutcome("decide", frozenset(), rejected)


# Row-wise versions used by the Monte Carlo engine.  ``z`` holds standardized
# statistics of shape (R, K); inactive entries are ignored.


def _sort_active(z, active):
    vals = np.where(active, z, np.inf)
    order = np.argsort(vals, axis=1, kind="stable")
    return order, np.take_along_axis(vals, order, axis=1), active.sum(axis=1)


def _scatter(order, pos_mask):
    out = np.zeros(order.shape, dtype=bool)
    np.put_along_axis(out, order, pos_mask, axis=1)
    return out


def batch_sbh_step(z, active, a, r):
    """Vectorized :func:`sbh_step`; returns (accept_mask, reject_mask)."""
    R, K = z.shape
    order, srt, nact = _sort_active(z, active)
    ell = np.arange(1, K + 1)
    valid = ell[None, :] <= nact[:, None]

    acc = valid & (srt <= -(K - a[:, None] - ell[None, :] + 1))
    m_acc = np.where(acc.any(axis=1), K - np.argmax(acc[:, ::-1], axis=1), 0)

    idx = np.clip(nact[:, None] - ell[None, :], 0, K - 1)
    top = np.take_along_axis(srt, idx, axis=1)  # m-th largest in column m-1
    rej = valid & (top >= K - r[:, None] - ell[None, :] + 1)
    m_rej = np.where(rej.any(axis=1), K - np.argmax(rej[:, ::-1], axis=1), 0)

    pos = np.arange(K)[None, :]
    acc_mask = _scatter(order, pos < m_acc[:, None])
    rej_mask = _scatter(order, (pos >= (nact - m_rej)[:, None]) & (pos < nact[:, None]))
    return acc_mask, rej_mask


def batch_rejective_step(z, active):
    """Vectorized :func:`rejective_step` below truncation; returns reject_mask."""
    R, K = z.shape
    order, srt, nact = _sort_active(z, active)
    ell = np.arange(1, K + 1)
    hit = (ell[None, :] <= nact[:, None]) & (srt >= ell[None, :])
    first = np.where(hit.any(axis=1), np.argmax(hit, axis=1), K)
    pos = np.arange(K)[None, :]
    return _scatter(order, (pos >= first[:, None]) & (pos < nact[:, None]))


class ProcedureResult(NamedTuple):
    decisions: list
    per_stream_n: np.ndarray
    total_n: int


class ProcedureRunner:
    """Incremental driver: feed raw statistics at schedule points, get decisions.

    ``ladders`` holds one :class:`CriticalLadder` (full variant) or
    :class:`RejectiveLadder` (rejective variant) per stream.
    """

    def __init__(self, ladders, variant=FULL, truncation=None):
        if variant not in (FULL, REJECTIVE):
            raise UsageError(f"unknown variant {variant!r}")
        K = len(ladders)
        if K < 1:
            raise UsageError("need at least one stream")
        if any(lad.K != K for lad in ladders):
            raise UsageError(f"every ladder must have K={K} levels")
        if variant == REJECTIVE:
            if truncation is None or truncation < 1:
                raise UsageError("the rejective variant needs a truncation point >= 1")
            self.standardizers = [build_rejective_standardizer(l, K) for l in ladders]
        else:
            if not all(isinstance(l, CriticalLadder) for l in ladders):
                raise UsageError("the full variant needs a CriticalLadder per stream")
            self.standardizers = [build_full_standardizer(l, K) for l in ladders]
        self.K = K
        self.variant = variant
        self.truncation = truncation
        self.state = ProcedureState.initial(K)
        self.per_stream_n = np.zeros(K, dtype=int)

    @property
    def terminal(self):
        return self.state.terminal

    def standardize(self, raw):
        return {k: self.standardizers[k](v) for k, v in raw.items()}

    def observe(self, n, raw):
        """Check boundaries at cumulative sample size ``n``.

        ``raw`` maps each active stream to its raw statistic at ``n``.
        """
        if n <= self.state.n:
            raise UsageError(f"schedule must increase: got n={n} after n={self.state.n}")
        self.per_stream_n[sorted(self.state.active)] = n
        z = self.standardize(raw)
        if self.variant == REJECTIVE:
            return rejective_step(self.state, z, n, self.truncation)
        self.state.n = n
        return sbh_step(self.state, z)

    def result(self):
        return ProcedureResult(
            list(self.state.decisions),
            self.per_stream_n.copy(),
            int(self.per_stream_n.sum()),
        )


def _schedule_points(schedule, variant, truncation):
    points = itertools.count(1) if schedule is None else iter(schedule)
    last = 0
    for n in points:
        n = int(n)
        if n <= last:
            raise UsageError(f"schedule must be strictly increasing (got {n} after {last})")
        if variant == REJECTIVE and n >= truncation:
            break
        yield n
        last = n
    if variant == REJECTIVE:
        yield truncation


def run_procedure(suppliers, ladders, schedule=None, variant=FULL, truncation=None):
    """Run a sequential BH procedure to termination.

    Args:
        suppliers: one iterable per stream yielding the raw statistic after
            each new observation (Lambda_1, Lambda_2, ...).
        ladders: one ladder per stream.
        schedule: strictly increasing sample sizes at which boundaries are
            checked; ``None`` means fully sequential (1, 2, 3, ...).
        variant: ``"full"`` or ``"rejective"``.
        truncation: truncation point for the rejective variant.

    Returns:
        ProcedureResult with the decision log, each stream's sample size at
        its decision and the total sample size.

    Raises:
        StreamUnderrun: a supplier ran dry before its stream was decided.
    """
    if len(suppliers) != len(ladders):
        raise UsageError(
            f"{len(suppliers)} suppliers but {len(ladders)} ladders"
        )
    runner = ProcedureRunner(ladders, variant, truncation)
    iterators = [iter(s) for s in suppliers]
    current = {}
    consumed = 0
    for n in _schedule_points(schedule, variant, truncation):
        for k in sorted(runner.state.active):
            for step in range(consumed + 1, n + 1):
                try:
                    current[k] = next(iterators[k])
                except StopIteration:
                    raise StreamUnderrun(k, step) from None
        consumed = n
        runner.observe(n, {k: current[k] for k in runner.state.active})
        if runner.terminal:
            return runner.result()
    raise UsageError("schedule exhausted before every hypothesis was decided")
