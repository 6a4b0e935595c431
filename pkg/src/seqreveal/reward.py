"""Frontloaded rent delivery after a low type reveals.

Rent is paid as early as the high type's take-the-money-and-run incentive
allows: the full per-period rent ``Delta C(q)`` (payment ``C_H(q)``) for
``m - 1`` periods, a fraction ``beta`` of it in period ``m``, and nothing
afterwards (payment ``C_L(q)``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .allocation import Allocation, Contract, SeparatingSequence
from .environment import Environment
from .errors import DomainError, UndeliverableRentError

# cap on the scan for general schedules before switching to the closed form
_SCAN_LIMIT = 100_000


@dataclass(frozen=True)
class RewardPlan:
    m: int
    beta: float
    quantities: tuple
    payments: tuple
    delta: float
    target: float
    upfront_bonus: float = 0.0

    @property
    def full_periods(self) -> int:
        return self.m - 1

    def contracts(self):
        return tuple(Contract(q, x) for q, x in zip(self.quantities, self.payments))

    def delivered_rent(self, env: Environment) -> float:
        """Rent implied by the plan, recomputed from ``(m, beta)`` and the quantities."""
        d = self.delta
        dc = np.asarray(env.delta_c(np.array(self.quantities)), dtype=float)
        k = np.arange(self.m)
        w = (1.0 - d) * d**k
        w[-1] *= self.beta
        return (1.0 - d) * self.upfront_bonus + math.fsum(w * dc)

    def to_dict(self):
        return {
            "m": self.m,
            "beta": self.beta,
            "upfront_bonus": self.upfront_bonus,
            "delta": self.delta,
            "target": self.target,
            "schedule": [{"q": q, "x": x} for q, x in zip(self.quantities, self.payments)],
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


def _closed_form_k(target, dc, delta):
    """Largest ``k >= 0`` with ``(1 - delta**k) * dc < target``."""
    m, beta = K.split_rent_constant(np.array([target]), np.array([dc]), delta)
    return int(m[0]) - 1, float(beta[0])


def split_rent(env: Environment, target_rent: float, quantities: Union[float, Sequence[float]],
               delta: Optional[float] = None) -> RewardPlan:
    """Smallest number of rent periods delivering ``target_rent`` exactly.

    ``quantities`` is either a constant reward quantity or a schedule; a
    schedule shorter than needed is extended with its last entry.
    """
    d = env.delta if delta is None else float(delta)
    if not target_rent > 0:
        raise DomainError("target rent must be positive")
    sched = np.atleast_1d(np.asarray(quantities, dtype=float))
    if sched.size == 0:
        raise DomainError("empty quantity schedule")
    dcs = np.asarray(env.delta_c(sched), dtype=float)
    if np.any(dcs <= 0):
        raise UndeliverableRentError("reward quantities must carry positive rent Delta C(q)")

    acc = 0.0
    w = 1.0 - d  # (1 - delta) * delta**k
    for k in range(min(sched.size - 1, _SCAN_LIMIT)):
        inc = w * dcs[k]
        if acc + inc >= target_rent * (1.0 - K.SPLIT_RTOL):
            return _plan(env, sched[: k + 1], min(1.0, (target_rent - acc) / inc), d, target_rent)
        acc += inc
        w *= d
    # constant extension with the last entry, starting at period k0
    k0 = min(sched.size - 1, _SCAN_LIMIT)
    dk0 = d**k0
    rest = target_rent - acc
    last = dcs[k0]
    if rest >= dk0 * last:
        raise UndeliverableRentError(
            f"target rent {target_rent:.6g} is not below the deliverable total {acc + dk0 * last:.6g}"
        )
    k, beta = _closed_form_k(rest / dk0, last, d)
    qs = np.concatenate([sched[:k0], np.full(k + 1, sched[k0])])
    return _plan(env, qs, beta, d, target_rent)


def _plan(env, qs, beta, d, target):
    qs = np.asarray(qs, dtype=float)
    x = np.asarray(env.cost_H(qs), dtype=float).copy()
    x[-1] = float(env.cost_L(qs[-1])) + beta * float(env.delta_c(qs[-1]))
    return RewardPlan(len(qs), float(beta), tuple(float(q) for q in qs), tuple(float(v) for v in x), d, target)


def debt_length_from_ratio(ratio: float, delta: float) -> int:
    """Smallest integer ``T`` with ``1 - delta**T >= ratio``."""
    if not 0.0 < ratio < 1.0:
        raise UndeliverableRentError(f"rent ratio {ratio!r} must lie in (0, 1)")
    if not 0.0 <= delta < 1.0:
        raise DomainError("delta must lie in [0, 1)")
    if delta == 0.0:
        return 1
    T = max(1, math.ceil(math.log1p(-ratio) / math.log(delta)))
    while T > 1 and 1.0 - delta ** (T - 1) >= ratio:
        T -= 1
    while 1.0 - delta**T < ratio:
        T += 1
    return T


def debt_length(env: Environment, q_tilde: float, delta: Optional[float] = None) -> int:
    """Periods of full rent ``Delta C(q_tilde)`` needed to cover ``Delta C(q*_H)``."""
    d = env.delta if delta is None else float(delta)
    dc = float(env.delta_c(q_tilde))
    need = env.first_best.delta_c_at_qstar_H
    if dc <= need:
        raise UndeliverableRentError("Delta C(q_tilde) must exceed Delta C(q*_H)")
    return debt_length_from_ratio(need / dc, d)


def debt_length_limit(ratio: float) -> float:
    """Limit of ``(1 - delta) * T`` as ``delta -> 1``."""
    return -math.log1p(-ratio)


# ---------------------------------------------------------------------------


def sequence_values(seq: SeparatingSequence, env: Environment, delta: float):
    """``(U_L at reveal, high type's best take-and-quit value)`` for one cohort."""
    (fL, fH, _), (tfL, tfH, _) = seq.flows(env)
    off = np.array([0, fL.size])
    uL = float(K.discounted_backward(fL, tfL, delta)[0])
    uH = float(K.segment_sup(off, fH, np.array([tfH]), delta)[0])
    return uL, uH


def frontload_sequence(seq: SeparatingSequence, env: Environment, delta: Optional[float] = None) -> SeparatingSequence:
    """Same quantities, payments reshaped so rent is delivered as early as possible.

    Any value the high type could grab by announcing and quitting is paid as
    an upfront bonus ``U_H / (1 - delta)`` in the first period; the remaining
    low-type rent is split with :func:`split_rent` over the cohort's own
    quantities (reward phase, then the tail quantity).
    """
    d = env.delta if delta is None else float(delta)
    uL, uH = sequence_values(seq, env, d)
    bonus = uH / (1.0 - d)
    rest = uL - uH
    tq = seq.tail.q
    own_q = [c.q for c in seq.reward] + [tq]

    if rest > 0:
        plan = split_rent(env, rest, own_q, d)
        n = max(plan.m, seq.m)
        qs = [own_q[k] if k < len(own_q) else tq for k in range(n)]
        xs = list(plan.payments) + [float(env.cost_L(q)) for q in qs[plan.m:]]
    else:
        # no rent beyond the bonus: pay cost, fold the (nonpositive) remainder into period one
        n = max(seq.m, 1)
        qs = [own_q[k] if k < len(own_q) else tq for k in range(n)]
        xs = [float(env.cost_L(q)) for q in qs]
        xs[0] += rest / (1.0 - d)
    xs[0] += bonus
    reward = tuple(Contract(q, x) for q, x in zip(qs, xs))
    return SeparatingSequence(seq.reveal_time, reward, Contract(tq, float(env.cost_L(tq))))


def frontload(alloc: Allocation, env: Environment, reveal_time: int, delta: Optional[float] = None) -> SeparatingSequence:
    return frontload_sequence(alloc.cohort(reveal_time), env, delta)


def cumulative_payments(seq: SeparatingSequence, n: int, delta: float) -> np.ndarray:
    """Discounted payments ``(1-delta) * sum_{k<K} delta**k x_k`` for ``K = 1..n``."""
    x = np.array([seq.contract_at(k).x for k in range(n)])
    return np.cumsum((1.0 - delta) * delta ** np.arange(n) * x)
