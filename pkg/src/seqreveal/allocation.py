"""Sequential-revelation allocations and exact evaluation of their payoffs.

An allocation is stored in eventually-stationary form: an explicit prefix of
``N`` pooling contracts and revelation masses, a constant pooling contract
afterwards, and a geometric revelation tail ``r_t = r_{N-1} * rho**(t-N+1)``.
Cohorts revealing at ``t >= N`` follow a stationary template.

Evaluation compiles an allocation into flat arrays over a finite window
``[0, L)`` with ``L = N + 3 * max_reward_length``. Beyond the window every
flow is of the form ``A + B * rho**(t-L)``, so continuation values there are
available in closed form and nothing is truncated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from . import _kernels as K
from .environment import AgentType, Environment, TypeLike, _as_type
from .errors import CohortLookupError, DomainError, StructuralError, ValidityError

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Contract:
    q: float
    x: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.x)):
            raise ValidityError("contract entries must be finite")
        if self.q < 0:
            raise ValidityError(f"negative quantity {self.q}")

    def as_dict(self):
        return {"q": self.q, "x": self.x}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["q"]), float(d["x"]))


@dataclass(frozen=True)
class SeparatingSequence:
    """Contracts promised to a low type who reveals at ``reveal_time``."""

    reveal_time: int
    reward: tuple
    tail: Contract

    def __post_init__(self):
        object.__setattr__(self, "reward", tuple(self.reward))
        if self.reveal_time < 0:
            raise ValidityError("reveal_time must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.reward)

    def quantities(self):
        return np.array([c.q for c in self.reward], dtype=float)

    def payments(self):
        return np.array([c.x for c in self.reward], dtype=float)

    def contract_at(self, k: int) -> Contract:
        """Contract ``k`` periods after revelation."""
        return self.reward[k] if k < self.m else self.tail

    def flows(self, env: Environment):
        """Per-period (L-rent, H-rent, principal profit) over the reward phase and tail."""
        q, x = self.quantities(), self.payments()
        tq, tx = self.tail.q, self.tail.x
        rew = (x - env.cost_L(q), x - env.cost_H(q), env.v(q) - x)
        tail = (tx - float(env.cost_L(tq)), tx - float(env.cost_H(tq)), float(env.v(tq)) - tx)
        return rew, tail

    def as_dict(self):
        return {"reward": [c.as_dict() for c in self.reward], "tail": self.tail.as_dict()}

    @classmethod
    def from_dict(cls, T, d):
        return cls(int(T), tuple(Contract.from_dict(c) for c in d["reward"]), Contract.from_dict(d["tail"]))


@dataclass(frozen=True)
class Allocation:
    pooling_prefix: tuple
    pooling_tail: Contract
    cohorts: Mapping[int, SeparatingSequence]
    reveal_prefix: tuple
    rho: float = 0.0
    cohort_template: Optional[SeparatingSequence] = None

    def __post_init__(self):
        object.__setattr__(self, "pooling_prefix", tuple(self.pooling_prefix))
        object.__setattr__(self, "reveal_prefix", tuple(float(r) for r in self.reveal_prefix))
        object.__setattr__(self, "cohorts", dict(sorted((int(k), v) for k, v in self.cohorts.items())))
        N = len(self.reveal_prefix)
        if N == 0:
            raise ValidityError("allocation needs at least one explicit period")
        if len(self.pooling_prefix) != N:
            raise ValidityError("pooling_prefix and reveal_prefix must have the same length")
        if not 0.0 <= self.rho < 1.0:
            raise ValidityError("rho must lie in [0, 1)")
        if any(not (r >= 0.0 and math.isfinite(r)) for r in self.reveal_prefix):
            raise ValidityError("reveal masses must be nonnegative and finite")
        for T, c in self.cohorts.items():
            if c.reveal_time != T:
                raise ValidityError(f"cohort keyed {T} has reveal_time {c.reveal_time}")

    # -- revelation masses ----------------------------------------------

    @property
    def N(self) -> int:
        return len(self.reveal_prefix)

    @property
    def tail_mass(self) -> float:
        """Total mass revealing at dates ``t >= N``."""
        s = self.reveal_prefix[-1]
        return s * self.rho / (1.0 - self.rho)

    @property
    def total_revealed(self) -> float:
        return math.fsum(self.reveal_prefix) + self.tail_mass

    def reveal_mass(self, t: int) -> float:
        if t < 0:
            raise DomainError("period must be nonnegative")
        if t < self.N:
            return self.reveal_prefix[t]
        return self.reveal_prefix[-1] * self.rho ** (t - self.N + 1)

    def revealed_before(self, t: int) -> float:
        """``R_t``: mass revealed in periods strictly before ``t``."""
        if t <= self.N:
            return math.fsum(self.reveal_prefix[:t])
        s, rho = self.reveal_prefix[-1], self.rho
        return math.fsum(self.reveal_prefix) + s * rho * (1.0 - rho ** (t - self.N)) / (1.0 - rho)

    def reveal_path(self, n: int) -> np.ndarray:
        return np.array([self.reveal_mass(t) for t in range(n)])

    # -- contracts --------------------------------------------------------

    def pooling_contract(self, t: int) -> Contract:
        return self.pooling_prefix[t] if t < self.N else self.pooling_tail

    @property
    def template(self) -> Optional[SeparatingSequence]:
        if self.cohort_template is not None:
            return self.cohort_template
        return self.cohorts.get(self.N - 1)

    def has_tail_cohorts(self) -> bool:
        return self.tail_mass > 0.0

    def cohort(self, T: int) -> SeparatingSequence:
        if T in self.cohorts:
            return self.cohorts[T]
        if T >= self.N and self.template is not None:
            return replace(self.template, reveal_time=T)
        raise CohortLookupError(f"no separating sequence for reveal time {T}")

    def max_reward_length(self) -> int:
        ms = [c.m for c in self.cohorts.values()]
        if self.template is not None:
            ms.append(self.template.m)
        return max(ms, default=0)

    def window(self) -> int:
        return self.N + 3 * max(self.max_reward_length(), 1)

    # -- validation and serialisation ---------------------------------------

    def validate(self, env: Environment):
        """Range checks against an environment; raises ValidityError."""
        cap = 2.0 * float(env.cost_H(env.q_bar))
        contracts = list(self.pooling_prefix) + [self.pooling_tail]
        for c in self.cohorts.values():
            contracts += list(c.reward) + [c.tail]
        if self.cohort_template is not None:
            contracts += list(self.cohort_template.reward) + [self.cohort_template.tail]
        for c in contracts:
            if c.q > env.q_bar * (1 + 1e-12):
                raise ValidityError(f"quantity {c.q} exceeds q_bar={env.q_bar}")
            if c.x < 0 or c.x > cap:
                raise ValidityError(f"payment {c.x} outside [0, 2*C_H(q_bar)]")
        if self.total_revealed > env.alpha0 + MASS_TOL:
            raise ValidityError(f"revealed mass {self.total_revealed} exceeds alpha0={env.alpha0}")
        for T in range(self.N):
            if self.reveal_prefix[T] > 0 and T not in self.cohorts:
                raise StructuralError(f"positive mass reveals at {T} but no cohort is defined")
        if self.has_tail_cohorts() and self.template is None:
            raise StructuralError("geometric tail has positive mass but no cohort template")
        return self

    def to_dict(self):
        d = {
            "pooling_prefix": [c.as_dict() for c in self.pooling_prefix],
            "pooling_tail": self.pooling_tail.as_dict(),
            "cohorts": {str(T): c.as_dict() for T, c in self.cohorts.items()},
            "reveal_prefix": list(self.reveal_prefix),
            "rho": self.rho,
        }
        if self.cohort_template is not None:
            d["cohort_template"] = self.cohort_template.as_dict()
        return d

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d, env: Optional[Environment] = None):
        try:
            tmpl = d.get("cohort_template")
            alloc = cls(
                pooling_prefix=tuple(Contract.from_dict(c) for c in d["pooling_prefix"]),
                pooling_tail=Contract.from_dict(d["pooling_tail"]),
                cohorts={int(T): SeparatingSequence.from_dict(T, c) for T, c in d["cohorts"].items()},
                reveal_prefix=tuple(float(r) for r in d["reveal_prefix"]),
                rho=float(d.get("rho", 0.0)),
                cohort_template=None if tmpl is None else SeparatingSequence.from_dict(0, tmpl),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidityError(f"malformed allocation document: {exc}") from None
        if env is not None:
            alloc.validate(env)
        return alloc

    @classmethod
    def from_json(cls, text: str, env: Optional[Environment] = None):
        return cls.from_dict(json.loads(text), env)


def all_pooling(env: Environment, N: int = 1, q: Optional[float] = None) -> Allocation:
    """Benchmark with no revelation: everyone takes ``(q, C_H(q))`` forever."""
    q = env.first_best.q_star_H if q is None else q
    c = Contract(q, float(env.cost_H(q)))
    return Allocation((c,) * N, c, {}, (0.0,) * N, 0.0)


# ---------------------------------------------------------------------------
# compiled form


@dataclass
class Compiled:
    """Flat-array view of an allocation over the window ``[0, L)``.

    Pooling flows are per agent: ``pool_fL = x - C_L(q)``, ``pool_fH = x - C_H(q)``
    and ``pool_pp = v(q) - x``. Cohorts live in a table addressed by
    ``cohort_ids[t]`` (``-1`` means no separating contract offered at ``t``).
    """

    delta: float
    N: int
    L: int
    pool_fL: np.ndarray
    pool_fH: np.ndarray
    pool_pp: np.ndarray
    pool_tail: tuple
    r: np.ndarray
    R: np.ndarray
    s: float
    rho: float
    offsets: np.ndarray
    rew_fL: np.ndarray
    rew_fH: np.ndarray
    rew_pp: np.ndarray
    tail_fL: np.ndarray
    tail_fH: np.ndarray
    tail_pp: np.ndarray
    cohort_ids: np.ndarray
    template_id: int
    alpha0: float
    pi_star_H: float
    gain: float  # pi_L(q*_L) - pi_H(q*_H)
    extra: dict = field(default_factory=dict)

    @property
    def G(self) -> float:
        return self.s * self.rho / (1.0 - self.rho)

    @property
    def R_N(self) -> float:
        return float(self.R[self.N])


def build_compiled(delta, pool_flows, pool_tail, reveal_prefix, rho, table, prefix_ids, template_id,
                   alpha0, pi_star_H, gain) -> Compiled:
    """Assemble a :class:`Compiled` from per-period arrays.

    ``pool_flows`` is a triple of length-``N`` arrays, ``table`` a list of
    ``((fL, fH, pp), (tfL, tfH, tpp))`` cohort entries, ``prefix_ids`` the
    table index used at each prefix date.
    """
    fL, fH, pp = (np.asarray(a, dtype=float) for a in pool_flows)
    N = fL.size
    lengths = np.array([len(e[0][0]) for e in table], dtype=np.int64)
    max_m = int(lengths.max()) if lengths.size else 0
    L = N + 3 * max(max_m, 1)
    offsets = np.zeros(len(table) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    if table:
        rew = [np.concatenate([np.asarray(e[0][j], dtype=float) for e in table]) for j in range(3)]
        tails = [np.array([e[1][j] for e in table], dtype=float) for j in range(3)]
    else:
        rew = [np.zeros(0)] * 3
        tails = [np.zeros(0)] * 3
    pad = L - N
    r_pre = np.asarray(reveal_prefix, dtype=float)
    s = float(r_pre[-1])
    r = np.concatenate([r_pre, s * rho ** np.arange(1, pad + 1)])
    R = np.zeros(L + 1)
    np.cumsum(r, out=R[1:])
    ids = np.full(L, -1, dtype=np.int64)
    ids[:N] = prefix_ids
    if s * rho > 0:
        if template_id < 0:
            raise StructuralError("geometric tail has positive mass but no cohort template")
        ids[N:] = template_id
    return Compiled(
        delta=float(delta), N=N, L=L,
        pool_fL=np.concatenate([fL, np.full(pad, pool_tail[0])]),
        pool_fH=np.concatenate([fH, np.full(pad, pool_tail[1])]),
        pool_pp=np.concatenate([pp, np.full(pad, pool_tail[2])]),
        pool_tail=tuple(float(v) for v in pool_tail),
        r=r, R=R, s=s, rho=float(rho), offsets=offsets,
        rew_fL=rew[0], rew_fH=rew[1], rew_pp=rew[2],
        tail_fL=tails[0], tail_fH=tails[1], tail_pp=tails[2],
        cohort_ids=ids, template_id=int(template_id),
        alpha0=float(alpha0), pi_star_H=float(pi_star_H), gain=float(gain),
    )


def compile_allocation(alloc: Allocation, env: Environment, delta: Optional[float] = None) -> Compiled:
    delta = env.delta if delta is None else float(delta)
    N = alloc.N
    q = np.array([c.q for c in alloc.pooling_prefix])
    x = np.array([c.x for c in alloc.pooling_prefix])
    pool = (x - env.cost_L(q), x - env.cost_H(q), env.v(q) - x)
    tq, tx = alloc.pooling_tail.q, alloc.pooling_tail.x
    pool_tail = (tx - float(env.cost_L(tq)), tx - float(env.cost_H(tq)), float(env.v(tq)) - tx)

    table, index = [], {}
    for T, c in alloc.cohorts.items():
        if T < N:
            index[T] = len(table)
            table.append(c.flows(env))
    template_id = -1
    if alloc.has_tail_cohorts():
        tmpl = alloc.template
        if tmpl is None:
            raise StructuralError("geometric tail has positive mass but no cohort template")
        template_id = len(table)
        table.append(tmpl.flows(env))
    prefix_ids = np.full(N, -1, dtype=np.int64)
    for T in range(N):
        if T in index:
            prefix_ids[T] = index[T]
        elif alloc.reveal_prefix[T] > 0:
            raise StructuralError(f"positive mass reveals at {T} but no cohort is defined")
    fb = env.first_best
    return build_compiled(delta, pool, pool_tail, alloc.reveal_prefix, alloc.rho, table, prefix_ids,
                          template_id, env.alpha0, fb.pi_star_H, fb.pi_star_L - fb.pi_star_H)


# ---------------------------------------------------------------------------
# principal profit


def tail_coefficients(c: Compiled):
    """``(A, B)`` with principal flow ``A + B * rho**(t-L)`` for every ``t >= L``."""
    N, L, s, rho = c.N, c.L, c.s, c.rho
    G = c.G
    pf = c.pool_tail[2]
    ids = c.cohort_ids[:N]
    has = ids >= 0
    settled = float(np.dot(c.r[:N][has], c.tail_pp[ids[has]]))
    A = (1.0 - c.R_N - G) * pf + settled
    B = pf * G * rho ** (L - N + 1)
    if c.template_id >= 0 and G > 0:
        a, b = c.offsets[c.template_id], c.offsets[c.template_id + 1]
        rp = c.rew_pp[a:b]
        tp = c.tail_pp[c.template_id]
        m = b - a
        k = np.arange(m)
        A += tp * G
        B += float(np.dot(s * rho ** (L - k - N + 1), rp)) - tp * G * rho ** (L - m - N + 1)
    return A, B


def principal_flows(c: Compiled) -> np.ndarray:
    sep = K.scatter_cohorts(c.cohort_ids, c.r, c.offsets, c.rew_pp, c.tail_pp, c.L)
    return (1.0 - c.R[1:]) * c.pool_pp + sep


def principal_path(c: Compiled):
    """Flows on ``[0, L)``, continuation profits ``Pi_0 .. Pi_L`` and ``(A, B)``."""
    flow = principal_flows(c)
    A, B = tail_coefficients(c)
    d = c.delta
    Pi_L = A + (1.0 - d) * B / (1.0 - d * c.rho)
    return flow, K.discounted_backward(flow, Pi_L, d), (A, B)


def nr_slacks(c: Compiled):
    """NR slacks on ``[0, L)`` and the two tail certificate coefficients.

    For ``t >= L`` the slack equals ``c0 + c1 * rho**(t-L)``.
    """
    _, Pi, (A, B) = principal_path(c)
    d = c.delta
    slack = Pi[:-1] - (c.pi_star_H + c.R[:-1] * c.gain)
    G = c.G
    c0 = A - c.pi_star_H - (c.R_N + G) * c.gain
    c1 = (1.0 - d) * B / (1.0 - d * c.rho) + G * c.rho ** (c.L - c.N) * c.gain
    return slack, c0, c1, Pi


# ---------------------------------------------------------------------------
# public payoff functionals


@dataclass
class PayoffReport:
    """Continuation values over the window ``0 .. L`` (index ``L`` is the stationary tail)."""

    L: int
    U_P_L: np.ndarray
    U_P_H: np.ndarray
    cohort_values: Dict[int, np.ndarray]
    template_values: Optional[np.ndarray]
    flows: np.ndarray
    Pi: np.ndarray


def _cohort_path(seq: SeparatingSequence, env, delta):
    (fL, _, _), (tfL, _, _) = seq.flows(env)
    return K.discounted_backward(fL, tfL, delta)


def payoff_report(alloc: Allocation, env: Environment, delta: Optional[float] = None) -> PayoffReport:
    delta = env.delta if delta is None else float(delta)
    c = compile_allocation(alloc, env, delta)
    UPL = K.discounted_backward(c.pool_fL, c.pool_tail[0], delta)
    UPH = K.discounted_backward(c.pool_fH, c.pool_tail[1], delta)
    vals = {T: _cohort_path(s, env, delta) for T, s in alloc.cohorts.items()}
    tv = _cohort_path(alloc.template, env, delta) if alloc.template is not None else None
    flow, Pi, _ = principal_path(c)
    return PayoffReport(c.L, UPL, UPH, vals, tv, flow, Pi)


def agent_pool_value(alloc: Allocation, env: Environment, kind: TypeLike, t: int,
                     delta: Optional[float] = None) -> float:
    """Averaged value of a type who takes the pooling contract from ``t`` on forever."""
    if t < 0:
        raise DomainError("period must be nonnegative")
    delta = env.delta if delta is None else float(delta)
    kind = _as_type(kind)
    if t >= alloc.N:
        c = alloc.pooling_tail
        return float(c.x - env.cost(kind, c.q))
    q = np.array([c.q for c in alloc.pooling_prefix[t:]])
    x = np.array([c.x for c in alloc.pooling_prefix[t:]])
    tc = alloc.pooling_tail
    vals = K.discounted_backward(x - env.cost(kind, q), tc.x - float(env.cost(kind, tc.q)), delta)
    return float(vals[0])


def agent_separating_value(alloc: Allocation, env: Environment, reveal_time: int, t: int,
                           delta: Optional[float] = None) -> float:
    """Averaged value at ``t`` of a low type who revealed at ``reveal_time``."""
    delta = env.delta if delta is None else float(delta)
    seq = alloc.cohort(reveal_time)
    k = t - reveal_time
    if k < 0:
        raise DomainError("t must not precede the reveal time")
    vals = _cohort_path(seq, env, delta)
    return float(vals[min(k, seq.m)])


def principal_profit(alloc: Allocation, env: Environment, t: int = 0,
                     delta: Optional[float] = None) -> float:
    if t < 0:
        raise DomainError("period must be nonnegative")
    c = compile_allocation(alloc, env, delta)
    _, Pi, (A, B) = principal_path(c)
    if t <= c.L:
        return float(Pi[t])
    d = c.delta
    return float(A + (1.0 - d) * B * c.rho ** (t - c.L) / (1.0 - d * c.rho))
