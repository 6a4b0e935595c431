"""Derivative-free search for profitable implementable allocations.

Payments are pinned so that every agent-side constraint holds by
construction: pooling pays ``C_H(q)`` (the high type earns nothing), and each
cohort receives exactly the rent it would earn by never revealing, delivered
as early as possible with :func:`~seqreveal.reward.split_rent`. The search
then only trades profit against the principal's non-reneging constraint,
which enters through a linear penalty on its worst violation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import _kernels as K
from .allocation import (Allocation, Compiled, Contract, SeparatingSequence, all_pooling, build_compiled,
                         nr_slacks)
from .constraints import VerificationReport, verify
from .environment import Environment
from .errors import StructuralError, UndeliverableRentError
from .feasibility import classify
from .reward import split_rent
from .stationary import best_stationary

STRUCT_TOL = 1e-8
FEASIBLE_TOL = 1e-10
N_SEEDS = 8
RHO_MAX = 1.0 - 1e-6
# smallest relative pooling distortion the monotone search can express (in every period)
MIN_DISTORTION = 1e-6


@dataclass
class DecisionVector:
    """Free parameters of an allocation once payments are pinned.

    ``cohort_q`` has one row per prefix reveal date plus a final row for the
    stationary template. Each row is a reward quantity schedule (extended
    with its last entry when the rent needs more periods).
    """

    pooling_q: np.ndarray
    cohort_q: np.ndarray
    rho: float
    r_prefix: np.ndarray

    def __post_init__(self):
        self.pooling_q = np.asarray(self.pooling_q, dtype=float)
        self.cohort_q = np.atleast_2d(np.asarray(self.cohort_q, dtype=float))
        if self.cohort_q.shape[0] == 1 and self.pooling_q.size > 0 and self.cohort_q.shape[1] == self.pooling_q.size + 1:
            self.cohort_q = self.cohort_q.T
        self.r_prefix = np.asarray(self.r_prefix, dtype=float)
        self.rho = float(self.rho)
        N = self.pooling_q.size
        if self.r_prefix.size != N or self.cohort_q.shape[0] != N + 1:
            raise StructuralError("decision vector shapes disagree")

    @property
    def N(self) -> int:
        return self.pooling_q.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.r_prefix) + self.r_prefix[-1] * self.rho / (1.0 - self.rho)

    def copy(self):
        return DecisionVector(self.pooling_q.copy(), self.cohort_q.copy(), self.rho, self.r_prefix.copy())


def geometric_masses(alpha0: float, rho: float, N: int) -> np.ndarray:
    return (1.0 - rho) * alpha0 * rho ** np.arange(N)


def normalize_masses(weights: np.ndarray, rho: float, alpha0: float) -> np.ndarray:
    """Scale nonnegative weights so prefix plus geometric tail sum to ``alpha0``."""
    total = weights.sum() + weights[-1] * rho / (1.0 - rho)
    return alpha0 * weights / total


# ---------------------------------------------------------------------------
# assembly


def _pool_arrays(env: Environment, q):
    q = np.asarray(q, dtype=float)
    dc = np.asarray(env.delta_c(q), dtype=float)
    return dc, np.zeros_like(dc), np.asarray(env.pi("H", q), dtype=float)


def _targets(env: Environment, dv: DecisionVector, delta: float):
    fb = env.first_best
    dcP = np.asarray(env.delta_c(dv.pooling_q), dtype=float)
    U = K.discounted_backward(dcP, fb.delta_c_at_qstar_H, delta)
    # prefix cohorts get the pooling rent at their reveal date; the template the stationary one
    return np.append(U[:-1], fb.delta_c_at_qstar_H)


def _constant_table(env: Environment, q, targets, delta):
    """Cohort flows for constant reward quantities, built without Python loops over periods."""
    dc = np.asarray(env.delta_c(q), dtype=float)
    m, beta = K.split_rent_constant(targets, dc, delta)
    bad = np.flatnonzero(m < 0)
    if bad.size:
        raise UndeliverableRentError(f"rent for cohort row {int(bad[0])} cannot be delivered at q={q[bad[0]]:.6g}")
    piH = np.asarray(env.pi("H", q), dtype=float)
    piL = np.asarray(env.pi("L", q), dtype=float)
    full = m - 1
    n = int(m.sum())
    fL = np.repeat(dc, m)
    fH = np.zeros(n)
    pp = np.repeat(piH, m)
    last = np.cumsum(m) - 1
    fL[last] = beta * dc
    fH[last] = (beta - 1.0) * dc
    pp[last] = piL - beta * dc
    return m, beta, fL, fH, pp, full


def assemble_compiled(dv: DecisionVector, env: Environment, delta: Optional[float] = None) -> Compiled:
    """Fast path of :func:`assemble` straight to the evaluator's array form."""
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    N = dv.N
    targets = _targets(env, dv, d)
    if dv.cohort_q.shape[1] == 1:
        m, _, fL, fH, pp, _ = _constant_table(env, dv.cohort_q[:, 0], targets, d)
        offsets = np.zeros(N + 2, dtype=np.int64)
        np.cumsum(m, out=offsets[1:])
        table = [((fL[offsets[i]:offsets[i + 1]], fH[offsets[i]:offsets[i + 1]], pp[offsets[i]:offsets[i + 1]]), None)
                 for i in range(N + 1)]
    else:
        table = []
        for i in range(N + 1):
            seq = _schedule_sequence(env, dv.cohort_q[i], targets[i], d, i)
            table.append((seq.flows(env)[0], None))
    tail = (0.0, -float(env.delta_c(fb.q_star_L)), fb.pi_star_L)
    table = [(e[0], tail) for e in table]
    pool = _pool_arrays(env, dv.pooling_q)
    pool_tail = (fb.delta_c_at_qstar_H, 0.0, fb.pi_star_H)
    prefix_ids = np.arange(N, dtype=np.int64)
    template = N if dv.r_prefix[-1] * dv.rho > 0 else -1
    return build_compiled(d, pool, pool_tail, dv.r_prefix, dv.rho, table, prefix_ids, template,
                          env.alpha0, fb.pi_star_H, fb.pi_star_L - fb.pi_star_H)


def _schedule_sequence(env, q, target, delta, T) -> SeparatingSequence:
    fb = env.first_best
    try:
        plan = split_rent(env, target, q, delta)
    except UndeliverableRentError as exc:
        raise UndeliverableRentError(f"cohort {T}: {exc}") from None
    tail = Contract(fb.q_star_L, float(env.cost_L(fb.q_star_L)))
    return SeparatingSequence(T, plan.contracts(), tail)


def assemble(dv: DecisionVector, env: Environment, delta: Optional[float] = None) -> Allocation:
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    N = dv.N
    targets = _targets(env, dv, d)
    cohorts = {T: _schedule_sequence(env, dv.cohort_q[T], targets[T], d, T) for T in range(N)}
    tmpl = _schedule_sequence(env, dv.cohort_q[N], targets[N], d, N)
    pool = tuple(Contract(float(q), float(env.cost_H(q))) for q in dv.pooling_q)
    tail = Contract(fb.q_star_H, float(env.cost_H(fb.q_star_H)))
    return Allocation(pool, tail, cohorts, tuple(dv.r_prefix), dv.rho, cohort_template=replace(tmpl, reveal_time=0))


def extract(alloc: Allocation, S: int = 1) -> DecisionVector:
    """Inverse of :func:`assemble`: read quantities and masses back from an allocation."""
    N = alloc.N

    def row(seq):
        q = list(seq.quantities()[:S]) or [seq.tail.q]
        return q + [q[-1]] * (S - len(q))

    rows = [row(alloc.cohort(T)) for T in range(N)]
    tmpl = alloc.template
    rows.append(row(tmpl) if tmpl is not None else rows[-1])
    return DecisionVector(np.array([c.q for c in alloc.pooling_prefix]), np.array(rows), alloc.rho,
                          np.array(alloc.reveal_prefix))


# ---------------------------------------------------------------------------
# search


@dataclass
class _Space:
    """Box-bounded search coordinates.

    Layout: pooling block, cohort quantities, log mass weights, ``log(1 - rho)``.
    With ``monotone`` the pooling block holds ``log D_0`` and log-ratios
    ``log(D_t / D_{t-1}) <= 0`` of the relative distortion ``D_t = 1 - q_t / q*_H``,
    so the pooling path stays strictly below ``q*_H`` and rises over time.
    Otherwise it holds the pooling quantities directly.
    """

    env: Environment
    N: int
    S: int
    monotone: bool = True

    def bounds(self):
        env, N, S = self.env, self.N, self.S
        fb = env.first_best
        if self.monotone:
            plo = np.concatenate([[math.log(MIN_DISTORTION)], np.full(N - 1, -5.0)])
            phi = np.concatenate([[math.log(0.9)], np.zeros(N - 1)])
        else:
            plo, phi = np.full(N, 1e-4 * env.q_bar), np.full(N, env.q_bar)
        lo = np.concatenate([plo, np.full((N + 1) * S, fb.q_star_L), np.full(N, -60.0),
                             [math.log(1.0 - RHO_MAX)]])
        hi = np.concatenate([phi, np.full((N + 1) * S, env.q_bar), np.zeros(N), [math.log(0.5)]])
        return lo, hi

    def steps(self):
        env, N, S = self.env, self.N, self.S
        fb = env.first_best
        pst = np.full(N, 0.5) if self.monotone else np.full(N, 0.05 * fb.q_star_H)
        return np.concatenate([pst, np.full((N + 1) * S, 0.05 * env.q_bar), np.full(N, 0.5), [0.5]])

    def encode(self, dv: DecisionVector) -> np.ndarray:
        qH = self.env.first_best.q_star_H
        if self.monotone:
            D = np.maximum(1.0 - dv.pooling_q / qH, MIN_DISTORTION)
            D = np.minimum.accumulate(D)
            logD = np.log(D)
            pool = np.concatenate([[logD[0]], np.maximum(np.diff(logD), -5.0)])
        else:
            pool = dv.pooling_q
        w = np.log(np.maximum(dv.r_prefix / dv.r_prefix.max(), 1e-300))
        return np.concatenate([pool, dv.cohort_q.ravel(), np.maximum(w, -60.0), [math.log(1.0 - dv.rho)]])

    def decode(self, x: np.ndarray) -> DecisionVector:
        N, S = self.N, self.S
        if self.monotone:
            # the floor keeps every period visibly below q*_H; the path stays monotone
            D = np.maximum(np.exp(np.cumsum(x[:N])), MIN_DISTORTION)
            pq = self.env.first_best.q_star_H * (1.0 - D)
        else:
            pq = x[:N].copy()
        cq = x[N:N + (N + 1) * S].reshape(N + 1, S)
        w = x[N + (N + 1) * S:N + (N + 1) * S + N]
        rho = 1.0 - math.exp(x[-1])
        r = normalize_masses(np.exp(w - w.max()), rho, self.env.alpha0)
        return DecisionVector(pq, cq.copy(), rho, r)


@dataclass
class _Eval:
    profit: float
    min_nr: float
    objective: float


def _evaluate(dv: DecisionVector, env: Environment, delta: float, penalty: float) -> _Eval:
    try:
        c = assemble_compiled(dv, env, delta)
    except UndeliverableRentError:
        return _Eval(-math.inf, -math.inf, -math.inf)
    slack, c0, c1, Pi = nr_slacks(c)
    worst = min(float(slack.min()), c0, c0 + c1)
    profit = float(Pi[0])
    return _Eval(profit, worst, profit - penalty * max(0.0, -worst))


def _coordinate_search(space: _Space, x0, env, delta, penalty, budget):
    """Compass search along one coordinate at a time with per-coordinate step halving."""
    lo, hi = space.bounds()
    step = space.steps()
    min_step = 1e-10 * np.maximum(np.abs(step), 1e-12)
    x = np.clip(x0, lo, hi)
    cur = _evaluate(space.decode(x), env, delta, penalty)
    used = 1
    best_feasible = (cur.profit, x.copy()) if cur.min_nr >= -FEASIBLE_TOL else None
    history = [cur.objective]
    while used < budget and np.any(step > min_step):
        improved_any = False
        for i in range(x.size):
            if step[i] <= min_step[i] or used >= budget:
                continue
            moved = False
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] = min(max(x[i] + sgn * step[i], lo[i]), hi[i])
                if trial[i] == x[i]:
                    continue
                ev = _evaluate(space.decode(trial), env, delta, penalty)
                used += 1
                if ev.min_nr >= -FEASIBLE_TOL and (best_feasible is None or ev.profit > best_feasible[0]):
                    best_feasible = (ev.profit, trial.copy())
                if ev.objective > cur.objective:
                    x, cur, moved = trial, ev, True
                    break
                if used >= budget:
                    break
            if moved:
                step[i] *= 1.5
                improved_any = True
            else:
                step[i] *= 0.5
        history.append(cur.objective)
        if not improved_any and np.all(step <= min_step):
            break
    return x, cur, best_feasible, used, history


@dataclass
class StructureReport:
    gradual: bool
    eventual: bool
    reward_decreasing: bool
    separating_floor: bool
    pooling_below: bool
    pooling_converges: bool
    rent_finite: bool
    witness: dict = field(default_factory=dict)

    CLAUSES = ("gradual", "eventual", "reward_decreasing", "separating_floor", "pooling_below",
               "pooling_converges", "rent_finite")

    def as_dict(self):
        d = {k: bool(getattr(self, k)) for k in self.CLAUSES}
        d["witness"] = self.witness
        return d


def structure_check(alloc: Allocation, env: Environment, delta: Optional[float] = None,
                    tol: float = STRUCT_TOL) -> StructureReport:
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    N = alloc.N
    r = np.array(alloc.reveal_prefix)
    gradual = bool(np.all(r > tol) and alloc.rho > 0)
    total = alloc.total_revealed
    eventual = abs(total - env.alpha0) <= tol

    seqs = [alloc.cohorts[T] for T in sorted(alloc.cohorts) if alloc.reveal_prefix[T] > 0] if alloc.cohorts else []
    if alloc.has_tail_cohorts() and alloc.template is not None:
        seqs.append(alloc.template)
    dec, floor, finite = True, bool(seqs), bool(seqs)
    first_bad = None
    for s in seqs:
        q, x = s.quantities(), s.payments()
        if s.m >= 2 and not (np.all(q[1:] < q[:-1] - tol) and np.all(x[1:] <= x[:-1] + tol)):
            dec = False
            first_bad = first_bad if first_bad is not None else s.reveal_time
        if np.any(q < fb.q_star_L - tol) or abs(s.tail.q - fb.q_star_L) > tol:
            floor = False
        rent_tail = s.tail.x - float(env.cost_L(s.tail.q))
        vals = K.discounted_backward(x - env.cost_L(q), rent_tail, d)
        if abs(rent_tail) > tol or vals[0] <= tol:
            finite = False
    pq = np.array([c.q for c in alloc.pooling_prefix])
    below = bool(np.all(pq < fb.q_star_H - tol))
    half = pq[N - max(N // 2, 1):]
    converges = abs(pq[-1] - fb.q_star_H) <= 1e-3 and bool(np.all(np.diff(half) >= -tol))
    witness = {
        "min_reveal_mass": float(r.min()),
        "total_revealed": total,
        "first_nondecreasing_cohort": first_bad,
        "max_pooling_q": float(pq.max()),
        "pooling_gap_at_boundary": float(fb.q_star_H - pq[-1]),
    }
    return StructureReport(gradual, eventual, dec, floor, below, converges, finite, witness)


@dataclass
class OptimizeResult:
    allocation: Allocation
    profit: float
    structure: StructureReport
    report: VerificationReport
    revealing: bool
    evaluations: int
    seed_profits: List[float]
    decision: Optional[DecisionVector] = None


def seeds(env: Environment, delta: float, N: int, S: int = 1) -> List[DecisionVector]:
    """Deterministic starting points built around stationary designs."""
    fb = env.first_best
    best = best_stationary(env, delta)
    q_cls = max(classify(env).argmin_q, fb.q_star_L)
    if best is not None:
        rho0, q0 = best.design.rho, best.design.q_tilde
    else:
        rho0, q0 = 0.999, q_cls
    variants = [
        (rho0, q0, 1.0),
        (0.999, q_cls, 1.0),
        (rho0, q0, 0.98),
        (0.99, q_cls, 0.98),
        (0.995, min(q0 * 1.1, env.q_bar), 1.0),
        (0.998, q_cls, 0.95),
        (0.98, q0, 0.99),
        (0.9995, q_cls, 0.99),
    ]
    out = []
    for rho, q, shrink in variants[:N_SEEDS]:
        pq = np.full(N, fb.q_star_H)
        if shrink < 1.0:
            # distortion that fades toward the tail
            pq = fb.q_star_H * (1.0 - (1.0 - shrink) * (1.0 - np.arange(N) / N))
        cq = np.full((N + 1, S), q)
        out.append(DecisionVector(pq, cq, rho, geometric_masses(env.alpha0, rho, N)))
    return out


def optimize(env: Environment, delta: Optional[float] = None, N: int = 30, S_max: int = 1,
             budget: int = 20_000, seed_list: Optional[Sequence[DecisionVector]] = None,
             monotone_pooling: bool = True) -> OptimizeResult:
    """Best verified allocation found by coordinate search from several seeds.

    With ``monotone_pooling`` (default) the pooling path is searched only
    among paths that stay below ``q*_H`` and rise over time. Falls back to the
    all-pooling benchmark when no implementable point beats it.
    """
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    penalty = 10.0 * fb.pi_star_L
    starts = list(seed_list) if seed_list is not None else seeds(env, d, N, S_max)
    space = _Space(env, N, starts[0].cohort_q.shape[1], monotone_pooling)
    per_seed = budget // len(starts) if budget > 0 else 0

    candidates = []
    used_total = 0
    seed_profits = []
    for dv in starts:
        x0 = space.encode(dv)
        if per_seed > 0:
            _, _, feas, used, _ = _coordinate_search(space, x0, env, d, penalty, per_seed)
            used_total += used
        else:
            ev = _evaluate(space.decode(x0), env, d, penalty)
            feas = (ev.profit, x0) if ev.min_nr >= -FEASIBLE_TOL else None
            used_total += 1
        seed_profits.append(feas[0] if feas else -math.inf)
        if feas is not None:
            candidates.append(feas)

    candidates.sort(key=lambda c: -c[0])
    for profit, x in candidates:
        if profit <= fb.pi_star_H:
            break
        dv = space.decode(x)
        alloc = assemble(dv, env, d)
        rep = verify(alloc, env, d)
        if rep.implementable:
            return OptimizeResult(alloc, rep.profit, structure_check(alloc, env, d), rep, True, used_total,
                                  seed_profits, dv)
    alloc = all_pooling(env, N)
    rep = verify(alloc, env, d)
    return OptimizeResult(alloc, rep.profit, structure_check(alloc, env, d), rep, False, used_total, seed_profits)


# ---------------------------------------------------------------------------


def lifecycle_trace(alloc: Allocation, env: Environment, reveal_time: int, horizon: Optional[int] = None):
    """Rows ``(t, q_H, x_H, q_L, x_L)``: a high type pools forever, a low type reveals at ``reveal_time``."""
    seq = alloc.cohort(reveal_time)
    if horizon is None:
        horizon = max(alloc.N, reveal_time + seq.m) + 5
    rows = []
    for t in range(horizon):
        h = alloc.pooling_contract(t)
        lc = alloc.pooling_contract(t) if t < reveal_time else seq.contract_at(t - reveal_time)
        rows.append((t, h.q, h.x, lc.q, lc.x))
    return rows


def lifecycle_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "q_H", "x_H", "q_L", "x_L"])
    for t, *vals in rows:
        w.writerow([t] + [f"{v:.12g}" for v in vals])
    return buf.getvalue()
