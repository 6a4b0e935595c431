"""Explicit revealing allocation with geometric revelation and a constant reward quantity.

Pooling stays at ``(q*_H, C_H(q*_H))`` forever. A mass ``r_t = r0 * rho**t``
with ``r0 = (1 - rho) * alpha0`` reveals every period; each cohort works at
``q_tilde`` for ``T + 1`` periods, is paid ``C_H(q_tilde)`` for the first
``T`` and ``C_L(q_tilde) + beta * Delta C(q_tilde)`` in the last, then moves
to ``(q*_L, C_L(q*_L))``. The reward phase delivers exactly the rent
``Delta C(q*_H)`` a low type earns by pooling forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .allocation import Allocation, Contract, SeparatingSequence, principal_profit
from .constraints import verify
from .environment import Environment
from .errors import UndeliverableRentError
from .reward import debt_length, split_rent


@dataclass(frozen=True)
class StationaryDesign:
    q_tilde: float
    rho: float
    r0: float
    T: int  # full-rent periods; the reward phase lasts T + 1 periods
    beta: float
    delta: float

    def reveal_mass(self, t: int) -> float:
        return self.r0 * self.rho**t


def stationary_design(env: Environment, rho: float, q_tilde: float, delta: Optional[float] = None) -> StationaryDesign:
    d = env.delta if delta is None else float(delta)
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    need = env.first_best.delta_c_at_qstar_H
    if float(env.delta_c(q_tilde)) <= need:
        raise UndeliverableRentError("Delta C(q_tilde) must exceed Delta C(q*_H)")
    plan = split_rent(env, need, q_tilde, d)
    return StationaryDesign(float(q_tilde), float(rho), (1.0 - rho) * env.alpha0, plan.m - 1, plan.beta, d)


def design_allocation(design: StationaryDesign, env: Environment) -> Allocation:
    fb = env.first_best
    pool = Contract(fb.q_star_H, float(env.cost_H(fb.q_star_H)))
    q = design.q_tilde
    full = Contract(q, float(env.cost_H(q)))
    last = Contract(q, float(env.cost_L(q)) + design.beta * float(env.delta_c(q)))
    tail = Contract(fb.q_star_L, float(env.cost_L(fb.q_star_L)))
    seq = SeparatingSequence(0, (full,) * design.T + (last,), tail)
    return Allocation((pool,), pool, {0: seq}, (design.r0,), design.rho)


def build_stationary(env: Environment, rho: float, q_tilde: float, delta: Optional[float] = None) -> Allocation:
    return design_allocation(stationary_design(env, rho, q_tilde, delta), env)


def waiting_terms(design: StationaryDesign, env: Environment, delta: Optional[float] = None):
    """Both sides of the one-period-delay comparison for reneging."""
    d = design.delta if delta is None else float(delta)
    fb = env.first_best
    q, rho, T = design.q_tilde, design.rho, design.T
    piH_q = float(env.pi("H", q))
    lhs = (1.0 - d) * (piH_q - fb.pi_star_H) + d * (fb.pi_star_L - fb.pi_star_H)
    k = np.arange(1, T + 1)
    rhs = (1.0 - d) * math.fsum(rho ** (-k)) * (fb.pi_star_L - piH_q)
    rhs += (1.0 - d) * rho ** (-T) * (1.0 - design.beta) * float(env.delta_c(q))
    return lhs, rhs


def nr_waiting_check(design: StationaryDesign, env: Environment, delta: Optional[float] = None) -> float:
    """Slack of the sufficient condition: reneging next period beats reneging now."""
    lhs, rhs = waiting_terms(design, env, delta)
    return lhs - rhs


def profit_floor_holds(design: StationaryDesign, env: Environment, delta: Optional[float] = None) -> bool:
    d = design.delta if delta is None else float(delta)
    fb = env.first_best
    piH_q = float(env.pi("H", design.q_tilde))
    return d > max(fb.pi_star_H - piH_q, 0.0) / (fb.pi_star_L - piH_q)


def profit_lower_bound(design: StationaryDesign, env: Environment, delta: Optional[float] = None) -> float:
    """``(1 - r0) pi_H(q*_H) + r0 [(1 - delta) pi_H(q_bar) + delta pi_L(q*_L)]``."""
    d = design.delta if delta is None else float(delta)
    fb = env.first_best
    r0 = design.r0
    return (1 - r0) * fb.pi_star_H + r0 * ((1 - d) * float(env.pi("H", env.q_bar)) + d * fb.pi_star_L)


def auxiliary_tradeoff(env: Environment, q_tilde: float, delta: Optional[float] = None):
    """Per-unit-mass ``(benefit, cost)`` of letting one cohort reveal in the stationary comparison."""
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    benefit = d * (fb.pi_star_L - fb.pi_star_H)
    T = debt_length(env, q_tilde, d)
    cost = (1.0 - d) * T * (fb.pi_star_L - float(env.pi("H", q_tilde)))
    return benefit, cost


# ---------------------------------------------------------------------------


DEFAULT_RHOS = (0.9, 0.95, 0.98, 0.99, 0.995, 0.998, 0.999, 0.9995, 0.9999)


def default_qgrid(env: Environment, n: int = 41) -> np.ndarray:
    """Reward quantities in ``[q*_L, q_bar]`` that can carry the pooling rent."""
    fb = env.first_best
    q = np.linspace(fb.q_star_L, env.q_bar, n)
    return q[np.asarray(env.delta_c(q)) > fb.delta_c_at_qstar_H * (1 + 1e-9)]


@dataclass
class Candidate:
    design: StationaryDesign
    waiting_slack: float
    profit: float
    implementable: bool


def scan(env: Environment, delta: Optional[float] = None, rhos: Sequence[float] = DEFAULT_RHOS,
         q_tildes: Optional[Sequence[float]] = None):
    """Evaluate every ``(rho, q_tilde)`` pair in row-major order."""
    d = env.delta if delta is None else float(delta)
    q_tildes = default_qgrid(env) if q_tildes is None else q_tildes
    out = []
    for rho in rhos:
        for q in q_tildes:
            try:
                des = stationary_design(env, rho, q, d)
            except UndeliverableRentError:
                continue
            alloc = design_allocation(des, env)
            rep = verify(alloc, env, d)
            out.append(Candidate(des, nr_waiting_check(des, env, d), rep.profit, rep.implementable))
    return out


def suggest(env: Environment, delta: Optional[float] = None, rhos: Sequence[float] = DEFAULT_RHOS,
            q_tildes: Optional[Sequence[float]] = None) -> Optional[StationaryDesign]:
    """First grid pair (row-major) whose allocation verifies, or ``None``."""
    for cand in scan(env, delta, rhos, q_tildes):
        if cand.implementable:
            return cand.design
    return None


def best_stationary(env: Environment, delta: Optional[float] = None, rhos: Sequence[float] = DEFAULT_RHOS,
                    q_tildes: Optional[Sequence[float]] = None) -> Optional[Candidate]:
    """Most profitable verified pair on the grid (earliest wins ties), or ``None``."""
    best = None
    for cand in scan(env, delta, rhos, q_tildes):
        if cand.implementable and (best is None or cand.profit > best.profit):
            best = cand
    return best
