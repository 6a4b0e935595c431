"""Payoff summary of the continuation play after the principal reneges.

Once promises are broken no unrevealed agent reveals again, so the principal
extracts the first-best surplus from revealed low types and treats everyone
else as a high type. The punishment equilibrium that delivers this needs
two conditions: unrevealed agents are likely enough to be high types, and
the agents are patient enough that a low type will not imitate a high type
for a one-period gain.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

from .environment import Environment
from .errors import DomainError

# tolerance for comparing the one-period gain with the continuation loss
DEVIATION_TOL = 1e-9


@dataclass(frozen=True)
class PunishmentState:
    R: float
    alpha0: float

    def __post_init__(self):
        if not 0.0 <= self.R <= self.alpha0 < 1.0:
            raise DomainError(f"need 0 <= R <= alpha0 < 1, got R={self.R}, alpha0={self.alpha0}")

    @property
    def xi(self) -> float:
        """Probability an unrevealed agent is a low type."""
        return (self.alpha0 - self.R) / (1.0 - self.R)

    @classmethod
    def at(cls, env: Environment, R: float) -> "PunishmentState":
        return cls(float(R), env.alpha0)


def punishment_payoff(state: PunishmentState, env: Environment) -> float:
    fb = env.first_best
    return state.R * fb.pi_star_L + (1.0 - state.R) * fb.pi_star_H


@dataclass(frozen=True)
class EquilibriumConditions:
    enough_high_types: bool
    enough_high_types_margin: float  # pi_H(q*_H) - xi * pi_L(q*_L)
    large_delta: bool
    large_delta_margin: float  # delta/(1-delta) dC(q*_H) - dC(q_bar)

    @property
    def valid(self) -> bool:
        return self.enough_high_types and self.large_delta

    def to_dict(self):
        d = asdict(self)
        d["valid"] = self.valid
        return d


def check_equilibrium_conditions(state: PunishmentState, env: Environment,
                                 delta: Optional[float] = None) -> EquilibriumConditions:
    d = env.delta if delta is None else float(delta)
    fb = env.first_best
    m1 = fb.pi_star_H - state.xi * fb.pi_star_L
    m2 = d / (1.0 - d) * fb.delta_c_at_qstar_H - float(env.delta_c(env.q_bar))
    # decided on the same scale as deviation_bounds so the two never disagree
    return EquilibriumConditions(m1 > 0, m1, deviation_bounds(env, d).deterred, m2)


@dataclass(frozen=True)
class DeviationBounds:
    short_gain: float
    continuation_loss: float

    @property
    def deterred(self) -> bool:
        """Strict deterrence; gaps within rounding count as a tie."""
        return self.continuation_loss - self.short_gain > DEVIATION_TOL


def deviation_bounds(env: Environment, delta: Optional[float] = None) -> DeviationBounds:
    d = env.delta if delta is None else float(delta)
    return DeviationBounds((1.0 - d) * float(env.delta_c(env.q_bar)), d * env.first_best.delta_c_at_qstar_H)


def epsilon_floor(state: PunishmentState, env: Environment, epsilon: float) -> float:
    """Profit guaranteed by offering each group its first-best contract plus ``epsilon``."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return punishment_payoff(state, env) - epsilon


def patience_threshold(env: Environment) -> float:
    """``dC(q_bar) / (dC(q_bar) + dC(q*_H))``: above it a full-rent period cannot cover the pooling rent."""
    top = float(env.delta_c(env.q_bar))
    return top / (top + env.first_best.delta_c_at_qstar_H)


def large_delta_boundary(env: Environment, tol: float = 1e-13) -> float:
    """Root of ``delta dC(q*_H) = (1 - delta) dC(q_bar)``, located by bisection."""
    lo, hi = 1e-12, 1.0 - 1e-12
    top = float(env.delta_c(env.q_bar))
    need = env.first_best.delta_c_at_qstar_H

    def margin(d):
        return d * need - (1.0 - d) * top

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
