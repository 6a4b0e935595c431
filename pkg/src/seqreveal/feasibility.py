"""Classification of environments by whether revelation can be sustained as delta -> 1.

Revelation is sustainable when the per-agent gain from learning a low type,
``pi_L(q*_L) - pi_H(q*_H)``, beats the cheapest separation cost

    min_q  ln(dC(q) / (dC(q) - dC(q*_H))) * [pi_L(q*_L) - pi_H(q)]

over reward quantities ``q`` in ``[q*_L, q_bar]``, where ``dC = C_H - C_L``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .environment import Environment, LinearCost, SqrtValue
from .errors import ThresholdRangeError, ValidityError

GRID_POINTS = 2001
BOUNDARY_BAND = 1e-7
THRESHOLD_WIDTH = 1e-6
SIGN_SAMPLES = 101


class Classification(str, Enum):
    REVEALING = "Revealing"
    NON_REVEALING = "NonRevealing"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class FeasibilityResult:
    lhs: float
    min_rhs: float
    argmin_q: float
    classification: Classification
    multiplier_at_qbar: float
    multiplier_at_argmin: float

    @property
    def margin(self) -> float:
        return self.lhs - self.min_rhs

    def to_dict(self):
        d = asdict(self)
        d["classification"] = self.classification.value
        d["margin"] = self.margin
        return d


def log_multiplier(env: Environment, q):
    """``ln(dC(q) / (dC(q) - dC(q*_H)))``; ``inf`` where the rent cannot be delivered."""
    dc = np.asarray(env.delta_c(q), dtype=float)
    need = env.first_best.delta_c_at_qstar_H
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(dc > need, -np.log1p(-need / np.where(dc > need, dc, 1.0)), np.inf)
    return out if out.ndim else float(out)


def rhs_curve(env: Environment, q_tilde):
    """Separation cost at reward quantity ``q_tilde`` (vectorised; ``inf`` sentinel)."""
    fb = env.first_best
    mult = log_multiplier(env, q_tilde)
    gap = fb.pi_star_L - np.asarray(env.pi("H", q_tilde), dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(mult), np.inf, mult * gap)
    return out if out.ndim else float(out)


def _golden_min(f, a, b, tol=1e-12):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def search_interval(env: Environment) -> Tuple[float, float]:
    fb = env.first_best
    singular = fb.q_star_H  # dC is strictly increasing, so dC(q) = dC(q*_H) only there
    margin = 1e-9 * env.q_bar
    return max(fb.q_star_L, singular + margin), env.q_bar


def minimize_rhs(env: Environment, n: int = GRID_POINTS) -> Tuple[float, float]:
    """Global minimum of :func:`rhs_curve` on the search interval: grid seed, golden-section polish."""
    lo, hi = search_interval(env)
    q = np.linspace(lo, hi, n)
    vals = rhs_curve(env, q)
    i = int(np.argmin(vals))  # lowest index on ties
    a, b = q[max(i - 1, 0)], q[min(i + 1, n - 1)]
    x, fx = _golden_min(lambda s: float(rhs_curve(env, s)), a, b)
    if fx <= vals[i]:
        return float(x), float(fx)
    return float(q[i]), float(vals[i])


def classify(env: Environment) -> FeasibilityResult:
    fb = env.first_best
    lhs = fb.pi_star_L - fb.pi_star_H
    qmin, rmin = minimize_rhs(env)
    gap = lhs - rmin
    if abs(gap) <= BOUNDARY_BAND:
        verdict = Classification.BOUNDARY
    elif gap > 0:
        verdict = Classification.REVEALING
    else:
        verdict = Classification.NON_REVEALING
    return FeasibilityResult(lhs, rmin, qmin, verdict, float(log_multiplier(env, env.q_bar)),
                             float(log_multiplier(env, qmin)))


def condition_curve(env: Environment, n: int = 201):
    """Rows ``(q, rhs, lhs)`` on an even grid over the search interval."""
    lo, hi = search_interval(env)
    q = np.linspace(lo, hi, n)
    fb = env.first_best
    lhs = fb.pi_star_L - fb.pi_star_H
    return [(float(a), float(b), lhs) for a, b in zip(q, rhs_curve(env, q))]


# ---------------------------------------------------------------------------


def _family(base: Environment):
    if not isinstance(base.cost_H, LinearCost) or not isinstance(base.value, SqrtValue):
        raise ValidityError("the threshold search needs linear costs and the square-root value")
    theta_H, a = base.cost_H.theta, base.value.a

    def make(theta_L):
        return Environment.linear(theta_L=theta_L, theta_H=theta_H, a=a, q_bar=base.q_bar,
                                  alpha0=base.alpha0, delta=base.delta)

    return make


def condition_gap(base: Environment, theta_L: float) -> float:
    """``G(theta_L) = lhs - min_rhs`` for the linear-cost family through ``base``."""
    return classify(_family(base)(theta_L)).margin


@dataclass(frozen=True)
class ThresholdResult:
    theta_bar: float
    bracket: Tuple[float, float]
    sample_thetas: tuple
    sample_gaps: tuple
    sign_changes: int


def threshold_theta(base: Environment, theta_range: Sequence[float] = (1.2, 2.9),
                    width: float = THRESHOLD_WIDTH) -> ThresholdResult:
    """Cost level ``theta_bar`` of the efficient type where revelation stops being sustainable."""
    lo, hi = map(float, theta_range)
    make = _family(base)
    if not lo < hi < base.cost_H.theta:
        raise ThresholdRangeError("need theta_low < theta_high < theta_H")
    try:
        make(lo)
    except ValidityError as exc:
        raise ThresholdRangeError(f"q_bar too small for theta_L={lo}: {exc}") from None

    def G(t):
        return classify(make(t)).margin

    thetas = np.linspace(lo, hi, SIGN_SAMPLES)
    gaps = np.array([G(t) for t in thetas])
    signs = np.sign(gaps)
    nz = signs[signs != 0]
    changes = int(np.count_nonzero(nz[1:] != nz[:-1]))
    if changes != 1:
        raise ThresholdRangeError(f"expected exactly one sign change of G on [{lo}, {hi}], found {changes}")
    if not (gaps[0] > 0 > gaps[-1]):
        raise ThresholdRangeError("G must be positive at the low end and negative at the high end")
    j = int(np.flatnonzero(gaps <= 0)[0])
    a, b = thetas[j - 1], thetas[j]
    while b - a > width:
        mid = 0.5 * (a + b)
        if G(mid) > 0:
            a = mid
        else:
            b = mid
    return ThresholdResult(0.5 * (a + b), (float(a), float(b)), tuple(float(t) for t in thetas),
                           tuple(float(g) for g in gaps), changes)
