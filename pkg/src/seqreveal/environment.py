"""Economic primitives: value and cost functions, first-best quantities.

An :class:`Environment` bundles the principal's value function ``v``, the
two production cost functions ``C_L`` and ``C_H``, the quantity cap ``q_bar``,
the initial mass ``alpha0`` of low-cost agents and the discount factor.
Shape assumptions are checked on a 10,001-point grid when the object is built.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ValidityError

VALIDATION_POINTS = 10_001
GOLDEN_TOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class AgentType(str, Enum):
    L = "L"
    H = "H"


TypeLike = Union[AgentType, str]


def _as_type(kind: TypeLike) -> AgentType:
    try:
        return AgentType(kind)
    except ValueError:
        raise DomainError(f"unknown agent type {kind!r}; expected 'L' or 'H'") from None


@dataclass(frozen=True)
class SqrtValue:
    """Built-in value function ``v(q) = a * sqrt(q)``."""

    a: float = 2.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValidityError("value coefficient a must be positive")

    def __call__(self, q):
        return self.a * np.sqrt(q)


@dataclass(frozen=True)
class LinearCost:
    """Built-in cost ``C(q) = theta * q``."""

    theta: float

    def __call__(self, q):
        return self.theta * np.asarray(q, dtype=float)


class TabulatedFunction:
    """Monotone piecewise-cubic interpolant of user-supplied samples."""

    def __init__(self, q, y):
        q = np.asarray(q, dtype=float)
        y = np.asarray(y, dtype=float)
        if q.ndim != 1 or q.shape != y.shape or q.size < 3:
            raise ValidityError("tabulated function needs matching 1-d arrays of length >= 3")
        if np.any(np.diff(q) <= 0):
            raise ValidityError("tabulation abscissae must be strictly increasing")
        self.q = q
        self.y = y
        self._interp = PchipInterpolator(q, y, extrapolate=False)

    def __call__(self, q):
        out = self._interp(q)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def __repr__(self):
        return f"TabulatedFunction(n={self.q.size}, q=[{self.q[0]:g}, {self.q[-1]:g}])"


ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FirstBest:
    q_star_L: float
    q_star_H: float
    pi_star_L: float
    pi_star_H: float
    delta_c_at_qstar_H: float


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOL):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    if b < a:
        raise DomainError("golden-section bracket is reversed")
    dist = b - a
    if dist <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    n = int(math.ceil(math.log(tol / dist) / math.log(_INV_PHI)))
    c = b - _INV_PHI * dist
    d = a + _INV_PHI * dist
    fc, fd = f(c), f(d)
    for _ in range(n):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    # the endpoints are candidates too: the maximiser may sit on the boundary
    cands = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    fx, x = max(cands)
    return x, fx


@dataclass(frozen=True)
class Environment:
    """Primitives of the screening problem.

    ``value`` maps quantity to the principal's gross value, ``cost_L`` and
    ``cost_H`` are the two production cost functions. Any callable that
    accepts numpy arrays works; :class:`SqrtValue`, :class:`LinearCost` and
    :class:`TabulatedFunction` cover the common cases.
    """

    value: ScalarFn = dataclasses.field(default_factory=SqrtValue)
    cost_L: ScalarFn = dataclasses.field(default_factory=lambda: LinearCost(2.0))
    cost_H: ScalarFn = dataclasses.field(default_factory=lambda: LinearCost(3.0))
    q_bar: float = 1.0
    alpha0: float = 0.5
    delta: float = 0.99

    def __post_init__(self):
        if not self.q_bar > 0:
            raise ValidityError("q_bar must be positive")
        if not 0.0 < self.alpha0 < 1.0:
            raise ValidityError("alpha0 must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValidityError("delta must lie in (0, 1)")
        self._validate_shapes()
        fb = self.first_best  # raises on boundary optima
        if not (0.0 < fb.q_star_H < fb.q_star_L < self.q_bar):
            raise ValidityError(
                f"need 0 < q*_H < q*_L < q_bar, got q*_H={fb.q_star_H:.6g}, q*_L={fb.q_star_L:.6g}"
            )
        if not (0.0 < fb.pi_star_H < fb.pi_star_L):
            raise ValidityError("need 0 < pi_H(q*_H) < pi_L(q*_L)")

    # -- constructors -------------------------------------------------

    @classmethod
    def linear(cls, theta_L=2.0, theta_H=3.0, a=2.0, q_bar=1.0, alpha0=0.5, delta=0.99):
        return cls(SqrtValue(a), LinearCost(theta_L), LinearCost(theta_H), q_bar, alpha0, delta)

    def with_delta(self, delta: float) -> "Environment":
        return dataclasses.replace(self, delta=delta)

    # -- vectorised primitives ------------------------------------------

    def v(self, q):
        return self.value(q)

    def cost(self, kind: TypeLike, q):
        return self.cost_L(q) if _as_type(kind) is AgentType.L else self.cost_H(q)

    def delta_c(self, q):
        return self.cost_H(q) - self.cost_L(q)

    def pi(self, kind: TypeLike, q):
        return self.value(q) - self.cost(kind, q)

    @property
    def is_linear(self) -> bool:
        return isinstance(self.cost_L, LinearCost) and isinstance(self.cost_H, LinearCost)

    # -- derived quantities -----------------------------------------

    @cached_property
    def first_best(self) -> FirstBest:
        qs = {}
        for kind in AgentType:
            x, fx = golden_section_max(lambda q, k=kind: float(self.pi(k, q)), 0.0, self.q_bar)
            if x <= 1e-8 * self.q_bar or x >= self.q_bar * (1 - 1e-8):
                raise ValidityError(f"surplus maximiser for type {kind.value} sits on the boundary")
            x = self._polish(kind, x)
            qs[kind] = (x, float(self.pi(kind, x)))
        (qL, pL), (qH, pH) = qs[AgentType.L], qs[AgentType.H]
        return FirstBest(qL, qH, pL, pH, float(self.delta_c(qH)))

    def _polish(self, kind, x):
        # Near a smooth maximum the surplus is flat to rounding, so comparisons
        # of function values stall around 1e-8. The sign of a central
        # difference keeps resolving the argmax well below that.
        h = 1e-6 * self.q_bar
        lo, hi = max(x - 10 * h, h), min(x + 10 * h, self.q_bar - h)

        def slope(q):
            return float(self.pi(kind, q + h)) - float(self.pi(kind, q - h))

        if not (slope(lo) > 0 > slope(hi)):
            return x
        while hi - lo > 1e-13 * self.q_bar:
            mid = 0.5 * (lo + hi)
            if slope(mid) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    @property
    def punishment_gain(self) -> float:
        """pi_L(q*_L) - pi_H(q*_H): per-agent value of learning a low type."""
        fb = self.first_best
        return fb.pi_star_L - fb.pi_star_H

    def validation_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.q_bar, VALIDATION_POINTS)

    def _validate_shapes(self):
        q = self.validation_grid()
        v = np.asarray(self.value(q), dtype=float)
        cl = np.asarray(self.cost_L(q), dtype=float)
        ch = np.asarray(self.cost_H(q), dtype=float)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(cl)) and np.all(np.isfinite(ch))):
            raise ValidityError("primitives must be finite on [0, q_bar]")
        scale = max(1.0, float(np.abs(v).max()), float(np.abs(ch).max()))
        tol = 1e-12 * scale
        if abs(v[0]) > tol or abs(cl[0]) > tol or abs(ch[0]) > tol:
            raise ValidityError("need v(0) = C_L(0) = C_H(0) = 0")
        if np.any(np.diff(v) <= 0):
            raise ValidityError("v must be strictly increasing")
        if np.any(np.diff(v, 2) >= 0):
            raise ValidityError("v must be strictly concave")
        for name, c in (("C_L", cl), ("C_H", ch)):
            if np.any(np.diff(c) <= 0):
                raise ValidityError(f"{name} must be strictly increasing")
            if np.any(np.diff(c, 2) < -tol):
                raise ValidityError(f"{name} must be convex")
        dc = ch - cl
        if np.any(np.diff(dc) <= 0):
            raise ValidityError("need C_H' > C_L' on [0, q_bar]")
        slopes = np.diff(dc) / np.diff(q)
        if np.any(np.diff(slopes) > tol / (q[1] - q[0])):
            raise ValidityError("C_H - C_L must be concave")


def surplus(env: Environment, kind: TypeLike, q: float) -> float:
    """Per-period surplus ``v(q) - C_type(q)`` for ``0 <= q <= q_bar``."""
    if not 0.0 <= q <= env.q_bar:
        raise DomainError(f"quantity {q!r} outside [0, {env.q_bar}]")
    return float(env.pi(kind, q))


def first_best(env: Environment) -> FirstBest:
    return env.first_best


@dataclass(frozen=True)
class AssumptionCheck:
    holds: bool
    bound: float
    margin: float

    def __bool__(self):
        return self.holds


def check_assumption1(env: Environment) -> AssumptionCheck:
    """Low types are scarce enough: ``alpha0 < pi_H(q*_H) / pi_L(q*_L)``."""
    fb = env.first_best
    bound = fb.pi_star_H / fb.pi_star_L
    return AssumptionCheck(env.alpha0 < bound, bound, bound - env.alpha0)


def derivative(f: Callable[[float], float], x: float, h: float) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)


# -- plain-text configuration ---------------------------------------------

_CONFIG_KEYS = {"value", "a", "theta_L", "theta_H", "q_bar", "alpha0", "delta"}
_VALUE_FORMS = {"sqrt", "sqrt2"}


def parse_config(text: str) -> Environment:
    """Build an environment from ``key=value`` lines (``#`` starts a comment)."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = val
    form = fields.pop("value", "sqrt2")
    if form not in _VALUE_FORMS:
        raise ValueError(f"unsupported value form {form!r}; tabulated functions need the Python API")
    nums = {}
    for key, val in fields.items():
        try:
            nums[key] = float(val)
        except ValueError:
            raise ValueError(f"key {key!r}: not a number: {val!r}") from None
    return Environment.linear(
        theta_L=nums.get("theta_L", 2.0),
        theta_H=nums.get("theta_H", 3.0),
        a=nums.get("a", 2.0),
        q_bar=nums.get("q_bar", 1.0),
        alpha0=nums.get("alpha0", 0.5),
        delta=nums.get("delta", 0.99),
    )


def load_config(path) -> Environment:
    return parse_config(Path(path).read_text())
