"""Implementability checks: non-reneging, incentive and participation constraints.

Every check is evaluated explicitly on the window ``[0, L)`` of the compiled
allocation and once more, in closed form, for the stationary remainder
``t >= L``. Slacks are "constraint value minus bound", so a constraint holds
when its slack is at least ``-tol``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import _kernels as K
from .allocation import MASS_TOL, Allocation, Compiled, compile_allocation, nr_slacks
from .environment import Environment

TOL = 1e-8
CONSTRAINTS = ("NR", "ICL", "ICL_EQ", "ICH", "IRH", "IRL")


@dataclass
class Violation:
    constraint: str
    period: Optional[int]  # None for the stationary tail
    slack: float


@dataclass
class VerificationReport:
    window: int
    nr_slack: np.ndarray
    icl_slack: np.ndarray  # NaN where nobody reveals
    icl_equality: np.ndarray  # True where indifference is required
    ich_slack: np.ndarray
    irh_slack: np.ndarray
    irl_slack: np.ndarray  # NaN where nobody reveals
    tail: Dict[str, float]
    Pi: np.ndarray
    tol: float = TOL
    violations: List[Violation] = field(default_factory=list)

    @property
    def implementable(self) -> bool:
        return not self.violations

    verdict = implementable

    @property
    def profit(self) -> float:
        return float(self.Pi[0])

    def series(self, name: str) -> np.ndarray:
        return {
            "NR": self.nr_slack,
            "ICL": self.icl_slack,
            "ICL_EQ": np.where(self.icl_equality, -np.abs(self.icl_slack), np.nan),
            "ICH": self.ich_slack,
            "IRH": self.irh_slack,
            "IRL": self.irl_slack,
        }[name]

    def min_slack(self, name: Optional[str] = None) -> float:
        names = [name] if name else ["NR", "ICL", "ICH", "IRH", "IRL"]
        vals = []
        for n in names:
            s = self.series(n)
            s = s[~np.isnan(s)]
            if s.size:
                vals.append(float(s.min()))
            t = self.tail.get(n)
            if t is not None and not math.isnan(t):
                vals.append(t)
        return min(vals) if vals else math.inf

    def rows(self):
        """Long-format rows ``(period, constraint, slack)``; the tail row has period ``"tail"``."""
        for name in CONSTRAINTS:
            s = self.series(name)
            for t in range(self.window):
                if not math.isnan(s[t]):
                    yield t, name, float(s[t])
            v = self.tail.get(name)
            if v is not None and not math.isnan(v):
                yield "tail", name, v

    def to_dict(self):
        def arr(a):
            return [None if math.isnan(v) else float(v) for v in a]

        return {
            "implementable": self.implementable,
            "tol": self.tol,
            "window": self.window,
            "profit": self.profit,
            "min_slack": self.min_slack(),
            "violations": [{"constraint": v.constraint, "period": "tail" if v.period is None else v.period,
                            "slack": v.slack} for v in self.violations],
            "tail": dict(self.tail),
            "slacks": {name: arr(self.series(name)) for name in CONSTRAINTS},
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)

    def to_csv(self, constraint: Optional[str] = None) -> str:
        """Two-column ``period,slack`` CSV for one constraint, or the long table for all."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if constraint is None:
            w.writerow(["t", "constraint", "slack"])
            for t, name, s in self.rows():
                w.writerow([t, name, f"{s:.12g}"])
        else:
            w.writerow(["period", "slack"])
            for t, name, s in self.rows():
                if name == constraint:
                    w.writerow([t, f"{s:.12g}"])
        return buf.getvalue()


# ---------------------------------------------------------------------------


@dataclass
class _Values:
    UPL: np.ndarray
    UPH: np.ndarray
    start: np.ndarray  # low type's value at reveal, per cohort table entry
    low: np.ndarray  # lowest continuation value over the cohort's life
    hsup: np.ndarray  # high type's best announce-and-quit value


def _values(c: Compiled) -> _Values:
    d = c.delta
    UPL = K.discounted_backward(c.pool_fL, c.pool_tail[0], d)
    UPH = K.discounted_backward(c.pool_fH, c.pool_tail[1], d)
    start, low = K.segment_values(c.offsets, c.rew_fL, c.tail_fL, d)
    hsup = K.segment_sup(c.offsets, c.rew_fH, c.tail_fH, d)
    return _Values(UPL, UPH, start, low, hsup)


def _nan(n):
    return np.full(n, np.nan)


def _ich(c: Compiled, v: _Values):
    ids = c.cohort_ids
    # with no separating contract on offer a false announcement is worth nothing
    grab = np.where(ids >= 0, v.hsup[np.maximum(ids, 0)] if v.hsup.size else 0.0, 0.0)
    slack = v.UPH[:-1] - grab
    tail = c.pool_tail[1] - (v.hsup[c.template_id] if c.template_id >= 0 else 0.0)
    return slack, tail


def _icl(c: Compiled, v: _Values):
    ids = c.cohort_ids
    L, d = c.L, c.delta
    has = ids >= 0
    immediate = np.full(L, -np.inf)
    immediate[has] = v.start[ids[has]]
    f_tail = c.pool_tail[0]
    if c.template_id >= 0:
        V = float(v.start[c.template_id])
        terminal = max(V, f_tail)
        tail = V - ((1.0 - d) * f_tail + d * terminal)
    else:
        terminal = f_tail
        tail = math.nan
    _, D = K.stopping_backward(immediate, c.pool_fL, terminal, d)
    active = c.r > 0
    slack = _nan(L)
    slack[active] = immediate[active] - D[active]
    remaining = c.alpha0 - c.R[:-1]
    equality = active & (c.r < remaining - MASS_TOL)
    return slack, equality, tail


def _ir(c: Compiled, v: _Values):
    ids = c.cohort_ids
    irh = v.UPH[:-1].copy()
    active = (c.r > 0) & (ids >= 0)
    irl = _nan(c.L)
    irl[active] = v.low[ids[active]]
    tail_l = float(v.low[c.template_id]) if c.template_id >= 0 else math.nan
    return irh, c.pool_tail[1], irl, tail_l


def check_nr(alloc: Allocation, env: Environment, delta: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """Per-period NR slacks on the window and the stationary-tail certificate."""
    slack, c0, c1, _ = nr_slacks(compile_allocation(alloc, env, delta))
    return slack, min(c0, c0 + c1)


def check_ich(alloc: Allocation, env: Environment, delta: Optional[float] = None):
    c = compile_allocation(alloc, env, delta)
    return _ich(c, _values(c))


def check_icl(alloc: Allocation, env: Environment, delta: Optional[float] = None):
    """``(slack, equality_mask, tail_slack)``; slack is NaN where nobody reveals."""
    c = compile_allocation(alloc, env, delta)
    return _icl(c, _values(c))


def check_ir(alloc: Allocation, env: Environment, delta: Optional[float] = None):
    """``(irh, irh_tail, irl, irl_tail)``; IR-L is the lowest value over each cohort's life."""
    c = compile_allocation(alloc, env, delta)
    return _ir(c, _values(c))


def verify_compiled(c: Compiled, tol: float = TOL) -> VerificationReport:
    v = _values(c)
    nr, c0, c1, Pi = nr_slacks(c)
    ich, ich_tail = _ich(c, v)
    icl, eq, icl_tail = _icl(c, v)
    irh, irh_tail, irl, irl_tail = _ir(c, v)
    tail = {
        "NR": min(c0, c0 + c1),
        "ICL": icl_tail,
        "ICL_EQ": -abs(icl_tail) if not math.isnan(icl_tail) else math.nan,
        "ICH": ich_tail,
        "IRH": irh_tail,
        "IRL": irl_tail,
    }
    rep = VerificationReport(c.L, nr, icl, eq, ich, irh, irl, tail, Pi, tol)
    for name in CONSTRAINTS:
        s = rep.series(name)
        for t in np.flatnonzero(s < -tol):
            rep.violations.append(Violation(name, int(t), float(s[t])))
        tv = tail[name]
        if not math.isnan(tv) and tv < -tol:
            rep.violations.append(Violation(name, None, tv))
    return rep


def verify(alloc: Allocation, env: Environment, delta: Optional[float] = None, tol: float = TOL) -> VerificationReport:
    return verify_compiled(compile_allocation(alloc, env, delta), tol)
