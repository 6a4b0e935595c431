import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqreveal.allocation import Allocation, Contract, SeparatingSequence, all_pooling
from seqreveal.constraints import check_ich, check_icl, check_ir, check_nr, verify
from seqreveal.environment import Environment
from seqreveal.stationary import build_stationary

from _gen import random_allocation

ENV = Environment.linear()
FB = ENV.first_best


@pytest.fixture(scope="module")
def stat():
    return build_stationary(ENV, 0.999, 0.33)


def _bump_first_payment(alloc, eps):
    t = alloc.template
    rew = (Contract(t.reward[0].q, t.reward[0].x + eps),) + t.reward[1:]
    seq = replace(t, reward=rew)
    return replace(alloc, cohorts={0: seq}, cohort_template=seq)


def test_stationary_slacks(stat):
    rep = verify(stat, ENV)
    assert rep.implementable
    icl = rep.icl_slack[~np.isnan(rep.icl_slack)]
    assert np.all(np.abs(icl) <= 1e-9)
    assert rep.icl_equality.all()
    assert np.all(np.abs(rep.ich_slack) <= 1e-9)
    assert np.all(np.abs(rep.irh_slack) <= 1e-9)
    assert np.all(rep.nr_slack >= -1e-8)
    assert rep.profit > 1 / 3


def test_stationary_fails_nr_when_impatient(stat):
    rep = verify(stat, ENV, delta=0.5)
    assert not rep.implementable
    assert {v.constraint for v in rep.violations} >= {"NR"}


def test_all_pooling_implementable():
    rep = verify(all_pooling(ENV, N=3), ENV)
    assert rep.implementable
    np.testing.assert_allclose(rep.nr_slack, 0.0, atol=1e-12)
    assert np.all(np.isnan(rep.icl_slack))


def test_overpaying_first_period_breaks_ich(stat):
    eps = 0.01
    slack, tail = check_ich(_bump_first_payment(stat, eps), ENV)
    assert slack.min() == pytest.approx(-(1 - 0.99) * eps, abs=1e-12)
    assert tail == pytest.approx(-(1 - 0.99) * eps, abs=1e-12)
    rep = verify(_bump_first_payment(stat, eps), ENV)
    assert any(v.constraint == "ICH" for v in rep.violations)


def test_extra_rent_for_one_cohort(stat):
    eps = 0.01
    rent = (1 - 0.99) * eps  # the payment bump raises the cohort's rent by this much
    bumped = _bump_first_payment(stat, eps).template
    a = replace(stat, cohorts={0: bumped}, cohort_template=stat.template)
    slack, eq, tail = check_icl(a, ENV)
    assert slack[0] == pytest.approx(rent, abs=1e-12) and eq[0]
    assert abs(tail) <= 1e-12
    assert any(v.constraint == "ICL_EQ" and v.period == 0 for v in verify(a, ENV).violations)


def test_extra_rent_for_every_cohort(stat):
    # waiting a period still collects the raise, so only its interest shows up
    eps = 0.01
    rent = (1 - 0.99) * eps
    slack, eq, tail = check_icl(_bump_first_payment(stat, eps), ENV)
    assert np.nanmin(slack) == pytest.approx((1 - 0.99) * rent, abs=1e-12)
    assert tail == pytest.approx((1 - 0.99) * rent, abs=1e-12)


def test_equality_not_required_when_everyone_reveals():
    fb = FB
    pool = Contract(fb.q_star_H, float(ENV.cost_H(fb.q_star_H)))
    rew = (Contract(0.5, float(ENV.cost_H(0.5))),) * 40
    seq = SeparatingSequence(0, rew, Contract(fb.q_star_L, float(ENV.cost_L(fb.q_star_L))))
    a = Allocation((pool,), pool, {0: seq}, (ENV.alpha0,), 0.0)
    slack, eq, _ = check_icl(a, ENV)
    assert slack[0] > 0 and not eq.any()


def test_ir_low_tail_underpaid(stat):
    t = stat.template
    seq = replace(t, tail=Contract(t.tail.q, t.tail.x - 0.01))
    a = replace(stat, cohorts={0: seq}, cohort_template=seq)
    irh, irh_tail, irl, irl_tail = check_ir(a, ENV)
    assert irl_tail == pytest.approx(-0.01, abs=1e-12)
    assert any(v.constraint == "IRL" for v in verify(a, ENV).violations)


def test_nr_tail_certificate(stat):
    slack, tail = check_nr(stat, ENV)
    assert tail >= -1e-12 and slack.min() >= -1e-8


@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
@settings(max_examples=40, deadline=None)
def test_ich_invariant_to_window_extension(seed, extra):
    """Writing tail contracts out explicitly lengthens the window but changes no slack."""
    a = random_allocation(np.random.default_rng(seed), ENV, template=True)
    pad = {T: replace(s, reward=s.reward + (s.tail,) * extra) for T, s in a.cohorts.items()}
    t = a.cohort_template
    b = replace(a, cohorts=pad, cohort_template=replace(t, reward=t.reward + (t.tail,) * extra))
    sa, ta = check_ich(a, ENV)
    sb, tb = check_ich(b, ENV)
    assert b.window() > a.window()
    np.testing.assert_allclose(sb[:sa.size], sa, atol=1e-13)
    np.testing.assert_allclose(sb[sa.size:], tb, atol=1e-13)
    assert ta == pytest.approx(tb, abs=1e-13)


def test_report_exports(stat):
    rep = verify(stat, ENV)
    d = json.loads(rep.to_json())
    assert d["implementable"] and set(d["slacks"]) == {"NR", "ICL", "ICL_EQ", "ICH", "IRH", "IRL"}
    long = rep.to_csv().splitlines()
    assert long[0] == "t,constraint,slack"
    assert any(line.startswith("tail,NR,") for line in long)
    nr = rep.to_csv("NR").splitlines()
    assert nr[0] == "period,slack" and len(nr) == rep.window + 2
    assert rep.min_slack() >= -1e-12
