"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from seqreveal.allocation import compile_allocation, nr_slacks, principal_profit
from seqreveal.constraints import check_ich, verify
from seqreveal.environment import Environment
from seqreveal.feasibility import Classification, classify, threshold_theta
from seqreveal.optimizer import lifecycle_trace, optimize
from seqreveal.reneging import PunishmentState, large_delta_boundary, patience_threshold, punishment_payoff
from seqreveal.reward import cumulative_payments, debt_length_from_ratio, frontload_sequence, sequence_values, split_rent
from seqreveal.stationary import build_stationary, nr_waiting_check, stationary_design

from _gen import brute_flows, random_allocation
from test_reward import random_cohort


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[AC{n}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


def env(theta_L, **kw):
    return Environment.linear(theta_L=theta_L, **kw)


def grid_oracle(theta_L, theta_H=3.0, n=100_000):
    qL, qH = 1 / theta_L**2, 1 / theta_H**2
    q = np.linspace(qL, 1.0, n)
    dC, need = (theta_H - theta_L) * q, (theta_H - theta_L) * qH
    q, dC = q[dC > need], dC[dC > need]
    rhs = np.log(dC / (dC - need)) * (1 / theta_L - (2 * np.sqrt(q) - theta_H * q))
    return 1 / theta_L - 1 / theta_H, float(rhs.min())


def test_ac1_classification(say):
    want = {1.5: Classification.REVEALING, 2.0: Classification.REVEALING, 2.5: Classification.NON_REVEALING}
    got, times = {}, {}
    for th in want:
        e = env(th)
        t0 = time.perf_counter()
        got[th] = classify(e).classification
        times[th] = time.perf_counter() - t0
    ok = got == want and max(times.values()) < 1.0
    say(1, ok, f"classify: {', '.join(f'{k}->{v.value}' for k, v in got.items())}; "
               f"max runtime {max(times.values()):.3f} s")
    assert ok


def test_ac2_condition_magnitudes(say):
    t0 = time.perf_counter()
    r2, r25 = classify(env(2.0)), classify(env(2.5))
    elapsed = time.perf_counter() - t0
    (o_lhs2, o_rhs2), (o_lhs25, o_rhs25) = grid_oracle(2.0), grid_oracle(2.5)
    ok = (abs(r2.lhs - 1 / 6) <= 1e-9 and 0.138 <= r2.min_rhs <= 0.142
          and 0.0666 <= r25.lhs <= 0.0667 and 0.083 <= r25.min_rhs <= 0.088
          and abs(r2.min_rhs - o_rhs2) < 1e-6 and abs(r25.min_rhs - o_rhs25) < 1e-6
          and abs(r2.lhs - o_lhs2) < 1e-9 and abs(r25.lhs - o_lhs25) < 1e-9
          and elapsed < 1.0)
    say(2, ok, f"theta_L=2: lhs={r2.lhs:.10f} min_rhs={r2.min_rhs:.6f} (grid {o_rhs2:.6f}); "
               f"theta_L=2.5: lhs={r25.lhs:.6f} min_rhs={r25.min_rhs:.6f} (grid {o_rhs25:.6f}); {elapsed:.3f} s")
    assert ok


def test_ac3_threshold(say):
    t0 = time.perf_counter()
    res = threshold_theta(env(2.0), (1.2, 2.9), 1e-6)
    elapsed = time.perf_counter() - t0
    width = res.bracket[1] - res.bracket[0]
    ok = 2.0 < res.theta_bar < 2.5 and res.sign_changes == 1 and width <= 1e-6 and elapsed < 5.0
    say(3, ok, f"theta_bar={res.theta_bar:.7f} bracket width={width:.2e} sign changes={res.sign_changes}; "
               f"{elapsed:.3f} s")
    assert ok


def test_ac4_reward_phase(say):
    e = env(2.0)
    t0 = time.perf_counter()
    plan = split_rent(e, 1 / 9, 0.5, 0.9)
    elapsed = time.perf_counter() - t0
    # arithmetic oracle: two full periods, then the remainder over the third increment
    full = (1 - 0.9**2) * 0.5
    beta = (1 / 9 - full) / ((1 - 0.9) * 0.9**2 * 0.5)
    rel = abs(plan.delivered_rent(e) - 1 / 9) / (1 / 9)
    ok = plan.m == 3 and 0.397 <= plan.beta <= 0.399 and abs(plan.beta - beta) < 1e-12 and rel <= 1e-12 \
        and elapsed < 0.1
    say(4, ok, f"m={plan.m} beta={plan.beta:.6f} (oracle {beta:.6f}) rent rel err={rel:.1e}; {elapsed * 1e3:.2f} ms")
    assert ok


@pytest.mark.xfail(strict=True, reason="literal criterion is not monotone under the smallest-T definition; "
                                        "see the decisions ledger")
def test_ac5_debt_length_limit(say):
    t0 = time.perf_counter()
    vals = [(1 - d) * debt_length_from_ratio(0.5, d) for d in (0.9, 0.99, 0.999)]
    elapsed = time.perf_counter() - t0
    increasing = vals[0] < vals[1] < vals[2] <= math.log(2) + 1e-12
    close = abs(vals[2] - math.log(2)) / math.log(2) < 0.01
    ok = increasing and close and elapsed < 0.1
    say(5, ok, f"(1-delta)*T = {', '.join(f'{v:.4f}' for v in vals)}; ln 2 = {math.log(2):.4f}; "
               f"increasing={increasing} within 1%={close}; {elapsed * 1e3:.2f} ms")
    assert ok


def test_ac5_debt_length_convergence(say):
    """The part of criterion 5 that holds: the error to ln 2 shrinks and is under 1% at delta=0.999."""
    vals = [(1 - d) * debt_length_from_ratio(0.5, d) for d in (0.9, 0.99, 0.999)]
    err = [abs(v - math.log(2)) for v in vals]
    ok = err[0] > err[1] > err[2] and err[2] / math.log(2) < 0.01
    say("5b", ok, f"|(1-delta)*T - ln 2| = {', '.join(f'{v:.2e}' for v in err)}")
    assert ok


def test_ac6_constructed_allocation(say):
    e = env(2.0, alpha0=0.5, delta=0.99)
    t0 = time.perf_counter()
    alloc = build_stationary(e, 0.999, 0.33)
    rep = verify(alloc, e)
    wait = nr_waiting_check(stationary_design(e, 0.999, 0.33), e)
    elapsed = time.perf_counter() - t0
    ok = rep.implementable and rep.min_slack() >= -1e-8 and 0.01 < wait < 0.03 and rep.profit > 1 / 3 \
        and elapsed < 2.0
    say(6, ok, f"verify={rep.implementable} min slack={rep.min_slack():.2e} waiting slack={wait:.5f} "
               f"Pi_0={rep.profit:.9f}; {elapsed:.3f} s")
    assert ok


def test_ac7_patience_thresholds(say):
    e = env(2.0)
    t0 = time.perf_counter()
    hat = patience_threshold(e)
    boundary = large_delta_boundary(e)
    rep = verify(build_stationary(e, 0.999, 0.33), e, delta=0.5)
    elapsed = time.perf_counter() - t0
    nr_fails = any(v.constraint == "NR" for v in rep.violations)
    ok = abs(hat - 0.9) < 1e-9 and abs(hat - boundary) < 1e-9 and nr_fails and elapsed < 1.0
    say(7, ok, f"delta_hat={hat:.12f} boundary={boundary:.12f} NR fails at 0.5={nr_fails} "
               f"(min NR {rep.nr_slack.min():.5f}); {elapsed:.3f} s")
    assert ok


def test_ac8_property_suite(say):
    e = env(2.0)
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()

    # time consistency of Pi on and beyond the window, against brute-force flows
    worst_tc = 0.0
    for _ in range(100):
        a = random_allocation(rng, e, template=bool(rng.integers(2)))
        d = float(rng.choice([0.5, 0.9, 0.99]))
        c = compile_allocation(a, e, d)
        H = c.L + 20
        flow = brute_flows(a, e, H)
        Pi = np.array([principal_profit(a, e, t, d) for t in range(H + 1)])
        worst_tc = max(worst_tc, float(np.max(np.abs(Pi[:-1] - ((1 - d) * flow + d * Pi[1:])))))

    # frontloading keeps both types' values and pays at least as much at every prefix
    worst_val, worst_dom = 0.0, 0.0
    for _ in range(100):
        seq = random_cohort(rng)
        d = float(rng.choice([0.5, 0.9, 0.99]))
        out = frontload_sequence(seq, e, d)
        worst_val = max(worst_val, *np.abs(np.subtract(sequence_values(out, e, d), sequence_values(seq, e, d))))
        n = max(seq.m, out.m) + 3
        worst_dom = max(worst_dom, float(np.max(cumulative_payments(seq, n, d) - cumulative_payments(out, n, d))))

    # the high type's best false announcement does not depend on how far the window reaches
    worst_ich = 0.0
    from dataclasses import replace
    for _ in range(100):
        a = random_allocation(rng, e, template=True)
        extra = int(rng.integers(1, 30))
        b = replace(a, cohorts={T: replace(s, reward=s.reward + (s.tail,) * extra) for T, s in a.cohorts.items()},
                    cohort_template=replace(a.cohort_template, reward=a.cohort_template.reward
                                            + (a.cohort_template.tail,) * extra))
        sa, ta = check_ich(a, e)
        sb, tb = check_ich(b, e)
        worst_ich = max(worst_ich, float(np.max(np.abs(sb[:sa.size] - sa))), float(np.max(np.abs(sb[sa.size:] - tb))),
                        abs(ta - tb))

    # the punishment payoff is exactly the NR bound
    worst_pun = 0.0
    for _ in range(100):
        a = random_allocation(rng, e)
        c = compile_allocation(a, e)
        slack, _, _, Pi = nr_slacks(c)
        bound = np.array([punishment_payoff(PunishmentState.at(e, a.revealed_before(t)), e) for t in range(c.L)])
        worst_pun = max(worst_pun, float(np.max(np.abs(Pi[:-1] - slack - bound))))

    elapsed = time.perf_counter() - t0
    ok = worst_tc <= 1e-9 and worst_val <= 1e-10 and worst_dom <= 1e-12 and worst_ich <= 1e-12 \
        and worst_pun <= 1e-12 and elapsed < 10.0
    say(8, ok, f"time consistency {worst_tc:.1e}, frontload value {worst_val:.1e} / dominance {worst_dom:.1e}, "
               f"IC-H window {worst_ich:.1e}, punishment identity {worst_pun:.1e}; {elapsed:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def revealing_run():
    t0 = time.perf_counter()
    res = optimize(env(2.0, delta=0.99), budget=20000)
    return res, time.perf_counter() - t0


def test_ac9_optimizer(say, revealing_run):
    t0 = time.perf_counter()
    pool = optimize(env(2.5, delta=0.99), budget=20000)
    t_pool = time.perf_counter() - t0
    res, t_rev = revealing_run
    s = res.structure
    ok = (abs(pool.profit - 1 / 3) <= 1e-6 and not pool.revealing and t_pool < 60
          and res.profit > 1 / 3 and res.report.implementable and res.profit >= max(res.seed_profits) - 1e-12
          and s.gradual and s.eventual and s.separating_floor and s.pooling_below and t_rev < 60)
    say(9, ok, f"theta_L=2.5: Pi_0={pool.profit:.10f} revealing={pool.revealing} ({t_pool:.1f} s); "
               f"theta_L=2: Pi_0={res.profit:.8f} gradual={s.gradual} eventual={s.eventual} "
               f"floor={s.separating_floor} below={s.pooling_below} ({t_rev:.1f} s)")
    assert ok


def test_ac10_lifecycle(say, revealing_run):
    res, t_opt = revealing_run
    e = env(2.0, delta=0.99)
    fb = e.first_best
    t0 = time.perf_counter()
    rows = lifecycle_trace(res.allocation, e, 8)
    elapsed = t_opt + time.perf_counter() - t0
    t, qH, _, qL, _ = map(np.array, zip(*rows))
    N = res.allocation.N
    jump = qL[8] > fb.q_star_L + 1e-9
    falls = bool(np.all(np.diff(qL[8:]) <= 1e-12)) and abs(qL[-1] - fb.q_star_L) < 1e-9
    below = bool(np.all(qH[:N] < fb.q_star_H))
    rising = bool(np.all(np.diff(qH) >= 0))
    ok = jump and falls and below and rising and elapsed < 60
    say(10, ok, f"q_L(8)={qL[8]:.4f} jump={jump} decreasing to q*_L={falls}; q_H in "
                f"[{qH[:N].min():.5f}, {qH[:N].max():.5f}] below q*_H={below} nondecreasing={rising}; {elapsed:.1f} s")
    assert ok
