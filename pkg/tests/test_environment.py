import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqreveal.environment import (AgentType, Environment, LinearCost, SqrtValue, TabulatedFunction,
                                   check_assumption1, derivative, golden_section_max, parse_config, surplus)
from seqreveal.errors import DomainError, ValidityError


def test_benchmark_first_best():
    fb = Environment.linear().first_best
    assert fb.q_star_L == pytest.approx(0.25, abs=1e-9)
    assert fb.q_star_H == pytest.approx(1 / 9, abs=1e-9)
    assert fb.pi_star_L == pytest.approx(0.5, abs=1e-12)
    assert fb.pi_star_H == pytest.approx(1 / 3, abs=1e-12)


@given(st.floats(1.2, 2.9))
@settings(max_examples=30, deadline=None)
def test_first_best_closed_form(theta_L):
    fb = Environment.linear(theta_L=theta_L).first_best
    assert fb.q_star_L == pytest.approx(1 / theta_L**2, rel=1e-8)
    assert fb.pi_star_L == pytest.approx(1 / theta_L, rel=1e-12)


def test_delta_c_and_pi():
    env = Environment.linear()
    assert float(env.delta_c(0.5)) == pytest.approx(0.5)
    assert float(env.pi("H", 1 / 9)) == pytest.approx(1 / 3)
    assert float(env.pi(AgentType.L, 0.25)) == pytest.approx(0.5)


def test_surplus_domain():
    env = Environment.linear()
    assert surplus(env, "L", 0.25) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        surplus(env, "L", 1.5)
    with pytest.raises(DomainError):
        surplus(env, "H", -0.1)


def test_invalid_environments():
    with pytest.raises(ValidityError):
        Environment.linear(theta_L=3.0, theta_H=2.0)
    with pytest.raises((ValidityError, DomainError)):
        Environment.linear(alpha0=1.0)
    with pytest.raises((ValidityError, DomainError)):
        Environment.linear(delta=1.0)


def test_assumption_check():
    assert check_assumption1(Environment.linear()).holds


def test_with_delta():
    env = Environment.linear().with_delta(0.5)
    assert env.delta == 0.5


def test_golden_section():
    x, fx = golden_section_max(lambda q: -(q - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-6)


def test_derivative():
    assert derivative(math.sin, 0.0, 1e-5) == pytest.approx(1.0, abs=1e-8)


def test_tabulated_environment_matches_linear():
    q = np.linspace(0.0, 1.0, 2001)
    env = Environment(TabulatedFunction(q, 2 * np.sqrt(q)), TabulatedFunction(q, 2 * q),
                      TabulatedFunction(q, 3 * q), 1.0, 0.5, 0.99)
    fb = env.first_best
    assert fb.q_star_L == pytest.approx(0.25, abs=1e-3)
    assert fb.pi_star_H == pytest.approx(1 / 3, abs=1e-3)


def test_parse_config():
    env = parse_config("theta_L = 2.5  # efficient type\ntheta_H=3\ndelta=0.9\n")
    assert isinstance(env.cost_L, LinearCost) and env.cost_L.theta == 2.5
    assert isinstance(env.value, SqrtValue)
    assert env.delta == 0.9
    for bad in ("theta_L=2\ntheta_L=2\n", "gamma=1\n", "theta_L\n", "theta_L=abc\n", "value=cubic\n"):
        with pytest.raises(ValueError):
            parse_config(bad)
