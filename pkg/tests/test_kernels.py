import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqreveal import _kernels as K

pytestmark = pytest.mark.skipif(K.NUMBA is None, reason="numba not installed")


def _segments(rng, n_coh):
    lengths = rng.integers(1, 12, n_coh)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    return offsets, rng.uniform(-1, 1, offsets[-1]), rng.uniform(-1, 1, n_coh)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.999))
@settings(max_examples=40, deadline=None)
def test_backends_agree(seed, delta):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 80))
    f, imm = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    imm[rng.uniform(size=n) < 0.3] = -np.inf
    np.testing.assert_allclose(K.NUMBA.discounted_backward(f, 0.3, delta),
                               K.NUMPY.discounted_backward(f, 0.3, delta), rtol=1e-12, atol=1e-13)
    for a, b in zip(K.NUMBA.stopping_backward(imm, f, 0.2, delta), K.NUMPY.stopping_backward(imm, f, 0.2, delta)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)
    offsets, rew, tails = _segments(rng, int(rng.integers(1, 6)))
    for a, b in zip(K.NUMBA.segment_values(offsets, rew, tails, delta),
                    K.NUMPY.segment_values(offsets, rew, tails, delta)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(K.NUMBA.segment_sup(offsets, rew, tails, delta),
                               K.NUMPY.segment_sup(offsets, rew, tails, delta), rtol=1e-12, atol=1e-13)
    ids = rng.integers(-1, tails.size, n).astype(np.int64)
    masses = rng.uniform(0, 0.01, n)
    L = n + 15
    np.testing.assert_allclose(K.NUMBA.scatter_cohorts(ids, masses, offsets, rew, tails, L),
                               K.NUMPY.scatter_cohorts(ids, masses, offsets, rew, tails, L), rtol=1e-12, atol=1e-13)
    targets, dcs = rng.uniform(0.01, 0.2, 10), rng.uniform(0.05, 0.6, 10)
    (m1, b1), (m2, b2) = (ns.split_rent_constant(targets, dcs, max(delta, 0.1)) for ns in (K.NUMBA, K.NUMPY))
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_allclose(b1, b2, atol=1e-12)


def test_discounted_backward_definition():
    f = np.array([1.0, 2.0, 3.0])
    d = 0.5
    v = K.discounted_backward(f, 4.0, d)
    assert v[3] == 4.0
    assert v[2] == pytest.approx(0.5 * 3 + 0.5 * 4)
    assert v[0] == pytest.approx(0.5 * 1 + 0.5 * v[1])


def test_split_rent_constant_undeliverable():
    m, _ = K.split_rent_constant(np.array([1.0]), np.array([0.5]), 0.9)
    assert m[0] == -1


SCRIPT = """
import json
from seqreveal.environment import Environment
from seqreveal.stationary import build_stationary
from seqreveal.constraints import verify
from seqreveal import _kernels as K
env = Environment.linear()
rep = verify(build_stationary(env, 0.999, 0.33), env)
print(json.dumps({"backend": K.BACKEND.name, "profit": rep.profit, "min": rep.min_slack(), "ok": rep.implementable}))
"""


def _run(backend):
    env = dict(os.environ, SEQREVEAL_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_env_flag_selects_backend_and_results_match():
    a, b = _run("numba"), _run("numpy")
    assert (a["backend"], b["backend"]) == ("numba", "numpy")
    assert a["ok"] and b["ok"]
    assert a["profit"] == pytest.approx(b["profit"], abs=1e-13)
    assert a["min"] == pytest.approx(b["min"], abs=1e-12)


def test_bad_backend_flag():
    env = dict(os.environ, SEQREVEAL_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", "import seqreveal"], env=env, capture_output=True, text=True)
    assert out.returncode != 0 and "SEQREVEAL_BACKEND" in out.stderr
