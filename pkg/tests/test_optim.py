import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from ambdg.errors import ConfigError
from ambdg.optim import (
    AssumptionConstants,
    DualAvgState,
    as_param,
    bregman,
    dual_update,
    grad_psi,
    primal_update,
    psi,
    step_size,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def state(L=0.0, tau=0, b_bar=1.0, d=2):
    return DualAvgState.initial(d, tau=tau, lipschitz_L=L, b_bar=b_bar)


@pytest.mark.parametrize(
    "L, tau, b_bar, t, expected",
    [
        (0.0, 0, 1.0, 1, 1.0),
        (0.0, 3, 1.0, 1, 0.5),
        # 1 / (2 + sqrt(100/600)), 40-digit evaluation
        (2.0, 4, 600.0, 96, 0.4152395764007313870),
    ],
)
def test_step_size_values(L, tau, b_bar, t, expected):
    assert step_size(state(L, tau, b_bar), t) == pytest.approx(expected, rel=1e-14)


@given(
    st.floats(0, 100), st.integers(0, 50), st.floats(0.1, 1e4), st.integers(1, 10**6)
)
def test_step_size_strictly_decreasing(L, tau, b_bar, t):
    s = state(L, tau, b_bar)
    assert step_size(s, t + 1) < step_size(s, t)


def test_initial_state():
    s = state(d=3)
    assert s.t == 1
    assert np.array_equal(s.z, np.zeros(3))
    assert np.array_equal(s.w, np.zeros(3))


@pytest.mark.parametrize(
    "z, g, expected",
    [((0, 0), (1, 2), (1, 2)), ((3, -1), (0, 0), (3, -1)), ((1, 1), (-1, -1), (0, 0))],
)
def test_dual_update_examples(z, g, expected):
    s = DualAvgState(z=np.array(z, float), t=4, tau=0, lipschitz_L=0.0, b_bar=1.0)
    nxt = dual_update(s, np.array(g, float))
    assert np.array_equal(nxt.z, np.array(expected, float))
    assert nxt.t == 5


def test_dual_update_dimension_mismatch():
    with pytest.raises(ConfigError):
        dual_update(state(d=2), np.ones(3))


def test_invalid_state_rejected():
    with pytest.raises(ConfigError):
        DualAvgState(z=np.zeros(2), t=0)
    with pytest.raises(ConfigError):
        DualAvgState(z=np.zeros(2), b_bar=0.0)
    with pytest.raises(ConfigError):
        as_param([1.0, np.nan])
    with pytest.raises(ConfigError):
        as_param([1.0, 2.0], d=3)


def test_dual_update_sums_gradients(rng):
    s = state(d=6)
    gs = rng.standard_normal((40, 6))
    for g in gs:
        s = dual_update(s, g)
    np.testing.assert_allclose(s.z, gs.sum(axis=0), rtol=1e-9, atol=1e-12)
    assert s.t == 41


def test_dual_update_sets_primal():
    s = dual_update(state(L=1.0, d=2), np.array([2.0, -4.0]))
    np.testing.assert_array_equal(s.w, primal_update(s.z, step_size(s, 2)))


def test_primal_update_examples():
    np.testing.assert_array_equal(primal_update(np.array([1.0, 0.0]), 0.5), [-0.5, 0.0])
    np.testing.assert_array_equal(primal_update(np.zeros(4), 3.7), np.zeros(4))


def test_primal_update_matches_numerical_minimizer(rng):
    for _ in range(5):
        z = rng.standard_normal(5)
        alpha = 0.3
        obj = lambda w: z @ w + psi(w) / alpha
        jac = lambda w: z + w / alpha
        res = minimize(obj, np.ones(5), jac=jac, method="BFGS", options={"gtol": 1e-12})
        np.testing.assert_allclose(primal_update(z, alpha), res.x, atol=1e-8)


@given(arrays(np.float64, 7, elements=finite), st.floats(1e-3, 1e3))
def test_primal_optimality_certificate(z, alpha):
    w = primal_update(z, alpha)
    assert np.all(np.abs(z + grad_psi(w) / alpha) <= 1e-12 * np.maximum(1, np.abs(z)))


def test_bregman_examples(rng):
    assert bregman(np.ones(3), np.ones(3)) == 0.0
    assert bregman(np.array([1.0, 0.0]), np.zeros(2)) == 0.5
    u, v = rng.standard_normal(10), rng.standard_normal(10)
    by_terms = psi(u) - psi(v) - grad_psi(v) @ (u - v)
    assert bregman(u, v) == pytest.approx(by_terms, rel=1e-12)
    with pytest.raises(ConfigError):
        bregman(np.zeros(2), np.zeros(3))


@given(arrays(np.float64, 5, elements=finite), arrays(np.float64, 5, elements=finite))
def test_bregman_nonnegative(u, v):
    assert bregman(u, v) >= 0


def test_psi_strong_convexity_equality(rng):
    for _ in range(1000):
        w1, w2 = rng.standard_normal((2, 6)) * rng.uniform(0.1, 10)
        lhs = psi(w2)
        rhs = psi(w1) + grad_psi(w1) @ (w2 - w1) + 0.5 * np.sum((w2 - w1) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_assumption_constants():
    c = AssumptionConstants(J=1, L=2, sigma2=0.5, C2=4)
    assert c.C == 2
    with pytest.raises(ConfigError):
        AssumptionConstants(J=-1, L=0, sigma2=0, C2=0)
