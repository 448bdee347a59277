import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmotion.dist_core import ModelParams
from coopmotion.hj_reference import (
    PiecewiseSolution,
    beta_limit_cdf,
    beta_scale,
    extended_limit_cdf,
    hopf_lax_numeric,
    legendre_closed,
    legendre_numeric,
    mixture_limit_cdf,
    profile_coefficient,
    ramp_solution_quadratic,
    u_ab_closed,
)

P1 = ModelParams(1, 0.5)
P2 = ModelParams(2, 0.5)


def step_data(a, b):
    return lambda y: np.where(np.asarray(y) <= 0, a, b)


def test_legendre_examples():
    assert legendre_closed(0.0, P1) == 0.0
    assert legendre_closed(1.0, P1) == pytest.approx(0.5, abs=1e-15)
    # sup_a (2a - q a^2) with q close to 1 tends to 1
    assert legendre_closed(2.0, ModelParams(1, 0.999999)) == pytest.approx(1.0, abs=1e-5)
    assert legendre_closed(1.0, P2) == pytest.approx(math.sqrt(2) * 2 / (3 * math.sqrt(3)), abs=1e-15)
    assert legendre_numeric(0.0, P1) == 0.0


@pytest.mark.parametrize("params", [P1, P2, ModelParams(3, 0.2), ModelParams(1.5, 0.7)])
@pytest.mark.parametrize("p", [-2.0, -0.3, 0.5, 1.0, 2.0])
def test_legendre_closed_matches_grid(params, p):
    assert legendre_numeric(p, params, grid_half_width=10.0) == pytest.approx(
        legendre_closed(p, params), abs=1e-6
    )


def test_legendre_numeric_rejects_bad_grid():
    with pytest.raises(ValueError):
        legendre_numeric(1.0, P1, grid_points=2)
    with pytest.raises(ValueError):
        legendre_numeric(1.0, P1, grid_half_width=0.0)


def test_hopf_lax_examples():
    assert hopf_lax_numeric(lambda y: 0.0 * np.asarray(y), 0.3, 2.0, P1) == pytest.approx(0.0, abs=1e-12)
    assert hopf_lax_numeric(step_data(0, 1), 1.0, 1.0, P1) == pytest.approx(0.5, abs=2e-3)
    assert hopf_lax_numeric(step_data(0, 1), 2.0, 1.0, P1) == pytest.approx(1.0, abs=2e-3)
    with pytest.raises(ValueError):
        hopf_lax_numeric(step_data(0, 1), 0.0, 0.0, P1)


def test_hopf_lax_window_doubling_warns_then_succeeds():
    # u0(y) = 0.1 y: the minimiser sits at y = -2 q t 0.1 = -0.1 and the value
    # is -t H(0.1) = -0.005
    with pytest.warns(RuntimeWarning):
        v = hopf_lax_numeric(lambda y: np.asarray(y) * 0.1, 0.0, 1.0, P1, y_window=(-0.03, 0.03))
    assert v == pytest.approx(-0.005, abs=1e-9)


def test_hopf_lax_gives_up_after_three_doublings():
    with pytest.warns(RuntimeWarning), pytest.raises(RuntimeError):
        hopf_lax_numeric(lambda y: np.asarray(y) * 0.1, 0.0, 1.0, P1, y_window=(-1e-6, 1e-6))


def test_u_ab_closed_branches():
    assert u_ab_closed(-3.0, 7.0, 0.2, 0.9, P2) == 0.2
    assert u_ab_closed(1.0, 1.0, 0.0, 1.0, P1) == pytest.approx(0.5)
    assert u_ab_closed(2.0, 1.0, 0.0, 1.0, P1) == 1.0
    sol = PiecewiseSolution(0.0, 1.0, P1)
    assert sol.edge(1.0) == pytest.approx(math.sqrt(2))
    assert sol(np.array([-1.0, 0.5]), 0.0).tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        u_ab_closed(0.0, 1.0, 0.5, 0.5, P1)
    with pytest.raises(ValueError):
        sol(0.0, -1.0)


@pytest.mark.parametrize("params", [P1, P2, ModelParams(3, 0.8)])
@pytest.mark.parametrize("a,b", [(0.0, 1.0), (0.25, 0.75), (0.1, 0.3)])
def test_u_ab_closed_matches_hopf_lax(params, a, b):
    for t in (0.5, 2.0):
        sol = PiecewiseSolution(a, b, params)
        xs = np.linspace(-0.5, sol.edge(t) * 1.3, 15)
        for x in xs:
            num = hopf_lax_numeric(step_data(a, b), float(x), t, params)
            assert num == pytest.approx(sol(x, t), abs=2e-3)


def test_beta_limit_examples():
    assert beta_limit_cdf(0.0, P1) == 0.0
    assert beta_limit_cdf(-1.0, P1) == 0.0
    assert beta_limit_cdf(1.0, P1) == 0.5
    assert beta_limit_cdf(math.sqrt(2), P1) == 1.0
    for params in (P1, P2, ModelParams(3, 0.1), ModelParams(2.5, 0.9)):
        assert beta_limit_cdf(beta_scale(params), params) == 1.0


@pytest.mark.parametrize("params", [P1, P2, ModelParams(3, 0.3)])
def test_beta_limit_is_scaled_beta(params):
    stats = pytest.importorskip("scipy.stats")
    m = params.m
    s = beta_scale(params)
    x = np.linspace(0.01, 0.99, 50) * s
    assert np.allclose(beta_limit_cdf(x, params), stats.beta.cdf(x / s, (m + 1) / m, 1), atol=1e-12)
    # density by finite differences against the Beta density
    h = 1e-6
    dens = (beta_limit_cdf(x + h, params) - beta_limit_cdf(x - h, params)) / (2 * h)
    assert np.allclose(dens, stats.beta.pdf(x / s, (m + 1) / m, 1) / s, rtol=1e-5)


def test_beta_limit_equals_u01_at_time_one():
    for params in (P1, P2, ModelParams(3, 0.4)):
        x = np.linspace(-1, 3, 101)
        assert np.allclose(beta_limit_cdf(x, params), u_ab_closed(x, 1.0, 0.0, 1.0, params), atol=1e-14)


def test_extended_limit_examples():
    x = np.linspace(-1, 3, 41)
    assert np.allclose(extended_limit_cdf(x, 0, 1, P1), beta_limit_cdf(x, P1), atol=1e-15)
    assert extended_limit_cdf(-0.2, 0.25, 0.75, P1) == 0.25
    assert extended_limit_cdf(0.8, 0.25, 0.75, P1) == pytest.approx(0.57, abs=1e-15)
    with pytest.raises(ValueError):
        extended_limit_cdf(0.0, 0.5, 0.5, P1)


def test_mixture_limit_examples():
    x = np.linspace(-0.5, 2, 51)
    assert np.allclose(mixture_limit_cdf(x, 1, [1.0], P1), beta_limit_cdf(x, P1), atol=1e-15)
    # two equal classes: one Beta, compressed by 0.5^(m/(m+1))
    assert np.allclose(
        mixture_limit_cdf(x, 2, [0.5, 0.5], P1), beta_limit_cdf(x / 0.5**0.5, P1), atol=1e-14
    )
    # unequal weights: sum of the finite parts of the extended limits
    want = (extended_limit_cdf(x, 0.1, 1.0, P1) - 0.1) + (extended_limit_cdf(x, 0.9, 1.0, P1) - 0.9)
    assert np.allclose(mixture_limit_cdf(x, 2, [0.9, 0.1], P1), want, atol=1e-14)
    with pytest.raises(ValueError):
        mixture_limit_cdf(x, 2, [0.5, 0.4], P1)
    with pytest.raises(ValueError):
        mixture_limit_cdf(x, 3, [0.5, 0.5], P1)


def test_mixture_matches_sampling():
    # each class r: position (pi_r / c)^(m/(m+1)) * B, B ~ Beta(2, 1) for m = 1
    rng = np.random.default_rng(11)
    pi = np.array([0.9, 0.1])
    c = profile_coefficient(P1)
    cls = rng.choice(2, size=200_000, p=pi)
    pos = (pi[cls] / c) ** 0.5 * rng.beta(2, 1, size=cls.size)
    x = np.linspace(0, 1.5, 31)
    emp = (pos[None, :] < x[:, None]).mean(axis=1)
    assert np.max(np.abs(emp - mixture_limit_cdf(x, 2, pi, P1))) < 0.005


def test_ramp_closed_form_matches_hopf_lax():
    ramp = lambda y: np.clip(y, 0.0, 1.0)
    for t in (0.3, 1.0, 2.5):
        for x in np.linspace(-0.5, 2.5, 13):
            assert hopf_lax_numeric(ramp, float(x), t, P1) == pytest.approx(
                ramp_solution_quadratic(x, t, P1), abs=1e-6
            )
    with pytest.raises(ValueError):
        ramp_solution_quadratic(0.5, 1.0, P2)


@settings(max_examples=50)
@given(st.floats(0.05, 5.0), st.floats(-1.0, 3.0), st.floats(0.1, 3.0),
       st.sampled_from([P1, P2, ModelParams(3, 0.7)]))
def test_scaling_invariance(rho, x, t, params):
    sol = PiecewiseSolution(0.0, 1.0, params)
    m = params.m
    assert sol(rho * x, rho ** (m + 1) * t) == pytest.approx(sol(x, t), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(0.0, 0.9), st.floats(0.05, 0.95), st.floats(0.1, 4.0))
def test_solution_monotone_in_x_and_bounded(a, width, t):
    b = min(1.0, a + width)
    if not a < b:
        return
    sol = PiecewiseSolution(a, b, P2)
    xs = np.linspace(-1, 4, 400)
    v = sol(xs, t)
    assert np.all(np.diff(v) >= -1e-15)
    assert v.min() >= a and v.max() <= b
