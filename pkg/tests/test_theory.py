import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from tabdrw.theory import (BoundError, BoundParams, SpectrumSet, alpha_coefficient,
                           apply_fixed_spectrum, beta_matrix, beta_vector, delta_pcc,
                           exp_integral_e1, golden_section_max, normal_cdf, predicted_delta,
                           sample_size_bound, script_I, subgaussian_objective,
                           subgaussian_z_bound, w2_bound, z_lower_bound)


def test_beta_examples():
    assert np.all(beta_vector(SpectrumSet(set(), 7), 3) == 0)
    assert np.all(beta_vector(SpectrumSet({1, 2}, 7), 0) == 0)
    assert beta_vector(SpectrumSet({1}, 5), 1)[1] == pytest.approx(math.sin(2 * math.pi / 5) ** 2)
    B = beta_matrix(SpectrumSet({1, 3}, 9))
    assert np.allclose(B, B.T)


def test_spectrum_set_validation():
    with pytest.raises(BoundError):
        SpectrumSet({6}, 11)
    with pytest.raises(BoundError):
        SpectrumSet({1}, 2)


def test_predicted_delta_trivial_cases(rng):
    x = rng.standard_normal(11)
    assert np.all(predicted_delta(x, SpectrumSet({1, 4}, 11), -1.0) == 0)
    assert np.all(predicted_delta(x, SpectrumSet(set(), 11), 0.5) == 0)


@pytest.mark.parametrize("delta", [1.0, 0.5, 0.0, -0.3])
def test_predicted_delta_matches_dft(rng, delta):
    spec = SpectrumSet({1, 3, 4}, 11)
    X = rng.standard_normal((200, 11))
    emp = apply_fixed_spectrum(X, spec, delta) - X
    pred = np.array([predicted_delta(x, spec, delta) for x in X])
    assert np.abs(emp - pred).max() < 1e-9


def test_delta_pcc_and_w2_trivial_cases(rng):
    S = np.cov(rng.standard_normal((50, 5)), rowvar=False)
    b = rng.standard_normal(5)
    assert delta_pcc(S, b, b, 0.0, 1, 2) == 0
    assert delta_pcc(S, np.zeros(5), np.zeros(5), 0.4, 1, 2) == 0
    assert w2_bound(S, b, 0.0) == 0
    assert w2_bound(np.eye(5), b, 0.3) == pytest.approx(0.3 * np.linalg.norm(b))


def test_delta_pcc_matches_global_spectrum_embedding(rng):
    p, spec, delta = 11, SpectrumSet({2, 5}, 11), 0.5
    X = rng.standard_normal((2000, p))
    Xw = apply_fixed_spectrum(X, spec, delta)
    Sigma = X.T @ X / X.shape[0]
    B, a = beta_matrix(spec), alpha_coefficient(p, delta)
    for j, l in [(0, 3), (2, 7), (4, 4)]:
        emp = (Xw.T @ Xw / X.shape[0])[j, l] - Sigma[j, l]
        assert abs(delta_pcc(Sigma, B[:, j], B[:, l], a, j, l) - emp) < 1e-8


def test_e1_examples():
    assert exp_integral_e1(1.0) == pytest.approx(0.219384, abs=1e-6)
    assert exp_integral_e1(10.0) == pytest.approx(4.15697e-6, rel=1e-5)
    assert exp_integral_e1(50.0) < 1e-23
    with pytest.raises(BoundError):
        exp_integral_e1(0.0)


def test_e1_against_quadrature():
    for u in np.geomspace(1e-3, 40, 25):
        quad, _ = integrate.quad(lambda t: math.exp(-t) / t, u, np.inf, epsabs=0, epsrel=1e-13,
                                 limit=200)
        assert abs(exp_integral_e1(u) - quad) <= 1e-10 * max(1.0, quad)
        assert exp_integral_e1(u) == pytest.approx(special.exp1(u), rel=1e-12)


def test_normal_cdf_examples():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(2.32) == pytest.approx(0.98983, abs=1e-5)
    for x in (0.3, 1.7, 4.2):
        assert abs(normal_cdf(-x) - (1 - normal_cdf(x))) < 1e-14


def test_script_I_limits():
    assert script_I(1e-6) < 1e-4
    # with equal eigenvalues the E1 term is absent
    s = 0.7
    t1 = s / math.sqrt(s * s + 1) * (normal_cdf(math.sqrt(1 + 1 / s**2)) - 0.5)
    t2 = s / math.sqrt(s * s + 1) * (1 - normal_cdf(math.sqrt(1 + 1 / s**2)))
    assert script_I(s) == pytest.approx(t1 + t2, rel=1e-14)
    assert script_I(s, 0.5, 2.0) > 0


@pytest.mark.parametrize("sigma, expected", [(0.1, 30.13), (0.5, 14.95), (1.0, 7.04)])
def test_z_lower_bound_examples(sigma, expected):
    assert z_lower_bound(BoundParams(1000, 11, 0.5, 0.5, sigma)) == pytest.approx(expected, abs=0.02)


def test_z_lower_bound_zero_gamma():
    assert z_lower_bound(BoundParams(1000, 11, 0.0, 0.5, 0.3)) == 0


@pytest.mark.parametrize("sigma, expected", [(0.1, 108), (0.2, 153), (0.5, 437)])
def test_sample_size_examples(sigma, expected):
    prm = BoundParams(1000, 11, 0.5, 0.5, sigma)
    assert sample_size_bound(0.001, 0.01, prm, q_alpha=3.09) == expected
    assert sample_size_bound(0.001, 0.01, prm) == expected


def test_sample_size_beta_limit():
    prm = BoundParams(1000, 11, 0.5, 0.5, 0.2)
    from tabdrw.theory import bound_bracket
    limit = 3.09**2 / (5 * 0.25 * bound_bracket(prm) ** 2)
    assert sample_size_bound(0.001, 1 - 1e-12, prm, 3.09) == math.ceil(limit)


def test_sample_size_vacuous_is_infinite():
    assert sample_size_bound(0.001, 0.01, BoundParams(1000, 11, 0.0, 0.5, 0.2)) == math.inf


def test_subgaussian_bound():
    assert subgaussian_z_bound(1000, 5, 0.0, 0.5, 0.3, 1, 1.2, 2.0) == 0
    small = subgaussian_z_bound(1000, 5, 0.5, 0.5, 1e-9, 1, 1.2, 2.0)
    assert small == pytest.approx(math.sqrt(5000) * 0.5 / (2.0 * 1.2**4), rel=1e-6)
    args = (0.5, 0.4, 1.0, 1.1, 1.5)
    grid = np.arange(0, 1 + 1e-12, 1e-4)
    best = max(subgaussian_objective(t, *args) for t in grid)
    _, val = golden_section_max(lambda t: subgaussian_objective(t, *args), 0.0, 1.0)
    assert abs(val - best) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.1, 3), st.floats(1, 5))
def test_script_I_is_a_probability_bound(s, lmin, ratio):
    v = script_I(s, lmin, lmin * ratio)
    assert 0 <= v <= 1
