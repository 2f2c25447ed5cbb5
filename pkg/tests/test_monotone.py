"""Yosida calculus tests.

The resolvent is defined by the scalar equation y + lambda psi(y) = r, so
the primary oracle is the residual of that equation itself (and scipy's
brentq as an independent scalar solver).  The qualitative properties
(non-expansiveness, 1/lambda-Lipschitz continuity, monotonicity, uniform
growth) are sampled over random draws.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from spmsim import (
    FastDiffusion,
    Linear,
    PowerLaw,
    Sign,
    YosidaParams,
    growth_check,
    minimal_section,
    resolvent,
    yosida,
    yosida_derivative,
    yosida_with_derivative,
)

GRAPHS = [
    FastDiffusion(rho=1.0, m=0.5),
    FastDiffusion(rho=3.0, m=0.25),
    FastDiffusion(rho=0.2, m=0.9),
    Sign(rho=1.0),
    Sign(rho=2.5),
    Linear(slope=0.0),
    Linear(slope=2.0),
    PowerLaw(rho=1.0, m=2.0),
    PowerLaw(rho=0.5, m=3.0),
]


def test_graph_validation():
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            FastDiffusion(rho=bad, m=0.5)
        with pytest.raises(ValueError):
            Sign(rho=bad)
        with pytest.raises(ValueError):
            PowerLaw(rho=bad, m=2.0)
    for bad_m in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            FastDiffusion(rho=1.0, m=bad_m)
    with pytest.raises(ValueError):
        Linear(slope=-0.1)
    with pytest.raises(ValueError):
        PowerLaw(rho=1.0, m=0.9)
    with pytest.raises(ValueError):
        YosidaParams(scalar_solver_tol=0.0)
    with pytest.raises(ValueError):
        YosidaParams(max_bisection_iters=0)


def test_growth_exponents():
    assert FastDiffusion(1.0, 0.5).growth_m == 0.5
    assert Sign(2.0).growth_m == 0.0
    assert Linear(3.0).growth_m == 1.0
    assert PowerLaw(1.0, 2.0).growth_m == 2.0
    assert Sign(2.0).growth_c == 2.0
    assert Linear(3.0).growth_c == 3.0


def test_resolvent_hand_values():
    # y + y^{1/2} = 2  ->  y = 1
    assert abs(resolvent(FastDiffusion(1.0, 0.5), 1.0, 2.0) - 1.0) <= 1e-13
    # y + y^2 = 2  ->  y = 1
    assert abs(resolvent(PowerLaw(1.0, 2.0), 1.0, 2.0) - 1.0) <= 1e-13
    # linear closed form r / (1 + lambda slope)
    assert resolvent(Linear(2.0), 0.5, 3.0) == pytest.approx(1.5, rel=1e-14)
    assert resolvent(Linear(0.0), 7.0, 3.0) == 3.0


def test_sign_soft_threshold():
    graph = Sign(1.0)
    lam = 0.5  # lam * rho = 0.5
    assert resolvent(graph, lam, 0.3) == 0.0
    assert resolvent(graph, lam, -0.3) == 0.0
    assert resolvent(graph, lam, 0.5) == 0.0
    assert resolvent(graph, lam, 2.0) == pytest.approx(1.5, rel=1e-14)
    assert resolvent(graph, lam, -2.0) == pytest.approx(-1.5, rel=1e-14)
    # inside the dead zone psi_lambda(r) = r / lambda, within the multivalued range
    assert yosida(graph, lam, 0.3) == pytest.approx(0.6, rel=1e-14)
    assert yosida(graph, lam, 2.0) == pytest.approx(1.0, rel=1e-14)


def test_resolvent_equation_residual():
    gen = np.random.default_rng(21)
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-3.0, 1.0, size=500)
        r = gen.uniform(-100.0, 100.0, size=500)
        y = resolvent(graph, lam, r)
        if isinstance(graph, Sign):
            zero = np.abs(r) <= lam * graph.rho
            assert np.all(y[zero] == 0.0)
            live = ~zero
            res = y[live] + lam[live] * minimal_section(graph, y[live]) - r[live]
            assert np.max(np.abs(res)) <= 1e-10 * np.maximum(1.0, np.abs(r[live])).max()
        else:
            res = y + lam * minimal_section(graph, y) - r
            assert np.max(np.abs(res / np.maximum(1.0, np.abs(r)))) <= 1e-10


def test_resolvent_against_brentq():
    graph = FastDiffusion(rho=2.0, m=0.35)
    gen = np.random.default_rng(22)
    for _ in range(50):
        lam = 10.0 ** gen.uniform(-3.0, 1.0)
        r = gen.uniform(0.01, 100.0)
        expected = brentq(
            lambda y: y + lam * 2.0 * y**0.35 - r, 0.0, r, xtol=1e-15, rtol=1e-15
        )
        assert resolvent(graph, lam, r) == pytest.approx(expected, rel=1e-11, abs=1e-13)


def test_half_power_closed_form_matches_bisection():
    # the m = 1/2 quadratic fast path must agree with the generic solver
    gen = np.random.default_rng(23)
    lam = 10.0 ** gen.uniform(-3.0, 1.0, size=200)
    r = gen.uniform(-50.0, 50.0, size=200)
    fast = resolvent(FastDiffusion(1.3, 0.5), lam, r)
    for i in range(200):
        a = abs(r[i])
        expected = brentq(
            lambda y: y + lam[i] * 1.3 * np.sqrt(y) - a, 0.0, a, xtol=1e-15, rtol=1e-15
        )
        assert fast[i] == pytest.approx(np.sign(r[i]) * expected, rel=1e-11, abs=1e-13)


def test_yosida_identity_r_equals_j_plus_lam_psi():
    gen = np.random.default_rng(24)
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-3.0, 1.0, size=500)
        r = gen.uniform(-100.0, 100.0, size=500)
        j = resolvent(graph, lam, r)
        psi = yosida(graph, lam, r)
        np.testing.assert_allclose(j + lam * psi, r, rtol=0, atol=1e-10 * 100.0)


def test_yosida_lands_in_graph():
    # psi_lambda(r) = psi_degree(J_lambda(r)) off the multivalued branch
    gen = np.random.default_rng(25)
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-2.0, 0.5, size=300)
        r = gen.uniform(-20.0, 20.0, size=300)
        j = resolvent(graph, lam, r)
        psi = yosida(graph, lam, r)
        if isinstance(graph, Sign):
            zero = j == 0.0
            assert np.all(np.abs(psi[zero]) <= graph.rho + 1e-12)
            np.testing.assert_allclose(
                psi[~zero], minimal_section(graph, j[~zero]), rtol=0, atol=1e-9
            )
        else:
            np.testing.assert_allclose(psi, minimal_section(graph, j), rtol=0, atol=1e-9)


def test_resolvent_nonexpansive_and_yosida_lipschitz():
    gen = np.random.default_rng(26)
    for graph in GRAPHS:
        for _ in range(200):
            lam = 10.0 ** gen.uniform(-3.0, 1.0)
            r1, r2 = gen.uniform(-100.0, 100.0, size=2)
            dj = abs(resolvent(graph, lam, r1) - resolvent(graph, lam, r2))
            dpsi = abs(yosida(graph, lam, r1) - yosida(graph, lam, r2))
            gap = abs(r1 - r2)
            assert dj <= gap * (1.0 + 1e-10) + 1e-10
            assert dpsi <= gap / lam * (1.0 + 1e-10) + 1e-10


def test_yosida_monotone():
    gen = np.random.default_rng(27)
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-2.0, 1.0)
        r = np.sort(gen.uniform(-50.0, 50.0, size=400))
        psi = yosida(graph, lam, r)
        assert np.all(np.diff(psi) >= -1e-10)


def test_growth_check_all_graphs():
    lambdas = np.geomspace(1e-3, 10.0, 25)
    rs = np.concatenate([np.linspace(-100.0, 100.0, 81), [1e-8, -1e-8]])
    for graph in GRAPHS:
        report = growth_check(graph, lambdas, rs)
        assert report.passes, (graph, report.max_ratio)
        assert report.max_ratio <= 1.0
        assert report.c == graph.growth_c
        assert report.m == graph.growth_m


def test_derivative_range_and_consistency():
    gen = np.random.default_rng(28)
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-3.0, 1.0, size=300)
        r = gen.uniform(-100.0, 100.0, size=300)
        val, der = yosida_with_derivative(graph, lam, r)
        np.testing.assert_array_equal(val, yosida(graph, lam, r))
        np.testing.assert_array_equal(der, yosida_derivative(graph, lam, r))
        assert np.all(der >= 0.0)
        assert np.all(der <= 1.0 / lam + 1e-12)


def test_derivative_matches_finite_differences():
    gen = np.random.default_rng(29)
    # eps large enough that the bisection residual (1e-14 |r|) does not
    # dominate the difference quotient
    eps = 1e-4
    for graph in GRAPHS:
        lam = 10.0 ** gen.uniform(-1.0, 0.5, size=100)
        # keep away from the kinks of Sign and the origin of FastDiffusion
        r = gen.uniform(2.0, 50.0, size=100) * gen.choice([-1.0, 1.0], size=100)
        fd = (yosida(graph, lam, r + eps) - yosida(graph, lam, r - eps)) / (2.0 * eps)
        der = yosida_derivative(graph, lam, r)
        np.testing.assert_allclose(der, fd, rtol=1e-5, atol=1e-7)


def test_sign_derivative_branches():
    graph = Sign(1.0)
    lam = 0.5
    assert yosida_derivative(graph, lam, 0.2) == pytest.approx(2.0)  # 1/lambda inside
    assert yosida_derivative(graph, lam, 5.0) == 0.0
    assert yosida_derivative(graph, lam, -5.0) == 0.0


def test_yosida_converges_monotonically():
    # psi_lambda(1) increases to psi(1) = rho as lambda decreases
    graph = FastDiffusion(rho=2.0, m=0.5)
    lams = 2.0 ** -np.arange(0, 24, dtype=float)
    vals = yosida(graph, lams, np.ones_like(lams))
    assert np.all(np.diff(vals) >= -1e-13)
    assert abs(vals[-1] - 2.0) <= 1e-5


def test_linear_yosida_closed_form():
    graph = Linear(slope=3.0)
    gen = np.random.default_rng(30)
    lam = 10.0 ** gen.uniform(-3.0, 1.0, size=100)
    r = gen.uniform(-100.0, 100.0, size=100)
    np.testing.assert_allclose(yosida(graph, lam, r), 3.0 * r / (1.0 + 3.0 * lam), rtol=1e-13)
    assert np.all(yosida(Linear(0.0), lam, r) == 0.0)


def test_vectorization_matches_scalar_calls():
    graph = FastDiffusion(rho=1.0, m=0.3)
    gen = np.random.default_rng(31)
    lam = 10.0 ** gen.uniform(-2.0, 0.5, size=20)
    r = gen.uniform(-10.0, 10.0, size=20)
    vec = resolvent(graph, lam, r)
    for i in range(20):
        assert resolvent(graph, float(lam[i]), float(r[i])) == vec[i]


def test_scalar_in_scalar_out():
    out = yosida(FastDiffusion(1.0, 0.5), 0.1, 2.0)
    assert isinstance(out, float)


def test_lambda_must_be_positive():
    for lam in (0.0, -1.0):
        with pytest.raises(ValueError):
            resolvent(FastDiffusion(1.0, 0.5), lam, 1.0)


def test_minimal_section_values():
    assert minimal_section(Sign(2.0), 0.0) == 0.0
    assert minimal_section(Sign(2.0), 0.1) == 2.0
    assert minimal_section(Sign(2.0), -0.1) == -2.0
    assert minimal_section(FastDiffusion(1.0, 0.5), 0.0) == 0.0
    assert minimal_section(FastDiffusion(1.0, 0.5), 4.0) == pytest.approx(2.0)
    assert minimal_section(PowerLaw(2.0, 3.0), -2.0) == pytest.approx(-16.0)
    assert minimal_section(Linear(1.5), 2.0) == 3.0


def test_bisection_cap_raises():
    params = YosidaParams(scalar_solver_tol=1e-14, max_bisection_iters=1)
    with pytest.raises(RuntimeError):
        # r chosen so the first midpoint is not already the root
        resolvent(FastDiffusion(1.0, 0.3), 1.0, 2.7, params)
