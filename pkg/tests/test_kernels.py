import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siolab.kernels import (
    DoubleLayerField,
    Polynomial,
    PolyKernel,
    PolynomialError,
    angular_double_layer,
    cauchy_clifford_field,
    divergence_fd,
    field_from_harmonic_part,
    harmonic_decompose,
    harmonic_double_layer,
    kernel_bound,
    laplace_fundamental,
    laplace_fundamental_gradient,
    planar_cauchy_field,
    riesz_field,
    sphere_area,
    sphere_lp_norm,
    sphere_rule,
    theta,
)

FIXTURES = {
    2: ["x^3", "x*y^2 - 2*y^3", "x^5 + 3*x^2*y^3", "x^7 - 2*x^3*y^4 + x*y^6"],
    3: ["x^3", "x*y*z", "x^5 + y^3*z^2 - x*y*z^3", "z^7 + x^4*y^3"],
}


# polynomials


def test_parse_and_evaluate():
    P = Polynomial.parse("x^3 - 3*x*y^2", 2)
    assert P([2.0, 1.0]) == 8 - 6
    assert Polynomial.parse("1/2*x1**2*x3 + 2*x2", 3)([2.0, 5.0, 3.0]) == pytest.approx(16.0)
    Q = Polynomial.parse("3/4*x^2*y - y^3 + 2", 2)
    assert Polynomial.parse(str(Q), 2) == Q


@pytest.mark.parametrize("text", ["x^", "x + + y", "w^2", "x^-1", ""])
def test_parse_errors(text):
    with pytest.raises(PolynomialError):
        Polynomial.parse(text, 2)


def test_laplacian_and_gradient():
    P = Polynomial.parse("x^3 - 3*x*y^2", 2)
    assert not P.laplacian().terms or P.laplacian().max_abs_coefficient() == 0
    np.testing.assert_allclose(P.gradient(np.array([1.0, 2.0])), [3 - 12, -12.0])


# harmonic decomposition


def test_decompose_cubic():
    parts = harmonic_decompose(Polynomial.parse("x^3", 2))
    P0, Q = parts
    expected = Polynomial.parse("x^3 - 3*x*y^2", 2) * 0.25
    np.testing.assert_allclose(P0.coefficient_vector(3), expected.coefficient_vector(3), atol=1e-14)
    np.testing.assert_allclose(Q.coefficient_vector(1), Polynomial.parse("3/4*x", 2).coefficient_vector(1), atol=1e-14)
    # symbolic oracle: the harmonic part has zero Laplacian
    assert P0.laplacian().max_abs_coefficient() < 1e-14


def test_decompose_harmonic_is_identity():
    P = Polynomial.parse("x", 2)
    parts = harmonic_decompose(P)
    assert len(parts) == 1
    np.testing.assert_array_equal(parts[0].coefficient_vector(1), P.coefficient_vector(1))


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("k", range(4))
def test_decomposition_properties(n, k):
    P = Polynomial.parse(FIXTURES[n][k], n)
    parts = harmonic_decompose(P)
    for Pj in parts:
        assert Pj.laplacian().max_abs_coefficient() <= 1e-10
    rng = np.random.default_rng(k)
    x = rng.normal(size=(100, n))
    r2 = np.sum(x * x, axis=1)
    recon = sum(r2**j * Pj(x) for j, Pj in enumerate(parts))
    np.testing.assert_allclose(recon, P(x), atol=1e-10 * max(1.0, np.max(np.abs(P(x)))))
    total = sphere_lp_norm(P, 2.0, 64) ** 2
    split = sum(sphere_lp_norm(Pj, 2.0, 64) ** 2 for Pj in parts)
    assert split == pytest.approx(total, abs=1e-8)


def test_decompose_rejects_inhomogeneous():
    with pytest.raises(PolynomialError):
        harmonic_decompose(Polynomial.parse("x^3 + x", 2))


def test_sphere_rule_integrates_monomials():
    # oracle: int_{S^2} z^2 = 4 pi / 3, int_{S^1} x^4 = 3 pi / 4
    pts, w = sphere_rule(3, 16)
    assert np.sum(w * pts[:, 2] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    pts, w = sphere_rule(2, 32)
    assert np.sum(w * pts[:, 0] ** 4) == pytest.approx(float(mp.quad(lambda t: mp.cos(t) ** 4, [0, 2 * mp.pi])), rel=1e-14)


# kernels


def test_riesz_unit_value():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert PolyKernel.riesz(1, 2)(np.array([1.0, 0.0])) == pytest.approx(1 / (2 * math.pi))


@settings(max_examples=50)
@given(st.integers(2, 3), st.integers(0, 3), st.floats(0.1, 10.0), st.integers(0, 2**31))
def test_kernel_odd_and_homogeneous(n, k, t, seed):
    K = PolyKernel(Polynomial.parse(FIXTURES[n][k], n))
    x = np.random.default_rng(seed).normal(size=n)
    assert K(-x) == pytest.approx(-K(x), rel=1e-12, abs=1e-300)
    assert K(t * x) == pytest.approx(t ** (1 - n) * K(x), rel=1e-10, abs=1e-300)


def test_kernel_gradient_matches_fd():
    K = PolyKernel(Polynomial.parse("x^3 - 3*x*y^2", 2))
    x, h = np.array([0.7, -0.4]), 1e-6
    fd = [(K(x + h * e) - K(x - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(K.gradient(x), fd, rtol=1e-7)


def test_kernel_rejects_even():
    with pytest.raises(PolynomialError):
        PolyKernel(Polynomial.parse("x^2", 2))


def test_kernel_bound_scaling_with_one_fitted_constant():
    # fit c on the degree-one kernels, then check every odd degree up to 7
    pairs = {}
    for n in (2, 3):
        for k in (1, 2, 3):
            x = "x" if k == 1 else ("x^3 - 3*x*y^2" if k == 2 else "x^5 - 10*x^3*y^2 + 5*x*y^4")
            K = PolyKernel(Polynomial.parse(x, n))
            pairs[(n, k)] = (kernel_bound(K), K.ell)
        for text in FIXTURES[n]:
            K = PolyKernel(Polynomial.parse(text, n))
            pairs[(n, text)] = (kernel_bound(K), K.ell)
    c = max(sup / (2**ell * l1) for (key, ((sup, l1), ell)) in pairs.items() if key[1] == 1)
    for (sup, l1), ell in pairs.values():
        assert math.isfinite(sup)
        assert sup <= 10 * c * 2**ell * l1


# double layer fields and theta


@pytest.mark.parametrize("n", [2, 3])
def test_theta_cauchy_clifford(n):
    th = theta(cauchy_clifford_field(n))
    assert th[0] == pytest.approx(-1.0, abs=1e-8)
    np.testing.assert_allclose(th[1:], 0.0, atol=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_theta_harmonic_double_layer(n):
    assert theta(harmonic_double_layer(n)) == pytest.approx(1.0, abs=1e-10)


def test_theta_planar_cauchy():
    assert theta(planar_cauchy_field()) == pytest.approx(-1.0, abs=1e-10)


def test_theta_linear_in_scaling():
    assert theta(harmonic_double_layer(3).scaled(2.5)) == pytest.approx(2.5, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_theta_riesz_component(n):
    pts, w = sphere_rule(n, 32)
    for j, K in enumerate(riesz_field(n)):
        assert np.sum(w * pts[:, j] * K(pts)) == pytest.approx(1 / n, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("k", range(4))
def test_harmonic_part_fields_divergence_free(n, k):
    rng = np.random.default_rng(100 + k)
    for Pj in harmonic_decompose(Polynomial.parse(FIXTURES[n][k], n)):
        if not Pj.terms or Pj.max_abs_coefficient() == 0:
            continue
        fld = field_from_harmonic_part(Pj)
        x = rng.normal(size=(100, n))
        r = np.linalg.norm(x, axis=1)
        assert np.all(np.abs(divergence_fd(fld, x)) <= 1e-6 * r ** (-n))
        assert theta(fld) == pytest.approx(sphere_lp_norm(Pj, 2.0, 64) ** 2, rel=1e-10)


@pytest.mark.parametrize("fld", [harmonic_double_layer(2), harmonic_double_layer(3), planar_cauchy_field(), cauchy_clifford_field(2), cauchy_clifford_field(3)], ids=lambda f: f"{f.name}-{f.n}")
def test_standard_fields_divergence_free(fld):
    x = np.random.default_rng(7).normal(size=(50, fld.n))
    r = np.linalg.norm(x, axis=1)
    d = divergence_fd(fld, x)
    assert np.all(np.abs(d).reshape(len(x), -1).max(axis=1) <= 1e-6 * r ** (-fld.n))


def test_field_jacobian_matches_fd():
    fld = angular_double_layer(Polynomial.parse("x^2 + 2*y^2", 2))
    assert isinstance(fld, DoubleLayerField)
    x, h = np.array([[0.3, -0.8]]), 1e-6
    fd = np.stack([(fld.values(x + h * e) - fld.values(x - h * e)) / (2 * h) for e in np.eye(2)], -1)
    np.testing.assert_allclose(fld.jacobian(x), fd, rtol=1e-6, atol=1e-8)


def test_fundamental_solution_gradient():
    for n in (2, 3):
        x, h = np.random.default_rng(n).normal(size=n), 1e-6
        fd = [(laplace_fundamental(x + h * e) - laplace_fundamental(x - h * e)) / (2 * h) for e in np.eye(n)]
        np.testing.assert_allclose(laplace_fundamental_gradient(x), fd, rtol=1e-7)
