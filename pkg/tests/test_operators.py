import math
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest

from oracles import double_layer_ellipse, pv_riesz_ellipse
from siolab.clifford import embed_arrays, scalar_arrays
from siolab.geometry import DomainSpec, build_mesh, cone_ladder
from siolab.growth import GrowthFunction, extend, w_omega
from siolab.holder import radial_fixture
from siolab.kernels import Polynomial, PolyKernel, harmonic_double_layer, kernel_bound, planar_cauchy_field
from siolab.operators import (
    AccuracyWarning,
    OperatorError,
    OperatorSpec,
    boundary_trace,
    clifford_involution_check,
    interior_probes,
    l2_operator_norm,
    nontangential_trace,
    potential,
    pv_boundary,
    pv_matrix,
    riesz_direct,
    riesz_via_clifford,
    richardson,
    single_layer_gradient_identity,
    tied_trace_ladder,
)

SMOOTH = [DomainSpec.disk(), DomainSpec.ellipse(), DomainSpec.star()]
FIELDS = [harmonic_double_layer(2), planar_cauchy_field()]


def exterior_points(mesh, count=20):
    idx = np.linspace(0, mesh.N, count, endpoint=False).astype(int)
    return mesh.nodes[idx] + 0.5 * mesh.normals[idx]


# double layers


@pytest.mark.parametrize("spec", SMOOTH, ids=lambda s: s.kind)
@pytest.mark.parametrize("fld", FIELDS, ids=lambda f: f.name)
def test_t1_dichotomy(spec, fld):
    mesh = build_mesh(spec, 1024)
    ones = np.ones(mesh.N)
    for side, sgn in (("interior", 1.0), ("exterior", -1.0)):
        op = OperatorSpec("double_layer", mesh, side, field=fld)
        th = op.theta
        assert np.max(np.abs(pv_boundary(op, ones) + sgn * th / 2)) <= 1e-6
    inner = potential(OperatorSpec("double_layer", mesh, field=fld), ones, interior_probes(mesh, 20, 0.2)).values
    outer = potential(OperatorSpec("double_layer", mesh, "exterior", field=fld), ones, exterior_points(mesh)).values
    assert np.max(np.abs(inner + th)) <= 1e-6
    assert np.max(np.abs(outer)) <= 1e-6


def test_linearity():
    mesh = build_mesh(DomainSpec.star(), 256)
    op = OperatorSpec("double_layer", mesh)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=(2, mesh.N))
    np.testing.assert_allclose(pv_boundary(op, 2 * f - 3 * g), 2 * pv_boundary(op, f) - 3 * pv_boundary(op, g), atol=1e-12)
    X = interior_probes(mesh, 5, 0.2)
    lhs = potential(OperatorSpec("single_layer", mesh), 2.5 * np.ones(mesh.N), X).values
    np.testing.assert_allclose(lhs, 2.5 * potential(OperatorSpec("single_layer", mesh), np.ones(mesh.N), X).values, rtol=1e-12)


@pytest.mark.parametrize("t0", [0.0, 0.7, 2.0])
def test_double_layer_boundary_matches_oracle(t0):
    mesh = build_mesh(DomainSpec.ellipse(), 512)
    node = int(round(t0 / mesh.dt))
    t = mesh.parametric_t[node]
    y1 = mesh.nodes[:, 0] ** 2
    got = pv_boundary(OperatorSpec("double_layer", mesh), y1, [node])[0]
    assert got == pytest.approx(double_layer_ellipse(2.0, 1.0, float(t), lambda y: y[0] ** 2), abs=1e-10)


def test_double_layer_potential_matches_oracle():
    mesh = build_mesh(DomainSpec.ellipse(), 512)
    X = np.array([[0.3, 0.2], [-1.2, 0.1], [3.0, 1.0]])
    for x in X:
        side = "interior" if DomainSpec.ellipse().contains(x[None])[0] else "exterior"
        op = OperatorSpec("double_layer", mesh, side)
        got = potential(op, mesh.nodes[:, 0] ** 2, x[None]).values[0]
        # the exterior operator uses the exterior normal, -nu
        sgn = 1.0 if side == "interior" else -1.0
        assert got == pytest.approx(sgn * double_layer_ellipse(2.0, 1.0, 0.0, lambda y: y[0] ** 2, x=x), abs=1e-10)


@pytest.mark.parametrize("spec", SMOOTH, ids=lambda s: s.kind)
def test_planar_cauchy_reproduces_holomorphic_data(spec):
    mesh = build_mesh(spec, 512)
    z = mesh.nodes[:, 0] + 1j * mesh.nodes[:, 1]
    f = z**2 + 1
    fld = planar_cauchy_field()
    X = interior_probes(mesh, 10, 0.2)
    inner = potential(OperatorSpec("double_layer", mesh, field=fld), f, X).values
    np.testing.assert_allclose(inner, (X[:, 0] + 1j * X[:, 1]) ** 2 + 1, atol=1e-10)
    outer = potential(OperatorSpec("double_layer", mesh, "exterior", field=fld), f, exterior_points(mesh)).values
    assert np.max(np.abs(outer)) <= 1e-10


# Cauchy-Clifford


def test_cauchy_reproducing_disk():
    mesh = build_mesh(DomainSpec.disk(), 512)
    X = interior_probes(mesh, 50, 0.2)
    vals = potential(OperatorSpec("cauchy_clifford", mesh), np.ones(mesh.N), X).values
    np.testing.assert_allclose(vals, scalar_arrays(np.ones(len(X)), 2), atol=1e-8)
    x0 = potential(OperatorSpec("cauchy_clifford", mesh), np.ones(mesh.N), [[0.3, 0.1]]).values[0]
    np.testing.assert_allclose(x0, [1.0, 0, 0, 0], atol=1e-8)


def test_cauchy_boundary_of_one_is_half():
    mesh = build_mesh(DomainSpec.ellipse(), 256)
    op = OperatorSpec("cauchy_clifford", mesh)
    np.testing.assert_allclose(pv_boundary(op, np.ones(mesh.N)), scalar_arrays(np.full(mesh.N, 0.5), 2), atol=1e-12)


def test_cauchy_direct_matches_subtraction():
    mesh = build_mesh(DomainSpec.star(), 1024)
    op = OperatorSpec("cauchy_clifford", mesh)
    f = mesh.nodes[:, 0] * mesh.nodes[:, 1]
    np.testing.assert_allclose(pv_boundary(op, f, method="direct"), pv_boundary(op, f), atol=1e-9)


def test_involution():
    errs = []
    for N in (256, 512, 1024):
        mesh = build_mesh(DomainSpec.disk(), N)
        errs.append(clifford_involution_check(mesh, mesh.nodes[:, 0]))
    assert errs[-1] <= 1e-4
    assert all(b <= a / 2 or b <= 1e-12 for a, b in zip(errs, errs[1:]))
    mesh = build_mesh(DomainSpec.disk(), 1024)
    assert clifford_involution_check(mesh, np.ones(mesh.N)) <= 1e-13
    assert clifford_involution_check(mesh, radial_fixture(mesh, GrowthFunction.power(0.5), 0)) <= 1e-4


def test_involution_needs_smooth_curve():
    with pytest.raises(OperatorError):
        clifford_involution_check(build_mesh(DomainSpec.teardrop(), 256), np.ones(256))


# single layer


@pytest.mark.parametrize("spec, N, tol", [(DomainSpec.disk(), 512, 1e-8), (DomainSpec.ellipse(), 2048, 1e-6)], ids=["disk", "ellipse"])
def test_single_layer_gradient_identity(spec, N, tol):
    mesh = build_mesh(spec, N)
    rep = single_layer_gradient_identity(mesh, interior_probes(mesh, 30, 0.1))
    assert rep.residual <= tol
    assert rep.scalar_residual <= tol


def test_single_layer_gradient_matches_fd():
    mesh = build_mesh(DomainSpec.ellipse(), 1024)
    op = OperatorSpec("single_layer", mesh)
    x, h = np.array([0.4, -0.3]), 1e-5
    grad = potential(op, np.ones(mesh.N), x[None], with_gradient=True).gradient_values[0]
    pts = np.array([x + h * e for e in np.eye(2)] + [x - h * e for e in np.eye(2)])
    v = potential(op, np.ones(mesh.N), pts).values
    np.testing.assert_allclose(grad, (v[:2] - v[2:]) / (2 * h), rtol=1e-6)


def test_single_layer_has_no_pv():
    mesh = build_mesh(DomainSpec.disk(), 64)
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("single_layer", mesh), np.ones(64))


# Riesz transforms


def test_riesz_disk_closed_form():
    mesh = build_mesh(DomainSpec.disk(), 512)
    for j, R in enumerate(riesz_direct(mesh)):
        np.testing.assert_allclose(R.values, mesh.nodes[:, j] / 2, atol=1e-6)


@pytest.mark.parametrize("t0", [0.0, 0.5, 1.3, 4.0])
def test_riesz_ellipse_matches_oracle(t0):
    mesh = build_mesh(DomainSpec.ellipse(), 512)
    node = int(round(t0 / mesh.dt))
    t = float(mesh.parametric_t[node])
    for j in (1, 2):
        got = pv_boundary(OperatorSpec("riesz", mesh, j=j), np.ones(mesh.N), [node])[0]
        assert got == pytest.approx(pv_riesz_ellipse(2.0, 1.0, j, t), abs=1e-10)


@pytest.mark.parametrize("spec", SMOOTH, ids=lambda s: s.kind)
def test_riesz_direct_matches_clifford_route(spec):
    mesh = build_mesh(spec, 1024)
    for a, b in zip(riesz_direct(mesh), riesz_via_clifford(mesh)):
        assert np.max(np.abs(a.values - b.values)) <= 1e-8 * np.max(np.abs(b.values))


def test_sphere_riesz_first_order():
    # R_j 1 = x_j / 2 on the unit sphere; surface rules are low order
    errs = []
    for N in (512, 2048):
        mesh = build_mesh(DomainSpec.sphere3(), N)
        errs.append(max(np.max(np.abs(R.values - mesh.nodes[:, j] / 2)) for j, R in enumerate(riesz_direct(mesh))))
    assert errs[0] <= 0.1
    assert errs[1] <= 0.6 * errs[0]


def test_sphere_double_layer_t1():
    mesh = build_mesh(DomainSpec.sphere3(), 512)
    T1 = pv_boundary(OperatorSpec("double_layer", mesh), np.ones(mesh.N))
    np.testing.assert_allclose(T1, -0.5, atol=1e-12)


def test_poly_kernel_matches_riesz_and_is_curve_only():
    mesh = build_mesh(DomainSpec.ellipse(), 256)
    K = PolyKernel(Polynomial.parse("2*x - 3*y", 2) * (1 / (2 * math.pi)))
    f = mesh.nodes[:, 1]
    a = pv_boundary(OperatorSpec("poly_kernel", mesh, kernel=K), f)
    b = 2 * pv_boundary(OperatorSpec("riesz", mesh, j=1), f) - 3 * pv_boundary(OperatorSpec("riesz", mesh, j=2), f)
    np.testing.assert_allclose(a, b, atol=1e-13)
    sphere = build_mesh(DomainSpec.sphere3(), 128)
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("poly_kernel", sphere, kernel=PolyKernel.riesz(1, 3)), np.ones(sphere.N))
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("cauchy_clifford", sphere), np.ones(sphere.N), method="direct")


def test_riesz_rejects_subtraction():
    mesh = build_mesh(DomainSpec.disk(), 64)
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("riesz", mesh, j=1), np.ones(64), method="subtraction")


HARMONIC = {1: "x", 3: "x^3 - 3*x*y^2", 5: "x^5 - 10*x^3*y^2 + 5*x*y^4"}


def unit_kernel(ell):
    P = Polynomial.parse(HARMONIC[ell], 2)
    return PolyKernel(P * (1 / kernel_bound(PolyKernel(P))[1]))


def test_pv_matrix_applies_operator():
    mesh = build_mesh(DomainSpec.star(), 128)
    op = OperatorSpec("poly_kernel", mesh, kernel=unit_kernel(3))
    f = np.cos(2 * mesh.parametric_t)
    np.testing.assert_allclose(pv_matrix(op) @ f, pv_boundary(op, f), atol=1e-13)
    with pytest.raises(OperatorError):
        pv_matrix(OperatorSpec("cauchy_clifford", mesh))


@pytest.mark.parametrize("spec", SMOOTH, ids=lambda s: s.kind)
def test_kernel_norms_stable_and_within_degree_growth(spec):
    norms = {}
    for N in (256, 512):
        mesh = build_mesh(spec, N)
        norms[N] = [l2_operator_norm(OperatorSpec("poly_kernel", mesh, kernel=unit_kernel(ell))) for ell in (1, 3, 5)]
    coarse, fine = np.array(norms[256]), np.array(norms[512])
    assert np.all(np.isfinite(fine))
    np.testing.assert_allclose(fine, coarse, rtol=0.01)
    # unit L1 kernels: growth in ell stays far inside the 2^(ell^2) shape
    assert all(n <= 2 ** (ell**2) * fine[0] for n, ell in zip(fine, (1, 3, 5)))


def test_disk_riesz_norm_is_half():
    # on the circle the R_1 kernel is -(cos t + sin t cot((s-t)/2)) / (4 pi): half the conjugate function of sin*f plus rank one
    mesh = build_mesh(DomainSpec.disk(), 256)
    assert l2_operator_norm(OperatorSpec("riesz", mesh, j=1)) == pytest.approx(0.5, abs=1e-10)


# traces


# the interior extension of y1 is linear along the normal, so extrapolation is exact there
@pytest.mark.parametrize("side, tol", [("interior", 1e-10), ("exterior", 1e-5)])
def test_nontangential_trace_cone(side, tol):
    mesh = build_mesh(DomainSpec.ellipse(), 2048)
    cone = cone_ladder(mesh, 300, [0.2, 0.1, 0.05, 0.025], side=side)
    lad = nontangential_trace(OperatorSpec("double_layer", mesh, side), mesh.nodes[:, 0], cone)
    assert lad.monotone()
    assert lad.limit_residual <= tol


def test_trace_cauchy_disk():
    mesh = build_mesh(DomainSpec.disk(), 1024)
    cone = cone_ladder(mesh, 17, [0.2, 0.1, 0.05, 0.025])
    lad = nontangential_trace(OperatorSpec("cauchy_clifford", mesh), np.ones(mesh.N), cone)
    np.testing.assert_allclose(lad.target, [1.0, 0, 0, 0], atol=1e-12)
    assert lad.limit_residual <= 1e-8


def test_boundary_trace_formula():
    mesh = build_mesh(DomainSpec.ellipse(), 256)
    op = OperatorSpec("double_layer", mesh)
    f = mesh.nodes[:, 1]
    np.testing.assert_allclose(boundary_trace(op, f), -0.5 * f + pv_boundary(op, f), atol=1e-15)


@pytest.mark.parametrize("kind", ["cauchy_clifford", "double_layer"])
@pytest.mark.parametrize("density", ["one", "y1"])
def test_tied_ladder(kind, density):
    dens = (lambda m: np.ones(m.N)) if density == "one" else (lambda m: m.nodes[:, 0].copy())
    lad = tied_trace_ladder(DomainSpec.ellipse(), kind, dens, levels=range(1, 7))
    assert lad.monotone()
    assert lad.limit_residual <= 1e-4


def test_tied_ladder_omega_fixture():
    dens = lambda m: radial_fixture(m, GrowthFunction.power(0.5), 0).values
    lad = tied_trace_ladder(DomainSpec.ellipse(), "double_layer", dens, t0=math.pi / 2, levels=range(1, 7))
    assert lad.monotone()


def test_richardson_exact_for_linear_sequence():
    limit, stable = richardson([np.array(3.0 + h) for h in (0.4, 0.2, 0.1)], levels=1)
    assert float(limit) == pytest.approx(3.0, abs=1e-14)
    assert stable


# gradient bound


def test_gradient_ratio_bounded_under_refinement():
    g = GrowthFunction.power(0.5)
    W = extend(GrowthFunction.power(0.5, D=2.0))
    rho = np.geomspace(1e-3, 0.5, 16)
    maxima = []
    for N in (1024, 4096, 8192):
        mesh = build_mesh(DomainSpec.disk(), N)
        X = mesh.nodes[0] - rho[:, None] * mesh.normals[0]
        keep = rho >= 4 * mesh.panel_h
        dom = potential(OperatorSpec("double_layer", mesh), radial_fixture(mesh, g, 0), X[keep], with_gradient=True)
        maxima.append(float(np.max(np.linalg.norm(dom.gradient_values, axis=1) / w_omega(W, dom.rho))))
    assert max(maxima) <= 2 * maxima[0]


# validation and determinism


def test_near_boundary_warns():
    mesh = build_mesh(DomainSpec.disk(), 256)
    with pytest.warns(AccuracyWarning):
        dom = potential(OperatorSpec("double_layer", mesh), np.ones(256), [[1 - mesh.panel_h, 0.0]])
    assert dom.near_boundary.all()


def test_side_checks():
    mesh = build_mesh(DomainSpec.disk(), 64)
    with pytest.raises(OperatorError):
        potential(OperatorSpec("double_layer", mesh), np.ones(64), [[2.0, 0.0]])
    with pytest.raises(OperatorError):
        potential(OperatorSpec("double_layer", mesh, "exterior"), np.ones(64), [[0.0, 0.0]])
    with pytest.raises(OperatorError):
        potential(OperatorSpec("double_layer", mesh), np.ones(64), [mesh.nodes[0]])


@pytest.mark.parametrize("kwargs", [dict(kind="nope"), dict(kind="riesz"), dict(kind="riesz", j=3), dict(kind="poly_kernel"), dict(kind="double_layer", side="left")])
def test_spec_validation(kwargs):
    with pytest.raises(OperatorError):
        OperatorSpec(mesh=build_mesh(DomainSpec.disk(), 64), **kwargs)


def test_target_range():
    mesh = build_mesh(DomainSpec.disk(), 64)
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("double_layer", mesh), np.ones(64), [64])


def test_bad_thread_count(monkeypatch):
    monkeypatch.setenv("SIOLAB_THREADS", "0")
    with pytest.raises(OperatorError):
        pv_boundary(OperatorSpec("double_layer", build_mesh(DomainSpec.disk(), 64)), np.ones(64))


SNIPPET = """
import numpy as np, sys
from siolab.geometry import DomainSpec, build_mesh
from siolab.operators import OperatorSpec, pv_boundary, potential, interior_probes
mesh = build_mesh(DomainSpec.star(), 1024)
f = np.sin(3 * mesh.parametric_t)
a = pv_boundary(OperatorSpec("cauchy_clifford", mesh), f)
b = potential(OperatorSpec("single_layer", mesh), f, interior_probes(mesh, 300, 0.1), with_gradient=True).gradient_values
sys.stdout.buffer.write(a.tobytes() + b.tobytes())
"""


def test_thread_count_bit_identical():
    outs = []
    for threads in ("1", "3", "4"):
        env = dict(os.environ, SIOLAB_THREADS=threads)
        outs.append(subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, check=True).stdout)
    assert outs[0] == outs[1] == outs[2]
    assert len(outs[0]) > 0


def test_embed_density_accepted():
    mesh = build_mesh(DomainSpec.disk(), 128)
    op = OperatorSpec("cauchy_clifford", mesh)
    a = pv_boundary(op, mesh.nodes[:, 0])
    b = pv_boundary(op, scalar_arrays(mesh.nodes[:, 0], 2))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(OperatorError):
        pv_boundary(op, np.zeros((128, 3)))
    assert embed_arrays(mesh.normals).shape == (128, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        potential(op, np.ones(128), [[0.0, 0.0]])
