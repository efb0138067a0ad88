import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siolab.geometry import DomainSpec, build_mesh
from siolab.growth import GrowthFunction
from siolab.holder import (
    BoundaryField,
    PairPolicy,
    log_corrected_modulus,
    log_power_fixture,
    modulus_profile,
    power_fixture,
    product_norm_check,
    product_norms,
    radial_fixture,
    sampled_pairs,
    seminorm,
    seminorm_points,
)

P05 = GrowthFunction.power(0.5)
DISK = build_mesh(DomainSpec.disk(), 256)


def test_constant_field():
    fld = BoundaryField(DISK, np.full(DISK.N, 3.0))
    rep = seminorm(fld, P05)
    assert rep.seminorm == 0.0 and rep.sup_norm == 3.0 and rep.norm == 3.0
    assert all(r.max_delta == 0 for r in modulus_profile(fld))


@pytest.mark.parametrize("spec", [DomainSpec.disk(), DomainSpec.star(), DomainSpec.teardrop()], ids=lambda s: s.kind)
def test_subadditive_radial_fixture(spec):
    mesh = build_mesh(spec, 512)
    for center in (0, 77):
        assert seminorm(radial_fixture(mesh, P05, center), P05).seminorm <= 1 + 1e-9


def test_log_power_fixture_grows_under_refinement():
    semis = [seminorm(log_power_fixture(build_mesh(DomainSpec.disk(), N), 0.5, 2.0, 0), P05).seminorm for N in (128, 256, 512, 1024)]
    assert all(b > a for a, b in zip(semis, semis[1:]))


def test_power_fixture_grows_in_log_corrected_class():
    g = log_corrected_modulus(0.9, 2.0)
    semis = [seminorm(power_fixture(build_mesh(DomainSpec.disk(), N), 0.9, 0.8, 0), g).seminorm for N in (128, 512, 2048)]
    assert semis[1] > 2 * semis[0] and semis[2] > 2 * semis[1]


def test_power_fixture_validation():
    with pytest.raises(ValueError):
        power_fixture(DISK, 0.5, 0.7, 0)


def test_product_norms():
    one = BoundaryField(DISK, np.ones(DISK.N))
    assert product_norm_check(one, one, P05)
    f = radial_fixture(DISK, P05, 0)
    two = BoundaryField(DISK, np.full(DISK.N, 2.0))
    lhs, _ = product_norms(f, two, P05)
    assert lhs == pytest.approx(2 * seminorm(f, P05).norm, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_product_norm_trigonometric(c):
    t = DISK.parametric_t
    f = BoundaryField(DISK, c[0] * np.cos(t) + c[1] * np.sin(2 * t) + c[2])
    h = BoundaryField(DISK, c[3] * np.sin(3 * t) + c[4] * np.cos(t) + c[5])
    assert product_norm_check(f, h, P05)


def test_scale_covariance():
    f = BoundaryField(DISK, np.sin(3 * DISK.parametric_t))
    a = seminorm(f, GrowthFunction.power(0.5)).seminorm
    g3 = GrowthFunction.tabulated(np.geomspace(1e-4, 4.0, 400), 3 * np.geomspace(1e-4, 4.0, 400) ** 0.5)
    b = seminorm(f, g3).seminorm
    assert b == pytest.approx(a / 3, rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_seminorm_monotone_in_pair_set(seed):
    mesh = build_mesh(DomainSpec.ellipse(), 1024)
    f = np.abs(mesh.nodes[:, 1]) ** 0.3
    keep = np.sort(np.random.default_rng(seed).choice(mesh.N, size=300, replace=False))
    sub = seminorm_points(mesh.nodes[keep], f[keep], P05)[0]
    assert sub <= seminorm_points(mesh.nodes, f, P05)[0]


def test_sampled_pairs_deterministic_and_cover_neighbours():
    pts = build_mesh(DomainSpec.star(), 5000).nodes
    i1, j1 = sampled_pairs(pts, PairPolicy(seed=3, annulus_cap=5000))
    i2, j2 = sampled_pairs(pts, PairPolicy(seed=3, annulus_cap=5000))
    np.testing.assert_array_equal(i1, i2)
    np.testing.assert_array_equal(j1, j2)
    assert np.all(i1 < j1)
    have = set(zip(i1.tolist(), j1.tolist()))
    assert all((k - 1, k) in have or (k, k + 1) in have for k in range(1, 4999, 37))


def test_sampled_seminorm_close_to_all_pairs():
    mesh = build_mesh(DomainSpec.disk(), 4096)
    f = radial_fixture(mesh, GrowthFunction.power(0.3), 0)
    full = seminorm(f, P05).seminorm
    sampled = seminorm(f, P05, PairPolicy(all_pairs_limit=1000)).seminorm
    assert sampled <= full
    assert sampled >= 0.9 * full


def test_refinement_nondecreasing_and_bounded_for_lipschitz_field():
    semis = [seminorm(BoundaryField(m, m.nodes[:, 0]), P05).seminorm for m in (build_mesh(DomainSpec.disk(), N) for N in (64, 128, 256, 512))]
    assert all(b >= a for a, b in zip(semis, semis[1:]))
    assert semis[-1] <= 2 ** 0.5 + 1e-12


def test_modulus_of_y1_on_disk():
    mesh = build_mesh(DomainSpec.disk(), 1024)
    rows = modulus_profile(BoundaryField(mesh, mesh.nodes[:, 0]))
    for r in rows:
        assert r.max_delta <= r.bin_hi + 1e-12
        # chords through y1 direction are available once the bin fits below the diameter
        if r.bin_hi <= 2.0 and r.bin_lo >= 4 * mesh.panel_h:
            assert r.max_delta >= 0.9 * r.bin_lo


def test_teardrop_normal_modulus_bounded_below():
    mesh = build_mesh(DomainSpec.teardrop(), 2048)
    rows = modulus_profile(BoundaryField(mesh, mesh.normals))
    jump = 2 * math.sin(mesh.spec.gamma / 2)  # |nu_+ - nu_-| across a corner of interior angle pi - gamma
    small = [r for r in rows if r.bin_hi <= 0.05]
    assert small and all(r.max_delta >= 0.9 * jump for r in small)


def test_clifford_field_shape_check():
    with pytest.raises(ValueError):
        BoundaryField(DISK, np.zeros((DISK.N, 3)), clifford=True)
    with pytest.raises(ValueError):
        BoundaryField(DISK, np.zeros(DISK.N + 1))
