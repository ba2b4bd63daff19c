import numpy as np
import pytest

from vwlab.bundle import identity_field, make_background
from vwlab.functional import (Geodesic, PathSpec, bott_chern_defect, directional_derivative,
                              donaldson_functional, geodesic_second_derivative, path_independence_gap, q1,
                              second_variation)
from vwlab.lattice import build_torus, derivative_symbol
from vwlab.recipes import random_direction, random_higgs, random_metric


@pytest.fixture(scope="module")
def rank2_curve():
    t = build_torus(1, 16, 1.0, 4)
    b = make_background(2, [2], [0], t)
    return b, random_metric(b, 1, 0.3), random_higgs(b, 2)


def test_q1_examples():
    t = build_torus(1, 8, 1.0)
    b = make_background(2, [2], [0], t)
    h, k = random_metric(b, 0), random_metric(b, 1)
    assert np.allclose(q1(h, h), 0)
    u = np.cos(2 * np.pi * t.coordinate(0)) * np.ones(t.grid_shape)
    assert np.allclose(q1(np.exp(u)[..., None, None] * k, k), 2 * u)
    assert np.allclose(q1(h, k), -q1(k, h))


def test_path_spec_validation():
    with pytest.raises(ValueError):
        PathSpec("spiral")
    with pytest.raises(ValueError):
        PathSpec("geodesic", 4, "midpoint")


def test_geodesic_endpoints_and_positivity(rank2_curve):
    b, h, _ = rank2_curve
    k = random_metric(b, 9)
    g = Geodesic(h, k)
    assert np.allclose(g(0.0), k) and np.allclose(g(1.0), h)
    for t in np.linspace(0, 1, 5):
        assert np.min(np.linalg.eigvalsh(g(t))) > 0


def test_functional_zero_antisymmetric_cocycle(rank2_curve):
    b, h, phi = rank2_curve
    k, j = random_metric(b, 3), random_metric(b, 4)
    path = PathSpec("geodesic", 12, "gauss")
    assert donaldson_functional(h, h, phi, b, path) == 0.0
    dhk = donaldson_functional(h, k, phi, b, path)
    assert abs(dhk + donaldson_functional(k, h, phi, b, path)) <= 1e-6 * (1 + abs(dhk))
    cyc = dhk + donaldson_functional(k, j, phi, b, path) - donaldson_functional(h, j, phi, b, path)
    assert abs(cyc) <= 1e-6


def test_abelian_closed_form():
    t = build_torus(1, 16, 1.0)
    b = make_background(1, [1], [1], t)
    A = 0.4
    u = A * np.cos(2 * np.pi * (t.coordinate(0) + 2 * t.coordinate(1)))
    h = np.exp(u)[..., None, None]
    s = derivative_symbol(t)
    # rank 1, F_k = F_0: D = kappa int u (-QP u) = (1/2)(1/4)(s1^2 + s2^2) int u^2
    exact = 0.5 * 0.25 * (s[1] ** 2 + s[2] ** 2) * A**2 / 2
    for rule, q in (("midpoint", 8), ("gauss", 2)):
        d = donaldson_functional(h, identity_field(b), None, b, PathSpec("geodesic", q, rule))
        assert d == pytest.approx(exact, rel=1e-8)
    lin = donaldson_functional(h, identity_field(b), None, b, PathSpec("linear-in-exponent", 2, "gauss"))
    assert lin == pytest.approx(exact, rel=1e-8)


def test_path_independence_surface():
    t = build_torus(2, 8, 1.0)
    b = make_background(2, [2], [0], t)
    h, k = random_metric(b, 5, 0.3), random_metric(b, 6, 0.3)
    phi = random_higgs(b, 7)
    assert path_independence_gap(h, k, phi, b, 64) <= 1e-5
    assert path_independence_gap(h, h, phi, b) == 0.0


def test_path_gap_quadrature_order():
    # fine high-order grid: the quadrature error dominates the discretization floor
    t = build_torus(1, 32, 1.0, 8)
    b = make_background(2, [2], [0], t)
    h, k = random_metric(b, 5, 0.3), random_metric(b, 6, 0.3)
    phi = random_higgs(b, 7)
    g16 = path_independence_gap(h, k, phi, b, 16)
    g32 = path_independence_gap(h, k, phi, b, 32)
    assert g16 / g32 >= 3.0


def test_directional_derivative_matches_fd(rank2_curve):
    b, h, phi = rank2_curve
    k = identity_field(b)
    v = random_direction(h, b, 11, 0.5)
    from vwlab.matfun import exp_step

    path = PathSpec("geodesic", 16, "gauss")
    eps = 1e-4
    fd = (donaldson_functional(exp_step(h, v, eps), k, phi, b, path)
          - donaldson_functional(exp_step(h, v, -eps), k, phi, b, path)) / (2 * eps)
    dd = directional_derivative(h, v, phi, b)
    assert abs(fd - dd) <= 1e-5 * abs(dd)


def test_identity_direction_is_flat(rank2_curve):
    b, h, phi = rank2_curve
    assert abs(directional_derivative(h, identity_field(b), phi, b)) <= 1e-10
    fd, an = geodesic_second_derivative(h, identity_field(b), phi, b)
    assert abs(fd) <= 1e-8 and abs(an) <= 1e-12


def test_second_variation_abelian_closed_form():
    t = build_torus(1, 16, 1.0)
    b = make_background(1, [1], [0], t)
    A = 0.3
    u = A * np.sin(2 * np.pi * t.coordinate(0))
    s_ = derivative_symbol(t)
    exact = 0.25 * s_[1] ** 2 * A**2 / 2  # ||P u||^2
    an = second_variation(identity_field(b), u[..., None, None] + 0j, None, b)
    assert an == pytest.approx(exact, rel=1e-10)


def test_second_variation_fd_rank2(rank2_curve):
    b, h, phi = rank2_curve
    for seed in range(3):
        s = random_direction(h, b, 20 + seed, 0.5)
        fd, an = geodesic_second_derivative(h, s, phi, b)
        assert fd >= -1e-8
        assert abs(fd - an) <= 1e-3 * an


def test_bott_chern_trivial_cases():
    t = build_torus(2, 6, 1.0)
    b = make_background(1, [1], [1], t)
    h = random_metric(b, 1)
    assert bott_chern_defect(h, h, None, b) <= 1e-12
    tc = build_torus(1, 8, 1.0)
    bc = make_background(1, [1], [1], tc)
    assert bott_chern_defect(random_metric(bc, 1), identity_field(bc), None, bc) == 0.0


def test_bott_chern_second_order():
    vals = []
    for N in (12, 24):
        t = build_torus(2, N, 1.0)
        b = make_background(1, [1], [1], t)
        x1, y1, x2, y2 = (t.coordinate(i) for i in range(4))
        u = 0.3 * np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * y2) * np.ones(t.grid_shape)
        vals.append(bott_chern_defect(np.exp(u)[..., None, None] + 0j, identity_field(b), None, b))
    assert vals[1] < vals[0] / 3.0
