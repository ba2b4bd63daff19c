import numpy as np
import pytest

from vwlab.bundle import (HiggsField, MetricField, chern_pairing, check_metric, curvature, gauge_transform,
                          higgs_adjoint, holomorphy_residual, identity_field, make_background,
                          transform_bundle)
from vwlab.lattice import build_torus
from vwlab.matfun import expm
from vwlab.moment import moment_residual
from vwlab.recipes import random_hermitian, random_metric


@pytest.fixture
def t2():
    return build_torus(1, 16, 1.0)


def test_flat_trivial_background(t2):
    b = make_background(1, [1], [0], t2)
    assert not b.twisted and np.all(b.background_curvature == 0)
    f = curvature(identity_field(b), b)
    assert np.max(np.abs(f.components)) == 0


def test_split_background_curvature(t2):
    b = make_background(2, [1, 1], [1, -1], t2)
    assert b.total_degree == 0
    assert np.allclose(b.background_curvature, [2 * np.pi, -2 * np.pi])
    assert chern_pairing(identity_field(b), b) == pytest.approx(0.0, abs=1e-12)


def test_degree_three_surface():
    t = build_torus(2, 4, 1.0)
    b = make_background(1, [1], [3], t)
    assert chern_pairing(identity_field(b), b) == pytest.approx(3.0, abs=1e-10)


@pytest.mark.parametrize("args", [
    (2, [1], [0]), (2, [1, 1], [0]), (2, [2], [1]), (0, [], []),
])
def test_background_rejects(t2, args):
    with pytest.raises(ValueError):
        make_background(*args, t2)


def test_perturbation_must_vanish_on_charged_entries(t2):
    a = np.zeros((1,) + t2.grid_shape + (2, 2), dtype=complex)
    a[0, ..., 0, 1] = 0.1
    with pytest.raises(ValueError):
        make_background(2, [1, 1], [1, -1], t2, a)


def test_twist_phases_unitary(t2):
    b = make_background(2, [1, 1], [1, -1], t2)
    for ax in (0, 1):
        ph = b.twist_phases(ax)
        assert np.allclose(np.abs(ph), 1.0)
        assert np.allclose(ph[..., 0, 0], 1.0)


def test_chern_weil_constancy():
    t = build_torus(2, 8, 1.0)
    b = make_background(2, [1, 1], [2, 0], t)
    for seed in range(3):
        assert chern_pairing(random_metric(b, seed, 0.4), b) == pytest.approx(2.0, abs=1e-8)


def test_abelian_curvature_oracle():
    errs = []
    for N in (16, 32):
        t = build_torus(1, N, 1.0)
        b = make_background(1, [1], [1], t)
        x, y = t.coordinate(0), t.coordinate(1)
        u = 0.3 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
        f = curvature(np.exp(u)[..., None, None], b).components[0, ..., 0, 0]
        # F = F_0 - dbar d u, with dbar d = Laplacian / 4
        exact = np.pi - 0.25 * (-2 * (2 * np.pi) ** 2) * u
        errs.append(np.max(np.abs(f - exact)))
    assert np.log2(errs[0] / errs[1]) >= 1.9


def test_curvature_unitary_equivariance():
    t = build_torus(1, 8, 1.0)
    b = make_background(2, [2], [0], t)
    h = random_metric(b, 1, 0.4)
    rng = np.random.default_rng(0)
    g, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    f = curvature(h, b).components
    fg = curvature(g.conj().T @ h @ g, b).components
    assert np.allclose(fg, g.conj().T @ f @ g, atol=1e-10)


def test_check_metric_rejects():
    with pytest.raises(ValueError):
        check_metric(np.array([[[1.0, 1.0], [0.0, 1.0]]]))
    with pytest.raises(ValueError):
        check_metric(np.array([[[1.0, 0.0], [0.0, -1e-3]]]))
    with pytest.raises(ValueError):
        check_metric(np.array([[[1.0, 0.0], [0.0, 1e-13]]]))


def test_metric_field_validates(t2):
    b = make_background(1, [1], [0], t2)
    with pytest.raises(ValueError):
        MetricField(-identity_field(b), b)
    with pytest.raises(ValueError):
        HiggsField(np.zeros((3, 3, 1, 1)), b)


def test_higgs_adjoint_examples(t2):
    b = make_background(2, [2], [0], t2)
    rng = np.random.default_rng(1)
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    herm = m + m.conj().T
    phi = HiggsField.constant(herm, b)
    assert np.allclose(higgs_adjoint(phi, identity_field(b)), herm)
    assert np.allclose(higgs_adjoint(higgs_adjoint(HiggsField.constant(m, b), identity_field(b)),
                                     identity_field(b)), m)
    b1 = make_background(1, [1], [0], t2)
    p1 = HiggsField.constant([[1 + 2j]], b1)
    assert np.allclose(higgs_adjoint(p1, random_metric(b1, 0)), 1 - 2j)


def test_higgs_adjoint_variation(t2):
    b = make_background(2, [2], [0], t2)
    h = random_metric(b, 2, 0.3)
    v = random_hermitian(b, 3, 0.5)
    rng = np.random.default_rng(4)
    phi = rng.normal(size=t2.grid_shape + (2, 2)) + 1j * rng.normal(size=t2.grid_shape + (2, 2))
    eps = 1e-5

    def adj(t):
        return higgs_adjoint(phi, h @ expm(t * v))

    fd = (adj(eps) - adj(-eps)) / (2 * eps)
    pa = adj(0.0)
    exact = pa @ v - v @ pa
    assert np.max(np.abs(fd - exact)) / np.max(np.abs(exact)) <= 1e-6


def test_holomorphy_residual(t2):
    b = make_background(2, [1, 1], [0, 0], t2)
    assert holomorphy_residual(HiggsField.constant([[1, 2], [3, 4]], b), b) == (0.0, 0.0)
    errs = []
    for N in (16, 32):
        t = build_torus(1, N, 1.0)
        bb = make_background(2, [1, 1], [0, 0], t)
        s = np.sin(2 * np.pi * t.coordinate(0)) * np.ones(t.grid_shape)
        phi = s[..., None, None] * np.array([[0, 1], [0, 0]])
        sup, l2 = holomorphy_residual(phi, bb)
        # |dbar sin(2 pi x)| = pi |cos|, L2 norm pi / sqrt(2)
        errs.append(abs(l2 - np.pi / np.sqrt(2)))
        assert sup == pytest.approx(np.pi, rel=0.05)
    assert errs[1] < errs[0] / 3.5


def test_gauge_transform_examples():
    t = build_torus(1, 8, 1.0)
    b = make_background(2, [1, 1], [0, 0], t)
    h = random_metric(b, 5, 0.3)
    phi = HiggsField.constant([[1, 0.5], [0, -1]], b).data
    eye = identity_field(b)
    h2, p2 = gauge_transform(eye, h, phi)
    assert np.allclose(h2, h) and np.allclose(p2, phi)
    rng = np.random.default_rng(0)
    u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    bu = transform_bundle(np.broadcast_to(u, eye.shape).copy(), b)
    hu, pu = gauge_transform(u, h, phi)
    assert moment_residual(hu, pu, bu).sup_norm == pytest.approx(moment_residual(h, phi, b).sup_norm)
    with pytest.raises(ValueError):
        gauge_transform(np.zeros_like(eye), h, phi)
