"""Holomorphic bundle data, Hermitian metrics, Higgs fields and the Chern connection.

The bundle is a direct sum of blocks L_b^{(+) r_b} where L_b has degree d_b / r_b.
Its background connection has constant curvature on the first complex factor,
i F_0 = beta * diag(d_b / r_b) dx1 ^ dy1. An End(E) entry (i, j) has charge
q_ij = delta_i - delta_j and is differentiated covariantly.

The holomorphic structure may be perturbed by a smooth (0,1)-form ``a`` of
charge-compatible matrices: dbar_A = dbar_{A0} + a. The unknown is the metric
H relative to h_0 = Id.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import conventions
from .lattice import FormField, LatticeTorus, dz, dzbar
from .matfun import Eig, commutator, dagger, dexp_weights, hermitian_part, inv, trace

MIN_EIGENVALUE = 1e-12
HERMITIAN_TOL = 1e-10


@dataclass(eq=False)
class BundleData:
    torus: LatticeTorus
    block_ranks: tuple[int, ...]
    degree_vector: tuple[int, ...]
    dbar_perturbation: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return int(sum(self.block_ranks))

    @property
    def total_degree(self) -> int:
        return int(sum(self.degree_vector))

    @property
    def row_flux(self) -> np.ndarray:
        """Integer degree per line-bundle summand, one entry per row."""
        return np.concatenate([np.full(r, d // r, dtype=int)
                               for r, d in zip(self.block_ranks, self.degree_vector)])

    @property
    def charges(self) -> np.ndarray:
        f = self.row_flux
        return f[:, None] - f[None, :]

    @property
    def twisted(self) -> bool:
        return bool(np.any(self.charges))

    @property
    def background_curvature(self) -> np.ndarray:
        """Diagonal of i Lambda F_0 (constant)."""
        return self.torus.flux_unit * self.row_flux.astype(float)

    def twist_phases(self, axis: int, k: int = 1) -> np.ndarray:
        """Unitary link factors of a k-step covariant shift along ``axis``.

        Shape (N, N, r, r) over the first complex factor's (x1, y1) indices.
        """
        from .lattice import _shift_phase  # local: private helper

        q = self.charges
        N = self.torus.sites_per_side
        if axis > 1 or not np.any(q):
            return np.ones((N, N) + q.shape, dtype=complex)
        key = (q.shape, tuple(int(v) for v in q.ravel()))
        return _shift_phase(N, 2, axis, k, key)

    def perturbation(self, j: int) -> np.ndarray | None:
        if self.dbar_perturbation is None:
            return None
        return self.dbar_perturbation[j]

    def metadata(self) -> dict:
        return {
            "rank": self.rank,
            "block_ranks": list(self.block_ranks),
            "degree_vector": list(self.degree_vector),
            "has_dbar_perturbation": self.dbar_perturbation is not None,
        }


def make_background(rank: int, block_ranks, degree_vector, torus: LatticeTorus,
                    dbar_perturbation: np.ndarray | None = None) -> BundleData:
    block_ranks = tuple(int(r) for r in block_ranks)
    degree_vector = tuple(int(d) for d in degree_vector)
    if len(block_ranks) != len(degree_vector) or not block_ranks:
        raise ValueError("block_ranks and degree_vector must be nonempty and of equal length")
    if any(r < 1 for r in block_ranks) or sum(block_ranks) != rank:
        raise ValueError(f"block ranks {block_ranks} do not sum to rank {rank}")
    for r, d in zip(block_ranks, degree_vector):
        if d % r:
            raise ValueError(f"block of rank {r} with degree {d}: only split blocks "
                             "(degree divisible by rank) are supported")
    bundle = BundleData(torus, block_ranks, degree_vector, None)
    if dbar_perturbation is not None:
        a = np.asarray(dbar_perturbation, dtype=complex)
        expected = (torus.complex_dim,) + torus.grid_shape + (rank, rank)
        if a.shape != expected:
            raise ValueError(f"dbar perturbation must have shape {expected}, got {a.shape}")
        if np.any(a[..., bundle.charges != 0]):
            raise ValueError("dbar perturbation must vanish on charged entries")
        bundle = replace(bundle, dbar_perturbation=a)
        if torus.complex_dim == 2:
            f02 = dzbar(a[1], 0, torus) - dzbar(a[0], 1, torus) + commutator(a[0], a[1])
            if np.max(np.abs(f02)) > 1e-9 * max(1.0, float(np.max(np.abs(a)))):
                raise ValueError("dbar perturbation is not integrable (F^{0,2} != 0)")
    return bundle


def transform_bundle(g: np.ndarray, bundle: BundleData) -> BundleData:
    """Bundle whose dbar operator is g^{-1} o dbar_A o g."""
    torus = bundle.torus
    gi = inv(g)
    q = bundle.charges
    comps = []
    for j in range(torus.complex_dim):
        a = bundle.perturbation(j)
        term = gi @ dzbar(g, j, torus, q)
        if a is not None:
            term = term + gi @ a @ g
        comps.append(term)
    return BundleData(torus, bundle.block_ranks, bundle.degree_vector, np.stack(comps))


# --------------------------------------------------------------------------
# field containers

def check_metric(h: np.ndarray, rank: int | None = None) -> np.ndarray:
    """Validate Hermiticity and positivity; return the array."""
    h = np.asarray(h)
    if rank is not None and h.shape[-2:] != (rank, rank):
        raise ValueError(f"metric must have trailing shape ({rank}, {rank})")
    if not np.all(np.isfinite(h)):
        raise ValueError("metric has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - dagger(h))) > HERMITIAN_TOL * scale:
        raise ValueError("metric is not Hermitian")
    wmin = float(np.min(np.linalg.eigvalsh(hermitian_part(h))))
    if wmin < MIN_EIGENVALUE:
        raise ValueError(f"metric is not positive definite (min eigenvalue {wmin:.3e})")
    return h


@dataclass(eq=False)
class MetricField:
    data: np.ndarray
    bundle: BundleData

    def __post_init__(self) -> None:
        self.data = check_metric(np.asarray(self.data, dtype=complex), self.bundle.rank)
        if self.data.shape[:-2] != self.bundle.torus.grid_shape:
            raise ValueError("metric grid does not match the torus")

    @classmethod
    def identity(cls, bundle: BundleData) -> "MetricField":
        eye = np.eye(bundle.rank, dtype=complex)
        return cls(np.broadcast_to(eye, bundle.torus.grid_shape + eye.shape).copy(), bundle)


@dataclass(eq=False)
class HiggsField:
    data: np.ndarray
    bundle: BundleData

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != self.bundle.torus.grid_shape + (self.bundle.rank,) * 2:
            raise ValueError("Higgs field shape does not match bundle and torus")

    @classmethod
    def constant(cls, matrix, bundle: BundleData) -> "HiggsField":
        m = np.asarray(matrix, dtype=complex)
        return cls(np.broadcast_to(m, bundle.torus.grid_shape + m.shape).copy(), bundle)


def arr(x) -> np.ndarray:
    return x.data if isinstance(x, (MetricField, HiggsField)) else np.asarray(x)


def identity_field(bundle: BundleData) -> np.ndarray:
    return MetricField.identity(bundle).data


def zero_higgs(bundle: BundleData) -> np.ndarray:
    return np.zeros(bundle.torus.grid_shape + (bundle.rank,) * 2, dtype=complex)


# --------------------------------------------------------------------------
# Chern connection and curvature

def chern_connection(h: np.ndarray, bundle: BundleData, eig: Eig | None = None) -> list[np.ndarray]:
    """(1,0) connection coefficients b_j of the Chern connection relative to h_0.

    b_j = dexp_{log H}(P_j log H) - H^{-1} a_j^dagger H. The first term equals
    H^{-1} d_j H in the continuum and is exactly P_j log H when H is abelian.
    """
    torus, q = bundle.torus, bundle.charges
    e = eig or Eig.of(h)
    lw = np.log(e.w)
    s = e.apply(np.log)
    rank1 = h.shape[-1] == 1
    weights = None if rank1 else dexp_weights(lw)
    hinv = e.apply(lambda w: 1.0 / w)
    out = []
    for j in range(torus.complex_dim):
        ps = dz(s, j, torus, q)
        b = ps if rank1 else e.from_eigbasis(weights * e.to_eigbasis(ps))
        a = bundle.perturbation(j)
        if a is not None:
            b = b - hinv @ dagger(a) @ h
        out.append(b)
    return out


def _curvature_component(b: list[np.ndarray], bundle: BundleData, j: int, k: int) -> np.ndarray:
    torus, q = bundle.torus, bundle.charges
    f = -dzbar(b[j], k, torus, q)
    a = bundle.perturbation(k)
    if a is not None:
        f = f + dz(a, j, torus, q) + commutator(b[j], a)
    if j == 0 and k == 0:
        f = f + np.diag(0.5 * bundle.background_curvature)
    return f


def curvature(h, bundle: BundleData) -> FormField:
    """Chern curvature F_h as a (1,1)-form, components F_{j kbar}."""
    h = arr(h)
    b = chern_connection(h, bundle)
    n = bundle.torus.complex_dim
    comps = [_curvature_component(b, bundle, j, k) for j in range(n) for k in range(n)]
    return FormField("1,1", np.stack(comps), bundle.rank, charges=bundle.charges)


def i_lambda_curvature(h: np.ndarray, bundle: BundleData, eig: Eig | None = None,
                       b: list[np.ndarray] | None = None) -> np.ndarray:
    """i Lambda F_h = 2 sum_j F_{j jbar} as a 0-form."""
    if b is None:
        b = chern_connection(h, bundle, eig)
    n = bundle.torus.complex_dim
    return 2.0 * sum(_curvature_component(b, bundle, j, j) for j in range(n))


def chern_pairing(h, bundle: BundleData) -> float:
    """(i/2pi) int tr(F_h) ^ omega^{n-1}, the degree pairing c_1(E).[omega]^{n-1}."""
    torus = bundle.torus
    ilf = i_lambda_curvature(arr(h), bundle)
    return float(np.real(np.sum(trace(ilf)))) * torus.cell_volume / conventions.TWO_PI


# --------------------------------------------------------------------------
# Higgs field operations

def higgs_adjoint(phi, h) -> np.ndarray:
    """phi^{*h} = H^{-1} phi^dagger H."""
    phi, h = arr(phi), arr(h)
    return inv(h) @ dagger(phi) @ h


def holomorphy_residual(phi, bundle: BundleData) -> tuple[float, float]:
    """(sup, L2) norms of dbar_A phi."""
    phi = arr(phi)
    torus, q = bundle.torus, bundle.charges
    comps = []
    for j in range(torus.complex_dim):
        c = dzbar(phi, j, torus, q)
        a = bundle.perturbation(j)
        if a is not None:
            c = c + commutator(a, phi)
        comps.append(c)
    sq = sum(np.sum(np.abs(c) ** 2, axis=(-2, -1)) for c in comps)
    return float(np.sqrt(np.max(sq))), float(np.sqrt(np.sum(sq) * torus.cell_volume))


def gauge_transform(g, h, phi) -> tuple[np.ndarray, np.ndarray]:
    """Complex gauge action: H' = g^dagger H g, phi' = g^{-1} phi g."""
    g, h, phi = arr(g), arr(h), arr(phi)
    if not np.all(np.isfinite(g)) or np.min(np.abs(np.linalg.det(g))) < 1e-14:
        raise ValueError("gauge transformation is singular")
    gi = inv(g)
    return hermitian_part(dagger(g) @ h @ g), gi @ phi @ g
