"""The moment-map residual m(h), whose vanishing is the Vafa-Witten equation.

m(h) = kappa_n i Lambda F_h + [phi, phi^{*h}] - (lambda(E) / 2) Id, projected on
its h-self-adjoint part. The same code path serves curves (n = 1, Hitchin
system with a degree-0 twisting bundle) and surfaces (n = 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conventions
from .bundle import BundleData, arr, i_lambda_curvature
from .matfun import Eig, commutator, dagger, trace


def lambda_e(bundle: BundleData) -> float:
    """lambda(E): 2 pi c1/(r [omega]) on a curve, 2 pi c1.[omega]/(r [omega]^2) on a surface."""
    torus = bundle.torus
    l2 = torus.side_length**2
    d, r = bundle.total_degree, bundle.rank
    if torus.complex_dim == 1:
        return conventions.TWO_PI * d / (r * l2)
    pairing = d * l2  # c1(E).[omega] with curvature on the first factor
    omega_sq = 2.0 * l2 * l2
    return conventions.TWO_PI * pairing / (r * omega_sq)


@dataclass
class MomentResidual:
    field: np.ndarray
    sup_norm: float
    l2_norm: float


def h_selfadjoint_part(m: np.ndarray, h: np.ndarray, hinv: np.ndarray) -> np.ndarray:
    return 0.5 * (m + hinv @ dagger(m) @ h)


def moment_field(h: np.ndarray, phi: np.ndarray | None, bundle: BundleData,
                 eig: Eig | None = None) -> np.ndarray:
    """Raw residual array m(h) (shape grid + (r, r))."""
    n = bundle.torus.complex_dim
    e = eig or Eig.of(h)
    hinv = e.apply(lambda w: 1.0 / w)
    m = conventions.KAPPA[n] * i_lambda_curvature(h, bundle, e)
    if phi is not None and bundle.rank > 1:
        m = m + conventions.HIGGS_WEIGHT * commutator(phi, hinv @ dagger(phi) @ h)
    m = m - 0.5 * lambda_e(bundle) * np.eye(bundle.rank)
    return h_selfadjoint_part(m, h, hinv)


def residual_norms(m: np.ndarray, bundle: BundleData) -> tuple[float, float]:
    """Pointwise h-norm |m|_h^2 = tr(m m^{*h}) = tr(m^2) for h-self-adjoint m."""
    sq = np.maximum(np.real(trace(m @ m)), 0.0)
    return float(np.sqrt(np.max(sq))), float(np.sqrt(np.sum(sq) * bundle.torus.cell_volume))


def moment_residual(h, phi, bundle: BundleData) -> MomentResidual:
    h = arr(h)
    phi = None if phi is None else arr(phi)
    m = moment_field(h, phi, bundle)
    sup, l2 = residual_norms(m, bundle)
    return MomentResidual(m, sup, l2)


def pairing(v: np.ndarray, m: np.ndarray, bundle: BundleData) -> float:
    """<v, m> = Re sum_x tr(v m) dV."""
    return float(np.real(np.sum(v * np.swapaxes(m, -1, -2)))) * bundle.torus.cell_volume


__all__ = ["lambda_e", "MomentResidual", "moment_residual", "moment_field", "pairing",
           "residual_norms"]
