"""Bridges between the surface system, the twisted Hitchin system on curves, and
the real four-manifold Vafa-Witten equations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import conventions
from .bundle import BundleData, arr, make_background
from .functional import PathSpec, donaldson_functional
from .lattice import LatticeTorus, build_torus, compact_laplacian, dz, dzbar
from .matfun import Eig, commutator, dagger, trace
from .moment import MomentResidual, lambda_e, moment_field, moment_residual

TWIST_TAGS = ("K_X", "L", "K_D(-D)")


@dataclass(eq=False)
class CurveSystem:
    """Twisted Hitchin system on a 1-dimensional torus.

    The twisting bundle L is degree 0 and trivialized, so the contraction sigma
    acts as the identity on endomorphism coefficients (``sigma`` = 1).
    """

    bundle: BundleData
    twist_tag: str = "L"
    twist_degree: int = 0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.bundle.torus.complex_dim != 1:
            raise ValueError("a curve system lives on a complex 1-dimensional torus")
        if self.twist_degree != 0:
            raise ValueError("only degree-0 twisting bundles are representable on the torus")
        if self.twist_tag not in TWIST_TAGS:
            raise ValueError(f"unknown twist tag {self.twist_tag!r}")


def curve_residual(h, phi, curve: CurveSystem) -> MomentResidual:
    return moment_residual(h, None if phi is None else curve.sigma * arr(phi), curve.bundle)


# --------------------------------------------------------------------------
# dimensional reduction T^4 = T^2 x T^2 -> T^2

def surface_torus_for(curve_torus: LatticeTorus) -> LatticeTorus:
    t = curve_torus
    return build_torus(2, t.sites_per_side, t.side_length, t.stencil_order)


def pullback_curve_state(h, phi, curve_bundle: BundleData
                         ) -> tuple[np.ndarray, np.ndarray | None, BundleData]:
    """Extend curve fields constantly along the second factor.

    Higgs fields are rescaled by 1/sqrt(2) so that m_surface = m_curve / 2.
    """
    ct = curve_bundle.torus
    st = surface_torus_for(ct)
    N = ct.sites_per_side

    def extend(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(x[:, :, None, None], (N, N, N, N) + x.shape[2:]).copy()

    a = None
    if curve_bundle.dbar_perturbation is not None:
        a = np.zeros((2,) + st.grid_shape + (curve_bundle.rank,) * 2, dtype=complex)
        a[0] = extend(curve_bundle.dbar_perturbation[0])
    sb = make_background(curve_bundle.rank, curve_bundle.block_ranks, curve_bundle.degree_vector, st, a)
    hs = extend(arr(h))
    ps = None if phi is None else conventions.PULLBACK_HIGGS_SCALE * extend(arr(phi))
    return hs, ps, sb


def _is_fiberwise_constant(x: np.ndarray, tol: float = 0.0) -> bool:
    ref = x[:, :, :1, :1]
    return float(np.max(np.abs(x - ref))) <= tol * max(1.0, float(np.max(np.abs(x))))


def curve_slice(h, phi, bundle: BundleData, index: tuple[int, int] = (0, 0)
                ) -> tuple[np.ndarray, np.ndarray | None, BundleData]:
    """Fields at fixed (x2, y2) as curve fields, inverting the pullback dictionary."""
    torus = bundle.torus
    ct = build_torus(1, torus.sites_per_side, torus.side_length, torus.stencil_order)
    i, j = index
    a = None
    if bundle.dbar_perturbation is not None:
        a = bundle.dbar_perturbation[:1, :, :, i, j].copy()
    cb = make_background(bundle.rank, bundle.block_ranks, bundle.degree_vector, ct, a)
    hc = arr(h)[:, :, i, j].copy()
    pc = None if phi is None else arr(phi)[:, :, i, j] / conventions.PULLBACK_HIGGS_SCALE
    return hc, pc, cb


def reduction_gap(h, phi, bundle: BundleData) -> float:
    """sup |m_surface - m_curve / 2| for a state pulled back from a curve."""
    h = arr(h)
    phi = None if phi is None else arr(phi)
    fields = [h] + ([phi] if phi is not None else [])
    if bundle.dbar_perturbation is not None:
        fields += [bundle.dbar_perturbation[0]]
        if np.any(bundle.dbar_perturbation[1]):
            raise ValueError("state is not pulled back: dzbar_2 perturbation present")
    if bundle.torus.complex_dim != 2 or not all(_is_fiberwise_constant(x) for x in fields):
        raise ValueError("state is not constant along the second factor")
    hc, pc, cb = curve_slice(h, phi, bundle)
    ms = moment_field(h, phi, bundle)
    mc = moment_field(hc, pc, cb)
    scale = conventions.KAPPA[2] / conventions.KAPPA[1]
    return float(np.max(np.abs(ms - scale * mc[:, :, None, None])))


# --------------------------------------------------------------------------
# restriction to a coordinate divisor

@dataclass
class RestrictionResult:
    curve: CurveSystem
    h: np.ndarray
    phi: np.ndarray | None
    functional_curve: float
    functional_surface: float | None
    sup_residual_sq: float

    def triple(self) -> tuple[float | None, float, float]:
        return self.functional_surface, self.functional_curve, self.sup_residual_sq


def restrict_to_divisor(h, phi, bundle: BundleData, axis: int, slice_index: tuple[int, int],
                        reference=None, quadrature_steps: int = 16,
                        surface_functional: bool = True) -> RestrictionResult:
    """Restrict to D = T^2 x {p} (axis 0) or {p} x T^2 (axis 1).

    D . D = 0, so K_X|_D = K_D (x) O_D(-D) is degree 0 and the restricted
    Higgs field is a bare endomorphism, rescaled by the pullback dictionary.
    """
    torus = bundle.torus
    if torus.complex_dim != 2:
        raise ValueError("restriction needs a complex 2-dimensional torus")
    if axis not in (0, 1):
        raise ValueError("axis selects the kept factor: 0 or 1")
    N = torus.sites_per_side
    i, j = slice_index
    if not (0 <= i < N and 0 <= j < N):
        raise ValueError(f"slice index {slice_index} out of range")
    h = arr(h)
    phi = None if phi is None else arr(phi)
    k = np.broadcast_to(np.eye(bundle.rank), h.shape) if reference is None else arr(reference)
    ct = build_torus(1, N, torus.side_length, torus.stencil_order)

    def cut(x):
        return x[:, :, i, j].copy() if axis == 0 else x[i, j].copy()

    if axis == 0:
        a = None if bundle.dbar_perturbation is None else bundle.dbar_perturbation[0][:, :, i, j][None]
        cb = make_background(bundle.rank, bundle.block_ranks, bundle.degree_vector, ct, a)
    else:
        a = None if bundle.dbar_perturbation is None else bundle.dbar_perturbation[1][i, j][None]
        if bundle.twisted:
            raise ValueError("restriction to the second factor of a twisted bundle is not supported")
        cb = make_background(bundle.rank, bundle.block_ranks, (0,) * len(bundle.block_ranks), ct,
                             a if a is not None and np.any(a) else None)
    curve = CurveSystem(cb, twist_tag="K_D(-D)")
    hc, kc = cut(h), cut(k)
    pc = None if phi is None else cut(phi) / conventions.PULLBACK_HIGGS_SCALE
    path = PathSpec("geodesic", quadrature_steps, "gauss")
    d_curve = donaldson_functional(hc, kc, pc, cb, path)
    d_surface = donaldson_functional(h, k, phi, bundle, path) if surface_functional else None
    sup = moment_residual(h, phi, bundle).sup_norm
    return RestrictionResult(curve, hc, pc, d_curve, d_surface, sup * sup)


def fit_restriction_constants(triples) -> dict:
    """Fit C, C' >= 0 in D_X >= D_D - C s - C' over recorded (D_X, D_D, s) triples.

    Minimizes C' + C * mean(s) subject to every constraint (a small linear program).
    """
    from scipy.optimize import linprog

    t = np.array([(dx, dd, s) for dx, dd, s in triples], dtype=float)
    gap = t[:, 1] - t[:, 0]  # need C s + C' >= D_D - D_X
    a_ub = -np.stack([t[:, 2], np.ones(len(t))], axis=1)
    res = linprog([float(np.mean(t[:, 2])), 1.0], A_ub=a_ub, b_ub=-gap,
                  bounds=[(0, None), (0, None)], method="highs")
    c, c_prime = (float(v) for v in res.x)
    margin = t[:, 0] - (t[:, 1] - c * t[:, 2] - c_prime)
    return {"C": c, "C_prime": c_prime, "margin_min": float(margin.min()),
            "fraction_nonnegative": float(np.mean(margin >= -1e-12))}


# --------------------------------------------------------------------------
# four-manifold Vafa-Witten residuals

def _h_norm_sq_field(x: np.ndarray, h: np.ndarray, hinv: np.ndarray) -> np.ndarray:
    return np.maximum(np.real(trace(x @ hinv @ dagger(x) @ h)), 0.0)


def vw_fourmanifold_residual(h, phi, bundle: BundleData) -> tuple[float, float]:
    """Sup-norms (r1, r2) of the VW1 and VW2 left-hand sides.

    A is the Chern connection of (dbar_A, h), Gamma = 0 and
    B = phi dz1^dz2 - phi^{*h} dzbar1^dzbar2, whose [B.B] is proportional to
    [phi, phi^{*h}] omega. The evaluator is deliberately independent of the
    solver: second-order real-coordinate stencils, the compact three-point
    Laplacian for the principal part, and b_j = H^{-1} d_j H.
    r1 collects dbar_A phi and D' phi^{*h} (d_A^* B); r2 collects the omega
    component of F^+ + [B.B] together with F^{2,0} and F^{0,2}.
    """
    torus = bundle.torus
    if torus.complex_dim != 2:
        raise ValueError("the four-manifold residual needs a complex 2-dimensional torus")
    h = arr(h)
    r = bundle.rank
    phi = np.zeros_like(h) if phi is None else arr(phi)
    q = bundle.charges
    e = Eig.of(h)
    hinv = e.apply(lambda w: 1.0 / w)
    beta = torus.flux_unit

    def P(x, j):
        return dz(x, j, torus, q, order=2)

    def Q(x, j):
        return dzbar(x, j, torus, q, order=2)

    a = [bundle.perturbation(j) if bundle.perturbation(j) is not None else np.zeros_like(h)
         for j in range(2)]
    ph = [P(h, j) for j in range(2)]
    qh = [Q(h, j) for j in range(2)]
    b = [hinv @ ph[j] - hinv @ dagger(a[j]) @ h for j in range(2)]

    ilf = np.diag(bundle.background_curvature).astype(complex)
    for j in range(2):
        flux = beta * q if j == 0 else 0.0
        qp_h = 0.25 * (compact_laplacian(h, (2 * j, 2 * j + 1), torus, q) - flux * h)
        q_b0 = hinv @ qp_h - hinv @ qh[j] @ hinv @ ph[j]
        q_ba = Q(hinv @ dagger(a[j]) @ h, j)
        ilf = ilf + 2.0 * (-(q_b0 - q_ba) + P(a[j], j) + commutator(b[j], a[j]))
    phid = hinv @ dagger(phi) @ h
    omega_part = (conventions.KAPPA[2] * ilf + commutator(phi, phid)
                  - 0.5 * lambda_e(bundle) * np.eye(r))
    omega_part = 0.5 * (omega_part + hinv @ dagger(omega_part) @ h)
    f20 = P(b[1], 0) - P(b[0], 1) + commutator(b[0], b[1])
    f02 = Q(a[1], 0) - Q(a[0], 1) + commutator(a[0], a[1])
    r2_sq = sum(_h_norm_sq_field(x, h, hinv) for x in (omega_part, f20, f02))

    r1_sq = 0.0
    for j in range(2):
        dbar_phi = Q(phi, j) + commutator(a[j], phi)
        dprime_phid = P(phid, j) + commutator(b[j], phid)
        r1_sq = r1_sq + _h_norm_sq_field(dbar_phi, h, hinv) + _h_norm_sq_field(dprime_phid, h, hinv)
    return float(np.sqrt(np.max(r1_sq))), float(np.sqrt(np.max(r2_sq)))


def diagnostic_report(h, phi, bundle: BundleData, reference=None, restriction_axis: int = 0,
                      path: str | Path | None = None) -> dict:
    """{r1, r2, D_X, D_D, sup_residual, lattice metadata} for a surface state."""
    res = restrict_to_divisor(h, phi, bundle, restriction_axis, (0, 0), reference)
    r1, r2 = vw_fourmanifold_residual(h, phi, bundle)
    report = {
        "r1": r1, "r2": r2,
        "D_X": res.functional_surface, "D_D": res.functional_curve,
        "sup_residual": float(np.sqrt(res.sup_residual_sq)),
        "lattice": bundle.torus.metadata(), "bundle": bundle.metadata(),
        "conventions": conventions.as_dict(),
    }
    if path is not None:
        Path(path).write_text(json.dumps(report, indent=2))
    return report


__all__ = ["CurveSystem", "curve_residual", "pullback_curve_state", "curve_slice", "reduction_gap",
           "RestrictionResult", "restrict_to_divisor", "fit_restriction_constants",
           "vw_fourmanifold_residual", "diagnostic_report"]
