"""The Donaldson-type functional D_phi(h, k) and its variational identities.

D is defined by integrating its first variation along a path of metrics:

    D(h, k) = int_0^1 <v_t, m(h_t)> dt,    v_t = h_t^{-1} d_t h_t,

with <v, m> = Re int tr(v m) dV. The lambda term of the functional is carried by
m, so the result equals int Q2 ^ omega - (lambda/2) int Q1 dV in the continuum.
The integral over t uses the composite midpoint rule (error O(Q^-2)) or
Gauss-Legendre nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conventions
from .bundle import BundleData, arr, chern_connection
from .lattice import dz, dzbar
from .matfun import Eig, commutator, dagger, dexp_weights, exp_step, hermitian_part, trace
from .moment import lambda_e, moment_field, pairing
from .recipes import random_metric


@dataclass(frozen=True)
class PathSpec:
    kind: str = "geodesic"
    quadrature_steps: int = 64
    rule: str = "midpoint"
    seed: int = 0  # intermediate metric of the two-leg path

    def __post_init__(self) -> None:
        if self.kind not in ("geodesic", "linear-in-exponent", "two-leg"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.quadrature_steps < 8 and self.rule == "midpoint":
            raise ValueError("midpoint quadrature needs at least 8 steps")
        if self.quadrature_steps < 1:
            raise ValueError("quadrature_steps must be positive")


def quadrature(steps: int, rule: str = "midpoint") -> tuple[np.ndarray, np.ndarray]:
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(steps)
        return 0.5 * (x + 1.0), 0.5 * w
    return (np.arange(steps) + 0.5) / steps, np.full(steps, 1.0 / steps)


def q1(h, k) -> np.ndarray:
    """log det(k^{-1} h), pointwise."""
    return np.linalg.slogdet(arr(h))[1] - np.linalg.slogdet(arr(k))[1]


class Geodesic:
    """h_t = k^{1/2} (k^{-1/2} h k^{-1/2})^t k^{1/2} with constant velocity."""

    def __init__(self, h: np.ndarray, k: np.ndarray):
        ek = Eig.of(k)
        self.ks = ek.apply(np.sqrt)
        kis = ek.apply(lambda w: w**-0.5)
        self.ew = Eig.of(hermitian_part(kis @ h @ kis))
        if np.min(self.ew.w) <= 0:
            raise ValueError("metric along the path is not positive")
        self.velocity = kis @ self.ew.apply(np.log) @ self.ks

    def __call__(self, t: float) -> np.ndarray:
        return hermitian_part(self.ks @ self.ew.apply(lambda w: w**t) @ self.ks)


def _leg_geodesic(h, k, phi, bundle, nodes, weights) -> float:
    geo = Geodesic(h, k)
    v = geo.velocity
    return sum(wq * pairing(v, moment_field(geo(t), phi, bundle), bundle)
               for t, wq in zip(nodes, weights))


def _leg_linear_exponent(h, k, phi, bundle, nodes, weights) -> float:
    from .matfun import logm

    lh, lk = logm(h), logm(k)
    total = 0.0
    for t, wq in zip(nodes, weights):
        s = hermitian_part((1.0 - t) * lk + t * lh)
        e = Eig.of(s)  # eigenvalues are logs here
        ht = e.apply(np.exp)
        x = e.to_eigbasis(lh - lk)
        v = x if x.shape[-1] == 1 else e.from_eigbasis(dexp_weights(e.w) * x)
        total += wq * pairing(v, moment_field(ht, phi, bundle), bundle)
    return total


def donaldson_functional(h, k, phi, bundle: BundleData, path: PathSpec | None = None) -> float:
    path = path or PathSpec()
    h, k = arr(h), arr(k)
    if h is k or np.array_equal(h, k):
        return 0.0
    phi = None if phi is None else arr(phi)
    nodes, weights = quadrature(path.quadrature_steps, path.rule)
    if path.kind == "geodesic":
        return _leg_geodesic(h, k, phi, bundle, nodes, weights)
    if path.kind == "linear-in-exponent":
        return _leg_linear_exponent(h, k, phi, bundle, nodes, weights)
    j = intermediate_metric(h, k, bundle, path.seed)
    return (_leg_geodesic(h, j, phi, bundle, nodes, weights)
            + _leg_geodesic(j, k, phi, bundle, nodes, weights))


def intermediate_metric(h, k, bundle: BundleData, seed: int) -> np.ndarray:
    """Geodesic midpoint of (h, k) deformed by a random smooth metric."""
    mid = Geodesic(arr(h), arr(k))(0.5)
    g = random_metric(bundle, seed + 7919, amplitude=0.2)
    es = Eig.of(g).apply(np.sqrt)
    return hermitian_part(es @ mid @ es)


def path_independence_gap(h, k, phi, bundle: BundleData, quadrature_steps: int = 64,
                          seed: int = 0, rule: str = "midpoint") -> float:
    """|D(geodesic) - D(two-leg)| / (1 + |D|)."""
    d_geo = donaldson_functional(h, k, phi, bundle, PathSpec("geodesic", quadrature_steps, rule))
    d_two = donaldson_functional(h, k, phi, bundle,
                                 PathSpec("two-leg", quadrature_steps, rule, seed))
    return abs(d_geo - d_two) / (1.0 + abs(d_geo))


def directional_derivative(h, v, phi, bundle: BundleData) -> float:
    """First variation <v, m(h)> of D at h in the h-self-adjoint direction v."""
    phi = None if phi is None else arr(phi)
    return pairing(arr(v), moment_field(arr(h), phi, bundle), bundle)


def _h_norm_sq(x: np.ndarray, h: np.ndarray, hinv: np.ndarray, bundle: BundleData) -> float:
    return float(np.real(np.sum(trace(x @ hinv @ dagger(x) @ h)))) * bundle.torus.cell_volume


def second_variation(h, s, phi, bundle: BundleData) -> float:
    """(1/n) sum_j ||D'_j s||_h^2 + ||[phi^{*h}, s]||_h^2."""
    h, s = arr(h), arr(s)
    torus, q = bundle.torus, bundle.charges
    e = Eig.of(h)
    hinv = e.apply(lambda w: 1.0 / w)
    b = chern_connection(h, bundle, e)
    total = 0.0
    w1 = conventions.ONE_FORM_WEIGHT[torus.complex_dim]
    for j in range(torus.complex_dim):
        ds = dz(s, j, torus, q) + commutator(b[j], s)
        total += w1 * _h_norm_sq(ds, h, hinv, bundle)
    if phi is not None:
        phi = arr(phi)
        total += conventions.HIGGS_WEIGHT * _h_norm_sq(commutator(hinv @ dagger(phi) @ h, s),
                                                       h, hinv, bundle)
    return total


def geodesic_second_derivative(h, s, phi, bundle: BundleData, eps: float = 1e-3,
                               nodes: int = 6) -> tuple[float, float]:
    """(finite-difference d^2/dt^2 D(h e^{ts}, h) at t = 0, analytic second variation).

    D(h e^{ts}, h) = t int_0^1 <s, m(h e^{tau t s})> dtau is evaluated with
    Gauss-Legendre nodes, then differenced centrally.
    """
    h, s = arr(h), arr(s)
    phi = None if phi is None else arr(phi)
    taus, wts = quadrature(nodes, "gauss")

    def d_of(t: float) -> float:
        return t * sum(w * pairing(s, moment_field(exp_step(h, s, tau * t), phi, bundle), bundle)
                       for tau, w in zip(taus, wts))

    fd = (d_of(eps) + d_of(-eps)) / eps**2
    return fd, second_variation(h, s, phi, bundle)


# --------------------------------------------------------------------------
# Bott-Chern identity on surfaces

def theta_form(h: np.ndarray, phi: np.ndarray | None, bundle: BundleData) -> list[np.ndarray]:
    """Components Theta_{j kbar} of i F_h + 2 ([phi, phi^{*h}] - lambda/2) omega.

    kappa_n Lambda(Theta) reproduces m(h) (before self-adjoint projection).
    """
    from .bundle import _curvature_component

    torus = bundle.torus
    n = torus.complex_dim
    e = Eig.of(h)
    b = chern_connection(h, bundle, e)
    scalar = -0.5 * lambda_e(bundle) * np.eye(bundle.rank)
    if phi is not None:
        scalar = scalar + commutator(phi, e.apply(lambda w: 1.0 / w) @ dagger(phi) @ h)
    coeff = 1.0 / (conventions.KAPPA[n] * n)
    comps = []
    for j in range(n):
        for k in range(n):
            c = 1j * _curvature_component(b, bundle, j, k)
            if j == k:
                c = c + coeff * 0.5j * scalar
            comps.append(c)
    return comps


def _wedge_top(alpha: list, beta: list) -> np.ndarray:
    """(alpha ^ beta) / (dz1 dzbar1 dz2 dzbar2) for (1,1)-forms (traced matrices)."""
    a11, a12, a21, a22 = alpha
    b11, b12, b21, b22 = beta
    return a11 @ b22 + a22 @ b11 - a12 @ b21 - a21 @ b12


def bott_chern_defect(h, k, phi, bundle: BundleData, quadrature_steps: int = 4,
                      rule: str = "gauss") -> float:
    """Sup-norm of i ddbar R + (1/2)(tr Theta_h^2 - tr Theta_k^2), as densities against dV.

    R(h, k) = int_0^1 tr(v_t Theta_{h_t}) dt along the geodesic; this is the
    (1,1)-form Q2 - (lambda/2) Q1 omega in the conventions of this package. On
    curves both sides vanish identically.
    """
    torus = bundle.torus
    if torus.complex_dim == 1:
        return 0.0
    h, k = arr(h), arr(k)
    phi = None if phi is None else arr(phi)
    geo = Geodesic(h, k)
    nodes, weights = quadrature(quadrature_steps, rule)
    r = [0.0] * 4
    for t, wq in zip(nodes, weights):
        th = theta_form(geo(t), phi, bundle)
        for idx in range(4):
            r[idx] = r[idx] + wq * trace(geo.velocity @ th[idx])
    r11, r12, r21, r22 = r
    ddbar = (dz(dzbar(r22, 0, torus), 0, torus) + dz(dzbar(r11, 1, torus), 1, torus)
             - dz(dzbar(r21, 1, torus), 0, torus) - dz(dzbar(r12, 0, torus), 1, torus))
    top = -4.0  # dz1 dzbar1 dz2 dzbar2 = -4 dV
    lhs = 1j * top * ddbar
    th_h, th_k = theta_form(h, phi, bundle), theta_form(k, phi, bundle)
    rhs = -0.5 * top * (trace(_wedge_top(th_h, th_h)) - trace(_wedge_top(th_k, th_k)))
    return float(np.max(np.abs(lhs - rhs)))
