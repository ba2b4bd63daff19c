"""Spectral reference solutions for the abelian (rank-1, phi = 0) problem.

For a line bundle with metric H = e^u the residual is linear in u:

    m = kappa_n * 2 sum_j (-Q_j P_j u + 2 Re P_j a_j) + const,

and -Q_j P_j has Fourier symbol (sigma_x^2 + sigma_y^2) / 4. These routines work
directly in Fourier space with the stencil symbols, so they share no code path
with the finite-difference operators used by the flow.
"""

from __future__ import annotations

import numpy as np

from . import conventions
from .bundle import BundleData
from .lattice import LatticeTorus, derivative_symbol


def _symbols(torus: LatticeTorus) -> list[np.ndarray]:
    """Per-axis derivative symbols broadcast over the grid."""
    s = derivative_symbol(torus)
    out = []
    for ax in range(torus.real_dim):
        shape = [1] * torus.real_dim
        shape[ax] = torus.sites_per_side
        out.append(s.reshape(shape))
    return out


def laplacian_symbol(torus: LatticeTorus) -> np.ndarray:
    """Symbol of sum_j -Q_j P_j, i.e. (1/4) sum over real axes of sigma^2."""
    return 0.25 * sum(s**2 for s in _symbols(torus)) * np.ones(torus.grid_shape)


def heat_mode_rate(torus: LatticeTorus, k: tuple[int, ...]) -> float:
    """Decay rate of the Fourier mode k of log h under the rank-1 flow (phi = 0)."""
    s = derivative_symbol(torus)
    n = torus.complex_dim
    lap = 0.25 * sum(s[kk % torus.sites_per_side] ** 2 for kk in k)
    return 2.0 * conventions.KAPPA[n] * float(lap)


def abelian_source(bundle: BundleData) -> np.ndarray:
    """sum_j 2 Re(P_j a_j) evaluated with FFT symbols (zero if unperturbed)."""
    torus = bundle.torus
    src = np.zeros(torus.grid_shape)
    syms = _symbols(torus)
    for j in range(torus.complex_dim):
        a = bundle.perturbation(j)
        if a is None:
            continue
        sx, sy = syms[2 * j], syms[2 * j + 1]
        p_hat = 0.5 * (1j * sx + sy)  # P = (D_x - i D_y)/2 with D -> i sigma
        pa = np.fft.ifftn(p_hat * np.fft.fftn(a[..., 0, 0]))
        src += 2.0 * pa.real
    return src


def abelian_poisson_solution(bundle: BundleData) -> np.ndarray:
    """Solution H = e^u of m(h) = 0 for rank 1, phi = 0, normalized to mean(u) = 0.

    Modes where the discrete Laplacian symbol vanishes (the constant and the
    grid-scale checkerboard modes) are set to zero.
    """
    if bundle.rank != 1:
        raise ValueError("the Poisson oracle is rank-1 only")
    torus = bundle.torus
    lap = laplacian_symbol(torus)
    s_hat = np.fft.fftn(abelian_source(bundle))
    u_hat = np.zeros_like(s_hat)
    ok = lap > 1e-12 * np.max(lap)
    u_hat[ok] = -s_hat[ok] / lap[ok]
    u = np.fft.ifftn(u_hat).real
    u -= u.mean()
    return np.exp(u)[..., None, None].astype(complex)


def relative_sup_error(h: np.ndarray, ref: np.ndarray) -> float:
    """Relative sup error after removing the constant scale (mean log det)."""
    lh = np.linalg.slogdet(h)[1]
    lr = np.linalg.slogdet(ref)[1]
    r = h.shape[-1]
    hn = h * np.exp(-(lh.mean() - lr.mean()) / r)
    return float(np.max(np.abs(hn - ref)) / np.max(np.abs(ref)))
