"""Deterministic constructors for smooth test fields and perturbed holomorphic structures."""

from __future__ import annotations

import itertools

import numpy as np

from .bundle import BundleData
from .lattice import LatticeTorus
from .matfun import Eig, expm


def fourier_mode(torus: LatticeTorus, k: tuple[int, ...]) -> np.ndarray:
    """exp(2 pi i k.x / l) on the grid; ``k`` may be shorter than the real dimension."""
    phase = sum(2.0 * np.pi * kk * torus.coordinate(ax) / torus.side_length
                for ax, kk in enumerate(k))
    return np.exp(1j * phase) * np.ones(torus.grid_shape)


def _random_modes(rng: np.random.Generator, modes: int, axes: int) -> list[tuple[tuple[int, ...], complex]]:
    ks = [k for k in itertools.product(range(-modes, modes + 1), repeat=axes) if any(k)]
    return [(k, complex(rng.normal(), rng.normal()) / (1.0 + sum(abs(v) for v in k)) ** 2)
            for k in ks]


def smooth_complex_dbar(torus: LatticeTorus, rng: np.random.Generator, amplitude: float,
                        modes: int, axes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Random trigonometric polynomial f and its exact d/dzbar_1 derivative."""
    axes = torus.real_dim if axes is None else axes
    f = np.zeros(torus.grid_shape, dtype=complex)
    df = np.zeros(torus.grid_shape, dtype=complex)
    for k, c in _random_modes(rng, modes, axes):
        e = c * fourier_mode(torus, k)
        f += e
        kx, ky = (k + (0, 0))[:2]
        df += (1j * np.pi / torus.side_length) * (kx + 1j * ky) * e
    scale = np.max(np.abs(f))
    if scale == 0:
        return f, df
    return amplitude * f / scale, amplitude * df / scale


def smooth_complex(torus: LatticeTorus, rng: np.random.Generator, amplitude: float,
                   modes: int, axes: int | None = None) -> np.ndarray:
    """Random trigonometric polynomial with wave numbers |k_i| <= modes on the first ``axes`` axes."""
    return smooth_complex_dbar(torus, rng, amplitude, modes, axes)[0]


def smooth_real(torus: LatticeTorus, rng: np.random.Generator, amplitude: float,
                modes: int, axes: int | None = None) -> np.ndarray:
    return smooth_complex(torus, rng, amplitude, modes, axes).real


def random_hermitian(bundle: BundleData, seed: int, amplitude: float = 0.3,
                     modes: int = 1, axes: int | None = None) -> np.ndarray:
    """Smooth Hermitian End(E) field supported on charge-neutral entries.

    ``axes`` limits the dependence to the first few real coordinates.
    """
    rng = np.random.default_rng(seed)
    torus, r = bundle.torus, bundle.rank
    q = bundle.charges
    s = np.zeros(torus.grid_shape + (r, r), dtype=complex)
    for i in range(r):
        s[..., i, i] = smooth_real(torus, rng, amplitude, modes, axes)
        for j in range(i + 1, r):
            if q[i, j] == 0:
                z = smooth_complex(torus, rng, amplitude, modes, axes)
                s[..., i, j] = z
                s[..., j, i] = np.conj(z)
    return s


def random_metric(bundle: BundleData, seed: int, amplitude: float = 0.3, modes: int = 1,
                  axes: int | None = None) -> np.ndarray:
    return expm(random_hermitian(bundle, seed, amplitude, modes, axes))


def random_direction(h: np.ndarray, bundle: BundleData, seed: int, amplitude: float = 1.0,
                     modes: int = 1) -> np.ndarray:
    """Smooth h-self-adjoint endomorphism H^{-1/2} X H^{1/2}."""
    x = random_hermitian(bundle, seed, amplitude, modes)
    e = Eig.of(h)
    return e.apply(lambda w: w**-0.5) @ x @ e.apply(np.sqrt)


def random_higgs(bundle: BundleData, seed: int, amplitude: float = 0.5) -> np.ndarray:
    """Constant Higgs field on charge-neutral entries (holomorphic when a = 0)."""
    rng = np.random.default_rng(seed)
    r = bundle.rank
    m = amplitude * (rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r)))
    m[bundle.charges != 0] = 0.0
    return np.broadcast_to(m, bundle.torus.grid_shape + (r, r)).copy()


def first_factor_function(torus: LatticeTorus, rng: np.random.Generator, amplitude: float,
                          modes: int) -> tuple[np.ndarray, np.ndarray]:
    """Smooth function of (x1, y1) only and its exact dbar_1 derivative.

    Depending on the first factor alone keeps F^{0,2} = 0 on surfaces.
    """
    return smooth_complex_dbar(torus, rng, amplitude, modes, axes=2)


def abelian_gauge_perturbation(torus: LatticeTorus, seed: int, amplitude: float,
                               modes: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(a, gamma) with a = -dbar_1 gamma (exact derivative) in the dzbar_1 slot, rank 1.

    dbar + a = e^{gamma} dbar e^{-gamma}, so the continuum solution metric is
    e^{-2 Re gamma} times a constant.
    """
    gamma, dgamma = first_factor_function(torus, np.random.default_rng(seed), amplitude, modes)
    a = np.zeros((torus.complex_dim,) + torus.grid_shape + (1, 1), dtype=complex)
    a[0, ..., 0, 0] = -dgamma
    return a, gamma


def nilpotent_gauge_perturbation(torus: LatticeTorus, rank: int, seed: int, amplitude: float,
                                 modes: int = 1, row: int = 0, col: int = 1
                                 ) -> tuple[np.ndarray, np.ndarray]:
    """(a, g) with g = Id + f E_{row,col}, a = -(dbar g) g^{-1} = -dbar_1 f E_{row,col}."""
    f, df = first_factor_function(torus, np.random.default_rng(seed), amplitude, modes)
    g = np.broadcast_to(np.eye(rank, dtype=complex), torus.grid_shape + (rank, rank)).copy()
    g[..., row, col] = f
    a = np.zeros((torus.complex_dim,) + torus.grid_shape + (rank, rank), dtype=complex)
    a[0, ..., row, col] = -df
    return a, g
