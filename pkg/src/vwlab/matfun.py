"""Batched functions of site-indexed Hermitian matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass
class Eig:
    """Eigen-decomposition H = V diag(w) V^dagger of a positive Hermitian field."""

    w: np.ndarray
    v: np.ndarray

    @classmethod
    def of(cls, h: np.ndarray) -> "Eig":
        if h.shape[-1] == 1:
            return cls(h[..., 0, :].real.copy(), np.ones_like(h))
        w, v = np.linalg.eigh(hermitian_part(h))
        return cls(w, v)

    def apply(self, fn) -> np.ndarray:
        """V diag(fn(w)) V^dagger."""
        fw = fn(self.w)
        if self.v.shape[-1] == 1:
            return fw[..., None].astype(np.result_type(fw, complex))
        return (self.v * fw[..., None, :]) @ dagger(self.v)

    def to_eigbasis(self, x: np.ndarray) -> np.ndarray:
        return x if x.shape[-1] == 1 else dagger(self.v) @ x @ self.v

    def from_eigbasis(self, x: np.ndarray) -> np.ndarray:
        return x if x.shape[-1] == 1 else self.v @ x @ dagger(self.v)


def hermitian_function(h: np.ndarray, fn) -> np.ndarray:
    return Eig.of(h).apply(fn)


def logm(h: np.ndarray) -> np.ndarray:
    return hermitian_function(h, np.log)


def expm(s: np.ndarray) -> np.ndarray:
    return hermitian_function(s, np.exp)


def sqrtm(h: np.ndarray) -> np.ndarray:
    return hermitian_function(h, np.sqrt)


def inv_sqrtm(h: np.ndarray) -> np.ndarray:
    return hermitian_function(h, lambda w: 1.0 / np.sqrt(w))


def inv(h: np.ndarray) -> np.ndarray:
    if h.shape[-1] == 1:
        return 1.0 / h
    return np.linalg.inv(h)


def _phi1(d: np.ndarray) -> np.ndarray:
    """(1 - e^{-d}) / d, continuous at d = 0."""
    small = np.abs(d) < 1e-6
    safe = np.where(small, 1.0, d)
    return np.where(small, 1.0 - d / 2.0 + d * d / 6.0, -np.expm1(-safe) / safe)


def dexp_weights(log_w: np.ndarray) -> np.ndarray:
    """Matrix of (1 - e^{-(l_i - l_j)}) / (l_i - l_j) in the eigenbasis."""
    return _phi1(log_w[..., :, None] - log_w[..., None, :])


def cond(h: np.ndarray) -> float:
    """Max over sites of the spectral condition number."""
    if h.shape[-1] == 1:
        return 1.0
    w = np.linalg.eigvalsh(hermitian_part(h))
    if not np.all(np.isfinite(w)) or np.min(w) <= 0:
        return float("inf")
    return float(np.max(w[..., -1] / w[..., 0]))


def exp_step(h: np.ndarray, m: np.ndarray, tau: float) -> np.ndarray:
    """H exp(tau m) for h-self-adjoint m, evaluated so the result is Hermitian."""
    if h.shape[-1] == 1:
        return h * np.exp(tau * m.real)
    e = Eig.of(h)
    hs = e.apply(np.sqrt)
    his = e.apply(lambda w: 1.0 / np.sqrt(w))
    inner = hermitian_part(hs @ m @ his)
    return hermitian_part(hs @ expm(tau * inner) @ hs)
