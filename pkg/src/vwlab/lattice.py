"""Periodic lattice discretization of flat complex tori.

A torus of complex dimension n is stored on a grid of N sites per real axis,
axis order (x1, y1, x2, y2). Site fields are numpy arrays whose leading 2n axes
are the grid and whose trailing axes hold matrix coefficients.

Derivatives are central differences of configurable even order. Fields that
are sections of End(E) with nonzero charge use covariant shifts: the twist of
the background bundle lives on the first complex factor (axes 0 and 1), in the
Landau gauge A = -i beta q x1 dy1 with beta = 2 pi / l^2.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import conventions

SUPPORTED_ORDERS = (2, 4, 6, 8)


@functools.lru_cache(maxsize=None)
def stencil_coefficients(order: int) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Offsets k and weights c_k with f' ~ sum_k c_k (f(x+ka) - f(x-ka)) / a."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"stencil order must be one of {SUPPORTED_ORDERS}, got {order}")
    m = order // 2
    ks = np.arange(1, m + 1, dtype=float)
    mat = np.array([ks ** (2 * j + 1) for j in range(m)])
    rhs = np.zeros(m)
    rhs[0] = 0.5
    weights = np.linalg.solve(mat, rhs)
    return tuple(range(1, m + 1)), tuple(float(w) for w in weights)


@dataclass(frozen=True)
class LatticeTorus:
    complex_dim: int
    sites_per_side: int
    side_length: float
    stencil_order: int = 2
    spacing: float = field(init=False)

    def __post_init__(self) -> None:
        spacing = self.side_length / self.sites_per_side
        object.__setattr__(self, "spacing", spacing)
        # keep spacing * N == side_length exact in floating point
        object.__setattr__(self, "side_length", spacing * self.sites_per_side)

    @property
    def real_dim(self) -> int:
        return 2 * self.complex_dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.sites_per_side,) * self.real_dim

    @property
    def num_sites(self) -> int:
        return self.sites_per_side ** self.real_dim

    @property
    def total_volume(self) -> float:
        return self.side_length ** self.real_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.real_dim

    @property
    def kaehler_coeff(self) -> tuple[float, ...]:
        """Coefficients c_j in omega = (i/2) sum_j c_j dz_j ^ dzbar_j (flat: all 1)."""
        return (1.0,) * self.complex_dim

    @property
    def flux_unit(self) -> float:
        """beta = 2 pi / l^2: curvature density of one unit of degree."""
        return conventions.TWO_PI / self.side_length**2

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate values along ``axis`` shaped to broadcast over the grid."""
        shape = [1] * self.real_dim
        shape[axis] = self.sites_per_side
        return (np.arange(self.sites_per_side) * self.spacing).reshape(shape)

    def with_order(self, order: int) -> "LatticeTorus":
        return build_torus(self.complex_dim, self.sites_per_side, self.side_length, order)

    def metadata(self) -> dict:
        return {
            "complex_dim": self.complex_dim,
            "sites_per_side": self.sites_per_side,
            "side_length": self.side_length,
            "spacing": self.spacing,
            "stencil_order": self.stencil_order,
        }


def build_torus(complex_dim: int, sites_per_side: int, side_length: float,
                stencil_order: int = 2) -> LatticeTorus:
    if complex_dim not in (1, 2):
        raise ValueError(f"complex_dim must be 1 or 2, got {complex_dim}")
    if int(sites_per_side) != sites_per_side or sites_per_side < 4 or sites_per_side % 2:
        raise ValueError(f"sites_per_side must be an even integer >= 4, got {sites_per_side}")
    if not side_length > 0 or not math.isfinite(side_length):
        raise ValueError(f"side_length must be positive, got {side_length}")
    stencil_coefficients(stencil_order)
    return LatticeTorus(int(complex_dim), int(sites_per_side), float(side_length), int(stencil_order))


# --------------------------------------------------------------------------
# covariant shifts and differences

def _charge_key(charges: np.ndarray | None) -> tuple | None:
    if charges is None:
        return None
    q = np.asarray(charges)
    if not np.any(q):
        return None
    return (q.shape, tuple(int(v) for v in q.ravel()))


@functools.lru_cache(maxsize=256)
def _shift_phase(n_sites: int, real_dim: int, axis: int, k: int, qkey: tuple) -> np.ndarray:
    qshape, qvals = qkey
    q = np.array(qvals, dtype=float).reshape(qshape)
    idx = np.arange(n_sites)
    if axis == 0:
        wraps = np.floor_divide(idx + k, n_sites)
        angle = wraps[:, None] * idx[None, :] * (2.0 * np.pi / n_sites)
    else:
        angle = -np.broadcast_to((idx * k * 2.0 * np.pi / n_sites**2)[:, None], (n_sites, n_sites))
    angle = angle.reshape((n_sites, n_sites) + (1,) * (real_dim - 2) + (1,) * q.ndim)
    return np.exp(1j * angle * q)


def shift(f: np.ndarray, axis: int, k: int, torus: LatticeTorus,
          charges: np.ndarray | None = None) -> np.ndarray:
    """Covariant translate: result(x) = transport of f(x + k a e_axis) back to x."""
    g = np.roll(f, -k, axis=axis)
    qkey = _charge_key(charges)
    if qkey is not None and axis < 2 and k % torus.sites_per_side:
        g = g * _shift_phase(torus.sites_per_side, torus.real_dim, axis, k, qkey)
    return g


def difference(f: np.ndarray, axis: int, torus: LatticeTorus,
               charges: np.ndarray | None = None, order: int | None = None) -> np.ndarray:
    """Central (covariant) derivative along one real axis."""
    offsets, weights = stencil_coefficients(order or torus.stencil_order)
    out = np.zeros(np.broadcast_shapes(f.shape), dtype=np.result_type(f, complex))
    for k, c in zip(offsets, weights):
        out += c * (shift(f, axis, k, torus, charges) - shift(f, axis, -k, torus, charges))
    return out / torus.spacing


def dz(f: np.ndarray, j: int, torus: LatticeTorus, charges: np.ndarray | None = None,
       order: int | None = None) -> np.ndarray:
    """d/dz_j = (d/dx_j - i d/dy_j) / 2."""
    return 0.5 * (difference(f, 2 * j, torus, charges, order)
                  - 1j * difference(f, 2 * j + 1, torus, charges, order))


def dzbar(f: np.ndarray, j: int, torus: LatticeTorus, charges: np.ndarray | None = None,
          order: int | None = None) -> np.ndarray:
    """d/dzbar_j = (d/dx_j + i d/dy_j) / 2."""
    return 0.5 * (difference(f, 2 * j, torus, charges, order)
                  + 1j * difference(f, 2 * j + 1, torus, charges, order))


def compact_laplacian(f: np.ndarray, axes: tuple[int, ...], torus: LatticeTorus,
                      charges: np.ndarray | None = None) -> np.ndarray:
    """Three-point (1, -2, 1)/a^2 covariant Laplacian summed over ``axes``."""
    out = np.zeros(f.shape, dtype=np.result_type(f, complex))
    for ax in axes:
        out += shift(f, ax, 1, torus, charges) + shift(f, ax, -1, torus, charges) - 2.0 * f
    return out / torus.spacing**2


def derivative_symbol(torus: LatticeTorus, order: int | None = None) -> np.ndarray:
    """Real sigma(theta) with D e^{i theta x/a} = i sigma e^{i theta x/a}, in FFT order."""
    offsets, weights = stencil_coefficients(order or torus.stencil_order)
    theta = 2.0 * np.pi * np.fft.fftfreq(torus.sites_per_side)
    return sum(2.0 * c * np.sin(k * theta) for k, c in zip(offsets, weights)) / torus.spacing


# --------------------------------------------------------------------------
# form fields

DEGREES = ("0", "1,0", "0,1", "1,1", "2,0", "0,2", "2,2")
_ALIASES = {"∂": "d", "∂̄": "dbar", "Λ": "lambda", "star_contract": "star", "*": "star"}


def component_count(degree: str, complex_dim: int) -> int:
    n = complex_dim
    counts = {"0": 1, "1,0": n, "0,1": n, "1,1": n * n}
    if n == 2:
        counts.update({"2,0": 1, "0,2": 1, "2,2": 1})
    if degree not in counts:
        raise ValueError(f"degree {degree!r} not available in complex dimension {n}")
    return counts[degree]


def _degree_weight(degree: str, complex_dim: int) -> float:
    w1 = conventions.ONE_FORM_WEIGHT[complex_dim]
    return {"0": 1.0, "1,0": w1, "0,1": w1, "1,1": w1 * w1}.get(degree, 1.0)


@dataclass
class FormField:
    """Matrix-valued differential form in the coordinate coframe.

    ``components`` has shape (ncomp, *grid, r, r). Mixed (1,1) components are
    ordered j * n + k for dz_j ^ dzbar_k.
    """

    degree: str
    components: np.ndarray
    rank: int
    hermitian: bool = False
    charges: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.degree not in DEGREES:
            raise ValueError(f"unknown degree {self.degree!r}")
        comps = np.asarray(self.components)
        if comps.ndim < 3 or comps.shape[-2:] != (self.rank, self.rank):
            raise ValueError(f"components shape {comps.shape} does not end with ({self.rank}, {self.rank})")
        ngrid = comps.ndim - 3
        if ngrid not in (2, 4):
            raise ValueError("grid must have 2 or 4 real axes")
        expected = component_count(self.degree, ngrid // 2)
        if comps.shape[0] != expected:
            raise ValueError(f"degree {self.degree} needs {expected} components, got {comps.shape[0]}")
        if self.hermitian:
            gap = np.max(np.abs(comps - np.conj(np.swapaxes(comps, -1, -2))), initial=0.0)
            if gap > 1e-10 * max(1.0, float(np.max(np.abs(comps), initial=0.0))):
                raise ValueError(f"field tagged hermitian deviates by {gap:.3e}")
        self.components = comps

    @property
    def complex_dim(self) -> int:
        return (self.components.ndim - 3) // 2

    @classmethod
    def zero_form(cls, values: np.ndarray, charges: np.ndarray | None = None,
                  hermitian: bool = False) -> "FormField":
        values = np.asarray(values)
        return cls("0", values[None], values.shape[-1], hermitian, charges)


def apply_derivative(f: FormField, which: str, torus: LatticeTorus) -> FormField:
    """Apply d, dbar, Lambda or the top-degree contraction to a form field."""
    which = _ALIASES.get(which, which)
    n = torus.complex_dim
    if f.complex_dim != n:
        raise ValueError("form field and torus dimensions differ")
    q = f.charges
    P = lambda g, j: dz(g, j, torus, q)  # noqa: E731
    Q = lambda g, j: dzbar(g, j, torus, q)  # noqa: E731
    c = f.components
    key = (f.degree, which)
    if key == ("0", "d"):
        return FormField("1,0", np.stack([P(c[0], j) for j in range(n)]), f.rank, charges=q)
    if key == ("0", "dbar"):
        return FormField("0,1", np.stack([Q(c[0], j) for j in range(n)]), f.rank, charges=q)
    if key == ("1,0", "dbar"):
        # dbar(b_j dz_j) = sum_k -Q_k b_j dz_j ^ dzbar_k
        comps = [-Q(c[j], k) for j in range(n) for k in range(n)]
        return FormField("1,1", np.stack(comps), f.rank, charges=q)
    if key == ("0,1", "d"):
        comps = [P(c[k], j) for j in range(n) for k in range(n)]
        return FormField("1,1", np.stack(comps), f.rank, charges=q)
    if key == ("1,0", "d") and n == 2:
        return FormField("2,0", (P(c[1], 0) - P(c[0], 1))[None], f.rank, charges=q)
    if key == ("0,1", "dbar") and n == 2:
        return FormField("0,2", (Q(c[1], 0) - Q(c[0], 1))[None], f.rank, charges=q)
    if key == ("1,1", "lambda"):
        diag = sum(c[j * n + j] for j in range(n))
        return FormField("0", (conventions.LAMBDA_DIAG * diag)[None], f.rank, charges=q)
    top = "1,1" if n == 1 else "2,2"
    if which == "star" and f.degree == top:
        return FormField("0", conventions.STAR_TOP[n] * c, f.rank, charges=q)
    raise ValueError(f"operator {which!r} is not admissible on degree {f.degree} (n={n})")


def dbar_adjoint(v: FormField, torus: LatticeTorus) -> FormField:
    """Transpose of dbar on (0,1)-forms, signed so <dbar u, v> + <u, dbar* v> = 0."""
    if v.degree != "0,1":
        raise ValueError("dbar_adjoint acts on (0,1)-forms")
    w = conventions.ONE_FORM_WEIGHT[torus.complex_dim]
    out = sum(dz(v.components[j], j, torus, v.charges) for j in range(torus.complex_dim))
    return FormField("0", (w * out)[None], v.rank, charges=v.charges)


def _as_form(f: FormField | np.ndarray) -> FormField:
    if isinstance(f, FormField):
        return f
    arr = np.asarray(f)
    if arr.ndim in (2, 4):  # bare scalar field
        arr = arr[..., None, None]
    return FormField.zero_form(arr)


def l2_inner(f: FormField | np.ndarray, g: FormField | np.ndarray, torus: LatticeTorus) -> complex:
    """sum_x tr(f^dagger g) * weight(degree) * a^{2n}."""
    f, g = _as_form(f), _as_form(g)
    if f.degree != g.degree or f.components.shape != g.components.shape:
        raise ValueError("l2_inner needs fields of matching degree and shape")
    total = np.vdot(f.components, g.components)
    return complex(total) * _degree_weight(f.degree, torus.complex_dim) * torus.cell_volume


def sup_norm(f: FormField | np.ndarray) -> float:
    """Max over sites of the Frobenius norm (all components together)."""
    f = _as_form(f)
    c = f.components
    sq = np.sum(np.abs(c) ** 2, axis=(0, -2, -1))
    return float(np.sqrt(np.max(sq)))
