"""Gradient flow h^{-1} dh/dt = -m(h) with monotonicity-controlled adaptive steps."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bundle import BundleData, arr, check_metric, identity_field
from .functional import PathSpec, donaldson_functional
from .matfun import cond, exp_step
from .moment import moment_field, pairing, residual_norms

TRACE_COLUMNS = ("step", "time", "dt", "functional", "sup_residual", "l2_residual",
                 "cond_h", "accepted")
CONVERGED, DIVERGING, UNDECIDED = "converged", "diverging", "undecided"


@dataclass
class FlowConfig:
    dt_initial: float = 1e-3
    dt_max: float = 1.0
    adapt_factor: float = 1.25
    stop_sup_residual: float = 1e-8
    max_steps: int = 20000
    divergence_cond_threshold: float = 1e6
    trace_stride: int = 1
    detnormalize: bool = True
    monotone_slack: float = 1e-10
    plateau_window: int = 10000
    plateau_factor: float = 10.0
    max_wall_time: float | None = None

    def __post_init__(self) -> None:
        positive = ("dt_initial", "dt_max", "stop_sup_residual", "max_steps",
                    "divergence_cond_threshold", "trace_stride", "plateau_window")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 1.0 < self.adapt_factor <= 2.0:
            raise ValueError("adapt_factor must lie in (1, 2]")
        if not self.stop_sup_residual < 1.0:
            raise ValueError("stop_sup_residual must be < 1")
        if self.dt_initial > self.dt_max:
            raise ValueError("dt_initial exceeds dt_max")

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FlowTrace:
    rows: list[tuple] = field(default_factory=list)
    classification: str = UNDECIDED
    reason: str = ""
    diverged: bool = False

    def append(self, *row) -> None:
        self.rows.append(tuple(row))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_COLUMNS.index(name)] for r in self.rows], dtype=float)

    def accepted_rows(self) -> list[tuple]:
        return [r for r in self.rows if r[-1]]

    def final(self, name: str) -> float:
        return float(self.accepted_rows()[-1][TRACE_COLUMNS.index(name)])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([int(r[0]), *(repr(float(v)) for v in r[1:7]), int(r[7])])

    @classmethod
    def read_csv(cls, path: str | Path) -> "FlowTrace":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            if header != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            rows = [(int(r[0]), *map(float, r[1:7]), int(r[7])) for r in rd]
        return cls(rows)


def monotonicity_violations(trace: FlowTrace, slack: float = 1e-10) -> list[int]:
    """Steps whose accepted row increases D or sup|m| beyond ``slack``."""
    acc = trace.accepted_rows()
    bad = []
    for prev, cur in zip(acc, acc[1:]):
        if cur[3] > prev[3] + slack or cur[4] > prev[4] + slack:
            bad.append(int(cur[0]))
    return bad


def flow_step(h, phi, bundle: BundleData, dt: float, m: np.ndarray | None = None) -> np.ndarray:
    """H' = H exp(-dt m(h))."""
    h = arr(h)
    phi = None if phi is None else arr(phi)
    if m is None:
        m = moment_field(h, phi, bundle)
    return exp_step(h, m, -dt)


def normalize_determinant(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Rescale by a constant so that int Q1(h, k) dV = 0."""
    r = h.shape[-1]
    c = float(np.mean(np.linalg.slogdet(h)[1] - np.linalg.slogdet(k)[1])) / r
    return h * math.exp(-c)


def run_flow(h0, phi, bundle: BundleData, config: FlowConfig | None = None,
             reference: np.ndarray | None = None,
             callback=None) -> tuple[np.ndarray, FlowTrace]:
    """Adaptive explicit integration of the flow.

    A step is accepted when neither D nor sup|m| increases (beyond the slack).
    D(h_t, k) is tracked through the cocycle property: each step adds the
    trapezoidal estimate of int_0^1 <-dt m, m(h e^{-s dt m})> ds.
    ``callback(step, h, m)`` is invoked after every accepted step.
    """
    cfg = config or FlowConfig()
    phi = None if phi is None else arr(phi)
    k = identity_field(bundle) if reference is None else arr(reference)
    h = check_metric(np.array(arr(h0), dtype=complex), bundle.rank)
    if cfg.detnormalize:
        h = normalize_determinant(h, k)
    d_val = 0.0
    if not np.allclose(h, k, rtol=0, atol=1e-15):
        d_val = donaldson_functional(h, k, phi, bundle, PathSpec("geodesic", 12, "gauss"))
    m = moment_field(h, phi, bundle)
    sup, l2 = residual_norms(m, bundle)
    mm = pairing(m, m, bundle)
    trace = FlowTrace()
    t, dt, step, accepted = 0.0, cfg.dt_initial, 0, 0
    c_now = cond(h)
    trace.append(0, t, 0.0, d_val, sup, l2, c_now, 1)
    history = [sup]
    start = time.monotonic()
    last_logged = 0
    while True:
        if sup <= cfg.stop_sup_residual:
            trace.classification, trace.reason = CONVERGED, "sup residual below tolerance"
            break
        if accepted >= cfg.max_steps:
            trace.reason = "max_steps reached"
            break
        if cfg.max_wall_time is not None and time.monotonic() - start > cfg.max_wall_time:
            trace.reason = "wall time exceeded"
            break
        if dt < 1e-14:
            trace.reason = "step size underflow"
            break
        step += 1
        with np.errstate(over="ignore", invalid="ignore"):
            h_new = exp_step(h, m, -dt)
        if not np.all(np.isfinite(h_new)):
            trace.append(step, t, dt, d_val, sup, l2, math.inf, 0)
            trace.classification, trace.reason, trace.diverged = DIVERGING, "overflow", True
            break
        m_new = moment_field(h_new, phi, bundle)
        sup_new, l2_new = residual_norms(m_new, bundle)
        d_inc = -0.5 * dt * (mm + pairing(m, m_new, bundle))
        if d_inc > cfg.monotone_slack or sup_new > sup + cfg.monotone_slack:
            trace.append(step, t, dt, d_val + d_inc, sup_new, l2_new, c_now, 0)
            dt *= 0.5
            continue
        accepted += 1
        t += dt
        if cfg.detnormalize:
            h_new = normalize_determinant(h_new, k)
        h, m, sup, l2 = h_new, m_new, sup_new, l2_new
        mm = pairing(m, m, bundle)
        d_val += d_inc
        c_now = cond(h)
        history.append(sup)
        if callback is not None:
            callback(accepted, h, m)
        diverging = c_now > cfg.divergence_cond_threshold
        plateau = False
        if len(history) > cfg.plateau_window:
            old = history[-cfg.plateau_window - 1]
            plateau = (sup > cfg.plateau_factor * cfg.stop_sup_residual
                       and sup >= (1.0 - 1e-3) * old)
        done = sup <= cfg.stop_sup_residual or diverging or plateau
        if accepted % cfg.trace_stride == 0 or done:
            trace.append(step, t, dt, d_val, sup, l2, c_now, 1)
            last_logged = accepted
        if diverging or plateau:
            trace.classification, trace.diverged = DIVERGING, True
            trace.reason = "condition number threshold" if diverging else "residual plateau"
            break
        dt = min(dt * cfg.adapt_factor, cfg.dt_max)
    if last_logged != accepted:
        trace.append(step, t, dt, d_val, sup, l2, c_now, 1)
    trace.classification = classify_trace(trace, cfg)
    return h, trace


def classify_trace(trace: FlowTrace, config: FlowConfig | None = None) -> str:
    cfg = config or FlowConfig()
    if not trace.rows:
        raise ValueError("empty trace")
    acc = trace.accepted_rows()
    last = acc[-1] if acc else trace.rows[-1]
    if last[4] <= cfg.stop_sup_residual:
        return CONVERGED
    if trace.diverged or any(r[6] > cfg.divergence_cond_threshold for r in trace.rows):
        return DIVERGING
    return UNDECIDED
