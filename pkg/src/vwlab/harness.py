"""Run directories: manifests, traces, field dumps, diagnostics and run comparison.

Layout of a run directory::

    manifest.json          written at start (status "running"), finalized at exit
    config.json            the validated configuration after overrides
    trace.csv              flow trace, fixed column order
    fields/<name>.bin      little-endian complex128, C order
    fields/<name>.json     shape / dtype sidecar
    diagnostics/*.json     one file per enabled diagnostic
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, conventions
from .bundle import identity_field
from .flow import CONVERGED, DIVERGING, UNDECIDED, FlowConfig, FlowTrace, monotonicity_violations, run_flow
from .matfun import Eig, exp_step, hermitian_part
from .scenarios import ConfigError, Problem, apply_overrides, build_problem, load_config, validate_config

EXIT_CODES = {CONVERGED: 0, DIVERGING: 10, UNDECIDED: 11}
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3
OUTPUT_ROOT_ENV = "VWLAB_OUTPUT_ROOT"
SAME_SOLUTION_TOL = 1e-5


# --------------------------------------------------------------------------
# field I/O

def write_field(path: str | Path, x: np.ndarray, meta: dict | None = None) -> None:
    path = Path(path)
    data = np.ascontiguousarray(x, dtype="<c16")
    path.with_suffix(".bin").write_bytes(data.tobytes())
    side = {"shape": list(data.shape), "dtype": "complex128", "byteorder": "little", "order": "C"}
    side.update(meta or {})
    path.with_suffix(".json").write_text(json.dumps(side, indent=2))


def read_field(path: str | Path) -> np.ndarray:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    raw = path.with_suffix(".bin").read_bytes()
    return np.frombuffer(raw, dtype="<c16").reshape(side["shape"]).astype(complex)


# --------------------------------------------------------------------------
# diagnostics

def _oracle(p: Problem, h: np.ndarray) -> dict:
    from .oracles import abelian_poisson_solution, relative_sup_error

    if p.bundle.rank != 1 or p.phi is not None:
        return {"skipped": "oracle applies to rank 1 with zero Higgs field"}
    ref = abelian_poisson_solution(p.bundle)
    return {"relative_sup_error": relative_sup_error(h, ref)}


def _bott_chern(p: Problem, h: np.ndarray) -> dict:
    from .functional import bott_chern_defect

    k = identity_field(p.bundle)
    return {"defect_sup": bott_chern_defect(h, k, p.phi, p.bundle)}


def _vw(p: Problem, h: np.ndarray) -> dict:
    from .crosschecks import vw_fourmanifold_residual

    if p.torus.complex_dim != 2:
        return {"skipped": "four-manifold residual needs a surface"}
    r1, r2 = vw_fourmanifold_residual(h, p.phi, p.bundle)
    return {"r1": r1, "r2": r2}


def _reduction(p: Problem, h: np.ndarray) -> dict:
    from .crosschecks import reduction_gap

    return {"gap": reduction_gap(h, p.phi, p.bundle)}


def _restriction(p: Problem, h: np.ndarray) -> dict:
    from .crosschecks import restrict_to_divisor
    from .stability import POLYSTABLE, SEMISTABLE, STABLE, PairCase, classify_pair

    if p.torus.complex_dim != 2:
        return {"skipped": "restriction needs a surface"}
    res = restrict_to_divisor(h, p.phi, p.bundle, 0, (0, 0))
    d = p.pair_case.to_dict()
    d.update(name=d["name"] + "|D", complex_dim=1, twist_tag="K_D(-D)")
    cert = classify_pair(PairCase.from_dict(d))
    out = {"D_X": res.functional_surface, "D_D": res.functional_curve,
           "sup_residual_sq": res.sup_residual_sq, "restricted_classification": cert.classification}
    if cert.classification in (STABLE, POLYSTABLE, SEMISTABLE):
        cfg = FlowConfig(max_steps=5000, trace_stride=50)
        _, tr = run_flow(res.h, res.phi, res.curve.bundle, cfg)
        out.update(restricted_flow=tr.classification, restricted_final_sup=tr.final("sup_residual"))
    return out


def _stability(p: Problem, h: np.ndarray) -> dict:
    from .stability import classify_pair

    return classify_pair(p.pair_case).to_dict()


DIAGNOSTICS = {"oracle": _oracle, "bott_chern": _bott_chern, "vw_residual": _vw,
               "reduction": _reduction, "restriction": _restriction, "stability": _stability}


# --------------------------------------------------------------------------
# running

@dataclass
class RunResult:
    directory: Path
    classification: str
    exit_code: int
    manifest: dict


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def run_scenario(source: str | Path | dict, overrides: list[str] | None = None,
                 output_root: str | Path | None = None) -> RunResult:
    """Build, run and persist one scenario; never overwrites an existing directory."""
    cfg = dict(source) if isinstance(source, dict) else load_config(source)
    cfg = apply_overrides(cfg, overrides)
    validate_config(cfg)
    problem = build_problem(cfg)
    root = Path(cfg.get("output_dir") or output_root or default_output_root())
    run_dir = root / cfg["name"]
    suffix = 1
    while run_dir.exists():
        run_dir = root / f"{cfg['name']}-{suffix}"
        suffix += 1
    try:
        (run_dir / "fields").mkdir(parents=True)
        (run_dir / "diagnostics").mkdir()
    except OSError as exc:
        raise OSError(f"cannot create run directory {run_dir}: {exc}") from exc

    manifest = {
        "status": "running",
        "config": cfg,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "conventions": conventions.as_dict(),
        "lattice": problem.torus.metadata(),
        "bundle": problem.bundle.metadata(),
        "started": _now(),
    }
    _write_json(run_dir / "manifest.json", manifest)
    _write_json(run_dir / "config.json", cfg)
    write_field(run_dir / "fields" / "h_initial", problem.h0)
    if problem.phi is not None:
        write_field(run_dir / "fields" / "phi", problem.phi)

    t0 = time.monotonic()
    h, trace = run_flow(problem.h0, problem.phi, problem.bundle, problem.flow)
    wall = time.monotonic() - t0
    trace.write_csv(run_dir / "trace.csv")
    write_field(run_dir / "fields" / "h_final", h)

    violations = monotonicity_violations(trace, problem.flow.monotone_slack)
    diag_cfg = cfg.get("diagnostics", {})
    for key, fn in DIAGNOSTICS.items():
        if diag_cfg.get(key):
            _write_json(run_dir / "diagnostics" / f"{key}.json", fn(problem, h))
    _write_json(run_dir / "diagnostics" / "monotonicity.json",
                {"violations": violations, "slack": problem.flow.monotone_slack})

    cls = trace.classification
    manifest.update(
        status="finished", finished=_now(), wall_time_seconds=wall, classification=cls,
        reason=trace.reason, exit_code=EXIT_CODES[cls],
        headline={"final_functional": trace.final("functional"),
                  "final_sup_residual": trace.final("sup_residual"),
                  "final_l2_residual": trace.final("l2_residual"),
                  "final_cond_h": _finite(trace.final("cond_h")),
                  "accepted_steps": len(trace.accepted_rows()) - 1,
                  "final_time": trace.final("time")},
        monotonicity_violations=len(violations),
    )
    _write_json(run_dir / "manifest.json", manifest)
    return RunResult(run_dir, cls, EXIT_CODES[cls], manifest)


# --------------------------------------------------------------------------
# comparison

def _load_run(d: Path) -> tuple[dict, np.ndarray, np.ndarray | None]:
    man = json.loads((d / "manifest.json").read_text())
    if man.get("status") != "finished":
        raise ValueError(f"{d}: run did not finish")
    phi_path = d / "fields" / "phi.json"
    phi = read_field(d / "fields" / "phi") if phi_path.exists() else None
    return man, read_field(d / "fields" / "h_final"), phi


def _flat_projection(c: np.ndarray, phi: np.ndarray | None, charges: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a constant matrix onto charge-0 matrices commuting with phi."""
    r = c.shape[-1]
    basis = [np.eye(r)[:, [i]] @ np.eye(r)[[j], :] for i in range(r) for j in range(r)
             if charges[i, j] == 0]
    if phi is None:
        cols = [np.zeros(1)] * len(basis)
    else:
        samples = phi.reshape(-1, r, r)[:: max(1, phi.size // (r * r * 256))]
        cols = [(e @ samples - samples @ e).ravel() for e in basis]
    a = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    tol = 1e-10 * max(1.0, s[0] if s.size else 1.0)
    null = vh[np.sum(s > tol):].conj().T  # coefficient vectors of the commutant
    coeff = np.array([np.vdot(e, c) for e in basis])
    proj = null @ (null.conj().T @ coeff)
    return sum(w * e for w, e in zip(proj, basis))


def flat_normalized(h_ref: np.ndarray, h: np.ndarray, phi: np.ndarray | None,
                    charges: np.ndarray) -> np.ndarray:
    """h with the constant flat part of log(h_ref^{-1} h) removed.

    Flat directions are constant charge-0 endomorphisms commuting with phi;
    the identity (determinant normalization) is always among them.
    """
    e = Eig.of(h_ref)
    s = e.apply(lambda w: w**-0.5)
    x = Eig.of(hermitian_part(s @ h @ s))
    log_ratio = e.apply(lambda w: w**-0.5) @ x.apply(np.log) @ e.apply(np.sqrt)
    c = log_ratio.reshape(-1, *log_ratio.shape[-2:]).mean(axis=0)
    c_flat = _flat_projection(c, phi, charges)
    return exp_step(h, np.broadcast_to(c_flat, h.shape).copy(), -1.0)


def compare_runs(dir_a: str | Path, dir_b: str | Path, out_csv: str | Path | None = None,
                 tol: float = SAME_SOLUTION_TOL) -> dict:
    """Sup-distance between flat-normalized final metrics plus a trace overlay CSV."""
    da, db = Path(dir_a), Path(dir_b)
    ma, ha, phi = _load_run(da)
    mb, hb, _ = _load_run(db)
    if ma["lattice"] != mb["lattice"] or ha.shape != hb.shape:
        raise ValueError("incompatible runs: lattices or ranks differ")
    bundle_a, bundle_b = ma["bundle"], mb["bundle"]
    if (bundle_a["block_ranks"], bundle_a["degree_vector"]) != (bundle_b["block_ranks"],
                                                                 bundle_b["degree_vector"]):
        raise ValueError("incompatible runs: bundle topology differs")
    row = np.concatenate([np.full(r, d // r) for r, d in zip(bundle_a["block_ranks"],
                                                            bundle_a["degree_vector"])])
    charges = row[:, None] - row[None, :]
    hb_n = flat_normalized(ha, hb, phi, charges)
    dist = float(np.max(np.abs(ha - hb_n)) / np.max(np.abs(ha)))
    report = {
        "run_a": str(da), "run_b": str(db),
        "classification_a": ma["classification"], "classification_b": mb["classification"],
        "sup_distance": dist, "tolerance": tol,
        "verdict": "same" if (dist <= tol and ma["classification"] == mb["classification"])
        else "different",
    }
    out_csv = Path(out_csv) if out_csv is not None else da / f"overlay_{db.name}.csv"
    ta, tb = FlowTrace.read_csv(da / "trace.csv"), FlowTrace.read_csv(db / "trace.csv")
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "step", "time", "functional", "sup_residual"])
        for tag, tr in (("a", ta), ("b", tb)):
            for r in tr.accepted_rows():
                w.writerow([tag, r[0], repr(r[1]), repr(r[3]), repr(r[4])])
    report["overlay_csv"] = str(out_csv)
    return report


__all__ = ["EXIT_CODES", "EXIT_CONFIG_ERROR", "EXIT_IO_ERROR", "OUTPUT_ROOT_ENV", "ConfigError",
           "RunResult", "compare_runs", "flat_normalized", "read_field", "run_scenario",
           "write_field"]
