"""Scenario configurations: JSON schema, built-in catalog and problem construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .bundle import BundleData, identity_field, make_background
from .flow import FlowConfig
from .lattice import LatticeTorus, build_torus
from .matfun import inv
from .recipes import abelian_gauge_perturbation, nilpotent_gauge_perturbation, random_metric
from .stability import TWIST_TAGS, PairCase, coordinate_candidates

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "vwlab scenario",
    "type": "object",
    "required": ["name", "torus", "bundle"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "torus": {
            "type": "object",
            "required": ["complex_dim", "sites_per_side"],
            "additionalProperties": False,
            "properties": {
                "complex_dim": {"enum": [1, 2]},
                "sites_per_side": {"type": "integer", "minimum": 4, "multipleOf": 2},
                "side_length": {"type": "number", "exclusiveMinimum": 0},
                "stencil_order": {"enum": [2, 4, 6, 8]},
            },
        },
        "bundle": {
            "type": "object",
            "required": ["block_ranks", "degrees"],
            "additionalProperties": False,
            "properties": {
                "block_ranks": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                "minItems": 1},
                "degrees": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "perturbation": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["none", "abelian", "nilpotent"]},
                        "amplitude": {"type": "number", "minimum": 0},
                        "seed": {"type": "integer"},
                        "modes": {"type": "integer", "minimum": 1},
                        "row": {"type": "integer", "minimum": 0},
                        "col": {"type": "integer", "minimum": 0},
                    },
                },
                "candidates": {"type": "array"},
                "twist_tag": {"enum": list(TWIST_TAGS)},
            },
        },
        "phi": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["pattern"],
                    "additionalProperties": False,
                    "properties": {
                        "pattern": _MATRIX,
                        "pattern_imag": _MATRIX,
                        "holomorphy_tolerance": {"type": "number", "minimum": 0},
                    },
                },
            ]
        },
        "initial_metric": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["identity", "random-smooth", "file"]},
                "seed": {"type": "integer"},
                "amplitude": {"type": "number", "minimum": 0},
                "modes": {"type": "integer", "minimum": 1},
                "axes": {"type": "integer", "minimum": 1, "maximum": 4},
                "path": {"type": "string"},
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": ["number", "integer", "boolean", "null"]}
                           for k in FlowConfig().to_dict()},
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "boolean"} for k in
                           ("oracle", "bott_chern", "vw_residual", "restriction", "reduction",
                            "stability")},
        },
        "expected": {"enum": ["converged", "diverging", "undecided"]},
        "output_dir": {"type": ["string", "null"]},
    },
}


class ConfigError(ValueError):
    """Invalid scenario configuration; ``problems`` lists every offending key."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid scenario config:\n  " + "\n  ".join(problems))


def validate_config(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        raise ConfigError([f"{'.'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
                           for e in errs])
    b = cfg["bundle"]
    problems = []
    if len(b["block_ranks"]) != len(b["degrees"]):
        problems.append("bundle.degrees: length differs from bundle.block_ranks")
    r = sum(b["block_ranks"])
    phi = cfg.get("phi")
    if phi is not None and np.shape(phi["pattern"]) != (r, r):
        problems.append(f"phi.pattern: must be {r}x{r}")
    init = cfg.get("initial_metric", {"kind": "identity"})
    if init["kind"] == "file" and "path" not in init:
        problems.append("initial_metric.path: required for kind 'file'")
    try:
        FlowConfig.from_dict(cfg.get("flow", {}))
    except (TypeError, ValueError) as exc:
        problems.append(f"flow: {exc}")
    if problems:
        raise ConfigError(problems)


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: list[str] | None) -> dict:
    """Apply ``dotted.key=value`` overrides (values parsed as JSON when possible)."""
    out = copy.deepcopy(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError([f"override {item!r}: expected key=value"])
        key, value = item.split("=", 1)
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {key!r}: {p} is not an object"])
        node[parts[-1]] = _coerce(value)
    return out


@dataclass
class Problem:
    torus: LatticeTorus
    bundle: BundleData
    phi: np.ndarray | None
    h0: np.ndarray
    flow: FlowConfig
    pair_case: PairCase
    gamma: np.ndarray | None = None  # abelian gauge function, when present


def _phi_pattern(cfg: dict) -> np.ndarray | None:
    phi = cfg.get("phi")
    if phi is None:
        return None
    p = np.array(phi["pattern"], dtype=complex)
    if "pattern_imag" in phi:
        p = p + 1j * np.array(phi["pattern_imag"], dtype=float)
    return p


def pair_case_for(cfg: dict) -> PairCase:
    b = cfg["bundle"]
    r = sum(b["block_ranks"])
    pattern = _phi_pattern(cfg)
    pattern = np.zeros((r, r)) if pattern is None else pattern
    d = {"name": cfg["name"], "complex_dim": cfg["torus"]["complex_dim"],
         "side_length": cfg["torus"].get("side_length", 1.0),
         "block_ranks": b["block_ranks"], "degrees": b["degrees"],
         "phi": pattern.real.tolist(),
         "twist_tag": b.get("twist_tag", "K_X"),
         "candidates": b.get("candidates", coordinate_candidates(b["block_ranks"], b["degrees"]))}
    if np.any(pattern.imag):
        d["phi_imag"] = pattern.imag.tolist()
    return PairCase.from_dict(d)


def build_problem(cfg: dict) -> Problem:
    validate_config(cfg)
    tc = cfg["torus"]
    torus = build_torus(tc["complex_dim"], tc["sites_per_side"], tc.get("side_length", 1.0),
                        tc.get("stencil_order", 2))
    b = cfg["bundle"]
    r = sum(b["block_ranks"])
    pert = b.get("perturbation", {"kind": "none"})
    a, g, gamma = None, None, None
    if pert["kind"] == "abelian":
        if r != 1:
            raise ConfigError(["bundle.perturbation.kind: 'abelian' needs rank 1"])
        a, gamma = abelian_gauge_perturbation(torus, pert.get("seed", 0), pert.get("amplitude", 0.3),
                                              pert.get("modes", 1))
    elif pert["kind"] == "nilpotent":
        a, g = nilpotent_gauge_perturbation(torus, r, pert.get("seed", 0), pert.get("amplitude", 0.01),
                                            pert.get("modes", 1), pert.get("row", 0),
                                            pert.get("col", 1))
    try:
        bundle = make_background(r, b["block_ranks"], b["degrees"], torus, a)
    except ValueError as exc:
        raise ConfigError([f"bundle: {exc}"]) from exc
    pattern = _phi_pattern(cfg)
    phi = None
    if pattern is not None:
        if np.any(pattern[bundle.charges != 0]):
            raise ConfigError(["phi.pattern: nonzero entries between blocks of different "
                               "degree are not constant sections"])
        phi = np.broadcast_to(pattern, torus.grid_shape + (r, r)).copy()
        if g is not None:
            phi = g @ phi @ inv(g)
    init = cfg.get("initial_metric", {"kind": "identity"})
    if init["kind"] == "identity":
        h0 = identity_field(bundle)
    elif init["kind"] == "random-smooth":
        h0 = random_metric(bundle, init.get("seed", 0), init.get("amplitude", 0.3),
                           init.get("modes", 1), init.get("axes"))
    else:
        from .harness import read_field

        h0 = read_field(init["path"])
        if h0.shape != torus.grid_shape + (r, r):
            raise ConfigError([f"initial_metric.path: field shape {h0.shape} does not match"])
    return Problem(torus, bundle, phi, h0, FlowConfig.from_dict(cfg.get("flow", {})),
                   pair_case_for(cfg), gamma)


# --------------------------------------------------------------------------
# built-in catalog

def _scenario(name, n, N, ranks, degrees, *, phi=None, pert=None, init=None, flow=None,
              diagnostics=None, expected="converged", order=2, description=""):
    cfg = {"name": name, "description": description,
           "torus": {"complex_dim": n, "sites_per_side": N, "side_length": 1.0,
                     "stencil_order": order},
           "bundle": {"block_ranks": ranks, "degrees": degrees,
                      "perturbation": pert or {"kind": "none"}},
           "phi": None if phi is None else {"pattern": phi},
           "initial_metric": init or {"kind": "identity"},
           "flow": flow or {"trace_stride": 10},
           "diagnostics": diagnostics or {},
           "expected": expected}
    return cfg


_DIAG = [[1.0, 0.0], [0.0, -1.0]]
_NILP = [[0.0, 0.0], [1.0, 0.0]]

CATALOG: dict[str, dict] = {c["name"]: c for c in [
    _scenario("abelian-degree1-curve", 1, 64, [1], [1],
              pert={"kind": "abelian", "amplitude": 0.3, "seed": 1},
              init={"kind": "random-smooth", "seed": 3, "amplitude": 0.5},
              diagnostics={"oracle": True, "stability": True},
              description="degree-1 line bundle with a gauge-trivial dbar perturbation"),
    _scenario("abelian-degree1-surface", 2, 16, [1], [1],
              pert={"kind": "abelian", "amplitude": 0.3, "seed": 1},
              init={"kind": "random-smooth", "seed": 3, "amplitude": 0.5},
              diagnostics={"oracle": True, "vw_residual": True, "bott_chern": True,
                           "restriction": True, "stability": True},
              description="degree-1 line bundle on the four-torus"),
    _scenario("flat-trivial-curve", 1, 32, [1], [0],
              init={"kind": "random-smooth", "seed": 5, "amplitude": 0.5},
              diagnostics={"oracle": True},
              description="trivial flat line bundle; the solution is constant"),
    _scenario("polystable-diagonal-curve", 1, 32, [1, 1], [0, 0], phi=_DIAG,
              init={"kind": "random-smooth", "seed": 1, "amplitude": 0.3},
              diagnostics={"stability": True},
              description="O + O with diagonal Higgs field"),
    _scenario("polystable-diagonal-surface", 2, 8, [1, 1], [0, 0], phi=_DIAG,
              init={"kind": "random-smooth", "seed": 1, "amplitude": 0.3},
              diagnostics={"stability": True, "vw_residual": True, "restriction": True},
              description="O + O with diagonal Higgs field on the four-torus"),
    _scenario("polystable-gauged-surface", 2, 8, [1, 1], [0, 0], phi=_DIAG, order=4,
              pert={"kind": "nilpotent", "amplitude": 2e-4, "seed": 5},
              diagnostics={"stability": True, "vw_residual": True},
              description="O + O with diagonal Higgs field in a non-unitary gauge"),
    _scenario("nilpotent-triangular-curve", 1, 16, [1, 1], [0, 0], phi=_NILP,
              flow={"trace_stride": 10, "max_steps": 400}, expected="undecided",
              diagnostics={"stability": True},
              description="O + O with nilpotent Higgs field: semistable, not polystable"),
    _scenario("unstable-split-curve", 1, 32, [1, 1], [1, -1],
              expected="diverging", diagnostics={"stability": True},
              description="O(1) + O(-1) with zero Higgs field"),
    _scenario("unstable-split-surface", 2, 8, [1, 1], [1, -1],
              expected="diverging", diagnostics={"stability": True},
              description="O(1) + O(-1) pulled to the four-torus"),
    _scenario("pullback-reduction-surface", 2, 8, [1, 1], [0, 0], phi=_DIAG,
              init={"kind": "random-smooth", "seed": 2, "amplitude": 0.3, "axes": 2},
              diagnostics={"reduction": True, "stability": True},
              description="fields constant along the second factor"),
]}


def catalog_names() -> list[str]:
    return list(CATALOG)


def load_config(source: str | Path) -> dict:
    """A catalog name or a path to a JSON scenario document."""
    if isinstance(source, str) and source in CATALOG:
        return copy.deepcopy(CATALOG[source])
    path = Path(source)
    if not path.exists():
        raise ConfigError([f"<source>: {source!r} is neither a catalog scenario nor a file"])
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: not valid JSON ({exc})"]) from exc
