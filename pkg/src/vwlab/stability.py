"""Slope stability of structured pairs (E, phi) against a declared candidate family.

A pair is described by a split background bundle (block ranks and degrees), a
constant Higgs pattern and a finite list of constant sub-bundle candidates,
each given by a spanning set of column vectors. Stability can only be certified
relative to that family; the classification label says so.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

STABLE = "stable-relative-to-family"
POLYSTABLE = "polystable"
SEMISTABLE = "semistable_not_stable"
UNSTABLE = "unstable"

TWIST_TAGS = ("K_X", "L", "K_D(-D)")
_SLOPE_TOL = 1e-12
_SPAN_TOL = 1e-10

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

PAIRCASE_SCHEMA = {
    "type": "object",
    "required": ["name", "block_ranks", "degrees", "phi", "candidates"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "complex_dim": {"enum": [1, 2]},
        "side_length": {"type": "number", "exclusiveMinimum": 0},
        "block_ranks": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "degrees": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "phi": _MATRIX,
        "phi_imag": _MATRIX,
        "twist_tag": {"enum": list(TWIST_TAGS)},
        "twist_degree": {"type": "integer"},
        "candidates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["basis"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "basis": _MATRIX,
                    "degree": {"type": "integer"},
                },
            },
        },
    },
}
CATALOG_SCHEMA = {"type": "array", "items": PAIRCASE_SCHEMA}


def slope(degree: int, rank: int, complex_dim: int = 1, side_length: float = 1.0) -> float:
    """mu = deg . [omega]^{n-1} / rank, with the degree carried by the first factor."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    return degree * side_length ** (2 * (complex_dim - 1)) / rank


@dataclass
class Candidate:
    basis: np.ndarray  # (rank, k) spanning columns
    degree: int
    name: str = ""

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.basis, tol=_SPAN_TOL))


@dataclass
class PairCase:
    name: str
    block_ranks: tuple[int, ...]
    degrees: tuple[int, ...]
    phi: np.ndarray
    candidates: list[Candidate] = field(default_factory=list)
    complex_dim: int = 1
    side_length: float = 1.0
    twist_tag: str = "K_X"
    twist_degree: int = 0

    def __post_init__(self) -> None:
        self.block_ranks = tuple(int(r) for r in self.block_ranks)
        self.degrees = tuple(int(d) for d in self.degrees)
        if len(self.block_ranks) != len(self.degrees):
            raise ValueError("block_ranks and degrees differ in length")
        r = self.rank
        self.phi = np.asarray(self.phi, dtype=complex)
        if self.phi.shape != (r, r):
            raise ValueError(f"phi pattern must be {r}x{r}")
        if self.twist_tag not in TWIST_TAGS:
            raise ValueError(f"unknown twist tag {self.twist_tag!r}")
        if self.twist_tag == "L" and self.complex_dim != 1:
            raise ValueError("L-twisted pairs live on curves")
        if self.twist_tag == "K_D(-D)" and self.complex_dim != 1:
            raise ValueError("K_D(-D)-valued operators live on the divisor (a curve)")
        for c in self.candidates:
            if c.basis.shape[0] != r:
                raise ValueError(f"candidate {c.name!r}: basis vectors must have length {r}")
            if not 1 <= c.rank < r:
                raise ValueError(f"candidate {c.name!r}: sub-rank must lie in [1, {r - 1}]")

    @property
    def rank(self) -> int:
        return sum(self.block_ranks)

    @property
    def degree(self) -> int:
        return sum(self.degrees)

    def row_degrees(self) -> np.ndarray:
        return np.concatenate([np.full(r, d / r) for r, d in zip(self.block_ranks, self.degrees)])

    def mu(self, degree: int, rank: int) -> float:
        return slope(degree, rank, self.complex_dim, self.side_length)

    def twist_consistency(self) -> dict:
        """Whether every nonzero phi entry is a constant section of Hom(E_j, E_i) (x) W.

        On tori every admissible W has degree 0, so this reduces to equal row
        degrees on the nonzero entries.
        """
        rd = self.row_degrees()
        bad = [(int(i), int(j)) for i, j in zip(*np.nonzero(np.abs(self.phi) > 0))
               if rd[i] - rd[j] + self.twist_degree != 0]
        return {"twist_tag": self.twist_tag, "twist_degree": self.twist_degree,
                "constant_realizable": not bad, "offending_entries": bad}

    # -- (de)serialization
    @classmethod
    def from_dict(cls, d: dict) -> "PairCase":
        jsonschema.validate(d, PAIRCASE_SCHEMA)
        phi = np.array(d["phi"], dtype=float)
        if "phi_imag" in d:
            phi = phi + 1j * np.array(d["phi_imag"], dtype=float)
        ranks, degs = d["block_ranks"], d["degrees"]
        offsets = np.cumsum([0] + list(ranks))
        cands = []
        for idx, c in enumerate(d["candidates"]):
            basis = np.array(c["basis"], dtype=complex).T  # JSON lists vectors
            deg = c.get("degree")
            if deg is None:
                deg = _block_degree(basis, ranks, degs, offsets)
            cands.append(Candidate(basis, int(deg), c.get("name", f"F{idx}")))
        return cls(d["name"], ranks, degs, phi, cands, d.get("complex_dim", 1),
                   d.get("side_length", 1.0), d.get("twist_tag", "K_X"), d.get("twist_degree", 0))

    def to_dict(self) -> dict:
        out = {"name": self.name, "complex_dim": self.complex_dim, "side_length": self.side_length,
               "block_ranks": list(self.block_ranks), "degrees": list(self.degrees),
               "phi": self.phi.real.tolist(), "twist_tag": self.twist_tag,
               "twist_degree": self.twist_degree,
               "candidates": [{"name": c.name, "basis": c.basis.T.real.tolist(), "degree": c.degree}
                              for c in self.candidates]}
        if np.any(self.phi.imag):
            out["phi_imag"] = self.phi.imag.tolist()
        if any(np.any(c.basis.imag) for c in self.candidates):
            raise ValueError("complex candidate bases are not serializable")
        return out


def _block_degree(basis: np.ndarray, ranks, degs, offsets) -> int:
    """Degree of a candidate spanned by whole blocks; anything else needs an explicit degree."""
    span = _projector(basis)
    target = np.zeros_like(span)
    total = 0
    for b, (r, d) in enumerate(zip(ranks, degs)):
        sl = slice(offsets[b], offsets[b + 1])
        if np.allclose(span[sl, sl], np.eye(r), atol=1e-8):
            target[sl, sl] = np.eye(r)
            total += d
    if not np.allclose(span, target, atol=1e-8):
        raise ValueError("candidate is not a union of blocks; give its degree explicitly")
    return total


def _projector(basis: np.ndarray) -> np.ndarray:
    q, s, _ = np.linalg.svd(basis, full_matrices=False)
    q = q[:, s > _SPAN_TOL * max(1.0, s[0])]
    return q @ q.conj().T


def _contained(inner: np.ndarray, outer: np.ndarray) -> bool:
    p = _projector(outer)
    return bool(np.linalg.norm(inner - p @ inner) <= _SPAN_TOL * max(1.0, np.linalg.norm(inner)))


def phi_invariance_check(case: PairCase, candidate_index: int) -> bool:
    """True iff phi maps the candidate's span into itself."""
    if not 0 <= candidate_index < len(case.candidates):
        raise IndexError(f"candidate index {candidate_index} out of range")
    b = case.candidates[candidate_index].basis
    return _contained(case.phi @ b, b)


@dataclass
class Certificate:
    name: str
    classification: str
    certified: bool
    bundle_slope: float
    witness: dict | None
    candidates: list[dict]
    decomposition: list[str] | None
    twist: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "classification": self.classification,
                "certified": self.certified, "bundle_slope": self.bundle_slope,
                "witness": self.witness, "candidates": self.candidates,
                "decomposition": self.decomposition, "twist": self.twist}


def _summand_is_stable(case: PairCase, idx: int, invariant: list[bool]) -> bool:
    """A summand is stable if no invariant candidate strictly inside it has slope >= its own."""
    outer = case.candidates[idx]
    mu_s = case.mu(outer.degree, outer.rank)
    for j, c in enumerate(case.candidates):
        if j == idx or not invariant[j] or c.rank >= outer.rank:
            continue
        if _contained(c.basis, outer.basis) and case.mu(c.degree, c.rank) >= mu_s - _SLOPE_TOL:
            return False
    return True


def _polystable_decomposition(case: PairCase, pool: list[int], invariant: list[bool]
                              ) -> list[int] | None:
    """Indices of invariant equal-slope candidates forming a direct-sum decomposition of E."""
    r = case.rank
    for size in range(2, len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            if sum(case.candidates[i].rank for i in combo) != r:
                continue
            stacked = np.concatenate([case.candidates[i].basis for i in combo], axis=1)
            if np.linalg.matrix_rank(stacked, tol=_SPAN_TOL) != r:
                continue
            if all(_summand_is_stable(case, i, invariant) for i in combo):
                return list(combo)
    return None


def classify_pair(case: PairCase) -> Certificate:
    mu_e = case.mu(case.degree, case.rank)
    invariant = [phi_invariance_check(case, i) for i in range(len(case.candidates))]
    rows = []
    for c, inv in zip(case.candidates, invariant):
        rows.append({"name": c.name, "rank": c.rank, "degree": c.degree,
                     "slope": case.mu(c.degree, c.rank), "invariant": inv})
    twist = case.twist_consistency()
    destab = [i for i, row in enumerate(rows) if row["invariant"] and row["slope"] > mu_e + _SLOPE_TOL]
    if destab:
        w = max(destab, key=lambda i: rows[i]["slope"])
        return Certificate(case.name, UNSTABLE, True, mu_e, {"index": w, **rows[w]}, rows, None, twist)
    equal = [i for i, row in enumerate(rows) if row["invariant"]
             and abs(row["slope"] - mu_e) <= _SLOPE_TOL]
    certified = bool(case.candidates) or case.rank == 1
    if not equal:
        return Certificate(case.name, STABLE, certified, mu_e, None, rows, None, twist)
    deco = _polystable_decomposition(case, equal, invariant)
    if deco is not None:
        return Certificate(case.name, POLYSTABLE, True, mu_e, None, rows,
                           [case.candidates[i].name for i in deco], twist)
    return Certificate(case.name, SEMISTABLE, True, mu_e, None, rows, None, twist)


def load_catalog(path: str | Path) -> list[PairCase]:
    data = json.loads(Path(path).read_text())
    jsonschema.validate(data, CATALOG_SCHEMA)
    return [PairCase.from_dict(d) for d in data]


def classify_catalog(path: str | Path) -> list[dict]:
    return [classify_pair(c).to_dict() for c in load_catalog(path)]


def coordinate_candidates(case_ranks, degrees) -> list[dict]:
    """JSON candidate records for every proper union of coordinate blocks."""
    r = sum(case_ranks)
    offsets = np.cumsum([0] + list(case_ranks))
    out = []
    nb = len(case_ranks)
    for size in range(1, nb):
        for combo in itertools.combinations(range(nb), size):
            vecs = [np.eye(r)[k].tolist() for b in combo for k in range(offsets[b], offsets[b + 1])]
            out.append({"name": "+".join(f"E{b}" for b in combo), "basis": vecs,
                        "degree": int(sum(degrees[b] for b in combo))})
    return out
