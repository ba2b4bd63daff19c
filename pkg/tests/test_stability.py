import json

import jsonschema
import numpy as np
import pytest

from vwlab.stability import (POLYSTABLE, SEMISTABLE, STABLE, UNSTABLE, Candidate, PairCase, classify_catalog,
                             classify_pair, coordinate_candidates, phi_invariance_check, slope)


def case(ranks, degrees, phi, candidates=None, **kw):
    d = {"name": "c", "block_ranks": ranks, "degrees": degrees, "phi": phi,
         "candidates": coordinate_candidates(ranks, degrees) if candidates is None else candidates}
    d.update(kw)
    return PairCase.from_dict(d)


NILP = [[0, 0], [1, 0]]  # e1 -> e2


def test_slope_examples():
    assert slope(0, 3) == 0
    assert slope(1, 1) > slope(0, 2) == 0
    assert slope(4, 2, 2, 1.5) == slope(2, 1, 2, 1.5)
    assert slope(1, 1, 2, 2.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        slope(1, 0)


def test_invariance_examples():
    c = case([1, 1], [0, 0], NILP)
    assert not phi_invariance_check(c, 0)  # span(e1)
    assert phi_invariance_check(c, 1)      # span(e2)
    d = case([1, 1], [0, 0], [[2, 0], [0, 3]])
    assert all(phi_invariance_check(d, i) for i in range(2))
    with pytest.raises(IndexError):
        phi_invariance_check(c, 5)


def test_unstable_split():
    cert = classify_pair(case([1, 1], [1, -1], [[0, 0], [0, 0]]))
    assert cert.classification == UNSTABLE
    assert cert.witness["name"] == "E0" and cert.witness["slope"] == 1.0


def test_polystable_diagonal():
    cert = classify_pair(case([1, 1], [0, 0], [[1, 0], [0, 2]]))
    assert cert.classification == POLYSTABLE
    assert sorted(cert.decomposition) == ["E0", "E1"]


def test_stable_relative_to_family():
    cert = classify_pair(case([1, 1], [1, -1], NILP))
    assert cert.classification == STABLE and cert.certified
    invariant = {c["name"]: c["invariant"] for c in cert.candidates}
    assert invariant == {"E0": False, "E1": True}
    assert not cert.twist["constant_realizable"]


def test_semistable_nilpotent():
    assert classify_pair(case([1, 1], [0, 0], NILP)).classification == SEMISTABLE


def test_empty_family_not_certified():
    cert = classify_pair(case([2], [0], [[0, 0], [0, 0]], candidates=[]))
    assert cert.classification == STABLE and not cert.certified
    assert classify_pair(case([1], [3], [[0]])).certified


def test_phi_zero_reduces_to_slope_stability():
    for degs, want in (([2, 0], UNSTABLE), ([0, 2], UNSTABLE), ([1, 1], POLYSTABLE)):
        assert classify_pair(case([1, 1], degs, [[0, 0], [0, 0]])).classification == want


def test_basis_change_invariance():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    gi = np.linalg.inv(g)
    base = case([1, 1, 1], [1, 0, -1], [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    moved = PairCase("moved", base.block_ranks, base.degrees, g @ base.phi @ gi,
                     [Candidate(g @ c.basis, c.degree, c.name) for c in base.candidates])
    a, b = classify_pair(base), classify_pair(moved)
    assert a.classification == b.classification
    assert [c["invariant"] for c in a.candidates] == [c["invariant"] for c in b.candidates]


def test_rank_two_summand_polystable():
    # O+O+O with phi = diag(1, 1, 2): summands span(e1, e2) and span(e3)
    cands = [{"name": "A", "basis": [[1, 0, 0], [0, 1, 0]]}, {"name": "B", "basis": [[0, 0, 1]]}]
    cert = classify_pair(case([1, 1, 1], [0, 0, 0], [[1, 0, 0], [0, 1, 0], [0, 0, 2]], cands))
    assert cert.classification == POLYSTABLE


def test_candidate_validation():
    with pytest.raises(ValueError):
        case([1, 1], [0, 0], NILP, candidates=[{"basis": [[1, 0], [0, 1]]}])  # full rank
    with pytest.raises(ValueError):
        case([1, 1], [0, 0], NILP, candidates=[{"basis": [[1, 1]]}])  # degree not inferable
    with pytest.raises(ValueError):
        case([1, 1], [0, 0], NILP, twist_tag="L", complex_dim=2)
    with pytest.raises(jsonschema.ValidationError):
        case([1, 1], [0, 0], NILP, twist_tag="K_Y")
    c = case([1, 1], [0, 0], NILP, candidates=[{"basis": [[1, 1]], "degree": -1}])
    assert c.candidates[0].degree == -1


def test_catalog_roundtrip(tmp_path):
    cases = [case([1, 1], [1, -1], [[0, 0], [0, 0]]).to_dict(),
             case([1, 1], [0, 0], [[1, 0], [0, -1]], name="poly", twist_tag="K_D(-D)").to_dict()]
    p = tmp_path / "cat.json"
    p.write_text(json.dumps(cases))
    certs = classify_catalog(p)
    assert [c["classification"] for c in certs] == [UNSTABLE, POLYSTABLE]
    json.dumps(certs)
    p.write_text(json.dumps([{"name": "bad"}]))
    with pytest.raises(jsonschema.ValidationError):
        classify_catalog(p)
