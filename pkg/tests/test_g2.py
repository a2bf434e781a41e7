import itertools
import re
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2calib.exterior import FULL, KForm, eval_on_vectors, hodge_star
from g2calib.g2 import (
    PHI0,
    QUOTED_CONSTANT,
    STANDARD,
    STAR_PHI0,
    G2Structure,
    TangentValuedForm,
    associator_residual,
    calibrate_constant,
    chi_table,
    coassociator_residual,
    cross,
    dot,
    evaluate,
    gram_det,
    hodge_check,
    load_fixture,
    psi_table,
    sigma,
    sigma_formula,
    table,
)

from conftest import basis

# Second, independent transcription of the reference coordinate data.
REFERENCE_PHI = "e123 + e145 + e167 + e246 - e257 - e347 - e356"
REFERENCE_STAR_PHI = "e4567 + e2367 + e2345 + e1357 - e1346 - e1256 - e1247"
REFERENCE_CHI = [
    "e256 + e247 + e346 - e357",
    "-e156 - e147 - e345 - e367",
    "e157 - e146 + e245 + e267",
    "e127 + e136 - e235 - e567",
    "e126 - e137 + e234 + e467",
    "-e125 - e134 - e237 - e457",
    "-e124 + e135 + e236 + e456",
]
REFERENCE_PSI = [
    "e23 + e45 + e67",
    "e46 - e57 - e13",
    "e12 - e47 - e56",
    "e37 - e15 - e26",
    "e14 + e27 + e36",
    "e24 - e17 - e35",
    "e16 - e25 - e34",
]
REFERENCE_SIGMA = [
    "-e1347 - e1356 - e1257 + e1246",
    "-e2347 - e2356 - e1267 - e1245",
    "-e2346 + e2357 - e1367 - e1345",
    "e3456 + e2457 - e1467 - e1234",
    "-e3457 + e2456 - e1567 - e1235",
    "-e3467 - e2567 - e1456 - e1236",
    "e3567 - e2467 - e1457 - e1237",
]


def parse_terms(text: str) -> KForm:
    terms = re.findall(r"([+-]?)\s*e(\d+)", text)
    degree = len(terms[0][1])
    return KForm.from_terms({tuple(int(c) for c in idx): -1 if s == "-" else 1 for s, idx in terms}, degree)


def parse_table(rows) -> TangentValuedForm:
    comps = tuple(parse_terms(r) for r in rows)
    return TangentValuedForm(comps[0].degree, comps)


exact_vec = st.lists(st.integers(-4, 4), min_size=7, max_size=7).map(lambda xs: np.array(xs, dtype=object))
float_vec = st.lists(st.floats(-3, 3, allow_nan=False), min_size=7, max_size=7).map(np.array)


def test_phi_and_star_phi_fixtures_match_reference_terms():
    assert KForm.from_json(load_fixture("phi")) == parse_terms(REFERENCE_PHI) == PHI0
    assert KForm.from_json(load_fixture("star_phi")) == parse_terms(REFERENCE_STAR_PHI) == STAR_PHI0
    assert len(PHI0) == 7 and len(STAR_PHI0) == 7


def test_hodge_star_of_phi():
    assert hodge_check()
    assert hodge_star(PHI0) == STAR_PHI0
    assert hodge_star(STAR_PHI0) == PHI0


@pytest.mark.parametrize("name,rows", [("chi", REFERENCE_CHI), ("psi", REFERENCE_PSI), ("sigma", REFERENCE_SIGMA)])
def test_table_fixtures_match_reference_tables(name, rows):
    assert table(name).components == parse_table(rows).components


def test_chi_from_identity_matches_table_on_all_basis_triples():
    for idx in itertools.combinations(FULL, 3):
        vs = [basis(i) for i in idx]
        assert np.array_equal(STANDARD.chi(*vs), chi_table(*vs)), idx


def test_psi_from_identity_matches_table_and_cross():
    for i, j in itertools.combinations(FULL, 2):
        u, v = basis(i), basis(j)
        assert np.array_equal(STANDARD.psi(u, v), psi_table(u, v))
        assert np.array_equal(cross(u, v), psi_table(u, v))


def test_sigma_formula_matches_table_on_basis_tuples():
    for idx in itertools.combinations(FULL, 4):
        vs = [basis(i) for i in idx]
        assert np.array_equal(sigma_formula(*vs), sigma(*vs, source="table")), idx


def test_sigma_worked_value():
    # e1..e4 is an RS plane; sigma picks out -e4 from the e4 row (-e1234)
    s = sigma(*[basis(i) for i in (1, 2, 3, 4)])
    assert list(s) == [0, 0, 0, -1, 0, 0, 0]


@given(exact_vec, exact_vec, exact_vec, exact_vec)
@settings(max_examples=60, deadline=None)
def test_sigma_formula_agrees_with_table_and_alternates(u, v, w, z):
    s = sigma_formula(u, v, w, z)
    assert np.array_equal(s, sigma(u, v, w, z, source="table"))
    assert np.array_equal(sigma_formula(v, u, w, z), -s)
    assert not np.any(sigma_formula(u, u, w, z))


@given(exact_vec, exact_vec, exact_vec)
@settings(max_examples=60, deadline=None)
def test_cross_product_identities_exact(u, v, w):
    x = cross(u, v)
    assert dot(x, u) == 0 and dot(x, v) == 0
    assert np.array_equal(cross(v, u), -x)
    assert dot(x, x) == gram_det(u, v)
    assert dot(x, w) == evaluate(PHI0, u, v, w)


@given(exact_vec, exact_vec, exact_vec, exact_vec)
@settings(max_examples=60, deadline=None)
def test_chi_pairs_with_star_phi(u, v, w, z):
    assert dot(STANDARD.chi(u, v, w), z) == evaluate(STAR_PHI0, u, v, w, z)


@given(exact_vec, exact_vec, exact_vec)
@settings(max_examples=60, deadline=None)
def test_associator_equality_with_unit_constant(u, v, w):
    assert associator_residual(u, v, w, 1) == 0


@given(exact_vec, exact_vec, exact_vec, exact_vec)
@settings(max_examples=40, deadline=None)
def test_coassociator_equality_with_unit_constant(u, v, w, z):
    assert coassociator_residual(u, v, w, z, 1) == 0


@given(float_vec, float_vec, float_vec)
@settings(max_examples=60, deadline=None)
def test_float_backend_agrees_with_exact(u, v, w):
    ue, ve, we = (np.array([Fraction(x) for x in a], dtype=object) for a in (u, v, w))
    assert evaluate(PHI0, u, v, w) == pytest.approx(float(evaluate(PHI0, ue, ve, we)), abs=1e-9)
    assert np.allclose(STANDARD.chi(u, v, w), STANDARD.chi(ue, ve, we).astype(float), atol=1e-9)


@pytest.mark.parametrize("identity", ["associator", "coassociator"])
def test_calibrated_constant_is_one_not_the_quoted_quarter(identity):
    cal = calibrate_constant(identity)
    assert cal.consistent and cal.c_star == 1
    assert QUOTED_CONSTANT == Fraction(1, 4)
    out = cal.to_json()
    assert out["c_star"] == "1" and out["quoted_matches"] is False


def test_quoted_quarter_fails_on_a_harvey_lawson_triple():
    e = [basis(i) for i in (4, 5, 6)]
    assert associator_residual(*e, QUOTED_CONSTANT) == Fraction(-3, 4)
    assert associator_residual(*e, 1) == 0


def test_sigma_formula_option_in_calibration():
    assert calibrate_constant("coassociator", source="formula").c_star == 1
    with pytest.raises(ValueError):
        calibrate_constant("nope")


def test_float_residuals_on_random_tuples(rng):
    vs = [rng.standard_normal((2000, 7)) for _ in range(4)]
    assert np.max(np.abs(associator_residual(*vs[:3], 1.0))) < 1e-9
    assert np.max(np.abs(coassociator_residual(*vs, 1.0))) < 1e-9


def test_tangent_valued_form_json_round_trip():
    t = table("chi")
    assert TangentValuedForm.from_json(t.to_json()) == t


def test_contraction_reproduces_defining_pairings():
    psi = TangentValuedForm.from_contraction(PHI0)
    for idx in itertools.permutations(FULL, 3):
        vs = [basis(i) for i in idx]
        assert dot(psi(*vs[:2]), vs[2]) == eval_on_vectors(PHI0, vs)


def test_custom_structure_uses_its_own_forms():
    # phi with axes 1 and 2 swapped is another G2 3-form
    swap = {1: 2, 2: 1}
    phi = KForm.from_terms({tuple(swap.get(i, i) for i in k): c for k, c in PHI0.items()})
    g = G2Structure(phi, hodge_star(phi), label="swapped")
    u, v = basis(1), basis(3)
    x = g.cross(u, v)
    assert dot(x, x) == gram_det(u, v)
    assert dot(x, basis(2)) == eval_on_vectors(phi, [u, v, basis(2)])
