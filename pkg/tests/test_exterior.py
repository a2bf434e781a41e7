import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2calib.exterior import (
    DIM,
    EXACT,
    FULL,
    DegreeError,
    KForm,
    batched_det,
    complement,
    det,
    eval_on_vectors,
    form_inner_product,
    hodge_star,
    interior_product,
    one_form,
    perm_sign,
    simple_volume,
    wedge,
    wedge_all,
)

from conftest import basis

small = st.integers(-3, 3)


@st.composite
def kforms(draw, degree=None):
    k = draw(st.integers(0, DIM)) if degree is None else degree
    keys = list(itertools.combinations(FULL, k))
    chosen = draw(st.lists(st.sampled_from(keys), max_size=4, unique=True))
    return KForm(k, {key: Fraction(draw(small), draw(st.integers(1, 3))) for key in chosen})


vectors = st.lists(small, min_size=7, max_size=7).map(lambda xs: np.array([Fraction(x) for x in xs], dtype=object))


def test_perm_sign():
    assert perm_sign((1, 2, 3)) == 1
    assert perm_sign((2, 1, 3)) == -1
    assert perm_sign((3, 1, 2)) == 1
    assert perm_sign((1, 1, 2)) == 0


def test_from_terms_normalizes_order_and_sign():
    a = KForm.from_terms({(2, 1, 3): 1, (1, 4, 4): 5})
    assert a == KForm.from_terms({(1, 2, 3): -1})
    assert len(a) == 1


def test_zero_coefficients_are_dropped():
    assert len(KForm(2, {(1, 2): 0})) == 0
    assert not (KForm.basis((1, 2)) - KForm.basis((1, 2)))


@given(kforms(), kforms(), kforms())
@settings(max_examples=40, deadline=None)
def test_wedge_associative(a, b, c):
    if a.degree + b.degree + c.degree > DIM:
        return
    assert wedge(wedge(a, b), c) == wedge(a, wedge(b, c))


@given(kforms(), kforms())
@settings(max_examples=60, deadline=None)
def test_wedge_graded_commutative(a, b):
    if a.degree + b.degree > DIM:
        return
    sign = (-1) ** (a.degree * b.degree)
    assert wedge(a, b) == wedge(b, a) * sign


@given(kforms())
@settings(max_examples=60, deadline=None)
def test_hodge_star_is_an_involution_in_dimension_seven(a):
    assert hodge_star(hodge_star(a)) == a


@given(kforms())
@settings(max_examples=40, deadline=None)
def test_hodge_star_pairs_with_volume(a):
    vol = wedge(a, hodge_star(a))
    assert vol[FULL] == form_inner_product(a, a)


@given(vectors, kforms(), kforms())
@settings(max_examples=40, deadline=None)
def test_interior_product_is_an_antiderivation(v, a, b):
    if a.degree == 0 or a.degree + b.degree > DIM or b.degree == 0:
        return
    lhs = interior_product(v, wedge(a, b))
    rhs = wedge(interior_product(v, a), b) + wedge(a, interior_product(v, b)) * (-1) ** a.degree
    assert lhs == rhs


@given(st.lists(vectors, min_size=3, max_size=3))
@settings(max_examples=40, deadline=None)
def test_wedge_of_one_forms_evaluates_to_determinant(vs):
    ws = [basis(i) for i in (1, 4, 6)]
    form = wedge_all([one_form(v) for v in vs])
    expected = det(np.array([[sum(a * b for a, b in zip(v, w)) for w in ws] for v in vs], dtype=object))
    assert eval_on_vectors(form, ws) == expected


def test_evaluation_is_alternating():
    a = KForm.from_terms({(1, 2, 3): 2, (2, 4, 6): -1})
    u, v, w = basis(1) + basis(4), basis(2), basis(3) + basis(6)
    assert eval_on_vectors(a, [u, v, w]) == -eval_on_vectors(a, [v, u, w])
    assert eval_on_vectors(a, [u, u, w]) == 0


def test_interior_product_of_zero_form_raises():
    with pytest.raises(DegreeError):
        interior_product(basis(1), KForm(0, {(): 1}))


def test_evaluation_degree_mismatch_raises():
    with pytest.raises(DegreeError):
        eval_on_vectors(KForm.basis((1, 2)), [basis(1)])


def test_complement():
    assert complement((1, 2, 3)) == (4, 5, 6, 7)
    assert complement(()) == FULL


def test_json_round_trip_keeps_exact_and_float_coefficients():
    a = KForm.from_terms({(1, 2): Fraction(3, 7), (3, 5): -2, (4, 6): 0.25})
    text = json.dumps(a.to_json())
    b = KForm.from_json(json.loads(text))
    assert a == b
    assert isinstance(b[(1, 2)], Fraction)


def test_json_shape():
    data = KForm.from_terms({(1, 2, 3): 1, (2, 5, 7): -1}).to_json()
    assert data["degree"] == 3
    assert {"idx": [2, 5, 7], "c": -1} in data["terms"]


def test_simple_volume_exact_and_float():
    vs = [basis(1) * 2, basis(2) * 3]
    assert simple_volume(vs, ctx=EXACT) == 36
    assert simple_volume([v.astype(float) for v in vs]) == pytest.approx(6.0)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_batched_det_matches_numpy(n, seed):
    m = np.random.default_rng(seed).standard_normal((5, n, n))
    assert np.allclose(batched_det(m), np.linalg.det(m))


def test_batched_det_exact_on_integers():
    m = np.array([[[2, 1, 0], [1, 3, 1], [0, 1, 4]]], dtype=object)
    assert batched_det(m)[0] == det(m[0]) == 18
