"""Exterior algebra on R^7 over exact rationals or doubles.

Forms are sparse: a :class:`KForm` maps strictly increasing 1-based index
tuples to coefficients, so ``KForm.from_terms({(1, 2, 3): 1})`` is
``e^{123} = dx^1 ^ dx^2 ^ dx^3``.  Vectors are length-7 numpy arrays; an
``object`` dtype array of :class:`~fractions.Fraction` selects exact
arithmetic, a float array selects floating arithmetic.  Every operation
here is written once and works for both.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

DIM = 7
FULL = tuple(range(1, DIM + 1))


class DegreeError(ValueError):
    """Raised when a form has the wrong degree for an operation."""


@dataclass(frozen=True)
class Context:
    """Scalar backend: exact rationals or doubles with an explicit tolerance."""

    exact: bool = True
    tol: float = 1e-10

    def scalar(self, x):
        if self.exact:
            return Fraction(x)
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite scalar {x!r}")
        return x

    def is_zero(self, x) -> bool:
        if self.exact:
            return x == 0
        return abs(x) <= self.tol

    def vector(self, values: Iterable) -> np.ndarray:
        values = list(values)
        if len(values) != DIM:
            raise ValueError(f"expected {DIM} components, got {len(values)}")
        if self.exact:
            return np.array([Fraction(v) for v in values], dtype=object)
        out = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError("vector has non-finite entries")
        return out

    def basis(self, i: int) -> np.ndarray:
        """The unit vector e_i, 1-based."""
        return self.vector(1 if j == i else 0 for j in FULL)

    def zero(self) -> np.ndarray:
        return self.vector([0] * DIM)


EXACT = Context(exact=True)
FLOAT = Context(exact=False, tol=1e-10)


def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``, by counting inversions; 0 on repeats."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


def det(m) -> object:
    """Determinant of a small square matrix.

    Object (Fraction) matrices use fraction-exact elimination; float
    matrices go through numpy.
    """
    m = np.asarray(m)
    n = m.shape[0]
    if n == 0:
        return Fraction(1) if m.dtype == object else 1.0
    if m.dtype != object:
        return float(np.linalg.det(m.astype(float)))
    a = [[Fraction(x) for x in row] for row in m]
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            result = -result
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            f = a[r][col] / p
            if f:
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return result


class KForm:
    """An alternating k-form on R^7 with sparse coefficients.

    Keys are strictly increasing tuples of 1-based indices.  Zero
    coefficients are never stored.  Instances are immutable.
    """

    __slots__ = ("degree", "_coeffs", "_arrays")

    def __init__(self, degree: int, coeffs: Mapping[tuple, object] | None = None):
        if not 0 <= degree <= DIM:
            raise DegreeError(f"degree {degree} outside 0..{DIM}")
        clean = {}
        for key, c in (coeffs or {}).items():
            key = tuple(key)
            if len(key) != degree:
                raise DegreeError(f"key {key} does not match degree {degree}")
            if list(key) != sorted(set(key)) or (key and not 1 <= key[0] <= key[-1] <= DIM):
                raise ValueError(f"key {key} is not a strictly increasing tuple in 1..{DIM}")
            if c != 0:
                clean[key] = c
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "_coeffs", dict(sorted(clean.items())))
        object.__setattr__(self, "_arrays", None)

    def __setattr__(self, name, value):
        raise AttributeError("KForm is immutable")

    @classmethod
    def from_terms(cls, terms: Mapping[tuple, object], degree: int | None = None) -> "KForm":
        """Build a form from possibly unsorted keys, normalizing signs."""
        acc: dict = {}
        for key, c in terms.items():
            key = tuple(key)
            if degree is None:
                degree = len(key)
            s = perm_sign(key)
            if s == 0:
                continue
            k = tuple(sorted(key))
            acc[k] = acc.get(k, 0) + s * c
        return cls(degree or 0, acc)

    @classmethod
    def basis(cls, idx: Iterable[int], coeff=1) -> "KForm":
        return cls.from_terms({tuple(idx): coeff}, degree=len(tuple(idx)))

    @classmethod
    def zero(cls, degree: int) -> "KForm":
        return cls(degree)

    @property
    def coeffs(self) -> dict:
        return dict(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __getitem__(self, key) -> object:
        key = tuple(key)
        s = perm_sign(key)
        if s == 0:
            return 0
        return s * self._coeffs.get(tuple(sorted(key)), 0)

    def __len__(self) -> int:
        return len(self._coeffs)

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KForm):
            return NotImplemented
        return self.degree == other.degree and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.degree, tuple(self._coeffs.items())))

    def _combine(self, other: "KForm", sign: int) -> "KForm":
        if self.degree != other.degree:
            raise DegreeError(f"cannot add degree {self.degree} and {other.degree}")
        acc = dict(self._coeffs)
        for k, c in other.items():
            acc[k] = acc.get(k, 0) + sign * c
        return KForm(self.degree, acc)

    def __add__(self, other: "KForm") -> "KForm":
        return self._combine(other, 1)

    def __sub__(self, other: "KForm") -> "KForm":
        return self._combine(other, -1)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, {k: -c for k, c in self.items()})

    def __mul__(self, scalar) -> "KForm":
        return KForm(self.degree, {k: c * scalar for k, c in self.items()})

    __rmul__ = __mul__

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"KForm({self.degree}, 0)"
        body = " + ".join(f"{c}*e^{''.join(map(str, k)) or '0'}" for k, c in self.items())
        return f"KForm({self.degree}, {body})"

    def normalized(self, tol: float) -> "KForm":
        """Drop coefficients with absolute value at most ``tol``."""
        return KForm(self.degree, {k: c for k, c in self.items() if abs(c) > tol})

    def as_float(self) -> "KForm":
        return KForm(self.degree, {k: float(c) for k, c in self.items()})

    def term_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(0-based index table, float coefficients), cached for batch kernels."""
        if self._arrays is None:
            idx = np.array([[i - 1 for i in k] for k in self._coeffs], dtype=np.int32)
            idx = idx.reshape(len(self._coeffs), self.degree)
            coef = np.array([float(c) for c in self._coeffs.values()], dtype=float)
            object.__setattr__(self, "_arrays", (np.ascontiguousarray(idx), coef))
        return self._arrays

    def to_json(self) -> dict:
        terms = []
        for k, c in self.items():
            if isinstance(c, Fraction):
                c = str(c) if c.denominator != 1 else int(c)
            elif isinstance(c, (int, np.integer)):
                c = int(c)
            else:
                c = float(c)
            terms.append({"idx": list(k), "c": c})
        return {"degree": self.degree, "terms": terms}

    @classmethod
    def from_json(cls, data: Mapping) -> "KForm":
        terms = {}
        for t in data["terms"]:
            c = t["c"]
            c = Fraction(c) if isinstance(c, (str, int)) else float(c)
            key = tuple(t["idx"])
            terms[key] = terms.get(key, 0) + c
        return cls.from_terms(terms, degree=int(data["degree"]))


def wedge(a: KForm, b: KForm) -> KForm:
    degree = a.degree + b.degree
    if degree > DIM:
        return KForm(DIM)
    acc: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            merged = ka + kb
            s = perm_sign(merged)
            if s == 0:
                continue
            key = tuple(sorted(merged))
            acc[key] = acc.get(key, 0) + s * ca * cb
    return KForm(degree, acc)


def wedge_all(forms: Sequence[KForm]) -> KForm:
    out = KForm(0, {(): 1})
    for f in forms:
        out = wedge(out, f)
    return out


def complement(idx: Sequence[int]) -> tuple[int, ...]:
    return tuple(i for i in FULL if i not in idx)


def hodge_star(a: KForm) -> KForm:
    """Euclidean Hodge star with orientation e^{1234567}."""
    acc = {}
    for k, c in a.items():
        rest = complement(k)
        acc[rest] = perm_sign(k + rest) * c
    return KForm(DIM - a.degree, acc)


def interior_product(v, a: KForm) -> KForm:
    """Contraction i_v a; ``v`` is a length-7 vector (component 0 <-> e_1)."""
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined")
    acc: dict = {}
    for k, c in a.items():
        for pos, i in enumerate(k):
            vi = v[i - 1]
            if vi == 0:
                continue
            key = k[:pos] + k[pos + 1:]
            term = c * vi
            acc[key] = acc.get(key, 0) + (term if pos % 2 == 0 else -term)
    return KForm(a.degree - 1, acc)


def one_form(v) -> KForm:
    """The metric dual 1-form of a vector, v^# = sum v_i e^i."""
    return KForm(1, {(i + 1,): v[i] for i in range(DIM)})


def batched_det(m: np.ndarray) -> np.ndarray:
    """Determinants over the last two axes by cofactor expansion.

    Works for any dtype, so object arrays of ints or Fractions stay exact;
    meant for the small (k <= 4) minors that forms need.
    """
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    total = 0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=-2), j, axis=-1)
        term = m[..., 0, j] * batched_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _matrix(vs) -> np.ndarray:
    rows = [np.asarray(v) for v in vs]
    if any(r.dtype == object for r in rows):
        return np.array([[Fraction(x) for x in r] for r in rows], dtype=object)
    return np.array(rows, dtype=float)


def eval_on_vectors(a: KForm, vs: Sequence) -> object:
    """a(v_1, ..., v_k): the sum over terms of coefficient times the minor."""
    if len(vs) != a.degree:
        raise DegreeError(f"{a.degree}-form evaluated on {len(vs)} vectors")
    if a.degree == 0:
        return a[()]
    m = _matrix(vs)
    total = Fraction(0) if m.dtype == object else 0.0
    for k, c in a.items():
        cols = [i - 1 for i in k]
        total += c * det(m[:, cols])
    return total


def form_inner_product(a: KForm, b: KForm) -> object:
    if a.degree != b.degree:
        raise DegreeError(f"inner product of degree {a.degree} and {b.degree}")
    acc = 0
    for k, c in a.items():
        other = b._coeffs.get(k)
        if other is not None:
            acc += c * other
    return acc


def gram(vs: Sequence) -> np.ndarray:
    m = _matrix(vs)
    return m @ m.T


def simple_volume(vs: Sequence, ctx: Context = FLOAT) -> object:
    """Volume of the parallelotope spanned by ``vs``.

    Exact contexts return the Gram determinant (the squared volume) so
    no square root is taken.
    """
    if not 1 <= len(vs) <= DIM:
        raise ValueError("need between 1 and 7 vectors")
    g = det(gram(vs))
    if ctx.exact:
        return Fraction(g)
    return math.sqrt(max(float(g), 0.0))


def form_tensor(a: KForm) -> np.ndarray:
    """Dense antisymmetric (7,)*k integer or object tensor of a form."""
    exact = any(isinstance(c, Fraction) and c.denominator != 1 for _, c in a.items())
    floaty = any(isinstance(c, float) for _, c in a.items())
    dtype = object if exact else (float if floaty else np.int64)
    t = np.zeros((DIM,) * a.degree, dtype=dtype)
    for k, c in a.items():
        for perm in itertools.permutations(range(a.degree)):
            key = tuple(k[p] - 1 for p in perm)
            t[key] = perm_sign(perm) * c
    return t


def all_basis_forms() -> list[KForm]:
    return [KForm.basis(k) for r in range(DIM + 1) for k in itertools.combinations(FULL, r)]
