"""The flat G2 structure on R^7 and its bundle-valued forms.

``PHI0`` and ``STAR_PHI0`` are the standard calibration 3- and 4-forms.
The cross product, chi and psi are derived from them through their
defining identities

    <u x v, w> = phi(u, v, w),   <chi(u, v, w), z> = *phi(u, v, w, z),

while the coordinate tables for chi, psi and sigma ship as JSON fixtures
and are evaluated as tangent-valued forms.  Vector arguments may carry
leading batch dimensions; ``object`` arrays of Fractions stay exact.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from importlib import resources

import numpy as np

from .exterior import (
    DIM,
    FULL,
    DegreeError,
    KForm,
    batched_det,
    det,
    eval_on_vectors,
    form_tensor,
    hodge_star,
    interior_product,
)
from .kernels import eval_form_batch

PHI0 = KForm.from_terms({
    (1, 2, 3): 1, (1, 4, 5): 1, (1, 6, 7): 1, (2, 4, 6): 1,
    (2, 5, 7): -1, (3, 4, 7): -1, (3, 5, 6): -1,
})
STAR_PHI0 = KForm.from_terms({
    (4, 5, 6, 7): 1, (2, 3, 6, 7): 1, (2, 3, 4, 5): 1, (1, 3, 5, 7): 1,
    (1, 3, 4, 6): -1, (1, 2, 5, 6): -1, (1, 2, 4, 7): -1,
})

# Harvey-Lawson normalization of the associator and coassociator equalities
QUOTED_CONSTANT = Fraction(1, 4)


def load_fixture(name: str) -> dict:
    """Load one of the bundled coordinate tables (phi, star_phi, chi, psi, sigma)."""
    text = resources.files(__package__).joinpath("fixtures", f"{name}.json").read_text()
    return json.loads(text)


def _exact(*arrays) -> bool:
    return any(np.asarray(a).dtype == object for a in arrays)


def dot(a, b):
    """Euclidean inner product over the last axis."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def evaluate(form: KForm, *vs):
    """Evaluate a constant form on (possibly batched) vectors."""
    if len(vs) != form.degree:
        raise DegreeError(f"{form.degree}-form evaluated on {len(vs)} vectors")
    arrays = np.broadcast_arrays(*[np.asarray(v) for v in vs])
    if _exact(*arrays):
        lead = arrays[0].shape[:-1]
        if not lead:
            return eval_on_vectors(form, arrays)
        frames = np.stack([a.astype(object) for a in arrays], axis=-2)
        out = np.zeros(lead, dtype=object)
        for k, c in form.items():
            out = out + c * batched_det(frames[..., [i - 1 for i in k]])
        return out
    frames = np.stack(arrays, axis=-2)
    out = eval_form_batch(form, frames)
    return out if out.ndim else float(out)


def gram_det(*vs):
    """Gram determinant |v_1 ^ ... ^ v_k|^2, batched over leading axes."""
    arrays = np.broadcast_arrays(*[np.asarray(v) for v in vs])
    m = np.stack(arrays, axis=-2)
    g = m @ np.swapaxes(m, -1, -2)
    if m.dtype != object:
        out = np.linalg.det(g)
        return out if out.ndim else float(out)
    if not g.shape[:-2]:
        return det(g)
    return batched_det(g)


@dataclass(frozen=True)
class TangentValuedForm:
    """Seven k-forms; component i pairs with the basis vector e_i."""

    degree: int
    components: tuple

    def __post_init__(self):
        if len(self.components) != DIM:
            raise ValueError("a tangent-valued form needs 7 components")
        if any(c.degree != self.degree for c in self.components):
            raise DegreeError("component degrees disagree")

    def __call__(self, *vs):
        if len(vs) != self.degree:
            raise DegreeError(f"{self.degree}-form evaluated on {len(vs)} vectors")
        values = [evaluate(c, *vs) for c in self.components]
        if _exact(*vs):
            lead = np.shape(values[0])
            out = np.empty(lead + (DIM,), dtype=object)
            for i, val in enumerate(values):
                out[..., i] = val
            return out
        return np.stack([np.asarray(v, dtype=float) for v in values], axis=-1)

    def to_json(self) -> dict:
        return {"degree": self.degree, "components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, data: dict) -> "TangentValuedForm":
        comps = tuple(KForm.from_json(c) for c in data["components"])
        return cls(int(data["degree"]), comps)

    @classmethod
    def from_contraction(cls, form: KForm) -> "TangentValuedForm":
        """The form T with <T(v_1..v_{k-1}), e_i> = form(v_1, ..., v_{k-1}, e_i)."""
        sign = -1 if (form.degree - 1) % 2 else 1
        comps = []
        for i in FULL:
            e = np.array([Fraction(int(j == i)) for j in FULL], dtype=object)
            comps.append(sign * interior_product(e, form))
        return cls(form.degree - 1, tuple(comps))


@dataclass(frozen=True)
class G2Structure:
    """A calibration 3-form together with its 4-form companion."""

    phi: KForm
    star_phi: KForm
    label: str = "custom"

    @cached_property
    def phi_tensor(self) -> np.ndarray:
        return form_tensor(self.phi)

    @cached_property
    def psi_form(self) -> TangentValuedForm:
        return TangentValuedForm.from_contraction(self.phi)

    @cached_property
    def chi_form(self) -> TangentValuedForm:
        return TangentValuedForm.from_contraction(self.star_phi)

    @cached_property
    def _cross_terms(self) -> tuple:
        t = self.phi_tensor
        return tuple((i, j, k, t[i, j, k]) for i, j, k in zip(*np.nonzero(t != 0)))

    def cross(self, u, v):
        """u x v, characterised by <u x v, w> = phi(u, v, w)."""
        u, v = np.asarray(u), np.asarray(v)
        if u.dtype != object and v.dtype != object:
            return np.einsum("ijk,...i,...j->...k", self.phi_tensor.astype(float), u, v)
        # object einsum is slow; sum over the nonzero structure constants instead
        u, v = np.broadcast_arrays(u, v)
        out = np.zeros(u.shape, dtype=object)
        for i, j, k, c in self._cross_terms:
            out[..., k] += c * u[..., i] * v[..., j]
        return out

    def psi(self, u, v):
        return self.psi_form(u, v)

    def chi(self, u, v, w):
        return self.chi_form(u, v, w)

    def sigma_formula(self, u, v, w, z):
        """The four-term coassociator expression, evaluated literally."""
        u, v, w, z = (np.asarray(a) for a in (u, v, w, z))
        cross = self.cross
        a = dot(v, cross(w, z))
        b = dot(w, cross(u, z))
        c = dot(u, cross(v, z))
        d = dot(v, cross(u, w))
        return (np.asarray(a)[..., None] * u + np.asarray(b)[..., None] * v
                + np.asarray(c)[..., None] * w + np.asarray(d)[..., None] * z)

    def phi_value(self, u, v, w):
        return evaluate(self.phi, u, v, w)

    def star_phi_value(self, u, v, w, z):
        return evaluate(self.star_phi, u, v, w, z)


STANDARD = G2Structure(PHI0, STAR_PHI0, label="standard")


@lru_cache(maxsize=None)
def table(name: str) -> TangentValuedForm:
    """One of the tabulated coordinate forms (``chi``, ``psi`` or ``sigma``)."""
    return TangentValuedForm.from_json(load_fixture(name))


def cross(u, v):
    return STANDARD.cross(u, v)


def psi(u, v):
    return STANDARD.psi(u, v)


def chi(u, v, w):
    return STANDARD.chi(u, v, w)


def sigma_formula(u, v, w, z):
    return STANDARD.sigma_formula(u, v, w, z)


def sigma_table(u, v, w, z):
    return table("sigma")(u, v, w, z)


def chi_table(u, v, w):
    return table("chi")(u, v, w)


def psi_table(u, v):
    return table("psi")(u, v)


def sigma(u, v, w, z, source: str = "table"):
    if source == "table":
        return sigma_table(u, v, w, z)
    if source == "formula":
        return sigma_formula(u, v, w, z)
    raise ValueError(f"unknown sigma source {source!r}")


def associator_residual(u, v, w, c, structure: G2Structure = STANDARD):
    """phi(u,v,w)^2 + c |chi(u,v,w)|^2 - |u ^ v ^ w|^2."""
    p = structure.phi_value(u, v, w)
    x = structure.chi(u, v, w)
    return p * p + c * dot(x, x) - gram_det(u, v, w)


def coassociator_residual(u, v, w, z, c, source: str = "table"):
    """*phi(u,v,w,z)^2 + c |sigma(u,v,w,z)|^2 - |u ^ v ^ w ^ z|^2."""
    p = STANDARD.star_phi_value(u, v, w, z)
    s = sigma(u, v, w, z, source)
    return p * p + c * dot(s, s) - gram_det(u, v, w, z)


@dataclass
class Calibration:
    """Outcome of solving the residual equation for its constant on basis tuples."""

    identity: str
    c_star: Fraction | None
    consistent: bool
    quoted: Fraction = QUOTED_CONSTANT
    candidates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "identity": self.identity,
            "c_star": None if self.c_star is None else str(self.c_star),
            "consistent": self.consistent,
            "quoted_constant": str(self.quoted),
            "quoted_matches": self.c_star == self.quoted,
            "distinct_candidates": sorted(str(c) for c in set(self.candidates.values())),
        }


def _basis(i: int) -> np.ndarray:
    return np.array([Fraction(int(j == i)) for j in FULL], dtype=object)


def calibrate_constant(identity: str = "associator", source: str = "table") -> Calibration:
    """Solve value^2 + c |T|^2 = Gram for c on every basis tuple with T != 0.

    ``identity`` is ``"associator"`` (chi on triples) or ``"coassociator"``
    (sigma on 4-tuples).  The constant is reported as consistent when all
    basis tuples agree on it.
    """
    if identity == "associator":
        k, form, bundle = 3, PHI0, STANDARD.chi
    elif identity == "coassociator":
        k, form, bundle = 4, STAR_PHI0, lambda *vs: sigma(*vs, source=source)
    else:
        raise ValueError(f"unknown identity {identity!r}")
    candidates = {}
    for idx in itertools.combinations(FULL, k):
        vs = [_basis(i) for i in idx]
        t = bundle(*vs)
        t2 = dot(t, t)
        if t2 == 0:
            continue
        value = eval_on_vectors(form, vs)
        candidates[idx] = (gram_det(*vs) - value * value) / t2
    values = set(candidates.values())
    consistent = len(values) == 1
    return Calibration(identity, values.pop() if consistent else None, consistent, candidates=candidates)


def hodge_check() -> bool:
    return hodge_star(PHI0) == STAR_PHI0
