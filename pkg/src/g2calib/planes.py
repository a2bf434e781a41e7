"""Calibrated and Lagrangian-type 3- and 4-planes in (R^7, phi0).

Classification of planes, the two seven-vector frame completions built
from a Harvey-Lawson triple and from an RS input triple, the tangent and
normal identifications they induce, and residual reports for writing phi
in those frames.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .exterior import DIM, KForm, det, one_form, perm_sign, wedge_all, form_inner_product
from .g2 import PHI0, STANDARD, G2Structure, dot, sigma_table

ASSOCIATIVE = "Associative"
HARVEY_LAWSON = "HarveyLawson"
GENERIC3 = "Generic3"
COASSOCIATIVE = "Coassociative"
RS = "RS"
GENERIC4 = "Generic4"


class DegenerateFrameError(ValueError):
    """The frame vectors are linearly dependent."""


class PreconditionError(ValueError):
    """Input frame violates the construction's preconditions."""


class FrameShapeError(ValueError):
    """A 7-frame does not have the layout the requested variant needs."""


def _as_rows(vectors) -> np.ndarray:
    rows = [np.asarray(v) for v in vectors]
    if any(r.shape != (DIM,) for r in rows):
        raise ValueError("frame vectors must have 7 components")
    if any(r.dtype == object for r in rows):
        return np.array([[Fraction(x) for x in r] for r in rows], dtype=object)
    out = np.array(rows, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("frame has non-finite entries")
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    """An ordered tuple of vectors in R^7 with a cached Gram matrix."""

    vectors: np.ndarray

    @classmethod
    def of(cls, vectors) -> "Frame":
        return cls(_as_rows(vectors))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __getitem__(self, i):
        return self.vectors[i]

    def __iter__(self):
        return iter(self.vectors)

    @property
    def exact(self) -> bool:
        return self.vectors.dtype == object

    @cached_property
    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    @cached_property
    def gram_det(self):
        return det(self.gram)

    def orthonormal_residual(self) -> float:
        eye = np.eye(len(self))
        return float(np.max(np.abs((self.gram - eye).astype(float))))

    def is_orthonormal(self, tol: float = 1e-9) -> bool:
        if self.exact:
            return all(self.gram[i, j] == (i == j) for i in range(len(self)) for j in range(len(self)))
        return self.orthonormal_residual() <= tol

    def to_json(self) -> dict:
        return {"vectors": [[float(x) for x in v] for v in self.vectors]}

    @classmethod
    def from_json(cls, data: dict) -> "Frame":
        vectors = data["vectors"]
        if not isinstance(vectors, list) or not all(isinstance(v, list) and len(v) == DIM for v in vectors):
            raise ValueError("'vectors' must be a list of 7-component lists")
        return cls.of([[float(x) for x in v] for v in vectors])


def _sqrt(x):
    """Square root that stays rational on perfect squares."""
    if isinstance(x, Fraction):
        n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if n * n == x.numerator and d * d == x.denominator:
            return Fraction(n, d)
    return math.sqrt(float(x))


def orthonormalize(frame: Frame, tol: float = 1e-10) -> Frame:
    """Gram-Schmidt in input order; keeps the span and the first direction."""
    out = []
    for v in frame.vectors:
        norm0 = _sqrt(dot(v, v))
        w = v.copy()
        for q in out:
            w = w - dot(q, w) * q
        n2 = dot(w, w)
        if n2 == 0 or (not isinstance(n2, Fraction) and math.sqrt(n2) <= tol * float(norm0)):
            raise DegenerateFrameError("frame vectors are linearly dependent")
        n = _sqrt(n2)
        if isinstance(n, float) and w.dtype == object:
            w = w.astype(float)
            out = [q.astype(float) for q in out]
        out.append(w / n)
    return Frame.of(out)


@dataclass
class PlaneClass:
    kind: str
    phi_value: float
    chi_or_sigma_norm: float
    orientation: int = 0
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "phi_value": self.phi_value,
            "chi_or_sigma_norm": self.chi_or_sigma_norm,
            "orientation": self.orientation,
            "residuals": dict(self.residuals),
        }


def _classify_exact(f: Frame, structure: G2Structure) -> PlaneClass:
    g = f.gram_det
    if g == 0:
        raise DegenerateFrameError("frame vectors are linearly dependent")
    vs = list(f.vectors)
    if len(vs) == 3:
        p = structure.phi_value(*vs)
        x = structure.chi(*vs)
        value = float(p) / math.sqrt(g)
        norm = math.sqrt(float(dot(x, x) / g))
        if p * p == g:
            return PlaneClass(ASSOCIATIVE, value, norm, 1 if p > 0 else -1)
        kind = HARVEY_LAWSON if p == 0 else GENERIC3
        return PlaneClass(kind, value, norm)
    triples = [structure.phi_value(*[vs[i] for i in c]) for c in itertools.combinations(range(4), 3)]
    p = structure.star_phi_value(*vs)
    s = structure.sigma_formula(*vs)
    value = float(p) / math.sqrt(g)
    norm = math.sqrt(float(dot(s, s) / g))
    residuals = {"phi_restricted_max": float(max(abs(t) for t in triples))}
    if all(t == 0 for t in triples):
        return PlaneClass(COASSOCIATIVE, value, norm, 1 if p > 0 else -1, residuals)
    kind = RS if p == 0 else GENERIC4
    return PlaneClass(kind, value, norm, 0, residuals)


def classify_plane(frame: Frame, tol: float = 1e-9, structure: G2Structure = STANDARD) -> PlaneClass:
    """Classify the 3- or 4-plane spanned by ``frame``.

    Floating frames are orthonormalized first, so the zero and volume
    tests below are relative to the plane's own volume; exact frames are
    decided without square roots.
    """
    if not isinstance(frame, Frame):
        frame = Frame.of(frame)
    if len(frame) not in (3, 4):
        raise ValueError("classify_plane needs a 3- or 4-frame")
    if frame.exact:
        return _classify_exact(frame, structure)
    a = list(orthonormalize(frame).vectors)
    if len(a) == 3:
        p = structure.phi_value(*a)
        x = structure.chi(*a)
        norm = math.sqrt(float(dot(x, x)))
        residuals = {"phi_restricted": abs(p), "volume_defect": abs(abs(p) - 1.0)}
        if abs(abs(p) - 1.0) <= tol:
            return PlaneClass(ASSOCIATIVE, p, norm, 1 if p > 0 else -1, residuals)
        kind = HARVEY_LAWSON if abs(p) <= tol else GENERIC3
        return PlaneClass(kind, p, norm, 0, residuals)
    triples = [structure.phi_value(*[a[i] for i in c]) for c in itertools.combinations(range(4), 3)]
    p = structure.star_phi_value(*a)
    s = structure.sigma_formula(*a)
    norm = math.sqrt(float(dot(s, s)))
    tmax = max(abs(t) for t in triples)
    residuals = {"phi_restricted_max": tmax, "star_phi_restricted": abs(p)}
    if tmax <= tol:
        return PlaneClass(COASSOCIATIVE, p, norm, 1 if p > 0 else -1, residuals)
    kind = RS if abs(p) <= tol else GENERIC4
    return PlaneClass(kind, p, norm, 0, residuals)


@dataclass
class CheckResult:
    residual: float
    passed: bool

    def to_json(self) -> dict:
        return {"residual": self.residual, "passed": self.passed}


def _check(residual, tol: float) -> CheckResult:
    r = float(abs(residual))
    return CheckResult(r, r <= tol)


def _max_abs(a) -> float:
    return float(np.max(np.abs(np.asarray(a).astype(float)))) if np.size(a) else 0.0


def _plane_residual(vectors, kind: str) -> float:
    """Distance of the plane spanned by ``vectors`` from being of ``kind``."""
    f = Frame.of(vectors)
    try:
        pc = classify_plane(f)
    except DegenerateFrameError:
        return math.inf
    if kind == HARVEY_LAWSON:
        return abs(pc.phi_value)
    if kind == ASSOCIATIVE:
        return abs(abs(pc.phi_value) - 1.0)
    if kind == RS:
        return abs(pc.phi_value)
    if kind == COASSOCIATIVE:
        return pc.residuals.get("phi_restricted_max", math.inf)
    raise ValueError(kind)


@dataclass
class HLCompletion:
    """The seven-vector frame {u, v, w, R, u x v, v x w, w x u} of an HL triple."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    R: np.ndarray
    frame: Frame
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    @property
    def associative(self) -> Frame:
        return Frame.of(self.frame.vectors[4:])

    @property
    def coassociative(self) -> Frame:
        return Frame.of(self.frame.vectors[:4])

    def to_json(self) -> dict:
        return {
            "frame": self.frame.to_json(),
            "R": [float(x) for x in self.R],
            "checks": {k: c.to_json() for k, c in self.checks.items()},
            "passed": self.passed,
        }


def hl_completion(u, v, w, tol: float = 1e-9) -> HLCompletion:
    """Complete an orthonormal Harvey-Lawson triple to an orthonormal 7-frame.

    R = chi(u, v, w); the checks cover the coassociative plane <u,v,w,R>,
    the associative plane <u x v, v x w, w x u>, their orthogonality, the
    orthonormality of all seven vectors, and chi(u,v,w) = -u x (v x w).

    Raises:
      PreconditionError: if the triple is not orthonormal or not HL.
    """
    base = Frame.of([u, v, w])
    if not base.is_orthonormal(tol):
        raise PreconditionError("input triple is not orthonormal")
    u, v, w = base.vectors
    p = STANDARD.phi_value(u, v, w)
    if (p != 0) if base.exact else abs(p) > tol:
        raise PreconditionError(f"input triple is not Harvey-Lawson: phi(u,v,w) = {float(p)}")
    cross = STANDARD.cross
    R = STANDARD.chi(u, v, w)
    E = [cross(u, v), cross(v, w), cross(w, u)]
    frame = Frame.of([u, v, w, R, *E])
    V = [u, v, w, R]
    checks = {
        "chi_double_cross": _check(_max_abs(R + cross(u, cross(v, w))), tol),
        "coassociative": _check(_plane_residual(V, COASSOCIATIVE), tol),
        "associative": _check(_plane_residual(E, ASSOCIATIVE), tol),
        "orthogonal_splitting": _check(_max_abs(np.array([[dot(a, b) for b in V] for a in E])), tol),
        "orthonormal": _check(frame.orthonormal_residual(), tol),
    }
    return HLCompletion(u, v, w, R, frame, checks)


@dataclass
class RSConstruction:
    """The frame {u, v, u x v, S, u x S, v x S, (u x v) x S} with S = sigma(u, v, u x v, w)."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    S: np.ndarray
    frame: Frame
    checks: dict
    findings: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_json(self) -> dict:
        return {
            "S": [float(x) for x in self.S],
            "frame": self.frame.to_json(),
            "checks": {k: c.to_json() for k, c in self.checks.items()},
            "passed": self.passed,
            "findings": dict(self.findings),
        }


def rs_frame_construction(u, v, w, tol: float = 1e-9) -> RSConstruction:
    """Build S = sigma(u, v, u x v, w) and check the five frame properties.

    The checks are (a) <u,v,uxv,w> is RS, (b) <u,v,uxv,S> is RS,
    (c) <S, uxS, vxS, (uxv)xS> is coassociative, (d) <uxS, vxS, (uxv)xS>
    is HL, and (e) the seven vectors are orthonormal.  ``findings``
    records how S relates to w.

    Raises:
      PreconditionError: unless u, v are orthonormal and w is a unit
        vector orthogonal to u, v and u x v.
    """
    base = Frame.of([u, v, w])
    u, v, w = base.vectors
    cross = STANDARD.cross
    uv = cross(u, v)
    pre = Frame.of([u, v, uv, w])
    if not pre.is_orthonormal(tol):
        raise PreconditionError("need u, v orthonormal and w a unit vector orthogonal to u, v, u x v")
    S = sigma_table(u, v, uv, w)
    uS, vS, uvS = cross(u, S), cross(v, S), cross(uv, S)
    frame = Frame.of([u, v, uv, S, uS, vS, uvS])
    checks = {
        "a_input_rs": _check(_plane_residual([u, v, uv, w], RS), tol),
        "b_completed_rs": _check(_plane_residual([u, v, uv, S], RS), tol),
        "c_coassociative": _check(_plane_residual([S, uS, vS, uvS], COASSOCIATIVE), tol),
        "d_harvey_lawson": _check(_plane_residual([uS, vS, uvS], HARVEY_LAWSON), tol),
        "e_orthonormal": _check(frame.orthonormal_residual(), tol),
    }
    findings = {
        "S_dot_w": float(dot(S, w)),
        "S_plus_w": _max_abs(S + w),
        "S_minus_w": _max_abs(S - w),
    }
    return RSConstruction(u, v, w, S, frame, checks, findings)


@dataclass
class NormalIdentification:
    """Normal frame of an HL plane and the isomorphism X -> X x R onto its complement."""

    normal_frame: Frame
    R: np.ndarray
    checks: dict

    def iso(self, X):
        return STANDARD.cross(X, self.R)

    def inverse(self, V):
        """The tangent X with X x R equal to the R-orthogonal part of V."""
        return STANDARD.cross(self.R, V)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def normal_tangent_identification(c: HLCompletion, tol: float = 1e-9) -> NormalIdentification:
    if not isinstance(c, HLCompletion) or not c.passed:
        raise PreconditionError("need a valid HL completion")
    cross = STANDARD.cross
    R = c.R
    tangent = [c.u, c.v, c.w]
    images = [cross(X, R) for X in tangent]
    full = Frame.of([*tangent, R, *images])
    iso_err = max(abs(float(dot(cross(a, R), cross(b, R)) - dot(a, b))) for a in tangent for b in tangent)
    checks = {
        "complement_orthonormal": _check(full.orthonormal_residual(), tol),
        "isometry": _check(iso_err, tol),
    }
    return NormalIdentification(Frame.of([R, *images]), R, checks)


@dataclass
class RSTangentSplitting:
    """T(RS) = span{u, v, u x v} + S, with X -> X x S onto the normal 3-plane."""

    tangent_frame: Frame
    S: np.ndarray
    normal_frame: Frame
    checks: dict
    findings: dict

    def iso(self, X):
        return STANDARD.cross(X, self.S)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def rs_tangent_identification(c: RSConstruction, tol: float = 1e-9) -> RSTangentSplitting:
    """Tangent/normal identification for the RS plane <u, v, u x v, S>.

    ``findings["quoted_generators_tangent_distance"]`` measures how far
    S x u, S x v, S x w lie from the tangent plane.
    """
    if not isinstance(c, RSConstruction) or not c.passed:
        raise PreconditionError("need a valid RS construction")
    cross = STANDARD.cross
    S = c.S
    uv = cross(c.u, c.v)
    tangent = [c.u, c.v, uv]
    normals = [cross(X, S) for X in tangent]
    full = Frame.of([*tangent, S, *normals])
    iso_err = max(abs(float(dot(cross(a, S), cross(b, S)) - dot(a, b))) for a in tangent for b in tangent)
    plane = orthonormalize(Frame.of([*tangent, S])).vectors
    dist = []
    for g in (cross(S, c.u), cross(S, c.v), cross(S, c.w)):
        g = np.asarray(g, dtype=float)
        n = np.linalg.norm(g)
        proj = sum(float(dot(q, g)) * q.astype(float) for q in plane)
        dist.append(float(np.linalg.norm(g - proj) / n) if n > tol else None)
    checks = {
        "complement_orthonormal": _check(full.orthonormal_residual(), tol),
        "isometry": _check(iso_err, tol),
        "chi_kills_S": _check(_max_abs(STANDARD.chi(*tangent)), tol),
    }
    findings = {"quoted_generators_tangent_distance": dist}
    return RSTangentSplitting(Frame.of([*tangent, S]), S, Frame.of(normals), checks, findings)


def hl_normal_to_tangent(a, V):
    """Batched inverse of X -> X x R on oriented orthonormal HL frames.

    ``a`` has shape (..., 3, 7), ``V`` shape (..., 7).  Returns (X, Rhat)
    where Rhat = chi(a)/|chi(a)| and X = Rhat x V, so that the component
    of V orthogonal to Rhat equals X x Rhat.
    """
    a = np.asarray(a, dtype=float)
    R = STANDARD.chi(a[..., 0, :], a[..., 1, :], a[..., 2, :])
    R = R / np.linalg.norm(R, axis=-1, keepdims=True)
    return STANDARD.cross(R, V), R


def rs_normal_to_coframe(a, V):
    """Batched triple-cross-product pairing of a normal field with an RS plane.

    ``a`` has shape (..., 4, 7) (oriented orthonormal RS frames).  Returns
    coefficients c (..., 4) of the 1-form v = sum_i c_i a_i^# defined by
    c_i = -sign(i, rest) <chi(a_rest), V>, which makes *v equal to the
    restriction of i_V(*phi).
    """
    a = np.asarray(a, dtype=float)
    out = []
    for i in range(4):
        rest = [j for j in range(4) if j != i]
        x = STANDARD.chi(*[a[..., j, :] for j in rest])
        out.append(-perm_sign((i, *rest)) * dot(x, V))
    return np.stack(out, axis=-1)


@dataclass
class ExpansionReport:
    variant: str
    residual: float
    expansion: KForm
    difference: KForm
    terms: list

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "residual": self.residual,
            "difference": self.difference.normalized(1e-12).to_json(),
            "terms": [
                {"label": label, "overlap_with_phi": float(form_inner_product(t, PHI0))}
                for label, t in self.terms
            ],
        }


def _close(a, b, tol) -> bool:
    return _max_abs(np.asarray(a) - np.asarray(b)) <= tol


def _expansion_terms(frame: Frame, variant: str, tol: float) -> list:
    cross = STANDARD.cross
    f = list(frame.vectors)
    d = one_form
    if variant in ("HL-cross", "HL-R"):
        u, v, w, R, uv, vw, wu = f
        if not (_close(uv, cross(u, v), tol) and _close(vw, cross(v, w), tol)
                and _close(wu, cross(w, u), tol) and _close(R, STANDARD.chi(u, v, w), tol)):
            raise FrameShapeError(f"{variant} needs the frame (u, v, w, R, uxv, vxw, wxu)")
        if variant == "HL-cross":
            spec = [
                ("u^v^(uxv)", [u, v, uv], 1), ("v^w^(vxw)", [v, w, vw], 1),
                ("w^u^(wxu)", [w, u, wu], 1), ("u^R^(vxw)", [u, R, vw], 1),
                ("v^R^(wxu)", [v, R, wu], 1), ("w^R^(uxv)", [w, R, uv], 1),
                ("(uxv)^(vxw)^(wxu)", [uv, vw, wu], -1),
            ]
        else:
            wR, uR, vR = cross(w, R), cross(u, R), cross(v, R)
            spec = [
                ("u^v^(wxR)", [u, v, wR], 1), ("v^w^(uxR)", [v, w, uR], 1),
                ("w^u^(vxR)", [w, u, vR], 1), ("u^R^(uxR)", [u, R, uR], 1),
                ("v^R^(vxR)", [v, R, vR], 1), ("w^R^(wxR)", [w, R, wR], 1),
                ("(wxR)^(uxR)^(vxR)", [wR, uR, vR], -1),
            ]
    elif variant == "RS-S":
        u, v, uv, S, uS, vS, uvS = f
        if not (_close(uv, cross(u, v), tol) and _close(uS, cross(u, S), tol)
                and _close(vS, cross(v, S), tol) and _close(uvS, cross(uv, S), tol)):
            raise FrameShapeError("RS-S needs the frame (u, v, uxv, S, uxS, vxS, (uxv)xS)")
        spec = [
            ("u^v^((uxv)xS)", [u, v, uvS], 1), ("v^(uxv)^(uxS)", [v, uv, uS], 1),
            ("(uxv)^u^(vxS)", [uv, u, vS], 1), ("u^S^(uxS)", [u, S, uS], 1),
            ("v^S^(vxS)", [v, S, vS], 1), ("(uxv)^S^((uxv)xS)", [uv, S, uvS], 1),
            ("((uxv)xS)^(uxS)^(vxS)", [uvS, uS, vS], -1),
        ]
    else:
        raise ValueError(f"unknown expansion variant {variant!r}")
    return [(label, sign * wedge_all([d(x) for x in vecs])) for label, vecs, sign in spec]


def frame_expansion_residual(frame: Frame, variant: str, tol: float = 1e-9) -> ExpansionReport:
    """Assemble a wedge expansion of phi in a completion frame and compare with phi0.

    ``variant`` is ``"HL-cross"`` or ``"HL-R"`` for an HL completion frame,
    or ``"RS-S"`` for an RS construction frame.  The residual is
    |expansion - phi0|^2; it is a measurement, not an assertion.
    """
    if not isinstance(frame, Frame):
        frame = Frame.of(frame)
    if len(frame) != 7:
        raise FrameShapeError("expansion needs a 7-frame")
    terms = _expansion_terms(frame, variant, tol)
    expansion = KForm(3)
    for _, t in terms:
        expansion = expansion + t
    diff = expansion - PHI0
    return ExpansionReport(variant, float(form_inner_product(diff, diff)), expansion, diff, terms)


def random_orthonormal_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    u = rng.standard_normal(DIM)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(DIM)
    v -= dot(u, v) * u
    v /= np.linalg.norm(v)
    return u, v


def sample_hl_triple(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random orthonormal (u, v, w) with w orthogonal to u, v and u x v.

    The last condition is exactly phi(u, v, w) = 0, so the triple is HL;
    the same triples are valid inputs for the RS construction.
    """
    u, v = random_orthonormal_pair(rng)
    uv = STANDARD.cross(u, v)
    w = rng.standard_normal(DIM)
    for q in (u, v, uv):
        w -= dot(q, w) * q
    for q in (u, v, uv):
        w -= dot(q, w) * q
    w /= np.linalg.norm(w)
    return u, v, w


def batch_orthonormalize(frames: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt over the second-to-last axis, batched."""
    frames = np.array(frames, dtype=float)
    k = frames.shape[-2]
    for i in range(k):
        for j in range(i):
            frames[..., i, :] -= dot(frames[..., j, :], frames[..., i, :])[..., None] * frames[..., j, :]
        frames[..., i, :] /= np.linalg.norm(frames[..., i, :], axis=-1, keepdims=True)
    return frames
