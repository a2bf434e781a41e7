"""Deformation experiments for HL and RS tori in flat G2 models.

Submanifolds are sampled on uniform periodic parameter grids.  An
immersion is stored as ``x(theta) = winding @ theta + periodic(theta)``
with an integer winding matrix, so tangent vectors are exact for affine
tori.  Exterior derivatives are periodic central differences applied
coefficient-wise.  In a flat model the normal exponential map is a
straight translation, so ``F(tV)`` is the pullback of phi (or *phi) to
the translated immersion and can be differenced in t directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .exterior import DIM, FULL, KForm, hodge_star, interior_product, perm_sign, wedge
from .g2 import STANDARD, G2Structure, dot
from .kernels import eval_form_batch
from .planes import (
    ASSOCIATIVE,
    COASSOCIATIVE,
    HARVEY_LAWSON,
    RS,
    batch_orthonormalize,
    hl_normal_to_tangent,
    rs_normal_to_coframe,
)

TWO_PI = 2.0 * math.pi
ROUNDOFF_FLOOR = 1e-12
MIN_RESOLUTION = 8


class UnknownSpecError(ValueError):
    """Unknown immersion or profile name."""


class NotNormalError(ValueError):
    """A deformation field has a tangential component."""


class SpecMismatchError(ValueError):
    """Operation does not apply to this kind of submanifold."""


# ---------------------------------------------------------------- grid forms


@dataclass(frozen=True, eq=False)
class SampledForm:
    """A k-form on a periodic parameter grid.

    ``coeffs`` maps sorted 0-based axis tuples to arrays of grid shape;
    ``labels`` names the axes for reporting (e.g. (4, 5, 6) for theta4..6).
    """

    degree: int
    shape: tuple
    spacing: tuple
    coeffs: Mapping[tuple, np.ndarray]
    labels: tuple = ()

    def __post_init__(self):
        if self.degree > len(self.shape):
            raise ValueError("form degree exceeds grid dimension")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, len(self.shape) + 1)))

    @property
    def dim(self) -> int:
        return len(self.shape)

    def like(self, degree: int, coeffs: Mapping) -> "SampledForm":
        return SampledForm(degree, self.shape, self.spacing, dict(coeffs), self.labels)

    def component(self, key) -> np.ndarray:
        key = tuple(key)
        s = perm_sign(key)
        if s == 0:
            return np.zeros(self.shape)
        c = self.coeffs.get(tuple(sorted(key)))
        return np.zeros(self.shape) if c is None else s * c

    def keys(self):
        return [tuple(k) for k in itertools.combinations(range(self.dim), self.degree)]

    def _combine(self, other: "SampledForm", sign: float) -> "SampledForm":
        if self.degree != other.degree or self.shape != other.shape:
            raise ValueError("incompatible sampled forms")
        return self.like(self.degree, {k: self.component(k) + sign * other.component(k) for k in self.keys()})

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c) -> "SampledForm":
        return self.like(self.degree, {k: c * v for k, v in self.coeffs.items()})

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.coeffs.values()))

    def key_label(self, key) -> str:
        return "d" + "^d".join(f"theta{self.labels[a]}" for a in key) if key else "1"

    def to_json(self, dump_points: bool = False) -> dict:
        out = {
            "degree": self.degree,
            "grid": list(self.shape),
            "axis_labels": list(self.labels),
            "components": {},
        }
        for k in self.keys():
            c = self.component(k)
            entry = {"max_abs": float(np.max(np.abs(c)))}
            if dump_points:
                entry["values"] = [float(x) for x in c.ravel()]
            out["components"][self.key_label(k)] = entry
        return out


def periodic_derivative(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second-order central difference on a periodic axis."""
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)


def exterior_derivative(a: SampledForm) -> SampledForm:
    """d(sum f_I dtheta^I) = sum_j D_j f_I dtheta^j ^ dtheta^I.

    d of a top-degree form vanishes; it is returned as the zero top form.
    """
    if a.degree >= a.dim:
        return a.like(a.dim, {})
    acc: dict = {}
    for key, f in a.coeffs.items():
        for j in range(a.dim):
            if j in key:
                continue
            merged = (j,) + key
            k = tuple(sorted(merged))
            term = perm_sign(merged) * periodic_derivative(f, j, a.spacing[j])
            acc[k] = acc[k] + term if k in acc else term
    return a.like(a.degree + 1, acc)


def grid_wedge(a: SampledForm, b: SampledForm) -> SampledForm:
    if a.shape != b.shape:
        raise ValueError("grid mismatch")
    degree = a.degree + b.degree
    if degree > a.dim:
        return a.like(a.dim, {})
    acc: dict = {}
    for ka, fa in a.coeffs.items():
        for kb, fb in b.coeffs.items():
            merged = ka + kb
            s = perm_sign(merged)
            if s == 0:
                continue
            k = tuple(sorted(merged))
            term = s * fa * fb
            acc[k] = acc[k] + term if k in acc else term
    return a.like(degree, acc)


def grid_hodge_star(a: SampledForm, metric: np.ndarray) -> SampledForm:
    """Hodge star of a grid form with respect to a pointwise metric.

    ``metric`` has shape grid + (n, n).  Uses
    *dtheta^I = sqrt|g| sum_K det(g^{-1}[I, K]) sign(K, K^c) dtheta^{K^c}.
    """
    n = a.dim
    ginv = np.linalg.inv(metric)
    vol = np.sqrt(np.abs(np.linalg.det(metric)))
    acc: dict = {}
    keys_k = list(itertools.combinations(range(n), a.degree))
    for I, f in a.coeffs.items():
        for K in keys_k:
            rest = tuple(j for j in range(n) if j not in K)
            if a.degree:
                minor = np.linalg.det(ginv[..., list(I), :][..., :, list(K)])
            else:
                minor = 1.0
            term = perm_sign(K + rest) * vol * minor * f
            acc[rest] = acc[rest] + term if rest in acc else term
    return a.like(n - a.degree, acc)


def codifferential(a: SampledForm, metric: np.ndarray) -> SampledForm:
    """delta = (-1)^{n(k+1)+1} * d * on k-forms of an n-dimensional grid."""
    n, k = a.dim, a.degree
    sign = (-1) ** (n * (k + 1) + 1)
    return grid_hodge_star(exterior_derivative(grid_hodge_star(a, metric)), metric).scale(sign)


# ------------------------------------------------------------------ models


@dataclass(frozen=True)
class FlatModel:
    """Flat 7-torus of circumference ``period`` with a constant G2 structure."""

    period: float = TWO_PI
    structure: G2Structure = STANDARD

    def sample_constant(self, form: KForm, resolution: int = 8, sampled_axes: int = 3) -> SampledForm:
        """The constant ambient form on a 7-dimensional grid.

        Only the first ``sampled_axes`` axes are resolved; the others have a
        single grid point, which is enough to exercise every component.
        """
        shape = (resolution,) * sampled_axes + (1,) * (DIM - sampled_axes)
        h = self.period / resolution
        coeffs = {tuple(i - 1 for i in k): np.full(shape, float(c)) for k, c in form.items()}
        return SampledForm(form.degree, shape, (h,) * DIM, coeffs, FULL)

    def closedness_residual(self, resolution: int = 8, sampled_axes: int = 3) -> dict:
        out = {}
        for name, form in (("phi", self.structure.phi), ("star_phi", self.structure.star_phi)):
            out[name] = exterior_derivative(self.sample_constant(form, resolution, sampled_axes)).max_abs()
        return out


def build_flat_model(period: float = TWO_PI, structure: G2Structure = STANDARD) -> FlatModel:
    if not (isinstance(period, (int, float)) and math.isfinite(period) and period > 0):
        raise ValueError(f"torus period must be positive, got {period!r}")
    return FlatModel(float(period), structure)


# ----------------------------------------------------------- CY x S^1 data


@dataclass
class CYProduct:
    """phi = Re Omega + omega ^ dt and its companion 4-form on R^6 x S^1 (t = axis 7)."""

    phi: KForm
    star_phi: KForm | None
    relabeling: dict | None
    positive: bool

    @property
    def structure(self) -> G2Structure:
        star = self.star_phi if self.star_phi is not None else hodge_star(self.phi)
        return G2Structure(self.phi, star, label="cy-product")

    def to_json(self) -> dict:
        return {
            "phi": self.phi.to_json(),
            "star_phi": None if self.star_phi is None else self.star_phi.to_json(),
            "relabeling": self.relabeling,
            "positive": self.positive,
        }


def standard_cy_data() -> tuple[KForm, KForm, KForm]:
    """(omega, Re Omega, Im Omega) for C^3 with axes (x1, y1, x2, y2, x3, y3) = 1..6."""
    omega = KForm.from_terms({(1, 2): 1, (3, 4): 1, (5, 6): 1})
    re, im = KForm(0, {(): 1}), KForm(0)
    for j in range(3):
        dx, dy = KForm.basis((2 * j + 1,)), KForm.basis((2 * j + 2,))
        re, im = wedge(re, dx) - wedge(im, dy), wedge(re, dy) + wedge(im, dx)
    return omega, re, im


def _touches_t(form: KForm) -> bool:
    return any(DIM in k for k, _ in form.items())


def positive_3form(phi: KForm) -> bool:
    """True when B(x, y) = i_x phi ^ i_y phi ^ phi is definite."""
    if phi.degree != 3:
        return False
    contractions = []
    for i in FULL:
        e = np.array([int(j == i) for j in FULL], dtype=object)
        contractions.append(interior_product(e, phi))
    B = np.zeros((DIM, DIM))
    for i in range(DIM):
        for j in range(DIM):
            B[i, j] = float(wedge(wedge(contractions[i], contractions[j]), phi)[FULL])
    eig = np.linalg.eigvalsh(B)
    return bool(np.all(eig > 1e-12) or np.all(eig < -1e-12))


def find_signed_relabeling(form: KForm, target: KForm) -> dict | None:
    """Signed axis permutation e^i -> s_i e^{p(i)} carrying ``form`` to ``target``.

    Among all matches the one with the fewest sign flips is returned.
    """
    if form.degree != target.degree or len(form) != len(target):
        return None
    target_keys = set(k for k, _ in target.items())
    best = None
    for perm in itertools.permutations(FULL):
        p = dict(zip(FULL, perm))
        mapped = {}
        for k, c in form.items():
            img = tuple(p[i] for i in k)
            mapped[tuple(sorted(img))] = (perm_sign(img), c, k)
        if set(mapped) != target_keys:
            continue
        for signs in itertools.product((1, -1), repeat=DIM):
            flips = signs.count(-1)
            if best is not None and flips >= best[0]:
                continue
            s = dict(zip(FULL, signs))
            if all(ps * c * math.prod(s[i] for i in k) == target[key] for key, (ps, c, k) in mapped.items()):
                best = (flips, p, s)
    if best is None:
        return None
    _, p, s = best
    return {"axis_map": {str(i): p[i] for i in FULL}, "signs": {str(i): s[i] for i in FULL}}


def cy_product_form(omega: KForm, omega_re: KForm, omega_im: KForm | None = None,
                    target: KForm = STANDARD.phi) -> CYProduct:
    """Re Omega + omega ^ e^7, with -e^7 ^ Im Omega + omega^2/2 when Im Omega is given.

    Raises:
      ValueError: if an input uses axis 7 (reserved for the circle factor).
    """
    if omega.degree != 2 or omega_re.degree != 3 or (omega_im is not None and omega_im.degree != 3):
        raise ValueError("need a 2-form omega and 3-forms for Re/Im Omega")
    if any(_touches_t(f) for f in (omega, omega_re, omega_im) if f is not None):
        raise ValueError("Calabi-Yau data must live on axes 1..6")
    dt = KForm.basis((DIM,))
    phi = omega_re + wedge(omega, dt)
    star = None
    if omega_im is not None:
        star = -wedge(dt, omega_im) + wedge(omega, omega) * Fraction(1, 2)
    return CYProduct(phi, star, find_signed_relabeling(phi, target), positive_3form(phi))


@lru_cache(maxsize=None)
def standard_cy_product() -> CYProduct:
    return cy_product_form(*standard_cy_data())


def special_lagrangian_planes() -> dict:
    """Coordinate planes in CY x S^1 axes: phase-0 SL times the circle, and a phase pi/2 SL."""
    e = lambda i: np.array([int(j == i) for j in FULL], dtype=object)  # noqa: E731
    return {
        "sl_phase0_times_circle": [e(1), e(3), e(5), e(7)],
        "sl_phase_pi2": [e(2), e(3), e(5)],
    }


def relabel_axes(axes: Sequence[int], relabeling: dict) -> tuple:
    return tuple(relabeling["axis_map"][str(i)] for i in axes)


# -------------------------------------------------------------- immersions


@dataclass(frozen=True, eq=False)
class SampledSubmanifold:
    """Periodic immersion of a 3- or 4-torus into the flat 7-torus."""

    name: str
    kind: str
    resolution: int
    period: float
    labels: tuple
    winding: np.ndarray
    periodic: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.dim

    @property
    def spacing(self) -> tuple:
        return (self.period / self.resolution,) * self.dim

    def coordinates(self) -> list[np.ndarray]:
        axis = np.arange(self.resolution) * (self.period / self.resolution)
        return list(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    def points(self) -> np.ndarray:
        theta = np.stack(self.coordinates(), axis=-1)
        return np.einsum("ia,...a->...i", self.winding, theta) + self.periodic

    def tangents(self) -> np.ndarray:
        """Central-difference tangent frames, shape grid + (dim, 7)."""
        cols = []
        for a in range(self.dim):
            d = periodic_derivative(self.periodic, a, self.spacing[a])
            cols.append(d + self.winding[:, a])
        return np.stack(cols, axis=-2)

    def metric(self) -> np.ndarray:
        t = self.tangents()
        return t @ np.swapaxes(t, -1, -2)

    def min_volume(self) -> float:
        return float(np.sqrt(np.max([np.min(np.linalg.det(self.metric())), 0.0])))

    def model_form(self, structure: G2Structure = STANDARD) -> KForm:
        return structure.phi if self.dim == 3 else structure.star_phi

    def empty_form(self, degree: int) -> SampledForm:
        return SampledForm(degree, self.shape, self.spacing, {}, self.labels)

    def translated(self, values: np.ndarray, t: float, note: dict | None = None) -> "SampledSubmanifold":
        meta = dict(self.metadata, base=self.name, t=float(t), **(note or {}))
        return SampledSubmanifold(self.name, self.kind, self.resolution, self.period, self.labels,
                                  self.winding, self.periodic + t * values, meta)


def _coordinate_torus(name, kind, labels, resolution, period, periodic=None, meta=None):
    dim = len(labels)
    winding = np.zeros((DIM, dim), dtype=np.int64)
    for a, lab in enumerate(labels):
        winding[lab - 1, a] = 1
    shape = (resolution,) * dim
    if periodic is None:
        periodic = np.zeros(shape + (DIM,))
    return SampledSubmanifold(name, kind, resolution, float(period), tuple(labels), winding, periodic, meta or {})


IMMERSION_SPECS = {
    "hl-coordinate": (HARVEY_LAWSON, (4, 5, 6)),
    "rs-coordinate": (RS, (1, 2, 3, 4)),
    "coassociative-coordinate": (COASSOCIATIVE, (4, 5, 6, 7)),
    "associative-coordinate": (ASSOCIATIVE, (1, 2, 3)),
    "hl-graph": (HARVEY_LAWSON, (4, 5, 6)),
}


def sample_immersion(spec: str, resolution: int, period: float = TWO_PI,
                     perturbation: "Profile | None" = None) -> SampledSubmanifold:
    """Build one of the named tori.

    ``hl-graph`` is the graph of a periodic function over the coordinate
    HL torus in the e7 direction; it stays inside the coassociative plane
    <e4, e5, e6, e7> and is therefore HL for any profile.  ``sl-circle``
    and ``sl-phase-pi2`` are the special Lagrangian coordinate examples
    of the CY x S^1 model, written in phi0 coordinates.
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}")
    if spec in ("sl-circle", "sl-phase-pi2"):
        cy = standard_cy_product()
        planes = special_lagrangian_planes()
        axes = [int(np.flatnonzero(np.asarray(v, dtype=int))[0]) + 1
                for v in planes["sl_phase0_times_circle" if spec == "sl-circle" else "sl_phase_pi2"]]
        labels = tuple(sorted(relabel_axes(axes, cy.relabeling)))
        kind = RS if spec == "sl-circle" else HARVEY_LAWSON
        return _coordinate_torus(spec, kind, labels, resolution, period, meta={"cy_axes": axes})
    if spec not in IMMERSION_SPECS:
        raise UnknownSpecError(f"unknown immersion spec {spec!r}")
    kind, labels = IMMERSION_SPECS[spec]
    if spec != "hl-graph":
        return _coordinate_torus(spec, kind, labels, resolution, period)
    s = _coordinate_torus(spec, kind, labels, resolution, period)
    profile = perturbation or Profile("sin", axis=4, amplitude=0.2)
    periodic = np.zeros(s.shape + (DIM,))
    periodic[..., DIM - 1] = profile(s)
    return _coordinate_torus(spec, kind, labels, resolution, period, periodic, {"perturbation": profile.to_json()})


def pullback_form(form: KForm, s: SampledSubmanifold) -> SampledForm:
    """Evaluate ``form`` on the finite-difference tangent frames at every grid point."""
    if form.degree > s.dim:
        raise ValueError(f"cannot pull a {form.degree}-form back to a {s.dim}-torus")
    t = s.tangents()
    coeffs = {}
    for key in itertools.combinations(range(s.dim), form.degree):
        coeffs[key] = eval_form_batch(form, t[..., list(key), :])
    return SampledForm(form.degree, s.shape, s.spacing, coeffs, s.labels)


# ---------------------------------------------------------------- fields


@dataclass(frozen=True)
class Profile:
    """Scalar function on the parameter grid with an analytic gradient.

    ``kind`` is sin, cos, const or fourier.  ``axis`` names a parameter
    axis by its label.  Fourier modes are (coefficient, wavevector, phase)
    with wavevector given per parameter axis.
    """

    kind: str
    axis: int | None = None
    amplitude: float = 1.0
    modes: tuple = ()

    def _axis_index(self, s: SampledSubmanifold) -> int:
        if self.axis not in s.labels:
            raise UnknownSpecError(f"profile axis {self.axis} is not a parameter of {s.name}")
        return s.labels.index(self.axis)

    def _phase(self, s, theta):
        return 2.0 * math.pi / s.period

    def __call__(self, s: SampledSubmanifold) -> np.ndarray:
        theta = s.coordinates()
        k = 2.0 * math.pi / s.period
        if self.kind == "const":
            return np.full(s.shape, float(self.amplitude))
        if self.kind in ("sin", "cos"):
            x = k * theta[self._axis_index(s)]
            return self.amplitude * (np.sin(x) if self.kind == "sin" else np.cos(x))
        if self.kind == "fourier":
            out = np.zeros(s.shape)
            for c, wave, phase in self.modes:
                out += c * np.cos(k * sum(n * th for n, th in zip(wave, theta)) + phase)
            return self.amplitude * out
        raise UnknownSpecError(f"unknown profile kind {self.kind!r}")

    def gradient(self, s: SampledSubmanifold) -> list[np.ndarray]:
        theta = s.coordinates()
        k = 2.0 * math.pi / s.period
        grads = [np.zeros(s.shape) for _ in range(s.dim)]
        if self.kind == "const":
            return grads
        if self.kind in ("sin", "cos"):
            a = self._axis_index(s)
            x = k * theta[a]
            grads[a] = self.amplitude * k * (np.cos(x) if self.kind == "sin" else -np.sin(x))
            return grads
        if self.kind == "fourier":
            for c, wave, phase in self.modes:
                arg = k * sum(n * th for n, th in zip(wave, theta)) + phase
                for a, n in enumerate(wave):
                    grads[a] = grads[a] - self.amplitude * c * k * n * np.sin(arg)
            return grads
        raise UnknownSpecError(f"unknown profile kind {self.kind!r}")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "amplitude": self.amplitude}
        if self.axis is not None:
            out["axis"] = self.axis
        if self.modes:
            out["modes"] = [{"c": c, "wave": list(w), "phase": p} for c, w, p in self.modes]
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "Profile":
        kind = data.get("kind")
        if kind not in ("sin", "cos", "const", "fourier"):
            raise UnknownSpecError(f"unknown profile kind {kind!r}")
        modes = tuple((float(m["c"]), tuple(int(n) for n in m["wave"]), float(m.get("phase", 0.0)))
                      for m in data.get("modes", ()))
        axis = data.get("axis")
        return cls(kind, None if axis is None else int(axis), float(data.get("amplitude", 1.0)), modes)


def random_profile(rng: np.random.Generator, dim: int, n_modes: int = 3, max_wave: int = 3) -> Profile:
    modes = []
    for _ in range(n_modes):
        wave = tuple(int(n) for n in rng.integers(-max_wave, max_wave + 1, size=dim))
        modes.append((float(rng.normal()), wave, float(rng.uniform(0, TWO_PI))))
    return Profile("fourier", modes=tuple(modes))


@dataclass(frozen=True)
class FieldTerm:
    """profile(theta) * direction; direction is "e1".."e7", "R" or a 7-vector."""

    direction: object
    profile: Profile

    def to_json(self) -> dict:
        d = self.direction if isinstance(self.direction, str) else [float(x) for x in self.direction]
        return {"direction": d, "profile": self.profile.to_json()}

    @classmethod
    def from_json(cls, data: Mapping) -> "FieldTerm":
        d = data.get("direction")
        if isinstance(d, str):
            if d != "R" and d not in {f"e{i}" for i in FULL}:
                raise UnknownSpecError(f"unknown direction {d!r}")
        elif not (isinstance(d, list) and len(d) == DIM):
            raise UnknownSpecError("direction must be 'e1'..'e7', 'R' or a list of 7 numbers")
        return cls(d, Profile.from_json(data.get("profile", {"kind": "const"})))


def unit_normal_R(s: SampledSubmanifold) -> np.ndarray:
    """chi of the orthonormalized tangent frame, normalized; HL tori only."""
    if s.dim != 3:
        raise SpecMismatchError("the R direction is defined for 3-dimensional tori")
    a = batch_orthonormalize(s.tangents())
    R = STANDARD.chi(a[..., 0, :], a[..., 1, :], a[..., 2, :])
    return R / np.linalg.norm(R, axis=-1, keepdims=True)


def _direction_values(s: SampledSubmanifold, direction) -> np.ndarray:
    if isinstance(direction, str):
        if direction == "R":
            return unit_normal_R(s)
        i = int(direction[1:])
        out = np.zeros(s.shape + (DIM,))
        out[..., i - 1] = 1.0
        return out
    return np.broadcast_to(np.asarray(direction, dtype=float), s.shape + (DIM,))


@dataclass(frozen=True, eq=False)
class NormalField:
    values: np.ndarray
    residual: float
    terms: tuple = ()

    def to_json(self) -> dict:
        return {"terms": [t.to_json() for t in self.terms], "orthogonality_residual": self.residual}


def tangential_residual(s: SampledSubmanifold, values: np.ndarray) -> float:
    t = s.tangents()
    g = t @ np.swapaxes(t, -1, -2)
    coeffs = np.linalg.solve(g, np.einsum("...ai,...i->...a", t, values)[..., None])[..., 0]
    proj = np.einsum("...a,...ai->...i", coeffs, t)
    return float(np.max(np.linalg.norm(proj, axis=-1)))


def normal_field(s: SampledSubmanifold, terms: Sequence[FieldTerm], tol: float = 1e-9) -> NormalField:
    """Assemble sum profile * direction and verify it is normal to ``s``.

    Raises:
      NotNormalError: if the tangential part exceeds ``tol`` anywhere.
    """
    values = np.zeros(s.shape + (DIM,))
    for term in terms:
        values = values + term.profile(s)[..., None] * _direction_values(s, term.direction)
    residual = tangential_residual(s, values)
    if residual > tol:
        raise NotNormalError(f"field has a tangential component of size {residual:.3e}")
    return NormalField(values, residual, tuple(terms))


def deform(s: SampledSubmanifold, V: NormalField, t: float, tol: float = 1e-9) -> SampledSubmanifold:
    """Normal exponential map of the flat model: x -> x + t V(x)."""
    if V.values.shape != s.shape + (DIM,):
        raise ValueError("field grid does not match the submanifold")
    if V.residual > tol:
        raise NotNormalError("field is not normal to the submanifold")
    return s.translated(V.values, t, {"field": V.to_json()})


def deformation_map(s: SampledSubmanifold, V: NormalField, t: float,
                    structure: G2Structure = STANDARD) -> SampledForm:
    """F(tV): the model form pulled back from the translated torus."""
    return pullback_form(s.model_form(structure), deform(s, V, t))


# ----------------------------------------------------------- linearization


def _neville_at_zero(xs: Sequence[float], ys: Sequence[np.ndarray]) -> np.ndarray:
    """Polynomial extrapolation of (x_i, y_i) to x = 0 (Neville)."""
    p = [np.asarray(y, dtype=float) for y in ys]
    n = len(xs)
    for m in range(1, n):
        p = [(xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]) for i in range(n - m)]
    return p[0]


def _fit_order(steps: Sequence[float], errors: Sequence[float], floor: float) -> float:
    """Least-squares slope of log(error) against log(step); inf when at round-off."""
    pts = [(math.log(t), math.log(e)) for t, e in zip(steps, errors) if e > floor]
    if len(pts) < 2:
        return math.inf
    xs, ys = zip(*pts)
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def _successive_order(steps: Sequence[float], values: Sequence[SampledForm], floor: float) -> float:
    """Order p of c(t) = a + C t^p from three successive estimates."""
    if len(steps) < 3:
        return math.nan
    t1, t2, t3 = steps[-3:]
    d12 = (values[-3] - values[-2]).max_abs()
    d23 = (values[-2] - values[-1]).max_abs()
    if d12 <= floor and d23 <= floor:
        return math.inf
    if d23 <= floor:
        return math.inf
    target = d12 / d23

    def f(p):
        return (t1 ** p - t2 ** p) / (t2 ** p - t3 ** p) - target

    lo, hi = 0.05, 12.0
    if f(lo) * f(hi) > 0:
        return math.nan
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass
class LinearizationEstimate:
    """Central differences of F along a t-ladder and their extrapolation."""

    ladder: tuple
    central: list
    values_plus: list
    estimate: SampledForm
    observed_order: float


def _as_form_dict(forms: Sequence[SampledForm]) -> tuple[list, list]:
    keys = forms[0].keys()
    return keys, [[f.component(k) for k in keys] for f in forms]


def fd_linearization(s: SampledSubmanifold, V: NormalField, t_ladder: Sequence[float],
                     structure: G2Structure = STANDARD) -> LinearizationEstimate:
    """dF(0)(V) by central differences (F(tV) - F(-tV)) / 2t, Richardson-extrapolated in t^2."""
    ladder = tuple(float(t) for t in t_ladder)
    if len(ladder) < 3:
        raise ValueError("t ladder needs at least three steps")
    if any(t <= 0 for t in ladder) or any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("t ladder must be positive and strictly decreasing")
    central, plus = [], []
    for t in ladder:
        fp = deformation_map(s, V, t, structure)
        fm = deformation_map(s, V, -t, structure)
        central.append((fp - fm).scale(1.0 / (2.0 * t)))
        plus.append(fp)
    keys, comps = _as_form_dict(central)
    xs = [t * t for t in ladder]
    extrap = {k: _neville_at_zero(xs, [c[j] for c in comps]) for j, k in enumerate(keys)}
    estimate = central[0].like(central[0].degree, extrap)
    floor = ROUNDOFF_FLOOR * max(1.0, estimate.max_abs())
    return LinearizationEstimate(ladder, central, plus, estimate, _successive_order(ladder, central, floor))


@dataclass
class CartanPrediction:
    """d(i_V phi) restricted, and the dual-1-form route d*v."""

    iv_form: SampledForm
    cartan: SampledForm
    v: SampledForm
    star_v: SampledForm
    hodge: SampledForm
    star_codifferential: SampledForm


def _check_kind(s: SampledSubmanifold):
    if (s.dim, s.kind) not in ((3, HARVEY_LAWSON), (4, RS)):
        raise SpecMismatchError(f"{s.name} is {s.kind}; need an HL 3-torus or an RS 4-torus")


def cartan_linearization(s: SampledSubmanifold, V: NormalField,
                         structure: G2Structure = STANDARD) -> CartanPrediction:
    """Linearized deformation from Cartan's formula and from the dual 1-form.

    Cartan route: i_V of the model form, pulled back, then the discrete d.
    Dual route: v is the 1-form of the tangent vector paired with V (cross
    product with R on HL tori, the triple cross product on RS tori), *v is
    the Hodge star of the induced metric, then the same discrete d.
    """
    _check_kind(s)
    form = s.model_form(structure)
    iv = s.empty_form(form.degree - 1)
    for i in FULL:
        e = np.array([int(j == i) for j in FULL], dtype=object)
        piece = pullback_form(interior_product(e, form).as_float(), s)
        iv = iv + piece.like(piece.degree, {k: c * V.values[..., i - 1] for k, c in piece.coeffs.items()})
    cartan = exterior_derivative(iv)

    t = s.tangents()
    a = batch_orthonormalize(t)
    if s.dim == 3:
        X, _ = hl_normal_to_tangent(a, V.values)
    else:
        c = rs_normal_to_coframe(a, V.values)
        X = np.einsum("...i,...ij->...j", c, a)
    v = s.empty_form(1).like(1, {(b,): dot(X, t[..., b, :]) for b in range(s.dim)})
    metric = t @ np.swapaxes(t, -1, -2)
    star_v = grid_hodge_star(v, metric)
    hodge = exterior_derivative(star_v)
    star_codiff = grid_hodge_star(codifferential(v, metric), metric)
    return CartanPrediction(iv, cartan, v, star_v, hodge, star_codiff)


def analytic_cartan(s: SampledSubmanifold, V: NormalField, structure: G2Structure = STANDARD) -> SampledForm:
    """Continuum value of d(i_V phi) restricted, for affine tori and constant directions."""
    _check_kind(s)
    if np.any(s.periodic != 0):
        raise SpecMismatchError("analytic prediction needs an affine torus")
    form = s.model_form(structure)
    out = s.empty_form(form.degree)
    for term in V.terms:
        if not isinstance(term.direction, (str, list)) or term.direction == "R":
            raise SpecMismatchError("analytic prediction needs constant directions")
        dvec = _direction_values(s, term.direction)[(0,) * s.dim]
        alpha = pullback_form(interior_product(dvec, form), s)
        grad = term.profile.gradient(s)
        df = s.empty_form(1).like(1, {(a,): grad[a] for a in range(s.dim)})
        out = out + grid_wedge(df, alpha)
    return out


@dataclass
class DeformationReport:
    spec: dict
    fd_derivative: SampledForm
    cartan_prediction: SampledForm
    hodge_prediction: SampledForm
    max_abs_error: float
    convergence_order: float
    fd_self_order: float
    steps: list
    route_gap: float
    sign_adjudication: dict
    codifferential_relation: dict
    trivial_kernel: bool
    tolerance: float
    min_order: float = 1.8

    @property
    def t_exact(self) -> bool:
        return math.isinf(self.convergence_order)

    @property
    def passed(self) -> bool:
        return self.max_abs_error <= self.tolerance and self.convergence_order >= self.min_order

    def to_json(self, dump_points: bool = False) -> dict:
        def num(x):
            return None if (isinstance(x, float) and not math.isfinite(x)) else x

        return {
            "spec": self.spec,
            "max_abs_error": self.max_abs_error,
            "convergence_order": num(self.convergence_order),
            "t_exact": self.t_exact,
            "fd_self_order": num(self.fd_self_order),
            "steps": self.steps,
            "route_gap": self.route_gap,
            "sign_adjudication": self.sign_adjudication,
            "codifferential_relation": self.codifferential_relation,
            "trivial_kernel": self.trivial_kernel,
            "tolerance": self.tolerance,
            "min_order": self.min_order,
            "passed": self.passed,
            "fd_derivative": self.fd_derivative.to_json(dump_points),
            "cartan_prediction": self.cartan_prediction.to_json(dump_points),
            "hodge_prediction": self.hodge_prediction.to_json(dump_points),
        }


def compare_linearizations(s: SampledSubmanifold, V: NormalField, t_ladder: Sequence[float],
                           tolerance: float = 1e-4, structure: G2Structure = STANDARD,
                           spec: dict | None = None) -> DeformationReport:
    """Finite-difference linearization against the Cartan and dual-1-form predictions.

    The t-order is fitted to |central(t) - cartan|; when every ladder error
    sits below the round-off floor the central difference is exact and
    the order is reported as infinite (``t_exact``).
    """
    fd = fd_linearization(s, V, t_ladder, structure)
    cp = cartan_linearization(s, V, structure)
    cartan = cp.cartan
    scale = max(1.0, cartan.max_abs())
    floor = ROUNDOFF_FLOOR * scale
    f0 = deformation_map(s, V, 0.0, structure)
    steps, errors = [], []
    for t, c, fp in zip(fd.ladder, fd.central, fd.values_plus):
        err = (c - cartan).max_abs()
        errors.append(err)
        steps.append({
            "t": t,
            "F_minus_t_prediction": (fp - f0 - cartan.scale(t)).max_abs(),
            "central_minus_prediction": err,
        })
    order = _fit_order(fd.ladder, errors, floor)
    err_plus = (fd.estimate - cartan).max_abs()
    err_minus = (fd.estimate + cartan).max_abs()
    if cartan.max_abs() <= floor and fd.estimate.max_abs() <= floor:
        supported = "undetermined (zero linearization)"
    else:
        supported = "+" if err_plus < err_minus else "-"
    sign = {"error_with_plus": err_plus, "error_with_minus": err_minus, "supported_sign": supported}
    codiff = {
        "d_star_v_minus_star_delta_v": (cp.hodge - cp.star_codifferential).max_abs(),
        "d_star_v_plus_star_delta_v": (cp.hodge + cp.star_codifferential).max_abs(),
        "delta_v_degree": 0,
        "d_star_v_degree": cp.hodge.degree,
    }
    trivial = fd.estimate.max_abs() <= floor and cartan.max_abs() <= floor
    return DeformationReport(
        spec=spec or {"name": s.name, "resolution": s.resolution},
        fd_derivative=fd.estimate,
        cartan_prediction=cartan,
        hodge_prediction=cp.hodge,
        max_abs_error=err_plus,
        convergence_order=order,
        fd_self_order=fd.observed_order,
        steps=steps,
        route_gap=(cartan - cp.hodge).max_abs(),
        sign_adjudication=sign,
        codifferential_relation=codiff,
        trivial_kernel=trivial,
        tolerance=tolerance,
    )


@dataclass
class RefinementReport:
    resolutions: list
    operator_errors: list
    route_gaps: list
    order: float

    @property
    def gaps_within_operator_error(self) -> bool:
        return all(g <= e for g, e in zip(self.route_gaps, self.operator_errors))

    def to_json(self) -> dict:
        return {
            "resolutions": self.resolutions,
            "operator_errors": self.operator_errors,
            "route_gaps": self.route_gaps,
            "order": self.order,
            "gaps_within_operator_error": self.gaps_within_operator_error,
        }


def grid_refinement(spec: str, terms: Sequence[FieldTerm], resolutions: Sequence[int] = (16, 32, 64),
                    period: float = TWO_PI, structure: G2Structure = STANDARD) -> RefinementReport:
    """Discrete-operator error |d_h(i_V phi) - d(i_V phi)| under grid refinement."""
    op_err, gaps = [], []
    for n in resolutions:
        s = sample_immersion(spec, n, period)
        V = normal_field(s, terms)
        cp = cartan_linearization(s, V, structure)
        exact = analytic_cartan(s, V, structure)
        op_err.append((cp.cartan - exact).max_abs())
        gaps.append((cp.cartan - cp.hodge).max_abs())
    hs = [period / n for n in resolutions]
    order = _fit_order(hs, op_err, ROUNDOFF_FLOOR)
    return RefinementReport(list(resolutions), op_err, gaps, order)


# ------------------------------------------------------- JSON experiments


@dataclass
class DeformationSpec:
    spec: str
    resolution: int
    terms: tuple
    t_ladder: tuple
    period: float = TWO_PI
    tolerance: float = 1e-4
    perturbation: Profile | None = None

    @classmethod
    def from_json(cls, data: Mapping) -> "DeformationSpec":
        if not isinstance(data, Mapping):
            raise ValueError("deformation spec must be a JSON object")
        name = data.get("spec")
        if name not in IMMERSION_SPECS and name not in ("sl-circle", "sl-phase-pi2"):
            raise UnknownSpecError(f"unknown immersion spec {name!r}")
        fields = data.get("field")
        if fields is None:
            raise ValueError("deformation spec needs a 'field'")
        if isinstance(fields, Mapping):
            fields = [fields]
        terms = tuple(FieldTerm.from_json(f) for f in fields)
        pert = data.get("perturbation")
        # 3-dimensional tori are cheap enough for a finer default grid
        default_res = 12 if name == "sl-circle" or len(IMMERSION_SPECS.get(name, ("", ()))[1]) == 4 else 32
        return cls(
            spec=name,
            resolution=int(data.get("resolution", default_res)),
            terms=terms,
            t_ladder=tuple(float(t) for t in data.get("t_ladder", (1e-2, 5e-3, 2.5e-3))),
            period=float(data.get("period", TWO_PI)),
            tolerance=float(data.get("tolerance", 1e-4)),
            perturbation=None if pert is None else Profile.from_json(pert),
        )

    def to_json(self) -> dict:
        out = {
            "spec": self.spec,
            "resolution": self.resolution,
            "field": [t.to_json() for t in self.terms],
            "t_ladder": list(self.t_ladder),
            "period": self.period,
            "tolerance": self.tolerance,
        }
        if self.perturbation is not None:
            out["perturbation"] = self.perturbation.to_json()
        return out


def run_deformation(data: Mapping) -> DeformationReport:
    ds = DeformationSpec.from_json(data)
    s = sample_immersion(ds.spec, ds.resolution, ds.period, ds.perturbation)
    V = normal_field(s, ds.terms)
    return compare_linearizations(s, V, ds.t_ladder, ds.tolerance, spec=ds.to_json())
