"""Identity suite: structure constants, coordinate tables, residual identities, frame batches.

Exhaustive checks run over basis tuples, random checks over seeded
samples.  With the exact backend both use exact arithmetic (random
integer tuples for the sampled part); the frame batches need square roots and
always run in floating point.  Findings where a quoted formula is not
reproduced go to ``discrepancies`` and never fail the run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exterior import DIM, FULL, KForm, eval_on_vectors, hodge_star, perm_sign
from .g2 import (
    PHI0,
    QUOTED_CONSTANT,
    STANDARD,
    STAR_PHI0,
    associator_residual,
    calibrate_constant,
    coassociator_residual,
    dot,
    load_fixture,
    sigma_formula,
    table,
)
from .planes import (
    frame_expansion_residual,
    hl_completion,
    normal_tangent_identification,
    rs_frame_construction,
    rs_tangent_identification,
    sample_hl_triple,
)

BACKENDS = ("exact", "float")
FRAME_BATCH = 1000
# preconditions of the float frame constructions, separate from the report tolerance
FRAME_PRECONDITION_TOL = 1e-9


@dataclass
class IdentityResult:
    name: str
    cases: int
    max_residual: float
    tolerance: float
    c_star: Fraction | None = None

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "cases": self.cases,
            "c_star": None if self.c_star is None else str(self.c_star),
            "max_residual": self.max_residual,
            "passed": self.passed,
        }


@dataclass
class SuiteReport:
    backend: str
    seed: int
    samples: int
    tolerance: float
    identities: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.identities)

    def identity(self, name: str) -> IdentityResult:
        for r in self.identities:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "seed": self.seed,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "identities": [r.to_json() for r in self.identities],
            "discrepancies": self.discrepancies,
            "all_passed": self.all_passed,
        }


def _basis(i: int, exact: bool) -> np.ndarray:
    if exact:
        return np.array([Fraction(int(j == i)) for j in FULL], dtype=object)
    return np.eye(DIM)[i - 1]


def _mag(x) -> float:
    a = np.asarray(x)
    if a.size == 0:
        return 0.0
    if a.dtype == object:
        return float(max(abs(v) for v in a.ravel()))
    return float(np.max(np.abs(a)))


def random_vectors(rng: np.random.Generator, n: int, exact: bool) -> np.ndarray:
    """n random 7-vectors: standard normal floats, or exact small integers.

    The residual identities are homogeneous of degree 2 in each argument,
    so rational tuples reduce to integer ones by clearing denominators.
    """
    if not exact:
        return rng.standard_normal((n, DIM))
    return rng.integers(-9, 10, size=(n, DIM)).astype(object)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


# ---------------------------------------------------------------- checks


def check_fixtures(tol: float) -> list[IdentityResult]:
    phi = KForm.from_json(load_fixture("phi"))
    star = KForm.from_json(load_fixture("star_phi"))
    mismatch = int(phi != PHI0) + int(star != STAR_PHI0) + int(len(phi) != 7) + int(len(star) != 7)
    hodge = hodge_star(phi) - star
    return [
        IdentityResult("fixture_terms", 2, float(mismatch), tol),
        IdentityResult("hodge_star_phi", 1, float(max((abs(c) for _, c in hodge.items()), default=0)), tol),
    ]


def check_cross_table(exact: bool, tol: float) -> IdentityResult:
    """Every basis product e_i x e_j against the signed Fano triples of phi."""
    expected = {}
    for (a, b, c), s in PHI0.items():
        for i, j, k in ((a, b, c), (b, c, a), (c, a, b)):
            expected[(i, j)] = (k, s)
            expected[(j, i)] = (k, -s)
    worst, cases = 0.0, 0
    for i, j in itertools.combinations(FULL, 2):
        k, s = expected[(i, j)]
        got = STANDARD.cross(_basis(i, exact), _basis(j, exact))
        worst = max(worst, _mag(got - s * _basis(k, exact)))
        cases += 1
    return IdentityResult("cross_product_table", cases, worst, tol)


def _table_vs_identity(name: str, k: int, exact: bool, tol: float):
    ident = STANDARD.chi if name == "chi" else STANDARD.psi
    tabulated = table(name)
    worst, cases, bad = 0.0, 0, []
    for idx in itertools.combinations(FULL, k):
        vs = [_basis(i, exact) for i in idx]
        r = _mag(ident(*vs) - tabulated(*vs))
        if r > 0:
            bad.append(list(idx))
        worst = max(worst, r)
        cases += 1
    return IdentityResult(f"{name}_table", cases, worst, tol), bad


def _chi_defining(source: str, exact: bool) -> float:
    chi = STANDARD.chi if source == "identity" else table("chi")
    worst = 0.0
    for idx in itertools.combinations(FULL, 3):
        vs = [_basis(i, exact) for i in idx]
        x = chi(*vs)
        for l in FULL:
            z = _basis(l, exact)
            worst = max(worst, _mag(dot(x, z) - eval_on_vectors(STAR_PHI0, [*vs, z])))
    return worst


def check_sigma(exact: bool, tol: float):
    """Tabulated sigma against the four-term formula, plus alternation of the formula."""
    tabulated = table("sigma")
    tuples = list(itertools.combinations(FULL, 4))
    perms = list(itertools.permutations(range(4)))
    slots = [np.stack([_basis(idx[i], exact) for idx in tuples]) for i in range(4)]
    base = sigma_formula(*slots)
    diff = np.abs(np.asarray(base - tabulated(*slots)))
    bad = [list(idx) for idx, d in zip(tuples, diff) if max(d) > 0]
    alt = 0.0
    for perm in perms:
        permuted = sigma_formula(*[slots[p] for p in perm])
        alt = max(alt, _mag(permuted - perm_sign(perm) * base))
    return (IdentityResult("sigma_table_vs_formula", len(tuples), _mag(diff), tol),
            IdentityResult("sigma_formula_alternating", len(tuples) * len(perms), alt, tol), bad)


def _residual_identity(name: str, c: Fraction, rng, n: int, exact: bool, tol: float) -> IdentityResult:
    k = 3 if name == "associator" else 4
    vs = [random_vectors(rng, n, exact) for _ in range(k)]
    if not exact:
        c = float(c)
    if name == "associator":
        r = associator_residual(*vs, c)
    else:
        r = coassociator_residual(*vs, c)
    return IdentityResult(f"{name}_random", n, _mag(r), tol, c_star=None)


def check_residual_identities(seed: int, samples: int, exact: bool, tol: float):
    out, cal = [], {}
    for stream, name in enumerate(("associator", "coassociator"), start=1):
        calib = calibrate_constant(name)
        cal[name] = calib
        c = calib.c_star if calib.consistent else QUOTED_CONSTANT
        k = 3 if name == "associator" else 4
        worst = 0.0
        for idx in itertools.combinations(FULL, k):
            vs = [_basis(i, True) for i in idx]
            res = associator_residual(*vs, c) if k == 3 else coassociator_residual(*vs, c)
            worst = max(worst, _mag(res))
        basis = IdentityResult(f"{name}_basis", len(list(itertools.combinations(FULL, k))),
                               worst if calib.consistent else float("inf"), tol, c_star=calib.c_star)
        rand = _residual_identity(name, c, _rng(seed, stream), samples, exact, tol)
        rand.c_star = calib.c_star
        out += [basis, rand]
    return out, cal


def _batch_checks(seed: int, tol: float, n: int = FRAME_BATCH):
    rng = _rng(seed, 10)
    pre = FRAME_PRECONDITION_TOL
    hl_worst, rs_worst, ident_worst = {}, {}, {}
    relation = {"S_plus_w": 0.0, "S_minus_w_min": float("inf")}
    gen_dist = [0.0, 0.0, None]
    rs_fail = {}
    for _ in range(n):
        u, v, w = sample_hl_triple(rng)
        c = hl_completion(u, v, w, pre)
        for k, r in c.checks.items():
            hl_worst[k] = max(hl_worst.get(k, 0.0), r.residual)
        if c.passed:
            ni = normal_tangent_identification(c, pre)
            for k, r in ni.checks.items():
                ident_worst[k] = max(ident_worst.get(k, 0.0), r.residual)
        rs = rs_frame_construction(u, v, w, pre)
        for k, r in rs.checks.items():
            rs_worst[k] = max(rs_worst.get(k, 0.0), r.residual)
            rs_fail[k] = rs_fail.get(k, 0) + int(r.residual > tol)
        relation["S_plus_w"] = max(relation["S_plus_w"], rs.findings["S_plus_w"])
        relation["S_minus_w_min"] = min(relation["S_minus_w_min"], rs.findings["S_minus_w"])
        if rs.passed:
            split = rs_tangent_identification(rs, pre)
            for i, d in enumerate(split.findings["quoted_generators_tangent_distance"]):
                if d is not None:
                    gen_dist[i] = max(gen_dist[i] or 0.0, d)
    results = [IdentityResult(f"hl_completion.{k}", n, v, tol) for k, v in hl_worst.items()]
    results += [IdentityResult(f"hl_normal_identification.{k}", n, v, tol) for k, v in ident_worst.items()]
    results += [IdentityResult(f"rs_construction.{k}", n, v, tol) for k, v in rs_worst.items()]
    return results, relation, gen_dist, rs_fail


# ----------------------------------------------------------------- suite


def run_identity_suite(seed: int = 0, samples: int = 1000, tolerance: float = 1e-9,
                       backend: str = "exact") -> SuiteReport:
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    if samples < 0:
        raise ValueError("samples must be non-negative")
    if not tolerance >= 0:
        raise ValueError("tolerance must be non-negative")
    exact = backend == "exact"
    rep = SuiteReport(backend, int(seed), int(samples), float(tolerance))
    ids, disc = rep.identities, rep.discrepancies

    ids += check_fixtures(tolerance)
    ids.append(check_cross_table(exact, tolerance))
    for name, k in (("chi", 3), ("psi", 2)):
        res, bad = _table_vs_identity(name, k, exact, tolerance)
        ids.append(res)
        if bad:
            disc.append({"name": f"{name}_table_mismatch", "tuples": bad})
    defining = {src: _chi_defining(src, exact) for src in ("identity", "table")}
    ids.append(IdentityResult("chi_defining_pairing.table", 35 * 7, defining["table"], tolerance))
    if defining["table"] > 0:
        disc.append({"name": "chi_source_consistency",
                     "max_defect": defining,
                     "self_consistent": [s for s, v in defining.items() if v == 0]})
    sig, alt, bad = check_sigma(exact, tolerance)
    ids += [sig, alt]
    if bad:
        disc.append({"name": "sigma_formula_vs_table", "tuples": bad})

    residual_ids, cal = check_residual_identities(seed, samples, exact, tolerance)
    ids += residual_ids
    for name, calib in cal.items():
        if not calib.consistent or calib.c_star != QUOTED_CONSTANT:
            idx = (4, 5, 6) if name == "associator" else (1, 2, 3, 4)
            e = [_basis(i, True) for i in idx]
            quoted = (associator_residual(*e, QUOTED_CONSTANT) if name == "associator"
                      else coassociator_residual(*e, QUOTED_CONSTANT))
            disc.append({
                "name": f"{name}_quoted_constant",
                "quoted": str(QUOTED_CONSTANT),
                "calibrated": calib.to_json()["c_star"],
                "example_tuple": list(idx),
                "residual_with_quoted": str(quoted),
            })

    batch, relation, gen_dist, rs_fail = _batch_checks(seed, tolerance)
    ids += batch
    failing = {k: v for k, v in rs_fail.items() if v}
    if failing:
        disc.append({"name": "rs_construction_failures", "tolerance": tolerance, "failed_samples": failing})
    disc.append({
        "name": "rs_sigma_output_relation",
        "observation": "S = -w" if relation["S_plus_w"] <= tolerance else "S != -w",
        "max_abs_S_plus_w": relation["S_plus_w"],
    })
    if any(d is None or d > tolerance for d in gen_dist):
        # None marks a generator that vanished on every sample
        disc.append({
            "name": "rs_quoted_tangent_generators",
            "distance_from_tangent_plane": dict(zip(("Sxu", "Sxv", "Sxw"), gen_dist)),
        })

    hl = hl_completion(*[_basis(i, True) for i in (4, 5, 6)])
    rs = rs_frame_construction(*[_basis(i, True) for i in (1, 2, 4)])
    for variant, frame in (("HL-cross", hl.frame), ("HL-R", hl.frame), ("RS-S", rs.frame)):
        er = frame_expansion_residual(frame, variant)
        ids_name = f"expansion.{variant}"
        if er.residual != 0:
            disc.append({"name": ids_name, "residual": er.residual,
                         "difference": er.difference.normalized(1e-12).to_json()})
    return rep
