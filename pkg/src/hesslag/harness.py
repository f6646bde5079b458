"""Scenario ingestion, suite execution and report emission.

A scenario is a JSON document::

    {"name": "neg-log-m1", "kind": "hessian", "dim": 1,
     "potential": "-log(y1)",
     "samples": {"lo": [1], "hi": [4], "count": 20, "seed": 1},
     "checks": ["identities", "conical"], "tolerances": {"conical": 1e-13}}

Hessian points are ``y`` vectors; Lagrange and direct-metric points are flat
``x + y`` vectors of length ``2m``.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import laggeo
from .errors import (
    DomainError,
    ExprSyntaxError,
    HessLagError,
    NotPositiveDefiniteError,
    NullConeError,
    UnknownFunctionError,
    UnknownVariableError,
    ValidationError,
)
from .expr import ScalarField, parse
from .hessgeo import (
    IDENTITY,
    HessPackage,
    build_package,
    conical_curvature,
    constant_curvature_audit,
    identity_suite,
    q_formula_audit,
    symmetry_suite,
)
from .jet import DerivStack, deriv_stack, fd_probe
from .rng import SplitMix64
from .tensor import flat, gen_eig, invert, pair_basis, quad_form

KINDS = ("hessian", "lagrange", "direct-metric")
CHECKS = (
    "identities", "symmetries", "q-formula-audit", "conical", "constant-curvature",
    "eigen", "kahler", "half-q", "homogeneity", "fd-audit",
)
DIRECT_CHECKS = ("kahler", "fd-audit")
MAX_DIM = 6

# primary (relative) tolerance per check
DEFAULT_TOLERANCES = {
    "identities": 1e-9,
    "symmetries": 1e-10,
    "q-formula-audit": 1e-9,
    "conical": 1e-14,
    "constant-curvature": 1e-10,
    "eigen": 1e-10,
    "kahler": 1e-12,
    "half-q": 1e-8,
    "homogeneity": 1e-10,
    "fd-audit": 1e-5,
}
FD_ORDER4_TOLERANCE = 1e-3
ALGEBRAIC_TOLERANCE = 1e-12

EXIT_OK, EXIT_CHECK_FAILED, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3


# --- scenario -------------------------------------------------------------------

@dataclass
class Scenario:
    kind: str
    dim: int
    fields: dict[str, Any]                 # expression text as given
    samples: Any
    checks: list[str]
    tolerances: dict[str, float] = field(default_factory=dict)
    nonlinear_connection: Any = "spray"
    name: str | None = None
    # parsed
    potential: ScalarField | None = None
    lagrangian: laggeo.LagrangianChart | None = None
    metric: laggeo.DirectMetricChart | None = None
    connection: list[list[ScalarField]] | None = None

    @property
    def point_length(self) -> int:
        return self.dim if self.kind == "hessian" else 2 * self.dim

    def echo(self) -> dict:
        out: dict[str, Any] = {}
        if self.name is not None:
            out["name"] = self.name
        out["kind"] = self.kind
        out["dim"] = self.dim
        out.update(self.fields)
        out["samples"] = self.samples
        out["checks"] = list(self.checks)
        out["tolerances"] = dict(self.tolerances)
        if self.kind == "lagrange":
            out["nonlinear_connection"] = self.nonlinear_connection
        return out


def _expr(text: Any, names: Sequence[str], where: str) -> ScalarField:
    if not isinstance(text, str):
        raise ValidationError(where, "expected an expression string")
    try:
        return parse(text, names)
    except (ExprSyntaxError, UnknownVariableError, UnknownFunctionError) as exc:
        raise ValidationError(where, str(exc)) from None


def _number_list(value: Any, length: int, where: str) -> list[float]:
    if not isinstance(value, list) or len(value) != length:
        raise ValidationError(where, f"expected a list of {length} numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(where, "expected finite numbers")
        out.append(float(v))
    return out


def validate(doc: Any) -> Scenario:
    """Build a :class:`Scenario` from a decoded JSON document or raise ValidationError."""
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "scenario must be a JSON object")
    known = {"name", "kind", "dim", "potential", "lagrangian", "metric_components",
             "samples", "checks", "tolerances", "nonlinear_connection"}
    extra = sorted(set(doc) - known)
    if extra:
        raise ValidationError(extra[0], "unknown field")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ValidationError("name", "expected a string")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ValidationError("kind", f"expected one of {list(KINDS)}")
    dim = doc.get("dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or not 1 <= dim <= MAX_DIM:
        raise ValidationError("dim", f"expected an integer in 1..{MAX_DIM}")
    ys = laggeo.y_names(dim)
    xy = laggeo.x_names(dim) + ys

    scenario = Scenario(kind=kind, dim=dim, fields={}, samples=None, checks=[], name=name)
    expected_field = {"hessian": "potential", "lagrange": "lagrangian",
                      "direct-metric": "metric_components"}[kind]
    for other in ("potential", "lagrangian", "metric_components"):
        if other != expected_field and other in doc:
            raise ValidationError(other, f"not allowed for kind {kind!r}")
    if expected_field not in doc:
        raise ValidationError(expected_field, "missing")
    text = doc[expected_field]
    scenario.fields[expected_field] = text
    if kind == "hessian":
        scenario.potential = _expr(text, ys, "potential")
    elif kind == "lagrange":
        scenario.lagrangian = laggeo.LagrangianChart(_expr(text, xy, "lagrangian"), dim)
    else:
        if not isinstance(text, list) or len(text) != dim or any(
            not isinstance(r, list) or len(r) != dim for r in text
        ):
            raise ValidationError("metric_components", f"expected a {dim}x{dim} array")
        comps = tuple(
            tuple(_expr(t, xy, f"metric_components[{i}][{j}]") for j, t in enumerate(row))
            for i, row in enumerate(text)
        )
        for i in range(dim):
            for j in range(i + 1, dim):
                if text[i][j] != text[j][i]:
                    raise ValidationError(f"metric_components[{i}][{j}]", "metric must be symmetric")
        scenario.metric = laggeo.DirectMetricChart(comps, dim)

    length = scenario.point_length
    samples = doc.get("samples")
    if isinstance(samples, list):
        if not samples:
            raise ValidationError("samples", "empty point list")
        scenario.samples = [_number_list(p, length, f"samples[{i}]") for i, p in enumerate(samples)]
    elif isinstance(samples, dict):
        if set(samples) - {"lo", "hi", "count", "seed"}:
            raise ValidationError("samples", "box takes lo, hi, count, seed")
        lo = _number_list(samples.get("lo"), length, "samples.lo")
        hi = _number_list(samples.get("hi"), length, "samples.hi")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValidationError("samples", "lo must not exceed hi")
        count = samples.get("count")
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ValidationError("samples.count", "expected a positive integer")
        seed = samples.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError("samples.seed", "expected a non-negative integer")
        scenario.samples = {"lo": lo, "hi": hi, "count": count, "seed": seed}
    else:
        raise ValidationError("samples", "expected a point list or a box")

    allowed = DIRECT_CHECKS if kind == "direct-metric" else CHECKS
    checks = doc.get("checks", list(allowed))
    if not isinstance(checks, list) or not checks:
        raise ValidationError("checks", "expected a non-empty list")
    for c in checks:
        if c not in CHECKS:
            raise ValidationError("checks", f"unknown check {c!r}")
        if c not in allowed:
            raise ValidationError("checks", f"check {c!r} not applicable to kind {kind!r}")
    scenario.checks = [c for c in CHECKS if c in checks]

    tolerances = doc.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ValidationError("tolerances", "expected an object")
    for k, v in tolerances.items():
        if k not in CHECKS:
            raise ValidationError("tolerances", f"unknown check {k!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ValidationError(f"tolerances.{k}", "expected a positive number")
    scenario.tolerances = {k: float(v) for k, v in tolerances.items()}

    if "nonlinear_connection" in doc:
        if kind != "lagrange":
            raise ValidationError("nonlinear_connection", "only for kind 'lagrange'")
        nc = doc["nonlinear_connection"]
        if nc == "spray":
            pass
        elif isinstance(nc, list) and len(nc) == dim and all(
            isinstance(r, list) and len(r) == dim for r in nc
        ):
            scenario.connection = [
                [_expr(t, xy, f"nonlinear_connection[{i}][{j}]") for j, t in enumerate(row)]
                for i, row in enumerate(nc)
            ]
        else:
            raise ValidationError("nonlinear_connection", f"expected 'spray' or a {dim}x{dim} array")
        scenario.nonlinear_connection = nc
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("<root>", f"invalid JSON: {exc}") from None
    return validate(doc)


def builtin_names() -> list[str]:
    root = resources.files("hesslag").joinpath("corpus")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> Scenario:
    root = resources.files("hesslag").joinpath("corpus")
    entry = root.joinpath(f"{name}.json")
    if not entry.is_file():
        raise ValidationError("<scenario>", f"no built-in scenario named {name!r}")
    return validate(json.loads(entry.read_text()))


def resolve_scenario(ref: str) -> Scenario:
    """A scenario file path, or the name of a built-in scenario."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    if ref in builtin_names():
        return load_builtin(ref)
    raise ValidationError("<scenario>", f"no such file or built-in scenario: {ref!r}")


def sample_points(scenario: Scenario, seed: int | None = None) -> tuple[list[list[float]], int | None]:
    """Sample points and the seed actually used (``None`` for explicit point lists)."""
    s = scenario.samples
    if isinstance(s, list):
        return [list(p) for p in s], seed
    used = s["seed"] if seed is None else seed
    rng = SplitMix64(used)
    return [rng.vector(s["lo"], s["hi"]) for _ in range(s["count"])], used


# --- per-point evaluation ---------------------------------------------------------

class _Point:
    """Lazily computed objects at one sample point."""

    def __init__(self, scenario: Scenario, coords: Sequence[float]):
        self.scenario = scenario
        self.coords = list(coords)
        m = scenario.dim
        if scenario.kind == "hessian":
            self.x, self.y = [], list(coords)
        else:
            self.x, self.y = list(coords[:m]), list(coords[m:])
        self._cache: dict[str, Any] = {}

    def _get(self, key: str, make: Callable[[], Any]):
        if key not in self._cache:
            try:
                self._cache[key] = make()
            except DomainError as exc:
                exc.point = self.coords
                raise
        return self._cache[key]

    @property
    def stack(self) -> DerivStack:
        sc = self.scenario
        if sc.kind == "hessian":
            return self._get("stack", lambda: deriv_stack(sc.potential, self.y, laggeo.y_names(sc.dim)))
        return self._get("stack", lambda: laggeo.fiber_stack(sc.lagrangian, self.x, self.y))

    @property
    def package(self) -> HessPackage:
        return self._get("package", lambda: build_package(self.stack))

    def metric_and_derivative(self) -> tuple[np.ndarray, np.ndarray]:
        if self.scenario.kind == "direct-metric":
            return self._get("gdg", lambda: self.scenario.metric.metric_and_derivative(self.x, self.y))
        return self.stack.d2, self.stack.d3

    def connection(self, y=None) -> np.ndarray:
        sc = self.scenario
        y = self.y if y is None else list(y)
        if sc.kind == "hessian":
            return np.zeros((sc.dim, sc.dim))
        if sc.connection is not None:
            return laggeo.explicit_connection(sc.connection, self.x, y)
        return laggeo.cartan_nonlinear_connection(sc.lagrangian, self.x, y).t

    def euler_defect(self) -> float:
        s = self.stack
        return abs(float(s.d1 @ np.asarray(self.y)) - 2.0 * s.d0)

    def leaf(self) -> laggeo.LeafCurvature:
        return self._get("leaf", lambda: laggeo.leaf_curvature_from_stack(self.stack))


def _max_abs(t: np.ndarray) -> float:
    return float(np.max(np.abs(t))) if np.size(t) else 0.0


@dataclass
class CheckResult:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    details: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "details": self.details,
        }


def _intersect(perm_lists: list[list[list[int]]]) -> list[list[int]]:
    if not perm_lists:
        return []
    common = {tuple(p) for p in perm_lists[0]}
    for lst in perm_lists[1:]:
        common &= {tuple(p) for p in lst}
    return [list(p) for p in sorted(common)]


def _check_identities(points: list[_Point], tol: float) -> CheckResult:
    keys = ("riemann_from_q", "riemann_from_mixed_q", "mixed_q_difference", "christoffel_derivative_routes")
    rel = {k: 0.0 for k in keys}
    algebraic = {"difference_tensor": 0.0, "levi_civita_specialization": 0.0, "torsion": 0.0}
    cartan_minus, cartan_plus = 0.0, 0.0
    audits = {"riemann_from_q": [], "riemann_from_mixed_q": []}
    for pt in points:
        suite = identity_suite(pt.package, rtol=tol)
        scale = suite["scale"]
        for k in keys:
            rel[k] = max(rel[k], suite[k] / scale)
        c_scale = max(1.0, _max_abs(pt.package.C))
        for k in algebraic:
            algebraic[k] = max(algebraic[k], suite[k] / c_scale)
        cartan_minus = max(cartan_minus, suite["mixed_q_difference_cartan_form"]["minus_sign"] / scale)
        cartan_plus = max(cartan_plus, suite["mixed_q_difference_cartan_form"]["plus_sign"] / scale)
        for k in audits:
            audits[k].append(suite["permutation_audit"][k])
    common = {k: _intersect(v) for k, v in audits.items()}
    identity_ok = all(list(IDENTITY) in v for v in common.values())
    worst = max(rel.values())
    passed = (
        worst <= tol
        and max(algebraic.values()) <= ALGEBRAIC_TOLERANCE
        and cartan_plus <= tol
        and identity_ok
    )
    return CheckResult("identities", worst, tol, passed, {
        "relative_residuals": rel,
        "algebraic_residuals": algebraic,
        "algebraic_tolerance": ALGEBRAIC_TOLERANCE,
        "mixed_q_difference_cartan_form": {"minus_sign": cartan_minus, "plus_sign": cartan_plus},
        "permutation_audit": common,
    })


def _check_symmetries(points: list[_Point], tol: float) -> CheckResult:
    worst: dict[str, float] = {}
    for pt in points:
        for k, v in symmetry_suite(pt.package).items():
            worst[k] = max(worst.get(k, 0.0), v)
    m = max(worst.values())
    return CheckResult("symmetries", m, tol, m <= tol, {"relative_residuals": worst})


def _check_q_formula(points: list[_Point], tol: float) -> CheckResult:
    verdicts = []
    full_derivative_res, half_derivative_res = 0.0, 0.0
    for pt in points:
        p = pt.package
        audit = q_formula_audit(p.C, p.dC, p.g, p.Gamma, p.Q, rtol=tol)
        verdicts.append(audit.verdict)
        full_derivative_res = max(full_derivative_res, audit.full_derivative_residual / audit.scale)
        half_derivative_res = max(half_derivative_res, audit.half_derivative_residual / audit.scale)
    counts = {v: verdicts.count(v) for v in ("half_derivative", "full_derivative", "indistinguishable", "neither")}
    if counts["full_derivative"] == 0 and counts["neither"] == 0:
        variant = "half_derivative" if counts["half_derivative"] else "indistinguishable"
    elif counts["half_derivative"] == 0 and counts["neither"] == 0:
        variant = "full_derivative" if counts["full_derivative"] else "indistinguishable"
    else:
        variant = "inconsistent"
    passed = variant != "inconsistent"
    return CheckResult("q-formula-audit", half_derivative_res, tol, passed, {
        "matching_variant": variant,
        "point_verdicts": verdicts,
        "verdict_counts": counts,
        "full_derivative_relative_residual": full_derivative_res,
        "half_derivative_relative_residual": half_derivative_res,
    })


def _cones(m: int, g: np.ndarray, rng: SplitMix64, extra: int = 3) -> list[np.ndarray]:
    cones = [flat(tau, g) for tau in pair_basis(m)]
    for _ in range(extra):
        a = np.array([rng.vector([-1.0] * m, [1.0] * m) for _ in range(m)])
        cones.append(a + a.T)
    return cones


def _check_conical(points: list[_Point], tol: float) -> CheckResult:
    rng = SplitMix64(0)
    worst = 0.0
    table, null_cones = [], 0
    for pt in points:
        pkg = pt.package
        values = []
        for k, nu in enumerate(_cones(pkg.dim, pkg.g, rng)):
            try:
                kappa = conical_curvature(pkg, nu)
            except NullConeError:
                null_cones += 1
                continue
            for c in (-3.0, 0.5, 7.0):
                worst = max(worst, abs(conical_curvature(pkg, c * nu) - kappa) / max(1.0, abs(kappa)))
            if k < len(pair_basis(pkg.dim)):
                values.append(kappa)
        table.append(values)
    return CheckResult("conical", worst, tol, worst <= tol, {
        "scale_invariance_relative_residual": worst,
        "basis_cone_curvatures": table,
        "null_cones": null_cones,
    })


def _check_constant_curvature(points: list[_Point], tol: float) -> CheckResult:
    verdict = constant_curvature_audit([pt.package for pt in points], sectional_tol=tol)
    m = points[0].scenario.dim
    consistent = True
    if verdict.is_pointwise_proportional:
        if m >= 2 and not verdict.sectional_matches:
            consistent = False
        if m >= 3 and not verdict.is_constant:
            consistent = False
    deviation = verdict.sectional_deviation if verdict.is_pointwise_proportional and m >= 2 else 0.0
    return CheckResult("constant-curvature", deviation or 0.0, tol, consistent, verdict.to_dict())


def _check_eigen(points: list[_Point], tol: float) -> tuple[CheckResult, list]:
    worst = 0.0
    tables = []
    failure = None
    for pt in points:
        pkg = pt.package
        qf, gf = quad_form(pkg.Q, check=False), quad_form(pkg.G, check=False)
        try:
            lam, vecs, _ = gen_eig(qf, gf)
        except NotPositiveDefiniteError as exc:
            failure = str(exc)
            tables.append(None)
            continue
        scale = max(1.0, _max_abs(qf), _max_abs(gf))
        res = _max_abs(qf @ vecs - gf @ vecs * lam) / scale
        ortho = _max_abs(vecs.T @ gf @ vecs - np.eye(len(lam)))
        worst = max(worst, res, ortho)
        tables.append([float(v) for v in lam])
    details = {"eigenvalues_ascending": tables}
    if failure:
        details["error"] = failure
    return CheckResult("eigen", worst, tol, failure is None and worst <= tol, details), tables


def _check_kahler(points: list[_Point], tol: float) -> CheckResult:
    kind = points[0].scenario.kind
    closedness, cartan, equivalence = [], [], 0.0
    for pt in points:
        g, dg = pt.metric_and_derivative()
        if kind == "direct-metric":
            invert(g, pt.coords)
        _, domega = laggeo.kahler_form(g, dg)
        d = _max_abs(laggeo.exterior_derivative(domega))
        c = _max_abs(dg - dg.transpose(1, 0, 2))
        closedness.append(d)
        cartan.append(c)
        equivalence = max(equivalence, abs(d - c) / max(1.0, _max_abs(dg)))
    worst = max(closedness)
    lagrange_like = worst <= tol * max(1.0, max(_max_abs(pt.metric_and_derivative()[1]) for pt in points))
    passed = equivalence <= ALGEBRAIC_TOLERANCE
    if kind != "direct-metric":
        # a fiber Hessian metric always has a closed leaf Kahler form
        passed = passed and lagrange_like
    residual = equivalence if kind == "direct-metric" else worst
    return CheckResult("kahler", residual, tol, passed, {
        "closedness_defects": closedness,
        "cartan_defects": cartan,
        "equivalence_residual": equivalence,
        "is_lagrange_like": lagrange_like,
    })


def _check_half_q(points: list[_Point], tol: float) -> CheckResult:
    worst, holo, jdef = 0.0, 0.0, 0.0
    matches, literal = [], []
    for pt in points:
        res = laggeo.compare_half_q(pt.leaf(), pt.package.Q, rtol=tol)
        worst = max(worst, res.residual / res.scale)
        holo = max(holo, res.holomorphic_residual / res.scale)
        jdef = max(jdef, res.kahler_defect / max(1.0, res.max_abs_leaf_R))
        matches.append(res.matching_permutations)
        literal.append(res.literal_matching_permutations)
    common = _intersect(matches)
    passed = worst <= tol and holo <= tol and jdef <= tol and list(IDENTITY) in common
    return CheckResult("half-q", worst, tol, passed, {
        "permutation_audit": common,
        "literal_permutations": _intersect(literal),
        "holomorphic_relative_residual": holo,
        "holomorphic_factor": laggeo.HOLOMORPHIC_FACTOR,
        "complex_structure_invariance": jdef,
    })


def _check_homogeneity(points: list[_Point], tol: float) -> CheckResult:
    euler = [pt.euler_defect() for pt in points]
    scales = [max(1.0, abs(pt.stack.d0)) for pt in points]
    homogeneous = all(e <= tol * s for e, s in zip(euler, scales))
    worst, duality = 0.0, 0.0
    for pt in points:
        t = pt.connection()
        duality = max(duality, laggeo.adapted_coframe(t).duality_defect)
        if homogeneous:
            t2 = pt.connection([2.0 * v for v in pt.y])
            worst = max(worst, _max_abs(t2 - 2.0 * t) / max(1.0, _max_abs(t)))
    passed = worst <= tol and duality <= ALGEBRAIC_TOLERANCE
    return CheckResult("homogeneity", worst, tol, passed, {
        "euler_defects": euler,
        "two_homogeneous": homogeneous,
        "connection_scaling_tested": homogeneous,
        "coframe_duality_defect": duality,
    })


def _scenario_fields(scenario: Scenario) -> list[tuple[str, ScalarField, list[str]]]:
    m = scenario.dim
    if scenario.kind == "hessian":
        return [("potential", scenario.potential, laggeo.y_names(m))]
    names = laggeo.x_names(m) + laggeo.y_names(m)
    if scenario.kind == "lagrange":
        return [("lagrangian", scenario.lagrangian.L, names)]
    comps = scenario.metric.components
    return [(f"metric_components[{i}][{j}]", comps[i][j], names)
            for i in range(m) for j in range(i, m)]


def fd_audit(scenario: Scenario, points: list[list[float]], tol: float,
             tol4: float = FD_ORDER4_TOLERANCE) -> CheckResult:
    """Compare every jet partial to order 4 with its central-difference estimate."""
    worst_low, worst4 = 0.0, 0.0
    per_field = {}
    for label, fld, names in _scenario_fields(scenario):
        n = len(names)
        f_low, f4 = 0.0, 0.0
        for p in points:
            try:
                stack = deriv_stack(fld, p, names)
            except DomainError as exc:
                exc.point = list(p)
                raise
            for order in range(1, 5):
                for idx in itertools.combinations_with_replacement(range(n), order):
                    exact = stack.partial(idx)
                    approx = fd_probe(fld, p, idx, var_names=names)
                    err = abs(exact - approx) / (1.0 + abs(exact))
                    if order == 4:
                        f4 = max(f4, err)
                    else:
                        f_low = max(f_low, err)
        per_field[label] = {"orders_1_3": f_low, "order_4": f4}
        worst_low, worst4 = max(worst_low, f_low), max(worst4, f4)
    passed = worst_low <= tol and worst4 <= tol4
    return CheckResult("fd-audit", worst_low, tol, passed, {
        "order_4_relative_residual": worst4,
        "order_4_tolerance": tol4,
        "per_field": per_field,
    })


# --- report -------------------------------------------------------------------------

def _tensor_dump(pt: _Point) -> dict:
    out: dict[str, Any] = {"point": pt.coords}
    if pt.scenario.kind == "direct-metric":
        g, dg = pt.metric_and_derivative()
        out.update(g=g, dg=dg)
        return out
    p = pt.package
    out.update(
        g=p.g, g_inv=p.g_inv, C=p.C, dC=p.dC, Gamma=p.Gamma, dGamma=p.dGamma,
        Q=p.Q, Qmix=p.Qmix, R=p.R, G=p.G,
        leaf_R=pt.leaf().R_vertical,
    )
    if pt.scenario.kind == "lagrange":
        out["t"] = pt.connection()
    return out


def run(scenario: Scenario, seed: int | None = None, tolerance_scale: float = 1.0,
        dump_tensors: bool = False, points: list[list[float]] | None = None,
        checks: Sequence[str] | None = None) -> dict:
    """Execute the scenario's checks and return the report as a plain dict."""
    start = time.perf_counter()
    if points is None:
        points, used_seed = sample_points(scenario, seed)
    else:
        used_seed = seed
    selected = list(scenario.checks if checks is None else checks)
    pts = [_Point(scenario, p) for p in points]

    def tol(name: str) -> float:
        return scenario.tolerances.get(name, DEFAULT_TOLERANCES[name]) * tolerance_scale

    results: list[CheckResult] = []
    skipped: list[dict] = []
    eigen_tables = None
    for name in selected:
        if name == "identities":
            results.append(_check_identities(pts, tol(name)))
        elif name == "symmetries":
            results.append(_check_symmetries(pts, tol(name)))
        elif name == "q-formula-audit":
            results.append(_check_q_formula(pts, tol(name)))
        elif name == "conical":
            results.append(_check_conical(pts, tol(name)))
        elif name == "constant-curvature":
            if len(pts) < 2:
                skipped.append({"name": name, "reason": "needs at least two sample points"})
                continue
            results.append(_check_constant_curvature(pts, tol(name)))
        elif name == "eigen":
            res, eigen_tables = _check_eigen(pts, tol(name))
            results.append(res)
        elif name == "kahler":
            results.append(_check_kahler(pts, tol(name)))
        elif name == "half-q":
            results.append(_check_half_q(pts, tol(name)))
        elif name == "homogeneity":
            results.append(_check_homogeneity(pts, tol(name)))
        elif name == "fd-audit":
            results.append(fd_audit(scenario, points, tol(name), FD_ORDER4_TOLERANCE * tolerance_scale))

    audit: dict[str, Any] = {}
    for r in results:
        if r.name == "identities":
            audit.update(r.details["permutation_audit"])
        if r.name == "half-q":
            audit["half_q"] = r.details["permutation_audit"]
    if audit:
        lists = list(audit.values())
        common = _intersect(lists)
        audit["selected"] = list(IDENTITY) if list(IDENTITY) in common else (common[0] if common else None)

    report: dict[str, Any] = {
        "scenario": scenario.echo(),
        "seed": used_seed,
        "tolerance_scale": tolerance_scale,
        "points": points,
        "checks": [r.to_dict() for r in results],
        "skipped_checks": skipped,
        "permutation_audit": audit,
        "eigenvalue_tables": eigen_tables,
        "verdict": "pass" if all(r.passed for r in results) else "fail",
        "engine_version": __version__,
    }
    if dump_tensors:
        report["tensor_dumps"] = [_tensor_dump(pt) for pt in pts]
    report["wall_time"] = time.perf_counter() - start
    return report


def run_corpus(seed: int | None = None, tolerance_scale: float = 1.0,
               dump_tensors: bool = False) -> dict:
    start = time.perf_counter()
    reports = [
        run(load_builtin(name), seed=seed, tolerance_scale=tolerance_scale, dump_tensors=dump_tensors)
        for name in builtin_names()
    ]
    rel = [r["permutation_audit"]["riemann_from_q"] for r in reports if "riemann_from_q" in r["permutation_audit"]]
    rsi = [r["permutation_audit"]["riemann_from_mixed_q"] for r in reports if "riemann_from_mixed_q" in r["permutation_audit"]]
    half = [r["permutation_audit"]["half_q"] for r in reports if "half_q" in r["permutation_audit"]]
    common = {"riemann_from_q": _intersect(rel), "riemann_from_mixed_q": _intersect(rsi), "half_q": _intersect(half)}
    everywhere = _intersect(list(common.values()))
    common["selected"] = list(IDENTITY) if list(IDENTITY) in everywhere else (
        everywhere[0] if everywhere else None)
    variants = sorted({
        c["details"]["matching_variant"]
        for r in reports for c in r["checks"] if c["name"] == "q-formula-audit"
    } - {"indistinguishable"})
    return {
        "reports": reports,
        "corpus_permutation_audit": common,
        "q_formula_variant": variants[0] if len(variants) == 1 else ("inconsistent" if variants else "indistinguishable"),
        "verdict": "pass" if all(r["verdict"] == "pass" for r in reports) else "fail",
        "engine_version": __version__,
        "wall_time": time.perf_counter() - start,
    }


# --- serialization --------------------------------------------------------------------

def _encode(obj: Any, out: list[str]) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = float(obj)
        out.append("%.17g" % v if math.isfinite(v) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), out)
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """JSON text with every double written to 17 significant digits."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out) + "\n"


def error_record(exc: HessLagError) -> dict:
    record = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "reason", "subexpression", "det", "point", "position"):
        if hasattr(exc, attr):
            record[attr] = getattr(exc, attr)
    return record
