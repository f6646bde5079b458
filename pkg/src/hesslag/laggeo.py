"""Tangent-bundle layer: fiberwise Hessian geometry of a Lagrangian ``L(x, y)``.

Coordinates on a chart of the tangent manifold are ``x1..xm`` (base) and
``y1..ym`` (fiber).  Each fiber is an affine manifold and ``g_ij = d2L/dy^i dy^j``
is a Hessian metric on it, with ``x`` entering only as a parameter.

Nonlinear connection coefficients are stored as ``t[i, j] = t_i^j`` with the
lower index along ``x`` and the upper along ``y``, so that
``X_i = d/dx^i - t_i^j d/dy^j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import ScalarField, parse
from .hessgeo import (
    IDENTITY,
    PERMUTATIONS,
    HessPackage,
    antisymmetrized,
    build_package,
    christoffel_derivative,
    levi_civita,
    riemann,
    slot_audit,
)
from .jet import DerivStack, deriv_stack, jet_of
from .tensor import invert


def x_names(m: int) -> list[str]:
    return [f"x{i + 1}" for i in range(m)]


def y_names(m: int) -> list[str]:
    return [f"y{i + 1}" for i in range(m)]


@dataclass(frozen=True)
class LagrangianChart:
    L: ScalarField
    dim: int

    @classmethod
    def from_text(cls, text: str, m: int) -> "LagrangianChart":
        return cls(parse(text, x_names(m) + y_names(m)), m)

    def params(self, x: Sequence[float]) -> dict[str, float]:
        return {name: float(v) for name, v in zip(x_names(self.dim), x)}


@dataclass(frozen=True)
class DirectMetricChart:
    """Fiber metric given componentwise; ``components[i][j]`` is ``g_ij(x, y)``."""

    components: tuple[tuple[ScalarField, ...], ...]
    dim: int

    @classmethod
    def from_text(cls, rows: Sequence[Sequence[str]], m: int) -> "DirectMetricChart":
        names = x_names(m) + y_names(m)
        comps = tuple(tuple(parse(t, names) for t in row) for row in rows)
        if len(comps) != m or any(len(r) != m for r in comps):
            raise ValueError(f"metric needs {m}x{m} components")
        return cls(comps, m)

    def metric_and_derivative(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """``g_ij(x, y)`` and ``dg[k, i, j] = d g_ij / d y^k``."""
        m = self.dim
        params = {name: float(v) for name, v in zip(x_names(m), x)}
        g = np.zeros((m, m))
        dg = np.zeros((m, m, m))
        for i in range(m):
            for j in range(m):
                s = deriv_stack(self.components[i][j], y, y_names(m), order=1, params=params)
                g[i, j] = s.d0
                dg[:, i, j] = s.d1
        return g, dg


# --- fiber Hessian package --------------------------------------------------

def fiber_stack(chart: LagrangianChart, x, y, order: int = 4) -> DerivStack:
    """Derivatives of ``L(x, .)`` in ``y`` only; ``x`` bound as constants."""
    return deriv_stack(chart.L, y, y_names(chart.dim), order=order, params=chart.params(x))


def full_stack(chart: LagrangianChart, x, y, order: int = 3) -> DerivStack:
    """Derivatives of ``L`` in all ``2m`` variables, ordered ``(x, y)``."""
    m = chart.dim
    return deriv_stack(chart.L, list(x) + list(y), x_names(m) + y_names(m), order=order)


def fiber_package(chart: LagrangianChart, x, y) -> HessPackage:
    return build_package(fiber_stack(chart, x, y))


# --- locally Lagrange / Kahler closedness ----------------------------------

def _fiber_metric_derivative(chart, x, y) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(chart, DirectMetricChart):
        return chart.metric_and_derivative(x, y)
    s = fiber_stack(chart, x, y, order=3)
    return s.d2, s.d3


def cartan_defect(chart, x, y) -> float:
    """``max |d g_ij/d y^k - d g_kj/d y^i|``: zero iff the Cartan tensor is symmetric."""
    _, dg = _fiber_metric_derivative(chart, x, y)
    return float(np.max(np.abs(dg - dg.transpose(1, 0, 2))))


@dataclass(frozen=True)
class LagrangeTestResult:
    is_lagrange_like: bool
    max_defect: float
    defects: list[float]


def locally_lagrange_test(chart, samples: Sequence[tuple], rtol: float = 1e-9) -> LagrangeTestResult:
    """Symmetry test of the Cartan tensor over ``samples`` of ``(x, y)``."""
    defects = []
    scale = 1.0
    for x, y in samples:
        g, dg = _fiber_metric_derivative(chart, x, y)
        invert(g, list(x) + list(y))
        defects.append(float(np.max(np.abs(dg - dg.transpose(1, 0, 2)))))
        scale = max(scale, float(np.max(np.abs(dg))))
    worst = max(defects) if defects else 0.0
    return LagrangeTestResult(worst <= rtol * scale, worst, defects)


def kahler_form(g: np.ndarray, dg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leaf Kahler form ``g_ij dy^i ^ deta^j`` and its first derivatives in ``(y, eta)``."""
    m = g.shape[0]
    omega = np.zeros((2 * m, 2 * m))
    omega[:m, m:] = g
    omega[m:, :m] = -g.T
    domega = np.zeros((2 * m, 2 * m, 2 * m))
    domega[:m, :m, m:] = dg
    domega[:m, m:, :m] = -dg.transpose(0, 2, 1)
    return omega, domega


def exterior_derivative(domega: np.ndarray) -> np.ndarray:
    """``(d omega)_{abc} = d_a omega_bc + d_b omega_ca + d_c omega_ab``."""
    return domega + np.einsum("bca->abc", domega) + np.einsum("cab->abc", domega)


def kahler_closedness(chart, x, y) -> float:
    """Max-abs component of ``d omega`` along the leaf through ``(x, y)``."""
    g, dg = _fiber_metric_derivative(chart, x, y)
    _, domega = kahler_form(g, dg)
    return float(np.max(np.abs(exterior_derivative(domega))))


# --- nonlinear connection -----------------------------------------------------

@dataclass(frozen=True)
class NonlinearConnection:
    t: np.ndarray          # t[i, j] = t_i^j
    spray: np.ndarray      # G^j


def cartan_nonlinear_connection(chart: LagrangianChart, x, y) -> NonlinearConnection:
    """Spray-based connection ``t_i^j = d G^j / d y^i``.

    ``G^j = 1/2 g^{jl} (y^k d2L/dy^l dx^k - dL/dx^l)`` with ``g = d2L/dy dy``;
    for ``L = a_ij(x) y^i y^j`` this yields ``t_i^j = Gamma^j_{ik}(a) y^k``.
    """
    m = chart.dim
    s = full_stack(chart, x, y, order=3)
    X, Y = slice(0, m), slice(m, 2 * m)
    yv = np.asarray(y, dtype=float)
    g = s.d2[Y, Y]
    C = s.d3[Y, Y, Y]
    g_inv = invert(g, list(x) + list(y))
    L_x = s.d1[X]
    L_yx = s.d2[Y, X]                       # [l, k] = d2L / dy^l dx^k
    L_yyx = s.d3[Y, Y, X]                   # [i, l, k]
    A = L_yx @ yv - L_x
    dA = L_yyx @ yv + L_yx.T - L_yx         # [i, l] = d_i A_l
    spray = 0.5 * g_inv @ A
    dg_inv = -np.einsum("ja,iab,bl->ijl", g_inv, C, g_inv)
    t = 0.5 * (np.einsum("ijl,l->ij", dg_inv, A) + np.einsum("jl,il->ij", g_inv, dA))
    return NonlinearConnection(t=t, spray=spray)


def explicit_connection(t_fields: Sequence[Sequence[ScalarField]], x, y) -> np.ndarray:
    m = len(t_fields)
    env = {n: float(v) for n, v in zip(x_names(m) + y_names(m), list(x) + list(y))}
    return np.array([[float(f(env)) for f in row] for row in t_fields])


@dataclass(frozen=True)
class AdaptedFrame:
    frame: np.ndarray      # rows: X_1..X_m, d/dy^1..d/dy^m in (d/dx, d/dy) components
    coframe: np.ndarray    # rows: dx^1..dx^m, theta^1..theta^m in (dx, dy) components
    pairing: np.ndarray    # coframe @ frame.T, should be the identity

    @property
    def duality_defect(self) -> float:
        return float(np.max(np.abs(self.pairing - np.eye(self.pairing.shape[0]))))


def adapted_coframe(t: np.ndarray) -> AdaptedFrame:
    """Adapted frame ``(X_i, d/dy^i)`` and its dual coframe ``(dx^i, theta^i)``."""
    t = np.asarray(t, dtype=float)
    m = t.shape[0]
    eye = np.eye(m)
    zero = np.zeros((m, m))
    frame = np.block([[eye, -t], [zero, eye]])
    # theta^i = dy^i + t_j^i dx^j
    coframe = np.block([[eye, zero], [t.T, eye]])
    return AdaptedFrame(frame, coframe, coframe @ frame.T)


# --- leafwise Kahler curvature -----------------------------------------------

def leaf_metric(stack: DerivStack) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Metric ``g + g`` on a double-vertical leaf in coordinates ``(y, eta)``.

    Returns ``h``, ``dh[e, P, Q]`` and ``ddh[e, f, P, Q]``; nothing depends on ``eta``.
    """
    m = stack.dim
    n = 2 * m
    h = np.zeros((n, n))
    h[:m, :m] = stack.d2
    h[m:, m:] = stack.d2
    dh = np.zeros((n, n, n))
    dh[:m, :m, :m] = stack.d3
    dh[:m, m:, m:] = stack.d3
    ddh = np.zeros((n, n, n, n))
    ddh[:m, :m, :m, :m] = stack.d4
    ddh[:m, :m, m:, m:] = stack.d4
    return h, dh, ddh


def complex_structure(m: int) -> np.ndarray:
    """``J d/dy^i = d/deta^i``, ``J d/deta^i = -d/dy^i`` (columns are images)."""
    J = np.zeros((2 * m, 2 * m))
    J[m:, :m] = np.eye(m)
    J[:m, m:] = -np.eye(m)
    return J


@dataclass(frozen=True)
class LeafCurvature:
    R_full: np.ndarray         # curvature of the 2m-dimensional leaf metric
    R_vertical: np.ndarray     # restriction to d/dy arguments
    kahler_defect: float       # max |R(J., J., ., .) - R|
    holomorphic: np.ndarray    # R(d_z_a, d_zbar_b, d_z_c, d_zbar_d)


def leaf_curvature_from_stack(stack: DerivStack) -> LeafCurvature:
    m = stack.dim
    h, dh, ddh = leaf_metric(stack)
    h_inv = invert(h, stack.point)
    gamma = levi_civita(h, dh, h_inv)
    dgamma = christoffel_derivative(h_inv, gamma, dh, ddh)
    R = riemann(h, gamma, dgamma)
    J = complex_structure(m)
    RJ = np.einsum("pqcd,pa,qb->abcd", R, J, J)
    dz = 0.5 * (np.vstack([np.eye(m), np.zeros((m, m))]) - 1j * np.vstack([np.zeros((m, m)), np.eye(m)]))
    dzbar = dz.conj()
    holo = np.einsum("PQRS,Pa,Qb,Rc,Sd->abcd", R, dz, dzbar, dz, dzbar)
    return LeafCurvature(
        R_full=R,
        R_vertical=R[:m, :m, :m, :m].copy(),
        kahler_defect=float(np.max(np.abs(RJ - R))),
        holomorphic=holo,
    )


def leaf_kahler_curvature(chart: LagrangianChart, x, y) -> LeafCurvature:
    """Levi-Civita curvature of the leaf metric at ``eta = 0``, via the generic pipeline."""
    return leaf_curvature_from_stack(fiber_stack(chart, x, y))


@dataclass(frozen=True)
class HalfQResult:
    residual: float
    scale: float
    matching_permutations: list
    literal_matching_permutations: list
    holomorphic_residual: float
    kahler_defect: float
    max_abs_Q: float
    max_abs_leaf_R: float


HOLOMORPHIC_FACTOR = 0.25


def compare_half_q(leaf: LeafCurvature, Q: np.ndarray, rtol: float = 1e-8) -> HalfQResult:
    """Compare the vertical leaf curvature with half the fiber Hessian curvature.

    Primary relation (slot correspondence audited over all permutations)::

        R_leaf[a, b, c, d] = 1/2 (Q[a, c, d, b] - Q[a, d, c, b])

    Also reported: the literal entrywise correspondence ``R_leaf = 1/2 Q^p``
    for every slot permutation ``p`` and the holomorphic components
    ``R(dz_a, dzbar_b, dz_c, dzbar_d) = 1/4 Q[a, c, b, d]``.
    """
    scale = max(1.0, float(np.max(np.abs(Q))))
    tol = rtol * scale
    R = leaf.R_vertical
    audit = slot_audit(R, Q, 0.5, tol)
    literal = [
        list(p) for p in PERMUTATIONS
        if float(np.max(np.abs(R - 0.5 * np.transpose(Q, p)))) <= tol
    ]
    holo_ref = HOLOMORPHIC_FACTOR * Q.transpose(0, 2, 1, 3)
    return HalfQResult(
        residual=audit["identity_residual"],
        scale=scale,
        matching_permutations=audit["matching"],
        literal_matching_permutations=literal,
        holomorphic_residual=float(np.max(np.abs(leaf.holomorphic - holo_ref))),
        kahler_defect=leaf.kahler_defect,
        max_abs_Q=float(np.max(np.abs(Q))),
        max_abs_leaf_R=float(np.max(np.abs(R))),
    )


def verify_half_Q(chart: LagrangianChart, x, y, rtol: float = 1e-8) -> HalfQResult:
    stack = fiber_stack(chart, x, y)
    pkg = build_package(stack)
    return compare_half_q(leaf_curvature_from_stack(stack), pkg.Q, rtol)


def hashiguchi_vertical(Q: np.ndarray) -> np.ndarray:
    """``H(X', X, X1, X2) = 1/2 [Q(X', X1, X2, X) - Q(X', X2, X1, X)]`` on reflected arguments."""
    return 0.5 * antisymmetrized(Q)


def euler_homogeneity(chart: LagrangianChart, x, y) -> float:
    """``|y^i dL/dy^i - 2 L|``; zero on rays where ``L`` is 2-homogeneous in ``y``."""
    s = fiber_stack(chart, x, y, order=1)
    return abs(float(s.d1 @ np.asarray(y, dtype=float)) - 2.0 * s.d0)


@dataclass(frozen=True)
class LagPackage:
    x: np.ndarray
    y: np.ndarray
    fiber: HessPackage
    t: np.ndarray
    cartan_defect: float
    kahler_defect: float
    leaf_R: np.ndarray
    euler_defect: float


def lag_package(chart: LagrangianChart, x, y, t: np.ndarray | None = None) -> LagPackage:
    stack = fiber_stack(chart, x, y)
    pkg = build_package(stack)
    if t is None:
        t = cartan_nonlinear_connection(chart, x, y).t
    g, dg = stack.d2, stack.d3
    _, domega = kahler_form(g, dg)
    return LagPackage(
        x=np.asarray(x, dtype=float),
        y=np.asarray(y, dtype=float),
        fiber=pkg,
        t=t,
        cartan_defect=float(np.max(np.abs(dg - dg.transpose(1, 0, 2)))),
        kahler_defect=float(np.max(np.abs(exterior_derivative(domega)))),
        leaf_R=leaf_curvature_from_stack(stack).R_vertical,
        euler_defect=abs(float(stack.d1 @ np.asarray(y, dtype=float)) - 2.0 * stack.d0),
    )


__all__ = [
    "IDENTITY",
    "LagrangianChart",
    "DirectMetricChart",
    "fiber_package",
    "locally_lagrange_test",
    "cartan_nonlinear_connection",
    "adapted_coframe",
    "kahler_closedness",
    "leaf_kahler_curvature",
    "verify_half_Q",
    "hashiguchi_vertical",
    "euler_homogeneity",
    "lag_package",
]
