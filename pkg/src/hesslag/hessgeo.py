"""Hessian geometry of a potential on one affine chart.

Everything lives in the coordinate frame ``d/dy^u``; parallel vector fields are
constant-coefficient fields, so evaluating a tensor on parallel arguments is
reading off components.

Index conventions (all tensors are numpy arrays):

* ``C[u, v, w] = d_u g_{vw}`` (third derivatives of the potential)
* ``Gamma[k, u, v]`` = Christoffel symbol ``Gamma^k_{uv}``
* ``dGamma[e, k, u, v] = d_e Gamma^k_{uv}``
* ``Q[a, b, c, d] = g(Q(d_c, d_d) d_b, d_a)``, Hessian curvature
* ``Qmix[a, b, c, d] = g(d_a, Qmix(d_c, d_d) d_b)``, mixed covariant derivative
* ``R[a, b, c, d] = g(d_a, R(d_c, d_d) d_b)``, Riemannian curvature
* ``G[a, b, c, d] = g_ac g_bd + g_ad g_bc``
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NullConeError
from .jet import DerivStack
from .rng import SplitMix64
from .tensor import invert, pair_coords, quad_form, sharp, hessian_symmetry_residual

PERMUTATIONS = tuple(itertools.permutations(range(4)))
IDENTITY = (0, 1, 2, 3)

IDENTITY_RTOL = 1e-9
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class HessPackage:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    C: np.ndarray
    dC: np.ndarray
    Gamma: np.ndarray
    dGamma: np.ndarray
    dGamma_generic: np.ndarray
    Q: np.ndarray
    Qmix: np.ndarray
    R: np.ndarray
    G: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def Phi(self) -> np.ndarray:
        # the difference tensor has the Christoffel symbols as components
        return self.Gamma


# --- connection and curvature assembly ------------------------------------

def levi_civita(g: np.ndarray, dg: np.ndarray, g_inv: np.ndarray | None = None) -> np.ndarray:
    """``Gamma^k_{uv} = 1/2 g^{kp} (d_u g_{pv} + d_v g_{pu} - d_p g_{uv})``."""
    if g_inv is None:
        g_inv = invert(g)
    lowered = 0.5 * (
        np.einsum("upv->puv", dg) + np.einsum("vpu->puv", dg) - dg
    )
    return np.einsum("kp,puv->kuv", g_inv, lowered)


def christoffel_derivative(
    g_inv: np.ndarray, gamma: np.ndarray, dg: np.ndarray, ddg: np.ndarray
) -> np.ndarray:
    """Generic ``d_e Gamma^k_{uv}`` from first and second metric derivatives.

    ``ddg[e, u, v, w] = d_e d_u g_{vw}``.
    """
    d_lowered = 0.5 * (
        np.einsum("eupv->epuv", ddg) + np.einsum("evpu->epuv", ddg) - ddg
    )
    return (
        -np.einsum("ka,eab,buv->ekuv", g_inv, dg, gamma)
        + np.einsum("kp,epuv->ekuv", g_inv, d_lowered)
    )


def hessian_gamma_derivative(
    g_inv: np.ndarray, C: np.ndarray, dC: np.ndarray, gamma: np.ndarray
) -> np.ndarray:
    """Closed-form derivative of ``Gamma = 1/2 g^{-1} C`` for a Hessian metric."""
    return 0.5 * np.einsum("kp,bpuv->bkuv", g_inv, dC) - np.einsum(
        "kq,bqr,ruv->bkuv", g_inv, C, gamma
    )


def hessian_Q(g: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """``Q[a, b, c, d] = g_{ak} d_b Gamma^k_{cd}``."""
    return np.einsum("ak,bkcd->abcd", g, dgamma)


def mixed_Q(g: np.ndarray, gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """Lowered mixed covariant derivative of the difference tensor."""
    raised = (
        np.einsum("ckab->kabc", dgamma)
        - np.einsum("kpb,pca->kabc", gamma, gamma)
        - np.einsum("kap,pcb->kabc", gamma, gamma)
    )
    # Qmix[alpha, c, a, b] = g_{alpha k} Qmix^k_{ab;c}
    return np.einsum("ek,kabc->ecab", g, raised)


def riemann(g: np.ndarray, gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """Lowered Levi-Civita curvature ``R[a, b, c, d] = g_{ak} R^k_{bcd}``."""
    raised = (
        np.einsum("ckdb->kbcd", dgamma)
        - np.einsum("dkcb->kbcd", dgamma)
        + np.einsum("kcp,pdb->kbcd", gamma, gamma)
        - np.einsum("kdp,pcb->kbcd", gamma, gamma)
    )
    return np.einsum("ak,kbcd->abcd", g, raised)


def g_pair(g: np.ndarray) -> np.ndarray:
    return np.einsum("ac,bd->abcd", g, g) + np.einsum("ad,bc->abcd", g, g)


def build_package(stack: DerivStack) -> HessPackage:
    """Assemble every tensor of the Hessian metric defined by the stack's potential."""
    if stack.order < 4:
        raise ValueError("build_package needs derivatives up to order 4")
    g = stack.d2
    g_inv = invert(g, stack.point)
    C = stack.d3
    dC = stack.d4
    gamma = levi_civita(g, C, g_inv)
    dgamma = hessian_gamma_derivative(g_inv, C, dC, gamma)
    # independent route for the curvature: generic formula with d_e d_u g_vw = d4
    dgamma_generic = christoffel_derivative(g_inv, gamma, C, dC)
    return HessPackage(
        point=stack.point,
        g=g,
        g_inv=g_inv,
        C=C,
        dC=dC,
        Gamma=gamma,
        dGamma=dgamma,
        dGamma_generic=dgamma_generic,
        Q=hessian_Q(g, dgamma),
        Qmix=mixed_Q(g, gamma, dgamma),
        R=riemann(g, gamma, dgamma_generic),
        G=g_pair(g),
    )


# --- audit of a second coordinate formula for Q ----------------------------

@dataclass(frozen=True)
class QFormulaAudit:
    full_derivative: np.ndarray
    half_derivative: np.ndarray
    full_derivative_residual: float
    half_derivative_residual: float
    scale: float
    full_derivative_matches: bool
    half_derivative_matches: bool

    @property
    def distinguishable(self) -> bool:
        return not (self.full_derivative_matches and self.half_derivative_matches)

    @property
    def verdict(self) -> str:
        if self.full_derivative_matches and self.half_derivative_matches:
            return "indistinguishable"
        if self.half_derivative_matches:
            return "half_derivative"
        if self.full_derivative_matches:
            return "full_derivative"
        return "neither"


def q_formula_audit(C: np.ndarray, dC: np.ndarray, g: np.ndarray, gamma: np.ndarray,
           q_def: np.ndarray, rtol: float = IDENTITY_RTOL) -> QFormulaAudit:
    """Evaluate ``Y2(C(Y1,Y3,Y4)) - 2 g(nabla_Y2 Y1, nabla_Y3 Y4)`` and its halved-derivative variant."""
    # dC[b, a, c, d] = d_b C_{acd};  tensor slot order (Y1, Y2, Y3, Y4) = (a, b, c, d)
    deriv = np.einsum("bacd->abcd", dC)
    product = 2.0 * np.einsum("pq,pba,qcd->abcd", g, gamma, gamma)
    full_derivative = deriv - product
    half_derivative = 0.5 * deriv - product
    scale = max(1.0, float(np.max(np.abs(q_def))))
    r_p = float(np.max(np.abs(full_derivative - q_def)))
    r_c = float(np.max(np.abs(half_derivative - q_def)))
    return QFormulaAudit(
        full_derivative=full_derivative,
        half_derivative=half_derivative,
        full_derivative_residual=r_p,
        half_derivative_residual=r_c,
        scale=scale,
        full_derivative_matches=r_p <= rtol * scale,
        half_derivative_matches=r_c <= rtol * scale,
    )


# --- identities --------------------------------------------------------------

def antisymmetrized(t: np.ndarray) -> np.ndarray:
    """``out[a, b, c, d] = t[a, c, d, b] - t[a, d, c, b]``."""
    return np.einsum("acdb->abcd", t) - np.einsum("adcb->abcd", t)


def slot_audit(target: np.ndarray, t: np.ndarray, factor: float, tol: float) -> dict:
    """Which slot permutations ``p`` of ``t`` satisfy ``target = factor * antisymmetrized(t^p)``."""
    residuals = {}
    for p in PERMUTATIONS:
        cand = factor * antisymmetrized(np.transpose(t, p))
        residuals[p] = float(np.max(np.abs(target - cand)))
    matching = [list(p) for p in PERMUTATIONS if residuals[p] <= tol]
    return {"matching": matching, "identity_residual": residuals[IDENTITY]}


def _max_abs(t: np.ndarray) -> float:
    return float(np.max(np.abs(t))) if t.size else 0.0


def gamma_products(g: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``g(nabla_b d_c, nabla_a d_d) + g(nabla_b d_d, nabla_a d_c)`` at slot ``[a, b, c, d]``."""
    return np.einsum("pq,pbc,qad->abcd", g, gamma, gamma) + np.einsum(
        "pq,pbd,qac->abcd", g, gamma, gamma
    )


def identity_suite(pkg: HessPackage, rtol: float = IDENTITY_RTOL) -> dict:
    """Max-abs residual of every identity of the Hessian layer, plus slot audits."""
    g, gamma, C = pkg.g, pkg.Gamma, pkg.C
    q_scale = max(1.0, _max_abs(pkg.Q))
    tol = rtol * q_scale

    difference_defect = np.einsum("wk,kuv->wuv", g, gamma) - 0.5 * C
    specialization = gamma - 0.5 * np.einsum("kp,puv->kuv", pkg.g_inv, C)
    torsion = gamma - np.einsum("kuv->kvu", gamma)
    routes = pkg.dGamma - pkg.dGamma_generic

    r_from_q = slot_audit(pkg.R, pkg.Q, 0.5, tol)
    r_from_mix = slot_audit(pkg.R, pkg.Qmix, 1.0, tol)

    difference = pkg.Q - pkg.Qmix
    expr_q = difference - gamma_products(g, gamma)
    # first display of the same relation, 1/2 [C(Y, nabla_Y' Y1, Y2) -/+ C(Y, Y1, nabla_Y' Y2)]
    c_first = np.einsum("apd,pbc->abcd", C, gamma)
    c_second = np.einsum("acp,pbd->abcd", C, gamma)
    c_minus = difference - 0.5 * (c_first - c_second)
    c_plus = difference - 0.5 * (c_first + c_second)

    return {
        "scale": q_scale,
        "difference_tensor": _max_abs(difference_defect),
        "levi_civita_specialization": _max_abs(specialization),
        "torsion": _max_abs(torsion),
        "christoffel_derivative_routes": _max_abs(routes),
        "riemann_from_q": r_from_q["identity_residual"],
        "riemann_from_mixed_q": r_from_mix["identity_residual"],
        "mixed_q_difference": _max_abs(expr_q),
        "mixed_q_difference_cartan_form": {
            "minus_sign": _max_abs(c_minus),
            "plus_sign": _max_abs(c_plus),
        },
        "permutation_audit": {
            "riemann_from_q": r_from_q["matching"],
            "riemann_from_mixed_q": r_from_mix["matching"],
        },
    }


def symmetry_suite(pkg: HessPackage) -> dict:
    """Relative residuals of the pair symmetries of Q, Qmix, G and R."""
    R = pkg.R

    def rel(res: float, t: np.ndarray) -> float:
        return res / max(1.0, _max_abs(t))

    return {
        "Q": rel(hessian_symmetry_residual(pkg.Q), pkg.Q),
        "Qmix": rel(hessian_symmetry_residual(pkg.Qmix), pkg.Qmix),
        "G": rel(hessian_symmetry_residual(pkg.G), pkg.G),
        "R_antisymmetry": rel(float(max(
            _max_abs(R + R.transpose(0, 1, 3, 2)), _max_abs(R + R.transpose(1, 0, 2, 3))
        )), R),
        "R_pair_symmetry": rel(_max_abs(R - R.transpose(2, 3, 0, 1)), R),
        "R_bianchi": rel(_max_abs(
            R + np.einsum("acdb->abcd", R) + np.einsum("adbc->abcd", R)
        ), R),
    }


# --- conical curvature -------------------------------------------------------

def conical_curvature(pkg: HessPackage, nu: np.ndarray) -> float:
    """Ratio of the quadratic forms of Q and G on the raised cone ``#nu``."""
    c = pair_coords(sharp(nu, pkg.g_inv))
    qf = quad_form(pkg.Q, check=False)
    gf = quad_form(pkg.G, check=False)
    den = float(c @ gf @ c)
    if abs(den) <= 1e-12 * max(_max_abs(gf), 1e-300) * float(c @ c):
        raise NullConeError("cone has vanishing norm; conical curvature undefined")
    return float(c @ qf @ c) / den


def decomposable_curvature(pkg: HessPackage, y1: np.ndarray, y2: np.ndarray) -> float:
    """``Q(Y, Y', Y, Y') / G(Y, Y', Y, Y')``."""
    num = np.einsum("abcd,a,b,c,d->", pkg.Q, y1, y2, y1, y2)
    den = np.einsum("abcd,a,b,c,d->", pkg.G, y1, y2, y1, y2)
    return float(num / den)


def random_planes(m: int, count: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = SplitMix64(seed)
    return [
        (np.array(rng.vector([-1.0] * m, [1.0] * m)), np.array(rng.vector([-1.0] * m, [1.0] * m)))
        for _ in range(count)
    ]


def sectional_curvature(pkg: HessPackage, y1: np.ndarray, y2: np.ndarray) -> float:
    g = pkg.g
    num = np.einsum("abcd,a,b,c,d->", pkg.R, y1, y2, y1, y2)
    den = (y1 @ g @ y1) * (y2 @ g @ y2) - (y1 @ g @ y2) ** 2
    return float(num / den)


@dataclass(frozen=True)
class ConstantCurvatureVerdict:
    is_pointwise_proportional: bool
    f: list[float]
    residuals: list[float]
    is_constant: bool
    sectional_deviation: float | None
    sectional_matches: bool | None

    def to_dict(self) -> dict:
        return {
            "is_pointwise_proportional": self.is_pointwise_proportional,
            "f": list(self.f),
            "proportionality_residuals": list(self.residuals),
            "is_constant": self.is_constant,
            "sectional_deviation": self.sectional_deviation,
            "sectional_matches": self.sectional_matches,
        }


def constant_curvature_audit(
    pkgs: Sequence[HessPackage], planes: int = 10, seed: int = 0, sectional_tol: float = 1e-10
) -> ConstantCurvatureVerdict:
    """Test ``Q = f G`` pointwise, constancy of ``f``, and sectional curvature ``-f/2``."""
    if len(pkgs) < 2:
        raise ValueError("constant_curvature_audit needs at least two sample points")
    fs, residuals, proportional = [], [], []
    for pkg in pkgs:
        q, gt = pkg.Q.ravel(), pkg.G.ravel()
        f = float(q @ gt / (gt @ gt))
        res = _max_abs(pkg.Q - f * pkg.G)
        fs.append(f)
        residuals.append(res)
        floor = 1e-14 * _max_abs(pkg.G)
        proportional.append(res <= 1e-8 * _max_abs(pkg.Q) or res <= floor)
    is_prop = all(proportional)
    f_ref = max(abs(f) for f in fs)
    is_const = max(fs) - min(fs) <= 1e-6 * (1.0 + f_ref)

    m = pkgs[0].dim
    deviation = None
    matches = None
    if m >= 2:
        deviation = 0.0
        for pkg, f in zip(pkgs, fs):
            for y1, y2 in random_planes(m, planes, seed):
                deviation = max(deviation, abs(sectional_curvature(pkg, y1, y2) + 0.5 * f))
        matches = deviation <= sectional_tol * max(1.0, f_ref) if is_prop else None
    return ConstantCurvatureVerdict(is_prop, fs, residuals, is_const, deviation, matches)
