"""Small dense tensor algebra on a single chart.

Tensors are plain numpy arrays.  A rank-4 tensor ``T[a, b, c, d]`` is
``T(d_a, d_b, d_c, d_d)`` in argument order.  "Hessian-symmetric" means

    T[a,b,c,d] == T[a,b,d,c] == T[c,d,a,b] == T[b,a,c,d]

Quadratic forms on symmetric 2-tensors use the fixed basis
``{e_u (.) e_v : u <= v}`` with ``e_u (.) e_v = e_u x e_v + e_v x e_u`` for
``u < v`` and ``e_u x e_u`` on the diagonal.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveDefiniteError, SingularMetricError, SymmetryError

SINGULAR_DET_RTOL = 1e-12


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def invert(g: np.ndarray, point=None) -> np.ndarray:
    """Inverse of a symmetric (possibly indefinite) metric."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    det = float(np.linalg.det(g)) if m else 1.0
    if scale == 0.0 or abs(det) < SINGULAR_DET_RTOL * scale ** m:
        raise SingularMetricError(det, point)
    return symmetrize(np.linalg.inv(g))


def sharp(nu: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """Raise both indices: ``(#nu)^{uv} = g^{ua} g^{vb} nu_{ab}``."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != g_inv.shape:
        raise ValueError(f"dimension mismatch: {nu.shape} vs {g_inv.shape}")
    return np.einsum("ua,vb,ab->uv", g_inv, g_inv, nu)


def flat(tau: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.einsum("ua,vb,ab->uv", g, g, tau)


def hessian_symmetry_residual(t: np.ndarray) -> float:
    """Max-abs violation of the three Hessian-curvature symmetries."""
    return float(max(
        np.max(np.abs(t - t.transpose(0, 1, 3, 2))),
        np.max(np.abs(t - t.transpose(2, 3, 0, 1))),
        np.max(np.abs(t - t.transpose(1, 0, 2, 3))),
    )) if t.size else 0.0


def is_hessian_symmetric(t: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(t)))) if t.size else 1.0
    return hessian_symmetry_residual(t) <= rtol * scale


def pair_basis(m: int) -> np.ndarray:
    """Basis matrices ``E[i]`` of symmetric 2-tensors, shape ``(m(m+1)/2, m, m)``."""
    pairs = [(u, v) for u in range(m) for v in range(u, m)]
    basis = np.zeros((len(pairs), m, m))
    for i, (u, v) in enumerate(pairs):
        basis[i, u, v] = 1.0
        basis[i, v, u] = 1.0
    return basis


def pair_coords(tau: np.ndarray) -> np.ndarray:
    """Coordinates of a symmetric 2-tensor in :func:`pair_basis`."""
    m = tau.shape[0]
    return np.array([tau[u, v] for u in range(m) for v in range(u, m)])


def from_pair_coords(c: np.ndarray, m: int) -> np.ndarray:
    return np.einsum("i,iuv->uv", c, pair_basis(m))


def quad_form(t: np.ndarray, check: bool = True) -> np.ndarray:
    """Bilinear form ``B(tau, sigma) = T_{uvst} tau^{uv} sigma^{st}`` on the pair basis."""
    if check and not is_hessian_symmetric(t):
        raise SymmetryError("quad_form needs a tensor with the Hessian-curvature symmetries")
    basis = pair_basis(t.shape[0])
    form = np.einsum("uvst,iuv,jst->ij", t, basis, basis)
    return symmetrize(form)


def gen_eig(qf: np.ndarray, gf: np.ndarray):
    """Solve ``qf v = lam gf v`` for symmetric ``qf`` and positive definite ``gf``.

    Cholesky reduction to a standard symmetric problem.  Returns eigenvalues in
    ascending order, the Gf-orthonormal coordinate vectors as columns, and the
    same vectors as symmetric 2-tensors.  Each vector is signed so that its
    first non-negligible component is positive.
    """
    qf = symmetrize(np.asarray(qf, dtype=float))
    gf = symmetrize(np.asarray(gf, dtype=float))
    try:
        chol = np.linalg.cholesky(gf)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "reference form is not positive definite; principal conical curvatures undefined"
        ) from None
    linv = np.linalg.inv(chol)
    reduced = symmetrize(linv @ qf @ linv.T)
    lam, w = np.linalg.eigh(reduced)
    vecs = linv.T @ w
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        tol = 1e-12 * float(np.max(np.abs(col)))
        lead = next(x for x in col if abs(x) > tol)
        if lead < 0:
            vecs[:, k] = -col
    n = int(round((np.sqrt(8 * qf.shape[0] + 1) - 1) / 2))
    tensors = np.einsum("ik,iuv->kuv", vecs, pair_basis(n))
    return lam, vecs, tensors
