"""Truncated multivariate Taylor arithmetic (jets) and derivative stacks.

A :class:`Jet` holds one Taylor coefficient per monomial of total degree at
most ``order`` (<= 4) in ``nvars`` variables.  The coefficient of the
monomial ``y^alpha`` is ``d^alpha f / alpha!``, so :func:`deriv_stack` only has
to multiply by ``alpha!`` to recover partial derivatives.

Products use a precomputed table of monomial pairs whose degrees add up to at
most ``order``; each product is then a single ``np.bincount``.

:func:`fd_probe` is an independent central-difference oracle.  It is never used
by the main pipeline.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .expr import ScalarField, evaluate

MAX_ORDER = 4

# per-order default FD steps, multiplied by max(1, |coordinate|) per variable
DEFAULT_FD_STEPS = {1: 1e-4, 2: 1e-4, 3: 1e-3, 4: 1e-2}


class _Algebra:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monomials = []
        first_of_degree = []
        for deg in range(order + 1):
            first_of_degree.append(len(monomials))
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                exps = [0] * nvars
                for v in combo:
                    exps[v] += 1
                monomials.append(tuple(exps))
        first_of_degree.append(len(monomials))
        self.monomials = monomials
        self.index = {m: k for k, m in enumerate(monomials)}
        self.size = len(monomials)
        self.degree = np.array([sum(m) for m in monomials])
        # number of monomials with degree <= d is first_of_degree[d + 1]
        ii, jj, kk = [], [], []
        for i, mi in enumerate(monomials):
            di = sum(mi)
            for j in range(first_of_degree[order - di + 1]):
                mj = monomials[j]
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(a + b for a, b in zip(mi, mj))])
        self.pi = np.array(ii, dtype=np.intp)
        self.pj = np.array(jj, dtype=np.intp)
        self.pk = np.array(kk, dtype=np.intp)
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in m) for m in monomials], dtype=float
        )

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self.pk, weights=a[self.pi] * b[self.pj], minlength=self.size)


@functools.lru_cache(maxsize=None)
def algebra(nvars: int, order: int = MAX_ORDER) -> _Algebra:
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    return _Algebra(nvars, order)


def _tanh_derivs(t: float) -> list[float]:
    s = 1.0 - t * t
    return [
        t,
        s,
        -2.0 * t * s,
        (6.0 * t * t - 2.0) * s,
        (16.0 * t - 24.0 * t ** 3) * s,
    ]


class Jet:
    """Truncated Taylor expansion; closed under + - * / and the grammar's functions."""

    __slots__ = ("alg", "coef")

    def __init__(self, alg: _Algebra, coef: np.ndarray):
        self.alg = alg
        self.coef = coef

    @classmethod
    def constant(cls, alg: _Algebra, value: float) -> "Jet":
        coef = np.zeros(alg.size)
        coef[0] = value
        return cls(alg, coef)

    @classmethod
    def variable(cls, alg: _Algebra, index: int, value: float) -> "Jet":
        jet = cls.constant(alg, value)
        if alg.order >= 1:
            exps = [0] * alg.nvars
            exps[index] = 1
            jet.coef[alg.index[tuple(exps)]] = 1.0
        return jet

    @property
    def value(self) -> float:
        return float(self.coef[0])

    def __repr__(self) -> str:
        return f"Jet(nvars={self.alg.nvars}, order={self.alg.order}, value={self.value!r})"

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.alg is not self.alg:
                raise ValueError("jets from different algebras")
            return other
        return Jet.constant(self.alg, float(other))

    # arithmetic

    def __neg__(self):
        return Jet(self.alg, -self.coef)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.alg, self._lift(other).coef + self.coef)
        coef = self.coef.copy()
        coef[0] = coef[0] + float(other)
        return Jet(self.alg, coef)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.alg, self.coef - self._lift(other).coef)
        coef = self.coef.copy()
        coef[0] = coef[0] - float(other)
        return Jet(self.alg, coef)

    def __rsub__(self, other):
        coef = -self.coef
        coef[0] = float(other) - self.coef[0]
        return Jet(self.alg, coef)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.alg, self.alg.mul(self.coef, self._lift(other).coef))
        return Jet(self.alg, self.coef * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = self._lift(other)
        return _divide(self, b)

    def __rtruediv__(self, other):
        return _divide(self._lift(other), self)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (p * self.log()).exp()
        p = float(p)
        a0 = self.value
        if p.is_integer():
            if a0 == 0.0 and p < 0:
                raise DomainError("division by zero", "")
        elif a0 <= 0.0:
            raise DomainError("non-integer power of non-positive base", "")
        derivs = [a0 ** p]
        fall = 1.0
        for k in range(1, self.alg.order + 1):
            fall *= p - (k - 1)
            if fall == 0.0:
                derivs.append(0.0)
            else:
                derivs.append(fall * a0 ** (p - k))
        return self._compose(derivs)

    # elementary functions

    def _compose(self, derivs: Sequence[float]) -> "Jet":
        """f(self) from f and its derivatives at the constant term."""
        out = np.zeros(self.alg.size)
        out[0] = derivs[0]
        if self.alg.order == 0:
            return Jet(self.alg, out)
        h = self.coef.copy()
        h[0] = 0.0
        hk = h
        for k in range(1, self.alg.order + 1):
            if k > 1:
                hk = self.alg.mul(hk, h)
            out = out + (derivs[k] / math.factorial(k)) * hk
        return Jet(self.alg, out)

    def exp(self):
        try:
            e = math.exp(self.value)
        except OverflowError:
            raise DomainError("exp overflow", "") from None
        return self._compose([e] * (self.alg.order + 1))

    def log(self):
        a = self.value
        if a <= 0.0:
            raise DomainError("log of non-positive argument", "")
        return self._compose([math.log(a), 1 / a, -1 / a ** 2, 2 / a ** 3, -6 / a ** 4])

    def sqrt(self):
        a = self.value
        if a < 0.0 or (a == 0.0 and self.alg.order > 0):
            raise DomainError("sqrt of non-positive argument", "")
        s = math.sqrt(a)
        if self.alg.order == 0:
            return self._compose([s])
        return self._compose(
            [s, 0.5 / s, -0.25 / (a * s), 0.375 / (a * a * s), -0.9375 / (a ** 3 * s)]
        )

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._compose([s, c, -s, -c, s])

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._compose([c, -s, -c, s, c])

    def tanh(self):
        derivs = _tanh_derivs(math.tanh(self.value))
        return self._compose(derivs)


def _divide(a: Jet, b: Jet) -> Jet:
    b0 = b.coef[0]
    if b0 == 0.0:
        raise DomainError("division by zero", "")
    alg = a.alg
    q = a.coef / b0
    if alg.order == 0:
        return Jet(alg, q)
    tail = b.coef.copy()
    tail[0] = 0.0
    # q * b = a, solved degree by degree; exact after `order` sweeps
    for _ in range(alg.order):
        q = (a.coef - alg.mul(q, tail)) / b0
    return Jet(alg, q)


@dataclass(frozen=True)
class DerivStack:
    """All partial derivatives of a scalar field at ``point`` up to ``order``.

    ``d2``, ``d3`` and ``d4`` are dense, fully symmetric arrays; entries the
    requested order did not compute are zero-filled (see ``order``).
    """

    dim: int
    point: np.ndarray
    d0: float
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    order: int = MAX_ORDER

    def partial(self, multi_index: Sequence[int]) -> float:
        k = len(multi_index)
        if k == 0:
            return self.d0
        return float((self.d1, self.d2, self.d3, self.d4)[k - 1][tuple(multi_index)])


def _as_jet(value, alg: _Algebra) -> Jet:
    if isinstance(value, Jet):
        return value
    return Jet.constant(alg, float(value))


def jet_of(
    field: ScalarField,
    point: Sequence[float],
    var_names: Sequence[str],
    order: int = MAX_ORDER,
    params: dict[str, float] | None = None,
) -> Jet:
    """Evaluate ``field`` on jet seeds; ``params`` are bound as plain constants."""
    alg = algebra(len(var_names), order)
    env: dict[str, object] = dict(params or {})
    for i, (name, value) in enumerate(zip(var_names, point)):
        env[name] = Jet.variable(alg, i, float(value))
    return _as_jet(evaluate(field, env), alg)


def stack_from_jet(jet: Jet, point: Sequence[float]) -> DerivStack:
    alg = jet.alg
    n = alg.nvars
    derivs = jet.coef * alg.factorial
    tensors = [np.zeros((n,) * k) for k in range(1, MAX_ORDER + 1)]
    for k, monomial in enumerate(alg.monomials):
        deg = sum(monomial)
        if deg == 0:
            continue
        idx = [v for v in range(n) for _ in range(monomial[v])]
        target = tensors[deg - 1]
        for perm in set(itertools.permutations(idx)):
            target[perm] = derivs[k]
    return DerivStack(
        dim=n,
        point=np.array(point, dtype=float),
        d0=float(derivs[0]),
        d1=tensors[0],
        d2=tensors[1],
        d3=tensors[2],
        d4=tensors[3],
        order=alg.order,
    )


def deriv_stack(
    field: ScalarField,
    point: Sequence[float],
    var_names: Sequence[str],
    order: int = MAX_ORDER,
    params: dict[str, float] | None = None,
) -> DerivStack:
    """Exact partials of ``field`` at ``point`` (orders 0..``order``)."""
    if len(point) != len(var_names):
        raise ValueError("point and var_names differ in length")
    unknown = field.used_vars - set(var_names) - set(params or {})
    if unknown:
        raise ValueError(f"field uses variables outside var_names: {sorted(unknown)}")
    return stack_from_jet(jet_of(field, point, var_names, order, params), point)


# --- finite-difference oracle ----------------------------------------------

_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def fd_probe(
    field: ScalarField,
    point: Sequence[float],
    multi_index: Sequence[int],
    step: float | None = None,
    var_names: Sequence[str] | None = None,
    params: dict[str, float] | None = None,
) -> float:
    """Central-difference estimate of the mixed partial named by ``multi_index``.

    Per-variable central stencils (second-order accurate) are combined by
    tensor product and evaluated in one vectorized pass.  An explicit
    ``step`` is used as given for every variable; the per-order default is
    scaled by ``max(1, |coordinate|)``.
    """
    var_names = list(var_names if var_names is not None else field.vars)
    point = np.asarray(point, dtype=float)
    order = len(multi_index)
    if order > MAX_ORDER:
        raise ValueError("fd_probe supports orders up to 4")
    if step is None:
        hs = DEFAULT_FD_STEPS.get(order, DEFAULT_FD_STEPS[1]) * np.maximum(1.0, np.abs(point))
    elif step <= 0:
        raise ValueError("step must be positive")
    else:
        hs = np.full(len(var_names), float(step))
    counts = [0] * len(var_names)
    for v in multi_index:
        counts[v] += 1

    axes = [(i, c) for i, c in enumerate(counts) if c]
    offsets = [np.array(_STENCILS[c][0], dtype=float) for _, c in axes]
    weights = [np.array(_STENCILS[c][1], dtype=float) for _, c in axes]
    if not axes:
        grid_w = np.ones(1)
        coords = {name: np.array([point[i]]) for i, name in enumerate(var_names)}
    else:
        mesh = np.meshgrid(*offsets, indexing="ij")
        wmesh = np.meshgrid(*weights, indexing="ij")
        grid_w = np.prod([w.ravel() for w in wmesh], axis=0)
        npts = grid_w.size
        coords = {name: np.full(npts, point[i]) for i, name in enumerate(var_names)}
        for (i, _), off in zip(axes, mesh):
            coords[var_names[i]] = point[i] + off.ravel() * hs[i]
    env: dict[str, object] = dict(params or {})
    env.update(coords)
    values = evaluate(field, env)
    values = np.broadcast_to(np.asarray(values, dtype=float), grid_w.shape)
    scale = math.prod(hs[i] ** c for i, c in axes) if axes else 1.0
    return float(np.dot(grid_w, values) / scale)
