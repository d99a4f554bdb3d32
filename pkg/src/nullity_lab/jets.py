"""Truncated multivariate Taylor arithmetic ("jets").

A jet of order ``p`` in ``N`` variables stores the Taylor coefficients of a
smooth function about a base point, for every monomial of total degree
``<= p``.  Monomials are kept in graded order so that truncating a jet to a
lower order is a prefix slice of the coefficient axis.

Jets are tensor valued: the coefficient array has shape ``(*tshape, M_p)``.
Every geometric quantity of the pipeline is carried as a jet, so derivatives
of anything (spray, connection, curvature) are read off exactly instead of
being re-derived by hand.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sps


class JetSpace:
    """Monomial bookkeeping shared by all jets with the same (nvars, order)."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos: list[tuple[int, ...]] = []
        sizes = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                monos.append(tuple(e))
            sizes.append(len(monos))
        self.monomials = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])
        # sizes[p] = number of monomials of degree <= p
        self.sizes = sizes
        self._deriv: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        self._pairs: dict[int, tuple[np.ndarray, np.ndarray, sps.csr_matrix]] = {}

    def size(self, p: int) -> int:
        return self.sizes[p]

    def deriv_table(self, v: int, p: int):
        """Index/factor arrays mapping an order-p jet to its d/dz_v (order p-1)."""
        key = (v, p)
        if key not in self._deriv:
            m = self.sizes[p - 1]
            src = np.empty(m, dtype=np.intp)
            fac = np.empty(m)
            for i in range(m):
                e = list(self.monomials[i])
                e[v] += 1
                src[i] = self.index[tuple(e)]
                fac[i] = e[v]
            self._deriv[key] = (src, fac)
        return self._deriv[key]

    def pair_table(self, p: int):
        """All coefficient pairs (a, b) whose product lands at degree <= p."""
        if p not in self._pairs:
            a_idx, b_idx, c_idx = [], [], []
            for a in range(self.sizes[p]):
                ea = self.monomials[a]
                da = self.degree[a]
                for b in range(self.sizes[p - da]):
                    eb = self.monomials[b]
                    a_idx.append(a)
                    b_idx.append(b)
                    c_idx.append(self.index[tuple(i + j for i, j in zip(ea, eb))])
            npairs = len(a_idx)
            red = sps.csr_matrix(
                (np.ones(npairs), (np.array(c_idx), np.arange(npairs))),
                shape=(self.sizes[p], npairs),
            )
            self._pairs[p] = (np.array(a_idx), np.array(b_idx), red)
        return self._pairs[p]


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _reduce(space: JetSpace, p: int, prod: np.ndarray) -> np.ndarray:
    _, _, red = space.pair_table(p)
    lead = prod.shape[:-1]
    flat = prod.reshape(-1, prod.shape[-1])
    out = (red @ flat.T).T
    return np.asarray(out).reshape(*lead, space.sizes[p])


class Jet:
    """Tensor-valued truncated Taylor series.

    ``c[..., 0]`` is the value at the base point; ``order`` says how many
    derivative levels are trustworthy.
    """

    __slots__ = ("space", "order", "c")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, order: int, c: np.ndarray):
        self.space = space
        self.order = order
        self.c = c

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, order: int, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (space.size(order),))
        c[..., 0] = value
        return cls(space, order, c)

    @classmethod
    def variable(cls, space: JetSpace, order: int, v: int, value: float) -> "Jet":
        c = np.zeros(space.size(order))
        c[0] = value
        if order >= 1:
            e = [0] * space.nvars
            e[v] = 1
            c[space.index[tuple(e)]] = 1.0
        return cls(space, order, c)

    @classmethod
    def stack(cls, jets, axis: int = 0) -> "Jet":
        jets = list(jets)
        p = min(j.order for j in jets)
        space = jets[0].space
        m = space.size(p)
        if axis < 0:
            axis -= 1
        return cls(space, p, np.stack([j.c[..., :m] for j in jets], axis=axis))

    # -- basic accessors --------------------------------------------------
    @property
    def value(self):
        v = self.c[..., 0]
        return v if v.ndim else float(v)

    @property
    def shape(self):
        return self.c.shape[:-1]

    def truncate(self, p: int) -> "Jet":
        if p > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {p}")
        return Jet(self.space, p, self.c[..., : self.space.size(p)])

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise IndexError("ellipsis indexing is not supported on jets")
        return Jet(self.space, self.order, self.c[key])

    def transpose(self, *axes) -> "Jet":
        return Jet(self.space, self.order, self.c.transpose(*axes, len(axes)))

    def reshape(self, *shape) -> "Jet":
        return Jet(self.space, self.order, self.c.reshape(*shape, self.c.shape[-1]))

    def __repr__(self):
        return f"Jet(order={self.order}, shape={self.shape}, value={self.value!r})"

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(self.space, self.order, other)

    def __add__(self, other):
        other = self._coerce(other)
        p = min(self.order, other.order)
        m = self.space.size(p)
        return Jet(self.space, p, self.c[..., :m] + other.c[..., :m])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.order, -self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            o = np.asarray(other, dtype=float)
            return Jet(self.space, self.order, self.c * o[..., None])
        p = min(self.order, other.order)
        a_idx, b_idx, _ = self.space.pair_table(p)
        prod = self.c[..., a_idx] * other.c[..., b_idx]
        return Jet(self.space, p, _reduce(self.space, p, prod))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            o = np.asarray(other, dtype=float)
            return Jet(self.space, self.order, self.c / o[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        return self.power(exponent)

    # -- composition with scalar functions --------------------------------
    def _series(self, coeffs) -> "Jet":
        """sum_k coeffs[k] * (self - self.value)**k, coeffs shaped (p+1, *tshape)."""
        p = self.order
        nil = Jet(self.space, p, self.c.copy())
        nil.c[..., 0] = 0.0
        out = Jet.constant(self.space, p, coeffs[0])
        term = None
        for k in range(1, p + 1):
            term = nil if term is None else term * nil
            if np.any(coeffs[k]):
                out = out + term * coeffs[k]
        return out

    def reciprocal(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        if np.any(v == 0):
            raise ZeroDivisionError("jet reciprocal of zero value")
        coeffs = [(-1.0) ** k / v ** (k + 1) for k in range(self.order + 1)]
        return self._series(coeffs)

    def power(self, a) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        a_is_int = float(a).is_integer()
        if a_is_int and a >= 0:
            ai = int(a)
            coeffs = [
                math.comb(ai, k) * v ** (ai - k) if k <= ai else np.zeros_like(v)
                for k in range(self.order + 1)
            ]
            return self._series(coeffs)
        if a_is_int:
            if np.any(v == 0):
                raise ZeroDivisionError("negative power of zero")
        elif np.any(v <= 0):
            raise ValueError("fractional power of non-positive base")
        coeffs = [_binom(float(a), k) * v ** (float(a) - k) for k in range(self.order + 1)]
        return self._series(coeffs)

    def exp(self) -> "Jet":
        v = np.exp(np.asarray(self.value, dtype=float))
        return self._series([v / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        if np.any(v <= 0):
            raise ValueError("log of non-positive value")
        coeffs = [np.log(v)] + [
            (-1.0) ** (k + 1) / (k * v**k) for k in range(1, self.order + 1)
        ]
        return self._series(coeffs)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    # -- calculus ---------------------------------------------------------
    def deriv(self, v: int) -> "Jet":
        if self.order < 1:
            raise ValueError("jet has no derivative information left")
        src, fac = self.space.deriv_table(v, self.order)
        return Jet(self.space, self.order - 1, self.c[..., src] * fac)

    def grad(self, variables) -> "Jet":
        """Stack d/dz_v over ``variables`` as a new trailing tensor axis."""
        return Jet.stack([self.deriv(v) for v in variables], axis=-1)

    def partial(self, multi_index) -> float | np.ndarray:
        """Value of the mixed partial derivative given as a list of variables."""
        e = [0] * self.space.nvars
        for v in multi_index:
            e[v] += 1
        d = sum(e)
        if d > self.order:
            raise ValueError(f"order {d} partial needs a jet of order >= {d}")
        scale = math.prod(math.factorial(k) for k in e)
        return self.c[..., self.space.index[tuple(e)]] * scale


def _binom(a: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


def jeinsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Two-operand einsum where the elementwise product is the jet product."""
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    letter = next(ch for ch in "ZQWXVU" if ch not in subscripts)
    p = min(a.order, b.order)
    space = a.space
    a_idx, b_idx, _ = space.pair_table(p)
    prod = np.einsum(
        f"{sa}{letter},{sb}{letter}->{out}{letter}", a.c[..., a_idx], b.c[..., b_idx]
    )
    return Jet(space, p, _reduce(space, p, prod))


def jmatinv(a: Jet) -> Jet:
    """Inverse of a square jet matrix via the Neumann series about its value."""
    a0inv = np.linalg.inv(a.value)
    x = -jeinsum("ij,jk->ik", Jet.constant(a.space, a.order, a0inv), _nilpart(a))
    inv0 = Jet.constant(a.space, a.order, a0inv)
    out = inv0
    term = inv0
    for _ in range(a.order):
        term = jeinsum("ij,jk->ik", x, term)
        out = out + term
    return out


def jsolve(a: Jet, rhs: Jet, a0inv: np.ndarray | None = None) -> Jet:
    """Solve ``a @ x = rhs`` for jets, differentiating through the solve.

    Fixed point of x = a0^{-1} (rhs - (a - a0) x); exact after ``order + 1``
    sweeps because ``a - a0`` has no constant term.
    """
    if a0inv is None:
        a0inv = np.linalg.inv(a.value)
    p = min(a.order, rhs.order)
    a = a.truncate(p)
    rhs = rhs.truncate(p)
    inv0 = Jet.constant(a.space, p, a0inv)
    da = _nilpart(a)
    x = jeinsum("ij,j->i", inv0, rhs)
    for _ in range(p):
        x = jeinsum("ij,j->i", inv0, rhs - jeinsum("ij,j->i", da, x))
    return x


def _nilpart(a: Jet) -> Jet:
    c = a.c.copy()
    c[..., 0] = 0.0
    return Jet(a.space, a.order, c)
