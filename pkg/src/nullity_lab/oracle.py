"""Independent ground truth: finite differences, coordinate brackets, a
Christoffel/Riemann calculator for quadratic energies, and point sampling.

Nothing here touches the jet engine except through value-level pipeline
calls (Gamma at stencil points), so agreement with the jet results is a
genuine cross-check.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .dsl import Const, DomainError, EnergyExpr, FieldSpec, differentiate, evaluate, mul, parse_energy, var_slot
from .geometry import ChartPoint, NonAdmissiblePoint, Pipeline, barthel_connection

# central-difference stencils (offset, weight) for the k-th derivative
_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
}


class StencilDomainError(ValueError):
    """A finite-difference stencil left the domain of the expression."""


@dataclass(frozen=True)
class FDResult:
    value: float
    error: float

    def __float__(self):
        return self.value


_DEFAULT_STEPS = {0: 1e-4, 1: 1e-4, 2: 1e-3, 3: 5e-3}


def default_step(total_order: int) -> float:
    # rounding error grows like eps / h^k while the Richardson-corrected
    # truncation error is O(h^4), so higher orders want wider steps
    return _DEFAULT_STEPS[min(total_order, 3)]


def _coords(z) -> np.ndarray:
    if isinstance(z, ChartPoint):
        return z.z
    return np.asarray(z, dtype=float)


def _fd_once(f: Callable[[np.ndarray], float], counts: dict[int, int], z0: np.ndarray, h: np.ndarray):
    terms = [[(v, off, w) for off, w in _STENCILS[k]] for v, k in counts.items()]
    total = 0.0
    for combo in itertools.product(*terms):
        z = z0.copy()
        weight = 1.0
        for v, off, w in combo:
            z[v] += off * h[v]
            weight *= w
        total = total + weight * f(z)
    scale = 1.0
    for v, k in counts.items():
        scale *= h[v] ** k
    return total / scale


def fd_derivative(f: Callable[[np.ndarray], float], multi_index: Sequence[int], z, step: float | None = None):
    """Mixed partial of a function of the 2n coordinates by central differences
    with one Richardson step (h and h/2).  Works for vector-valued f too."""
    z0 = _coords(z)
    counts: dict[int, int] = {}
    for v in multi_index:
        counts[v] = counts.get(v, 0) + 1
    if any(k > 3 for k in counts.values()):
        raise ValueError("finite differences support at most order 3 per variable")
    d = sum(counts.values())
    base = default_step(d) if step is None else step
    h = base * np.maximum(1.0, np.abs(z0))
    coarse = np.asarray(_fd_once(f, counts, z0, h))
    fine = np.asarray(_fd_once(f, counts, z0, h / 2))
    est = (4.0 * fine - coarse) / 3.0
    err = np.abs(fine - coarse) / 3.0
    return est, err


def fd_partial(E: EnergyExpr, multi_index: Sequence, z, step: float | None = None) -> FDResult:
    """Finite-difference estimate of a mixed partial of E.

    ``multi_index`` holds variable names ('y2') or 0-based slots in z = (x, y).
    """
    slots = [var_slot(v, E.dim) if isinstance(v, str) else int(v) for v in multi_index]

    def f(zz):
        try:
            return evaluate(E, zz)
        except DomainError as exc:
            raise StencilDomainError(f"stencil left the domain: {exc}") from exc

    est, err = fd_derivative(f, slots, z, step)
    return FDResult(float(est), float(err))


# ---------------------------------------------------------------------------
# Pipeline quantities assembled from finite differences of E only


def fd_fundamental_form(E: EnergyExpr, z, step: float | None = None) -> np.ndarray:
    """Omega[a,b] = Omega(e_a, e_b) from FD second derivatives of E."""
    n = E.dim
    H = np.zeros((2 * n, 2 * n))
    for a in range(2 * n):
        for b in range(a, 2 * n):
            H[a, b] = H[b, a] = fd_partial(E, [a, b], z, step).value
    hxy = H[:n, n:]
    g = H[n:, n:]
    w = np.zeros((2 * n, 2 * n))
    w[:n, :n] = hxy - hxy.T
    w[:n, n:] = -g
    w[n:, :n] = g
    return w


def fd_spray(E: EnergyExpr, z, step: float | None = None) -> np.ndarray:
    """Spray coefficients S^i from an FD-assembled Omega and dE."""
    n = E.dim
    w = fd_fundamental_form(E, z, step)
    dE = np.array([fd_partial(E, [a], z, step).value for a in range(2 * n)])
    s = np.linalg.solve(w.T, -dE)
    return -0.5 * s[n:]


def fd_barthel(E: EnergyExpr, z, step: float = 1e-2) -> np.ndarray:
    """Gamma^i_j = dS^i/dy^j by differencing the FD spray in y."""
    n = E.dim
    z0 = _coords(z)
    out = np.zeros((n, n))
    for j in range(n):
        est, _ = fd_derivative(lambda zz: fd_spray(E, zz), [n + j], z0, step)
        out[:, j] = est
    return out


# ---------------------------------------------------------------------------
# Brackets


def _field_values(field_: FieldSpec | Callable, z: np.ndarray) -> np.ndarray:
    if isinstance(field_, FieldSpec):
        try:
            return np.array([evaluate(c, z) for c in field_.coefficients])
        except DomainError as exc:
            raise StencilDomainError(f"stencil left the domain: {exc}") from exc
    return np.asarray(field_(z), dtype=float)


def horizontal_lift(E: EnergyExpr, coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Coordinate components of sum_i X^i h_i at z (2n entries)."""
    n = E.dim
    n_ = len(coeffs)
    if n_ != n:
        raise ValueError("field dimension does not match the energy")
    pt = ChartPoint(tuple(z[:n]), tuple(z[n:]))
    gamma = barthel_connection(E, pt)
    return np.concatenate([coeffs, -gamma @ coeffs])


def fd_bracket(E: EnergyExpr, A, B, z, step: float = 1e-4) -> np.ndarray:
    """[A, B] at z in coordinates (d/dx..., d/dy...), Jacobians by central
    differences of the full coordinate representations."""
    z0 = _coords(z)
    N = len(z0)

    def rep(zz):
        return np.concatenate([horizontal_lift(E, _field_values(A, zz), zz),
                               horizontal_lift(E, _field_values(B, zz), zz)])

    jac = np.zeros((2 * N, N))
    for v in range(N):
        est, _ = fd_derivative(rep, [v], z0, step)
        jac[:, v] = est
    a0, b0 = rep(z0)[:N], rep(z0)[N:]
    return jac[N:] @ a0 - jac[:N] @ b0


# ---------------------------------------------------------------------------
# Riemannian oracle


class NotPositiveDefinite(ValueError):
    pass


def quadratic_coefficients(E: EnergyExpr) -> list[list[EnergyExpr]]:
    """a_ij(x) = 1/2 d2E/dy^i dy^j for E = a_ij(x) y^i y^j."""
    n = E.dim
    a = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            e = differentiate(differentiate(E, f"y{i + 1}"), f"y{j + 1}")
            a[i][j] = a[j][i] = EnergyExpr(_half(e.node), n)
    return a


def _half(node):
    return mul(Const(Fraction(1, 2)), node)


def riemann_oracle(a, z, check_quadratic: bool = True) -> np.ndarray:
    """Classical Riemann tensor Riem[i,j,k,l] = component i of R(d_k, d_l) d_j.

    ``a`` is either a quadratic energy (EnergyExpr) or an n x n nested list of
    coefficient expressions a_ij(x).  Derivatives are symbolic, evaluated at x.
    """
    if isinstance(a, EnergyExpr):
        E = a
        a = quadratic_coefficients(E)
        if check_quadratic:
            for i, j in itertools.product(range(E.dim), repeat=2):
                if any(v.startswith("y") for v in a[i][j].variables):
                    raise ValueError("energy is not quadratic in y")
    n = len(a)
    a = [[parse_energy(c, n) if isinstance(c, str) else c for c in row] for row in a]
    zz = _coords(z)
    if len(zz) == n:
        zz = np.concatenate([zz, np.ones(n)])
    xs = [f"x{i + 1}" for i in range(n)]
    A = np.array([[evaluate(a[i][j], zz) for j in range(n)] for i in range(n)])
    if np.any(np.linalg.eigvalsh(A) <= 0):
        raise NotPositiveDefinite("coefficient matrix is not positive definite at z")
    dA = np.zeros((n, n, n))  # dA[i,j,k] = d_k a_ij
    ddA = np.zeros((n, n, n, n))  # ddA[i,j,k,l] = d_k d_l a_ij
    for i, j in itertools.product(range(n), repeat=2):
        for k in range(n):
            dk = differentiate(a[i][j], xs[k])
            dA[i, j, k] = evaluate(dk, zz)
            for l in range(n):
                ddA[i, j, k, l] = evaluate(differentiate(dk, xs[l]), zz)
    Ainv = np.linalg.inv(A)
    # lowered Christoffel symbols L[l,j,k] = 1/2 (d_j a_lk + d_k a_lj - d_l a_jk)
    L = 0.5 * (np.einsum("lkj->ljk", dA) + np.einsum("ljk->ljk", dA) - np.einsum("jkl->ljk", dA))
    Gam = np.einsum("il,ljk->ijk", Ainv, L)
    # d_m of lowered symbols, dL[l,j,k,m]
    dL = 0.5 * (np.einsum("lkjm->ljkm", ddA) + np.einsum("ljkm->ljkm", ddA) - np.einsum("jklm->ljkm", ddA))
    dAinv = -np.einsum("ia,abm,bl->ilm", Ainv, dA, Ainv)
    dGam = np.einsum("ilm,ljk->ijkm", dAinv, L) + np.einsum("il,ljkm->ijkm", Ainv, dL)
    # R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj
    R = (np.einsum("iljk->ijkl", dGam) - np.einsum("ikjl->ijkl", dGam)
         + np.einsum("ikm,mlj->ijkl", Gam, Gam) - np.einsum("ilm,mkj->ijkl", Gam, Gam))
    return R


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class Constraint:
    """``expr == 0``, ``expr != 0``, ``expr > 0`` or ``expr < 0``.

    For equalities, ``solve_for`` names the coordinate that is solved for;
    ``closed_form`` optionally gives it as an expression of the others.
    """

    expr: str
    kind: str = "=="
    solve_for: str | None = None
    closed_form: str | None = None

    def __post_init__(self):
        if self.kind not in ("==", "!=", ">", "<"):
            raise ValueError(f"bad constraint kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        """'expr == 0', 'expr != 0', 'expr > 0', 'expr < 0'; optional '; solve y4 = ...'."""
        body, _, solve = text.partition(";")
        closed = var = None
        if solve.strip():
            s = solve.strip()
            if not s.startswith("solve "):
                raise ValueError(f"bad constraint suffix {solve!r}")
            var, _, closed = s[6:].partition("=")
            var = var.strip()
            closed = closed.strip() or None
        for kind in ("==", "!=", ">", "<"):
            lhs, sep, rhs = body.partition(kind)
            if sep:
                if rhs.strip() not in ("0", "0.0"):
                    lhs = f"({lhs})-({rhs})"
                return cls(lhs.strip(), kind, var, closed)
        raise ValueError(f"constraint {text!r} has no relation")


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    box: tuple[tuple[float, float], ...]
    constraints: tuple[Constraint, ...] = ()
    max_rejects: int = 10000
    margin: float = 1e-6  # |expr| must exceed this for '!=' constraints

    def __post_init__(self):
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for lo, hi in self.box:
            if not lo <= hi:
                raise ValueError("box intervals must satisfy lo <= hi")


class SamplingFailure(RuntimeError):
    pass


def _solve_equality(c: Constraint, e: EnergyExpr, z: np.ndarray, box) -> bool:
    n = e.dim
    var = c.solve_for or max(e.variables, key=lambda v: var_slot(v, n))
    slot = var_slot(var, n)
    if c.closed_form is not None:
        try:
            z[slot] = evaluate(parse_energy(c.closed_form, n), z)
        except DomainError:
            return False
        return True
    lo, hi = box[slot]

    def f(t):
        zz = z.copy()
        zz[slot] = t
        return evaluate(e, zz)

    try:
        grid = np.linspace(lo, hi, 65)
        vals = [f(t) for t in grid]
    except DomainError:
        return False
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            z[slot] = a
            return True
        if fa * fb < 0:
            z[slot] = brentq(f, a, b, xtol=1e-14, rtol=1e-14)
            return True
    return False


def sample_points(E: EnergyExpr, config: SamplerConfig, count: int, worker: int = 0,
                  require_order: int = 2) -> list[ChartPoint]:
    """Deterministic stream of admissible points for a given (seed, worker)."""
    n = E.dim
    if len(config.box) != 2 * n:
        raise ValueError(f"box needs {2 * n} intervals, got {len(config.box)}")
    rng = np.random.default_rng([config.seed, worker])
    parsed = [(c, parse_energy(c.expr, n)) for c in config.constraints]
    lo = np.array([b[0] for b in config.box])
    hi = np.array([b[1] for b in config.box])
    out: list[ChartPoint] = []
    rejects = 0
    while len(out) < count:
        z = lo + (hi - lo) * rng.random(2 * n)
        ok = True
        for c, e in parsed:
            if c.kind == "==":
                ok = _solve_equality(c, e, z, config.box)
                if ok:
                    try:
                        ok = abs(evaluate(e, z)) <= 1e-12 * max(1.0, float(np.max(np.abs(z))) ** 3)
                    except DomainError:
                        ok = False
            if not ok:
                break
        if ok:
            for c, e in parsed:
                try:
                    v = evaluate(e, z)
                except DomainError:
                    ok = False
                    break
                if (c.kind == "!=" and abs(v) <= config.margin) or (c.kind == ">" and v <= 0) or (c.kind == "<" and v >= 0):
                    ok = False
                    break
        if ok:
            try:
                pt = ChartPoint(tuple(z[:n]), tuple(z[n:]))
                p = Pipeline(E, pt, require_order)
                p.omega
                p.g
            except (NonAdmissiblePoint, ValueError, ZeroDivisionError):
                ok = False
        if ok:
            out.append(ChartPoint(pt.x, pt.y, True))
        else:
            rejects += 1
            if rejects > config.max_rejects:
                raise SamplingFailure(f"gave up after {rejects} rejected candidates")
    return out
