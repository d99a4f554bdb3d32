"""The three worked examples: energies, domains, printed component tables,
nullity-field specs, and the end-to-end reproduction report.

Printed tables are transcribed verbatim as functions of (x, y) keyed by the
1-based index tuple exactly as printed.  Each table records the published
array it is compared against and the global sign that relates the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .dsl import FieldSpec, evaluate, parse_energy
from .geometry import CONVENTIONS, ChartPoint, GeometryBundle, Pipeline, bundle_from_pipeline
from .nullity import (
    containment,
    integrability_check,
    lie_bracket,
    nullity_space,
    span_angle,
)
from .oracle import Constraint, SamplerConfig, fd_barthel, fd_bracket, fd_spray, sample_points

MATCH_RTOL = 1e-6


@dataclass(frozen=True)
class PrintedTable:
    name: str
    tensor: str  # GeometryBundle attribute, or "bracket"
    sign: float  # printed = sign * published
    entries: Callable[[tuple, tuple], dict[tuple, float]]
    note: str = ""


@dataclass(frozen=True)
class Stratum:
    name: str
    constraints: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    expected: dict[str, Callable[[ChartPoint], np.ndarray]] = field(default_factory=dict)


@dataclass(frozen=True)
class Example:
    id: int
    energy: str
    dim: int
    domain: tuple[str, ...]
    point: ChartPoint
    tables: tuple[tuple[PrintedTable, ChartPoint], ...]
    strata: tuple[Stratum, ...]
    fields: tuple[str, str] | None = None
    bracket_which: str | None = None

    @property
    def E(self):
        return parse_energy(self.energy, self.dim)

    def field_specs(self) -> tuple[FieldSpec, FieldSpec]:
        return tuple(FieldSpec.parse(f, self.dim) for f in self.fields)


# ---------------------------------------------------------------------------
# Example 1


def _ex1_spray(x, y):
    x4 = x[3]
    _, y2, y3, y4 = y
    return {(2,): 3 * y2 * y4 / (4 * x4), (3,): 3 * y3 * y4 / (4 * x4),
            (4,): -(y2**3 + y3**3 - 2 * y4**3) / (4 * x4 * y4)}


def _ex1_gamma(x, y):
    x4 = x[3]
    _, y2, y3, y4 = y
    return {(2, 2): 3 * y4 / (4 * x4), (2, 4): 3 * y2 / (4 * x4), (3, 3): 3 * y4 / (4 * x4),
            (3, 4): 3 * y3 / (4 * x4), (4, 2): -3 * y2**2 / (4 * x4 * y4), (4, 3): -3 * y3**2 / (4 * x4 * y4),
            (4, 4): (y2**3 + y3**2 + 4 * y4**3) / (4 * x4 * y4**2)}


def _ex1_barthel(x, y):
    d = x[3] ** 2
    _, y2, y3, y4 = y
    s = y2**3 + y3**2 + 5 * y4**3
    return {(2, 2, 3): 9 * y3**2 / (16 * d * y4), (2, 2, 4): -3 * s / (16 * d * y4**2),
            (3, 2, 3): -9 * y2**2 / (16 * d * y4), (3, 3, 4): -3 * s / (16 * d * y4**2),
            (4, 2, 4): 3 * y2**2 * s / (16 * d * y4**4), (4, 3, 4): 3 * y3**2 * s / (16 * d * y4**4)}


def _ex1_R(x, y):
    d = x[3] ** 2
    y1, y2, y3, y4 = y
    return {
        (2, 1, 2, 3): -9 * y3**2 / (32 * d * y1 * y4),
        (3, 1, 2, 3): 9 * y2**2 / (32 * d * y1 * y4),
        (1, 2, 2, 3): -9 * y1 * y2 * y3**2 / (64 * d * y4**4),
        (2, 2, 2, 3): -9 * y2**2 * y3**2 / (128 * d * y4**4),
        (3, 2, 2, 3): -9 * y2 * (4 * y2**3 + 6 * y3**3) / (256 * d * y4**4),
        (4, 2, 2, 3): -45 * y2 * y3**2 / (128 * d * y4**3),
        (3, 2, 2, 4): -108 * y2 * y3 / (256 * d * y4**2),
        (4, 2, 2, 4): -3 * y2 * (y3**3 * (2 * y3**3 - 30 * y4**3) - y2**3 * (2 * y2**3 + 14 * y4**3) - 20 * y4**6)
        / (256 * d * y4**7),
        (3, 2, 3, 4): 27 * y2**2 / (64 * d * y4**2),
        (4, 2, 3, 4): 27 * y2**2 * y3**2 / (64 * d * y4**4),
        (1, 3, 2, 3): 9 * y1 * y2**2 * y3 / (64 * d * y4**4),
        (2, 3, 2, 3): 9 * y3 * (y2**3 - 8 * y4**3) / (128 * d * y4**4),
        (3, 3, 2, 3): 9 * y2**2 * y3**2 / (128 * d * y4**4),
        (4, 3, 2, 3): 45 * y2**2 * y3 / (128 * d * y4**3),
        (2, 3, 2, 4): 27 * y3**2 * y4**3 / (64 * d * y4**5),
        (4, 3, 2, 4): -27 * y2**2 * y3**2 / (64 * d * y4**4),
        (2, 3, 3, 4): -27 * y2 * y3 * y4**3 / (64 * d * y4**5),
        (4, 3, 3, 4): 3 * y3 * (y3**3 * (-3 * y2**3 + 4 * y4**3) + 5 * y4**3 * (4 * y4**3 + 5 * y2**3) - 3 * y2**6)
        / (256 * d * y4**7),
        (3, 4, 2, 3): -9 * y2**2 / (32 * d * y4**2),
        (3, 4, 2, 4): 27 * y2**2 * y3 / (64 * d * y4**3),
        (2, 4, 2, 4): -3 * (y3**3 * (4 * y2**3 + 38 * y4**3) + 2 * y2**3 * (2 * y2**3 + 11 * y4**3) + 10 * y2**6)
        / (256 * d * y4**6),
        (2, 4, 3, 2): -9 * y3**2 / (32 * d * y4**2),
        (2, 4, 3, 4): 27 * y2 * y3**2 / (64 * d * y4**3),
        (3, 4, 3, 4): -34 * (y3**6 + 22 * y3**3 * y4**3 + y2**3 * y3**3 + 23 * y2**3 * y4**3 - 3 * y2**6 + 10 * y4**6)
        / (256 * d * y4**6),
    }


def _surface_y4(y2: float, y3: float) -> float:
    return float(-np.cbrt((y2**3 + y3**3) / 5.0))


_EX1_SURFACE = ChartPoint((0.0, 0.0, 0.0, 1.0), (1.0, 1.0, 1.0, _surface_y4(1.0, 1.0)))


def _e(k, n):
    v = np.zeros(n)
    v[k] = 1.0
    return v


EXAMPLE_1 = Example(
    id=1,
    energy="x4*y1*(y2^3+y3^3+y4^3)^(1/3)",
    dim=4,
    domain=("x4 != 0", "y1 != 0", "y2 != 0", "y3 != 0", "y4 != 0"),
    point=ChartPoint((0.0, 0.0, 0.0, 1.0), (1.0, 1.0, 1.0, 1.0)),
    tables=(
        (PrintedTable("spray", "spray", 1.0, _ex1_spray), ChartPoint((0.0, 0.0, 0.0, 1.0), (1.0, 1.0, 1.0, 1.0))),
        (PrintedTable("barthel_connection", "gamma", 1.0, _ex1_gamma),
         ChartPoint((0.0, 0.0, 0.0, 1.0), (1.0, 1.0, 1.0, 1.0))),
        (PrintedTable("barthel_curvature", "barthel_curv", 1.0, _ex1_barthel),
         ChartPoint((0.0, 0.0, 0.0, 1.0), (1.0, 1.0, 1.0, 1.0))),
        (PrintedTable("h_curvature_on_surface", "curv_R", -1.0, _ex1_R,
                      "printed only on y2^3+y3^3+5y4^3 = 0; printed with the opposite overall sign"), _EX1_SURFACE),
    ),
    strata=(
        Stratum("generic", ("x4 != 0", "y2^3+y3^3+5*y4^3 != 0"),
                ((-1, 1), (-1, 1), (-1, 1), (0.5, 2), (0.5, 2), (0.5, 2), (0.5, 2), (0.5, 2)),
                {"barthel": lambda z: np.array([_e(0, 4)])}),
        Stratum("surface", ("y2^3+y3^3+5*y4^3 == 0; solve y4 = -((y2^3+y3^3)/5)^(1/3)",),
                ((-1, 1), (-1, 1), (-1, 1), (0.5, 2), (0.5, 2), (0.5, 2), (0.5, 2), (-2, -0.1)),
                {"barthel": lambda z: np.array([_e(0, 4), _e(3, 4)]),
                 "R": lambda z: np.array([_e(0, 4)])}),
    ),
)


# ---------------------------------------------------------------------------
# Example 2


def _ex2_P(x, y):
    x1, x2, x3 = x
    y1, y2, y3 = y
    ex = math.exp(-x1 * x3)
    s1 = ex * y1**2 * y3 + x2 * y2**3
    s2 = 7 * ex * y1**2 * y3 + 12 * x2 * y2**3
    s3 = (5 * ex * y1**2 * y3 + 3 * x2 * y2**3) / ex
    t = {
        (1, 1, 1, 1): -3 * x2 * y2**3 / (32 * y1 * s1),
        (2, 1, 1, 1): -y2 * s2 / (32 * y1**2 * s1),
        (3, 1, 1, 1): -9 * x2 * y2**3 * y3 / (32 * y1**2 * s1),
        (1, 1, 1, 2): 3 * x2 * y2**2 / (32 * s1),
        (2, 1, 1, 2): s2 / (32 * y1 * s1),
        (3, 1, 1, 2): 9 * x2 * y2**2 * y3 / (32 * y1 * s1),
        (1, 1, 2, 2): -3 * x2 * y1 * y2 / (32 * s1),
        (2, 1, 2, 2): -s2 / (32 * y2 * s1),
        (3, 1, 2, 2): -x2 * y2 * y3 / (32 * s1),
        (1, 2, 1, 1): 3 * x2 * y2**2 / (32 * s1),
        (2, 2, 1, 1): x2 * y2**3 / (16 * y1 * s1),
        (3, 2, 1, 1): 3 * x2 * y2**2 * s3 / (16 * y1**3 * s1),
        (1, 2, 2, 1): -3 * x2 * y1 * y2 / (32 * s1),
        (2, 2, 2, 1): -3 * x2 * y2**2 / (16 * s1),
        (3, 2, 2, 1): -3 * x2 * y2 / (16 * y1**2 * s1),
        (1, 2, 2, 2): 3 * x2 * y1**2 / (32 * s1),
        (2, 2, 2, 2): 3 * x2 * y1 * y2 / (16 * s1),
        (3, 2, 2, 2): 3 * x2 * s3 / (16 * s1),
        (2, 3, 1, 1): y1 * y2 * ex / (32 * s1),
        (3, 3, 1, 1): -3 * x2 * y2**3 / (32 * y1 * s1),
        (2, 3, 1, 2): -x2 * y1**2 * ex / (32 * y1**3 * s1),
        (3, 3, 1, 2): 3 * x2 * y2**2 / (32 * s1),
        (2, 3, 2, 2): y1**3 * ex / (32 * y2 * s1),
        (3, 3, 2, 2): -3 * x2 * y1 * y2 / (32 * s1),
    }
    # entries printed as "= P^h_{ikj}" duplicates
    for a, b in [((1, 1, 2, 1), (1, 1, 1, 2)), ((2, 1, 2, 1), (2, 1, 1, 2)), ((3, 1, 2, 1), (3, 1, 1, 2)),
                 ((1, 2, 1, 2), (1, 2, 2, 1)), ((2, 2, 1, 2), (2, 2, 2, 1)), ((3, 2, 1, 2), (3, 2, 2, 1)),
                 ((2, 3, 2, 1), (2, 3, 1, 2)), ((3, 3, 2, 1), (3, 3, 1, 2))]:
        t[a] = t[b]
    return t


EXAMPLE_2 = Example(
    id=2,
    energy="exp(-x1)*(exp(-x1*x3)*y1^2*y3+x2*y2^3)^(2/3)",
    dim=3,
    domain=("x2 != 0", "y1 != 0", "y2 != 0"),
    point=ChartPoint((0.0, 1.0, 0.0), (1.0, 1.0, 1.0)),
    tables=((PrintedTable("hv_curvature", "curv_P", -1.0, _ex2_P, "printed with the opposite overall sign"), ChartPoint((0.0, 1.0, 0.0), (1.0, 1.0, 1.0))),),
    strata=(
        Stratum("generic", ("x2 != 0",),
                ((-0.5, 0.5), (0.5, 2), (-0.5, 0.5), (0.5, 2), (0.5, 2), (0.5, 2)),
                {"P": lambda z: np.array([[1.0, z.y[1] / z.y[0], 0.0], [0.0, 0.0, 1.0]])}),
    ),
    fields=("1, y2/y1, 0", "0, 0, 1"),
    bracket_which="P",
)


def _ex2_bracket(x, y):
    return {(1,): -0.5 * y[0], (3,): y[2]}


# ---------------------------------------------------------------------------
# Example 3


def _ex3_Q(x, y):
    y1, y2, y3, y4 = y
    return {
        (3, 1, 1, 3): -y3 / (2 * y1**2 * y4), (4, 1, 1, 3): -1 / (2 * y1**2),
        (3, 1, 1, 4): y3**2 / (2 * y1**2 * y4**2), (4, 1, 1, 4): y3 / (2 * y1**2 * y4),
        (3, 1, 3, 4): -y3 / (2 * y1 * y4**2), (4, 1, 3, 4): -1 / (2 * y1 * y4),
        (3, 3, 1, 3): -1 / (2 * y1 * y4), (1, 3, 1, 4): y3 / (4 * y4**3),
        (1, 3, 3, 1): -1 / (4 * y4**2), (1, 3, 3, 4): -y1 / (4 * y4**3),
        (3, 3, 3, 4): -1 / (2 * y1**2), (3, 3, 4, 1): -y3 / (2 * y1**2 * y4),
        (1, 4, 1, 3): y3 / (4 * y4**3), (3, 4, 1, 3): y3 / (y1 * y4**2),
        (1, 4, 1, 4): -y3**2 / (4 * y4**4), (3, 4, 1, 4): -y3 / (y1 * y4**2),
        (4, 4, 1, 4): -y3 / (2 * y1 * y4**2), (4, 4, 1, 3): 1 / (2 * y1**2 * y4),
        (4, 4, 2, 3): 1 / (2 * y1 * y4), (1, 4, 3, 4): y1 * y3 / (4 * y4**4),
        (3, 4, 3, 4): y3 / y4**3,
    }


def _ex3_bracket(x, y):
    x2 = x[1]
    y1, y2, y3, y4 = y
    return {(1,): -y1 * y2 / (2 * x2**2 * y4),
            (2,): y1**2 * (5 * y3 - 2 * y4) / (4 * x2 * y4**2) * math.exp(-y3 / y4),
            (4,): y4 / (2 * x2**2)}


EXAMPLE_3 = Example(
    id=3,
    energy="x2*y1^2*exp(-y3/y4)+y2^2",
    dim=4,
    domain=("x2 != 0", "y1 != 0", "y3 != 0", "y4 != 0"),
    point=ChartPoint((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0)),
    tables=((PrintedTable("v_curvature", "curv_Q", 1.0, _ex3_Q), ChartPoint((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))),),
    strata=(
        Stratum("generic", ("x2 != 0",),
                ((-1, 1), (0.5, 2), (-1, 1), (-1, 1), (0.5, 2), (0.5, 2), (0.5, 2), (0.5, 2)),
                {"Q": lambda z: np.array([[0.0, 1.0, 0.0, 0.0], [z.y[0] / z.y[3], 0.0, z.y[2] / z.y[3], 1.0]])}),
    ),
    fields=("0, 1, 0, 0", "y1/y4, 0, y3/y4, 1"),
    bracket_which="Q",
)

EXAMPLES = {1: EXAMPLE_1, 2: EXAMPLE_2, 3: EXAMPLE_3}
BRACKET_TABLES = {2: PrintedTable("bracket", "bracket", 1.0, _ex2_bracket),
                  3: PrintedTable("bracket", "bracket", 1.0, _ex3_bracket)}


def get_example(k: int) -> Example:
    if k not in EXAMPLES:
        raise ValueError(f"no example {k}; choose 1, 2 or 3")
    return EXAMPLES[k]


# ---------------------------------------------------------------------------
# Table comparison


@dataclass(frozen=True)
class EntryMatch:
    index: tuple[int, ...]
    printed: float
    computed: float
    oracle: float | None
    match: bool

    def to_dict(self) -> dict:
        d = {"index": list(self.index), "printed": self.printed, "computed": self.computed, "match": self.match}
        if self.oracle is not None:
            d["oracle"] = self.oracle
        if not self.match and self.printed != 0 and self.computed != 0:
            d["ratio"] = self.computed / self.printed
        return d


@dataclass
class TableComparison:
    name: str
    point: ChartPoint
    entries: list[EntryMatch]
    unprinted_nonzero: list[tuple[tuple[int, ...], float]]
    note: str = ""

    @property
    def matched(self) -> int:
        return sum(e.match for e in self.entries)

    @property
    def total(self) -> int:
        return len(self.entries)

    @property
    def rate(self) -> float:
        return self.matched / self.total if self.total else 1.0

    def mismatches(self) -> list[EntryMatch]:
        return [e for e in self.entries if not e.match]

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "point": {"x": list(self.point.x), "y": list(self.point.y)},
            "matched": self.matched,
            "total": self.total,
            "rate": self.rate,
            "entries": [e.to_dict() for e in self.entries],
            "unprinted_nonzero": [{"index": list(i), "computed": v} for i, v in self.unprinted_nonzero],
        }
        if self.note:
            d["note"] = self.note
        return d


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def _independent_values(b: GeometryBundle, tensor: str) -> np.ndarray | None:
    """Values from a second route, used to adjudicate printed mismatches."""
    p = b.pipeline
    if p is None:
        return None
    E, z = p.energy, b.point
    if tensor == "spray":
        return fd_spray(E, z)
    if tensor == "gamma":
        return fd_barthel(E, z)
    if tensor == "barthel_curv":
        n = b.n
        out = np.zeros((n, n, n))
        for j in range(n):
            for k in range(n):
                if j < k:
                    raw = fd_bracket(E, lambda zz, j=j: np.eye(n)[j], lambda zz, k=k: np.eye(n)[k], z)
                    # published Rb^h_jk is the vertical part of [h_j, h_k]
                    v = raw[n:] + b.gamma @ raw[:n]
                    out[:, k, j] = -v
                    out[:, j, k] = v
        return out
    V = lambda j: np.asarray(j.value)  # noqa: E731
    C, Cp, Rb = V(p.C_jet), V(p.Cp_jet), V(p.barthel_int_jet)
    if tensor == "curv_Q":
        return np.einsum("mai,hmb->hiab", C, C) - np.einsum("mbi,hma->hiab", C, C)
    if tensor == "curv_R":
        return np.swapaxes(_r_route(p, C, Cp, Rb), -1, -2)
    if tensor == "curv_P":
        return _p_route(p, C, Cp)
    return None


def _r_route(p, C, Cp, Rb):
    """R from the Berwald curvature and the second Cartan tensor (intrinsic slots)."""
    V = lambda j: np.asarray(j.value)  # noqa: E731
    DhCp = V(p.covariant(p.Cp_jet, "udd", "h"))
    return (V(p.Rber_int_jet) + np.einsum("hbia->hiab", DhCp) - np.einsum("haib->hiab", DhCp)
            + np.einsum("mai,hmb->hiab", Cp, Cp) - np.einsum("mbi,hma->hiab", Cp, Cp)
            + np.einsum("mab,hmi->hiab", Rb, C))


def _p_route(p, C, Cp):
    """P from the Berwald hv-curvature and both Cartan tensors (intrinsic slots)."""
    V = lambda j: np.asarray(j.value)  # noqa: E731
    DhC = V(p.covariant(p.C_jet, "udd", "h"))
    DvCp = V(p.covariant(p.Cp_jet, "udd", "v"))
    return (V(p.Pber_int_jet) + np.einsum("hbia->hiab", DhC) - np.einsum("haib->hiab", DvCp)
            + np.einsum("mai,hmb->hiab", Cp, C) + np.einsum("mab,hmi->hiab", Cp, C)
            - np.einsum("mbi,hma->hiab", C, Cp) - np.einsum("mab,hmi->hiab", C, Cp))


def compare_table(table: PrintedTable, b: GeometryBundle, rtol: float = MATCH_RTOL,
                  computed: np.ndarray | None = None, oracle: np.ndarray | None = None) -> TableComparison:
    z = b.point
    printed = table.entries(z.x, z.y)
    arr = np.asarray(getattr(b, table.tensor) if computed is None else computed) * table.sign
    if oracle is None:
        oracle = _independent_values(b, table.tensor)
    entries = []
    for key, val in sorted(printed.items()):
        idx = tuple(i - 1 for i in key)
        c = float(arr[idx])
        o = None if oracle is None else float(table.sign * oracle[idx])
        entries.append(EntryMatch(key, float(val), c, o, _close(val, c, rtol)))
    unprinted = []
    for idx in zip(*np.nonzero(np.abs(arr) > 1e-12 * max(1.0, float(np.abs(arr).max())))):
        key = tuple(int(i) + 1 for i in idx)
        if key not in printed and not _antisymmetric_partner(table, key, printed):
            unprinted.append((key, float(arr[idx])))
    return TableComparison(table.name, z, entries, unprinted, table.note)


def _antisymmetric_partner(table: PrintedTable, key: tuple, printed: dict) -> bool:
    """Curvature tables print one of each antisymmetric pair in the last two slots."""
    if table.tensor in ("barthel_curv", "curv_R", "curv_Q") and len(key) >= 3:
        swapped = key[:-2] + (key[-1], key[-2])
        return swapped in printed
    return False


# ---------------------------------------------------------------------------
# End-to-end reproduction


def stratum_points(ex: Example, stratum: Stratum, count: int, seed: int) -> list[ChartPoint]:
    cfg = SamplerConfig(seed, stratum.box, tuple(Constraint.parse(c) for c in stratum.constraints))
    return sample_points(ex.E, cfg, count, require_order=4)


def _nullity_entry(b: GeometryBundle, which: str, expected, tol: float) -> dict:
    rep = nullity_space(b, which, tol)
    d = rep.to_dict()
    if expected is not None:
        exp = expected(b.point)
        d["expected_mu"] = int(exp.shape[0])
        d["principal_angle"] = span_angle(rep.basis, exp) if rep.mu == exp.shape[0] else math.pi / 2
    return d


def run_example(k: int, seed: int = 42, samples: int = 10, tol: float = 1e-8) -> dict:
    """Reproduce an example end to end; returns a JSON-ready report."""
    ex = get_example(k)
    E = ex.E
    report: dict = {"example": k, "energy": ex.energy, "dim": ex.dim, "domain": list(ex.domain),
                    "seed": seed, "tolerance": tol, "version": __version__,
                    "convention_ledger": dict(CONVENTIONS)}
    tables = {}
    for table, z in ex.tables:
        b = bundle_from_pipeline(Pipeline(E, z, 5))
        tables[table.name] = compare_table(table, b)
    if k in BRACKET_TABLES:
        A, B = ex.field_specs()
        br = lie_bracket(E, A, B, ex.point)
        fd = fd_bracket(E, A, B, ex.point)
        gamma = np.asarray(Pipeline(E, ex.point, 4).gamma_jet.value)
        fd_v = fd[ex.dim:] + gamma @ fd[:ex.dim]
        bt = BRACKET_TABLES[k]
        cmp_ = compare_table(bt, _PointOnly(ex.point), computed=br.vertical, oracle=fd_v)
        tables["bracket"] = cmp_
        report["bracket"] = {"fields": list(ex.fields), **br.to_dict(), "oracle_vertical": [float(v) for v in fd_v]}
    report["tables"] = {name: t.to_dict() for name, t in tables.items()}
    report["errata"] = [
        {"table": name, **e.to_dict()} for name, t in tables.items() for e in t.mismatches()
    ]
    strata = {}
    for st in ex.strata:
        pts = stratum_points(ex, st, samples, seed)
        rows = []
        for z in pts:
            b = bundle_from_pipeline(Pipeline(E, z, 5))
            row = {"point": {"x": list(z.x), "y": list(z.y)}}
            for which in ("barthel", "R", "P", "Q"):
                row[which] = _nullity_entry(b, which, st.expected.get(which), tol)
            if "R" in st.expected and "barthel" in st.expected:
                kR = nullity_space(b, "R", tol).basis
                kRb = nullity_space(b, "barthel", tol).basis
                row["N_R_in_N_barthel"] = containment(kR, kRb)
                row["N_barthel_in_N_R"] = containment(kRb, kR)
            rows.append(row)
        strata[st.name] = rows
    report["strata"] = strata
    report["conclusions"] = _conclusions(ex, report, tol)
    return report


class _PointOnly:
    """Minimal stand-in carrying a point, for tables computed elsewhere."""

    def __init__(self, point: ChartPoint):
        self.point = point


def _conclusions(ex: Example, report: dict, tol: float) -> list[str]:
    out = []
    strata = report["strata"]
    if ex.id == 1:
        mus = sorted({r["barthel"]["mu"] for rows in strata.values() for r in rows})
        out.append(f"mu_barthel in {mus} by stratum")
        surf = strata["surface"]
        mu_r = sorted({r["R"]["mu"] for r in surf})
        out.append(f"mu_R = {mu_r} on the constraint stratum")
        if all(r["N_barthel_in_N_R"] > 1e-6 for r in surf):
            out.append("N_barthel is not contained in N_R")
        if all(r["N_R_in_N_barthel"] < 1e-8 for r in surf):
            out.append("N_R is contained in N_barthel")
    else:
        which = ex.bracket_which
        mus = sorted({r[which]["mu"] for r in strata["generic"]})
        out.append(f"mu_{which} = {mus}")
        if not report["bracket"]["is_horizontal"]:
            out.append(f"bracket of nullity fields is not horizontal: N_{which} not integrable")
    return out


def example_integrability(k: int, seed: int = 42, count: int = 3, tol: float = 1e-6):
    """Integrability check of the example's nullity distribution with the printed fields."""
    ex = get_example(k)
    st = ex.strata[0]
    pts = stratum_points(ex, st, count, seed)
    return integrability_check(ex.E, ex.bracket_which, pts, tol, fields=ex.field_specs())


def evaluate_field(spec: FieldSpec, z: ChartPoint) -> np.ndarray:
    return np.array([evaluate(c, z.z) for c in spec.coefficients])
