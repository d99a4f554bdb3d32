"""Klein-Grifone pipeline at a point of the slit tangent bundle.

Everything is computed on jets of the energy about the chart point z = (x, y),
so every quantity knows its own derivatives.  Frames: h_i = d/dx^i - G^m_i d/dy^m
(horizontal) and d/dy^i (vertical).  Connection coefficients use

    D_{h_j} d/dy^k = F^h_jk d/dy^h,      D_{d/dy^j} d/dy^k = C^h_jk d/dy^h,

and the same coefficients on the horizontal frame (D commutes with F).

Internally curvature arrays use the slot order ``T[h, i, a, b]`` = component
h of K(e_a, e_b) e_i.  The published layout (see ``CONVENTIONS``) is derived
from it in one place, ``_publish``; identity checks run on the internal arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dsl import DomainError, EnergyExpr, evaluate_jet
from .jets import Jet, jeinsum, jet_space, jmatinv, jsolve

COND_MAX = 1e12
ASYM_FLOOR = 1.0

CONVENTIONS = {
    "spray": "S = y^i d/dx^i - 2 S^i d/dy^i; returned S^i are the spray coefficients",
    "sigma": 1,
    "barthel": "Gamma^i_j = sigma * dS^i/dy^j; h_i = d/dx^i - Gamma^m_i d/dy^m",
    "curvature_operator": "K(A,B) = D_A D_B - D_B D_A - D_[A,B]",
    "barthel_curvature": "Rb^h_jk = component h of Rb(h_k, h_j) = h_k(Gamma^h_j) - h_j(Gamma^h_k), Rb(X,Y) = -v[hX,hY]",
    "curv_R": "R^h_ijk = component h of K(h_k, h_j) d/dy^i; y^i R^h_ijk = Rb^h_jk",
    "curv_P": "P^h_ijk = component h of K(h_j, d/dy^k) d/dy^i; y^i P^h_ijk = Cp^h_jk",
    "curv_Q": "Q^h_ijk = component h of K(d/dy^j, d/dy^k) d/dy^i",
    "berwald_R": "same layout as curv_R, Berwald connection",
    "berwald_P": "same layout as curv_P, Berwald connection",
    "nullity_slot": "X in N_T iff X^j T^h_ijk = 0 for all h, i, k (j is the horizontal argument)",
    "omega": "omega[a,b] = Omega(e_a, e_b), e = (d/dx^1..n, d/dy^1..n); spray solves omega^T s = -dE",
    "cartan_C": "C_ijk = (1/2) dg_ij/dy^k; C^h_jk = g^hl C_ljk",
    "cartan_Cp": "Cp_ljk = (1/2)(h_j g_kl - G^m_jk g_ml - G^m_jl g_km), G^m_jk = dGamma^m_j/dy^k",
    "conn_h": "F^h_jk = (1/2) g^hl (h_j g_lk + h_k g_jl - h_l g_jk), D_{h_j} d/dy^k = F^h_jk d/dy^h",
    "conn_v": "D_{d/dy^j} d/dy^k = C^h_jk d/dy^h",
    "index_order": "row-major arrays, slots as written above, 0-based in arrays",
}


class NonAdmissiblePoint(ValueError):
    """The point is outside the Finsler domain of the energy."""


@dataclass(frozen=True)
class ChartPoint:
    x: tuple[float, ...]
    y: tuple[float, ...]
    admissible: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")
        if not any(self.y):
            raise ValueError("y = 0 is not a point of the slit tangent bundle")

    @property
    def dim(self) -> int:
        return len(self.x)

    @property
    def z(self) -> np.ndarray:
        return np.array(self.x + self.y)

    @classmethod
    def parse(cls, text: str) -> "ChartPoint":
        """'x1,..,xn;y1,..,yn'"""
        try:
            xs, ys = text.split(";")
            return cls(tuple(float(v) for v in xs.split(",")), tuple(float(v) for v in ys.split(",")))
        except ValueError as exc:
            raise ValueError(f"bad point {text!r}: expected 'x1,..,xn;y1,..,yn'") from exc

    def __str__(self):
        return ",".join(repr(v) for v in self.x) + ";" + ",".join(repr(v) for v in self.y)

    def shifted(self, dz) -> "ChartPoint":
        z = self.z + np.asarray(dz, float)
        n = self.dim
        return ChartPoint(tuple(z[:n]), tuple(z[n:]))


@dataclass(frozen=True)
class TensorField:
    """Component array at a point plus slot metadata."""

    name: str
    components: np.ndarray
    frame: tuple[str, ...]
    valence: tuple[str, ...]
    symmetries: tuple[tuple[int, int, str], ...] = ()

    def asymmetry(self) -> float:
        """Largest violation of the declared (anti)symmetries.

        Relative for tensors larger than ``ASYM_FLOOR``, absolute below it, so
        round-off in an identically vanishing tensor does not count.
        """
        a = self.components
        scale = max(np.max(np.abs(a)), ASYM_FLOOR)
        worst = 0.0
        for i, j, kind in self.symmetries:
            t = np.swapaxes(a, i, j)
            d = a - t if kind == "sym" else a + t
            worst = max(worst, float(np.max(np.abs(d))) / scale)
        return worst

    def check(self, tol: float = 1e-10) -> None:
        if self.components.ndim != len(self.frame) or len(self.frame) != len(self.valence):
            raise ValueError(f"{self.name}: slot metadata does not match array rank")
        if self.components.size and any(s != self.components.shape[0] for s in self.components.shape):
            raise ValueError(f"{self.name}: all slots must have dimension n")
        if self.asymmetry() > tol:
            raise ValueError(f"{self.name}: declared symmetry violated ({self.asymmetry():.3g})")


# ---------------------------------------------------------------------------


def _publish(name: str, t_int: np.ndarray) -> np.ndarray:
    """Intrinsic [..., a, b] (component of T(e_a, e_b)) -> published layout."""
    if name in ("barthel", "R", "berwald_R"):
        return np.swapaxes(t_int, -1, -2)
    return t_int


class Pipeline:
    """Jets of every pipeline quantity at one chart point.

    ``order`` is the jet order of the energy; a quantity that needs m
    derivatives of E is available with ``order - m`` derivative levels.
    Curvatures need order >= 4, Berwald curvatures and covariant derivatives
    of curvature need order 5.
    """

    def __init__(self, energy: EnergyExpr, point: ChartPoint, order: int = 5, cond_max: float = COND_MAX):
        if point.dim != energy.dim:
            raise ValueError(f"point has dim {point.dim}, energy has dim {energy.dim}")
        self.energy = energy
        self.point = point
        self.n = energy.dim
        self.order = order
        self.cond_max = cond_max
        self.space = jet_space(2 * self.n, order)
        n = self.n
        env = {}
        for i in range(n):
            env[f"x{i + 1}"] = Jet.variable(self.space, order, i, point.x[i])
            env[f"y{i + 1}"] = Jet.variable(self.space, order, n + i, point.y[i])
        self.env = env
        try:
            self.E = evaluate_jet(energy, env)
        except DomainError as exc:
            raise NonAdmissiblePoint(str(exc)) from exc
        if not self.E.value > 0:
            raise NonAdmissiblePoint(f"E(z) = {self.E.value!r} is not positive")
        self.xs = list(range(n))
        self.ys = list(range(n, 2 * n))
        self.y = np.array(point.y)

    def _need(self, k: int, what: str):
        if self.order < k:
            raise ValueError(f"{what} needs jet order >= {k}, pipeline has {self.order}")

    # -- frame derivatives ------------------------------------------------
    def vgrad(self, f: Jet) -> Jet:
        """d/dy^c of every component, new trailing axis c."""
        return f.grad(self.ys)

    def hgrad(self, f: Jet) -> Jet:
        """h_c of every component: d/dx^c - Gamma^m_c d/dy^m, new trailing axis c."""
        shape = f.shape
        flat = f.reshape(-1) if shape else f.reshape(1)
        dx = flat.grad(self.xs)
        dy = flat.grad(self.ys)
        out = dx - jeinsum("am,mc->ac", dy, self.gamma_jet)
        return out.reshape(*shape, self.n)

    # -- level 2 ----------------------------------------------------------
    @cached_property
    def dE(self) -> Jet:
        return self.E.grad(range(2 * self.n))

    @cached_property
    def hessian(self) -> Jet:
        return self.dE.grad(range(2 * self.n))

    @cached_property
    def g_jet(self) -> Jet:
        n = self.n
        return self.hessian[n:, n:]

    @cached_property
    def omega_jet(self) -> Jet:
        n = self.n
        H = self.hessian
        hxy = H[:n, n:]  # d2E/dx^a dy^b
        wxx = hxy - hxy.transpose(1, 0)
        g = self.g_jet
        zero = g * 0.0
        top = Jet.stack([wxx, -g], axis=1)  # rows x: [W(x,x) | W(x,y)]
        bot = Jet.stack([g, zero], axis=1)
        # stack of (n, 2, n) blocks -> (2n, 2n)
        w = Jet.stack([top, bot], axis=0)  # (2, n, 2, n)
        return w.reshape(2 * n, 2 * n)

    @cached_property
    def omega(self) -> np.ndarray:
        w = np.asarray(self.omega_jet.value)
        cond = np.linalg.cond(w)
        if not np.isfinite(cond) or cond > self.cond_max:
            raise NonAdmissiblePoint(f"fundamental form is degenerate (cond = {cond:.3g})")
        self.omega_cond = float(cond)
        return w

    @cached_property
    def g(self) -> np.ndarray:
        g = np.asarray(self.g_jet.value)
        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or cond > self.cond_max:
            raise NonAdmissiblePoint(f"vertical metric is singular (cond = {cond:.3g})")
        self.g_cond = float(cond)
        return g

    @cached_property
    def spray_vector_jet(self) -> Jet:
        """Full 2n components of the canonical spray, from i_S Omega = -dE."""
        w = self.omega  # admissibility gate
        wt = self.omega_jet.transpose(1, 0)
        # partial-pivoting LU at the base point; jets differentiate through it
        s0 = np.linalg.solve(w.T, -np.asarray(self.dE.value))
        self.spray_vector = s0
        wt_inv = np.linalg.solve(w.T, np.eye(2 * self.n))
        return jsolve(wt, -self.dE.truncate(self.order - 2), wt_inv)

    @cached_property
    def spray_jet(self) -> Jet:
        return self.spray_vector_jet[self.n :] * -0.5

    @cached_property
    def ginv_jet(self) -> Jet:
        self.g  # admissibility gate
        return jmatinv(self.g_jet)

    @cached_property
    def hbar_jet(self) -> Jet:
        """Angular metric g - l l with l_i = g_ij y^j / sqrt(2E)."""
        yj = Jet.stack([Jet.variable(self.space, self.order, v, self.point.z[v]) for v in self.ys])
        ell = jeinsum("ij,j->i", self.g_jet, yj) * (self.E * 2.0).power(-0.5)
        return self.g_jet - jeinsum("i,j->ij", ell, ell)

    # -- level 3 ----------------------------------------------------------
    @cached_property
    def gamma_jet(self) -> Jet:
        self._need(3, "Barthel connection")
        return self.vgrad(self.spray_jet)  # [i, j] = dS^i/dy^j

    @cached_property
    def C_low_jet(self) -> Jet:
        self._need(3, "Cartan tensor")
        return self.vgrad(self.g_jet) * 0.5  # [i,j,k]

    @cached_property
    def C_jet(self) -> Jet:
        return jeinsum("hl,ljk->hjk", self.ginv_jet, self.C_low_jet)

    @cached_property
    def hg_jet(self) -> Jet:
        return self.hgrad(self.g_jet)  # [l,k,j] = h_j g_lk

    @cached_property
    def F_jet(self) -> Jet:
        hg = self.hg_jet
        # low[l,j,k] = 1/2 (h_j g_lk + h_k g_jl - h_l g_jk)
        low = (hg.transpose(0, 2, 1) + hg.transpose(1, 0, 2) - hg.transpose(2, 1, 0)) * 0.5
        return jeinsum("hl,ljk->hjk", self.ginv_jet, low)

    # -- level 4 ----------------------------------------------------------
    @cached_property
    def berwald_jet(self) -> Jet:
        self._need(4, "Berwald coefficients")
        return self.vgrad(self.gamma_jet)  # [h,j,k] = dGamma^h_j/dy^k

    @cached_property
    def Cp_low_jet(self) -> Jet:
        hg = self.hg_jet  # [k,l,j] = h_j g_kl
        gb = self.berwald_jet.truncate(self.order - 4)
        g = self.g_jet
        a = hg.transpose(1, 2, 0)  # [l,j,k] = h_j g_kl
        b = jeinsum("mjk,ml->ljk", gb, g)
        c = jeinsum("mjl,km->ljk", gb, g)
        return (a - b - c) * 0.5

    @cached_property
    def Cp_jet(self) -> Jet:
        return jeinsum("hl,ljk->hjk", self.ginv_jet, self.Cp_low_jet)

    @cached_property
    def barthel_int_jet(self) -> Jet:
        self._need(4, "Barthel curvature")
        hG = self.hgrad(self.gamma_jet)  # [m,b,a] = h_a Gamma^m_b
        return hG.transpose(0, 2, 1) - hG  # [m,a,b] = h_a G^m_b - h_b G^m_a

    @cached_property
    def R_int_jet(self) -> Jet:
        F, C, Rb = self.F_jet, self.C_jet, self.barthel_int_jet
        hF = self.hgrad(F)  # [h,b,i,a] = h_a F^h_bi
        t1 = Jet(hF.space, hF.order, np.transpose(hF.c, (0, 2, 3, 1, 4)))  # [h,i,a,b] = hF[h,b,i,a]
        t2 = Jet(hF.space, hF.order, np.transpose(hF.c, (0, 2, 1, 3, 4)))  # [h,i,a,b] = hF[h,a,i,b]
        ff = jeinsum("mbi,ham->hiab", F, F)
        rc = jeinsum("mab,hmi->hiab", Rb, C)
        return t1 - t2 + ff - ff.transpose(0, 1, 3, 2) + rc

    @cached_property
    def P_int_jet(self) -> Jet:
        F, C, Gb = self.F_jet, self.C_jet, self.berwald_jet
        hC = self.hgrad(C)  # [h,b,i,a] = h_a C^h_bi
        t1 = Jet(hC.space, hC.order, np.transpose(hC.c, (0, 2, 3, 1, 4)))
        vF = self.vgrad(F)  # [h,a,i,b] = d_b F^h_ai
        t3 = Jet(vF.space, vF.order, np.transpose(vF.c, (0, 2, 1, 3, 4)))
        t2 = jeinsum("mbi,ham->hiab", C, F)
        t4 = jeinsum("mai,hbm->hiab", F, C)
        t5 = jeinsum("mab,hmi->hiab", Gb, C)
        return t1 + t2 - t3 - t4 - t5

    @cached_property
    def Q_int_jet(self) -> Jet:
        C = self.C_jet
        vC = self.vgrad(C)  # [h,b,i,a] = d_a C^h_bi
        t1 = Jet(vC.space, vC.order, np.transpose(vC.c, (0, 2, 3, 1, 4)))
        cc = jeinsum("mbi,ham->hiab", C, C)
        out = t1 + cc
        return out - out.transpose(0, 1, 3, 2)

    # -- level 5 ----------------------------------------------------------
    @cached_property
    def Rber_int_jet(self) -> Jet:
        self._need(5, "Berwald curvature")
        Gb = self.berwald_jet
        hG = self.hgrad(Gb)  # [h,b,i,a] = h_a Gb^h_bi
        t1 = Jet(hG.space, hG.order, np.transpose(hG.c, (0, 2, 3, 1, 4)))
        gg = jeinsum("mbi,ham->hiab", Gb, Gb)
        out = t1 + gg
        return out - out.transpose(0, 1, 3, 2)

    @cached_property
    def Pber_int_jet(self) -> Jet:
        self._need(5, "Berwald curvature")
        v = self.vgrad(self.berwald_jet)  # [h,a,i,b] = d_b Gb^h_ai
        return -Jet(v.space, v.order, np.transpose(v.c, (0, 2, 1, 3, 4)))

    # -- covariant derivative ---------------------------------------------
    def covariant(self, t: Jet, valence: str, direction: str) -> Jet:
        """Frame covariant derivative; the direction index is appended last.

        direction 'h': along h_c (coefficients F); 'v': along d/dy^c (coefficients C).
        """
        if len(valence) != len(t.shape):
            raise ValueError("valence string must have one letter per slot")
        lam = self.F_jet if direction == "h" else self.C_jet
        out = self.hgrad(t) if direction == "h" else self.vgrad(t)
        letters = "abcdefgh"[: len(valence)]
        for s, kind in enumerate(valence):
            inner = letters[:s] + "m" + letters[s + 1 :]
            if kind == "u":
                term = jeinsum(f"{letters[s]}zm,{inner}->{letters}z", lam, t)
                out = out + term
            else:
                term = jeinsum(f"mz{letters[s]},{inner}->{letters}z", lam, t)
                out = out - term
        return out


def pipeline(energy: EnergyExpr, point: ChartPoint, order: int = 5) -> Pipeline:
    return Pipeline(energy, point, order)


# ---------------------------------------------------------------------------
# Bundle of values


@dataclass(frozen=True)
class GeometryBundle:
    """All derived objects at one point, published layout (see CONVENTIONS)."""

    energy: str
    point: ChartPoint
    E: float
    omega: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    g_full: np.ndarray
    spray_vector: np.ndarray
    spray: np.ndarray
    gamma: np.ndarray
    barthel_curv: np.ndarray
    cartan_C: np.ndarray
    cartan_C_up: np.ndarray
    cartan_Cp: np.ndarray
    cartan_Cp_up: np.ndarray
    conn_h: np.ndarray
    conn_v: np.ndarray
    berwald_coeffs: np.ndarray
    curv_R: np.ndarray
    curv_P: np.ndarray
    curv_Q: np.ndarray
    berwald_R: np.ndarray | None
    berwald_P: np.ndarray | None
    ell: np.ndarray
    hbar: np.ndarray
    omega_cond: float
    g_cond: float
    pipeline: Pipeline | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def y(self) -> np.ndarray:
        return np.array(self.point.y)

    def tensor(self, name: str) -> TensorField:
        return _tensor_field(self, name)

    def curvature(self, which: str) -> np.ndarray:
        return {
            "barthel": self.barthel_curv,
            "R": self.curv_R,
            "P": self.curv_P,
            "Q": self.curv_Q,
            "berwald_R": self.berwald_R,
            "berwald_P": self.berwald_P,
        }[_canonical_which(which)]


_WHICH_ALIASES = {
    "barthel": "barthel", "𝕽": "barthel", "frakR": "barthel", "Rb": "barthel", "rb": "barthel",
    "R": "R", "P": "P", "Q": "Q",
    "berwald_R": "berwald_R", "R0": "berwald_R", "berwald_P": "berwald_P", "P0": "berwald_P",
}


def _canonical_which(which: str) -> str:
    try:
        return _WHICH_ALIASES[which]
    except KeyError:
        raise ValueError(f"unknown curvature {which!r}; choose barthel, R, P or Q") from None


def compute_bundle(energy: EnergyExpr, point: ChartPoint, order: int = 5) -> GeometryBundle:
    """Run the full pipeline; order 4 skips the Berwald curvatures."""
    p = Pipeline(energy, point, order)
    return bundle_from_pipeline(p)


def bundle_from_pipeline(p: Pipeline) -> GeometryBundle:
    n = p.n
    omega = p.omega
    g = p.g
    ginv = np.asarray(p.ginv_jet.value)
    sv = p.spray_vector_jet
    E = float(p.E.value)
    y = p.y
    ell = g @ y / math.sqrt(2 * E)
    gfull = np.zeros((2 * n, 2 * n))
    gfull[:n, :n] = g
    gfull[n:, n:] = g
    has5 = p.order >= 5
    return GeometryBundle(
        energy=str(p.energy),
        point=ChartPoint(p.point.x, p.point.y, True),
        E=E,
        omega=omega,
        g=g,
        g_inv=ginv,
        g_full=gfull,
        spray_vector=np.asarray(sv.value),
        spray=np.asarray(p.spray_jet.value),
        gamma=np.asarray(p.gamma_jet.value),
        barthel_curv=_publish("barthel", np.asarray(p.barthel_int_jet.value)),
        cartan_C=np.asarray(p.C_low_jet.value),
        cartan_C_up=np.asarray(p.C_jet.value),
        cartan_Cp=np.asarray(p.Cp_low_jet.value),
        cartan_Cp_up=np.asarray(p.Cp_jet.value),
        conn_h=np.asarray(p.F_jet.value),
        conn_v=np.asarray(p.C_jet.value),
        berwald_coeffs=np.asarray(p.berwald_jet.value),
        curv_R=_publish("R", np.asarray(p.R_int_jet.value)),
        curv_P=_publish("P", np.asarray(p.P_int_jet.value)),
        curv_Q=_publish("Q", np.asarray(p.Q_int_jet.value)),
        berwald_R=_publish("berwald_R", np.asarray(p.Rber_int_jet.value)) if has5 else None,
        berwald_P=_publish("berwald_P", np.asarray(p.Pber_int_jet.value)) if has5 else None,
        ell=ell,
        hbar=g - np.outer(ell, ell),
        omega_cond=p.omega_cond,
        g_cond=p.g_cond,
        pipeline=p,
    )


def _tensor_field(b: GeometryBundle, name: str) -> TensorField:
    specs = {
        "g": (b.g, "vv", "dd", ((0, 1, "sym"),)),
        "hbar": (b.hbar, "vv", "dd", ((0, 1, "sym"),)),
        "gamma": (b.gamma, "vh", "ud", ()),
        "barthel_curv": (b.barthel_curv, "vhh", "udd", ((1, 2, "anti"),)),
        "cartan_C": (b.cartan_C, "hhh", "ddd", ((0, 1, "sym"), (1, 2, "sym"))),
        "cartan_Cp": (b.cartan_Cp, "hhh", "ddd", ((1, 2, "sym"),)),
        "conn_h": (b.conn_h, "vhv", "udd", ((1, 2, "sym"),)),
        "conn_v": (b.conn_v, "vvv", "udd", ((1, 2, "sym"),)),
        "curv_R": (b.curv_R, "vvhh", "uddd", ((2, 3, "anti"),)),
        "curv_P": (b.curv_P, "vvhv", "uddd", ()),
        "curv_Q": (b.curv_Q, "vvvv", "uddd", ((2, 3, "anti"),)),
        "berwald_R": (b.berwald_R, "vvhh", "uddd", ((2, 3, "anti"),)),
        "berwald_P": (b.berwald_P, "vvhv", "uddd", ()),
    }
    if name not in specs:
        raise ValueError(f"unknown tensor {name!r}")
    comp, frame, val, sym = specs[name]
    if comp is None:
        raise ValueError(f"{name} needs a pipeline of order 5")
    label = {"h": "horizontal", "v": "vertical", "c": "coordinate"}
    return TensorField(
        name,
        comp,
        tuple(label[f] for f in frame),
        tuple("up" if v == "u" else "down" for v in val),
        sym,
    )


# ---------------------------------------------------------------------------
# Operation-level API.  Each call builds only the jet order it needs.


def fundamental_form(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    return Pipeline(E, z, 2).omega


def vertical_metric(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    return Pipeline(E, z, 2).g


def canonical_spray(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    return np.asarray(Pipeline(E, z, 2).spray_jet.value)


def barthel_connection(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    return np.asarray(Pipeline(E, z, 3).gamma_jet.value)


def barthel_curvature(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    return _publish("barthel", np.asarray(Pipeline(E, z, 4).barthel_int_jet.value))


def cartan_tensors(E: EnergyExpr, z: ChartPoint) -> dict[str, np.ndarray]:
    """First and second Cartan tensors, lowered and with the first index raised."""
    p = Pipeline(E, z, 4)
    return {
        "C": np.asarray(p.C_low_jet.value),
        "C_up": np.asarray(p.C_jet.value),
        "Cp": np.asarray(p.Cp_low_jet.value),
        "Cp_up": np.asarray(p.Cp_jet.value),
    }


def cartan_connection(E: EnergyExpr, z: ChartPoint) -> tuple[np.ndarray, np.ndarray]:
    p = Pipeline(E, z, 3)
    return np.asarray(p.F_jet.value), np.asarray(p.C_jet.value)


def cartan_curvatures(E: EnergyExpr, z: ChartPoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = Pipeline(E, z, 4)
    return (
        _publish("R", np.asarray(p.R_int_jet.value)),
        _publish("P", np.asarray(p.P_int_jet.value)),
        _publish("Q", np.asarray(p.Q_int_jet.value)),
    )


def berwald_curvatures(E: EnergyExpr, z: ChartPoint) -> tuple[np.ndarray, np.ndarray]:
    p = Pipeline(E, z, 5)
    return (
        _publish("berwald_R", np.asarray(p.Rber_int_jet.value)),
        _publish("berwald_P", np.asarray(p.Pber_int_jet.value)),
    )


def angular_metric(E: EnergyExpr, z: ChartPoint) -> np.ndarray:
    p = Pipeline(E, z, 2)
    g = p.g
    ell = g @ p.y / math.sqrt(2 * p.E.value)
    return g - np.outer(ell, ell)


# name -> (jet getter, valence, publish key, frame letters)
_COVARIANT_TENSORS = {
    "g": (lambda p: p.g_jet, "dd", None, "vv"),
    "hbar": (lambda p: p.hbar_jet, "dd", None, "vv"),
    "cartan_C": (lambda p: p.C_low_jet, "ddd", None, "hhh"),
    "cartan_Cp": (lambda p: p.Cp_low_jet, "ddd", None, "hhh"),
    "barthel_curv": (lambda p: p.barthel_int_jet, "udd", "barthel", "vhh"),
    "curv_R": (lambda p: p.R_int_jet, "uddd", "R", "vvhh"),
    "curv_P": (lambda p: p.P_int_jet, "uddd", "P", "vvhv"),
    "curv_Q": (lambda p: p.Q_int_jet, "uddd", "Q", "vvvv"),
}
_TENSOR_ALIASES = {"C": "cartan_C", "Cp": "cartan_Cp", "R": "curv_R", "P": "curv_P", "Q": "curv_Q",
                   "barthel": "barthel_curv", "Rb": "barthel_curv"}


def covariant_full(p: Pipeline, tensor: str, kind: str) -> np.ndarray:
    """All directions at once: published components with a trailing direction axis.

    ``kind`` is 'h' (along h_c), 'v' (along d/dy^c) or 'C' (Liouville field,
    no trailing axis).
    """
    name = _TENSOR_ALIASES.get(tensor, tensor)
    if name not in _COVARIANT_TENSORS:
        raise ValueError(f"unsupported tensor {tensor!r}; choose one of {sorted(_COVARIANT_TENSORS)}")
    get, valence, pub, _ = _COVARIANT_TENSORS[name]
    if kind == "C":
        d = np.asarray(p.covariant(get(p), valence, "v").value) @ p.y
        return _publish(pub, d) if pub else d
    d = np.asarray(p.covariant(get(p), valence, kind).value)
    if pub:
        d = np.moveaxis(_publish(pub, np.moveaxis(d, -1, 0)), 0, -1)
    return d


def covariant_derivative(E: EnergyExpr, z: ChartPoint, tensor: str, direction: str) -> TensorField:
    """Covariant derivative of a named tensor along 'h<i>', 'v<i>' (1-based) or 'C'."""
    name = _TENSOR_ALIASES.get(tensor, tensor)
    if name not in _COVARIANT_TENSORS:
        raise ValueError(f"unsupported tensor {tensor!r}; choose one of {sorted(_COVARIANT_TENSORS)}")
    p = Pipeline(E, z, 5)
    frame = _COVARIANT_TENSORS[name][3]
    labels = {"h": "horizontal", "v": "vertical"}
    if direction == "C":
        comp = covariant_full(p, name, "C")
    else:
        kind, idx = direction[0], direction[1:]
        if kind not in "hv" or not idx.isdigit() or not 1 <= int(idx) <= p.n:
            raise ValueError(f"direction must be h<i>, v<i> with 1 <= i <= {p.n}, or C")
        comp = covariant_full(p, name, kind)[..., int(idx) - 1]
    return TensorField(
        f"D_{direction} {name}",
        comp,
        tuple(labels[f] for f in frame),
        tuple("up" if v == "u" else "down" for v in _COVARIANT_TENSORS[name][1]),
    )


# ---------------------------------------------------------------------------
# JSON


def _clean(a):
    a = np.asarray(a, dtype=float)
    a = np.where(np.abs(a) < 1e-300, 0.0, a) + 0.0  # no negative zeros
    return a.tolist()


def bundle_to_dict(b: GeometryBundle) -> dict:
    out = {
        "convention_ledger": dict(CONVENTIONS),
        "energy": b.energy,
        "point": {"x": list(b.point.x), "y": list(b.point.y), "admissible": True},
        "E": b.E,
        "omega_cond": b.omega_cond,
        "g_cond": b.g_cond,
    }
    for key in ("omega", "g", "g_full", "spray", "gamma", "barthel_curv", "cartan_C", "cartan_Cp",
                "conn_h", "conn_v", "curv_R", "curv_P", "curv_Q", "berwald_R", "berwald_P", "ell", "hbar"):
        val = getattr(b, key)
        out[key] = None if val is None else _clean(val)
    return out
