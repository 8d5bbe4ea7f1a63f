"""Pointwise geometry of frame fields.

Index conventions (all arrays are plain numpy):

* ``coframe[A, mu] = e^A_mu``, the dual frame ``E[mu, A] = e^mu_A`` is its inverse;
* derivatives append their index last: ``dcoframe[A, mu, nu] = d_nu e^A_mu``;
* connections ``Gamma[la, mu, nu]`` carry the differentiation index ``nu`` last,
  so ``nabla_nu V^la = d_nu V^la + Gamma[la, mu, nu] V^mu``;
* torsion ``S[la, mu, nu] = (Gamma[la, mu, nu] - Gamma[la, nu, mu]) / 2``;
* the nonholonomy object ``Omega[C, A, B]`` is defined by ``[e_A, e_B] = Omega^C_AB e_C``.

Curvature follows ``R^r_smn = d_m Gamma^r_ns - d_n Gamma^r_ms + ...`` with Ricci
``R_mn = R^a_man``.  Under the default ``"hilbert"`` convention the result is
multiplied by :data:`HILBERT_SIGN`, the sign that makes the decomposition of
the Hilbert Lagrangian into Weitzenboeck invariants exact; ``"mtw"`` keeps
the textbook sign (a round sphere then has positive scalar curvature).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SecondDerivativesUnavailable, SingularFrame, SingularMetric

#: curvature sign of the "hilbert" convention relative to the textbook one
HILBERT_SIGN = -1.0
COND_LIMIT = 1e12


def minkowski(n: int) -> np.ndarray:
    return np.diag([1.0] + [-1.0] * (n - 1))


# --------------------------------------------------------------------------
# input fields


@dataclass(frozen=True)
class FrameField:
    """A coframe field with optional analytic first and second derivatives.

    Missing derivatives are taken by central differences with step ``fd_step``.
    """

    n: int
    coframe: Callable
    dcoframe: Optional[Callable] = None
    d2coframe: Optional[Callable] = None
    fd_step: float = 1e-5
    name: str = ""

    @property
    def mode(self) -> str:
        return "analytic" if self.dcoframe is not None else "finite-difference"

    def e(self, x) -> np.ndarray:
        return np.asarray(self.coframe(np.asarray(x, dtype=float)), dtype=float).reshape(self.n, self.n)

    def de(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dcoframe is not None:
            return np.asarray(self.dcoframe(x), dtype=float).reshape((self.n,) * 3)
        return _central(self.e, x, self.fd_step)

    def d2e(self, x, allow_fd: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d2coframe is not None:
            return np.asarray(self.d2coframe(x), dtype=float).reshape((self.n,) * 4)
        if not allow_fd:
            raise SecondDerivativesUnavailable(
                f"frame {self.name or '<anonymous>'} has no analytic second derivatives"
            )
        return _central(self.de, x, self.fd_step)

    def mixed(self, L) -> "FrameField":
        """Constant mixing of the frame vectors ``e_A -> e_B L^B_A``.

        The coframe transforms with the inverse, ``e^A -> (L^-1)^A_B e^B``.
        """
        Linv = np.linalg.inv(np.asarray(L, dtype=float))

        def mix(f):
            return None if f is None else (lambda x: np.tensordot(Linv, f(x), axes=(1, 0)))

        return FrameField(self.n, mix(self.e), mix(self.dcoframe), mix(self.d2coframe),
                          self.fd_step, self.name)


def _central(f, x, h):
    base = np.asarray(f(x))
    out = np.empty(base.shape + (x.size,))
    for k in range(x.size):
        dx = np.zeros_like(x)
        dx[k] = h
        out[..., k] = (np.asarray(f(x + dx)) - np.asarray(f(x - dx))) / (2 * h)
    return out


@dataclass(frozen=True)
class MetricField:
    """A metric field ``g(x)`` with optional analytic derivatives (index order as for frames)."""

    n: int
    metric: Callable
    dmetric: Optional[Callable] = None
    d2metric: Optional[Callable] = None
    fd_step: float = 1e-4

    def g(self, x) -> np.ndarray:
        return np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dmetric is not None:
            return np.asarray(self.dmetric(x), dtype=float)
        return _central(self.g, x, self.fd_step)

    def d2g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d2metric is not None:
            return np.asarray(self.d2metric(x), dtype=float)
        return _central(self.dg, x, self.fd_step)

    @classmethod
    def from_frame(cls, frame: FrameField, eta=None) -> "MetricField":
        """``g_mn = eta_AB e^A_m e^B_n`` with derivatives through the product rule."""
        eta = minkowski(frame.n) if eta is None else np.asarray(eta, dtype=float)

        def g(x):
            e = frame.e(x)
            return e.T @ eta @ e

        def dg(x):
            return _metric_derivative(eta, frame.e(x), frame.de(x))

        def d2g(x):
            e, de, d2 = frame.e(x), frame.de(x), frame.d2e(x)
            out = np.einsum("AB,Amns,Bk->mkns", eta, d2, e)
            out += np.einsum("AB,Amn,Bks->mkns", eta, de, de)
            out += np.einsum("AB,Ams,Bkn->mkns", eta, de, de)
            out += np.einsum("AB,Am,Bkns->mkns", eta, e, d2)
            return out

        return cls(frame.n, g, dg, d2g)


def _metric_derivative(eta, e, de):
    d = np.einsum("AB,Ams,Bn->mns", eta, de, e)
    return d + d.transpose(1, 0, 2)


# --------------------------------------------------------------------------
# connection and torsion


def _frame_data(frame: FrameField, x):
    e = frame.e(x)
    det = np.linalg.det(e)
    cond = np.linalg.cond(e)
    if det == 0 or not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularFrame(f"coframe singular at {np.asarray(x).tolist()} (cond={cond:.3e})")
    return e, np.linalg.inv(e), frame.de(x)


def teleparallel_connection(frame: FrameField, x) -> np.ndarray:
    """``Gamma[la, mu, nu] = e^la_A d_nu e^A_mu``; the frame is parallel for it."""
    _, E, de = _frame_data(frame, x)
    return np.einsum("lA,Amn->lmn", E, de)


def nonholonomy(frame: FrameField, x) -> np.ndarray:
    """Structure functions ``Omega[C, A, B]`` of ``[e_A, e_B] = Omega^C_AB e_C``."""
    e, E, de = _frame_data(frame, x)
    # d_nu e^mu_A = -e^mu_B (d_nu e^B_rho) e^rho_A
    dE = -np.einsum("mB,Brn,rA->mAn", E, de, E)
    # [e_A, e_B]^mu = e^nu_A d_nu e^mu_B - e^nu_B d_nu e^mu_A
    bracket = np.einsum("nA,mBn->mAB", E, dE)
    bracket = bracket - bracket.transpose(0, 2, 1)
    return np.einsum("Cm,mAB->CAB", e, bracket)


@dataclass(frozen=True)
class TorsionTensor:
    """Torsion ``S[la, mu, nu]`` with the nonholonomy object it was checked against."""

    S: np.ndarray
    nonholonomy: np.ndarray
    two_path_residual: float


def torsion(frame: FrameField, x) -> TorsionTensor:
    """Torsion of the teleparallel connection, cross-checked with the frame brackets.

    ``two_path_residual`` is the largest deviation between the connection route
    and ``1/2 Omega^C_AB e^la_C e^A_mu e^B_nu``.
    """
    e, E, _ = _frame_data(frame, x)
    G = teleparallel_connection(frame, x)
    S = 0.5 * (G - G.transpose(0, 2, 1))
    Om = nonholonomy(frame, x)
    S_alt = 0.5 * np.einsum("CAB,lC,Am,Bn->lmn", Om, E, e, e)
    scale = 1.0 + float(np.abs(S).max())
    return TorsionTensor(S=S, nonholonomy=Om, two_path_residual=float(np.abs(S - S_alt).max()) / scale)


def internal_metric(frame: FrameField, x, eta=None) -> np.ndarray:
    """``g_mn = eta_AB e^A_m e^B_n`` (Minkowski ``eta`` by default)."""
    e = frame.e(x)
    eta = minkowski(frame.n) if eta is None else np.asarray(eta, dtype=float)
    return e.T @ eta @ e


# --------------------------------------------------------------------------
# Killing-form construction


def killing_form(structure_constants) -> np.ndarray:
    """``gamma_AB = Omega^K_LA Omega^L_KB``."""
    Om = np.asarray(structure_constants, dtype=float)
    return np.einsum("kla,lkb->ab", Om, Om)


@dataclass(frozen=True)
class KillingConstruction:
    """Killing form, the torsion-square metric and their measured proportionality.

    ``metric`` is ``S^a_bm S^b_an`` for the frame path and ``4 gamma_AB e^A e^B``
    for the structure-constant path; ``pullback`` is ``gamma_AB e^A_m e^B_n``
    and ``measured_constant`` the least-squares ``c`` with
    ``metric ~ c * pullback`` (``nan`` when the pullback vanishes).
    """

    gamma: np.ndarray
    metric: np.ndarray
    pullback: np.ndarray
    measured_constant: float


def _proportionality(a, b) -> float:
    den = float(np.sum(b * b))
    return float(np.sum(a * b)) / den if den > 1e-300 else float("nan")


def killing_construction(frame: Optional[FrameField] = None, x=None,
                         structure_constants=None) -> KillingConstruction:
    """Killing-form metric from a frame at ``x`` or from constant structure constants.

    With ``structure_constants`` the metric is ``4 gamma_AB e^A_m e^B_n``; the
    frame (identity if omitted) only supplies ``e^A_m``.  Without them the
    torsion of ``frame`` at ``x`` gives ``S^a_bm S^b_an`` and ``gamma`` comes
    from its nonholonomy object.
    """
    if structure_constants is not None:
        Om = np.asarray(structure_constants, dtype=float)
        if not np.allclose(Om, -Om.transpose(0, 2, 1), rtol=0, atol=1e-14):
            raise ValueError("structure constants must be antisymmetric in the lower indices")
        gamma = killing_form(Om)
        e = np.eye(Om.shape[0]) if frame is None else frame.e(x)
        pull = e.T @ gamma @ e
        metric = 4.0 * pull
        return KillingConstruction(gamma, metric, pull, _proportionality(metric, pull))
    if frame is None or x is None:
        raise ValueError("either a frame and point or structure constants are required")
    tor = torsion(frame, x)
    metric = np.einsum("abm,ban->mn", tor.S, tor.S)
    gamma = killing_form(tor.nonholonomy)
    e = frame.e(x)
    pull = e.T @ gamma @ e
    return KillingConstruction(gamma, metric, pull, _proportionality(metric, pull))


# --------------------------------------------------------------------------
# torsion invariants and the Lagrange tensor


@dataclass(frozen=True)
class WeitzenbockInvariants:
    J1: float
    J2: float
    J3: float
    Lprime: float


def _weitzenbock(S, g):
    gi = np.linalg.inv(g)
    J1 = float(np.einsum("ia,jb,kc,ijk,abc->", g, gi, gi, S, S))
    J2 = float(np.einsum("ij,kli,lkj->", gi, S, S))
    J3 = float(np.einsum("ij,aai,bbj->", gi, S, S))
    return J1, J2, J3


def _checked_metric(g):
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"metric singular (cond={cond:.3e})")
    return g


def weitzenbock_invariants(frame: FrameField, x, eta=None) -> WeitzenbockInvariants:
    """Quadratic torsion scalars and ``Lprime = (J1 + 2 J2 - 4 J3) sqrt|g|``."""
    S = torsion(frame, x).S
    g = _checked_metric(internal_metric(frame, x, eta))
    J1, J2, J3 = _weitzenbock(S, g)
    Lp = (J1 + 2 * J2 - 4 * J3) * np.sqrt(abs(np.linalg.det(g)))
    return WeitzenbockInvariants(J1, J2, J3, float(Lp))


@dataclass(frozen=True)
class LagrangeTensor:
    """``L_mn`` built from torsion alone, with its model constants."""

    Lmn: np.ndarray
    A_c: float
    B_c: float
    C_c: float

    @property
    def symmetric(self) -> np.ndarray:
        return 0.5 * (self.Lmn + self.Lmn.T)

    @property
    def antisymmetric(self) -> np.ndarray:
        return 0.5 * (self.Lmn - self.Lmn.T)


def lagrange_tensor(frame: FrameField, x, A: float, B: float, C: float):
    """``(L, sqrt|det L|)`` with
    ``L_mn = A S^a_bm S^b_an + B S^a_am S^b_bn + C S^b_ba S^a_mn``.
    """
    S = torsion(frame, x).S
    trace = np.einsum("aam->m", S)
    L = (A * np.einsum("abm,ban->mn", S, S)
         + B * np.outer(trace, trace)
         + C * np.einsum("a,amn->mn", trace, S))
    return LagrangeTensor(L, A, B, C), float(np.sqrt(abs(np.linalg.det(L))))


# --------------------------------------------------------------------------
# metric geometry


def christoffel(g, dg) -> np.ndarray:
    """Levi-Civita symbols ``Gamma[a, b, c]`` (symmetric in ``b, c``)."""
    gi = np.linalg.inv(g)
    T = dg.transpose(0, 1, 2) + dg.transpose(0, 2, 1) - dg.transpose(2, 0, 1)
    # T[l, b, c] = d_c g_lb + d_b g_lc - d_l g_bc
    return 0.5 * np.einsum("al,lbc->abc", gi, T)


def _christoffel_derivative(g, dg, d2g):
    gi = np.linalg.inv(g)
    dgi = -np.einsum("ab,bcs,cd->ads", gi, dg, gi)
    T = dg + dg.transpose(0, 2, 1) - dg.transpose(2, 0, 1)
    dT = d2g + d2g.transpose(0, 2, 1, 3) - d2g.transpose(2, 0, 1, 3)
    return 0.5 * (np.einsum("als,lbc->abcs", dgi, T) + np.einsum("al,lbcs->abcs", gi, dT))


def _riemann(G, dG):
    """``R[r, s, m, n]`` for a connection ``G[r, s, n]`` (last index differentiating)."""
    R = np.einsum("rsnm->rsmn", dG) - np.einsum("rsmn->rsmn", dG)
    R = R + np.einsum("rlm,lsn->rsmn", G, G) - np.einsum("rln,lsm->rsmn", G, G)
    return R


def _sign(convention: str) -> float:
    if convention == "hilbert":
        return HILBERT_SIGN
    if convention == "mtw":
        return 1.0
    raise ValueError(f"unknown curvature convention {convention!r}")


@dataclass(frozen=True)
class CurvatureSuite:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    density: float


def curvature_suite(metric: MetricField, x, convention: str = "hilbert") -> CurvatureSuite:
    """Levi-Civita connection, Riemann and Ricci tensors, scalar curvature and ``R sqrt|g|``."""
    sign = _sign(convention)
    g = metric.g(x)
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14):
        raise SingularMetric("metric is not symmetric")
    g = _checked_metric(g)
    dg, d2g = metric.dg(x), metric.d2g(x)
    G = christoffel(g, dg)
    dG = _christoffel_derivative(g, dg, d2g)
    R = sign * _riemann(G, dG)
    Ric = np.einsum("amab->mb", R)
    scalar = float(np.einsum("mn,mn->", np.linalg.inv(g), Ric))
    return CurvatureSuite(G, R, Ric, scalar, scalar * float(np.sqrt(abs(np.linalg.det(g)))))


def teleparallel_curvature(frame: FrameField, x) -> np.ndarray:
    """Riemann tensor of the teleparallel connection (zero for any frame)."""
    e, E, de = _frame_data(frame, x)
    d2 = frame.d2e(x)
    G = np.einsum("lA,Amn->lmn", E, de)
    dE = -np.einsum("lB,Bps,pA->lAs", E, de, E)
    dG = np.einsum("lAs,Amn->lmns", dE, de) + np.einsum("lA,Amns->lmns", E, d2)
    # connection matrices (Gamma_nu)^l_m = G[l, m, nu]
    return _riemann(G, dG)


@dataclass(frozen=True)
class Contorsion:
    """Contorsion ``K[la, mu, nu]`` with metric-compatibility diagnostics.

    ``metric_residual`` is ``max |nabla_nu g_ab|`` for Levi-Civita plus ``K``;
    ``connection_residual`` is ``max |Gamma_tel - (Levi-Civita + K)|``.
    """

    K: np.ndarray
    metric_residual: float
    connection_residual: float


def contorsion(frame: FrameField, x, eta=None) -> Contorsion:
    """``K^l_mn = S^l_mn + S_mn^l + S_nm^l`` with indices moved by the internal metric."""
    e, E, de = _frame_data(frame, x)
    eta = minkowski(frame.n) if eta is None else np.asarray(eta, dtype=float)
    g = _checked_metric(e.T @ eta @ e)
    gi = np.linalg.inv(g)
    S = torsion(frame, x).S
    S_low_up = np.einsum("ma,anb,bl->mnl", g, S, gi)   # S_{mu nu}^{la}
    K = S + np.einsum("mnl->lmn", S_low_up) + np.einsum("nml->lmn", S_low_up)
    dg = _metric_derivative(eta, e, de)
    conn = christoffel(g, dg) + K
    res = dg - np.einsum("rmn,rb->mbn", conn, g) - np.einsum("rbn,mr->mbn", conn, g)
    tel = np.einsum("lA,Amn->lmn", E, de)
    return Contorsion(K, float(np.abs(res).max()), float(np.abs(tel - conn).max()))


def hilbert_identity_residual(frame: FrameField, x, eta=None) -> float:
    """``R sqrt|g| - (J1 + 2 J2 - 4 J3) sqrt|g| - 4 d_i(S^a_ab g^bi sqrt|g|)``.

    Uses the ``"hilbert"`` curvature convention and needs analytic second
    derivatives of the frame.
    """
    d2 = frame.d2e(x, allow_fd=False)
    e, E, de = _frame_data(frame, x)
    eta = minkowski(frame.n) if eta is None else np.asarray(eta, dtype=float)
    g = _checked_metric(e.T @ eta @ e)
    gi = np.linalg.inv(g)
    sq = float(np.sqrt(abs(np.linalg.det(g))))
    metric = MetricField.from_frame(frame, eta)
    curv = curvature_suite(metric, x, "hilbert")

    G = np.einsum("lA,Amn->lmn", E, de)
    S = 0.5 * (G - G.transpose(0, 2, 1))
    J1, J2, J3 = _weitzenbock(S, g)

    dE = -np.einsum("lB,Bps,pA->lAs", E, de, E)
    dG = np.einsum("lAs,Amn->lmns", dE, de) + np.einsum("lA,Amns->lmns", E, d2)
    dS = 0.5 * (dG - dG.transpose(0, 2, 1, 3))
    dg = _metric_derivative(eta, e, de)
    dgi = -np.einsum("ab,bcs,cd->ads", gi, dg, gi)
    dsq = 0.5 * sq * np.einsum("mn,mns->s", gi, dg)
    trace = np.einsum("aab->b", S)
    vec = np.einsum("b,bi->i", trace, gi)
    div = (np.einsum("aabi,bi->", dS, gi) + np.einsum("b,bii->", trace, dgi)) * sq
    div += float(vec @ dsq)
    return float(curv.density - (J1 + 2 * J2 - 4 * J3) * sq - 4.0 * div)
