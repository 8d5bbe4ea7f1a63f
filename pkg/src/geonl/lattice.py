"""Bipolar canonical variables and the lattice Hamiltonians of the invariants.

With ``phi = L diag(Q) R^T`` the internal motion splits into the invariants
``q = log Q`` and two orthogonal "gyroscopes" ``L`` and ``R`` with angular
velocities ``chi = L^T Ldot`` and ``theta = R^T Rdot``.  Their conjugate spins
are ``rho`` and ``tau``; the combinations ``M = -rho - tau`` and
``N = rho - tau`` drive a Sutherland-type repulsion (``sinh``) and an
attraction (``cosh``) between the invariants.

Spins pair with angular velocities over independent components only,
``<rho, chi> = sum_{a<b} rho[a, b] chi[a, b]``; the lattice sums run over
ordered pairs ``a != b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energetics import KineticModel, config_metric
from .errors import CoincidentInvariants, DegenerateInvariants
from .kinematics import KinematicState, bipolar, check_nonsingular

#: |q^a - q^b| below this with a nonzero spin numerator is treated as coincident
COINCIDENT_TOL = 1e-10
SPIN_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BipolarCanonicalState:
    """Internal state in bipolar canonical coordinates."""

    q: np.ndarray
    p: np.ndarray
    rho_hat: np.ndarray
    tau_hat: np.ndarray
    qdot: Optional[np.ndarray] = None
    chi_hat: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None
    Lfac: Optional[np.ndarray] = None
    Rfac: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("q", "p", "rho_hat", "tau_hat", "qdot", "chi_hat", "theta_hat", "Lfac", "Rfac"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))
        n = self.q.size
        if self.p.shape != (n,):
            raise ValueError("p must match q")
        for name in ("rho_hat", "tau_hat"):
            X = getattr(self, name)
            if X.shape != (n, n) or not np.array_equal(X, -X.T):
                raise ValueError(f"{name} must be an antisymmetric {n}x{n} matrix")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def Q(self) -> np.ndarray:
        return np.exp(self.q)

    @property
    def P(self) -> np.ndarray:
        """Momenta conjugate to ``Q`` (``P_a = p_a / Q_a``)."""
        return self.p / self.Q

    @property
    def M(self) -> np.ndarray:
        return -self.rho_hat - self.tau_hat

    @property
    def N(self) -> np.ndarray:
        return self.rho_hat - self.tau_hat

    @classmethod
    def from_spins(cls, q, p, M=None, N=None) -> "BipolarCanonicalState":
        """Build a state from ``M`` and ``N`` (both default to zero)."""
        q = np.asarray(q, dtype=float)
        n = q.size
        M = np.zeros((n, n)) if M is None else np.asarray(M, dtype=float)
        N = np.zeros((n, n)) if N is None else np.asarray(N, dtype=float)
        rho = _antisym(0.5 * (N - M))
        tau = _antisym(-0.5 * (M + N))
        return cls(q=q, p=np.asarray(p, dtype=float), rho_hat=rho, tau_hat=tau)


def _antisym(X) -> np.ndarray:
    """Antisymmetric matrix from the strict upper triangle of ``X``."""
    U = np.triu(np.asarray(X, dtype=float), 1)
    return U - U.T


def _upper(X, n):
    return np.array([X[a, b] for a in range(n) for b in range(a + 1, n)])


def _from_upper(vals, n):
    X = np.zeros((n, n))
    i = 0
    for a in range(n):
        for b in range(a + 1, n):
            X[a, b] = vals[i]
            X[b, a] = -vals[i]
            i += 1
    return X


def bipolar_velocities(phi, phidot):
    """``(decomposition, qdot, chi, theta)`` from the differentiated decomposition.

    Raises :class:`DegenerateInvariants` when two invariants coincide, since
    the gyroscope velocities are then undetermined.
    """
    phi = np.asarray(phi, dtype=float)
    phidot = np.asarray(phidot, dtype=float)
    dec = bipolar(phi)
    if dec.degenerate:
        raise DegenerateInvariants(f"coincident invariants at pairs {dec.degenerate_pairs}")
    Q = dec.Q
    n = Q.size
    W = dec.Lfac.T @ phidot @ dec.Rfac
    qdot = np.diag(W) / Q
    chi = np.zeros((n, n))
    theta = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            den = Q[b] ** 2 - Q[a] ** 2
            chi[a, b] = (Q[b] * W[a, b] + Q[a] * W[b, a]) / den
            theta[a, b] = (Q[a] * W[a, b] + Q[b] * W[b, a]) / den
    return dec, qdot, chi - chi.T, theta - theta.T


def state_from_bipolar(Lfac, q, Rfac, qdot, chi, theta, x=None, v=None) -> KinematicState:
    """Inverse of :func:`bipolar_velocities`: assemble ``(phi, phidot)``."""
    Lfac = np.asarray(Lfac, dtype=float)
    Rfac = np.asarray(Rfac, dtype=float)
    Q = np.exp(np.asarray(q, dtype=float))
    n = Q.size
    D = np.diag(Q)
    chi = _antisym(chi)
    theta = _antisym(theta)
    core = chi @ D + D @ np.diag(qdot) - D @ theta
    phi = Lfac @ D @ Rfac.T
    phidot = Lfac @ core @ Rfac.T
    x = np.zeros(n) if x is None else x
    v = np.zeros(n) if v is None else v
    return KinematicState(x, v, phi, phidot)


def _phidot_of(dec, u, n, k):
    D = np.diag(dec.Q)
    core = _from_upper(u[n:n + k], n) @ D + D @ np.diag(u[:n]) - D @ _from_upper(u[n + k:], n)
    return dec.Lfac @ core @ dec.Rfac.T


def to_bipolar_canonical(model: KineticModel, state: KinematicState) -> BipolarCanonicalState:
    """Canonical momenta of the internal motion in bipolar coordinates.

    The momenta are partial derivatives of the internal kinetic energy with
    respect to the quasi-velocities ``(qdot, chi[a<b], theta[a<b])`` at fixed
    ``(L, q, R)``, with the energy taken from the configuration metric.  Since
    it is quadratic, central differences are exact up to rounding.
    """
    check_nonsingular(state.phi)
    dec, qdot, chi, theta = bipolar_velocities(state.phi, state.phidot)
    n = dec.Q.size
    k = n * (n - 1) // 2
    u0 = np.concatenate([qdot, _upper(chi, n), _upper(theta, n)])

    # phidot is linear in the quasi-velocities: vec phidot = basis @ u
    basis = np.empty((n * n, u0.size))
    for i in range(u0.size):
        e = np.zeros_like(u0)
        e[i] = 1.0
        basis[:, i] = _phidot_of(dec, e, n, k).ravel()
    G_int = config_metric(model, state.phi).matrix[n:, n:]

    def energy(u):
        w = basis @ u
        return 0.5 * float(w @ G_int @ w)

    h = 0.5 * (1.0 + float(np.max(np.abs(u0))))
    grad = np.empty_like(u0)
    for i in range(u0.size):
        e = np.zeros_like(u0)
        e[i] = h
        grad[i] = (energy(u0 + e) - energy(u0 - e)) / (2 * h)
    return BipolarCanonicalState(
        q=dec.q, p=grad[:n],
        rho_hat=_from_upper(grad[n:n + k], n), tau_hat=_from_upper(grad[n + k:], n),
        qdot=qdot, chi_hat=chi, theta_hat=theta, Lfac=dec.Lfac, Rfac=dec.Rfac,
    )


@dataclass(frozen=True)
class PairInteraction:
    """Contribution of the unordered pair ``(a, b)`` to the Casimir."""

    pair: tuple
    repulsive: float
    attractive: float


def _check_pair(diff, num, a, b, what="q"):
    if abs(diff) < COINCIDENT_TOL and abs(num) > SPIN_TOL:
        raise CoincidentInvariants(
            f"{what}{a + 1} and {what}{b + 1} coincide with nonzero spin {num:.3e}"
        )


def interaction_profile(bstate: BipolarCanonicalState) -> list:
    """Per-pair repulsive (``sinh``) and attractive (``cosh``) Casimir terms.

    Each unordered pair collects both ordered terms ``(a, b)`` and ``(b, a)``.
    """
    q, M, N = bstate.q, bstate.M, bstate.N
    out = []
    for a in range(bstate.n):
        for b in range(a + 1, bstate.n):
            d = q[a] - q[b]
            _check_pair(d, M[a, b], a, b)
            rep = 0.0 if M[a, b] == 0 else 2.0 / 16.0 * M[a, b] ** 2 / np.sinh(0.5 * d) ** 2
            att = -2.0 / 16.0 * N[a, b] ** 2 / np.cosh(0.5 * d) ** 2
            out.append(PairInteraction((a, b), float(rep), float(att)))
    return out


def casimir_C2(bstate: BipolarCanonicalState) -> float:
    """Quadratic Casimir of the doubly-affine motion in bipolar variables.

    ``sum p_a^2 + 1/16 sum_{a!=b} M_ab^2 / sinh^2((q_a-q_b)/2)
    - 1/16 sum_{a!=b} N_ab^2 / cosh^2((q_a-q_b)/2)``.
    """
    total = float(np.sum(bstate.p**2))
    for rec in interaction_profile(bstate):
        total += rec.repulsive + rec.attractive
    return total


def isotropic_hamiltonian(bstate: BipolarCanonicalState, I_scalar: float) -> float:
    """Internal kinetic energy of an isotropic d'Alembert body (``J = I delta``).

    ``1/(2I) sum P_a^2 + 1/(8I) sum_{a!=b} M_ab^2/(Q_a-Q_b)^2
    + 1/(8I) sum_{a!=b} N_ab^2/(Q_a+Q_b)^2``.
    """
    if not I_scalar > 0:
        raise ValueError("isotropic inertia must be positive")
    Q, M, N = bstate.Q, bstate.M, bstate.N
    total = 0.5 * float(np.sum(bstate.P**2))
    for a in range(bstate.n):
        for b in range(a + 1, bstate.n):
            diff = Q[a] - Q[b]
            _check_pair(diff / max(Q[a], Q[b]), M[a, b], a, b, what="Q")
            if M[a, b] != 0:
                total += 2.0 / 8.0 * M[a, b] ** 2 / diff**2
            total += 2.0 / 8.0 * N[a, b] ** 2 / (Q[a] + Q[b]) ** 2
    return total / I_scalar
