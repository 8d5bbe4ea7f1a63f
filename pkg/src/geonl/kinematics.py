"""Kinematics of the affinely-rigid body.

A configuration is a translation ``x`` together with an invertible matrix
``phi`` placing material points ``a`` at ``xi = x + phi @ a``.  Velocities are
``v = dx/dt`` and ``phidot = dphi/dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyBody, SingularConfiguration

#: relative tolerance for flagging coincident deformation invariants
DEGENERACY_TOL = 1e-10
#: scale-aware singularity guard, |det phi| < SINGULAR_TOL * ||phi||_F**n
SINGULAR_TOL = 1e-13


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def check_nonsingular(phi: np.ndarray) -> float:
    """Return ``det(phi)`` or raise :class:`SingularConfiguration`."""
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[0]
    det = np.linalg.det(phi)
    scale = np.linalg.norm(phi) ** n
    if not np.isfinite(det) or abs(det) < SINGULAR_TOL * scale or scale == 0.0:
        raise SingularConfiguration(f"|det phi| = {abs(det):.3e} below threshold")
    return float(det)


@dataclass(frozen=True)
class KinematicState:
    """Position/velocity of the centre of mass plus internal configuration and rate."""

    x: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    phidot: np.ndarray

    def __post_init__(self):
        phi = _frozen(self.phi)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1] or phi.shape[0] < 1:
            raise ValueError(f"phi must be square, got shape {phi.shape}")
        n = phi.shape[0]
        object.__setattr__(self, "phi", phi)
        for name, shape in (("x", (n,)), ("v", (n,)), ("phidot", (n, n))):
            arr = _frozen(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @classmethod
    def internal(cls, phi, phidot) -> "KinematicState":
        """State with the centre of mass at rest at the origin."""
        n = np.shape(phi)[0]
        return cls(np.zeros(n), np.zeros(n), phi, phidot)

    def replace(self, **changes) -> "KinematicState":
        kw = dict(x=self.x, v=self.v, phi=self.phi, phidot=self.phidot)
        kw.update(changes)
        return KinematicState(**kw)

    # flattened coordinates xi = (x, vec phi), row-major vec
    def coordinates(self) -> np.ndarray:
        return np.concatenate([self.x, self.phi.ravel()])

    def velocities(self) -> np.ndarray:
        return np.concatenate([self.v, self.phidot.ravel()])

    @classmethod
    def from_flat(cls, xi, xidot, n: int) -> "KinematicState":
        xi = np.asarray(xi, dtype=float)
        xidot = np.asarray(xidot, dtype=float)
        return cls(xi[:n], xidot[:n], xi[n:].reshape(n, n), xidot[n:].reshape(n, n))


@dataclass(frozen=True)
class AffineVelocities:
    """Spatial (``omega = phidot phi^-1``) and material (``phi^-1 phidot``) affine velocities."""

    omega: np.ndarray
    omega_hat: np.ndarray
    v_hat: np.ndarray


def affine_velocities(state: KinematicState) -> AffineVelocities:
    check_nonsingular(state.phi)
    phi_inv = np.linalg.inv(state.phi)
    return AffineVelocities(
        omega=_frozen(state.phidot @ phi_inv),
        omega_hat=_frozen(phi_inv @ state.phidot),
        v_hat=_frozen(phi_inv @ state.v),
    )


@dataclass(frozen=True)
class DeformationTensors:
    cauchy: np.ndarray
    green: np.ndarray


def deformation_tensors(phi, g=None, eta=None) -> DeformationTensors:
    """Cauchy tensor ``C = phi^-T eta phi^-1`` and Green tensor ``G = phi^T g phi``.

    ``g`` is the spatial metric and ``eta`` the material one; both default to
    the identity.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[0]
    g = np.eye(n) if g is None else np.asarray(g, dtype=float)
    eta = np.eye(n) if eta is None else np.asarray(eta, dtype=float)
    check_nonsingular(phi)
    phi_inv = np.linalg.inv(phi)
    cauchy = phi_inv.T @ eta @ phi_inv
    green = phi.T @ g @ phi
    # symmetrize away roundoff
    return DeformationTensors(_frozen(0.5 * (cauchy + cauchy.T)), _frozen(0.5 * (green + green.T)))


@dataclass(frozen=True)
class BipolarDecomposition:
    """``phi = L @ diag(Q) @ R.T`` with orthogonal ``L``, ``R`` and ``Q`` sorted descending.

    ``degenerate`` is set when two invariants coincide to within
    :data:`DEGENERACY_TOL`; the factors are then determined only up to a
    rotation inside the degenerate block.
    """

    Lfac: np.ndarray
    Rfac: np.ndarray
    Q: np.ndarray
    q: np.ndarray
    degenerate: bool = False
    degenerate_pairs: tuple = field(default=())

    def reconstruct(self) -> np.ndarray:
        return self.Lfac @ np.diag(self.Q) @ self.Rfac.T


def bipolar(phi) -> BipolarDecomposition:
    phi = np.asarray(phi, dtype=float)
    check_nonsingular(phi)
    U, s, Vt = np.linalg.svd(phi)
    V = Vt.T
    if np.linalg.det(U) < 0:
        # flipping column k of both factors leaves U diag(s) V^T unchanged
        U[:, -1] *= -1.0
        V[:, -1] *= -1.0
    n = len(s)
    pairs = tuple(
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if abs(s[a] - s[b]) <= DEGENERACY_TOL * s[0]
    )
    return BipolarDecomposition(
        Lfac=_frozen(U),
        Rfac=_frozen(V),
        Q=_frozen(s),
        q=_frozen(np.log(s)),
        degenerate=bool(pairs),
        degenerate_pairs=pairs,
    )


@dataclass(frozen=True)
class InertiaParameters:
    """Inertia constants of the body.

    Only the constants needed by the chosen kinetic model have to be set.
    ``Ltensor``/``Rtensor`` are dense ``n^2 x n^2`` arrays acting on row-major
    flattened affine velocities (see :mod:`geonl.energetics`).
    """

    m: float = 1.0
    J: Optional[np.ndarray] = None
    I_scalar: Optional[float] = None
    A_coeff: Optional[float] = None
    B_coeff: Optional[float] = None
    alpha: Optional[float] = None
    Ltensor: Optional[np.ndarray] = None
    Rtensor: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"total mass must be positive, got {self.m}")
        for name in ("J", "Ltensor", "Rtensor"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))
        if self.J is not None and not np.allclose(self.J, self.J.T, atol=1e-14, rtol=1e-12):
            raise ValueError("J must be symmetric")


def inertia_from_point_masses(masses: Sequence[float], positions) -> InertiaParameters:
    """Mass and second-moment tensor ``J^AB = sum mu_k a_k^A a_k^B`` of point masses."""
    masses = np.asarray(masses, dtype=float)
    if masses.size == 0:
        raise EmptyBody("at least one point mass is required")
    if np.any(masses < 0):
        raise ValueError("masses must be non-negative")
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.shape[0] != masses.size:
        raise ValueError("one material position per mass is required")
    J = np.einsum("k,ka,kb->ab", masses, positions, positions)
    return InertiaParameters(m=float(masses.sum()), J=J)
