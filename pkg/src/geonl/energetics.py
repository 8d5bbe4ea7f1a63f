"""Kinetic energies, isotropic potentials and the configuration-space metric.

Every kinetic model is a quadratic form in the velocities.  The internal part
is written as ``1/2 <w, K w>`` where ``w`` is the row-major flattening of an
affine velocity:

* ``left`` models use the material velocity ``omega_hat = phi^-1 phidot`` and
  are invariant under ``phi -> A phi``;
* ``right`` models use the spatial velocity ``omega = phidot phi^-1`` and are
  invariant under ``phi -> phi B``;
* the d'Alembert model uses ``phidot`` itself with ``K = g (x) J``.

A general fourth-order constant ``Ltensor[(A,B),(C,D)]`` multiplies
``omega_hat[A,B] * omega_hat[C,D]``; ``Rtensor`` plays the same role for
``omega``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

from .errors import MetricSingular, MissingConstant
from .kinematics import (
    InertiaParameters,
    KinematicState,
    affine_velocities,
    bipolar,
    check_nonsingular,
    deformation_tensors,
)


class ModelKind(str, enum.Enum):
    DALEMBERT = "DAlembert"
    LEFT_AFFINE = "LeftAffine"
    RIGHT_AFFINE = "RightAffine"
    DOUBLY_AFFINE = "DoublyAffine"
    AFF_METR = "AffMetr"
    METR_AFF = "MetrAff"


_REQUIRED = {
    ModelKind.DALEMBERT: ("J",),
    ModelKind.LEFT_AFFINE: ("Ltensor",),
    ModelKind.RIGHT_AFFINE: ("Rtensor",),
    ModelKind.DOUBLY_AFFINE: ("A_coeff", "B_coeff"),
    ModelKind.AFF_METR: ("I_scalar", "A_coeff", "B_coeff"),
    ModelKind.METR_AFF: ("I_scalar", "A_coeff", "B_coeff"),
}

# which affine velocity carries the internal energy
_SIDE = {
    ModelKind.DALEMBERT: "dalembert",
    ModelKind.LEFT_AFFINE: "left",
    ModelKind.AFF_METR: "left",
    ModelKind.DOUBLY_AFFINE: "left",
    ModelKind.RIGHT_AFFINE: "right",
    ModelKind.METR_AFF: "right",
}

# translational term: "cauchy" -> m/2 C_ij v^i v^j, "metric" -> m/2 g_ij v^i v^j
_TRANSLATIONAL = {
    ModelKind.DALEMBERT: "metric",
    ModelKind.LEFT_AFFINE: "cauchy",
    ModelKind.AFF_METR: "cauchy",
    ModelKind.DOUBLY_AFFINE: "cauchy",
    ModelKind.RIGHT_AFFINE: "metric",
    ModelKind.METR_AFF: "metric",
}


def required_constants(kind) -> tuple:
    """Names of the :class:`InertiaParameters` fields a model kind needs."""
    return _REQUIRED[ModelKind(kind)]


def commutation_matrix(n: int) -> np.ndarray:
    """``K`` with ``<vec X, K vec X> = Tr(X @ X)`` for row-major ``vec``."""
    K = np.zeros((n * n, n * n))
    for a, b in itertools.product(range(n), repeat=2):
        K[a * n + b, b * n + a] = 1.0
    return K


def scalar_inertia_operator(n: int, I_scalar=0.0, A=0.0, B=0.0, metric=None) -> np.ndarray:
    """Operator of ``I/2 <X,X>_metric + A/2 Tr(X^2) + B/2 (Tr X)^2``.

    ``<X,X>_metric = metric_AC metric^BD X^A_B X^C_D``.  Feeding the result as
    ``Ltensor`` (with ``metric = eta``) reproduces the AffMetr model; as
    ``Rtensor`` (with ``metric = g``) the MetrAff one.
    """
    metric = np.eye(n) if metric is None else np.asarray(metric, dtype=float)
    trace_vec = np.eye(n).ravel()
    return (
        I_scalar * np.kron(metric, np.linalg.inv(metric))
        + A * commutation_matrix(n)
        + B * np.outer(trace_vec, trace_vec)
    )


@dataclass(frozen=True, eq=False)
class KineticModel:
    """Tagged kinetic-energy model with its inertia constants and metrics.

    ``g`` is the spatial metric, ``eta`` the material one (identity by
    default).
    """

    kind: ModelKind
    params: InertiaParameters
    n: int
    g: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        for name in ("g", "eta"):
            val = getattr(self, name)
            val = np.eye(self.n) if val is None else np.array(val, dtype=float)
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        missing = [c for c in _REQUIRED[self.kind] if getattr(self.params, c) is None]
        if missing:
            raise MissingConstant(f"{self.kind.value} requires {', '.join(missing)}")
        n2 = self.n * self.n
        for name in ("Ltensor", "Rtensor"):
            val = getattr(self.params, name)
            if name in _REQUIRED[self.kind] and val.shape != (n2, n2):
                raise ValueError(f"{name} must have shape {(n2, n2)}")
        if self.kind is ModelKind.DALEMBERT and self.params.J.shape != (self.n, self.n):
            raise ValueError(f"J must have shape {(self.n, self.n)}")

    @property
    def side(self) -> str:
        return _SIDE[self.kind]

    @property
    def translational(self) -> str:
        return _TRANSLATIONAL[self.kind]

    @cached_property
    def operator(self) -> np.ndarray:
        """Symmetric ``n^2 x n^2`` operator of the internal quadratic form."""
        p, n = self.params, self.n
        k = self.kind
        if k is ModelKind.DALEMBERT:
            K = np.kron(self.g, p.J)
        elif k is ModelKind.LEFT_AFFINE:
            K = np.asarray(p.Ltensor, dtype=float)
        elif k is ModelKind.RIGHT_AFFINE:
            K = np.asarray(p.Rtensor, dtype=float)
        elif k is ModelKind.DOUBLY_AFFINE:
            K = scalar_inertia_operator(n, 0.0, p.A_coeff, p.B_coeff)
        elif k is ModelKind.AFF_METR:
            K = scalar_inertia_operator(n, p.I_scalar, p.A_coeff, p.B_coeff, self.eta)
        else:
            K = scalar_inertia_operator(n, p.I_scalar, p.A_coeff, p.B_coeff, self.g)
        K = 0.5 * (K + K.T)
        K.setflags(write=False)
        return K

    @cached_property
    def operator_inverse(self) -> np.ndarray:
        K = self.operator
        cond = np.linalg.cond(K)
        if not np.isfinite(cond) or cond > 1e12:
            raise MetricSingular(f"{self.kind.value} internal metric is singular (cond={cond:.3e})")
        Kinv = np.linalg.inv(K)
        Kinv.setflags(write=False)
        return Kinv

    @property
    def casimir_scale(self) -> float:
        """Inertia factor ``alpha`` in ``C(2) = 2 alpha T`` (doubly-affine, ``B = 0``)."""
        if self.params.alpha is not None:
            return float(self.params.alpha)
        if self.params.A_coeff is None:
            raise MissingConstant("alpha (or A) is required for the Casimir scale")
        return float(self.params.A_coeff)


def _quad(K: np.ndarray, X: np.ndarray) -> float:
    w = X.ravel()
    return 0.5 * float(w @ K @ w)


def internal_kinetic_energy(model: KineticModel, state: KinematicState) -> float:
    """Internal (relative-motion) kinetic energy, evaluated from its defining formula."""
    p, k = model.params, model.kind
    if k is ModelKind.DALEMBERT:
        # 1/2 g_ij phidot^i_A phidot^j_B J^AB
        return 0.5 * float(np.einsum("ij,ia,jb,ab->", model.g, state.phidot, state.phidot, p.J))
    vel = affine_velocities(state)
    if k is ModelKind.LEFT_AFFINE:
        return _quad(p.Ltensor, vel.omega_hat)
    if k is ModelKind.RIGHT_AFFINE:
        return _quad(p.Rtensor, vel.omega)
    W = vel.omega_hat if model.side == "left" else vel.omega
    # the doubly-affine part has the same value in either affine velocity
    t = 0.5 * p.A_coeff * np.trace(W @ W) + 0.5 * p.B_coeff * np.trace(W) ** 2
    if k is ModelKind.AFF_METR:
        eta = model.eta
        t += 0.5 * p.I_scalar * np.trace(W.T @ eta @ W @ np.linalg.inv(eta))
    elif k is ModelKind.METR_AFF:
        g = model.g
        t += 0.5 * p.I_scalar * np.trace(W.T @ g @ W @ np.linalg.inv(g))
    return float(t)


def translational_kinetic_energy(model: KineticModel, state: KinematicState) -> float:
    m = model.params.m
    if model.translational == "metric":
        return 0.5 * m * float(state.v @ model.g @ state.v)
    C = deformation_tensors(state.phi, model.g, model.eta).cauchy
    return 0.5 * m * float(state.v @ C @ state.v)


def kinetic_energy(model: KineticModel, state: KinematicState, part: str = "total") -> float:
    """Kinetic energy of ``state`` under ``model``.

    ``part`` selects ``"total"``, ``"internal"`` or ``"translational"``.
    """
    if part == "internal":
        return internal_kinetic_energy(model, state)
    if part == "translational":
        return translational_kinetic_energy(model, state)
    if part != "total":
        raise ValueError(f"unknown part {part!r}")
    return internal_kinetic_energy(model, state) + translational_kinetic_energy(model, state)


# --------------------------------------------------------------------------
# isotropic potentials V(q^1, ..., q^n)


class Potential:
    """Potential energy depending only on the logarithmic deformation invariants."""

    def __call__(self, q) -> float:
        raise NotImplementedError

    def gradient(self, q) -> np.ndarray:
        raise NotImplementedError

    def phi_gradient(self, phi) -> np.ndarray:
        """``dV/dphi`` through ``q = log(singular values of phi)``.

        Valid at repeated invariants because ``V`` is symmetric in ``q``.
        """
        U, s, Vt = np.linalg.svd(np.asarray(phi, dtype=float))
        dq = self.gradient(np.log(s))
        return U @ np.diag(dq / s) @ Vt

    def of_phi(self, phi) -> float:
        s = np.linalg.svd(np.asarray(phi, dtype=float), compute_uv=False)
        return self(np.log(s))


@dataclass(frozen=True)
class ZeroPotential(Potential):
    def __call__(self, q) -> float:
        return 0.0

    def gradient(self, q) -> np.ndarray:
        return np.zeros(len(q))

    def phi_gradient(self, phi) -> np.ndarray:
        return np.zeros(np.shape(phi))


@dataclass(frozen=True)
class DilatationHarmonic(Potential):
    """``V = k/2 (sum_a q^a)^2 = k/2 (log|det phi|)^2``."""

    k: float

    def __call__(self, q) -> float:
        return 0.5 * self.k * float(np.sum(q)) ** 2

    def gradient(self, q) -> np.ndarray:
        return np.full(len(q), self.k * float(np.sum(q)))

    def phi_gradient(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        _, logdet = np.linalg.slogdet(phi)
        return self.k * logdet * np.linalg.inv(phi).T


@dataclass(frozen=True)
class IsotropicPolynomial(Potential):
    """Symmetric polynomial written in power sums ``s_j = sum_a (q^a)^j``.

    ``coefficients`` maps a tuple of power-sum degrees to its coefficient:
    ``{(1, 1): c}`` is ``c * s_1**2``, ``{(2,): c, (4,): d}`` is
    ``c * s_2 + d * s_4``, and ``{(): c}`` is a constant.
    """

    coefficients: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        terms = {tuple(int(j) for j in key): float(c) for key, c in dict(self.coefficients).items()}
        for key in terms:
            if any(j < 1 for j in key):
                raise ValueError(f"power-sum degrees must be >= 1, got {key}")
        object.__setattr__(self, "coefficients", terms)

    @staticmethod
    def _power_sums(q, degrees):
        q = np.asarray(q, dtype=float)
        return {j: float(np.sum(q**j)) for j in degrees}

    def __call__(self, q) -> float:
        degrees = {j for key in self.coefficients for j in key}
        s = self._power_sums(q, degrees)
        return float(sum(c * np.prod([s[j] for j in key]) for key, c in self.coefficients.items()))

    def gradient(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        degrees = {j for key in self.coefficients for j in key}
        s = self._power_sums(q, degrees)
        grad = np.zeros_like(q)
        for key, c in self.coefficients.items():
            for pos, j in enumerate(key):
                rest = np.prod([s[i] for k, i in enumerate(key) if k != pos])
                grad += c * rest * j * q ** (j - 1)
        return grad


def potential_energy(pot: Potential, q) -> float:
    return pot(np.asarray(q, dtype=float))


# --------------------------------------------------------------------------
# quadratic-form representation


@dataclass(frozen=True)
class ConfigMetric:
    """Mass matrix over ``xi = (x, vec phi)`` so that ``T = 1/2 xidot^T G xidot``."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def signature(self, tol: float = 1e-12) -> tuple:
        """Counts of (positive, negative, zero) eigenvalues."""
        w = np.linalg.eigvalsh(self.matrix)
        scale = max(np.abs(w).max(), 1.0)
        return (int(np.sum(w > tol * scale)), int(np.sum(w < -tol * scale)),
                int(np.sum(np.abs(w) <= tol * scale)))


def velocity_map(model: KineticModel, phi) -> np.ndarray:
    """Matrix taking ``vec phidot`` to the flattened affine velocity the model uses."""
    n = model.n
    if model.side == "dalembert":
        return np.eye(n * n)
    phi_inv = np.linalg.inv(phi)
    if model.side == "left":
        return np.kron(phi_inv, np.eye(n))
    return np.kron(np.eye(n), phi_inv.T)


def config_metric(model: KineticModel, phi) -> ConfigMetric:
    phi = np.asarray(phi, dtype=float)
    n = model.n
    if model.side != "dalembert" or model.translational == "cauchy":
        check_nonsingular(phi)
    m = model.params.m
    if model.translational == "metric":
        G_tr = m * model.g
    else:
        G_tr = m * deformation_tensors(phi, model.g, model.eta).cauchy
    P = velocity_map(model, phi)
    G_int = P.T @ model.operator @ P
    G = np.zeros((n + n * n, n + n * n))
    G[:n, :n] = G_tr
    G[n:, n:] = G_int
    G = 0.5 * (G + G.T)
    return ConfigMetric(G)


def transform_state(state: KinematicState, A, side: str) -> KinematicState:
    """Left action ``phi -> A phi`` (with ``x -> A x``) or right action ``phi -> phi A``."""
    A = np.asarray(A, dtype=float)
    check_nonsingular(A)
    if side == "left":
        return KinematicState(A @ state.x, A @ state.v, A @ state.phi, A @ state.phidot)
    if side == "right":
        return KinematicState(state.x, state.v, state.phi @ A, state.phidot @ A)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def invariance_residual(model: KineticModel, transform, state: KinematicState,
                        part: str = "total") -> float:
    """``|T(transformed) - T| / (1 + |T|)`` for ``transform = (A, side)``."""
    A, side = transform
    t0 = kinetic_energy(model, state, part)
    t1 = kinetic_energy(model, transform_state(state, A, side), part)
    return abs(t1 - t0) / (1.0 + abs(t0))


def total_energy(model: KineticModel, pot: Potential, state: KinematicState) -> float:
    return kinetic_energy(model, state) + pot(bipolar(state.phi).q)
