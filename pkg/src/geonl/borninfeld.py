"""Born-Infeld electrostatics: field invariants, Lagrangians and the point charge.

Natural units, Minkowski metric ``diag(1, -1, -1, -1)``.  A field tensor
``F[mu, nu]`` (lower indices) holds ``E_i = F[0, i]`` and
``B_i = -1/2 eps_ijk F[j, k]``; the four-dimensional Levi-Civita symbol has
``eps^0123 = +1`` (so ``eps_0123 = -1``) and the dual is
``Fdual^{mu nu} = 1/2 eps^{mu nu ka la} F_{ka la}``.  With these choices
``-1/4 F_mn Fdual^mn = E.B``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure, SaturationExceeded

MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])

#: integral of dt / sqrt(1 + t^4) over [0, inf) = Gamma(1/4)^2 / (4 sqrt(pi))
QUARTIC_INTEGRAL = math.gamma(0.25) ** 2 / (4.0 * math.sqrt(math.pi))


def _levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(perm[i] > perm[j] for i in range(n) for j in range(i + 1, n))
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


_EPS3 = _levi_civita(3)
_EPS4_UPPER = _levi_civita(4)


class LagrangianKind(str, enum.Enum):
    MAXWELL = "Maxwell"
    BORN_INFELD = "BornInfeld"
    BORN_ORIGINAL = "BornOriginal"


@dataclass(frozen=True)
class FieldPoint:
    """Electric field ``E`` and magnetic induction ``B`` at a point."""

    E: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        for name in ("E", "B"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_tensor(cls, F) -> "FieldPoint":
        F = np.asarray(F, dtype=float)
        if F.shape != (4, 4) or not np.allclose(F, -F.T, rtol=0, atol=1e-14 * (1 + np.abs(F).max())):
            raise ValueError("F must be an antisymmetric 4x4 array")
        E = F[0, 1:]
        B = -0.5 * np.einsum("ijk,jk->i", _EPS3, F[1:, 1:])
        return cls(E, B)

    def tensor(self) -> np.ndarray:
        F = np.zeros((4, 4))
        F[0, 1:] = self.E
        F[1:, 0] = -self.E
        F[1:, 1:] = -np.einsum("ijk,i->jk", _EPS3, self.B)
        return F


def field_invariants(fp: FieldPoint) -> tuple:
    """``(S, P) = (1/2 (E^2 - B^2), E.B)``."""
    S = 0.5 * (float(fp.E @ fp.E) - float(fp.B @ fp.B))
    return S, float(fp.E @ fp.B)


def tensor_invariants(F) -> tuple:
    """``S = -1/4 F_mn F^mn`` and ``P = -1/4 F_mn Fdual^mn`` by index contraction."""
    F = np.asarray(F, dtype=float)
    F_up = MINKOWSKI @ F @ MINKOWSKI
    dual = 0.5 * np.einsum("mnkl,kl->mn", _EPS4_UPPER, F)
    S = -0.25 * float(np.einsum("mn,mn->", F, F_up))
    P = -0.25 * float(np.einsum("mn,mn->", F, dual))
    return S, P


def _sqrt_radicand(radicand: float, what: str) -> float:
    if radicand < 0:
        raise SaturationExceeded(f"{what} radicand {radicand:.6g} < 0: field above the maximal strength")
    return math.sqrt(radicand)


def lagrangian(kind, fp: FieldPoint, b: Optional[float] = None) -> float:
    """Lagrangian density of the field at ``fp`` with field-strength constant ``b``."""
    kind = LagrangianKind(kind)
    S, P = field_invariants(fp)
    if kind is LagrangianKind.MAXWELL:
        return S
    if b is None or not b > 0:
        raise ValueError("a positive field-strength constant b is required")
    if kind is LagrangianKind.BORN_INFELD:
        root = _sqrt_radicand(1.0 - 2.0 * S / b**2 - P**2 / b**4, "Born-Infeld")
        return b**2 - b**2 * root
    E2, B2 = float(fp.E @ fp.E), float(fp.B @ fp.B)
    root = _sqrt_radicand(1.0 + (B2 - E2) / b**2, "Born")
    return b**2 * (root - 1.0)


def determinant_lagrangian(F, b: float, g=None) -> float:
    """``b^2 sqrt|det g| - sqrt|det(b g + F)|``, the determinant form of Born-Infeld."""
    F = np.asarray(F, dtype=float)
    g = MINKOWSKI if g is None else np.asarray(g, dtype=float)
    return b**2 * math.sqrt(abs(np.linalg.det(g))) - math.sqrt(abs(np.linalg.det(b * g + F)))


# --------------------------------------------------------------------------
# static point charge


@dataclass(frozen=True)
class RadialBIField:
    """Point charge ``e_charge`` in Born-Infeld electrostatics with constant ``b``."""

    e_charge: float
    b: float

    def __post_init__(self):
        if not (self.e_charge > 0 and self.b > 0):
            raise ValueError("charge and field-strength constant must be positive")

    @property
    def r0(self) -> float:
        return math.sqrt(self.e_charge / self.b)


def _quad(f, a, b, tol, what):
    if b <= a:
        return 0.0
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=1e-13, limit=200)
    if not (np.isfinite(val) and err <= max(tol, 1e-13 * abs(val))):
        raise QuadratureFailure(f"{what}: error estimate {err:.3e} above tolerance")
    return val


def _quartic_tail(t0: float, tol: float = 1e-12) -> float:
    """``int_{t0}^inf dt / sqrt(1 + t^4)``; the part beyond 1 uses ``u = 1/t``."""
    f = lambda t: 1.0 / math.sqrt(1.0 + t**4)  # noqa: E731 - same form in t and in u
    if t0 >= 1.0:
        return _quad(f, 0.0, 1.0 / t0, tol, "potential")
    return _quad(f, t0, 1.0, tol, "potential") + _quad(f, 0.0, 1.0, tol, "potential")


def field_strength(field: RadialBIField, r):
    """``|E| = e / sqrt(r0^4 + r^4)``; finite (equal to ``b``) at the origin."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    E = field.e_charge / np.sqrt(field.r0**4 + r**4)
    return float(E) if E.ndim == 0 else E


def radial_solution(field: RadialBIField, r):
    """Field magnitude and electrostatic potential (zero at infinity) at radius ``r``."""
    E = field_strength(field, r)
    scale = field.e_charge / field.r0
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    phi = np.array([scale * _quartic_tail(ri / field.r0) for ri in r_arr])
    if np.ndim(r) == 0:
        return E, float(phi[0])
    return E, phi


def _density_t(t):
    """Energy density over ``b^2`` as a function of ``t = r/r0`` (``t > 0``)."""
    s = np.sqrt(1.0 + t**4)
    return 1.0 / (t**2 * s) - 1.0 / (s * (t**2 + s))


def energy_density(field: RadialBIField, r):
    """``omega = E D - L`` on the point-charge solution; diverges like ``1/r^2`` at 0."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        w = field.b**2 * _density_t(r / field.r0)
    return float(w) if w.ndim == 0 else w


def total_energy(field: RadialBIField, r_max: float = math.inf, r_min: float = 0.0) -> float:
    """``int omega 4 pi r^2 dr`` over ``[r_min, r_max]``.

    The radial weight cancels the ``1/r^2`` divergence at the centre; beyond
    ``r0`` the substitution ``u = r0/r`` maps the Coulomb tail to a finite
    interval.
    """
    if not r_max > 0 or r_min < 0 or r_min >= r_max:
        raise ValueError("need 0 <= r_min < r_max")
    t_min, t_max = r_min / field.r0, r_max / field.r0

    def inner(t):
        s = math.sqrt(1.0 + t**4)
        return 1.0 / s - t**2 / (s * (t**2 + s))

    def outer(u):
        return 1.0 / (1.0 + math.sqrt(1.0 + u**4))

    tol = 1e-13
    total = _quad(inner, t_min, min(t_max, 1.0), tol, "energy")
    if t_max > 1.0:
        total += _quad(outer, 1.0 / t_max, min(1.0, 1.0 / t_min) if t_min > 0 else 1.0, tol, "energy")
    # b^2 r0^3 = e^(3/2) b^(1/2)
    return 4.0 * math.pi * field.b**2 * field.r0**3 * total
