"""Geodesic (and potential-driven) motion of the affinely-rigid body.

Equations of motion follow from ``L = 1/2 xidot^T G(xi) xidot - V(q)``.  The
analytic route writes the Euler-Lagrange equations in matrix form for each
model family; the finite-difference route builds them from the mass matrix
:func:`geonl.energetics.config_metric` and is kept as an independent check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lattice
from .energetics import (
    KineticModel,
    ModelKind,
    Potential,
    ZeroPotential,
    config_metric,
    kinetic_energy,
)
from .errors import (
    CoincidentInvariants,
    DegenerateInvariants,
    MetricSingular,
    SingularConfiguration,
    SingularityApproached,
    StepSizeUnderflow,
)
from .kinematics import KinematicState, bipolar, check_nonsingular
from .linalg import expm

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# accelerations


def _analytic_accelerations(model: KineticModel, pot: Potential, x, v, phi, phidot):
    n = model.n
    K = model.operator
    Kinv = model.operator_inverse
    phi_inv = np.linalg.inv(phi)
    force = -pot.phi_gradient(phi)

    xdd = np.zeros(n)
    if model.translational == "cauchy":
        C = phi_inv.T @ model.eta @ phi_inv
        omega = phidot @ phi_inv
        xdd = np.linalg.solve(C, omega.T @ C @ v) + omega @ v
        force = force - model.params.m * np.outer(C @ v, phi_inv @ v)

    def apply(op, X):
        return (op @ X.ravel()).reshape(n, n)

    if model.side == "dalembert":
        phidd = apply(Kinv, force)
    elif model.side == "left":
        W = phi_inv @ phidot
        Pi = apply(K, W)
        force = force + phi_inv.T @ (W.T @ Pi - Pi @ W.T + apply(K, W @ W))
        phidd = phi @ apply(Kinv, phi.T @ force)
    else:
        W = phidot @ phi_inv
        Pi = apply(K, W)
        force = force + (Pi @ W.T - W.T @ Pi + apply(K, W @ W)) @ phi_inv.T
        phidd = apply(Kinv, force @ phi.T) @ phi
    return xdd, phidd


def _fd_accelerations(model: KineticModel, pot: Potential, state: KinematicState):
    n = model.n
    xi = state.coordinates()
    xid = state.velocities()
    h = 1e-6 * (1.0 + np.linalg.norm(xi))

    def metric(z):
        return config_metric(model, z[n:].reshape(n, n)).matrix

    def potential(z):
        return pot.of_phi(z[n:].reshape(n, n))

    G = metric(xi)
    speed = np.linalg.norm(xid)
    dG_dt = np.zeros_like(G)
    if speed > 0:
        u = xid / speed
        dG_dt = (metric(xi + h * u) - metric(xi - h * u)) / (2 * h) * speed
    grad_T2 = np.zeros_like(xi)
    grad_V = np.zeros_like(xi)
    for k in range(n, xi.size):
        e = np.zeros_like(xi)
        e[k] = h
        Gp, Gm = metric(xi + e), metric(xi - e)
        grad_T2[k] = (xid @ Gp @ xid - xid @ Gm @ xid) / (2 * h)
        grad_V[k] = (potential(xi + e) - potential(xi - e)) / (2 * h)
    rhs = -grad_V - dG_dt @ xid + 0.5 * grad_T2
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        raise MetricSingular(f"configuration metric singular (cond={cond:.3e})")
    return np.linalg.solve(G, rhs)


def derive_accelerations(model: KineticModel, potential: Optional[Potential],
                         state: KinematicState, method: str = "analytic") -> np.ndarray:
    """Configuration acceleration ``xi'' = (x'', vec phi'')``.

    ``method="fd"`` uses central differences of the mass matrix with step
    ``1e-6 * (1 + |xi|)`` instead of the closed-form Euler-Lagrange terms.
    """
    pot = potential or ZeroPotential()
    check_nonsingular(state.phi)
    if method == "fd":
        return _fd_accelerations(model, pot, state)
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    xdd, phidd = _analytic_accelerations(model, pot, state.x, state.v, state.phi, state.phidot)
    return np.concatenate([xdd, phidd.ravel()])


# --------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``method`` is ``"dopri5"`` (adaptive embedded 5(4) pair), ``"gauss4"``
    (fixed-step two-stage Gauss-Legendre, symmetric) or ``"rk4"`` (fixed-step
    classical).  Fixed-step methods use ``step``.
    """

    method: str = "dopri5"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    first_step: Optional[float] = None
    step: Optional[float] = None
    singularity_guard: float = 1e-6
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "gauss4", "rk4"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method != "dopri5" and not (self.step and self.step > 0):
            raise ValueError(f"{self.method} needs a positive fixed step")
        if self.singularity_guard < 0:
            raise ValueError("singularity_guard must be non-negative")


@dataclass
class Trajectory:
    """Samples of an integrated (or analytic) motion with per-sample diagnostics."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    phidot: np.ndarray
    energy: Optional[np.ndarray] = None
    casimir: Optional[np.ndarray] = None
    shear_casimir: Optional[np.ndarray] = None
    det_phi: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    q_spread: Optional[np.ndarray] = None
    steps_accepted: int = 0
    steps_rejected: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def state(self, i: int) -> KinematicState:
        return KinematicState(self.x[i], self.v[i], self.phi[i], self.phidot[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> KinematicState:
        return self.state(-1)


def _casimirs(model: KineticModel, state: KinematicState):
    try:
        bs = lattice.to_bipolar_canonical(model, state)
        c2 = lattice.casimir_C2(bs)
    except (DegenerateInvariants, CoincidentInvariants):
        return math.nan, math.nan
    return c2, c2 - float(np.sum(bs.p)) ** 2 / model.n


def annotate(traj: Trajectory, model: Optional[KineticModel] = None,
             potential: Optional[Potential] = None, casimir: Optional[bool] = None) -> Trajectory:
    """Fill in energy, Casimir, det(phi), q and q-spread for every sample.

    The Casimir is evaluated for doubly-affine models unless ``casimir`` says
    otherwise.
    """
    pot = potential or ZeroPotential()
    N, n = len(traj), traj.n
    q = np.empty((N, n))
    for i in range(N):
        q[i] = np.log(np.linalg.svd(traj.phi[i], compute_uv=False))
    traj.q = q
    traj.q_spread = q.max(axis=1) - q.min(axis=1)
    traj.det_phi = np.linalg.det(traj.phi)
    if model is None:
        return traj
    traj.energy = np.array([kinetic_energy(model, traj.state(i)) + pot(q[i]) for i in range(N)])
    if casimir is None:
        casimir = model.kind is ModelKind.DOUBLY_AFFINE
    if casimir:
        vals = np.array([_casimirs(model, traj.state(i)) for i in range(N)])
        traj.casimir, traj.shear_casimir = vals[:, 0], vals[:, 1]
    return traj


# Dormand-Prince 5(4)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array(_DP_A[6] + [0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# two-stage Gauss-Legendre
_S3 = math.sqrt(3.0)
_GL_A = np.array([[0.25, 0.25 - _S3 / 6], [0.25 + _S3 / 6, 0.25]])
_GL_B = np.array([0.5, 0.5])


class _System:
    def __init__(self, model, pot, n):
        self.model, self.pot, self.n = model, pot, n
        self.nc = n + n * n
        self.evaluations = 0

    def split(self, y):
        n, nc = self.n, self.nc
        return y[:n], y[n:nc].reshape(n, n), y[nc:nc + n], y[nc + n:].reshape(n, n)

    def __call__(self, y):
        self.evaluations += 1
        x, phi, v, phidot = self.split(y)
        try:
            xdd, phidd = _analytic_accelerations(self.model, self.pot, x, v, phi, phidot)
        except np.linalg.LinAlgError as exc:
            raise SingularConfiguration(f"configuration became singular: {exc}") from None
        return np.concatenate([v, phidot.ravel(), xdd, phidd.ravel()])


def _pack(state: KinematicState) -> np.ndarray:
    return np.concatenate([state.x, state.phi.ravel(), state.v, state.phidot.ravel()])


def _guard(sys: _System, y, guard: float):
    _, phi, _, phidot = sys.split(y)
    check_nonsingular(phi)
    if guard <= 0:
        return
    U, s, Vt = np.linalg.svd(phi)
    q = np.log(s)
    W = U.T @ phidot @ Vt.T
    scale = np.linalg.norm(W) + 1.0
    n = len(q)
    for a in range(n):
        for b in range(a + 1, n):
            # only the symmetric off-diagonal rate feeds the repulsive spin M; a rigid
            # rotation through coincident invariants is regular
            if abs(q[a] - q[b]) < guard and abs(W[a, b] + W[b, a]) > 1e-12 * scale:
                raise SingularityApproached(
                    f"|q{a + 1} - q{b + 1}| = {abs(q[a] - q[b]):.3e} with nonzero repulsive spin rate"
                )


def _hermite(y0, f0, y1, f1, h, theta):
    """Cubic Hermite interpolant across one step, at fraction ``theta``."""
    t2, t3 = theta * theta, theta ** 3
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


# interior fractions probed by the guard, so long steps cannot hop over a coincidence
_GUARD_PROBES = (0.25, 0.5, 0.75)


def _rms(vec):
    return math.sqrt(float(np.mean(vec * vec)))


def _initial_step(sys, y, f0, direction, cfg):
    sc = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    d0, d1 = _rms(y / sc), _rms(f0 / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, cfg.max_step)
    f1 = sys(y + direction * h0 * f0)
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, cfg.max_step)


def _gauss_step(sys, y, h):
    f0 = sys(y)
    K = np.stack([f0, f0])
    for _ in range(100):
        Z = y + h * (_GL_A @ K)
        K_new = np.stack([sys(Z[0]), sys(Z[1])])
        delta = np.max(np.abs(K_new - K)) * abs(h)
        K = K_new
        if delta <= 1e-15 * (1.0 + np.max(np.abs(y))):
            break
    else:
        raise StepSizeUnderflow("Gauss-Legendre stage iteration did not converge; reduce the step")
    return y + h * (_GL_B @ K)


def _rk4_step(sys, y, h):
    k1 = sys(y)
    k2 = sys(y + 0.5 * h * k1)
    k3 = sys(y + 0.5 * h * k2)
    k4 = sys(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(model: KineticModel, potential: Optional[Potential], state0: KinematicState,
              tspan, cfg: Optional[IntegratorConfig] = None, diagnostics: bool = True) -> Trajectory:
    """Integrate from ``tspan[0]`` to ``tspan[1]`` (backwards if ``tspan[1] < tspan[0]``).

    Samples are recorded at every accepted step.  Raises
    :class:`SingularityApproached` (carrying the partial trajectory) when two
    deformation invariants come within ``cfg.singularity_guard`` while the
    symmetric (spin-carrying) part of the off-diagonal rate is nonzero.  The
    guard is evaluated at each step end and at interior points of a cubic
    Hermite interpolant, so large steps do not skip a near-coincidence.
    """
    cfg = cfg or IntegratorConfig()
    pot = potential or ZeroPotential()
    t0, t1 = float(tspan[0]), float(tspan[1])
    n = state0.n
    sys = _System(model, pot, n)
    y = _pack(state0)
    check_nonsingular(state0.phi)
    model.operator_inverse  # noqa: B018 - fail early on a singular metric
    direction = 1.0 if t1 >= t0 else -1.0
    times, ys = [t0], [y.copy()]
    accepted = rejected = 0

    def finish():
        Y = np.array(ys)
        nc = n + n * n
        traj = Trajectory(
            times=np.array(times), x=Y[:, :n], phi=Y[:, n:nc].reshape(-1, n, n),
            v=Y[:, nc:nc + n], phidot=Y[:, nc + n:].reshape(-1, n, n),
            steps_accepted=accepted, steps_rejected=rejected,
            meta={"method": cfg.method, "rhs_evaluations": sys.evaluations},
        )
        return annotate(traj, model, pot) if diagnostics else traj

    def accept(t, y_new, y_old, f_old, f_new, hs):
        try:
            if cfg.singularity_guard > 0:
                for theta in _GUARD_PROBES:
                    y_mid = _hermite(y_old, f_old, y_new, f_new, hs, theta)
                    try:
                        _guard(sys, y_mid, cfg.singularity_guard)
                    except SingularityApproached:
                        times.append(t - (1 - theta) * hs)
                        ys.append(y_mid)
                        raise
            times.append(t)
            ys.append(y_new.copy())
            _guard(sys, y_new, cfg.singularity_guard)
        except SingularityApproached as exc:
            exc.trajectory = finish()
            raise

    t = t0
    if cfg.method in ("gauss4", "rk4"):
        stepper = _gauss_step if cfg.method == "gauss4" else _rk4_step
        span = abs(t1 - t0)
        nsteps = max(1, int(math.ceil(span / cfg.step - 1e-9)))
        h = direction * span / nsteps
        f = sys(y)
        for i in range(nsteps):
            y_new = stepper(sys, y, h)
            f_new = sys(y_new)
            accepted += 1
            accept(t0 + (i + 1) * h, y_new, y, f, f_new, h)
            y, f = y_new, f_new
        return finish()

    f = sys(y)
    h = cfg.first_step or _initial_step(sys, y, f, direction, cfg)
    err_prev = 1e-4
    while direction * (t1 - t) > 0:
        if accepted + rejected >= cfg.max_steps:
            raise StepSizeUnderflow(f"maximum number of steps ({cfg.max_steps}) exceeded")
        h = min(h, cfg.max_step, abs(t1 - t))
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size {h:.3e} underflow at t={t:.6g}")
        hs = direction * h
        k = [f]
        for i in range(1, 7):
            k.append(sys(y + hs * sum(a * kj for a, kj in zip(_DP_A[i], k))))
        y_new = y + hs * sum(b * kj for b, kj in zip(_DP_B, k) if b)
        err_vec = hs * sum(e * kj for e, kj in zip(_DP_E, k) if e)
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / sc)
        if err <= 1.0:
            t = t1 if h == abs(t1 - t) else t + hs
            accepted += 1
            accept(t, y_new, y, f, k[6], hs)
            y, f = y_new, k[6]
            # PI step-size controller
            fac = 0.9 * err ** -0.17 * err_prev ** 0.04 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    return finish()


# --------------------------------------------------------------------------
# closed-form geodesics


def exponential_geodesic(phi0, omega_hat0, t: float) -> np.ndarray:
    """``phi0 @ exp(t * omega_hat0)``: geodesics of the doubly-affine metric."""
    return np.asarray(phi0, dtype=float) @ expm(t * np.asarray(omega_hat0, dtype=float))


def exponential_trajectory(phi0, omega_hat0, times, model: Optional[KineticModel] = None,
                           potential: Optional[Potential] = None) -> Trajectory:
    """Sample the exponential geodesic analytically (centre of mass at rest)."""
    times = np.asarray(times, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    omega_hat0 = np.asarray(omega_hat0, dtype=float)
    n = phi0.shape[0]
    phis = np.array([exponential_geodesic(phi0, omega_hat0, t) for t in times])
    traj = Trajectory(times=times, x=np.zeros((len(times), n)), v=np.zeros((len(times), n)),
                      phi=phis, phidot=phis @ omega_hat0)
    return annotate(traj, model, potential)


# --------------------------------------------------------------------------
# diagnostics


def _relative_drift(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        return math.nan
    ref = max(abs(values[0]), np.finfo(float).tiny)
    return float(np.max(np.abs(values - values[0])) / ref)


@dataclass(frozen=True)
class ConservationReport:
    """Maximum relative drifts along a trajectory (``nan`` when not applicable).

    ``shear_casimir_drift`` tracks ``C(2) - (sum p)^2 / n``, the part of the
    Casimir that survives a dilatation-only potential.
    """

    energy_drift: float
    casimir_drift: float = math.nan
    shear_casimir_drift: float = math.nan
    spectrum_drift: float = math.nan
    det_drift: float = math.nan

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def conservation_report(trajectory: Trajectory, model: KineticModel,
                        potential: Optional[Potential] = None,
                        volume_preserving: bool = False) -> ConservationReport:
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    if trajectory.energy is None:
        annotate(trajectory, model, potential)
    kw = {"energy_drift": _relative_drift(trajectory.energy)}
    if model.kind is ModelKind.DOUBLY_AFFINE:
        if trajectory.casimir is None:
            annotate(trajectory, model, potential, casimir=True)
        kw["casimir_drift"] = _relative_drift(trajectory.casimir)
        kw["shear_casimir_drift"] = _relative_drift(trajectory.shear_casimir)
        # power traces of omega_hat fix its spectrum
        om = np.linalg.solve(trajectory.phi, trajectory.phidot)
        scale = max(np.linalg.norm(om[0]), np.finfo(float).tiny)
        drift = 0.0
        power = np.broadcast_to(np.eye(trajectory.n), om.shape).copy()
        for k in range(1, trajectory.n + 1):
            power = power @ om
            tr = np.trace(power, axis1=1, axis2=2)
            drift = max(drift, float(np.max(np.abs(tr - tr[0]))) / scale**k)
        kw["spectrum_drift"] = drift
    if volume_preserving:
        kw["det_drift"] = _relative_drift(trajectory.det_phi)
    return ConservationReport(**kw)


def classify_motion(trajectory: Trajectory, horizon: Optional[float] = None,
                    slope_min: float = 1e-3, r2_min: float = 0.99,
                    spread_threshold: Optional[float] = None) -> str:
    """Classify the motion of the deformation invariants.

    Returns ``"scattering"`` when the q-spread grows linearly over the second
    half of the trajectory (fitted slope above ``slope_min`` with R^2 above
    ``r2_min``) and ends above ``spread_threshold`` (default: its maximum over
    the first quarter); ``"bounded"`` when the spread stays below twice that
    initial maximum while dropping back below the midpoint between it and the
    overall minimum at least twice, or when it is constant; otherwise
    ``"undetermined"``.
    """
    t = np.asarray(trajectory.times, dtype=float)
    if trajectory.q_spread is None:
        annotate(trajectory)
    s = np.asarray(trajectory.q_spread, dtype=float)
    duration = abs(t[-1] - t[0]) if len(t) else 0.0
    if len(t) < 8 or (horizon is not None and duration < horizon):
        return "undetermined"
    tau = np.abs(t - t[0])
    early = tau <= 0.25 * duration
    initial_max = float(s[early].max())
    threshold = initial_max if spread_threshold is None else spread_threshold

    late = tau >= 0.5 * duration
    if late.sum() >= 3:
        tl, sl = tau[late], s[late]
        slope, intercept = np.polyfit(tl, sl, 1)
        resid = sl - (slope * tl + intercept)
        ss_tot = float(np.sum((sl - sl.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
        if slope > slope_min and r2 > r2_min and s[-1] > threshold:
            return "scattering"

    span = float(s.max() - s.min())
    if span <= 1e-9 * (1.0 + float(np.abs(s).max())):
        return "bounded"
    if s.max() > 2.0 * initial_max + 1e-12:
        return "undetermined"
    level = s.min() + 0.5 * (initial_max - s.min())
    later = s[~early]
    below = later < level
    crossings = int(np.sum(below[1:] & ~below[:-1]))
    if len(later) and below[0] and not early.all():
        # the first sample after the early window may already sit below the level
        crossings += int(s[early][-1] >= level)
    return "bounded" if crossings >= 2 else "undetermined"
