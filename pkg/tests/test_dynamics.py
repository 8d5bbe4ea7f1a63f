import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geonl.dynamics import (
    IntegratorConfig,
    Trajectory,
    classify_motion,
    conservation_report,
    derive_accelerations,
    exponential_geodesic,
    exponential_trajectory,
    integrate,
)
from geonl.energetics import (
    DilatationHarmonic,
    IsotropicPolynomial,
    ModelKind,
    ZeroPotential,
    kinetic_energy,
)
from geonl.errors import SingularityApproached
from geonl.kinematics import KinematicState
from geonl.lattice import state_from_bipolar
from models import ALL_KINDS, doubly_affine, generic_state, make_model
from oracles import random_phi, rotation2

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def bounded_generator(S, w=1.0):
    """Generator conjugate to a rotation: its exponential stays bounded."""
    return S @ (w * ROT) @ np.linalg.inv(S)


def split(acc, n):
    nc = n + n * n
    return acc[:n], acc[n:nc].reshape(n, n)


# --------------------------------------------------------------------------
# accelerations


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("B", [0.0, 0.4, -0.2])
def test_doubly_affine_acceleration_matches_exponential(n, B):
    rng = np.random.default_rng(10 * n)
    model = doubly_affine(1.0, B, n)
    phi0, om = random_phi(rng, n), 0.5 * rng.standard_normal((n, n))
    state = KinematicState.internal(phi0, phi0 @ om)
    for method in ("analytic", "fd"):
        _, phidd = split(derive_accelerations(model, ZeroPotential(), state, method=method), n)
        # second derivative of phi0 exp(t om) at t = 0
        tol = 1e-12 if method == "analytic" else 1e-7
        assert np.linalg.norm(phidd - phi0 @ om @ om) <= tol * np.linalg.norm(phi0 @ om @ om)


def test_dalembert_free_motion_has_zero_acceleration():
    rng = np.random.default_rng(1)
    model = make_model("DAlembert", 3)
    state = generic_state(rng, 3)
    acc = derive_accelerations(model, ZeroPotential(), state)
    np.testing.assert_allclose(acc, 0.0, atol=1e-15)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_equilibrium_is_stationary(kind):
    model = make_model(kind, 2)
    state = KinematicState.internal(np.eye(2), np.zeros((2, 2)))
    for method in ("analytic", "fd"):
        acc = derive_accelerations(model, DilatationHarmonic(2.0), state, method=method)
        np.testing.assert_allclose(acc, 0.0, atol=1e-9)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [2, 3])
def test_analytic_and_metric_routes_agree(kind, n):
    rng = np.random.default_rng(hash((kind, n)) % 2**32)
    model = make_model(kind, n, seed=n)
    pot = IsotropicPolynomial({(2,): 0.7, (1, 1): 0.2, (3,): 0.05})
    for _ in range(3):
        state = generic_state(rng, n, rate=0.5)
        a = derive_accelerations(model, pot, state, method="analytic")
        b = derive_accelerations(model, pot, state, method="fd")
        assert np.linalg.norm(a - b) <= 1e-7 * (1.0 + np.linalg.norm(a))


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        derive_accelerations(doubly_affine(), None, KinematicState.internal(np.eye(2), ROT), "euler")


# --------------------------------------------------------------------------
# exponential geodesics


def test_exponential_geodesic_trivial_cases():
    rng = np.random.default_rng(2)
    phi0 = random_phi(rng, 3)
    np.testing.assert_array_equal(exponential_geodesic(phi0, np.zeros((3, 3)), 2.5), phi0)
    np.testing.assert_allclose(exponential_geodesic(np.eye(2), np.diag([1.0, -1.0]), 1.0),
                               np.diag([math.e, 1 / math.e]), rtol=1e-15)
    np.testing.assert_allclose(exponential_geodesic(np.eye(2), ROT, 0.8), rotation2(-0.8), atol=1e-15)


def test_exponential_geodesic_initial_velocity():
    rng = np.random.default_rng(3)
    phi0, om = random_phi(rng, 3), rng.standard_normal((3, 3))
    h = 1e-6
    d = (exponential_geodesic(phi0, om, h) - exponential_geodesic(phi0, om, -h)) / (2 * h)
    assert np.linalg.norm(d - phi0 @ om) <= 1e-7 * np.linalg.norm(phi0 @ om)


# --------------------------------------------------------------------------
# integration


def test_rotation_generator_reaches_matrix_exponential():
    model = doubly_affine(1.0, 0.0, 2)
    traj = integrate(model, ZeroPotential(), KinematicState.internal(np.eye(2), ROT), (0.0, 1.0))
    expected = rotation2(-1.0)
    assert np.linalg.norm(traj.phi[-1] - expected) <= 1e-8 * np.linalg.norm(expected)
    assert traj.times[-1] == 1.0
    assert np.all(np.diff(traj.times) > 0)


def test_dalembert_free_motion_is_straight():
    rng = np.random.default_rng(4)
    model = make_model("DAlembert", 3)
    s0 = generic_state(rng, 3)
    traj = integrate(model, None, s0, (0.0, 3.0))
    for t, x, phi in zip(traj.times, traj.x, traj.phi):
        np.testing.assert_allclose(x, s0.x + t * s0.v, atol=1e-12)
        np.testing.assert_allclose(phi, s0.phi + t * s0.phidot, atol=1e-12)


@settings(max_examples=20)
@given(B=st.floats(-0.4, 2.0),
       om=arrays(float, (2, 2), elements=st.floats(-0.8, 0.8)),
       seed=st.integers(0, 2**16))
def test_oracle_equivalence_property(B, om, seed):
    phi0 = random_phi(np.random.default_rng(seed), 2)
    model = doubly_affine(1.0, B, 2)
    traj = integrate(model, None, KinematicState.internal(phi0, phi0 @ om), (0.0, 1.0),
                     diagnostics=False)
    exact = exponential_geodesic(phi0, om, 1.0)
    assert np.linalg.norm(traj.phi[-1] - exact) <= 1e-8 * np.linalg.norm(exact)


def test_translational_momentum_conserved_under_cauchy_coupling():
    # x is cyclic, so m C(phi) v is constant even though v and phi interact
    rng = np.random.default_rng(5)
    phi0, om = np.eye(3) + 0.2 * rng.standard_normal((3, 3)), 0.3 * rng.standard_normal((3, 3))
    state = KinematicState(np.zeros(3), 0.5 * rng.standard_normal(3), phi0, phi0 @ om)
    model = doubly_affine(1.0, 0.2, 3)
    traj = integrate(model, DilatationHarmonic(1.0), state, (0.0, 2.0))
    momenta = []
    for phi, v in zip(traj.phi, traj.v):
        pinv = np.linalg.inv(phi)
        momenta.append(model.params.m * pinv.T @ pinv @ v)
    momenta = np.array(momenta)
    assert np.max(np.abs(momenta - momenta[0])) <= 1e-8 * np.linalg.norm(momenta[0])
    # the internal motion is no longer the free exponential
    exact = exponential_geodesic(phi0, om, 2.0)
    assert np.linalg.norm(traj.phi[-1] - exact) > 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("kind", ALL_KINDS)
def test_energy_conserved_over_ten_thousand_steps(kind):
    model = make_model(kind, 2)
    pot = DilatationHarmonic(1.0)
    s0 = generic_state(np.random.default_rng(1), 2)
    traj = integrate(model, pot, s0, (0.0, 10.0), IntegratorConfig(max_step=1e-3))
    assert traj.steps_accepted >= 10_000
    assert conservation_report(traj, model, pot).energy_drift < 1e-8


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_time_reversal(kind):
    model = make_model(kind, 2)
    pot = DilatationHarmonic(1.0)
    s0 = generic_state(np.random.default_rng(6), 2)
    fwd = integrate(model, pot, s0, (0.0, 2.0), diagnostics=False)
    back = integrate(model, pot, fwd.final, (2.0, 0.0), diagnostics=False)
    assert np.all(np.diff(back.times) < 0)
    y0 = np.concatenate([s0.coordinates(), s0.velocities()])
    y1 = np.concatenate([back.final.coordinates(), back.final.velocities()])
    assert np.linalg.norm(y1 - y0) <= 1e-6 * np.linalg.norm(y0)


def _fixed_step_errors(method, steps):
    phi0 = np.array([[1.2, 0.3], [-0.2, 0.9]])
    om = np.array([[0.3, 1.1], [-0.7, -0.2]])
    exact = exponential_geodesic(phi0, om, 1.0)
    model = doubly_affine(1.0, 0.3, 2)
    errs = []
    for h in steps:
        cfg = IntegratorConfig(method=method, step=h)
        traj = integrate(model, None, KinematicState.internal(phi0, phi0 @ om), (0.0, 1.0), cfg,
                         diagnostics=False)
        errs.append(np.linalg.norm(traj.phi[-1] - exact))
    return np.array(errs)


@pytest.mark.parametrize("method", ["rk4", "gauss4"])
def test_fourth_order_convergence(method):
    steps = np.array([0.2, 0.1, 0.05, 0.025])
    errs = _fixed_step_errors(method, steps)
    order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert abs(order - 4.0) <= 0.3


def test_energy_drift_grows_with_step():
    model = make_model("AffMetr", 2)
    pot = DilatationHarmonic(1.0)
    s0 = generic_state(np.random.default_rng(7), 2, rate=0.6)
    drifts = []
    for h in (0.025, 0.05, 0.1, 0.2, 0.4):
        traj = integrate(model, pot, s0, (0.0, 8.0), IntegratorConfig(method="rk4", step=h))
        drifts.append(conservation_report(traj, model, pot).energy_drift)
    assert np.all(np.diff(drifts) > 0), drifts


def test_symmetric_integrator_conserves_energy_without_secular_drift():
    model = doubly_affine(1.0, 0.0, 2)
    pot = DilatationHarmonic(1.0)
    phi0 = np.diag([1.3, 0.8])
    om = bounded_generator(np.array([[1.0, 0.3], [0.1, 1.0]])) + 0.2 * np.eye(2)
    traj = integrate(model, pot, KinematicState.internal(phi0, phi0 @ om), (0.0, 40.0),
                     IntegratorConfig(method="gauss4", step=0.05))
    e = traj.energy
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-7


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="leapfrog")
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk4")
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=-1.0)


def test_singularity_guard_stops_integration():
    # two invariants driven through each other while the gyroscopes turn
    state = state_from_bipolar(np.eye(2), [0.3, 0.0], np.eye(2), [-0.3, 0.0],
                               0.02 * ROT, np.zeros((2, 2)))
    model = make_model("DAlembert", 2)
    with pytest.raises(SingularityApproached) as info:
        integrate(model, None, state, (0.0, 2.0), IntegratorConfig(singularity_guard=0.1))
    traj = info.value.trajectory
    assert traj is not None and 0.0 < traj.times[-1] < 2.0
    assert traj.q_spread[-1] < 0.1


def test_guard_sees_inside_long_steps():
    # free motion is a straight line, so a tight tolerance still takes a few
    # long steps; the near-coincidence falls strictly inside one of them
    state = state_from_bipolar(np.eye(2), [0.3, 0.0], np.eye(2), [-0.3, 0.0],
                               0.02 * ROT, np.zeros((2, 2)))
    cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, singularity_guard=0.1)
    with pytest.raises(SingularityApproached) as info:
        integrate(make_model("DAlembert", 2), None, state, (0.0, 2.0), cfg)
    traj = info.value.trajectory
    assert traj.steps_accepted < 10
    assert traj.q_spread[-1] < 0.1


def test_guard_ignores_coincidence_without_rotation():
    # pure stretching through an isotropic point is harmless
    state = state_from_bipolar(np.eye(2), [0.3, 0.0], np.eye(2), [-0.3, 0.0],
                               np.zeros((2, 2)), np.zeros((2, 2)))
    traj = integrate(make_model("DoublyAffine", 2), None, state, (0.0, 2.0),
                     IntegratorConfig(singularity_guard=0.1))
    assert traj.times[-1] == 2.0


# --------------------------------------------------------------------------
# conservation report


def test_analytic_exponential_trajectory_has_no_drift():
    model = doubly_affine(1.0, 0.0, 3)
    rng = np.random.default_rng(8)
    phi0 = random_phi(rng, 3)
    om = 0.4 * rng.standard_normal((3, 3))
    traj = exponential_trajectory(phi0, om, np.linspace(0.0, 2.0, 41), model)
    rep = conservation_report(traj, model)
    for name, val in rep.as_dict().items():
        if name != "det_drift":
            assert val < 1e-12, (name, val)
    assert math.isnan(rep.det_drift)


def test_volume_preserving_flag_reports_determinant():
    model = doubly_affine(1.0, 0.0, 2)
    om = bounded_generator(np.array([[1.0, 0.5], [0.0, 1.0]]))
    traj = exponential_trajectory(np.eye(2), om, np.linspace(0.0, 5.0, 51), model)
    rep = conservation_report(traj, model, volume_preserving=True)
    assert rep.det_drift < 1e-12


def test_integrated_doubly_affine_conserves_energy_and_casimir():
    model = doubly_affine(1.0, 0.0, 2)
    phi0 = np.array([[1.3, 0.2], [-0.1, 0.8]])
    om = bounded_generator(np.array([[1.0, 0.4], [0.2, 1.1]]))
    traj = integrate(model, None, KinematicState.internal(phi0, phi0 @ om), (0.0, 20.0))
    rep = conservation_report(traj, model)
    assert rep.energy_drift < 1e-8
    assert rep.casimir_drift < 1e-8
    assert rep.spectrum_drift < 1e-8


def test_shear_casimir_survives_dilatation_potential():
    model = doubly_affine(1.0, 0.0, 2)
    pot = DilatationHarmonic(1.0)
    phi0 = np.array([[1.3, 0.2], [-0.1, 0.8]])
    om = bounded_generator(np.array([[1.0, 0.4], [0.2, 1.1]])) + 0.3 * np.eye(2)
    traj = integrate(model, pot, KinematicState.internal(phi0, phi0 @ om), (0.0, 20.0))
    rep = conservation_report(traj, model, pot)
    assert rep.energy_drift < 1e-8
    assert rep.shear_casimir_drift < 1e-8


def test_empty_trajectory_rejected():
    empty = np.zeros((0, 2))
    traj = Trajectory(np.zeros(0), empty, empty, np.zeros((0, 2, 2)), np.zeros((0, 2, 2)))
    with pytest.raises(ValueError):
        conservation_report(traj, doubly_affine())


# --------------------------------------------------------------------------
# classification


def test_diagonal_free_motion_scatters():
    model = doubly_affine(1.0, 0.0, 2)
    traj = exponential_trajectory(np.eye(2), np.diag([0.2, -0.1]), np.linspace(0, 20, 200), model)
    np.testing.assert_allclose(traj.q_spread, 0.3 * traj.times, atol=1e-12)
    assert classify_motion(traj) == "scattering"


def test_dilatation_oscillation_is_bounded():
    model = make_model("DoublyAffine", 2)
    pot = DilatationHarmonic(1.0)
    phi0 = np.diag([1.2, 0.9])
    traj = integrate(model, pot, KinematicState.internal(phi0, 0.4 * phi0), (0.0, 30.0))
    assert classify_motion(traj) == "bounded"


def test_spin_attraction_is_bounded():
    model = doubly_affine(1.0, 0.0, 2)
    state = state_from_bipolar(np.eye(2), [0.6, -0.2], np.eye(2), [0.15, 0.05],
                               0.4 * ROT, np.zeros((2, 2)))
    traj = integrate(model, None, state, (0.0, 60.0))
    assert classify_motion(traj, horizon=60.0) == "bounded"


def test_short_trajectory_is_undetermined():
    model = doubly_affine(1.0, 0.0, 2)
    traj = exponential_trajectory(np.eye(2), np.diag([0.2, -0.1]), np.linspace(0, 2, 50), model)
    assert classify_motion(traj, horizon=10.0) == "undetermined"
    assert classify_motion(exponential_trajectory(np.eye(2), ROT, [0.0, 1.0], model)) == "undetermined"


def test_diagnostics_follow_the_model():
    rng = np.random.default_rng(9)
    model = make_model("RightAffine", 2)
    pot = DilatationHarmonic(0.5)
    traj = integrate(model, pot, generic_state(rng, 2), (0.0, 1.0))
    i = len(traj) // 2
    s = traj.state(i)
    q = np.log(np.linalg.svd(s.phi, compute_uv=False))
    assert traj.energy[i] == pytest.approx(kinetic_energy(model, s) + pot(q), rel=1e-14)
    assert traj.casimir is None
    np.testing.assert_allclose(traj.det_phi[i], np.linalg.det(s.phi))
    assert model.kind is ModelKind.RIGHT_AFFINE
