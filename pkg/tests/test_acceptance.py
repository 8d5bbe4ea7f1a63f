"""Exit criteria for the primary component, one test per criterion.

Each test records a pass/fail line that is printed in the terminal summary
under "acceptance criteria" and then asserts the same condition.
"""

import json
import math
import time

import numpy as np
import pytest

from geonl import cli
from geonl.borninfeld import RadialBIField, field_strength, radial_solution, total_energy
from geonl.dynamics import (
    IntegratorConfig,
    classify_motion,
    conservation_report,
    exponential_geodesic,
    integrate,
)
from geonl.energetics import (
    DilatationHarmonic,
    InertiaParameters,
    KineticModel,
    ModelKind,
    ZeroPotential,
    invariance_residual,
)
from geonl.frames import coordinate_frame, exponential_frame, polynomial_frame, so3_frame
from geonl.kinematics import KinematicState, bipolar
from geonl.lattice import casimir_C2, isotropic_hamiltonian, state_from_bipolar, to_bipolar_canonical
from geonl.tetrad import (
    hilbert_identity_residual,
    killing_construction,
    minkowski,
    teleparallel_curvature,
    torsion,
    weitzenbock_invariants,
)
from models import doubly_affine
from oracles import (
    dalembert_energy,
    doubly_affine_energy,
    killing_loops,
    levi_civita,
    quartic_integral,
    random_gl,
    random_phi,
)

pytestmark = pytest.mark.acceptance

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def bounded_generator(S):
    return S @ ROT @ np.linalg.inv(S)


def test_criterion_01_bipolar_round_trip(record_criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_rec = worst_orth = 0.0
    for n in (2, 3, 4):
        I = np.eye(n)
        for _ in range(1000):
            phi = random_gl(rng, n)
            dec = bipolar(phi)
            worst_rec = max(worst_rec, np.linalg.norm(dec.reconstruct() - phi) / np.linalg.norm(phi))
            worst_orth = max(worst_orth, np.abs(dec.Lfac.T @ dec.Lfac - I).max(),
                             np.abs(dec.Rfac.T @ dec.Rfac - I).max())
    elapsed = time.perf_counter() - start
    passed = worst_rec < 1e-12 and worst_orth < 1e-12 and elapsed < 5.0
    record_criterion(1, "bipolar round trip", passed,
                     f"reconstruction {worst_rec:.1e}, orthogonality {worst_orth:.1e}, {elapsed:.2f} s")
    assert passed


def test_criterion_02_invariance_matrix(record_criterion):
    rng = np.random.default_rng(102)
    n = 3
    sym = rng.standard_normal((n * n, n * n))
    Lt = sym @ sym.T + n * np.eye(n * n)
    sym = rng.standard_normal((n * n, n * n))
    Rt = sym @ sym.T + n * np.eye(n * n)
    models = {
        "LeftAffine": (KineticModel("LeftAffine", InertiaParameters(m=1.3, Ltensor=Lt), n), ("left",)),
        "RightAffine": (KineticModel("RightAffine", InertiaParameters(m=1.3, Rtensor=Rt), n), ("right",)),
        "DoublyAffine": (KineticModel("DoublyAffine", InertiaParameters(A_coeff=0.8, B_coeff=0.3), n),
                         ("left", "right")),
        "AffMetr": (KineticModel("AffMetr", InertiaParameters(I_scalar=1.5, A_coeff=0.2, B_coeff=-0.1), n),
                    ("left",)),
        "MetrAff": (KineticModel("MetrAff", InertiaParameters(I_scalar=1.5, A_coeff=0.2, B_coeff=-0.1), n),
                    ("right",)),
    }
    worst = 0.0
    for model, sides in models.values():
        for side in sides:
            # the Cauchy translational term is a left-side object; right actions act on phi only
            part = "internal" if side == "right" and model.translational == "cauchy" else "total"
            for _ in range(100):
                state = KinematicState(rng.standard_normal(n), rng.standard_normal(n),
                                       random_gl(rng, n), rng.standard_normal((n, n)))
                worst = max(worst, invariance_residual(model, (random_gl(rng, n), side), state, part))
    dal = KineticModel("DAlembert", InertiaParameters(m=1.3, J=np.diag([1.0, 2.0, 3.0])), n)
    shear = np.eye(n)
    shear[0, 1] = 1.0
    state = KinematicState(rng.standard_normal(n), rng.standard_normal(n), random_gl(rng, n),
                           rng.standard_normal((n, n)))
    counter = invariance_residual(dal, (shear, "left"), state)
    passed = worst < 1e-10 and counter > 1e-3
    record_criterion(2, "affine invariance matrix", passed,
                     f"worst residual {worst:.1e}, DAlembert shear residual {counter:.2f}")
    assert passed


def test_criterion_03_exponential_geodesics(record_criterion):
    rng = np.random.default_rng(103)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    start = time.perf_counter()
    worst = 0.0
    for i in range(20):
        n = 2 + i % 3
        model = doubly_affine(1.0, float(rng.uniform(-0.3, 1.0)), n)
        phi0, om = random_phi(rng, n), 0.5 * rng.standard_normal((n, n))
        traj = integrate(model, None, KinematicState.internal(phi0, phi0 @ om), (0.0, 1.0), cfg,
                         diagnostics=False)
        ref = exponential_geodesic(phi0, om, 1.0)
        worst = max(worst, np.linalg.norm(traj.phi[-1] - ref) / np.linalg.norm(ref))
    elapsed = time.perf_counter() - start
    passed = worst < 1e-8 and elapsed < 30.0
    record_criterion(3, "exponential geodesic oracle", passed,
                     f"worst relative error {worst:.1e}, {elapsed:.1f} s")
    assert passed


@pytest.mark.slow
def test_criterion_04_conservation(record_criterion):
    model = doubly_affine(1.0, 0.0, 2)
    phi0 = np.array([[1.3, 0.2], [-0.1, 0.8]])
    om = bounded_generator(np.array([[1.0, 0.4], [0.2, 1.1]]))
    cases = {
        "free": (ZeroPotential(), om, 300.0),
        "dilatation": (DilatationHarmonic(1.0), om + 0.3 * np.eye(2), 210.0),
    }
    cfg = IntegratorConfig(max_steps=10**6)
    details, passed = [], True
    for label, (pot, gen, t_end) in cases.items():
        traj = integrate(model, pot, KinematicState.internal(phi0, phi0 @ gen), (0.0, t_end), cfg)
        rep = conservation_report(traj, model, pot)
        ok = traj.steps_accepted >= 10**4 and rep.energy_drift < 1e-8 and rep.casimir_drift < 1e-8
        passed &= ok
        details.append(f"{label}: {traj.steps_accepted} steps, energy {rep.energy_drift:.1e}, "
                       f"C2 {rep.casimir_drift:.1e}, shear part {rep.shear_casimir_drift:.1e}")
    record_criterion(4, "energy and Casimir conservation", passed, "; ".join(details))
    assert passed, details


def test_criterion_05_casimir_legendre_identity(record_criterion):
    rng = np.random.default_rng(105)
    worst = 0.0
    for i in range(100):
        n = 2 + i % 3
        alpha = float(rng.uniform(0.3, 3.0))
        model = doubly_affine(alpha, 0.0, n)
        phi = random_phi(rng, n)
        state = KinematicState.internal(phi, rng.standard_normal((n, n)))
        T = doubly_affine_energy(state.phi, state.phidot, alpha, 0.0)
        c2 = casimir_C2(to_bipolar_canonical(model, state))
        worst = max(worst, abs(c2 - 2 * alpha * T) / abs(2 * alpha * T))
    passed = worst < 1e-8
    record_criterion(5, "doubly-affine Legendre identity", passed, f"worst relative error {worst:.1e}")
    assert passed


def test_criterion_06_isotropic_legendre_identity(record_criterion):
    rng = np.random.default_rng(106)
    worst = 0.0
    for i in range(100):
        n = 2 + i % 3
        I = float(rng.uniform(0.3, 3.0))
        model = KineticModel(ModelKind.DALEMBERT, InertiaParameters(m=1.0, J=I * np.eye(n)), n)
        phi = random_phi(rng, n)
        state = KinematicState.internal(phi, rng.standard_normal((n, n)))
        T = dalembert_energy(1.0, np.eye(n), I * np.eye(n), np.zeros(n), state.phidot)
        H = isotropic_hamiltonian(to_bipolar_canonical(model, state), I)
        worst = max(worst, abs(H - T) / T)
    passed = worst < 1e-8
    record_criterion(6, "isotropic Legendre identity", passed, f"worst relative error {worst:.1e}")
    assert passed


def test_criterion_07_born_infeld(record_criterion):
    start = time.perf_counter()
    f = RadialBIField(1.0, 1.0)
    checks = {}
    checks["E(0)=b"] = field_strength(f, 0.0) == f.b
    _, phi0 = radial_solution(f, 0.0)
    phi0_scaled = phi0 * f.r0 / f.e_charge
    checks["phi(0)"] = abs(phi0_scaled - 1.854075) < 1e-5 and abs(phi0_scaled - quartic_integral()) < 1e-10
    r = 20 * f.r0
    coulomb = abs(field_strength(f, r) * r**2 / f.e_charge - 1)
    checks["coulomb"] = coulomb < 1e-3
    r_min = 1e-7 * f.r0
    inner = abs(total_energy(f, r_min=r_min) - total_energy(f, r_min=r_min / 2)) / total_energy(f)
    checks["cutoff halving"] = inner < 1e-6
    R = 1e6 * f.r0
    outer = abs(total_energy(f, r_max=R) - total_energy(f, r_max=2 * R)) / total_energy(f, r_max=2 * R)
    checks["r_max doubling"] = outer < 1e-6
    base = total_energy(RadialBIField(1.3, 0.9))
    scale_err = max(abs(total_energy(RadialBIField(lam * 1.3, mu * 0.9)) / base - lam**1.5 * mu**0.5)
                    / (lam**1.5 * mu**0.5)
                    for lam, mu in ((2.0, 1.0), (1.0, 3.0), (0.5, 0.25)))
    checks["scaling"] = scale_err < 1e-10
    elapsed = time.perf_counter() - start
    checks["runtime"] = elapsed < 5.0
    passed = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_criterion(7, "Born-Infeld point charge", passed,
                     f"phi(0) r0/e = {phi0_scaled:.7f}, Coulomb {coulomb:.1e}, halving {inner:.1e}, "
                     f"doubling {outer:.1e}, {elapsed:.2f} s" + (f", failed: {failed}" if failed else ""))
    assert passed, failed


def test_criterion_08_tetrad(record_criterion):
    rng = np.random.default_rng(108)
    checks = {}
    coord = coordinate_frame(4)
    x = rng.standard_normal(4)
    w = weitzenbock_invariants(coord, x)
    checks["coordinate frame"] = (np.all(torsion(coord, x).S == 0)
                                  and (w.J1, w.J2, w.J3, w.Lprime) == (0.0, 0.0, 0.0, 0.0))
    two_path = 0.0
    curv = 0.0
    for n in (2, 3, 4):
        for _ in range(5):
            frame = polynomial_frame(n, rng, amplitude=0.25)
            p = 0.2 * rng.standard_normal(n)
            two_path = max(two_path, torsion(frame, p).two_path_residual)
            curv = max(curv, np.abs(teleparallel_curvature(frame, p)).max())
    checks["two-path torsion"] = two_path < 1e-9
    eps = levi_civita(3)
    kc = killing_construction(structure_constants=eps)
    checks["so(3) Killing form"] = (np.allclose(killing_loops(eps), -2 * np.eye(3), atol=1e-15)
                                    and np.allclose(kc.gamma, killing_loops(eps), atol=1e-15))
    res = 0.0
    for frame, p in ((exponential_frame(), np.array([0.3, -0.2])), (so3_frame(), np.array([0.7, 0.2, 0.4]))):
        for eta in (np.eye(frame.n), minkowski(frame.n)):
            res = max(res, abs(hilbert_identity_residual(frame, p, eta)))
            curv = max(curv, np.abs(teleparallel_curvature(frame, p)).max())
    checks["Hilbert identity"] = res < 1e-9
    checks["teleparallel curvature"] = curv < 1e-8
    passed = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_criterion(8, "tetrad suite", passed,
                     f"two-path {two_path:.1e}, identity residual {res:.1e}, curvature {curv:.1e}"
                     + (f", failed: {failed}" if failed else ""))
    assert passed, failed


def test_criterion_09_motion_classifier(record_criterion):
    horizon = 60.0
    model = doubly_affine(1.0, 0.0, 2)
    start = time.perf_counter()
    # equal gyroscope rates: the spin combination N vanishes and M does not
    state = state_from_bipolar(np.eye(2), [0.2, -0.1], np.eye(2), [0.0, 0.0], 0.1 * ROT, 0.1 * ROT)
    bs = to_bipolar_canonical(model, state)
    pure_repulsion = np.abs(bs.N).max() < 1e-12 and np.abs(bs.M).max() > 1e-3
    scatter = classify_motion(integrate(model, None, state, (0.0, horizon)), horizon=horizon)
    phi0 = np.diag([1.2, 0.9])
    osc = integrate(model, DilatationHarmonic(1.0), KinematicState.internal(phi0, 0.4 * phi0), (0.0, horizon))
    bounded = classify_motion(osc, horizon=horizon)
    elapsed = time.perf_counter() - start
    passed = pure_repulsion and scatter == "scattering" and bounded == "bounded" and elapsed < 60.0
    record_criterion(9, "bounded/scattering classifier", passed,
                     f"repulsion -> {scatter}, dilatation -> {bounded}, {elapsed:.1f} s")
    assert passed


def test_criterion_10_cli_determinism(record_criterion, tmp_path):
    scenario = {
        "kind": "affine_sim",
        "seed": 5,
        "affine_sim": {
            "model": {"kind": "DoublyAffine", "n": 3, "A": 1.0, "B": 0.2},
            "potential": {"kind": "DilatationHarmonic", "k": 1.0},
            "initial": {"random": {"scale": 0.2}},
            "tspan": [0, 3],
        },
    }
    path = tmp_path / "det.json"
    path.write_text(json.dumps(scenario), encoding="utf-8")
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        code = cli.main(["simulate", "--scenario", str(path), "--out", str(out), "--seed", "12345"])
        outputs.append((code, (out / "det.csv").read_bytes()))
    passed = outputs[0][0] == outputs[1][0] == 0 and outputs[0][1] == outputs[1][1]
    record_criterion(10, "CLI determinism", passed, f"{len(outputs[0][1])} bytes per run")
    assert passed
