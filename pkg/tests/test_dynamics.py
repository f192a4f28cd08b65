import json

import numpy as np
import pytest

from blochpair.coherence import embed_factorized, to_coherence
from blochpair.dynamics import (
    BoundaryStateError,
    ControlLaw,
    PhysicalityError,
    integrate,
    purification_scan,
    purity_rate_b,
    random_control_laws,
    write_trajectory_csv,
    write_trajectory_json,
)
from blochpair.model import TwoQubitModel
from blochpair.protection import Coupling, make_model
from blochpair.quantum import SIGMA_MINUS
from conftest import random_density_matrix, random_model

MIXED16 = np.concatenate([[0.5], np.zeros(15)])


def closed_model(omega_a=0.4, omega_b=1.0, lam_scale=0.0, rng=None):
    lam = np.zeros((3, 3))
    if lam_scale and rng is not None:
        lam = rng.uniform(-lam_scale, lam_scale, (3, 3))
    return TwoQubitModel(omega_a, omega_b, lam)


def test_control_law_constructors():
    law = ControlLaw.constant([1.0, 0.0, -1.0], bound=1.0)
    np.testing.assert_array_equal(law(0.7), [1.0, 0.0, -1.0])
    with pytest.raises(ValueError, match="bound"):
        ControlLaw.constant([2.0, 0.0, 0.0], bound=1.0)
    with pytest.raises(ValueError, match="increasing"):
        ControlLaw.piecewise_constant([0.0, 1.0, 0.5], np.zeros((3, 3)))
    pw = ControlLaw.piecewise_constant([0.0, 1.0], [[0, 0, 0], [1, 1, 1]])
    np.testing.assert_array_equal(pw(0.5), [0, 0, 0])
    np.testing.assert_array_equal(pw(1.5), [1, 1, 1])
    sampled = ControlLaw.sampled([0.0, 2.0], [[0, 0, 0], [1, 1, 1]])
    np.testing.assert_allclose(sampled(1.0), [0.5, 0.5, 0.5])


def test_feedback_bound_enforced():
    law = ControlLaw.feedback(lambda t, v: np.array([3.0, 0.0, 0.0]), bound=1.0)
    model = closed_model()
    with pytest.raises(ValueError, match="bound"):
        integrate(model, MIXED16, law, 1.0, 1e-2)


def test_c0_exactly_constant(rng):
    model = random_model(rng)
    traj = integrate(model, MIXED16, ControlLaw.constant(rng.uniform(-1, 1, 3)), 2.0, 1e-3)
    assert np.all(traj.states[:, 0] == 0.5)


def test_closed_system_preserves_norm(rng):
    model = closed_model(lam_scale=1.5, rng=rng)
    v0 = to_coherence(random_density_matrix(rng)).as_array()
    traj = integrate(model, v0, ControlLaw.constant(rng.uniform(-1, 1, 3)), 10.0, 1e-3)
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.max(np.abs(norms - norms[0])) < 1e-9 * 10.0


def test_uncoupled_b_rotates_freely(rng):
    omega_b = 1.3
    model = closed_model(omega_a=0.7, omega_b=omega_b)
    vb0 = np.array([0.5, 0.0, 0.0])
    v0 = embed_factorized([0.1, 0.2, -0.3], vb0).as_array()
    law = ControlLaw.constant([0.8, -0.5, 0.3])
    traj = integrate(model, v0, law, 3.0, 1e-3)
    angle = 2.0 * omega_b * traj.times
    expected = 0.5 * np.stack([np.cos(angle), np.sin(angle), np.zeros_like(angle)], axis=1)
    np.testing.assert_allclose(traj.states[:, 13:16], expected, atol=1e-10)
    # and the rotation is independent of the control
    other = integrate(model, v0, ControlLaw.constant([0, 0, 0]), 3.0, 1e-3)
    np.testing.assert_allclose(other.states[:, 13:16], expected, atol=1e-10)


def test_amplitude_damping_closed_form():
    model = TwoQubitModel(0.0, 0.0, np.zeros((3, 3)), (SIGMA_MINUS,))
    traj = integrate(model, MIXED16, ControlLaw.constant([0, 0, 0]), 3.0, 1e-3)
    va3 = traj.states[:, 3]
    expected = -0.5 * (1.0 - np.exp(-4.0 * traj.times))
    np.testing.assert_allclose(va3, expected, atol=1e-10)
    assert np.all(np.diff(va3) <= 1e-15)  # monotone approach to the pole
    assert va3[-1] == pytest.approx(-0.5, abs=1e-4)


def test_rk4_fourth_order_convergence():
    model = closed_model()
    v0 = embed_factorized([0.3, 0.0, 0.2], [0.5, 0.0, 0.0]).as_array()
    law = ControlLaw.constant([0.2, 0.0, 0.0])
    horizon = 5.0
    omega_b = model.omega_b
    angle = 2.0 * omega_b * horizon
    exact_vb = 0.5 * np.array([np.cos(angle), np.sin(angle), 0.0])

    def terminal_error(h):
        end = integrate(model, v0, law, horizon, h).states[-1]
        return np.linalg.norm(end[13:16] - exact_vb)

    e1, e2 = terminal_error(0.05), terminal_error(0.025)
    ratio = e1 / e2
    assert 16.0 * 0.8 <= ratio <= 16.0 * 1.2


def test_integration_paths_agree(rng):
    model = random_model(rng)
    v0 = to_coherence(random_density_matrix(rng)).as_array()
    u = rng.uniform(-1, 1, 3)
    pw = integrate(model, v0, ControlLaw.constant(u), 1.0, 1e-3)
    fb = integrate(model, v0, ControlLaw.feedback(lambda t, v: u), 1.0, 1e-3)
    np.testing.assert_allclose(pw.states, fb.states, atol=1e-12)


def test_piecewise_segments_snap_to_grid(rng):
    model = closed_model()
    law = ControlLaw.piecewise_constant([0.0, 0.2501], [[1, 0, 0], [0, 1, 0]])
    traj = integrate(model, MIXED16, law, 1.0, 1e-1)
    # breakpoint lands on step index round(0.2501 / 0.1) = 3
    np.testing.assert_array_equal(traj.controls[2], [1, 0, 0])
    np.testing.assert_array_equal(traj.controls[3], [0, 1, 0])


def test_physicality_abort():
    model = closed_model()
    bad = MIXED16.copy()
    bad[1:4] = 0.9  # way outside the Bloch ball
    with pytest.raises(PhysicalityError):
        integrate(model, bad, ControlLaw.constant([0, 0, 0]), 1.0, 1e-2)


def test_physicality_report_attached(rng):
    model = random_model(rng)
    traj = integrate(model, MIXED16, ControlLaw.constant([0, 0, 0]), 1.0, 1e-2)
    report = traj.metadata["physicality"]
    assert report["max_defect"] <= 1e-8
    assert report["within_warn_tol"]


def test_purity_rate_b_matches_finite_difference(rng):
    model = random_model(rng)
    v0 = to_coherence(random_density_matrix(rng)).as_array()
    step = 1e-4
    traj = integrate(model, v0, ControlLaw.constant(rng.uniform(-1, 1, 3)), 0.05, step)
    k = 200
    fd = (traj.purity_b[k + 1] - traj.purity_b[k - 1]) / (2 * step)
    assert purity_rate_b(model, traj.states[k]) == pytest.approx(fd, abs=1e-6)


def test_purity_rate_b_zero_without_correlations(rng):
    model = random_model(rng)
    v = MIXED16.copy()
    v[1:4] = [0.1, 0.0, -0.2]
    v[13:16] = [0.0, 0.3, 0.1]
    assert purity_rate_b(model, v) == 0.0


def test_trajectory_export_formats(tmp_path, rng):
    model = make_model(Coupling("resonant", 0.5), 1.0, 1.0, (0.5 * SIGMA_MINUS,))
    traj = integrate(model, MIXED16, ControlLaw.constant([0.1, 0.2, 0.3]), 0.5, 1e-2)
    csv_path = tmp_path / "traj.csv"
    json_path = tmp_path / "traj.json"
    write_trajectory_csv(traj, csv_path)
    write_trajectory_json(traj, json_path)

    lines = csv_path.read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header[:5] == ["t", "u1", "u2", "u3", "c0"]
    assert header[-3:] == ["purity_full", "purity_A", "purity_B"]
    assert len(header) == 23
    assert len(lines) == len(traj) + 1
    first = dict(zip(header, (float(x) for x in lines[1].split(","))))
    assert first["c0"] == 0.5
    assert first["purity_full"] == pytest.approx(0.25, abs=1e-15)

    doc = json.loads(json_path.read_text())
    assert set(doc["columns"]) == set(header)
    np.testing.assert_allclose(doc["columns"]["purity_B"], traj.purity_b, atol=0)
    assert doc["metadata"]["model_hash"] == model.hash_hex()


def test_trajectory_export_deterministic(tmp_path):
    model = make_model(Coupling("dispersive", 0.7), 0.3, 0.9, (0.4 * SIGMA_MINUS,))
    paths = []
    for name in ("a.csv", "b.csv"):
        traj = integrate(model, MIXED16, ControlLaw.constant([0.1, 0, 0]), 1.0, 1e-2)
        p = tmp_path / name
        write_trajectory_csv(traj, p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_purification_scan_basics(rng):
    model = make_model(Coupling("resonant", 0.4), 1.0, 1.0, (np.sqrt(0.1) * SIGMA_MINUS,))
    laws = [ControlLaw.constant([0, 0, 0], bound=1.0)]
    laws += random_control_laws(rng, 2, 1.0, 5.0)
    report = purification_scan(model, MIXED16, laws, [2.0, 5.0], 1e-2)
    assert report["label"] == "numerical evidence"
    assert report["min_margin"] > 0
    for entry in report["entries"]:
        margins = [p["margin"] for p in entry["per_horizon"]]
        assert all(m > 0 for m in margins)


def test_purification_scan_rejects_boundary(rng):
    model = make_model(Coupling("resonant", 0.4), 1.0, 1.0, (SIGMA_MINUS,))
    pure = embed_factorized([0, 0, 0.5], [0, 0, 0.5]).as_array()
    with pytest.raises(BoundaryStateError):
        purification_scan(model, pure, [ControlLaw.constant([0, 0, 0])], [1.0], 1e-2)
    # singular but not fully pure states are boundary points too
    rank_deficient = embed_factorized([0, 0, 0.5], [0, 0, 0.5]).as_array() * 0.0
    rank_deficient[0] = 0.5
    rank_deficient[3] = 0.5  # vA3 = 1/2 makes rho_A a projector
    with pytest.raises(BoundaryStateError):
        purification_scan(
            model, rank_deficient, [ControlLaw.constant([0, 0, 0])], [1.0], 1e-2
        )


def test_purification_scan_from_near_pure_interior_start(rng):
    # a mixed but almost-pure interior state still cannot reach a pure
    # reduced B state in finite time
    model = make_model(Coupling("resonant", 0.4), 1.0, 1.0, (np.sqrt(0.1) * SIGMA_MINUS,))
    pure = embed_factorized([0.3, 0.0, 0.4], [0.0, 0.3, 0.4]).as_array()
    eps = 6.7e-4  # blend toward I/4 for full purity just below 1 - 1e-3
    start = pure.copy()
    start[1:] *= 1.0 - eps
    full_purity = start @ start
    assert 1 - 2e-3 < full_purity < 1 - 1e-6
    report = purification_scan(
        model, start, [ControlLaw.constant([0.2, 0.1, 0.0])], [5.0], 1e-3
    )
    assert report["min_margin"] > 0


def test_no_dissipation_constant_full_purity(rng):
    model = closed_model(lam_scale=1.0, rng=rng)
    v0 = to_coherence(random_density_matrix(rng)).as_array()
    traj = integrate(model, v0, ControlLaw.constant([0.4, 0.1, -0.2]), 5.0, 1e-3)
    pf = traj.purity_full
    assert np.max(np.abs(pf - pf[0])) < 1e-8
