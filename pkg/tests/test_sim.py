"""Integrator, traces and scenario builders."""

from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from spherebot.dynamics import TorqueCommand
from spherebot.frames import EulerPose, body_frame, orthonormality_defect, rot_ypr, surface_jet
from spherebot.sim import (
    RAMP_POSES,
    TRACE_COLUMNS,
    DomainExitError,
    SimConfig,
    SimTrace,
    propagate_orientation,
    run,
    scenario_circle,
    scenario_ramp,
    step,
)
from spherebot.terrain import CosineTerrain, Plane, Ramp

SLOPE = math.pi / 8


# ---------------------------------------------------------------------------
# propagate_orientation
# ---------------------------------------------------------------------------

def test_zero_rate_leaves_orientation_unchanged():
    r = rot_ypr(EulerPose(0.2, 0.3, 0.4))
    np.testing.assert_array_equal(propagate_orientation(r, [0, 0, 0], 0.1), r)


def test_half_turn_about_z():
    got = propagate_orientation(np.eye(3), [0, 0, math.pi], 1.0)
    np.testing.assert_allclose(got, np.diag([-1.0, -1.0, 1.0]), atol=1e-15)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(1e-4, 0.5))
@settings(max_examples=200)
def test_exponential_step_properties(w, dt):
    r0 = rot_ypr(EulerPose(0.5, -0.3, 1.2))
    full = propagate_orientation(r0, w, dt)
    halves = propagate_orientation(propagate_orientation(r0, w, dt / 2), w, dt / 2)
    assert orthonormality_defect(full) < 1e-12
    # constant-rate half steps compose exactly; the O(dt^3) bound is slack here
    np.testing.assert_allclose(full, halves, atol=1e-12 + dt ** 3)
    np.testing.assert_allclose(full, Rotation.from_rotvec(np.asarray(w) * dt).as_matrix() @ r0,
                               atol=1e-13)


# ---------------------------------------------------------------------------
# step
# ---------------------------------------------------------------------------

def test_flat_rest_is_equilibrium():
    config = SimConfig()
    state = config.initial_state()
    new = step(state, TorqueCommand([0, 0, 0]), config)
    np.testing.assert_allclose(new.p0, state.p0, atol=1e-15)
    np.testing.assert_allclose(new.rates, state.rates, atol=1e-15)
    np.testing.assert_allclose(new.orientation, state.orientation, atol=1e-15)


def test_ramp_free_roll_speed_after_one_second():
    config = SimConfig(terrain=Ramp(SLOPE), t_end=1.0)
    state = config.initial_state()
    for _ in range(config.n_steps):
        state = step(state, TorqueCommand([0, 0, 0]), config)
    expected = 5 / 7 * 9.81 * math.sin(SLOPE)
    assert np.linalg.norm(state.v) == pytest.approx(expected, rel=1e-6)
    # and the ball went down-slope
    assert state.p0[0] < 0 and state.p0[2] < 0


def test_constant_roll_on_flat_ground():
    config = SimConfig(initial_rates=(1.0, 0.0, 0.0), t_end=1.0)
    trace = run(config)
    final = trace.final_state
    h = body_frame(surface_jet(Plane(), 0, 0), 0.0).h_hat
    np.testing.assert_allclose(final.p0, h * 1.0, atol=1e-9)
    # the body turned one radian about l = +y
    np.testing.assert_allclose(final.orientation, Rotation.from_rotvec([0, 1.0, 0]).as_matrix(),
                               atol=1e-12)


def test_step_reports_domain_exit_with_last_state():
    config = SimConfig(terrain=Plane(bounds=(-1, 1, -1, 1)), initial_xy=(0.999, 0.0),
                       initial_rates=(2.0, 0.0, 0.0))
    state = config.initial_state()
    with pytest.raises(DomainExitError) as info:
        step(state, TorqueCommand([0, 0, 0]), config)
    assert info.value.state is state


# ---------------------------------------------------------------------------
# SimConfig
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs,match", [
    ({"dt": 0.0}, "sim.dt"),
    ({"dt": 0.1, "t_end": 0.05}, "sim.t_end"),
    ({"t_look": -1.0}, "sim.t_look"),
    ({"control_every": 0}, "sim.control_every"),
    ({"model_kind": "4rsr"}, "sim.model"),
    ({"feedforward": "other"}, "sim.feedforward"),
    ({"terrain": Plane(bounds=(0, 1, 0, 1)), "initial_xy": (2.0, 0.0)}, "initial"),
    ({"model_kind": "2rsr", "initial_rates": (0, 0, 1.0)}, "initial.rates"),
    ({"model_kind": "rtsr", "initial_rates": (0, 1.0, 0)}, "initial.rates"),
])
def test_config_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        SimConfig(**kwargs)


@pytest.mark.parametrize("t_end,dt,n", [(1.0, 1e-3, 1000), (0.3, 0.1, 3), (0.35, 0.1, 3),
                                        (60.0, 1e-3, 60000)])
def test_step_count(t_end, dt, n):
    assert SimConfig(t_end=t_end, dt=dt).n_steps == n


# ---------------------------------------------------------------------------
# run / SimTrace
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def curved_trace():
    config = SimConfig(terrain=CosineTerrain(0.5, 8.0), initial_xy=(1.0, 0.5),
                       initial_rates=(1.5, -0.7, 0.4), t_end=3.0,
                       initial_pose=EulerPose(0.3, 0.2, 0.1))
    return config, run(config)


def test_trace_shape_and_time_axis(curved_trace):
    config, trace = curved_trace
    arr = trace.array()
    assert arr.shape == (config.n_steps + 1, len(TRACE_COLUMNS))
    assert np.all(np.diff(arr[:, 0]) > 0)
    assert arr[-1, 0] == pytest.approx(config.t_end)
    assert trace.world_torques().shape == (len(arr), 3)


def test_trace_constraint_and_orthonormality(curved_trace):
    _, trace = curved_trace
    assert trace.error is None
    assert trace.max_surface_defect < 1e-6
    assert trace.max_ortho_defect < 1e-8
    arr = trace.array()
    z_ref = np.array([CosineTerrain(0.5, 8.0).height(x, y) for x, y in arr[:, 1:3]])
    assert np.abs(arr[:, 3] - z_ref).max() < 1e-6


def test_free_roll_energy_on_curved_terrain(curved_trace):
    config, trace = curved_trace
    e = trace.column("energy")
    scale = max(abs(e[0]), config.params.mass * config.params.gravity * config.params.radius)
    assert np.abs(e - e[0]).max() / scale < 1e-2


def test_open_loop_trace_has_no_tracking_error(curved_trace):
    _, trace = curved_trace
    assert np.all(np.isnan(trace.column("e_norm")))
    assert np.all(trace.column("zeta_dev") == 0.0)


def test_determinism():
    config = scenario_circle(t_end=2.0)
    a, b = run(config).array(), run(config).array()
    assert np.array_equal(a, b)


def test_csv_round_trip_is_bit_exact(tmp_path, curved_trace):
    _, trace = curved_trace
    path = tmp_path / "trace.csv"
    trace.write_csv(str(path))
    back = SimTrace.read_csv(str(path))
    np.testing.assert_array_equal(back, trace.array())
    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == TRACE_COLUMNS


def test_csv_to_stream():
    trace = run(SimConfig(t_end=0.002))
    buf = io.StringIO()
    trace.write_csv(buf)
    assert buf.getvalue().count("\n") == 4


def test_read_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        SimTrace.read_csv(str(path))


def test_domain_exit_returns_partial_trace():
    config = SimConfig(terrain=Plane(bounds=(-1, 1, -1, 1)), torque=(0.0, 5.0, 0.0), t_end=5.0)
    trace = run(config)
    assert trace.error is not None and "domain" in trace.error
    assert 1 < len(trace.rows) < config.n_steps + 1
    assert abs(trace.final_state.p0[0]) <= 1.0


def test_torque_schedule_and_constant_torque_agree():
    c1 = SimConfig(torque=(0.0, 0.3, 0.1), t_end=0.5)
    c2 = SimConfig(torque_schedule=lambda t: TorqueCommand([0.0, 0.3, 0.1]), t_end=0.5)
    np.testing.assert_array_equal(run(c1).array(), run(c2).array())


def test_control_hold_interval():
    base = scenario_ramp(t_end=0.5)
    held = scenario_ramp(t_end=0.5, control_every=10)
    tau = run(held).array()[:, 11:14]
    assert np.array_equal(tau[1], tau[0]) and np.array_equal(tau[9], tau[0])
    assert not np.array_equal(run(base).array()[:, 11:14], tau)


def test_2rsr_never_turns_and_rtsr_never_tilts():
    for kind, col in (("2rsr", "psi_dot"), ("rtsr", "phi_dot")):
        trace = run(scenario_ramp(model_kind=kind, t_end=2.0))
        assert trace.error is None
        assert np.all(trace.column(col) == 0.0)


def test_rtsr_velocity_stays_along_heading():
    config = scenario_circle(model_kind="rtsr", t_end=3.0)
    trace = run(config)
    s = trace.final_state
    b = body_frame(surface_jet(config.terrain, s.p0[0], s.p0[1]), s.psi)
    assert abs(s.v @ b.l_hat) < 1e-9


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def test_ramp_scenario_definition():
    config = scenario_ramp(EulerPose())
    assert isinstance(config.terrain, Ramp) and config.terrain.slope == SLOPE
    assert config.params.radius == 1.0 and config.params.mass == 0.5
    assert config.model_kind == "3rsr"
    # the reference climbs
    path = config.reference()
    assert path.point(10.0)[2] > path.point(0.0)[2]


def test_circle_scenario_definition():
    config = scenario_circle()
    assert isinstance(config.terrain, CosineTerrain)
    assert (config.terrain.amplitude, config.terrain.period) == (0.5, 8.0)
    path = config.reference()
    np.testing.assert_allclose(path.point(0.0)[:2], [5.0, 6.0], atol=1e-15)
    np.testing.assert_allclose(path.point(10.0), path.point(0.0), atol=1e-12)
    assert np.linalg.norm(path.point(5.0) - path.point(0.0)) > 1.0
    assert config.initial_xy == (5.0, 6.0)


def test_ramp_climb_is_monotone_from_rest():
    trace = run(scenario_ramp(RAMP_POSES[0], t_end=5.0))
    z = trace.column("z")
    assert trace.error is None
    assert np.all(np.diff(z) >= -1e-12)
    assert z[-1] > 1.0


def test_ramp_poses_share_world_torque_but_not_body_torque():
    traces = [run(scenario_ramp(p, t_end=3.0)) for p in RAMP_POSES]
    world = [t.world_torques() for t in traces]
    body = [t.array()[:, 11:14] for t in traces]
    for k in (1, 2):
        assert np.abs(world[k] - world[0]).max() < 1e-6
        assert np.abs(body[k] - body[0]).max() > 0.1
        np.testing.assert_allclose(traces[k].array()[:, 1:4], traces[0].array()[:, 1:4], atol=1e-9)
