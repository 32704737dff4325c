"""Rotation matrices, surface jets and surface-attached frames."""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from spherebot.frames import (
    EPS_GRAD,
    EulerPose,
    body_frame,
    euler_from_matrix,
    exp_so3,
    jet_from_slopes,
    orthonormality_defect,
    reorthonormalize,
    rot_ypr,
    surface_jet,
    tangent_basis,
    xi_cos_sin,
    xi_transform,
)
from spherebot.terrain import CosineTerrain, Plane, Ramp

angles = st.floats(-math.pi, math.pi, allow_nan=False)
slopes = st.floats(-10.0, 10.0, allow_nan=False)
TAN_PI_8 = math.tan(math.pi / 8)


# ---------------------------------------------------------------------------
# rot_ypr
# ---------------------------------------------------------------------------

def test_rot_ypr_zero_is_identity():
    assert np.array_equal(rot_ypr(EulerPose()), np.eye(3))


def test_rot_ypr_pure_yaw():
    r = rot_ypr(EulerPose(math.pi / 2, 0.0, 0.0))
    np.testing.assert_allclose(r, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_rot_ypr_third_row_first_entry():
    r = rot_ypr(EulerPose(math.pi / 3, math.pi / 3, math.pi / 3))
    assert r[2, 0] == pytest.approx(-math.sin(math.pi / 3), abs=1e-15)
    assert r[2, 0] == pytest.approx(-0.8660254037844386, abs=1e-15)


@given(angles, st.floats(-math.pi / 2, math.pi / 2), angles)
def test_rot_ypr_matches_elementary_composition(a, b, g):
    oracle = Rotation.from_euler("ZYX", [a, b, g]).as_matrix()   # Rz(a) Ry(b) Rx(g)
    np.testing.assert_allclose(rot_ypr(EulerPose(a, b, g)), oracle, atol=1e-14)


def test_rot_ypr_random_orthonormal():
    rng = np.random.default_rng(11)
    for a, b, g in rng.uniform(-math.pi, math.pi, size=(10_000, 3)):
        r = rot_ypr(EulerPose(a, b, g))
        assert orthonormality_defect(r) < 1e-12
        assert abs(np.linalg.det(r) - 1.0) <= 1e-9


@given(angles, st.floats(-1.5, 1.5), angles)
def test_euler_extraction_round_trip(a, b, g):
    pose = euler_from_matrix(rot_ypr(EulerPose(a, b, g)))
    assert -math.pi / 2 <= pose.beta <= math.pi / 2
    assert -math.pi < pose.alpha <= math.pi and -math.pi < pose.gamma <= math.pi
    np.testing.assert_allclose(rot_ypr(pose), rot_ypr(EulerPose(a, b, g)), atol=1e-12)


def test_euler_extraction_gimbal_lock_sets_roll_zero():
    r = rot_ypr(EulerPose(0.7, math.pi / 2, 0.3))
    pose = euler_from_matrix(r)
    assert pose.gamma == 0.0
    assert pose.beta == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(rot_ypr(pose), r, atol=1e-12)


# ---------------------------------------------------------------------------
# surface_jet
# ---------------------------------------------------------------------------

def test_flat_jet():
    jet = surface_jet(Plane(), 3.0, -2.0)
    assert (jet.z, jet.fx, jet.fy, jet.sn) == (0.0, 0.0, 0.0, 1.0)
    assert jet.s is None and jet.is_flat


def test_ramp_jet_against_high_precision():
    mpmath.mp.dps = 40
    t = mpmath.tan(mpmath.pi / 8)
    jet = surface_jet(Ramp(math.pi / 8), 1.0, 0.0)
    assert jet.fx == pytest.approx(float(t), rel=1e-15)
    assert jet.fy == 0.0
    assert jet.sn == pytest.approx(float(1 / mpmath.sqrt(t * t + 1)), rel=1e-15)
    assert jet.s == pytest.approx(float(1 / t), rel=1e-15)
    assert (round(jet.fx, 6), round(jet.sn, 6), round(jet.s, 6)) == (0.414214, 0.92388, 2.414214)


def test_cosine_terrain_crest_at_origin():
    jet = surface_jet(CosineTerrain(0.5, 8.0), 0.0, 0.0)
    assert (jet.z, jet.fx, jet.fy) == (0.0, 0.0, 0.0)


@given(slopes, slopes)
def test_jet_identities(fx, fy):
    jet = jet_from_slopes(fx, fy)
    assert 0.0 < jet.sn <= 1.0
    if fx == 0.0 and fy == 0.0:
        assert jet.sn == 1.0
    elif fx * fx + fy * fy > 1e-15:
        # below ~1e-8 slope, 1 / sqrt(1 + g^2) rounds to exactly 1.0 in doubles
        assert jet.sn < 1.0
    if jet.s is not None:
        g = math.hypot(fx, fy)
        assert jet.s * jet.sn * g * math.sqrt(g * g + 1.0) == pytest.approx(1.0, abs=1e-12)


def test_flat_flag_threshold():
    assert jet_from_slopes(0.5 * EPS_GRAD, 0.0).s is None
    assert jet_from_slopes(2.0 * EPS_GRAD, 0.0).s is not None


# ---------------------------------------------------------------------------
# tangent_basis
# ---------------------------------------------------------------------------

def test_tangent_basis_flat_convention():
    tb = tangent_basis(jet_from_slopes(0.0, 0.0))
    np.testing.assert_array_equal(tb.n_hat, [0, 0, 1])
    np.testing.assert_array_equal(tb.p_hat, [1, 0, 0])
    # Right-handed completion p = e x n forces e = +y at a flat point.
    np.testing.assert_array_equal(tb.e_hat, [0, 1, 0])


def test_tangent_basis_flat_uses_fallback_heading():
    prev = tangent_basis(jet_from_slopes(0.3, -0.4))
    tb = tangent_basis(jet_from_slopes(0.0, 0.0), prev)
    horiz = prev.p_hat[:2] / np.linalg.norm(prev.p_hat[:2])
    np.testing.assert_allclose(tb.p_hat[:2], horiz, atol=1e-15)
    assert tb.p_hat[2] == 0.0


def test_tangent_basis_ramp():
    tb = tangent_basis(jet_from_slopes(TAN_PI_8, 0.0))
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    np.testing.assert_allclose(tb.n_hat, [-s, 0, c], atol=1e-15)
    np.testing.assert_allclose(tb.e_hat, [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(tb.p_hat, [-c, 0, -s], atol=1e-15)
    # cross-product oracle: s [fy, -fx, 0] is the unit vector along z x n
    nz = np.cross([0, 0, 1], tb.n_hat)
    np.testing.assert_allclose(tb.e_hat, nz / np.linalg.norm(nz), atol=1e-15)


@given(slopes, slopes)
def test_tangent_basis_orthonormal_right_handed(fx, fy):
    tb = tangent_basis(jet_from_slopes(fx, fy))
    m = tb.matrix
    assert orthonormality_defect(m) < 1e-12
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.cross(tb.e_hat, tb.n_hat), tb.p_hat, atol=1e-12)
    assert tb.n_hat @ np.array([-fx, -fy, 1.0]) > 0


# ---------------------------------------------------------------------------
# body_frame
# ---------------------------------------------------------------------------

def test_body_frame_flat_zero_turn():
    np.testing.assert_array_equal(body_frame(jet_from_slopes(0, 0), 0.0).a, np.eye(3))


def test_body_frame_flat_quarter_turn():
    b = body_frame(jet_from_slopes(0, 0), math.pi / 2)
    np.testing.assert_allclose(b.h_hat, [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(b.l_hat, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(b.n_hat, [0, 0, 1], atol=1e-15)


def test_body_frame_ramp():
    b = body_frame(jet_from_slopes(TAN_PI_8, 0.0), 0.0)
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    np.testing.assert_allclose(b.h_hat, [c, 0, s], atol=1e-15)
    np.testing.assert_allclose(b.l_hat, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(b.n_hat, [-s, 0, c], atol=1e-15)


def test_body_frame_random_invariants():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        g = 10.0 ** rng.uniform(-6, 1)
        ang = rng.uniform(-math.pi, math.pi)
        jet = jet_from_slopes(g * math.cos(ang), g * math.sin(ang))
        a = body_frame(jet, rng.uniform(-20, 20)).a
        assert orthonormality_defect(a) < 1e-9
        assert abs(np.linalg.det(a) - 1.0) < 1e-9
        assert np.abs(a[:, 2] - tangent_basis(jet).n_hat).max() < 1e-9


@given(slopes, slopes, st.floats(-50, 50))
def test_body_frame_periodic_in_psi(fx, fy, psi):
    jet = jet_from_slopes(fx, fy)
    np.testing.assert_allclose(body_frame(jet, psi).a, body_frame(jet, psi + 2 * math.pi).a,
                               atol=1e-12)


@given(slopes, slopes, angles)
def test_body_frame_is_minimal_tilt_then_turn(fx, fy, psi):
    """Oracle: rotate z onto n about z x n, then apply Rz(-psi) in the tilted frame."""
    jet = jet_from_slopes(fx, fy)
    n = tangent_basis(jet).n_hat
    axis = np.cross([0, 0, 1], n)
    sin_t = np.linalg.norm(axis)
    tilt = np.eye(3) if sin_t == 0 else Rotation.from_rotvec(
        axis / sin_t * math.atan2(sin_t, n[2])).as_matrix()
    oracle = tilt @ Rotation.from_euler("z", -psi).as_matrix()
    np.testing.assert_allclose(body_frame(jet, psi).a, oracle, atol=1e-12)


def test_flat_point_continuity():
    limit = body_frame(jet_from_slopes(0, 0), 0.4).a
    near = body_frame(jet_from_slopes(1e-7, 1e-7), 0.4).a
    assert np.abs(near - limit).max() < 1e-6


# ---------------------------------------------------------------------------
# xi_transform
# ---------------------------------------------------------------------------

def test_xi_ramp_zero_turn():
    cx, sx = xi_cos_sin(jet_from_slopes(TAN_PI_8, 0.0), 0.0)
    assert cx == pytest.approx(-1.0, abs=1e-15) and sx == pytest.approx(0.0, abs=1e-15)
    m = xi_transform(jet_from_slopes(TAN_PI_8, 0.0), 0.0)
    np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(m, [[0, -1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_xi_unit_cross_slope_quarter_turn():
    cx, sx = xi_cos_sin(jet_from_slopes(0.0, 1.0), math.pi / 2)
    assert cx == pytest.approx(1.0, abs=1e-15) and sx == pytest.approx(0.0, abs=1e-15)


@given(slopes, slopes, st.floats(-20, 20))
def test_xi_unit_circle_and_geometry(fx, fy, psi):
    jet = jet_from_slopes(fx, fy)
    cx, sx = xi_cos_sin(jet, psi)
    assert cx * cx + sx * sx == pytest.approx(1.0, abs=1e-12)
    # cos xi = l.e and sin xi = h.e
    a, e = body_frame(jet, psi).a, tangent_basis(jet).e_hat
    assert cx == pytest.approx(a[:, 1] @ e, abs=1e-12)
    assert sx == pytest.approx(a[:, 0] @ e, abs=1e-12)


@given(slopes, slopes, st.floats(-20, 20),
       st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_xi_isometry(fx, fy, psi, u):
    m = xi_transform(jet_from_slopes(fx, fy), psi)
    u = np.array(u)
    assert np.linalg.norm(m @ u) == pytest.approx(np.linalg.norm(u), rel=1e-12, abs=1e-12)


@given(slopes, slopes, st.floats(-20, 20))
def test_xi_maps_rates_to_tangent_frame_angular_velocity(fx, fy, psi):
    """[p|e|n] @ xi @ rates == Theta' l + Phi' h + Psi' n."""
    jet = jet_from_slopes(fx, fy)
    rates = np.array([0.3, -1.2, 0.7])
    a = body_frame(jet, psi).a
    direct = rates[0] * a[:, 1] + rates[1] * a[:, 0] + rates[2] * a[:, 2]
    via = tangent_basis(jet).matrix @ xi_transform(jet, psi) @ rates
    np.testing.assert_allclose(via, direct, atol=1e-12)


# ---------------------------------------------------------------------------
# exponential map and repair
# ---------------------------------------------------------------------------

@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
@settings(max_examples=200)
def test_exp_so3_matches_scipy(w):
    np.testing.assert_allclose(exp_so3(w), Rotation.from_rotvec(w).as_matrix(), atol=1e-13)


def test_exp_so3_small_angle_branch():
    w = np.array([3e-9, -2e-9, 1e-9])
    r = exp_so3(w)
    assert orthonormality_defect(r) < 1e-15
    np.testing.assert_allclose(r, Rotation.from_rotvec(w).as_matrix(), atol=1e-16)


def test_reorthonormalize_returns_nearest_rotation():
    rng = np.random.default_rng(2)
    r = rot_ypr(EulerPose(0.3, -0.2, 1.1))
    noisy = r + 1e-6 * rng.normal(size=(3, 3))
    fixed = reorthonormalize(noisy)
    assert orthonormality_defect(fixed) < 4e-15
    assert np.linalg.det(fixed) == pytest.approx(1.0)
    assert np.abs(fixed - r).max() < 1e-5
