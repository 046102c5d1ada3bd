"""Inverse kinematics: palm recovery, nail closed form, PIP solve, full frames."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_shape, random_valid_pose
from handmocap import (HandPose, InvalidInputError, RigidTransform,
                       SensorFrame, SensorReading, Skeleton, annotate_frame,
                       annotate_frames, default_shape, extract_angles,
                       forward_kinematics, simulate_sensors, solve_pip)
from handmocap.annotation import (STATUS_EXACT, STATUS_FAILED,
                                  STATUS_PROJECTED, palm_from_s6,
                                  tip_dip_from_nail)
from handmocap.errors import (DegenerateGeometryError, InfeasibleTriangleError)
from handmocap.transforms import (matrix_to_quat, quat_angle_between,
                                  quat_from_axis_angle, quat_multiply,
                                  random_quat)

seeds = st.integers(0, 2**32 - 1)


# -- palm recovery ---------------------------------------------------------------

def _identity_offset_shape():
    return replace(default_shape(), s6_offset=RigidTransform.identity())


def test_palm_from_s6_identity():
    shape = _identity_offset_shape()
    reading = SensorReading("S6", np.zeros(3), np.array([1.0, 0, 0, 0]))
    assert np.allclose(palm_from_s6(reading, shape), shape.palm_points,
                       atol=1e-12)


def test_palm_from_s6_translation():
    shape = _identity_offset_shape()
    t = np.array([5.0, -3.0, 11.0])
    reading = SensorReading("S6", t, np.array([1.0, 0, 0, 0]))
    assert np.allclose(palm_from_s6(reading, shape), shape.palm_points + t,
                       atol=1e-12)


def test_palm_from_s6_quarter_turn():
    shape = _identity_offset_shape()
    q = quat_from_axis_angle([0.0, 0.0, 1.0], np.pi / 2.0)
    reading = SensorReading("S6", np.zeros(3), q)
    got = palm_from_s6(reading, shape)
    x, y, z = shape.palm_points.T
    expect = np.column_stack((-y, x, z))  # hand-rotated 90 deg about z
    assert np.allclose(got, expect, atol=1e-12)


def test_palm_from_s6_inverts_offset():
    # With a nontrivial mounting offset the reading is pose o offset, so
    # recovery must strip the offset before placing the palm points.
    shape = default_shape()
    pose = RigidTransform(quat_from_axis_angle([1.0, 2.0, 0.5], 0.8),
                          np.array([12.0, -4.0, 7.0]))
    s6 = pose.compose(shape.s6_offset)
    reading = SensorReading("S6", s6.translation, s6.rotation)
    assert np.allclose(palm_from_s6(reading, shape),
                       pose.apply(shape.palm_points), atol=1e-9)


def test_palm_from_s6_wrong_sensor():
    shape = default_shape()
    reading = SensorReading("S1", np.zeros(3), np.array([1.0, 0, 0, 0]))
    with pytest.raises(InvalidInputError):
        palm_from_s6(reading, shape)


def test_palm_from_s6_denormalized_quaternion():
    reading = SensorReading("S6", np.zeros(3), np.array([1.0, 0, 0, 1e-3]))
    with pytest.raises(InvalidInputError):
        palm_from_s6(reading, default_shape())


# -- nail closed form -------------------------------------------------------------

def _nail_reading(position, v1, v2):
    R = np.column_stack((v1, v2, np.cross(v1, v2)))
    return SensorReading("S1", np.asarray(position, dtype=float),
                         matrix_to_quat(R))


def test_tip_dip_worked_example():
    reading = _nail_reading([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0])
    tip, dip = tip_dip_from_nail(reading, bone_length=20.0, half_thickness=6.0,
                                 nail_fraction=0.5)
    assert np.allclose(tip, [10.0, 0.0, -6.0], atol=1e-12)
    assert np.allclose(dip, [-10.0, 0.0, -6.0], atol=1e-12)


def test_tip_dip_zero_thickness_collinear():
    reading = _nail_reading([3.0, 4.0, 5.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0])
    tip, dip = tip_dip_from_nail(reading, 20.0, 0.0, 0.3)
    assert np.allclose(tip, [3.0, 10.0, 5.0], atol=1e-12)
    assert np.allclose(dip, [3.0, -10.0, 5.0], atol=1e-12)


@given(seeds)
def test_tip_dip_bone_length_preserved(seed):
    rng = np.random.default_rng(seed)
    v1 = rng.normal(size=3)
    v1 /= np.linalg.norm(v1)
    helper = rng.normal(size=3)
    v2 = np.cross(v1, helper)
    v2 /= np.linalg.norm(v2)
    b = rng.uniform(10.0, 40.0)
    reading = _nail_reading(rng.uniform(-50, 50, 3), v1, v2)
    tip, dip = tip_dip_from_nail(reading, b, rng.uniform(3.0, 9.0),
                                 rng.uniform(0.2, 0.8))
    assert np.linalg.norm(tip - dip) == pytest.approx(b, abs=1e-9)


# -- PIP solve --------------------------------------------------------------------

M0 = np.zeros(3)


def test_solve_pip_worked_example():
    sol = solve_pip(M0, [60.0, 0, 0], [75.0, -8.0, 0], 45.0, 25.0)
    x = (45.0**2 - 25.0**2 + 60.0**2) / (2.0 * 60.0)
    y = np.sqrt(45.0**2 - x * x)
    assert np.allclose(sol.point, [x, y, 0.0], atol=1e-9)
    assert sol.residual_mm < 1e-9
    assert not sol.projected and not sol.side_tie


def test_solve_pip_mirrored_tip():
    sol = solve_pip(M0, [60.0, 0, 0], [75.0, +8.0, 0], 45.0, 25.0)
    x = (45.0**2 - 25.0**2 + 60.0**2) / (2.0 * 60.0)
    y = np.sqrt(45.0**2 - x * x)
    assert np.allclose(sol.point, [x, -y, 0.0], atol=1e-9)


def test_solve_pip_tangency():
    sol = solve_pip(M0, [70.0, 0, 0], [80.0, 0, 0], 45.0, 25.0)
    assert np.allclose(sol.point, [45.0, 0.0, 0.0], atol=1e-9)
    assert not sol.projected


def test_solve_pip_projects_slightly_long():
    sol = solve_pip(M0, [71.0, 0, 0], [80.0, 1.0, 0], 45.0, 25.0)
    assert sol.projected
    # Least-squares point splits the 1 mm excess between the two circles.
    assert np.allclose(sol.point, [45.5, 0.0, 0.0], atol=1e-9)
    assert sol.residual_mm == pytest.approx(0.5, abs=1e-9)


def test_solve_pip_projects_slightly_short():
    # |MD| = 19.5 against |b_mp - b_pd| = 20: P lands beyond the short bone.
    sol = solve_pip(M0, [19.5, 0, 0], [25.0, 3.0, 0], 45.0, 25.0)
    assert sol.projected
    assert sol.residual_mm == pytest.approx(0.25, abs=1e-9)
    p = sol.point
    assert abs(np.linalg.norm(p - M0) - 45.0) <= 0.5 + 1e-9
    assert abs(np.linalg.norm(p - np.array([19.5, 0, 0])) - 25.0) <= 0.5 + 1e-9


def test_solve_pip_infeasible_beyond_tolerance():
    with pytest.raises(InfeasibleTriangleError) as err:
        solve_pip(M0, [73.0, 0, 0], [80.0, 0, 0], 45.0, 25.0)
    assert err.value.excess_mm == pytest.approx(3.0, abs=1e-9)


def test_solve_pip_degenerate_and_invalid():
    with pytest.raises(DegenerateGeometryError):
        solve_pip(M0, [0.0, 0, 0], [1.0, 0, 0], 45.0, 25.0)
    with pytest.raises(InvalidInputError):
        solve_pip(M0, [60.0, 0, 0], [75.0, -8.0, 0], -1.0, 25.0)


def test_solve_pip_side_hint_overrides_tip():
    # Hint and tip on the same side: the hint wins.
    sol = solve_pip(M0, [60.0, 0, 0], [75.0, 8.0, 0], 45.0, 25.0,
                    side_hint=np.array([0.0, 1.0, 0.0]))
    assert sol.point[1] > 0.0


def test_solve_pip_tie_diagnosed():
    sol = solve_pip(M0, [60.0, 0, 0], [75.0, 0.0, 0], 45.0, 25.0)
    assert sol.side_tie
    # Deterministic: both distance constraints still hold.
    assert sol.residual_mm < 1e-9


@given(seeds)
def test_solve_pip_satisfies_both_circles(seed):
    rng = np.random.default_rng(seed)
    m = rng.uniform(-50, 50, 3)
    b_mp = rng.uniform(20.0, 50.0)
    b_pd = rng.uniform(15.0, 30.0)
    dist = rng.uniform(abs(b_mp - b_pd) + 1.0, b_mp + b_pd - 1.0)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    d = m + dist * u
    t = d + rng.normal(0.0, 10.0, 3)
    sol = solve_pip(m, d, t, b_mp, b_pd)
    assert abs(np.linalg.norm(sol.point - m) - b_mp) < 1e-8
    assert abs(np.linalg.norm(sol.point - d) - b_pd) < 1e-8
    # Side constraint: P and T on opposite sides of the M-D line.
    t_perp = (t - m) - ((t - m) @ u) * u
    p_perp = (sol.point - m) - ((sol.point - m) @ u) * u
    if np.linalg.norm(t_perp) > 1e-6:
        assert float(t_perp @ p_perp) <= 1e-9


# -- full-frame annotation ---------------------------------------------------------

@given(seeds)
def test_round_trip_reproduces_fk(seed):
    rng = np.random.default_rng(seed)
    shape = random_shape(rng)
    pose = random_valid_pose(rng)
    skel = forward_kinematics(shape, pose)
    res = annotate_frame(simulate_sensors(shape, skel, timestamp_us=7), shape)
    assert res.status == STATUS_EXACT
    assert res.timestamp_us == 7
    assert res.skeleton is not None
    # 1e-5 rather than 1e-6: a draw landing near PIP tangency is
    # sqrt-conditioned (see test_round_trip_rest_pose).
    assert np.max(np.linalg.norm(res.positions - skel.points, axis=1)) < 1e-5


def test_round_trip_hyperextended_dip():
    # With the DIP bent backwards the tip crosses onto the PIP's side of the
    # M-D line, so side selection must come from the sensor plane normal.
    shape = default_shape()
    angles = np.zeros((5, 5))
    angles[:, 3] = np.radians(2.0)
    angles[:, 4] = np.radians(-10.0)
    pose = HandPose(np.zeros(3), np.array([1.0, 0, 0, 0]), angles)
    skel = forward_kinematics(shape, pose)
    res = annotate_frame(simulate_sensors(shape, skel), shape)
    assert res.status == STATUS_EXACT
    assert np.max(np.linalg.norm(res.positions - skel.points, axis=1)) < 1e-6


def test_round_trip_rest_pose():
    # Straight fingers sit exactly at the two-circle tangency, where the PIP
    # offset is sqrt-conditioned in the reconstructed |MD|: rounding of order
    # 1e-13 in the sensor-derived endpoints is amplified to ~1e-6 mm. The
    # bound below covers that intrinsic floor, not solver slack.
    shape = default_shape()
    skel = forward_kinematics(shape, HandPose.rest())
    res = annotate_frame(simulate_sensors(shape, skel), shape)
    assert res.status == STATUS_EXACT
    assert np.max(np.linalg.norm(res.positions - skel.points, axis=1)) < 1e-5


@given(seeds)
def test_annotation_rigid_equivariance(seed):
    rng = np.random.default_rng(seed)
    shape = random_shape(rng)
    skel = forward_kinematics(shape, random_valid_pose(rng))
    frame = simulate_sensors(shape, skel)
    G = RigidTransform(random_quat(rng), rng.uniform(-100.0, 100.0, 3))
    moved = SensorFrame(frame.timestamp_us, tuple(
        SensorReading(r.sensor_id, G.apply(r.position),
                      quat_multiply(G.rotation, r.orientation))
        for r in frame.readings))
    a = annotate_frame(frame, shape)
    b = annotate_frame(moved, shape)
    assert a.status == b.status == STATUS_EXACT
    assert np.allclose(b.positions, G.apply(a.positions), atol=1e-9)


def _corrupt(frame, sensor_id, offset):
    return SensorFrame(frame.timestamp_us, tuple(
        SensorReading(r.sensor_id, r.position + offset, r.orientation)
        if r.sensor_id == sensor_id else r for r in frame.readings))


def test_failed_finger_degrades_gracefully():
    shape = default_shape()
    skel = forward_kinematics(shape, HandPose.rest())
    frame = _corrupt(simulate_sensors(shape, skel), "S2",
                     np.array([200.0, 0.0, 0.0]))
    res = annotate_frame(frame, shape)
    assert res.status == STATUS_FAILED
    assert res.failed_fingers == (2,)
    assert res.skeleton is None
    # Only the index PIP is unrecoverable; its DIP and TIP still come from
    # the (corrupt) nail reading, and every other joint matches the truth.
    assert np.all(np.isnan(res.positions[6]))
    assert np.all(np.isfinite(np.delete(res.positions, 6, axis=0)))
    # M2 still comes from the clean palm reading; only P2/D2/T2 are off.
    # Rest-pose PIPs are tangency-conditioned, hence the 1e-5 bound.
    good = [i for i in range(21) if i not in (6, 7, 8)]
    assert np.allclose(res.positions[good], skel.points[good], atol=1e-5)
    diag = {d.finger: d for d in res.diagnostics}
    assert diag[2].failed and diag[2].message
    assert not diag[3].failed


def test_infeasible_within_tolerance_projects():
    shape = default_shape()
    skel = forward_kinematics(shape, HandPose.rest())
    frame = simulate_sensors(shape, skel)
    v1 = frame["S3"].axes()[:, 0]
    res = annotate_frame(_corrupt(frame, "S3", 1.0 * v1), shape)
    assert res.status == STATUS_PROJECTED
    assert res.failed_fingers == ()
    assert np.all(np.isfinite(res.positions))


def test_corrupting_one_nail_leaves_other_fingers_alone():
    shape = default_shape()
    rng = np.random.default_rng(5)
    skel = forward_kinematics(shape, random_valid_pose(rng))
    frame = simulate_sensors(shape, skel)
    bent = _corrupt(frame, "S2", np.array([0.5, -0.3, 0.2]))
    a = annotate_frame(frame, shape)
    b = annotate_frame(bent, shape)
    touched = [5, 6, 7, 8]  # index finger rows
    untouched = [i for i in range(21) if i not in touched]
    assert np.array_equal(a.positions[untouched], b.positions[untouched])
    assert not np.allclose(a.positions[touched], b.positions[touched])


def test_annotate_frames_preserves_order():
    shape = default_shape()
    frames = []
    for i in range(4):
        pose = random_valid_pose(np.random.default_rng(i))
        skel = forward_kinematics(shape, pose)
        frames.append(simulate_sensors(shape, skel, timestamp_us=10 * i))
    results = annotate_frames(frames, shape)
    assert [r.timestamp_us for r in results] == [0, 10, 20, 30]


# -- angle extraction ---------------------------------------------------------------

def test_extract_angles_rest():
    shape = default_shape()
    pose = extract_angles(forward_kinematics(shape, HandPose.rest()), shape)
    assert np.max(np.abs(pose.angles)) < 1e-9
    assert np.allclose(pose.translation, 0.0, atol=1e-9)
    assert quat_angle_between(pose.rotation, [1.0, 0, 0, 0]) < 1e-7


def test_extract_angles_random_poses():
    rng = np.random.default_rng(123)
    shape = default_shape()
    worst = 0.0
    for _ in range(1000):
        pose = random_valid_pose(rng)
        skel = forward_kinematics(shape, pose)
        got = extract_angles(skel, shape)
        worst = max(worst, float(np.max(np.abs(got.angles - pose.angles))))
        assert quat_angle_between(got.rotation, pose.rotation) < 1e-7
        assert np.allclose(got.translation, pose.translation, atol=1e-6)
    assert worst < 1e-6, f"worst angle error {worst:.3g} rad"


def test_extract_angles_rejects_off_plane_skeleton():
    shape = default_shape()
    angles = np.zeros((5, 5))
    angles[:, 3] = np.radians(45.0)
    skel = forward_kinematics(shape, HandPose(np.zeros(3), [1, 0, 0, 0],
                                              angles))
    pts = skel.points.copy()
    # Push the middle tip 5 mm off its finger plane.
    chain = pts[9:13]
    n = np.cross(chain[1] - chain[0], chain[2] - chain[1])
    pts[12] += 5.0 * n / np.linalg.norm(n)
    with pytest.raises(InvalidInputError):
        extract_angles(Skeleton(pts), shape)
