"""Six-sensor inverse kinematics: sensor frame -> 21-joint skeleton.

Pipeline per frame:

1. The palm sensor S6 gives the palm pose directly (reading o s6_offset^-1),
   which places W and the five knuckles (they are mutually rigid).
2. Each nail sensor gives the fingertip and DIP in closed form:
   T = L + l1*V1 + r*V2 and D = L - l2*V1 + r*V2 (see kinematics module for
   the axis conventions).
3. The PIP joint is the intersection of two circles in the finger plane:
   |P - M| = proximal length, |P - D| = middle length. Of the two mirror
   intersections, P is the one offset from the M-D line along
   unit(M-D) x V3 (V3 = finger-plane normal from the nail reading): that
   cross product equals the PIP flexion's rotation axis direction, and PIP
   flexion is nonnegative. Infeasible triangles within the feasibility
   tolerance are projected onto the tangent configuration (status
   "projected"); beyond it the finger fails, which degrades only that
   finger's joints, never the frame.

Per-finger diagnostics (circle residual, projection and side-tie flags) ride
along on the result, and a failed finger is recorded in the status while the
other fingers are still solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateGeometryError, InfeasibleTriangleError,
                     InvalidInputError)
from .kinematics import (SensorFrame, SensorReading, _cross3, _rot_x, _rot_y,
                         _rot_z, finger_rest_frame)
from .model import (DEFAULT_LIMITS, FINGERS, HandPose, HandShape, JointId,
                    JointLimits, N_JOINTS, Skeleton, finger_joints,
                    skeleton_consistency)
from .transforms import kabsch, quat_to_matrix
from .validation import as_float_array, check_unit_quaternion

STATUS_EXACT = "exact"
STATUS_PROJECTED = "projected"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class PipSolution:
    """PIP position plus solve diagnostics."""

    point: np.ndarray
    residual_mm: float
    projected: bool
    side_tie: bool


@dataclass(frozen=True)
class FingerDiagnostics:
    finger: int
    residual_mm: float
    projected: bool
    side_tie: bool
    failed: bool
    message: str = ""


@dataclass(frozen=True)
class AnnotationResult:
    """Joints recovered from one sensor frame.

    positions always has 21 rows; joints that could not be recovered are NaN
    (only the PIP of a failed finger). skeleton is the full Skeleton when
    every finger solved, else None. status is "exact", "projected", or
    "failed"; failed_fingers lists 1-based finger indices when status is
    "failed".
    """

    timestamp_us: int
    positions: np.ndarray
    skeleton: Skeleton | None
    status: str
    failed_fingers: tuple[int, ...]
    diagnostics: tuple[FingerDiagnostics, ...]


def palm_from_s6(reading: SensorReading, shape: HandShape) -> np.ndarray:
    """Palm joint positions [W, M1..M5] from the palm sensor reading.

    The palm pose is (reading o s6_offset^-1); applied to the shape's
    palm-local points directly, without intermediate transform objects.
    """
    if reading.sensor_id != "S6":
        raise InvalidInputError(
            f"palm recovery needs the S6 reading, got {reading.sensor_id}")
    q = check_unit_quaternion(reading.orientation, "S6 orientation")
    off = shape.s6_offset
    R = quat_to_matrix(q) @ quat_to_matrix(off.rotation).T
    t = reading.position - R @ off.translation
    return shape.palm_points @ R.T + t


def tip_dip_from_nail(reading: SensorReading, bone_length: float,
                      half_thickness: float,
                      nail_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Fingertip and DIP from a nail sensor reading, closed form."""
    q = check_unit_quaternion(reading.orientation,
                              f"{reading.sensor_id} orientation")
    R = quat_to_matrix(q)
    v1 = R[:, 0]
    v2 = R[:, 1]
    l1 = nail_fraction * bone_length
    l2 = bone_length - l1
    base = reading.position + half_thickness * v2
    tip = base + l1 * v1
    dip = base - l2 * v1
    return tip, dip


def _any_perpendicular(u: np.ndarray) -> np.ndarray:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(u)))] = 1.0
    p = _cross3(u, axis)
    return p / math.sqrt(float(p @ p))


def solve_pip(m: np.ndarray, d: np.ndarray, t: np.ndarray,
              b_mp: float, b_pd: float, *,
              feasibility_tol: float = 2.0,
              exact_tol: float = 1e-9,
              side_hint: np.ndarray | None = None) -> PipSolution:
    """PIP position from knuckle M, DIP D, tip T and the two bone lengths.

    Solves the two-circle intersection in the plane through M, D, T, taking
    the branch with P and T on opposite sides of the M-D line. An infeasible
    circle pair within feasibility_tol (mm) is projected onto the segment
    between the two length constraints (the tangent configuration); beyond
    feasibility_tol the solve raises InfeasibleTriangleError.

    side_hint, when given, overrides the tip-side rule and places P toward
    the hint's component perpendicular to M-D (annotate_frame passes the
    finger-plane side derived from the nail reading, which stays correct
    even for hyperextended DIP, where T can share P's side). Without a hint,
    a T lying on the M-D line is diagnosed via side_tie=True and a
    deterministic perpendicular is used.
    """
    m = as_float_array(m, "m", (3,))
    d = as_float_array(d, "d", (3,))
    t = as_float_array(t, "t", (3,))
    if b_mp <= 0.0 or b_pd <= 0.0:
        raise InvalidInputError("bone lengths must be positive")
    md = d - m
    dist = math.sqrt(float(md @ md))
    if dist < 1e-9:
        raise DegenerateGeometryError("knuckle and DIP coincide")
    x_hat = md / dist

    excess_out = dist - (b_mp + b_pd)
    excess_in = abs(b_mp - b_pd) - dist
    if excess_out > feasibility_tol or excess_in > feasibility_tol:
        excess = max(excess_out, excess_in)
        raise InfeasibleTriangleError(
            f"PIP circles infeasible: |MD| = {dist:.6g} mm vs bones "
            f"({b_mp:.6g}, {b_pd:.6g}) mm, excess {excess:.6g} mm "
            f"beyond tolerance {feasibility_tol:g} mm", excess)

    if excess_out > exact_tol:
        # Too long: least-squares point on the segment splits the excess.
        x = 0.5 * (b_mp + dist - b_pd)
        p = m + x * x_hat
        return PipSolution(p, 0.5 * excess_out, True, False)
    if excess_in > exact_tol:
        # Too short: P lies beyond the longer bone's far endpoint.
        if b_mp >= b_pd:
            x = 0.5 * (b_mp + b_pd + dist)
        else:
            x = -0.5 * (b_mp + b_pd - dist)
        p = m + x * x_hat
        return PipSolution(p, 0.5 * excess_in, True, False)

    a = (b_mp * b_mp - b_pd * b_pd + dist * dist) / (2.0 * dist)
    # Near tangency the clamp absorbs rounding in the discriminant; a wider
    # on-line snap would hide real offsets, which shrink only as sqrt(excess).
    h = math.sqrt(max(b_mp * b_mp - a * a, 0.0))
    side_tie = False
    if side_hint is not None:
        hint = as_float_array(side_hint, "side_hint", (3,))
        hint_perp = hint - float(hint @ x_hat) * x_hat
        hn = math.sqrt(float(hint_perp @ hint_perp))
        # P goes toward the hint; the construction below subtracts h*y_hat.
        y_hat = -hint_perp / hn if hn > 1e-9 else _any_perpendicular(x_hat)
    else:
        t_perp = (t - m) - float((t - m) @ x_hat) * x_hat
        tn = math.sqrt(float(t_perp @ t_perp))
        if tn > 1e-9:
            y_hat = t_perp / tn
        else:
            side_tie = True
            y_hat = _any_perpendicular(x_hat)
    p = m + a * x_hat - h * y_hat
    pm = p - m
    pd = p - d
    residual = max(abs(math.sqrt(float(pm @ pm)) - b_mp),
                   abs(math.sqrt(float(pd @ pd)) - b_pd))
    return PipSolution(p, residual, False, side_tie)


def annotate_frame(frame: SensorFrame, shape: HandShape, *,
                   feasibility_tol: float = 2.0,
                   residual_tol: float = 1e-6) -> AnnotationResult:
    """Recover the 21-joint skeleton from one sensor frame."""
    positions = np.full((N_JOINTS, 3), np.nan)
    palm = palm_from_s6(frame["S6"], shape)
    positions[int(JointId.W)] = palm[0]
    for f in FINGERS:
        positions[int(finger_joints(f)[0])] = palm[f]

    diagnostics = []
    failed = []
    any_projected = False
    max_residual = 0.0
    for f in FINGERS:
        mid, pid, did, tid = (int(j) for j in finger_joints(f))
        reading = frame[f"S{f}"]
        b = float(shape.bone_lengths[f - 1, 2])
        tip, dip = tip_dip_from_nail(reading, b,
                                     float(shape.half_thickness[f - 1]),
                                     float(shape.nail_fraction[f - 1]))
        positions[did] = dip
        positions[tid] = tip
        # Exact side rule: P always lies on the side of the M-D line given
        # by unit(MD) x V3 (V3 = finger-plane normal from the nail reading),
        # because PIP flexion is nonnegative. The tip-side rule would fail
        # under DIP hyperextension, where T crosses onto P's side.
        md = dip - palm[f]
        n = math.sqrt(float(md @ md))
        axes = reading.axes()
        if n > 1e-9:
            hint = _cross3(md / n, axes[:, 2])
        else:
            hint = -axes[:, 1]
        try:
            sol = solve_pip(palm[f], dip, tip,
                            float(shape.bone_lengths[f - 1, 0]),
                            float(shape.bone_lengths[f - 1, 1]),
                            feasibility_tol=feasibility_tol,
                            side_hint=hint)
        except InfeasibleTriangleError as exc:
            failed.append(f)
            diagnostics.append(FingerDiagnostics(
                f, exc.excess_mm, False, False, True, str(exc)))
            continue
        positions[pid] = sol.point
        any_projected = any_projected or sol.projected
        max_residual = max(max_residual, sol.residual_mm)
        diagnostics.append(FingerDiagnostics(
            f, sol.residual_mm, sol.projected, sol.side_tie, False))

    if failed:
        status = STATUS_FAILED
        skeleton = None
    else:
        status = (STATUS_PROJECTED if (any_projected or max_residual >= residual_tol)
                  else STATUS_EXACT)
        skeleton = Skeleton(positions, "tracker")
    positions.setflags(write=False)
    return AnnotationResult(frame.timestamp_us, positions, skeleton, status,
                            tuple(failed), tuple(diagnostics))


def annotate_frames(frames, shape: HandShape, *,
                    feasibility_tol: float = 2.0,
                    residual_tol: float = 1e-6) -> list[AnnotationResult]:
    """Annotate a sequence of frames independently, preserving order."""
    return [annotate_frame(frame, shape, feasibility_tol=feasibility_tol,
                           residual_tol=residual_tol)
            for frame in frames]


def _euler_zyx(A: np.ndarray) -> tuple[tuple[float, float, float], ...]:
    """Both (z, y, x) intrinsic Euler decompositions of a rotation matrix."""
    sy = np.hypot(A[0, 0], A[1, 0])
    b1 = (float(np.arctan2(A[1, 0], A[0, 0])),
          float(np.arctan2(-A[2, 0], sy)),
          float(np.arctan2(A[2, 1], A[2, 2])))
    b2 = (float(np.arctan2(-A[1, 0], -A[0, 0])),
          float(np.arctan2(-A[2, 0], -sy)),
          float(np.arctan2(-A[2, 1], -A[2, 2])))
    return b1, b2


def extract_angles(skeleton: Skeleton, shape: HandShape, *,
                   limits: JointLimits = DEFAULT_LIMITS,
                   tau_plane: float = 1e-3,
                   tau_len: float = 1e-3) -> HandPose:
    """Invert forward kinematics: consistent skeleton -> HandPose.

    The skeleton must pass skeleton_consistency at (tau_plane, tau_len);
    violations raise InvalidInputError. Twist of a perfectly straight finger
    is unobservable from joint positions and comes back as 0.
    """
    skeleton_consistency(skeleton, shape, tau_plane, tau_len).raise_if_failed(
        "skeleton inconsistent with shape")
    fit, rms = kabsch(shape.palm_points, skeleton.palm())
    if rms > max(tau_len, 1e-9):
        raise InvalidInputError(
            f"palm joints do not move rigidly: fit rms {rms:.6g} mm")
    Rg = quat_to_matrix(fit.rotation)
    angles = np.zeros((5, 5))
    for f in FINGERS:
        chain = skeleton.finger_chain(f)
        m, p, d, t = chain
        rest = finger_rest_frame(shape, f)
        u1 = p - m
        u2 = d - p
        u3 = t - d
        u1 = u1 / np.linalg.norm(u1)
        u2 = u2 / np.linalg.norm(u2)
        u3 = u3 / np.linalg.norm(u3)

        candidates = []
        c1 = np.cross(u1, u2)
        n1 = np.linalg.norm(c1)
        if n1 > 1e-8:
            candidates.extend([c1 / n1, -c1 / n1])
        c2 = np.cross(u2, u3)
        n2 = np.linalg.norm(c2)
        if n2 > 1e-8:
            candidates.extend([c2 / n2, -c2 / n2])
        ref = Rg @ rest[:, 1]
        ref_perp = ref - float(np.dot(ref, u1)) * u1
        nr = np.linalg.norm(ref_perp)
        if nr > 1e-9:
            candidates.append(ref_perp / nr)

        world = Rg @ rest
        best_row = None
        best_key = None
        for y in candidates:
            # Orthonormalize against the proximal bone direction.
            y_o = y - float(np.dot(y, u1)) * u1
            ny = np.linalg.norm(y_o)
            if ny < 1e-9:
                continue
            y_o = y_o / ny
            F = np.column_stack((u1, y_o, np.cross(u1, y_o)))
            A = rest.T @ Rg.T @ F
            pip_a = float(np.arctan2(np.dot(np.cross(u1, u2), y_o),
                                     np.dot(u1, u2)))
            dip_a = float(np.arctan2(np.dot(np.cross(u2, u3), y_o),
                                     np.dot(u2, u3)))
            for abd, flex, twist in _euler_zyx(A):
                row = np.array([twist, flex, abd, pip_a, dip_a])
                # Reconstruct the three bone directions and score against
                # the observed ones; in-limit rows win ties.
                dirs = _bone_directions(row) @ world.T
                err = (np.linalg.norm(dirs[0] - u1)
                       + np.linalg.norm(dirs[1] - u2)
                       + np.linalg.norm(dirs[2] - u3))
                penalty = float(np.sum(
                    np.maximum(0.0, limits.lower - row)
                    + np.maximum(0.0, row - limits.upper)))
                key = (penalty, err)
                if best_key is None or key < best_key:
                    best_key, best_row = key, row
        if best_row is None or best_key[1] > 1e-4:
            raise DegenerateGeometryError(
                f"could not recover articulation of finger {f}")
        angles[f - 1] = best_row
    return HandPose(fit.translation, fit.rotation, angles)


def _bone_directions(row: np.ndarray) -> np.ndarray:
    """Rows = unit bone directions (proximal, middle, distal), rest-frame."""
    twist, flex, abd, pip_a, dip_a = row
    F = _rot_z(abd) @ _rot_y(flex) @ _rot_x(twist)
    d1 = F[:, 0]
    F = F @ _rot_y(pip_a)
    d2 = F[:, 0]
    F = F @ _rot_y(dip_a)
    d3 = F[:, 0]
    return np.vstack((d1, d2, d3))
