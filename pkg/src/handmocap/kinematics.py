"""Forward kinematics and the magnetic-sensor simulator.

Sensor conventions (these are the contract the annotator inverts, so they
are spelled out in full):

- Six 6-DOF sensors: S1..S5 sit on the fingernails of thumb..little, S6 on
  the back of the palm. A reading is position (mm) + orientation (unit
  quaternion, wxyz), both in the tracker frame.
- For a nail sensor on a finger with distal bone D -> T of length b, half
  thickness r and nail fraction lambda (l1 = lambda*b, l2 = b - l1):
      V1 = unit(T - D)          along the finger toward the tip,
      V2 = inward nail normal   from the nail surface toward the bone axis,
      V3 = V1 x V2.
  The sensor sits on the nail surface r above the bone axis, l2 beyond D:
      L = D + l2*V1 + r*(-V2)
  which makes the closed-form inversions exact:
      T = L + l1*V1 + r*V2,     D = L - l2*V1 + r*V2.
  The reading's orientation encodes the rotation whose matrix columns are
  [V1, V2, V3].
- The palm sensor reading is (palm pose) o s6_offset, where "palm pose" maps
  the shape's palm-local frame into the tracker frame.

The dorsal (nail-side) direction for a straight finger is not determined by
joint positions alone; the simulator then falls back to the zero-twist
convention derived from the palm orientation. Either way the emitted
(V1, V2) pair is self-consistent, so annotation round trips are unaffected.

Finger chains: at zero articulation a finger extends along unit(M - W) in
palm coordinates. The knuckle rotation applies abduction about the local
palm normal, then flexion about the local lateral axis, then twist about
the bone axis; positive flexion bends toward the palm side. PIP and DIP
flex about the running lateral axis, which keeps M, P, D, T coplanar by
construction.

All functions are pure and deterministic; identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateGeometryError, InvalidInputError,
                     MalformedFrameError)
from .model import (FINGERS, HandPose, HandShape, JointId, N_JOINTS, Skeleton,
                    ensure_valid_shape, finger_joints, validate_pose)
from .transforms import (RigidTransform, kabsch, matrix_to_quat, quat_from_rotvec,
                         quat_multiply, quat_to_matrix)
from .validation import as_float_array, check_unit_quaternion

SENSOR_IDS = ("S1", "S2", "S3", "S4", "S5", "S6")

_PALM_NORMAL = np.array([0.0, 0.0, 1.0])


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors (np.cross pays generic-shape overhead)."""
    a0, a1, a2 = a.tolist()
    b0, b1, b2 = b.tolist()
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


@dataclass(frozen=True)
class SensorReading:
    """One 6-DOF sample: tracker-frame position (mm) + orientation (wxyz)."""

    sensor_id: str
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        if self.sensor_id not in SENSOR_IDS:
            raise MalformedFrameError(
                f"unknown sensor id {self.sensor_id!r}; expected one of {SENSOR_IDS}")
        p = as_float_array(self.position, "position", (3,)).copy()
        q = as_float_array(self.orientation, "orientation", (4,)).copy()
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def axes(self) -> np.ndarray:
        """3x3 matrix with columns [V1, V2, V3]."""
        return quat_to_matrix(self.orientation)


@dataclass(frozen=True)
class SensorFrame:
    """All six sensor readings at one timestamp (integer microseconds)."""

    timestamp_us: int
    readings: tuple[SensorReading, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamp_us", int(self.timestamp_us))
        ids = [r.sensor_id for r in self.readings]
        if sorted(ids) != sorted(SENSOR_IDS):
            missing = sorted(set(SENSOR_IDS) - set(ids))
            duplicated = sorted({i for i in ids if ids.count(i) > 1})
            raise MalformedFrameError(
                f"frame at {self.timestamp_us} us needs exactly one reading per "
                f"sensor {SENSOR_IDS}; missing {missing}, duplicated {duplicated}")
        ordered = tuple(sorted(self.readings, key=lambda r: r.sensor_id))
        object.__setattr__(self, "readings", ordered)

    def __getitem__(self, sensor_id: str) -> SensorReading:
        idx = SENSOR_IDS.index(sensor_id)
        return self.readings[idx]


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def finger_rest_frame(shape: HandShape, finger: int) -> np.ndarray:
    """Palm-local frame at a knuckle: columns [bone, lateral, dorsal normal]."""
    u = shape.mcp(finger) - shape.wrist
    n = math.sqrt(float(u @ u))
    if n < 1e-9:
        raise DegenerateGeometryError(
            f"knuckle {finger} coincides with the wrist")
    u = u / n
    lateral = _cross3(_PALM_NORMAL, u)
    ln = math.sqrt(float(lateral @ lateral))
    if ln < 1e-9:
        raise DegenerateGeometryError(
            f"knuckle direction of finger {finger} is parallel to the palm normal")
    lateral = lateral / ln
    normal = _cross3(u, lateral)
    return np.column_stack((u, lateral, normal))


def forward_kinematics(shape: HandShape, pose: HandPose, *,
                       check: bool = True) -> Skeleton:
    """Joint positions (tracker frame) of a shape articulated by a pose."""
    if check:
        ensure_valid_shape(shape)
        rep = validate_pose(pose)
        # Joint-limit violations are the caller's business (FK is defined on
        # any finite angles); only structural problems are fatal here.
        fatal = tuple(m for m in rep.violations
                      if "non-finite" in m or "quaternion" in m)
        if fatal:
            raise InvalidInputError("invalid pose: " + "; ".join(fatal))
    Rg = quat_to_matrix(pose.rotation)
    pts = np.empty((N_JOINTS, 3))
    palm_world = shape.palm_points @ Rg.T + pose.translation
    pts[int(JointId.W)] = palm_world[0]
    for f in FINGERS:
        mid, pid, did, tid = (int(j) for j in finger_joints(f))
        twist, flexion, abduction, pip_a, dip_a = pose.angles[f - 1].tolist()
        frame = Rg @ finger_rest_frame(shape, f) \
            @ _rot_z(abduction) @ _rot_y(flexion) @ _rot_x(twist)
        lp, lm, ld = shape.bone_lengths[f - 1].tolist()
        m = palm_world[f]
        p = m + lp * frame[:, 0]
        frame = frame @ _rot_y(pip_a)
        d = p + lm * frame[:, 0]
        frame = frame @ _rot_y(dip_a)
        t = d + ld * frame[:, 0]
        pts[mid], pts[pid], pts[did], pts[tid] = m, p, d, t
    return Skeleton(pts, "tracker")


def palm_pose(shape: HandShape, skeleton: Skeleton) -> RigidTransform:
    """Rigid transform mapping palm-local coordinates into the skeleton frame.

    Least-squares fit over the six mutually rigid palm points; exact for
    any skeleton produced by forward_kinematics.
    """
    fit, _rms = kabsch(shape.palm_points, skeleton.palm())
    return fit


def _finger_lateral(rest_lateral_world: np.ndarray, chain: np.ndarray) -> np.ndarray:
    """Unit lateral (finger-plane normal) for a finger chain [M, P, D, T].

    Uses the PIP bend when present (its sign is fixed by the nonnegative PIP
    flexion range), then the DIP bend sign-matched to the rest lateral, then
    the zero-twist fallback.
    """
    m, p, d, t = chain
    u1 = p - m
    u2 = d - p
    u3 = t - d
    c1 = _cross3(u1, u2)
    n1 = math.sqrt(float(c1 @ c1))
    scale1 = math.sqrt(float(u1 @ u1) * float(u2 @ u2))
    if n1 > 1e-8 * scale1:
        return c1 / n1
    c2 = _cross3(u2, u3)
    n2 = math.sqrt(float(c2 @ c2))
    scale2 = math.sqrt(float(u2 @ u2) * float(u3 @ u3))
    if n2 > 1e-8 * scale2:
        y = c2 / n2
        return y if float(y @ rest_lateral_world) >= 0.0 else -y
    v1 = u3 / math.sqrt(float(u3 @ u3))
    y = rest_lateral_world - float(rest_lateral_world @ v1) * v1
    ny = math.sqrt(float(y @ y))
    if ny < 1e-9:
        raise DegenerateGeometryError(
            "cannot orient a straight finger whose rest lateral is along the bone")
    return y / ny


def simulate_sensors(shape: HandShape, skeleton: Skeleton,
                     timestamp_us: int = 0) -> SensorFrame:
    """Noise-free sensor readings for a skeleton (inverse of annotation).

    The skeleton must be consistent with the shape (bone lengths, planarity);
    a degenerate distal bone raises.
    """
    fit = palm_pose(shape, skeleton)
    R_palm = quat_to_matrix(fit.rotation)
    readings = []
    for f in FINGERS:
        chain = skeleton.finger_chain(f)
        d = chain[2]
        t = chain[3]
        bone = t - d
        b = math.sqrt(float(bone @ bone))
        if b < 1e-6:
            raise DegenerateGeometryError(
                f"distal bone of finger {f} is degenerate (|T-D| = {b:.3g} mm)")
        v1 = bone / b
        rest_lateral = R_palm @ finger_rest_frame(shape, f)[:, 1]
        lateral = _finger_lateral(rest_lateral, chain)
        nail_dir = _cross3(v1, lateral)
        lam = float(shape.nail_fraction[f - 1])
        r = float(shape.half_thickness[f - 1])
        l2 = (1.0 - lam) * b
        pos = d + l2 * v1 + r * nail_dir
        v2 = -nail_dir
        v3 = _cross3(v1, v2)
        q = matrix_to_quat(np.column_stack((v1, v2, v3)))
        readings.append(SensorReading(f"S{f}", pos, q))
    s6 = fit.compose(shape.s6_offset)
    readings.append(SensorReading("S6", s6.translation, s6.rotation))
    return SensorFrame(timestamp_us, tuple(readings))


def perturb_sensor_frame(frame: SensorFrame, rng: np.random.Generator,
                         sigma_pos_mm: float = 0.0,
                         sigma_rot_deg: float = 0.0) -> SensorFrame:
    """Additive Gaussian noise model used by the synthetic studies.

    Position: i.i.d. N(0, sigma_pos^2) per coordinate. Orientation: a
    left-composed rotation whose rotation vector is i.i.d. N(0, sigma_rot^2)
    per component (sigma in radians internally, degrees at this interface).
    Draws happen in S1..S6 order, position before rotation, so seeded runs
    reproduce exactly.
    """
    sigma_rot = np.radians(sigma_rot_deg)
    out = []
    for reading in frame.readings:
        pos = reading.position + rng.normal(0.0, 1.0, 3) * sigma_pos_mm
        rv = rng.normal(0.0, 1.0, 3) * sigma_rot
        q = quat_multiply(quat_from_rotvec(rv), reading.orientation)
        out.append(SensorReading(reading.sensor_id, pos, q))
    return SensorFrame(frame.timestamp_us, tuple(out))


def reading_transform(reading: SensorReading) -> RigidTransform:
    """Interpret a reading as the rigid pose of its sensor."""
    q = check_unit_quaternion(reading.orientation,
                              f"{reading.sensor_id} orientation")
    return RigidTransform(q, reading.position)
