"""Hand skeleton model: joints, shape parameters, pose, and consistency checks.

The hand has 21 joints: the wrist W plus, for each of the five fingers
(1 = thumb ... 5 = little), the knuckle M (MCP), middle joint P (PIP), outer
joint D (DIP) and the fingertip T. Articulation has 31 degrees of freedom:
6 for the global wrist pose plus five angles per finger (knuckle twist,
knuckle flexion, knuckle abduction, middle-joint flexion, outer-joint
flexion). The thumb uses the same five-angle chain as the other fingers.

Shape ("who is this hand") and pose ("what is it doing") are separate value
types. Shape geometry lives in a palm-local frame: origin at the wrist,
x toward the middle-finger knuckle, z along the back-of-hand normal,
y = z cross x. Physical assumptions baked into the model: the wrist and the
five knuckles are mutually rigid; bone lengths are constant; each finger's
M, P, D, T stay coplanar.

Units: millimetres and radians everywhere in code; degrees only at the CLI.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .transforms import RigidTransform
from .validation import as_float_array, check_finite


class JointId(enum.IntEnum):
    """The 21 joints in their fixed serialization order."""

    W = 0
    M1 = 1
    P1 = 2
    D1 = 3
    T1 = 4
    M2 = 5
    P2 = 6
    D2 = 7
    T2 = 8
    M3 = 9
    P3 = 10
    D3 = 11
    T3 = 12
    M4 = 13
    P4 = 14
    D4 = 15
    T4 = 16
    M5 = 17
    P5 = 18
    D5 = 19
    T5 = 20


JOINT_ORDER: tuple[JointId, ...] = tuple(JointId)
N_JOINTS = len(JOINT_ORDER)

FINGERS = (1, 2, 3, 4, 5)
FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")

ANGLE_NAMES = ("mcp_twist", "mcp_flexion", "mcp_abduction",
               "pip_flexion", "dip_flexion")
TWIST, FLEXION, ABDUCTION, PIP, DIP = range(5)

BONE_NAMES = ("proximal", "middle", "distal")


_FINGER_JOINTS = tuple(
    tuple(JointId(1 + 4 * (f - 1) + k) for k in range(4)) for f in FINGERS)


def finger_joints(finger: int) -> tuple[JointId, JointId, JointId, JointId]:
    """(M, P, D, T) joint ids for finger 1..5."""
    if finger not in FINGERS:
        raise InvalidInputError(f"finger index must be 1..5, got {finger}")
    return _FINGER_JOINTS[finger - 1]


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a validity check: empty violations means valid."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self, context: str) -> None:
        if self.violations:
            raise InvalidInputError(
                f"{context}: " + "; ".join(self.violations))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JointLimits:
    """Inclusive [lower, upper] bounds per angle, radians.

    One table applies to all five fingers; entries follow ANGLE_NAMES order.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_float_array(self.lower, "lower", (5,))
        hi = as_float_array(self.upper, "upper", (5,))
        check_finite(lo, "lower")
        check_finite(hi, "upper")
        if np.any(lo > hi):
            raise InvalidInputError("joint limits: lower bound exceeds upper")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    def clip(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.lower, self.upper)


DEFAULT_LIMITS = JointLimits(
    lower=np.radians([-15.0, -30.0, -25.0, 0.0, -10.0]),
    upper=np.radians([15.0, 100.0, 25.0, 110.0, 90.0]),
)


@dataclass(frozen=True)
class HandShape:
    """Per-subject hand geometry.

    palm_points: (6, 3) palm-local positions of [W, M1..M5].
    bone_lengths: (5, 3) per finger [proximal, middle, distal], mm.
    half_thickness: (5,) finger half thickness r (nail sensor standoff), mm.
    nail_fraction: (5,) fraction lambda of the distal bone between the sensor
        foot point and the fingertip: l1 = lambda * distal, l2 = (1-lambda) * distal.
    s6_offset: rigid transform from the palm sensor's local frame to the
        palm-local frame (where the back-of-palm sensor sits on the hand).
    """

    palm_points: np.ndarray
    bone_lengths: np.ndarray
    half_thickness: np.ndarray
    nail_fraction: np.ndarray
    s6_offset: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        object.__setattr__(self, "palm_points", _frozen(
            as_float_array(self.palm_points, "palm_points", (6, 3))))
        object.__setattr__(self, "bone_lengths", _frozen(
            as_float_array(self.bone_lengths, "bone_lengths", (5, 3))))
        object.__setattr__(self, "half_thickness", _frozen(
            as_float_array(self.half_thickness, "half_thickness", (5,))))
        object.__setattr__(self, "nail_fraction", _frozen(
            as_float_array(self.nail_fraction, "nail_fraction", (5,))))

    @property
    def wrist(self) -> np.ndarray:
        return self.palm_points[0]

    def mcp(self, finger: int) -> np.ndarray:
        return self.palm_points[finger]


@dataclass(frozen=True)
class HandPose:
    """Global wrist pose plus 25 articulation angles.

    angles is (5 fingers, 5 angles) in ANGLE_NAMES column order.
    """

    translation: np.ndarray
    rotation: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation", _frozen(
            as_float_array(self.translation, "translation", (3,))))
        object.__setattr__(self, "rotation", _frozen(
            as_float_array(self.rotation, "rotation", (4,))))
        object.__setattr__(self, "angles", _frozen(
            as_float_array(self.angles, "angles", (5, 5))))

    @classmethod
    def rest(cls) -> "HandPose":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]), np.zeros((5, 5)))

    def articulation_vector(self) -> np.ndarray:
        """Flat (25,) copy of the articulation, row-major by finger."""
        return self.angles.reshape(25).copy()

    def with_global(self, translation=None, rotation=None) -> "HandPose":
        return replace(
            self,
            translation=self.translation if translation is None else translation,
            rotation=self.rotation if rotation is None else rotation,
        )


FRAME_TAGS = ("tracker", "camera", "palm")

# Rows of [W, M1..M5] within the 21-joint serialization.
_PALM_ROWS = [0] + [1 + 4 * (f - 1) for f in FINGERS]


@dataclass(frozen=True)
class Skeleton:
    """21 joint positions (mm) in a tagged coordinate frame."""

    points: np.ndarray
    frame: str = "tracker"

    def __post_init__(self):
        pts = as_float_array(self.points, "points", (N_JOINTS, 3))
        if self.frame not in FRAME_TAGS:
            raise InvalidInputError(
                f"unknown frame tag {self.frame!r}; expected one of {FRAME_TAGS}")
        object.__setattr__(self, "points", _frozen(pts))

    def __getitem__(self, joint: JointId) -> np.ndarray:
        return self.points[int(joint)]

    def finger_chain(self, finger: int) -> np.ndarray:
        """(4, 3) rows [M, P, D, T] for finger 1..5 (read-only view)."""
        if finger not in FINGERS:
            raise InvalidInputError(f"finger index must be 1..5, got {finger}")
        base = 1 + 4 * (finger - 1)
        return self.points[base:base + 4]

    def palm(self) -> np.ndarray:
        """(6, 3) rows [W, M1..M5]."""
        return self.points[_PALM_ROWS]

    def transformed(self, X: RigidTransform, frame: str) -> "Skeleton":
        return Skeleton(X.apply(self.points), frame)


def validate_shape(shape: HandShape) -> ValidationReport:
    """Check a HandShape for physical plausibility; returns violations."""
    v: list[str] = []
    if not np.all(np.isfinite(shape.palm_points)):
        v.append("palm points contain non-finite values")
    if not np.all(np.isfinite(shape.bone_lengths)):
        v.append("bone lengths contain non-finite values")
    for f, name in zip(FINGERS, FINGER_NAMES):
        for b, bname in enumerate(BONE_NAMES):
            if shape.bone_lengths[f - 1, b] <= 0.0:
                v.append(f"nonpositive bone length: {name} {bname}")
        if shape.half_thickness[f - 1] <= 0.0:
            v.append(f"nonpositive half thickness: {name}")
        lam = shape.nail_fraction[f - 1]
        if not (0.0 < lam < 1.0):
            v.append(f"nail fraction out of range (0, 1): {name} ({lam:g})")
    # Palm points pairwise distinct.
    pts = shape.palm_points
    for i in range(6):
        for j in range(i + 1, 6):
            if np.linalg.norm(pts[i] - pts[j]) < 1e-6:
                v.append(f"palm points {i} and {j} coincide")
    # Orientation recovery needs non-collinear palm points.
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] < 1e-6:
        v.append("palm points are collinear (palm frame is undetermined)")
    # Finger rest directions must be well defined and not parallel to the
    # palm normal (the flexion axis would vanish).
    z = np.array([0.0, 0.0, 1.0])
    for f, name in zip(FINGERS, FINGER_NAMES):
        u = pts[f] - pts[0]
        n = np.linalg.norm(u)
        if n < 1e-6:
            continue  # already reported as coincident
        if np.linalg.norm(np.cross(z, u / n)) < 1e-6:
            v.append(f"knuckle direction parallel to palm normal: {name}")
    return ValidationReport(tuple(v))


def ensure_valid_shape(shape: HandShape) -> None:
    """validate_shape + raise_if_failed, memoizing the last good shape.

    HandShape is immutable, so revalidating the same object cannot change
    the answer; per-frame callers hit this in tight loops.
    """
    global _last_valid_shape
    if shape is _last_valid_shape:
        return
    validate_shape(shape).raise_if_failed("invalid shape")
    _last_valid_shape = shape


_last_valid_shape: HandShape | None = None


def validate_pose(pose: HandPose, limits: JointLimits = DEFAULT_LIMITS) -> ValidationReport:
    """Check finiteness, unit quaternion (1e-9), and joint limits."""
    v: list[str] = []
    if not np.all(np.isfinite(pose.translation)):
        v.append("translation contains non-finite values")
    if not np.all(np.isfinite(pose.rotation)):
        v.append("rotation contains non-finite values")
    else:
        n = float(np.linalg.norm(pose.rotation))
        if abs(n - 1.0) > 1e-9:
            v.append(f"rotation quaternion norm {n:.12g} is not 1 within 1e-9")
    if not np.all(np.isfinite(pose.angles)):
        v.append("angles contain non-finite values")
    elif np.any(pose.angles < limits.lower) or np.any(pose.angles > limits.upper):
        for f, fname in zip(FINGERS, FINGER_NAMES):
            row = pose.angles[f - 1]
            for k, aname in enumerate(ANGLE_NAMES):
                if not (limits.lower[k] <= row[k] <= limits.upper[k]):
                    v.append(
                        f"{fname} {aname} {np.degrees(row[k]):.6g} deg outside "
                        f"[{np.degrees(limits.lower[k]):.6g}, "
                        f"{np.degrees(limits.upper[k]):.6g}] deg")
    return ValidationReport(tuple(v))


def skeleton_consistency(skeleton: Skeleton, shape: HandShape,
                         tau_plane: float = 1e-6,
                         tau_len: float = 1e-6) -> ValidationReport:
    """Check bone lengths (tau_len, mm) and per-finger coplanarity (tau_plane, mm).

    Coplanarity is the max distance of a finger's M, P, D, T from their
    best-fit plane; a straight finger passes trivially.
    """
    v: list[str] = []
    if not np.all(np.isfinite(skeleton.points)):
        return ValidationReport(("skeleton contains non-finite joints",))
    for f, name in zip(FINGERS, FINGER_NAMES):
        chain = skeleton.finger_chain(f)
        lengths = np.linalg.norm(np.diff(chain, axis=0), axis=1)
        for b, bname in enumerate(BONE_NAMES):
            want = shape.bone_lengths[f - 1, b]
            got = lengths[b]
            if abs(got - want) > tau_len:
                v.append(
                    f"{name} {bname} bone length {got:.6g} mm deviates from "
                    f"{want:.6g} mm beyond {tau_len:g}")
        centered = chain - chain.mean(axis=0)
        # Smallest-singular-direction residual = distance from best-fit plane.
        _, s, Vt = np.linalg.svd(centered)
        normal = Vt[2]
        dev = float(np.max(np.abs(centered @ normal)))
        if dev > tau_plane:
            v.append(
                f"{name} joints deviate {dev:.6g} mm from a common plane "
                f"beyond {tau_plane:g}")
    return ValidationReport(tuple(v))


def default_shape() -> HandShape:
    """A plausible right-hand geometry used by docs, demos, and defaults."""
    palm = np.array([
        [0.0, 0.0, 0.0],      # W
        [28.0, 38.0, -6.0],   # M1 thumb
        [76.0, 24.0, 0.0],    # M2 index
        [80.0, 0.0, 0.0],     # M3 middle
        [74.0, -22.0, 0.0],   # M4 ring
        [64.0, -42.0, 0.0],   # M5 little
    ])
    bones = np.array([
        [34.0, 28.0, 24.0],
        [45.0, 25.0, 22.0],
        [48.0, 28.0, 24.0],
        [44.0, 26.0, 23.0],
        [36.0, 20.0, 19.0],
    ])
    r = np.array([7.5, 6.5, 6.5, 6.0, 5.5])
    lam = np.full(5, 0.5)
    s6 = RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]),
                        np.array([40.0, 0.0, 14.0]))
    return HandShape(palm, bones, r, lam, s6)
