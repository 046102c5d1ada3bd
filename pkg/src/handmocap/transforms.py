"""Quaternion and rigid-transform utilities.

Conventions used throughout the package:

- Quaternions are numpy arrays [w, x, y, z] (scalar first) and represent
  rotations acting on column vectors: rotate(q, v) = R(q) @ v.
- Rotation matrices are 3x3 with columns equal to the images of the world
  basis vectors.
- Lengths are millimetres, angles radians.
- compose(A, B) applies B first: (A o B)(x) = A(B(x)).

Composition/inversion of RigidTransform are exact group operations up to
floating-point rounding (~1e-12 relative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError

_EPS = np.finfo(np.float64).eps


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise InvalidInputError("quaternion norm is zero or non-finite")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (apply b's rotation first, then a's)."""
    # Python-float arithmetic: numpy scalar ops dominate otherwise.
    aw, ax, ay, az = np.asarray(a, dtype=np.float64).tolist()
    bw, bx, by, bz = np.asarray(b, dtype=np.float64).tolist()
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64).tolist()
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion, w >= 0 canonical sign."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 matrix, got shape {R.shape}")
    (r00, r01, r02), (r10, r11, r12), (r20, r21, r22) = R.tolist()
    t = r00 + r11 + r22
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r21 - r12) / s,
                      (r02 - r20) / s,
                      (r10 - r01) / s])
    elif r00 >= r11 and r00 >= r22:
        s = np.sqrt(1.0 + r00 - r11 - r22) * 2.0
        q = np.array([(r21 - r12) / s,
                      0.25 * s,
                      (r01 + r10) / s,
                      (r02 + r20) / s])
    elif r11 >= r22:
        s = np.sqrt(1.0 - r00 + r11 - r22) * 2.0
        q = np.array([(r02 - r20) / s,
                      (r01 + r10) / s,
                      0.25 * s,
                      (r12 + r21) / s])
    else:
        s = np.sqrt(1.0 - r00 - r11 + r22) * 2.0
        q = np.array([(r10 - r01) / s,
                      (r02 + r20) / s,
                      (r12 + r21) / s,
                      0.25 * s])
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate one vector or an (..., 3) stack of vectors."""
    R = quat_to_matrix(q)
    v = np.asarray(v, dtype=np.float64)
    return v @ R.T


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise InvalidInputError("rotation axis has zero norm")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) -> quaternion; small angles are exact."""
    rv = np.asarray(rv, dtype=np.float64)
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        return np.array([1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]]) / np.sqrt(
            1.0 + 0.25 * angle * angle)
    return quat_from_axis_angle(rv, angle)


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation along the shorter arc; endpoints exact."""
    a = quat_normalize(a)
    b = quat_normalize(b)
    if t <= 0.0:
        return a
    if t >= 1.0:
        return b
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = np.arccos(min(dot, 1.0))
    s = np.sin(theta)
    return quat_normalize((np.sin((1.0 - t) * theta) / s) * a
                          + (np.sin(t * theta) / s) * b)


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the relative rotation, in radians, sign-insensitive."""
    d = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return 2.0 * np.arccos(min(d, 1.0))


def rotation_angle(R: np.ndarray) -> float:
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (normalized 4D Gaussian)."""
    q = rng.normal(size=4)
    return quat_normalize(q)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (unit quaternion, wxyz) plus translation, x -> R x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4).copy()
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise InvalidInputError("rigid transform has non-finite entries")
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise InvalidInputError(
                f"quaternion norm {n:.9g} deviates from 1 beyond 1e-6")
        q = q / n
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "RigidTransform":
        M = np.asarray(M, dtype=np.float64)
        return cls(matrix_to_quat(M[:3, :3]), M[:3, 3])

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = quat_to_matrix(self.rotation)
        M[:3, 3] = self.translation
        return M

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to one point (3,) or a stack (..., 3)."""
        R = quat_to_matrix(self.rotation)
        return np.asarray(points, dtype=np.float64) @ R.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply `other` first."""
        return RigidTransform(
            quat_multiply(self.rotation, other.rotation),
            self.apply(other.translation),
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        qc = quat_conjugate(self.rotation)
        return RigidTransform(qc, -quat_rotate(qc, self.translation))


def kabsch(src: np.ndarray, dst: np.ndarray) -> tuple[RigidTransform, float]:
    """Best-fit rigid transform mapping src points onto dst (least squares).

    Returns (transform, rms_residual). Requires >= 3 non-collinear points for
    a unique rotation; collinear input raises.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InvalidInputError("kabsch expects matching (N, 3) arrays")
    if src.shape[0] < 3:
        raise InvalidInputError("kabsch needs at least 3 points")
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    A = src - cs
    B = dst - cd
    H = A.T @ B
    U, S, Vt = np.linalg.svd(H)
    # Rank must be >= 2 for the rotation to be determined.
    if S[1] <= max(1e-9, 1e-12 * S[0]):
        raise DegenerateGeometryError("kabsch input points are collinear")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cd - R @ cs
    res = A @ R.T - B  # centering cancels t
    rms = float(np.sqrt(np.mean(np.sum(res * res, axis=1))))
    return RigidTransform(matrix_to_quat(R), t), rms
