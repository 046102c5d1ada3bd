"""Tracker-to-camera extrinsic calibration.

The magnetic tracker reports 3D sensor positions in its own frame; the
depth camera observes the same sensor as a 2D pixel. Given >= 6 such
correspondences and the camera intrinsics, solve_pnp estimates the rigid
transform mapping tracker coordinates into the camera frame by minimizing
squared pixel reprojection error: a direct linear transform on normalized
image coordinates seeds a damped Gauss-Newton refinement with the rotation
updated on its manifold (left multiplicative perturbation).

The camera is an undistorted pinhole: u = fx*x/z + cx, v = fy*y/z + cy.
A lens-distortion model would slot into project()/_residuals() if ever
needed; only intrinsics are modeled here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (BehindCameraError, ConvergenceError,
                     DegenerateGeometryError, FrameMismatchError,
                     InvalidInputError)
from .model import Skeleton
from .transforms import (RigidTransform, matrix_to_quat, quat_from_rotvec,
                         quat_to_matrix)
from .validation import as_float_array, check_finite

MIN_CORRESPONDENCES = 6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels; image size defaults to 640x480."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise InvalidInputError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image size must be positive")
        if not (0.0 <= self.cx <= self.width and 0.0 <= self.cy <= self.height):
            raise InvalidInputError("principal point must lie inside the image")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))


@dataclass(frozen=True)
class Correspondence:
    """One 3D tracker-frame point and its observed pixel."""

    tracker_point: np.ndarray
    pixel: np.ndarray

    def __post_init__(self):
        p = as_float_array(self.tracker_point, "tracker_point", (3,))
        px = as_float_array(self.pixel, "pixel", (2,))
        check_finite(p, "tracker_point")
        check_finite(px, "pixel")
        p.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "tracker_point", p)
        object.__setattr__(self, "pixel", px)


@dataclass(frozen=True)
class PnPResult:
    transform: RigidTransform
    rms_px: float
    n_iter: int
    converged: bool


def project(points: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Project camera-frame points (mm) to pixels.

    Accepts a single (3,) point or an (N, 3) array; output shape follows.
    Points at or behind the camera plane (z <= 0) raise BehindCameraError.
    """
    pts = as_float_array(points, "points")
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError("points must have shape (3,) or (N, 3)")
    check_finite(pts, "points")
    z = pts[:, 2]
    if np.any(z <= 0.0):
        raise BehindCameraError(
            f"{int(np.sum(z <= 0.0))} point(s) have depth z <= 0")
    uv = np.column_stack((K.fx * pts[:, 0] / z + K.cx,
                          K.fy * pts[:, 1] / z + K.cy))
    return uv[0] if single else uv


def unproject(pixels: np.ndarray, depth_mm, K: CameraIntrinsics) -> np.ndarray:
    """Back-project pixels to camera-frame points at the given depth(s)."""
    px = as_float_array(pixels, "pixels")
    single = px.ndim == 1
    px = np.atleast_2d(px)
    if px.ndim != 2 or px.shape[1] != 2:
        raise InvalidInputError("pixels must have shape (2,) or (N, 2)")
    check_finite(px, "pixels")
    z = np.broadcast_to(np.asarray(depth_mm, dtype=np.float64),
                        (px.shape[0],)).copy()
    check_finite(z, "depth_mm")
    if np.any(z <= 0.0):
        raise BehindCameraError("depth must be positive")
    pts = np.column_stack(((px[:, 0] - K.cx) / K.fx * z,
                           (px[:, 1] - K.cy) / K.fy * z,
                           z))
    return pts[0] if single else pts


def _unpack(corrs) -> tuple[np.ndarray, np.ndarray]:
    if len(corrs) < MIN_CORRESPONDENCES:
        raise InvalidInputError(
            f"need at least {MIN_CORRESPONDENCES} correspondences, "
            f"got {len(corrs)}")
    pts = np.array([c.tracker_point for c in corrs], dtype=np.float64)
    px = np.array([c.pixel for c in corrs], dtype=np.float64)
    return pts, px


def _dlt(pts: np.ndarray, xn: np.ndarray) -> RigidTransform:
    """Linear 12-parameter estimate of [R|t] from normalized coordinates."""
    n = pts.shape[0]
    A = np.zeros((2 * n, 12))
    A[0::2, 0:3] = pts
    A[0::2, 3] = 1.0
    A[0::2, 8:11] = -xn[:, 0:1] * pts
    A[0::2, 11] = -xn[:, 0]
    A[1::2, 4:7] = pts
    A[1::2, 7] = 1.0
    A[1::2, 8:11] = -xn[:, 1:2] * pts
    A[1::2, 11] = -xn[:, 1]
    _, s, Vt = np.linalg.svd(A, full_matrices=False)
    # A full-rank configuration leaves exactly one near-null direction (the
    # solution). A second small singular value means the points are
    # collinear/coplanar-degenerate and the system is rank deficient.
    if s[-2] <= 1e-9 * s[0]:
        raise DegenerateGeometryError(
            "correspondences are degenerate (rank-deficient linear system)")
    P = Vt[-1].reshape(3, 4)
    M, p4 = P[:, :3], P[:, 3]
    U, sm, Vm = np.linalg.svd(M)
    scale = sm.mean()
    if scale <= 0.0 or not np.isfinite(scale):
        raise DegenerateGeometryError("linear initialization collapsed")
    R = U @ Vm
    if np.linalg.det(R) < 0.0:
        # det(M) = scale^3 * det(R): a negative determinant means the null
        # vector came out with a negative overall scale, so flip P whole.
        R, p4 = -R, -p4
    return RigidTransform(matrix_to_quat(R), p4 / scale)


def _residuals(pts: np.ndarray, px: np.ndarray, R: np.ndarray,
               t: np.ndarray, K: CameraIntrinsics):
    cam = pts @ R.T + t
    z = cam[:, 2]
    u = K.fx * cam[:, 0] / z + K.cx
    v = K.fy * cam[:, 1] / z + K.cy
    r = np.column_stack((u - px[:, 0], v - px[:, 1])).ravel()
    return cam, r


def _jacobian(cam: np.ndarray, t: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Jacobian of pixel residuals w.r.t. (rotation-vector, translation).

    The rotation is perturbed on the left: R <- exp([w]x) R, under which a
    camera-frame point moves by w x (cam - t); translation moves it by I.
    """
    n = cam.shape[0]
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    # d(pixel)/d(cam point)
    du = np.zeros((n, 3))
    dv = np.zeros((n, 3))
    du[:, 0] = K.fx / z
    du[:, 2] = -K.fx * x / z**2
    dv[:, 1] = K.fy / z
    dv[:, 2] = -K.fy * y / z**2
    # d(cam point)/dw = -skew(cam - t)
    rel = cam - t
    dcam_dw = np.zeros((n, 3, 3))
    dcam_dw[:, 0, 1] = rel[:, 2]
    dcam_dw[:, 0, 2] = -rel[:, 1]
    dcam_dw[:, 1, 0] = -rel[:, 2]
    dcam_dw[:, 1, 2] = rel[:, 0]
    dcam_dw[:, 2, 0] = rel[:, 1]
    dcam_dw[:, 2, 1] = -rel[:, 0]
    J = np.zeros((2 * n, 6))
    J[0::2, :3] = np.einsum("ni,nij->nj", du, dcam_dw)
    J[1::2, :3] = np.einsum("ni,nij->nj", dv, dcam_dw)
    J[0::2, 3:] = du
    J[1::2, 3:] = dv
    return J


def _rms(r: np.ndarray) -> float:
    # Per-point pixel distance RMS: r holds (du, dv) interleaved.
    return float(np.sqrt(np.mean(r[0::2] ** 2 + r[1::2] ** 2)))


def solve_pnp(corrs, K: CameraIntrinsics, *, max_iter: int = 100,
              grad_tol: float = 1e-12) -> PnPResult:
    """Estimate the tracker-to-camera transform from >= 6 correspondences.

    Returns the transform minimizing summed squared pixel reprojection
    error together with the reprojection RMS (pixel distance per point).
    The result is independent of correspondence ordering. Raises
    DegenerateGeometryError for rank-deficient configurations (e.g. all
    points collinear) and ConvergenceError, carrying best-so-far
    diagnostics, if the iteration cap is reached with no stop satisfied.
    """
    pts, px = _unpack(corrs)
    # Collinear tracker points never determine the pose.
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= max(1e-9, 1e-12 * sv[0]):
        raise DegenerateGeometryError("tracker points are collinear")
    xn = np.column_stack(((px[:, 0] - K.cx) / K.fx,
                          (px[:, 1] - K.cy) / K.fy))
    init = _dlt(pts, xn)
    R = quat_to_matrix(init.rotation)
    t = np.array(init.translation)

    cam, r = _residuals(pts, px, R, t, K)
    if np.any(cam[:, 2] <= 0.0):
        raise DegenerateGeometryError(
            "linear initialization places points behind the camera")
    cost = float(r @ r)
    lam = 1e-6
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iter + 1):
        J = _jacobian(cam, t, K)
        g = J.T @ r
        if np.max(np.abs(g)) <= grad_tol:
            converged = True
            break
        H = J.T @ J
        step_ok = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(H + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            R_new = quat_to_matrix(
                matrix_to_quat(_exp_so3(delta[:3]) @ R))
            t_new = t + delta[3:]
            cam_new, r_new = _residuals(pts, px, R_new, t_new, K)
            cost_new = float(r_new @ r_new)
            if np.all(cam_new[:, 2] > 0.0) and cost_new <= cost:
                step_ok = True
                break
            lam *= 10.0
        if not step_ok:
            converged = True  # no descent direction left: stationary
            break
        step_norm = float(np.linalg.norm(delta))
        improvement = cost - cost_new
        R, t, cam, r, cost = R_new, t_new, cam_new, r_new, cost_new
        lam = max(lam * 0.1, 1e-12)
        # Float-rounding floor: near the optimum the gradient can idle at
        # ~1e-10 while steps shrink below representable progress.
        if step_norm <= 1e-14 or improvement <= 1e-15 * (cost + 1e-30):
            converged = True
            break
    result = PnPResult(RigidTransform(matrix_to_quat(R), t), _rms(r),
                       n_iter, converged)
    if not converged:
        raise ConvergenceError(
            f"PnP did not converge in {max_iter} iterations "
            f"(RMS {result.rms_px:.3e} px)", diagnostics=result)
    return result


def _exp_so3(w: np.ndarray) -> np.ndarray:
    """Rotation matrix exp([w]x) via the quaternion exponential."""
    return quat_to_matrix(quat_from_rotvec(w))


def apply_calibration(skel: Skeleton, X: RigidTransform) -> Skeleton:
    """Map a tracker-frame skeleton into the camera frame."""
    if skel.frame != "tracker":
        raise FrameMismatchError(
            f"expected a tracker-frame skeleton, got {skel.frame!r}")
    return skel.transformed(X, "camera")
