"""Estimator-style wrappers over the functional core.

These adapt the two batch-shaped stages to the fit/transform/predict
conventions (get_params/set_params, attributes learned by fit carrying a
trailing underscore), so they compose with pipelines and model-selection
tooling. The functional API stays the primary interface; these wrappers
add no behavior of their own.

Flat array layouts:

- sensor rows: (n, 42), per row the six readings S1..S6 concatenated as
  (x, y, z, qw, qx, qy, qz) each.
- joint rows: (n, 63), the 21 joints in serialization order, (x, y, z)
  each; unrecovered joints are NaN.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .annotation import annotate_frame
from .calibration import CameraIntrinsics, Correspondence, project, solve_pnp
from .errors import InvalidInputError
from .kinematics import SENSOR_IDS, SensorFrame, SensorReading
from .model import HandShape, default_shape

N_SENSOR_FEATURES = len(SENSOR_IDS) * 7
N_JOINT_FEATURES = 63


def frame_to_row(frame: SensorFrame) -> np.ndarray:
    """Flatten a SensorFrame to a (42,) row (S1..S6 order)."""
    return np.concatenate([np.concatenate([r.position, r.orientation])
                           for r in frame.readings])


def row_to_frame(row: np.ndarray, timestamp_us: int = 0) -> SensorFrame:
    """Rebuild a SensorFrame from a (42,) row."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (N_SENSOR_FEATURES,):
        raise InvalidInputError(
            f"expected a ({N_SENSOR_FEATURES},) row, got {row.shape}")
    readings = []
    for k, sid in enumerate(SENSOR_IDS):
        chunk = row[7 * k:7 * k + 7]
        readings.append(SensorReading(sid, chunk[:3], chunk[3:]))
    return SensorFrame(timestamp_us, tuple(readings))


class FrameAnnotator(TransformerMixin, BaseEstimator):
    """Transformer mapping flat sensor rows to flat joint rows.

    Stateless apart from parameter validation: fit only resolves the hand
    shape (None selects the default shape) and records the input width.

    Parameters mirror annotate_frame: shape, feasibility_tol (mm),
    residual_tol (mm).
    """

    def __init__(self, shape: HandShape | None = None,
                 feasibility_tol: float = 2.0, residual_tol: float = 1e-6):
        self.shape = shape
        self.feasibility_tol = feasibility_tol
        self.residual_tol = residual_tol

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != N_SENSOR_FEATURES:
            raise InvalidInputError(
                f"expected {N_SENSOR_FEATURES} columns, got {X.shape[1]}")
        if self.shape is not None and not isinstance(self.shape, HandShape):
            raise InvalidInputError("shape must be a HandShape or None")
        if self.feasibility_tol <= 0 or self.residual_tol <= 0:
            raise InvalidInputError("tolerances must be positive")
        self.shape_ = self.shape if self.shape is not None else default_shape()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "shape_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = np.empty((X.shape[0], N_JOINT_FEATURES))
        for i, row in enumerate(X):
            res = annotate_frame(row_to_frame(row, timestamp_us=i),
                                 self.shape_,
                                 feasibility_tol=self.feasibility_tol,
                                 residual_tol=self.residual_tol)
            out[i] = res.positions.ravel()
        return out


class TrackerCameraCalibrator(BaseEstimator):
    """PnP calibration with a fit/predict interface.

    fit(X, y) takes tracker-frame points X (n, 3) and observed pixels
    y (n, 2) and estimates the tracker-to-camera transform; predict(X)
    reprojects tracker points through the fitted transform. Attributes
    after fit: transform_, rotation_, translation_, rms_, n_iter_.
    """

    def __init__(self, intrinsics: CameraIntrinsics | None = None,
                 max_iter: int = 100, grad_tol: float = 1e-12):
        self.intrinsics = intrinsics
        self.max_iter = max_iter
        self.grad_tol = grad_tol

    def fit(self, X, y):
        if self.intrinsics is None:
            raise InvalidInputError(
                "intrinsics must be set before calibration")
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        if X.shape[1] != 3:
            raise InvalidInputError("X must be (n, 3) tracker points")
        if y.shape != (X.shape[0], 2):
            raise InvalidInputError("y must be (n, 2) pixels")
        corrs = [Correspondence(p, px) for p, px in zip(X, y)]
        result = solve_pnp(corrs, self.intrinsics, max_iter=self.max_iter,
                           grad_tol=self.grad_tol)
        self.transform_ = result.transform
        self.rotation_ = result.transform.rotation
        self.translation_ = result.transform.translation
        self.rms_ = result.rms_px
        self.n_iter_ = result.n_iter
        self.n_features_in_ = 3
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "transform_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise InvalidInputError("X must be (n, 3) tracker points")
        return project(self.transform_.apply(X), self.intrinsics)
