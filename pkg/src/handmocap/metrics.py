"""Evaluation measures for estimated skeletons.

Errors are per-joint Euclidean distances in millimetres, no palm-relative
normalization. Two aggregate curves are supported: the fraction of joints
within an error bound (pooled over all frames) and the stricter per-frame
measure counting a frame only when its worst joint is within the bound.
The joint subset is configurable so runs can be scored on the common
subset shared with an external benchmark's markup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrameMismatchError, InvalidInputError
from .model import JOINT_ORDER, JointId, Skeleton
from .validation import as_float_array

ALL_JOINTS = tuple(JOINT_ORDER)


def _subset_indices(subset) -> np.ndarray:
    ids = [int(j) for j in (ALL_JOINTS if subset is None else subset)]
    if not ids:
        raise InvalidInputError("joint subset is empty")
    if len(set(ids)) != len(ids):
        raise InvalidInputError("joint subset contains duplicates")
    for j in ids:
        if not 0 <= j < len(ALL_JOINTS):
            raise InvalidInputError(f"joint id {j} out of range")
    return np.array(ids, dtype=np.intp)


def joint_errors(est: Skeleton, gt: Skeleton, subset=None) -> np.ndarray:
    """Per-joint Euclidean distances (mm) over the given JointId subset.

    Both skeletons must share a frame tag, and every selected joint must be
    present (finite) in both.
    """
    if est.frame != gt.frame:
        raise FrameMismatchError(
            f"skeleton frames differ: {est.frame!r} vs {gt.frame!r}")
    idx = _subset_indices(subset)
    a = est.points[idx]
    b = gt.points[idx]
    bad = ~(np.all(np.isfinite(a), axis=1) & np.all(np.isfinite(b), axis=1))
    if np.any(bad):
        names = [JointId(int(idx[k])).name for k in np.flatnonzero(bad)]
        raise InvalidInputError(f"joints missing (non-finite): {names}")
    return np.linalg.norm(a - b, axis=1)


@dataclass(frozen=True)
class ErrorRecord:
    """Per-joint errors for one frame. +inf marks an unrecovered joint."""

    timestamp_us: int
    errors: np.ndarray

    def __post_init__(self):
        e = as_float_array(self.errors, "errors")
        if e.ndim != 1 or e.size == 0:
            raise InvalidInputError("errors must be a non-empty 1-D array")
        if np.any(np.isnan(e)) or np.any(e < 0.0):
            raise InvalidInputError("errors must be non-negative (inf allowed)")
        e.setflags(write=False)
        object.__setattr__(self, "errors", e)
        object.__setattr__(self, "timestamp_us", int(self.timestamp_us))


def _stack(records) -> np.ndarray:
    records = list(records)
    if not records:
        raise InvalidInputError("no error records")
    width = records[0].errors.size
    for r in records:
        if r.errors.size != width:
            raise InvalidInputError(
                "error records must share one joint subset")
    return np.array([r.errors for r in records])


def joints_within(records, eps: float) -> float:
    """Fraction of all joint errors <= eps, pooled over frames."""
    if eps < 0.0:
        raise InvalidInputError("eps must be non-negative")
    e = _stack(records)
    return float(np.mean(e <= eps))


def frames_within(records, eps: float) -> float:
    """Fraction of frames whose worst joint error is <= eps."""
    if eps < 0.0:
        raise InvalidInputError("eps must be non-negative")
    e = _stack(records)
    return float(np.mean(e.max(axis=1) <= eps))


def split_9_1(frame_ids, seed: int) -> tuple[list, list]:
    """Deterministic 9:1 train/validation partition.

    The validation part holds round(n/10) ids (half-up); the split is a
    seeded uniform permutation, so identical inputs and seed always give
    identical parts. Returns (train, validation).
    """
    ids = list(frame_ids)
    n = len(ids)
    if n == 0:
        raise InvalidInputError("no frame ids to split")
    n_val = (n + 5) // 10
    perm = np.random.default_rng(seed).permutation(n)
    val = [ids[k] for k in perm[:n_val]]
    train = [ids[k] for k in perm[n_val:]]
    return train, val


def curve_export(records, eps_grid) -> list[tuple[float, float, float]]:
    """Rows (eps, joints_within, frames_within) over a sorted eps grid."""
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise InvalidInputError("eps grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("eps grid must be strictly increasing")
    e = _stack(records)
    worst = e.max(axis=1)
    rows = []
    for eps in grid:
        if eps < 0.0:
            raise InvalidInputError("eps must be non-negative")
        rows.append((eps, float(np.mean(e <= eps)),
                     float(np.mean(worst <= eps))))
    return rows
