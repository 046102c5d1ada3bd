"""Capture-schedule generation and coverage auditing.

Articulation coverage comes from the 32 extremal poses (each finger either
maximally bent or maximally extended, 2^5 combinations) and the 496
unordered pairs between them: a schemed capture transitions through every
pair once, sweeping the straight line between the two extremal angle
vectors. Viewpoint coverage divides the viewing hemisphere into 16 regions,
4 uniform bins along each of two rotation axes (azimuth and elevation).

The paper-scale schedule allocates 3093 frames per transition (1.534 M
schemed frames), plus random-articulation segments (375/1534 of the schemed
budget, spread over the 16 regions) and an egocentric part (290/1534, not
tied to a hemisphere region, region id -1). The precise viewpoint axes and
per-region instruction script behind the published dataset are not
documented anywhere; the parameterization below is this package's fixed
convention, not a reconstruction.

Angle conventions for viewpoints: direction d = (x, y, z), unit norm,
z >= 0; azimuth = atan2(y, x) wrapped to [0, 2*pi); elevation = asin(z) in
[0, pi/2]. Bins are half-open with the boundary belonging to the
lower-index bin; the zenith (elevation exactly pi/2) belongs to elevation
bin 3. Region id = elevation_bin * 4 + azimuth_bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import (DEFAULT_LIMITS, DIP, FLEXION, PIP, HandPose, JointLimits,
                    validate_pose)
from .transforms import (quat_from_axis_angle, quat_multiply, quat_rotate,
                         quat_slerp, random_quat)
from .validation import as_float_array, check_finite

N_EXTREMAL = 32
N_PAIRS = 496
FRAMES_PER_TRANSITION = 3093
# Dataset part sizes relative to the schemed part: 1.534 M schemed,
# 375 K random, 290 K egocentric.
RANDOM_BUDGET = 375 / 1534
EGOCENTRIC_BUDGET = 290 / 1534

_VIEW_AXIS = np.array([0.0, 0.0, 1.0])
_FLEX_ANGLES = (FLEXION, PIP, DIP)


def enumerate_extremal(limits: JointLimits = DEFAULT_LIMITS) -> tuple[HandPose, ...]:
    """All 32 extremal poses, ordered by 5-bit code.

    Bit f-1 of the code controls finger f: set = maximally bent (flexion
    angles at their upper limits), clear = extended (at their lower
    limits). Twist and abduction stay zero; the global pose is identity.
    Code 0 is the all-extended pose, code 31 the full fist.
    """
    poses = []
    for code in range(N_EXTREMAL):
        angles = np.zeros((5, 5))
        for f in range(5):
            bent = (code >> f) & 1
            for k in _FLEX_ANGLES:
                angles[f, k] = limits.upper[k] if bent else limits.lower[k]
        poses.append(HandPose(np.zeros(3), np.array([1.0, 0, 0, 0]), angles))
    return tuple(poses)


def enumerate_pairs() -> tuple[tuple[int, int], ...]:
    """The 496 unordered extremal-pose pairs (i, j), i < j, lexicographic."""
    return tuple((i, j) for i in range(N_EXTREMAL)
                 for j in range(i + 1, N_EXTREMAL))


def interpolate_transition(a: HandPose, b: HandPose, n: int,
                           limits: JointLimits = DEFAULT_LIMITS) -> list[HandPose]:
    """n poses sweeping a -> b; endpoints exact.

    Articulation angles interpolate linearly, translation linearly, and
    global rotation along the shortest great-circle arc. Within box limits
    linear interpolation keeps every intermediate pose valid.
    """
    if n < 2:
        raise InvalidInputError("a transition needs at least 2 frames")
    validate_pose(a, limits).raise_if_failed("transition start")
    validate_pose(b, limits).raise_if_failed("transition end")
    # rounding in the lerp must not push an angle past an endpoint at a limit
    lo = np.minimum(a.angles, b.angles)
    hi = np.maximum(a.angles, b.angles)
    out = [a]
    for i in range(1, n - 1):
        s = i / (n - 1)
        out.append(HandPose(
            (1.0 - s) * a.translation + s * b.translation,
            quat_slerp(a.rotation, b.rotation, s),
            np.clip((1.0 - s) * a.angles + s * b.angles, lo, hi)))
    out.append(b)
    return out


def viewpoint_region(direction) -> int:
    """Region id 0..15 for a unit direction in the viewing hemisphere."""
    d = as_float_array(direction, "direction", (3,))
    check_finite(d, "direction")
    norm = float(np.linalg.norm(d))
    if abs(norm - 1.0) > 1e-6:
        raise InvalidInputError(f"direction norm {norm:.6g} is not 1")
    if d[2] < 0.0:
        raise InvalidInputError("direction lies outside the viewing hemisphere")
    az = math.atan2(d[1], d[0]) % (2.0 * math.pi)
    el = math.asin(min(d[2] / norm, 1.0))
    az_bin = min(max(math.ceil(az / (math.pi / 2.0)) - 1, 0), 3)
    el_bin = min(max(math.ceil(el / (math.pi / 8.0)) - 1, 0), 3)
    return el_bin * 4 + az_bin


@dataclass(frozen=True)
class ViewpointRegion:
    """One cell of the 4x4 hemisphere partition (bounds in radians)."""

    region_id: int
    az_lo: float
    az_hi: float
    el_lo: float
    el_hi: float

    def contains(self, direction) -> bool:
        return viewpoint_region(direction) == self.region_id

    def center_direction(self) -> np.ndarray:
        az = 0.5 * (self.az_lo + self.az_hi)
        el = 0.5 * (self.el_lo + self.el_hi)
        return direction_from_angles(az, el)


def hemisphere_regions() -> tuple[ViewpointRegion, ...]:
    regions = []
    for el_bin in range(4):
        for az_bin in range(4):
            regions.append(ViewpointRegion(
                el_bin * 4 + az_bin,
                az_bin * math.pi / 2.0, (az_bin + 1) * math.pi / 2.0,
                el_bin * math.pi / 8.0, (el_bin + 1) * math.pi / 8.0))
    return tuple(regions)


def direction_from_angles(azimuth: float, elevation: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth),
                     math.sin(elevation)])


def view_direction(pose: HandPose) -> np.ndarray:
    """The pose's viewpoint direction: its rotation applied to +z."""
    return quat_rotate(pose.rotation, _VIEW_AXIS)


def region_rotation(region_id: int) -> np.ndarray:
    """A representative rotation placing the view axis at the region center."""
    if not 0 <= region_id < 16:
        raise InvalidInputError("region_id must be in 0..15")
    d = hemisphere_regions()[region_id].center_direction()
    return _rotation_to(d)


def _rotation_to(d: np.ndarray) -> np.ndarray:
    """Minimal rotation taking the view axis +z onto unit direction d."""
    c = float(np.dot(_VIEW_AXIS, d))
    axis = np.cross(_VIEW_AXIS, d)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        if c > 0.0:
            return np.array([1.0, 0.0, 0.0, 0.0])
        return np.array([0.0, 1.0, 0.0, 0.0])  # antipode: flip about x
    return quat_from_axis_angle(axis / n, math.atan2(n, c))


@dataclass(frozen=True)
class Segment:
    """One schedule entry: what to capture, for how long, from where.

    kind: "pair" (schemed transition), "random", or "egocentric".
    pair: extremal pose indices (i, j) for schemed segments, else None.
    region_id: hemisphere region 0..15, or -1 for egocentric segments.
    """

    kind: str
    pair: tuple[int, int] | None
    region_id: int
    n_frames: int

    def __post_init__(self):
        if self.kind not in ("pair", "random", "egocentric"):
            raise InvalidInputError(f"unknown segment kind {self.kind!r}")
        if (self.kind == "pair") != (self.pair is not None):
            raise InvalidInputError("pair segments (only) must carry pose ids")
        if self.n_frames < 0:
            raise InvalidInputError("n_frames must be non-negative")


@dataclass(frozen=True)
class CaptureSchedule:
    segments: tuple[Segment, ...]

    @property
    def total_frames(self) -> int:
        return sum(s.n_frames for s in self.segments)


def build_schedule(frames_per_transition: int = FRAMES_PER_TRANSITION, *,
                   include_random: bool = True,
                   include_egocentric: bool = True) -> CaptureSchedule:
    """Deterministic full-coverage schedule.

    Schemed part: the 496 pairs in lexicographic order, one segment each,
    cycling through the 16 viewpoint regions (pair k gets region k mod 16).
    Random part: round(schemed * 375/1534) frames split evenly over the 16
    regions. Egocentric part: round(schemed * 290/1534) frames, region -1.
    """
    if frames_per_transition < 2:
        raise InvalidInputError("frames_per_transition must be >= 2")
    segments = [Segment("pair", pair, k % 16, frames_per_transition)
                for k, pair in enumerate(enumerate_pairs())]
    schemed = frames_per_transition * N_PAIRS
    if include_random:
        total = round(schemed * RANDOM_BUDGET)
        base, extra = divmod(total, 16)
        for r in range(16):
            n = base + (1 if r < extra else 0)
            if n > 0:
                segments.append(Segment("random", None, r, n))
    if include_egocentric:
        n = round(schemed * EGOCENTRIC_BUDGET)
        if n > 0:
            segments.append(Segment("egocentric", None, -1, n))
    return CaptureSchedule(tuple(segments))


@dataclass(frozen=True)
class ScheduledFrame:
    pose: HandPose
    segment_index: int
    region_id: int


def expand_schedule(schedule: CaptureSchedule, *,
                    limits: JointLimits = DEFAULT_LIMITS, seed: int = 0):
    """Yield one ScheduledFrame per scheduled frame, in order.

    Schemed segments interpolate between their extremal poses with the
    segment's region rotation applied to every frame. Random segments draw
    articulations uniformly within limits and a viewpoint uniformly inside
    their region (plus a uniform roll about the view axis). Egocentric
    segments, standing in for body-mounted capture the paper does not
    parameterize, draw articulations within limits and a full-sphere
    rotation. Randomness is deterministic per segment: segment s uses
    numpy's SeedSequence(seed, spawn_key=(1, s)).
    """
    extremal = enumerate_extremal(limits)
    regions = hemisphere_regions()
    for s_idx, seg in enumerate(schedule.segments):
        if seg.n_frames == 0:
            continue
        if seg.kind == "pair":
            rot = region_rotation(seg.region_id)
            i, j = seg.pair
            if seg.n_frames == 1:
                poses = [extremal[i]]
            else:
                poses = interpolate_transition(extremal[i], extremal[j],
                                               seg.n_frames, limits)
            for pose in poses:
                yield ScheduledFrame(pose.with_global(rotation=rot),
                                     s_idx, seg.region_id)
            continue
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(1, s_idx)))
        for _ in range(seg.n_frames):
            angles = rng.uniform(limits.lower, limits.upper, (5, 5))
            if seg.kind == "random":
                reg = regions[seg.region_id]
                az = rng.uniform(reg.az_lo, reg.az_hi)
                el = rng.uniform(reg.el_lo, reg.el_hi)
                roll = quat_from_axis_angle(_VIEW_AXIS,
                                            rng.uniform(0.0, 2.0 * math.pi))
                rot = quat_multiply(_rotation_to(direction_from_angles(az, el)),
                                    roll)
            else:
                rot = random_quat(rng)
            yield ScheduledFrame(HandPose(np.zeros(3), rot, angles),
                                 s_idx, seg.region_id)


@dataclass(frozen=True)
class CoverageReport:
    """Histograms over a pose log.

    region_counts: frames per hemisphere region (16,).
    outside_count: frames whose view direction left the hemisphere.
    pair_counts: frames assigned to each extremal pair (496,), by nearest
        transition segment in 25-D articulation space.
    """

    region_counts: np.ndarray
    outside_count: int
    pair_counts: np.ndarray


def coverage_report(poses, limits: JointLimits = DEFAULT_LIMITS) -> CoverageReport:
    poses = list(poses)
    region_counts = np.zeros(16, dtype=np.int64)
    pair_counts = np.zeros(N_PAIRS, dtype=np.int64)
    outside = 0
    if not poses:
        return CoverageReport(region_counts, 0, pair_counts)
    extremal = enumerate_extremal(limits)
    corners = np.array([p.articulation_vector() for p in extremal])
    pairs = enumerate_pairs()
    A = corners[[i for i, _ in pairs]]
    AB = corners[[j for _, j in pairs]] - A
    ab2 = np.maximum(np.einsum("ij,ij->i", AB, AB), 1e-300)
    for pose in poses:
        d = view_direction(pose)
        if d[2] < 0.0:
            outside += 1
        else:
            region_counts[viewpoint_region(d)] += 1
        w = pose.articulation_vector() - A
        t = np.clip(np.einsum("ij,ij->i", w, AB) / ab2, 0.0, 1.0)
        resid = w - t[:, None] * AB
        pair_counts[int(np.argmin(np.einsum("ij,ij->i", resid, resid)))] += 1
    return CoverageReport(region_counts, outside, pair_counts)
