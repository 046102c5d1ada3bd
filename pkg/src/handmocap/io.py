"""File formats: CSV logs and YAML configuration.

All CSVs carry a header row; timestamps are plain integers and float
columns use the shortest decimal representation that reparses to the same
double, so write -> read is bit-exact and files stay diff-able. Full
precision is load-bearing, not cosmetic: sensor positions feed a two-circle
intersection whose lateral coordinate is sqrt-sensitive near tangency
(a straight finger), where truncating coordinates to d digits costs
sqrt(10^-d)-scale joint error, far above the truncation itself. YAML is
used for structured configuration (hand shape, camera intrinsics, rigid
transforms). Malformed content is reported with the offending file line or
field.

Formats:

- sensor log:       timestamp_us,sensor_id,x,y,z,qw,qx,qy,qz
- annotation:       timestamp_us,W_x,W_y,W_z,...,T5_z,status
                    (63 coordinate columns in JointId order; NaN for joints
                    that were not recovered; status "exact", "projected", or
                    "failed:i;j" listing 1-based failed fingers)
- timed events:     timestamp_us,id
- aligned pairs:    depth_id,sensor_id,gap_us,extrapolated
- correspondences:  x,y,z,u,v
- schedule:         kind,pose_a,pose_b,region_id,n_frames
- metric curves:    epsilon_mm,joints_within,frames_within
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np
import yaml

from .annotation import STATUS_FAILED
from .calibration import CameraIntrinsics, Correspondence
from .errors import ConfigError, InvalidInputError
from .kinematics import SENSOR_IDS, SensorFrame, SensorReading
from .model import JOINT_ORDER, N_JOINTS, HandShape
from .protocol import CaptureSchedule, Segment
from .sync import AlignedPair, TimedEvent
from .transforms import RigidTransform

SENSOR_LOG_HEADER = ("timestamp_us", "sensor_id",
                     "x", "y", "z", "qw", "qx", "qy", "qz")
ANNOTATION_HEADER = (("timestamp_us",)
                     + tuple(f"{j.name}_{ax}" for j in JOINT_ORDER
                             for ax in "xyz")
                     + ("status",))
EVENTS_HEADER = ("timestamp_us", "id")
PAIRS_HEADER = ("depth_id", "sensor_id", "gap_us", "extrapolated")
CORRESPONDENCE_HEADER = ("x", "y", "z", "u", "v")
SCHEDULE_HEADER = ("kind", "pose_a", "pose_b", "region_id", "n_frames")
CURVE_HEADER = ("epsilon_mm", "joints_within", "frames_within")


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_float(s: str, line_no: int, path) -> float:
    try:
        return float(s)
    except ValueError:
        raise InvalidInputError(
            f"{path}, line {line_no}: {s!r} is not a number") from None


def _parse_int(s: str, line_no: int, path) -> int:
    try:
        return int(s)
    except ValueError:
        raise InvalidInputError(
            f"{path}, line {line_no}: {s!r} is not an integer") from None


def _read_rows(path, header: tuple) -> list[tuple[int, list[str]]]:
    """CSV rows as (line_no, cells), header checked, lengths checked."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file, expected a header")
        if first != list(header):
            raise InvalidInputError(
                f"{path}: bad header {first!r}, expected {list(header)!r}")
        rows = []
        for line_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise InvalidInputError(
                    f"{path}, line {line_no}: expected {len(header)} fields, "
                    f"got {len(cells)}")
            rows.append((line_no, cells))
    return rows


def _write_rows(path, header: tuple, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# -- sensor logs --------------------------------------------------------------

def write_sensor_log(frames, path) -> None:
    rows = []
    for frame in frames:
        for r in frame.readings:
            rows.append((frame.timestamp_us, r.sensor_id,
                         *(_fmt(v) for v in r.position),
                         *(_fmt(v) for v in r.orientation)))
    _write_rows(path, SENSOR_LOG_HEADER, rows)


def read_sensor_log(path) -> list[SensorFrame]:
    """Read frames grouped by contiguous runs of equal timestamps."""
    frames: list[SensorFrame] = []
    pending: list[SensorReading] = []
    pending_ts: int | None = None

    def flush():
        if pending:
            frames.append(SensorFrame(pending_ts, tuple(pending)))
            pending.clear()

    for line_no, cells in _read_rows(path, SENSOR_LOG_HEADER):
        ts = _parse_int(cells[0], line_no, path)
        sid = cells[1]
        if sid not in SENSOR_IDS:
            raise InvalidInputError(
                f"{path}, line {line_no}: unknown sensor id {sid!r}")
        vals = [_parse_float(c, line_no, path) for c in cells[2:]]
        if ts != pending_ts:
            flush()
            pending_ts = ts
        pending.append(SensorReading(sid, np.array(vals[:3]),
                                     np.array(vals[3:])))
    flush()
    return frames


# -- annotations ---------------------------------------------------------------

def _encode_status(status: str, failed_fingers) -> str:
    if status == STATUS_FAILED:
        return STATUS_FAILED + ":" + ";".join(str(f) for f in failed_fingers)
    return status


def _decode_status(cell: str, line_no: int, path) -> tuple[str, tuple[int, ...]]:
    if cell.startswith(STATUS_FAILED + ":"):
        tail = cell[len(STATUS_FAILED) + 1:]
        try:
            fingers = tuple(int(t) for t in tail.split(";") if t)
        except ValueError:
            raise InvalidInputError(
                f"{path}, line {line_no}: bad failed-finger list {cell!r}"
            ) from None
        return STATUS_FAILED, fingers
    if cell not in ("exact", "projected"):
        raise InvalidInputError(
            f"{path}, line {line_no}: unknown status {cell!r}")
    return cell, ()


class AnnotationRecord:
    """Annotation CSV row: timestamp, (21, 3) positions, status."""

    __slots__ = ("timestamp_us", "positions", "status", "failed_fingers")

    def __init__(self, timestamp_us: int, positions, status: str,
                 failed_fingers: tuple[int, ...] = ()):
        self.timestamp_us = int(timestamp_us)
        p = np.asarray(positions, dtype=np.float64)
        if p.shape != (N_JOINTS, 3):
            raise InvalidInputError(
                f"positions must be ({N_JOINTS}, 3), got {p.shape}")
        p.setflags(write=False)
        self.positions = p
        self.status = status
        self.failed_fingers = tuple(failed_fingers)


def write_annotations(results, path) -> None:
    """Write annotation rows; accepts any objects with timestamp_us,
    positions, status and failed_fingers attributes."""
    rows = []
    for r in results:
        rows.append((r.timestamp_us,
                     *(_fmt(v) for v in np.asarray(r.positions).ravel()),
                     _encode_status(r.status, r.failed_fingers)))
    _write_rows(path, ANNOTATION_HEADER, rows)


def read_annotations(path) -> list[AnnotationRecord]:
    out = []
    for line_no, cells in _read_rows(path, ANNOTATION_HEADER):
        ts = _parse_int(cells[0], line_no, path)
        coords = np.array([_parse_float(c, line_no, path)
                           for c in cells[1:-1]]).reshape(N_JOINTS, 3)
        status, failed = _decode_status(cells[-1], line_no, path)
        out.append(AnnotationRecord(ts, coords, status, failed))
    return out


# -- simple tabular formats ----------------------------------------------------

def write_events(events, path) -> None:
    _write_rows(path, EVENTS_HEADER,
                ((e.timestamp_us, e.event_id) for e in events))


def read_events(path) -> list[TimedEvent]:
    return [TimedEvent(_parse_int(c[0], n, path), _parse_int(c[1], n, path))
            for n, c in _read_rows(path, EVENTS_HEADER)]


def write_pairs(pairs, path) -> None:
    _write_rows(path, PAIRS_HEADER,
                ((p.depth_id, p.sensor_id, p.gap_us, int(p.extrapolated))
                 for p in pairs))


def read_pairs(path) -> list[AlignedPair]:
    out = []
    for n, c in _read_rows(path, PAIRS_HEADER):
        flag = _parse_int(c[3], n, path)
        if flag not in (0, 1):
            raise InvalidInputError(
                f"{path}, line {n}: extrapolated must be 0 or 1")
        out.append(AlignedPair(_parse_int(c[0], n, path),
                               _parse_int(c[1], n, path),
                               _parse_int(c[2], n, path), bool(flag)))
    return out


def write_correspondences(corrs, path) -> None:
    _write_rows(path, CORRESPONDENCE_HEADER,
                ((*(_fmt(v) for v in c.tracker_point),
                  *(_fmt(v) for v in c.pixel)) for c in corrs))


def read_correspondences(path) -> list[Correspondence]:
    out = []
    for n, c in _read_rows(path, CORRESPONDENCE_HEADER):
        vals = [_parse_float(x, n, path) for x in c]
        out.append(Correspondence(np.array(vals[:3]), np.array(vals[3:])))
    return out


def write_schedule(schedule: CaptureSchedule, path) -> None:
    rows = []
    for s in schedule.segments:
        a, b = s.pair if s.pair is not None else (-1, -1)
        rows.append((s.kind, a, b, s.region_id, s.n_frames))
    _write_rows(path, SCHEDULE_HEADER, rows)


def read_schedule(path) -> CaptureSchedule:
    segments = []
    for n, c in _read_rows(path, SCHEDULE_HEADER):
        a = _parse_int(c[1], n, path)
        b = _parse_int(c[2], n, path)
        pair = (a, b) if c[0] == "pair" else None
        segments.append(Segment(c[0], pair, _parse_int(c[3], n, path),
                                _parse_int(c[4], n, path)))
    return CaptureSchedule(tuple(segments))


def write_curve(rows, path) -> None:
    _write_rows(path, CURVE_HEADER,
                (tuple(_fmt(v) for v in row) for row in rows))


def read_curve(path) -> list[tuple[float, float, float]]:
    return [tuple(_parse_float(x, n, path) for x in c)
            for n, c in _read_rows(path, CURVE_HEADER)]


# -- YAML configuration --------------------------------------------------------

def _load_yaml_dict(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise InvalidInputError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a mapping at top level")
    return data


def _field(data: dict, name: str):
    if name not in data:
        raise ConfigError(name, "missing")
    return data[name]


def _float_field(data: dict, name: str) -> float:
    v = _field(data, name)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    return float(v)


def _int_field(data: dict, name: str, default=None) -> int:
    if default is not None and name not in data:
        return default
    v = _field(data, name)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    return v


def _array_field(data: dict, name: str, shape: tuple) -> np.ndarray:
    v = _field(data, name)
    try:
        a = np.array(v, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(name, "expected a numeric array") from None
    if a.shape != shape:
        raise ConfigError(name, f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(name, "contains non-finite values")
    return a


def _transform_from_dict(data: dict, field_prefix: str) -> RigidTransform:
    rot = _array_field(data, "rotation", (4,))
    tr = _array_field(data, "translation", (3,))
    try:
        return RigidTransform(rot, tr)
    except InvalidInputError as exc:
        raise ConfigError(field_prefix, str(exc)) from None


def _transform_to_dict(X: RigidTransform) -> dict:
    return {"rotation": [float(v) for v in X.rotation],
            "translation": [float(v) for v in X.translation]}


def read_shape(path) -> HandShape:
    data = _load_yaml_dict(path)
    off = _field(data, "s6_offset")
    if not isinstance(off, dict):
        raise ConfigError("s6_offset", "expected a mapping")
    try:
        return HandShape(
            palm_points=_array_field(data, "palm_points", (6, 3)),
            bone_lengths=_array_field(data, "bone_lengths", (5, 3)),
            half_thickness=_array_field(data, "half_thickness", (5,)),
            nail_fraction=_array_field(data, "nail_fraction", (5,)),
            s6_offset=_transform_from_dict(off, "s6_offset"))
    except InvalidInputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("shape", str(exc)) from None


def write_shape(shape: HandShape, path) -> None:
    data = {
        "palm_points": [[float(v) for v in row] for row in shape.palm_points],
        "bone_lengths": [[float(v) for v in row] for row in shape.bone_lengths],
        "half_thickness": [float(v) for v in shape.half_thickness],
        "nail_fraction": [float(v) for v in shape.nail_fraction],
        "s6_offset": _transform_to_dict(shape.s6_offset),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


def read_intrinsics(path) -> CameraIntrinsics:
    data = _load_yaml_dict(path)
    try:
        return CameraIntrinsics(
            fx=_float_field(data, "fx"), fy=_float_field(data, "fy"),
            cx=_float_field(data, "cx"), cy=_float_field(data, "cy"),
            width=_int_field(data, "width", 640),
            height=_int_field(data, "height", 480))
    except InvalidInputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("intrinsics", str(exc)) from None


def write_intrinsics(K: CameraIntrinsics, path) -> None:
    data = {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
            "width": K.width, "height": K.height}
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


def read_transform(path) -> RigidTransform:
    return _transform_from_dict(_load_yaml_dict(path), "transform")


def write_transform(X: RigidTransform, path) -> None:
    # Full precision: YAML floats round-trip exactly via repr.
    with open(path, "w") as fh:
        yaml.safe_dump(_transform_to_dict(X), fh, sort_keys=False)


# -- run configuration ---------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Synthetic-session parameters, usually loaded from a YAML file.

    Every random quantity derives from the single seed, so identical
    configs produce bit-identical sessions. pose_source "schedule" walks
    the capture schedule (the default; extremal transitions under region
    rotations), "random" draws poses uniformly within joint limits with
    full-sphere global rotations.
    """

    n_frames: int
    seed: int
    out_sensor_log: str
    out_ground_truth: str
    shape_file: str | None = None
    intrinsics_file: str | None = None
    transform_file: str | None = None
    pose_source: str = "schedule"
    frames_per_transition: int | None = None
    rate_hz: float = 720.0
    start_timestamp_us: int = 0
    sigma_pos_mm: float = 0.0
    sigma_rot_deg: float = 0.0
    feasibility_tol: float = 2.0
    residual_tol: float = 1e-6
    tau_plane: float = 1e-6
    tau_len: float = 1e-6

    def __post_init__(self):
        if self.n_frames < 0:
            raise ConfigError("n_frames", "must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")
        if self.pose_source not in ("schedule", "random"):
            raise ConfigError("pose_source",
                              f"must be 'schedule' or 'random', "
                              f"got {self.pose_source!r}")
        if (self.frames_per_transition is not None
                and self.frames_per_transition < 2):
            raise ConfigError("frames_per_transition", "must be >= 2")
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz", "must be positive")
        if self.start_timestamp_us < 0:
            raise ConfigError("start_timestamp_us", "must be non-negative")
        if self.sigma_pos_mm < 0 or self.sigma_rot_deg < 0:
            raise ConfigError("sigma_pos_mm", "noise sigmas must be >= 0")
        for name in ("feasibility_tol", "residual_tol", "tau_plane",
                     "tau_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")


_RUN_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def read_run_config(path) -> RunConfig:
    data = _load_yaml_dict(path)
    unknown = sorted(set(data) - _RUN_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(unknown[0], "unknown config field")
    kwargs = {}
    for f in fields(RunConfig):
        if f.name not in data:
            continue
        v = data[f.name]
        if f.name in ("n_frames", "seed", "start_timestamp_us"):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f.name, f"expected an integer, got {v!r}")
        elif f.name == "frames_per_transition":
            if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigError(f.name, f"expected an integer, got {v!r}")
        elif f.name in ("rate_hz", "sigma_pos_mm", "sigma_rot_deg",
                        "feasibility_tol", "residual_tol", "tau_plane",
                        "tau_len"):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f.name, f"expected a number, got {v!r}")
            v = float(v)
        elif v is not None and not isinstance(v, str):
            raise ConfigError(f.name, f"expected a string, got {v!r}")
        kwargs[f.name] = v
    for required in ("n_frames", "seed", "out_sensor_log", "out_ground_truth"):
        if required not in kwargs:
            raise ConfigError(required, "missing")
    return RunConfig(**kwargs)


def write_run_config(config: RunConfig, path) -> None:
    data = {k: v for k, v in asdict(config).items() if v is not None}
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
