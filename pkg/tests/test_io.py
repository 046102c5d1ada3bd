"""CSV and YAML round trips, malformed-input reporting."""

import numpy as np
import pytest
import yaml

from conftest import random_shape
from handmocap import (AlignedPair, CameraIntrinsics, ConfigError,
                       Correspondence, ErrorRecord, InvalidInputError,
                       RigidTransform, RunConfig, SENSOR_IDS, SensorFrame,
                       SensorReading, TimedEvent, build_schedule,
                       curve_export, default_shape)
from handmocap.io import (AnnotationRecord, read_annotations,
                          read_correspondences, read_curve, read_events,
                          read_intrinsics, read_pairs, read_run_config,
                          read_schedule, read_sensor_log, read_shape,
                          read_transform, write_annotations,
                          write_correspondences, write_curve, write_events,
                          write_intrinsics, write_pairs, write_run_config,
                          write_schedule, write_sensor_log, write_shape,
                          write_transform)
from handmocap.transforms import random_quat


def _random_frames(rng, n=5):
    frames = []
    for i in range(n):
        readings = tuple(
            SensorReading(sid, rng.uniform(-500.0, 500.0, 3) * np.pi,
                          random_quat(rng))
            for sid in SENSOR_IDS)
        frames.append(SensorFrame(1000 * i + 7, readings))
    return frames


# -- sensor logs --------------------------------------------------------------

def test_sensor_log_round_trip_bit_exact(tmp_path):
    path = tmp_path / "log.csv"
    frames = _random_frames(np.random.default_rng(0))
    write_sensor_log(frames, path)
    back = read_sensor_log(path)
    assert len(back) == len(frames)
    for a, b in zip(frames, back):
        assert a.timestamp_us == b.timestamp_us
        for ra, rb in zip(a.readings, b.readings):
            assert ra.sensor_id == rb.sensor_id
            assert np.array_equal(ra.position, rb.position)
            assert np.array_equal(ra.orientation, rb.orientation)


def test_sensor_log_empty_round_trip(tmp_path):
    path = tmp_path / "log.csv"
    write_sensor_log([], path)
    assert read_sensor_log(path) == []


def test_sensor_log_rejects_unknown_sensor(tmp_path):
    path = tmp_path / "log.csv"
    frames = _random_frames(np.random.default_rng(1), n=1)
    write_sensor_log(frames, path)
    text = path.read_text().replace("S3", "S9")
    path.write_text(text)
    with pytest.raises(InvalidInputError, match="S9"):
        read_sensor_log(path)


# -- annotations ---------------------------------------------------------------

def test_annotations_round_trip(tmp_path):
    path = tmp_path / "ann.csv"
    rng = np.random.default_rng(2)
    pos_ok = rng.uniform(-200, 200, (21, 3))
    pos_nan = pos_ok.copy()
    pos_nan[6] = np.nan
    recs = [AnnotationRecord(0, pos_ok, "exact"),
            AnnotationRecord(1389, pos_ok, "projected"),
            AnnotationRecord(2778, pos_nan, "failed", (2, 4))]
    write_annotations(recs, path)
    back = read_annotations(path)
    assert [(r.timestamp_us, r.status, r.failed_fingers) for r in back] == [
        (0, "exact", ()), (1389, "projected", ()), (2778, "failed", (2, 4))]
    for a, b in zip(recs, back):
        assert np.array_equal(a.positions, b.positions, equal_nan=True)


def test_annotations_reject_unknown_status(tmp_path):
    path = tmp_path / "ann.csv"
    write_annotations([AnnotationRecord(0, np.zeros((21, 3)), "exact")], path)
    path.write_text(path.read_text().replace("exact", "solved"))
    with pytest.raises(InvalidInputError, match="solved"):
        read_annotations(path)


def test_annotation_record_validates_shape():
    with pytest.raises(InvalidInputError):
        AnnotationRecord(0, np.zeros((20, 3)), "exact")


# -- simple tabular formats ------------------------------------------------------

def test_events_round_trip(tmp_path):
    path = tmp_path / "events.csv"
    events = [TimedEvent(1389 * i, i) for i in range(10)]
    write_events(events, path)
    assert read_events(path) == events


def test_pairs_round_trip(tmp_path):
    path = tmp_path / "pairs.csv"
    pairs = [AlignedPair(0, 0, 0, False), AlignedPair(1, 12, 1, True)]
    write_pairs(pairs, path)
    assert read_pairs(path) == pairs


def test_pairs_flag_must_be_binary(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("depth_id,sensor_id,gap_us,extrapolated\n0,0,0,2\n")
    with pytest.raises(InvalidInputError, match="0 or 1"):
        read_pairs(path)


def test_correspondences_round_trip(tmp_path):
    path = tmp_path / "corr.csv"
    rng = np.random.default_rng(3)
    corrs = [Correspondence(rng.uniform(-100, 100, 3) / 3.0,
                            rng.uniform(0, 640, 2) / 7.0) for _ in range(8)]
    write_correspondences(corrs, path)
    back = read_correspondences(path)
    for a, b in zip(corrs, back):
        assert np.array_equal(a.tracker_point, b.tracker_point)
        assert np.array_equal(a.pixel, b.pixel)


def test_schedule_round_trip(tmp_path):
    path = tmp_path / "sched.csv"
    sched = build_schedule(4)
    write_schedule(sched, path)
    assert read_schedule(path).segments == sched.segments


def test_curve_round_trip(tmp_path):
    path = tmp_path / "curve.csv"
    recs = [ErrorRecord(i, np.random.default_rng(i).uniform(0, 30, 21))
            for i in range(5)]
    rows = curve_export(recs, [1.0, 5.0, 10.0, 30.0])
    write_curve(rows, path)
    assert read_curve(path) == rows


# -- malformed CSV reporting ------------------------------------------------------

def test_bad_header_rejected(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("time,id\n0,0\n")
    with pytest.raises(InvalidInputError, match="header"):
        read_events(path)


def test_wrong_field_count_names_line(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("timestamp_us,id\n5,0\n6\n")
    with pytest.raises(InvalidInputError, match="line 3"):
        read_events(path)


def test_non_numeric_cell_named(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("timestamp_us,id\nabc,0\n")
    with pytest.raises(InvalidInputError, match="'abc'"):
        read_events(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("")
    with pytest.raises(InvalidInputError, match="empty"):
        read_events(path)


# -- YAML formats ------------------------------------------------------------------

def test_shape_round_trip(tmp_path):
    path = tmp_path / "shape.yaml"
    shape = random_shape(np.random.default_rng(4))
    write_shape(shape, path)
    back = read_shape(path)
    assert np.array_equal(back.palm_points, shape.palm_points)
    assert np.array_equal(back.bone_lengths, shape.bone_lengths)
    assert np.array_equal(back.half_thickness, shape.half_thickness)
    assert np.array_equal(back.nail_fraction, shape.nail_fraction)
    assert np.array_equal(back.s6_offset.rotation, shape.s6_offset.rotation)
    assert np.array_equal(back.s6_offset.translation,
                          shape.s6_offset.translation)


def test_shape_missing_field(tmp_path):
    path = tmp_path / "shape.yaml"
    write_shape(default_shape(), path)
    data = yaml.safe_load(path.read_text())
    del data["palm_points"]
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ConfigError) as err:
        read_shape(path)
    assert err.value.field == "palm_points"


def test_shape_wrong_array_shape(tmp_path):
    path = tmp_path / "shape.yaml"
    write_shape(default_shape(), path)
    data = yaml.safe_load(path.read_text())
    data["bone_lengths"] = [[1.0, 2.0]]
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ConfigError) as err:
        read_shape(path)
    assert err.value.field == "bone_lengths"


def test_shape_non_finite(tmp_path):
    path = tmp_path / "shape.yaml"
    write_shape(default_shape(), path)
    data = yaml.safe_load(path.read_text())
    data["nail_fraction"][0] = float("nan")
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ConfigError, match="non-finite"):
        read_shape(path)


def test_intrinsics_round_trip_and_defaults(tmp_path):
    path = tmp_path / "K.yaml"
    K = CameraIntrinsics(475.0, 470.5, 320.25, 240.0, width=512, height=424)
    write_intrinsics(K, path)
    assert read_intrinsics(path) == K
    path.write_text("fx: 475.0\nfy: 475.0\ncx: 320.0\ncy: 240.0\n")
    got = read_intrinsics(path)
    assert (got.width, got.height) == (640, 480)


def test_intrinsics_type_errors(tmp_path):
    path = tmp_path / "K.yaml"
    path.write_text("fx: fast\nfy: 475.0\ncx: 320.0\ncy: 240.0\n")
    with pytest.raises(ConfigError) as err:
        read_intrinsics(path)
    assert err.value.field == "fx"
    path.write_text("fx: 475.0\nfy: 475.0\ncx: 320.0\ncy: 240.0\nwidth: 1.5\n")
    with pytest.raises(ConfigError):
        read_intrinsics(path)


def test_transform_round_trip(tmp_path):
    path = tmp_path / "X.yaml"
    rng = np.random.default_rng(5)
    X = RigidTransform(random_quat(rng), rng.uniform(-100, 100, 3) / 3.0)
    write_transform(X, path)
    back = read_transform(path)
    assert np.array_equal(back.rotation, X.rotation)
    assert np.array_equal(back.translation, X.translation)


def test_transform_rejects_denormalized(tmp_path):
    path = tmp_path / "X.yaml"
    path.write_text("rotation: [1.0, 0.0, 0.0, 0.5]\n"
                    "translation: [0.0, 0.0, 0.0]\n")
    with pytest.raises(ConfigError):
        read_transform(path)


def test_yaml_top_level_must_be_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(InvalidInputError, match="mapping"):
        read_transform(path)


# -- run configuration ---------------------------------------------------------------

def _config(**overrides):
    base = dict(n_frames=100, seed=3, out_sensor_log="log.csv",
                out_ground_truth="gt.csv")
    base.update(overrides)
    return RunConfig(**base)


def test_run_config_round_trip(tmp_path):
    path = tmp_path / "run.yaml"
    cfg = _config(pose_source="random", sigma_pos_mm=0.5, rate_hz=60.0,
                  shape_file="shape.yaml")
    write_run_config(cfg, path)
    assert read_run_config(path) == cfg


def test_run_config_defaults(tmp_path):
    path = tmp_path / "run.yaml"
    write_run_config(_config(), path)
    cfg = read_run_config(path)
    assert cfg.pose_source == "schedule"
    assert cfg.rate_hz == 720.0
    assert cfg.shape_file is None
    assert cfg.feasibility_tol == 2.0


def test_run_config_unknown_field(tmp_path):
    path = tmp_path / "run.yaml"
    write_run_config(_config(), path)
    path.write_text(path.read_text() + "frames: 5\n")
    with pytest.raises(ConfigError) as err:
        read_run_config(path)
    assert err.value.field == "frames"


def test_run_config_missing_required(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("n_frames: 10\nseed: 0\nout_sensor_log: a.csv\n")
    with pytest.raises(ConfigError) as err:
        read_run_config(path)
    assert err.value.field == "out_ground_truth"


def test_run_config_type_checks(tmp_path):
    path = tmp_path / "run.yaml"
    write_run_config(_config(), path)
    text = path.read_text()
    path.write_text(text.replace("n_frames: 100", "n_frames: true"))
    with pytest.raises(ConfigError):
        read_run_config(path)
    path.write_text(text.replace("seed: 3", "seed: 3.5"))
    with pytest.raises(ConfigError):
        read_run_config(path)
    path.write_text(text + "rate_hz: fast\n")
    with pytest.raises(ConfigError):
        read_run_config(path)


def test_run_config_validation():
    with pytest.raises(ConfigError):
        _config(n_frames=-1)
    with pytest.raises(ConfigError):
        _config(pose_source="walk")
    with pytest.raises(ConfigError):
        _config(frames_per_transition=1)
    with pytest.raises(ConfigError):
        _config(residual_tol=0.0)
    with pytest.raises(ConfigError):
        _config(sigma_rot_deg=-0.1)
