"""Synthetic capture sessions: the pipeline's self-contained oracle.

A session walks a pose stream, runs forward kinematics, simulates the six
sensors (optionally with additive noise), and writes a paired sensor log
and ground-truth annotation CSV with matching timestamps. Noise-free
sessions are the round-trip oracle: annotating the sensor log must
reproduce the ground truth.

Determinism: every random draw descends from the config seed through
numpy's SeedSequence with a spawn-key namespace, so any frame can be
regenerated in isolation:

    (0, i)  sensor-noise generator for frame i
    (1, s)  pose generator for schedule segment s (random/egocentric kinds)
    (2, i)  pose generator for frame i under pose_source "random"
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import islice

import numpy as np

from .io import (AnnotationRecord, RunConfig, read_shape, write_annotations,
                 write_sensor_log)
from .kinematics import forward_kinematics, perturb_sensor_frame, simulate_sensors
from .model import DEFAULT_LIMITS, HandPose, HandShape, default_shape
from .protocol import N_PAIRS, build_schedule, expand_schedule
from .transforms import random_quat


@dataclass(frozen=True)
class SessionSummary:
    n_frames: int
    sensor_log: str
    ground_truth: str


def _schedule_poses(config: RunConfig, limits):
    fpt = config.frames_per_transition
    if fpt is None:
        # Small sessions truncate the schemed part; pick the smallest
        # transition length that still covers the requested frame count.
        fpt = max(2, math.ceil(config.n_frames / N_PAIRS))
    schedule = build_schedule(fpt)
    for sf in expand_schedule(schedule, limits=limits, seed=config.seed):
        yield sf.pose


def _random_poses(config: RunConfig, limits):
    for i in range(config.n_frames):
        rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(2, i)))
        angles = rng.uniform(limits.lower, limits.upper, (5, 5))
        yield HandPose(rng.uniform(-100.0, 100.0, 3), random_quat(rng), angles)


def session_poses(config: RunConfig, limits=DEFAULT_LIMITS):
    """The first n_frames poses of the configured pose stream."""
    source = (_schedule_poses if config.pose_source == "schedule"
              else _random_poses)
    return islice(source(config, limits), config.n_frames)


def generate_synthetic_session(config: RunConfig,
                               shape: HandShape | None = None) -> SessionSummary:
    """Write the sensor log and ground-truth CSV described by config.

    shape overrides the config's shape_file; with neither, the default
    shape is used. Returns a summary with the output paths.
    """
    if shape is None:
        shape = (read_shape(config.shape_file)
                 if config.shape_file is not None else default_shape())
    period = 1e6 / config.rate_hz
    frames = []
    truth = []
    noisy = config.sigma_pos_mm > 0.0 or config.sigma_rot_deg > 0.0
    for i, pose in enumerate(session_poses(config)):
        ts = config.start_timestamp_us + round(i * period)
        skel = forward_kinematics(shape, pose)
        frame = simulate_sensors(shape, skel, timestamp_us=ts)
        if noisy:
            rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(0, i)))
            frame = perturb_sensor_frame(frame, rng, config.sigma_pos_mm,
                                         config.sigma_rot_deg)
        frames.append(frame)
        truth.append(AnnotationRecord(ts, skel.points, "exact"))
    write_sensor_log(frames, config.out_sensor_log)
    write_annotations(truth, config.out_ground_truth)
    return SessionSummary(len(frames), config.out_sensor_log,
                          config.out_ground_truth)
