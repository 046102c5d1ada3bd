"""Shared test helpers: randomized shapes and poses that pass validation."""

import numpy as np
from hypothesis import settings

from handmocap import (DEFAULT_LIMITS, HandPose, HandShape, RigidTransform,
                       default_shape, validate_shape)
from handmocap.transforms import quat_from_rotvec, random_quat

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def random_shape(rng: np.random.Generator) -> HandShape:
    """A perturbed default hand geometry; always passes validate_shape."""
    base = default_shape()
    shape = HandShape(
        palm_points=base.palm_points + rng.uniform(-3.0, 3.0, (6, 3)),
        bone_lengths=base.bone_lengths * rng.uniform(0.85, 1.15, (5, 3)),
        half_thickness=np.maximum(
            base.half_thickness + rng.uniform(-1.0, 1.0, 5), 1.0),
        nail_fraction=rng.uniform(0.35, 0.65, 5),
        s6_offset=RigidTransform(
            quat_from_rotvec(rng.normal(0.0, 0.1, 3)),
            np.array([40.0, 0.0, 14.0]) + rng.uniform(-5.0, 5.0, 3)),
    )
    report = validate_shape(shape)
    assert report.ok, report.violations
    return shape


def random_valid_pose(rng: np.random.Generator,
                      limits=DEFAULT_LIMITS) -> HandPose:
    """Uniform angles within limits, translation in a 200 mm box,
    uniform random global rotation."""
    angles = rng.uniform(limits.lower, limits.upper, (5, 5))
    return HandPose(rng.uniform(-100.0, 100.0, 3), random_quat(rng), angles)
