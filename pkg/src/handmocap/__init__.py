"""Hand motion-capture annotation toolkit.

A hardware-free implementation of a six-sensor hand-annotation pipeline:
forward kinematics and a magnetic-sensor simulator provide ground truth,
an inverse-kinematics annotator recovers all 21 joints from the six
readings, and the surrounding tooling covers tracker-to-camera
calibration, stream synchronization, capture-protocol generation,
evaluation metrics, and file formats with a CLI.
"""

from .annotation import (AnnotationResult, FingerDiagnostics, PipSolution,
                         annotate_frame, annotate_frames, extract_angles,
                         solve_pip)
from .calibration import (CameraIntrinsics, Correspondence, PnPResult,
                          apply_calibration, project, solve_pnp, unproject)
from .errors import (BehindCameraError, ConfigError, ConvergenceError,
                     DegenerateGeometryError, FrameMismatchError,
                     InfeasibleTriangleError, InvalidInputError,
                     MalformedFrameError, PipelineError)
from .estimators import FrameAnnotator, TrackerCameraCalibrator
from .io import AnnotationRecord, RunConfig
from .kinematics import (SENSOR_IDS, SensorFrame, SensorReading,
                         forward_kinematics, palm_pose, perturb_sensor_frame,
                         simulate_sensors)
from .metrics import (ErrorRecord, curve_export, frames_within, joint_errors,
                      joints_within, split_9_1)
from .model import (ANGLE_NAMES, DEFAULT_LIMITS, FINGERS, JOINT_ORDER,
                    N_JOINTS, HandPose, HandShape, JointId, JointLimits,
                    Skeleton, default_shape, ensure_valid_shape,
                    finger_joints, skeleton_consistency, validate_pose,
                    validate_shape)
from .protocol import (CaptureSchedule, CoverageReport, ScheduledFrame,
                       Segment, ViewpointRegion, build_schedule,
                       coverage_report, enumerate_extremal, enumerate_pairs,
                       expand_schedule, hemisphere_regions,
                       interpolate_transition, view_direction,
                       viewpoint_region)
from .session import SessionSummary, generate_synthetic_session, session_poses
from .sync import (AlignedPair, GapStats, TimedEvent, align, gap_stats,
                   periodic_events)
from .transforms import RigidTransform, kabsch

__version__ = "0.1.0"

__all__ = [
    "ANGLE_NAMES", "AlignedPair", "AnnotationRecord", "AnnotationResult",
    "BehindCameraError", "CameraIntrinsics", "CaptureSchedule", "ConfigError",
    "ConvergenceError", "Correspondence", "CoverageReport", "DEFAULT_LIMITS",
    "DegenerateGeometryError", "ErrorRecord", "FINGERS", "FingerDiagnostics",
    "FrameAnnotator", "FrameMismatchError", "GapStats", "HandPose",
    "HandShape", "InfeasibleTriangleError", "InvalidInputError",
    "JOINT_ORDER", "JointId", "JointLimits", "MalformedFrameError",
    "N_JOINTS", "PipSolution", "PipelineError", "PnPResult", "RigidTransform",
    "RunConfig", "SENSOR_IDS", "ScheduledFrame", "Segment", "SensorFrame",
    "SensorReading", "SessionSummary", "Skeleton", "TimedEvent",
    "TrackerCameraCalibrator", "ViewpointRegion", "align",
    "annotate_frame", "annotate_frames", "apply_calibration",
    "build_schedule", "coverage_report", "curve_export", "default_shape",
    "ensure_valid_shape",
    "enumerate_extremal", "enumerate_pairs", "expand_schedule",
    "extract_angles", "finger_joints", "forward_kinematics", "frames_within",
    "gap_stats", "generate_synthetic_session", "hemisphere_regions",
    "interpolate_transition", "joint_errors", "joints_within", "kabsch",
    "palm_pose", "periodic_events", "perturb_sensor_frame", "project",
    "session_poses", "simulate_sensors", "skeleton_consistency", "solve_pip",
    "solve_pnp", "split_9_1", "unproject", "validate_pose", "validate_shape",
    "view_direction", "viewpoint_region",
]
