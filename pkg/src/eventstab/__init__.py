"""IMU-driven motion compensation and keyframe sampling for event-camera streams."""
from .compensation import CompensationResult, compensate_stream, warp_event
from .imu import GroupSet, group_imu, integrate_rotation, scaling_factor
from .model import (
    CameraModel,
    CompensationConfig,
    Event,
    EventFrame,
    EventStream,
    IgsConfig,
    ImuSample,
    ImuSequence,
    RotationAngles,
    accumulate_frame,
    frame_stats,
    validate_stream,
)
from .sampling import igs_select

__version__ = "0.1.0"
