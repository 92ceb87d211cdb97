"""UMIRobot kinematics, controller and protocol helpers."""

from ._telearm import (
    ConfigError,
    Controller,
    ControllerConfig,
    ControllerError,
    DHChain,
    UiSession,
    angle_to_centideg,
    centideg_to_angle,
    fkm,
    load_chain,
    parse_config,
    rotation_error,
    rotation_from_rpy,
    rotation_jacobian,
    serial_decode,
    serial_set_targets,
    translation_jacobian,
    umirobot_chain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
