"""Pinhole camera with ZED-mini intrinsics and the point-feature interaction matrix.

All image quantities are in pixels; the pixel pitch ``rho`` is carried as
metadata only because the focal lengths are already in pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import config as cfgmod
from .errors import BehindCameraError, ConfigError, InvalidDepthError

CAMERA_KEYS = ("cam.u0", "cam.v0", "cam.fu", "cam.fv", "cam.rho", "cam.width", "cam.height")


@dataclass(frozen=True)
class CameraIntrinsics:
    u0: float = 617.930
    v0: float = 366.566
    f_u: float = 686.015
    f_v: float = 681.838
    rho: float = 4e-6
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if not (self.f_u > 0 and self.f_v > 0):
            raise ConfigError("focal lengths must be positive")
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise ConfigError("principal point must lie inside the image")

    @classmethod
    def from_config(cls, settings: Mapping[str, str]) -> CameraIntrinsics:
        d = cls()
        extra = [k for k in settings if k.startswith("cam.") and k not in CAMERA_KEYS]
        if extra:
            raise ConfigError(f"unknown camera keys: {', '.join(sorted(extra))}")
        return cls(
            u0=cfgmod.as_float(settings, "cam.u0", d.u0),
            v0=cfgmod.as_float(settings, "cam.v0", d.v0),
            f_u=cfgmod.as_float(settings, "cam.fu", d.f_u),
            f_v=cfgmod.as_float(settings, "cam.fv", d.f_v),
            rho=cfgmod.as_float(settings, "cam.rho", d.rho),
            width=cfgmod.as_int(settings, "cam.width", d.width),
            height=cfgmod.as_int(settings, "cam.height", d.height),
        )

    def contains(self, u, v, margin: float = 0.0) -> bool:
        return bool(margin <= u <= self.width - 1 - margin and margin <= v <= self.height - 1 - margin)


ZED_MINI = CameraIntrinsics()


def project(point_cam, K: CameraIntrinsics = ZED_MINI) -> np.ndarray:
    """Pixel ``(u, v)`` of a camera-frame point."""
    x, y, z = (float(c) for c in point_cam)
    if not z > 0:
        raise BehindCameraError(f"point at z={z} is not in front of the camera")
    return np.array([K.u0 + K.f_u * x / z, K.v0 + K.f_v * y / z])


def project_many(points_cam, K: CameraIntrinsics = ZED_MINI) -> np.ndarray:
    """Vectorised :func:`project` over an (N, 3) array."""
    P = np.asarray(points_cam, dtype=float)
    z = P[:, 2]
    if not np.all(z > 0):
        raise BehindCameraError("point not in front of the camera")
    return np.column_stack([K.u0 + K.f_u * P[:, 0] / z, K.v0 + K.f_v * P[:, 1] / z])


def backproject(p, Z: float, K: CameraIntrinsics = ZED_MINI) -> np.ndarray:
    """Camera-frame point at depth ``Z`` that projects to pixel ``p``."""
    if not Z > 0:
        raise InvalidDepthError(f"depth must be positive, got {Z}")
    u, v = p
    return np.array([(u - K.u0) / K.f_u * Z, (v - K.v0) / K.f_v * Z, Z])


def interaction_matrix(p, Z: float, K: CameraIntrinsics = ZED_MINI) -> np.ndarray:
    """2x6 pixel-velocity Jacobian of a static point w.r.t. the camera twist.

    Columns are (vx, vy, vz, wx, wy, wz) in the camera frame.
    """
    if not Z > 0:
        raise InvalidDepthError(f"depth must be positive, got {Z}")
    x = (p[0] - K.u0) / K.f_u
    y = (p[1] - K.v0) / K.f_v
    L = np.array([
        [-1.0 / Z, 0.0, x / Z, x * y, -(1.0 + x * x), y],
        [0.0, -1.0 / Z, y / Z, 1.0 + y * y, -x * y, -x],
    ])
    L[0] *= K.f_u
    L[1] *= K.f_v
    return L
