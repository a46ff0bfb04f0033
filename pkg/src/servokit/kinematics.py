"""Forward kinematics, Jacobians and resolved-rate IK for the OpenMANIPULATOR-X.

Standard (distal) DH convention: each link transform is
``Rz(theta + theta_offset) @ Tz(d) @ Tx(a) @ Rx(alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, FrameMismatchError, SingularityError

DEFAULT_DAMPING = 1e-3
DEFAULT_RATE_LIMIT = math.pi  # rad/s

# Manufacturer joint ranges (rad); used to sample test configurations, not enforced.
JOINT_LIMITS = np.array([
    [-0.9 * math.pi, 0.9 * math.pi],
    [-2.05, 1.57],
    [-1.67, 1.53],
    [-1.80, 2.00],
])


@dataclass(frozen=True)
class DHRow:
    a: float
    alpha: float
    d: float
    theta_offset: float = 0.0


_SHOULDER = math.atan(128 / 24)

OPENMANIPULATOR_X = (
    DHRow(a=0.0, alpha=math.pi / 2, d=0.077, theta_offset=0.0),
    DHRow(a=0.13, alpha=0.0, d=0.0, theta_offset=_SHOULDER),
    DHRow(a=0.124, alpha=0.0, d=0.0, theta_offset=-_SHOULDER),
    DHRow(a=0.126, alpha=0.0, d=0.0, theta_offset=0.0),
)


@dataclass(frozen=True, eq=False)
class RigidPose:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> RigidPose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> RigidPose:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3].copy(), T[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: RigidPose) -> RigidPose:
        return RigidPose(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def inverse(self) -> RigidPose:
        Rt = self.rotation.T
        return RigidPose(Rt, -Rt @ self.translation)

    def transform_points(self, points) -> np.ndarray:
        """Map (N, 3) points from this frame into the parent frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """6xn Jacobian, rows (vx, vy, vz, wx, wy, wz)."""
    entries: np.ndarray
    frame: str  # "world" or "camera"

    def __post_init__(self):
        if self.frame not in ("world", "camera"):
            raise ValueError(f"unknown frame tag {self.frame!r}")


def dh_transform(row: DHRow, theta: float) -> RigidPose:
    th = theta + row.theta_offset
    ct, st = math.cos(th), math.sin(th)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    R = np.array([
        [ct, -st * ca, st * sa],
        [st, ct * ca, -ct * sa],
        [0.0, sa, ca],
    ])
    t = np.array([row.a * ct, row.a * st, row.d])
    return RigidPose(R, t)


def forward_kinematics(dh: Sequence[DHRow], q) -> list[RigidPose]:
    """Cumulative frames ``[T_0, T_1, ..., T_n]`` with ``T_0`` the base."""
    q = np.asarray(q, dtype=float)
    if len(q) != len(dh):
        raise ValueError(f"expected {len(dh)} joint angles, got {len(q)}")
    frames = [RigidPose.identity()]
    for row, theta in zip(dh, q):
        frames.append(frames[-1] @ dh_transform(row, float(theta)))
    return frames


# Camera optical axis (z) along the approach axis x4, image x along the joint
# axis z4, image y along -y4.
DEFAULT_MOUNT = np.array([
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
])


def camera_pose(dh: Sequence[DHRow], q, mount=DEFAULT_MOUNT) -> RigidPose:
    """Camera frame in the world: end-effector origin, rotated by the fixed mount."""
    ee = forward_kinematics(dh, q)[-1]
    return RigidPose(ee.rotation @ np.asarray(mount, dtype=float), ee.translation.copy())


def geometric_jacobian(dh: Sequence[DHRow], q) -> JacobianMatrix:
    frames = forward_kinematics(dh, q)
    o_n = frames[-1].translation
    J = np.zeros((6, len(dh)))
    for i in range(len(dh)):
        z = frames[i].rotation[:, 2]
        J[:3, i] = np.cross(z, o_n - frames[i].translation)
        J[3:, i] = z
    return JacobianMatrix(J, "world")


def map_to_camera_frame(J_a: JacobianMatrix, cam: RigidPose) -> JacobianMatrix:
    """Express a world-frame Jacobian in the camera frame.

    Both blocks are rotated by ``cam.rotation.T`` (world-to-camera), giving
    the camera twist in its own axes. The camera sits at the end-effector
    origin so no lever-arm term is needed.
    """
    if J_a.frame != "world":
        raise FrameMismatchError(f"expected a world-frame Jacobian, got {J_a.frame!r}")
    return JacobianMatrix(rotate_jacobian(J_a.entries, cam.rotation.T), "camera")


def rotate_jacobian(J, R) -> np.ndarray:
    """``blkdiag(R, R) @ J``."""
    J = np.asarray(J, dtype=float)
    return np.vstack([R @ J[:3], R @ J[3:]])


def resolve_joint_rates(J: JacobianMatrix, V, damping: float = DEFAULT_DAMPING,
                        rate_limit: float | None = DEFAULT_RATE_LIMIT) -> np.ndarray:
    """Damped least-squares joint rates ``(J^T J + mu^2 I)^-1 J^T V``.

    Each entry is then clipped to ``+-rate_limit`` (pass ``None`` to skip).
    """
    if J.frame != "camera":
        raise FrameMismatchError(f"expected a camera-frame Jacobian, got {J.frame!r}")
    return damped_solve(J.entries, V, damping, rate_limit)


def damped_solve(A, b, damping: float, limit: float | None = None) -> np.ndarray:
    """Minimiser of ``|A x - b|^2 + damping^2 |x|^2`` via the normal equations."""
    if damping < 0:
        raise ValueError("damping must be >= 0")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    N = A.T @ A + damping**2 * np.eye(n)
    # cond() of a singular matrix is inf; a finite-but-huge value is just as useless.
    if not np.isfinite(N).all() or np.linalg.cond(N) > 1e14:
        raise SingularityError("normal matrix is singular; use nonzero damping")
    x = np.linalg.solve(N, A.T @ b)
    if limit is not None:
        x = np.clip(x, -limit, limit)
    return x


DH_KEYS = tuple(f"link{i}.{f}" for i in range(1, 5) for f in ("a", "alpha", "d", "theta0"))


def dh_from_config(settings: Mapping[str, str], base: Sequence[DHRow] = OPENMANIPULATOR_X) -> list[DHRow]:
    """Override rows of ``base`` with ``link<i>.a/.alpha/.d/.theta0`` keys."""
    rows = []
    for i, row in enumerate(base, start=1):
        p = f"link{i}."
        rows.append(DHRow(
            a=cfgmod.as_float(settings, p + "a", row.a),
            alpha=cfgmod.as_float(settings, p + "alpha", row.alpha),
            d=cfgmod.as_float(settings, p + "d", row.d),
            theta_offset=cfgmod.as_float(settings, p + "theta0", row.theta_offset),
        ))
    extra = [k for k in settings if k.startswith("link") and k not in DH_KEYS]
    if extra:
        raise ConfigError(f"unknown DH keys: {', '.join(sorted(extra))}")
    return rows
