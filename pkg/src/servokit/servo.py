"""IBVS control law and the closed-loop eye-in-hand simulation.

The real AprilTag detections are replaced by projecting the corners of a
planar target through the simulated camera. Desired features are rendered
at a goal joint configuration, which keeps every goal reachable by the
4-DOF arm.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import config as cfgmod
from .camera import ZED_MINI, CameraIntrinsics, interaction_matrix
from .errors import ConfigError, DatasetError, FieldOfViewError, VisibilityError
from .kinematics import (DEFAULT_DAMPING, DEFAULT_MOUNT, DEFAULT_RATE_LIMIT, OPENMANIPULATOR_X,
                         DHRow, RigidPose, camera_pose, damped_solve, geometric_jacobian,
                         map_to_camera_frame, resolve_joint_rates)

# Camera looks straight down from ~13 cm above the table at this configuration.
NOMINAL_Q = np.array([0.0, 0.2, 0.2, -1.97])


@dataclass(frozen=True, eq=False)
class FeatureSet:
    points: np.ndarray  # (N, 2) pixels
    depths: np.ndarray  # (N,) metres

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        z = np.asarray(self.depths, dtype=float).reshape(-1)
        if len(pts) < 1 or len(pts) != len(z):
            raise ValueError("need N >= 1 points with one depth each")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "depths", z)

    def __len__(self):
        return len(self.points)

    def stacked(self) -> np.ndarray:
        return self.points.reshape(-1)


@dataclass(frozen=True, eq=False)
class Twist:
    v: np.ndarray
    omega: np.ndarray

    @classmethod
    def from_vector(cls, V) -> Twist:
        V = np.asarray(V, dtype=float)
        return cls(V[:3].copy(), V[3:].copy())

    def vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.omega])


@dataclass(frozen=True)
class ServoConfig:
    gain: float = 1.0  # lambda, 1/s
    dt: float = 0.005
    iterations: int = 1500
    stop_tolerance: float | None = 0.5  # px on the stacked error; None runs all iterations
    damping: float = DEFAULT_DAMPING
    depth_mode: str = "true"  # or "constant"
    z_star: float | None = None
    rate_limit: float = DEFAULT_RATE_LIMIT

    def __post_init__(self):
        if not self.gain > 0:
            raise ConfigError("gain must be > 0")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.depth_mode not in ("true", "constant"):
            raise ConfigError(f"depth_mode must be 'true' or 'constant', got {self.depth_mode!r}")
        if self.depth_mode == "constant" and not (self.z_star and self.z_star > 0):
            raise ConfigError("constant depth mode needs z_star > 0")

    @classmethod
    def reproduction(cls, **kw) -> ServoConfig:
        """Fixed 1500 x 5 ms run at unit gain, no early stop."""
        kw.setdefault("stop_tolerance", None)
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class TargetScene:
    """Coplanar world points, ordered to appear TL, TR, BR, BL from the nominal pose."""
    points: np.ndarray  # (N, 3)
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    offset: float = 0.0  # plane is normal . x = offset

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float).reshape(-1, 3)
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        if np.max(np.abs(P @ n - self.offset)) > 1e-9:
            raise ValueError("scene points are not on the declared plane")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "normal", n)


def square_target(center=(0.11, 0.0, 0.0), side: float = 0.04) -> TargetScene:
    """Horizontal square on the table.

    At zero base rotation the image u axis runs along world -y and v along
    world -x, which fixes the corner order below.
    """
    cx, cy, cz = center
    h = side / 2
    pts = np.array([
        [cx + h, cy + h, cz],
        [cx + h, cy - h, cz],
        [cx - h, cy - h, cz],
        [cx - h, cy + h, cz],
    ])
    return TargetScene(pts, offset=cz)


def render_scene_features(cam: RigidPose, scene: TargetScene, K: CameraIntrinsics = ZED_MINI) -> FeatureSet:
    P = (scene.points - cam.translation) @ cam.rotation  # rows are R^T (p_w - t)
    z = P[:, 2]
    if not np.all(z > 0):
        raise VisibilityError("scene point behind the camera")
    u = K.u0 + K.f_u * P[:, 0] / z
    v = K.v0 + K.f_v * P[:, 1] / z
    return FeatureSet(np.column_stack([u, v]), z)


def stacked_interaction(features: FeatureSet, K: CameraIntrinsics = ZED_MINI) -> np.ndarray:
    return np.vstack([interaction_matrix(p, z, K) for p, z in zip(features.points, features.depths)])


def control_law(current: FeatureSet, desired: FeatureSet, K: CameraIntrinsics = ZED_MINI,
                gain: float = 1.0, damping: float = DEFAULT_DAMPING) -> Twist:
    """Camera twist ``gain * L^+ (p* - p)``, ``L`` stacked at the current features."""
    if len(current) != len(desired):
        raise ValueError("current and desired feature counts differ")
    L = stacked_interaction(current, K)
    e = desired.stacked() - current.stacked()
    return Twist.from_vector(gain * damped_solve(L, e, damping))


@dataclass(eq=False)
class ServoTrace:
    dt: float
    t: np.ndarray  # (K,)
    q: np.ndarray  # (K, 4)
    pixels: np.ndarray  # (K, N, 2)
    feature_error: np.ndarray  # (K, N) per-feature pixel error norms
    total_error: np.ndarray  # (K,) norm of the stacked 2N error
    twist: np.ndarray  # (K, 6) commanded camera twist
    desired: np.ndarray  # (N, 2)

    def __len__(self):
        return len(self.t)

    def header(self) -> list[str]:
        n = self.pixels.shape[1]
        cols = ["iter", "t"] + [f"q{i}" for i in range(1, self.q.shape[1] + 1)]
        for i in range(1, n + 1):
            cols += [f"u{i}", f"v{i}"]
        cols += [f"e{i}" for i in range(1, n + 1)]
        cols += ["e_total", "vx", "vy", "vz", "wx", "wy", "wz"]
        return cols

    def rows(self):
        for k in range(len(self)):
            vals = [self.t[k], *self.q[k], *self.pixels[k].reshape(-1), *self.feature_error[k],
                    self.total_error[k], *self.twist[k]]
            yield [str(k)] + [repr(float(x)) for x in vals]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())


class _TraceBuilder:
    def __init__(self, dt, desired):
        self.dt = dt
        self.desired = desired
        self.recs = []

    def add(self, k, q, pixels, V):
        err = self.desired - pixels
        self.recs.append((k * self.dt, q.copy(), pixels.copy(), np.linalg.norm(err, axis=1),
                          float(np.linalg.norm(err)), V.copy()))

    def build(self) -> ServoTrace:
        n = len(self.desired)
        if not self.recs:
            return ServoTrace(self.dt, np.zeros(0), np.zeros((0, 4)), np.zeros((0, n, 2)),
                              np.zeros((0, n)), np.zeros(0), np.zeros((0, 6)), self.desired)
        t, q, px, fe, te, V = zip(*self.recs)
        return ServoTrace(self.dt, np.array(t), np.array(q), np.array(px), np.array(fe),
                          np.array(te), np.array(V), self.desired)


def run_servo(cfg: ServoConfig, dh: Sequence[DHRow] = OPENMANIPULATOR_X, K: CameraIntrinsics = ZED_MINI,
              scene: TargetScene | None = None, q_start=NOMINAL_Q, q_goal=NOMINAL_Q,
              desired=None, mount=DEFAULT_MOUNT) -> ServoTrace:
    """Simulate the eye-in-hand IBVS loop with Euler integration of joint rates.

    ``desired`` optionally overrides the goal pixels ((N, 2) array); by
    default they are rendered at ``q_goal``. Raises :class:`FieldOfViewError`
    (with the partial trace) if a feature leaves the image.
    """
    scene = scene if scene is not None else square_target()
    if desired is None:
        desired_px = render_scene_features(camera_pose(dh, q_goal, mount), scene, K).points
    else:
        desired_px = np.asarray(desired, dtype=float).reshape(-1, 2)
        if len(desired_px) != len(scene.points):
            raise ValueError("desired pixel count does not match the scene")
    desired_fs = FeatureSet(desired_px, np.ones(len(desired_px)))
    q = np.array(q_start, dtype=float)
    tb = _TraceBuilder(cfg.dt, desired_px)

    for k in range(cfg.iterations):
        cam = camera_pose(dh, q, mount)
        try:
            current = render_scene_features(cam, scene, K)
        except VisibilityError as exc:
            raise FieldOfViewError(f"iteration {k}: {exc}", tb.build()) from exc
        for i, (u, v) in enumerate(current.points):
            if not K.contains(u, v):
                raise FieldOfViewError(f"iteration {k}: feature {i + 1} left the image at ({u:.1f}, {v:.1f})",
                                       tb.build())
        used = current
        if cfg.depth_mode == "constant":
            used = FeatureSet(current.points, np.full(len(current), cfg.z_star))
        V = control_law(used, desired_fs, K, cfg.gain, cfg.damping).vector()
        tb.add(k, q, current.points, V)
        if cfg.stop_tolerance is not None and tb.recs[-1][4] < cfg.stop_tolerance:
            break
        J = map_to_camera_frame(geometric_jacobian(dh, q), cam)
        qdot = resolve_joint_rates(J, V, cfg.damping, cfg.rate_limit)
        q = q + qdot * cfg.dt
    return tb.build()


def replay_pixels(trace: ServoTrace, scene: TargetScene, dh: Sequence[DHRow] = OPENMANIPULATOR_X,
                  K: CameraIntrinsics = ZED_MINI, mount=DEFAULT_MOUNT) -> np.ndarray:
    """Re-render the logged joint angles; (K, N, 2)."""
    return np.array([render_scene_features(camera_pose(dh, q, mount), scene, K).points for q in trace.q])


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV as float arrays keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def read_desired_csv(path: str | Path, n: int = 4) -> np.ndarray:
    """Desired pixels from a ``u1,v1,...,uN,vN`` CSV (header + one row)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    expected = [f"{c}{i}" for i in range(1, n + 1) for c in ("u", "v")]
    if len(rows) != 2 or [h.strip() for h in rows[0]] != expected:
        raise DatasetError(f"{path}: expected header {','.join(expected)} and one data row")
    try:
        return np.array([float(x) for x in rows[1]]).reshape(n, 2)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None


SERVO_KEYS = ("servo.lambda", "servo.dt", "servo.iterations", "servo.stop_tolerance", "servo.damping",
              "servo.depth_mode", "servo.z_star", "servo.rate_limit", "servo.q_start", "servo.q_goal",
              "servo.desired_csv", "scene.center", "scene.side", "mount.rotation")


def servo_config_from(settings: Mapping[str, str]) -> ServoConfig:
    """Reproduction-mode config (no early stop unless ``servo.stop_tolerance`` is set)."""
    tol = settings.get("servo.stop_tolerance", "none").strip().lower()
    z_star = settings.get("servo.z_star")
    return ServoConfig(
        gain=cfgmod.as_float(settings, "servo.lambda", 1.0),
        dt=cfgmod.as_float(settings, "servo.dt", 0.005),
        iterations=cfgmod.as_int(settings, "servo.iterations", 1500),
        stop_tolerance=None if tol in ("none", "") else cfgmod.as_float(settings, "servo.stop_tolerance", 0.5),
        damping=cfgmod.as_float(settings, "servo.damping", DEFAULT_DAMPING),
        depth_mode=settings.get("servo.depth_mode", "true").strip(),
        z_star=None if z_star is None else cfgmod.as_float(settings, "servo.z_star", 0.0),
        rate_limit=cfgmod.as_float(settings, "servo.rate_limit", DEFAULT_RATE_LIMIT),
    )


def scene_from(settings: Mapping[str, str]) -> TargetScene:
    center = cfgmod.as_floats(settings, "scene.center", [0.11, 0.0, 0.0])
    if len(center) != 3:
        raise ConfigError("scene.center needs 3 numbers")
    return square_target(tuple(center), cfgmod.as_float(settings, "scene.side", 0.04))


def mount_from(settings: Mapping[str, str]) -> np.ndarray:
    vals = cfgmod.as_floats(settings, "mount.rotation")
    if vals is None:
        return DEFAULT_MOUNT
    if len(vals) != 9:
        raise ConfigError("mount.rotation needs 9 numbers (row-major 3x3)")
    R = np.array(vals).reshape(3, 3)
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or not np.isclose(np.linalg.det(R), 1.0, atol=1e-9):
        raise ConfigError("mount.rotation is not a proper rotation")
    return R


def features_visible(q, scene: TargetScene, dh=OPENMANIPULATOR_X, K: CameraIntrinsics = ZED_MINI,
                     margin: float = 0.0, mount=DEFAULT_MOUNT) -> bool:
    try:
        fs = render_scene_features(camera_pose(dh, q, mount), scene, K)
    except VisibilityError:
        return False
    return all(K.contains(u, v, margin) for u, v in fs.points)


def sample_pairs(n: int, seed: int, scene: TargetScene | None = None, dh=OPENMANIPULATOR_X,
                 K: CameraIntrinsics = ZED_MINI, goal_spread: float = 0.1, start_spread: float = 0.15,
                 margin: float = 60.0, mount=DEFAULT_MOUNT) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded (q_start, q_goal) pairs around :data:`NOMINAL_Q` with the target
    inside the image (by ``margin`` px) at both ends."""
    scene = scene if scene is not None else square_target()
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        qg = NOMINAL_Q + rng.uniform(-goal_spread, goal_spread, 4)
        qs = qg + rng.uniform(-start_spread, start_spread, 4)
        if features_visible(qg, scene, dh, K, margin, mount) and features_visible(qs, scene, dh, K, margin, mount):
            pairs.append((qs, qg))
    return pairs
