import math

import numpy as np
import pytest

from servokit.camera import ZED_MINI, interaction_matrix
from servokit.errors import ConfigError, FieldOfViewError, SingularityError, VisibilityError
from servokit.kinematics import (OPENMANIPULATOR_X, RigidPose, camera_pose, geometric_jacobian,
                                 map_to_camera_frame)
from servokit.servo import (NOMINAL_Q, FeatureSet, ServoConfig, TargetScene, control_law, read_desired_csv,
                            read_trace_csv, render_scene_features, replay_pixels, run_servo, sample_pairs,
                            square_target)

K = ZED_MINI
DOWN = np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])  # optical axis along world -z


def fs(points, depths=None):
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return FeatureSet(points, np.ones(len(points)) if depths is None else depths)


def test_control_law_zero_error():
    f = fs([[600, 300], [700, 300], [700, 400], [600, 400]], [0.2, 0.2, 0.25, 0.25])
    V = control_law(f, f, K, 1.0)
    np.testing.assert_array_equal(V.vector(), np.zeros(6))


def test_control_law_single_point_least_norm():
    cur = fs([[K.u0, K.v0]])
    des = fs([[K.u0 + 10.0, K.v0]])
    L = interaction_matrix((K.u0, K.v0), 1.0)
    e = np.array([10.0, 0.0])
    oracle = L.T @ np.linalg.solve(L @ L.T, e)  # least-norm solution
    V = control_law(cur, des, K, 1.0, damping=1e-3).vector()
    cos = V @ oracle / (np.linalg.norm(V) * np.linalg.norm(oracle))
    assert cos > 1 - 1e-9
    # The 6x6 normal matrix has condition ~fu^2/damping^2, so magnitude agrees to ~1e-5 only.
    assert np.linalg.norm(V) == pytest.approx(np.linalg.norm(oracle), rel=1e-4)


def test_control_law_single_point_undamped_is_singular():
    with pytest.raises(SingularityError):
        control_law(fs([[K.u0, K.v0]]), fs([[K.u0 + 1, K.v0]]), K, 1.0, damping=0.0)


def test_control_law_linear_in_gain(rng):
    cur = fs(rng.uniform([300, 200], [900, 500], (4, 2)), rng.uniform(0.1, 0.3, 4))
    des = fs(rng.uniform([300, 200], [900, 500], (4, 2)))
    V1 = control_law(cur, des, K, 1.0).vector()
    V2 = control_law(cur, des, K, 2.0).vector()
    np.testing.assert_array_equal(V2, 2 * V1)


def test_control_law_feature_permutation(rng):
    pc = rng.uniform([300, 200], [900, 500], (4, 2))
    zc = rng.uniform(0.1, 0.3, 4)
    pd = rng.uniform([300, 200], [900, 500], (4, 2))
    perm = [2, 0, 3, 1]
    V = control_law(fs(pc, zc), fs(pd), K).vector()
    Vp = control_law(fs(pc[perm], zc[perm]), fs(pd[perm]), K).vector()
    np.testing.assert_allclose(Vp, V, rtol=1e-9, atol=1e-12)


def test_control_law_count_mismatch():
    with pytest.raises(ValueError):
        control_law(fs([[1, 2]]), fs([[1, 2], [3, 4]]))


def test_render_centered_square_is_symmetric():
    scene = square_target((0.2, 0.05, 0.0), 0.04)
    cam = RigidPose(DOWN, np.array([0.2, 0.05, 0.3]))
    f = render_scene_features(cam, scene, K)
    np.testing.assert_allclose(f.points[0] + f.points[2], [2 * K.u0, 2 * K.v0], atol=1e-9)
    np.testing.assert_allclose(f.points[1] + f.points[3], [2 * K.u0, 2 * K.v0], atol=1e-9)
    np.testing.assert_allclose(f.depths, 0.3, atol=1e-15)
    # TL, TR, BR, BL in the image.
    assert f.points[0][0] < f.points[1][0] and f.points[0][1] < f.points[3][1]


def test_render_moving_away_shrinks():
    scene = square_target((0.2, 0.0, 0.0), 0.04)
    near = render_scene_features(RigidPose(DOWN, np.array([0.2, 0.0, 0.2])), scene, K).points
    far = render_scene_features(RigidPose(DOWN, np.array([0.2, 0.0, 0.4])), scene, K).points
    c = np.array([K.u0, K.v0])
    assert np.all(np.linalg.norm(far - c, axis=1) < np.linalg.norm(near - c, axis=1))


def test_render_depths_match_pose_transform(rng):
    scene = square_target()
    for qs, _ in sample_pairs(5, 3):
        cam = camera_pose(OPENMANIPULATOR_X, qs)
        T = cam.matrix()
        Tinv = np.linalg.inv(T)  # independent inverse
        z = [(Tinv @ np.append(p, 1.0))[2] for p in scene.points]
        np.testing.assert_allclose(render_scene_features(cam, scene, K).depths, z, rtol=1e-12)


def test_render_behind_camera():
    cam = RigidPose(np.eye(3), np.array([0.0, 0.0, 1.0]))  # looking up, target below
    with pytest.raises(VisibilityError):
        render_scene_features(cam, square_target(), K)


def test_scene_must_be_planar():
    with pytest.raises(ValueError):
        TargetScene(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.1], [1, 1, 0]]))


def test_nominal_pose_sees_canonical_order():
    from servokit.datapipe import reorder_canonical
    f = render_scene_features(camera_pose(OPENMANIPULATOR_X, NOMINAL_Q), square_target(), K)
    np.testing.assert_array_equal(reorder_canonical(f.points), f.points)


def test_run_servo_already_converged():
    cfg = ServoConfig.reproduction(iterations=50)
    tr = run_servo(cfg, q_start=NOMINAL_Q, q_goal=NOMINAL_Q)
    assert len(tr) == 50
    assert np.all(tr.total_error == 0)
    assert np.all(tr.twist == 0)


def test_trace_times_and_integrity():
    qs, qg = sample_pairs(1, 7)[0]
    tr = run_servo(ServoConfig.reproduction(iterations=200), q_start=qs, q_goal=qg)
    assert len(tr) == 200
    assert np.all(np.diff(tr.t) > 0)
    np.testing.assert_allclose(np.diff(tr.t), 0.005, rtol=1e-9)
    replay = replay_pixels(tr, square_target())
    assert np.array_equal(replay, tr.pixels)


def test_trace_csv_round_trip(tmp_path):
    qs, qg = sample_pairs(1, 8)[0]
    tr = run_servo(ServoConfig.reproduction(iterations=30), q_start=qs, q_goal=qg)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == ("iter,t,q1,q2,q3,q4,u1,v1,u2,v2,u3,v3,u4,v4,e1,e2,e3,e4,e_total,"
                      "vx,vy,vz,wx,wy,wz")
    cols = read_trace_csv(path)
    q = np.column_stack([cols[f"q{i}"] for i in range(1, 5)])
    assert np.array_equal(q, tr.q)
    assert np.array_equal(cols["e_total"], tr.total_error)


def test_early_stop():
    qs, qg = sample_pairs(1, 9)[0]
    tr = run_servo(ServoConfig(stop_tolerance=0.5), q_start=qs, q_goal=qg)
    assert len(tr) < 1500
    assert tr.total_error[-1] < 0.5
    assert np.all(tr.total_error[:-1] >= 0.5)


def test_constant_depth_mode_converges():
    qs, qg = sample_pairs(1, 10)[0]
    tr = run_servo(ServoConfig.reproduction(depth_mode="constant", z_star=0.13), q_start=qs, q_goal=qg)
    assert tr.total_error[-1] < 1.0


def test_constant_depth_needs_z_star():
    with pytest.raises(ConfigError):
        ServoConfig(depth_mode="constant")


def test_field_of_view_error_carries_trace():
    qg = NOMINAL_Q
    qs = NOMINAL_Q + np.array([0.0, 0.0, 0.0, 0.1])
    desired = np.array([[5.0, 5.0], [1270.0, 5.0], [1270.0, 715.0], [5.0, 715.0]])  # unreachably large
    with pytest.raises(FieldOfViewError) as info:
        run_servo(ServoConfig.reproduction(), q_start=qs, q_goal=qg, desired=desired)
    assert info.value.trace is not None and len(info.value.trace) > 0


def test_desired_csv(tmp_path):
    p = tmp_path / "desired.csv"
    p.write_text("u1,v1,u2,v2,u3,v3,u4,v4\n1,2,3,4,5,6,7,8\n")
    np.testing.assert_array_equal(read_desired_csv(p), np.arange(1, 9).reshape(4, 2))
    qs, qg = sample_pairs(1, 11)[0]
    desired = render_scene_features(camera_pose(OPENMANIPULATOR_X, qg), square_target(), K).points
    p.write_text("u1,v1,u2,v2,u3,v3,u4,v4\n" + ",".join(repr(float(x)) for x in desired.reshape(-1)) + "\n")
    a = run_servo(ServoConfig.reproduction(iterations=100), q_start=qs, desired=read_desired_csv(p))
    b = run_servo(ServoConfig.reproduction(iterations=100), q_start=qs, q_goal=qg)
    assert np.array_equal(a.total_error, b.total_error)


def test_halving_gain_decays_slower():
    for qs, qg in sample_pairs(5, 12):
        fast = run_servo(ServoConfig.reproduction(gain=1.0, iterations=400), q_start=qs, q_goal=qg)
        slow = run_servo(ServoConfig.reproduction(gain=0.5, iterations=400), q_start=qs, q_goal=qg)
        assert np.all(slow.total_error >= fast.total_error)


def test_monotone_decay():
    for qs, qg in sample_pairs(5, 13):
        e = run_servo(ServoConfig.reproduction(), q_start=qs, q_goal=qg).total_error
        assert np.all(e[1:] <= e[:-1] * 1.01)


def test_frame_convention_finite_difference():
    # Pixel motion from re-rendering after a small joint step matches L * (J_cam * qdot).
    rng = np.random.default_rng(5)
    scene = square_target()
    h = 1e-5
    for qs, _ in sample_pairs(20, 14):
        qdot = rng.uniform(-0.5, 0.5, 4)
        cam = camera_pose(OPENMANIPULATOR_X, qs)
        f0 = render_scene_features(cam, scene, K)
        V = map_to_camera_frame(geometric_jacobian(OPENMANIPULATOR_X, qs), cam).entries @ qdot
        pred = np.concatenate([interaction_matrix(p, z, K) @ V for p, z in zip(f0.points, f0.depths)])
        f1 = render_scene_features(camera_pose(OPENMANIPULATOR_X, qs + h * qdot), scene, K)
        fd = (f1.stacked() - f0.stacked()) / h
        assert np.linalg.norm(pred - fd) / np.linalg.norm(fd) < 1e-2


def test_wrong_frame_convention_is_detected():
    # Using the camera-to-world rotation instead breaks the check above.
    scene = square_target()
    qs, _ = sample_pairs(1, 15)[0]
    qdot = np.array([0.3, -0.2, 0.4, 0.1])
    cam = camera_pose(OPENMANIPULATOR_X, qs)
    Ja = geometric_jacobian(OPENMANIPULATOR_X, qs).entries
    R = cam.rotation
    V_wrong = np.concatenate([R @ Ja[:3] @ qdot, R @ Ja[3:] @ qdot])
    f0 = render_scene_features(cam, scene, K)
    pred = np.concatenate([interaction_matrix(p, z, K) @ V_wrong for p, z in zip(f0.points, f0.depths)])
    f1 = render_scene_features(camera_pose(OPENMANIPULATOR_X, qs + 1e-5 * qdot), scene, K)
    fd = (f1.stacked() - f0.stacked()) / 1e-5
    assert np.linalg.norm(pred - fd) / np.linalg.norm(fd) > 0.1


def test_servo_config_validation():
    with pytest.raises(ConfigError):
        ServoConfig(gain=0)
    with pytest.raises(ConfigError):
        ServoConfig(dt=-1)
    with pytest.raises(ConfigError):
        ServoConfig(iterations=0)
