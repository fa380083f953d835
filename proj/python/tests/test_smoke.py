import math

import numpy as np
import pytest

import semreg


def test_pose_round_trip():
    p = semreg.Pose.from_axis_angle([0, 0, 1], math.pi / 2, [1.0, 2.0, 3.0])
    pts = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    out = p.transform_points(pts)
    np.testing.assert_allclose(out, [[1.0, 3.0, 3.0], [1.0, 2.0, 4.0]], atol=1e-12)
    np.testing.assert_allclose((p * p.inverse()).matrix(), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(semreg.Pose.from_matrix(p.matrix()).matrix(), p.matrix(), atol=1e-12)


def test_metrics():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    r = np.array([math.cos(math.radians(10)), 0.0, math.sin(math.radians(10)), 0.0])
    assert semreg.quaternion_angle(q, r) == pytest.approx(20.0)
    assert semreg.quaternion_angle(-q, r) == semreg.quaternion_angle(q, r)
    t, a = semreg.pose_error(semreg.Pose.from_axis_angle([1, 0, 0], math.radians(5), [0.01, 0, 0]), semreg.Pose())
    assert t == pytest.approx(0.01)
    assert a == pytest.approx(5.0)
    assert semreg.is_success(0.049, 14.9)
    assert not semreg.is_success(0.05, 1.0)
    assert not semreg.is_success(0.01, 15.0)


def test_icp_recovers_transform():
    rng = np.random.default_rng(1)
    # random samples on three faces of a box; a pixel-grid crop matched to itself can lock one spacing off
    n = 3000
    u, v = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    face = rng.integers(0, 3, n)
    half = np.array([0.06, 0.04, 0.025])
    pts = np.stack([u, v, np.ones(n)], axis=1)
    pts = np.where(face[:, None] == 0, pts[:, [2, 0, 1]], np.where(face[:, None] == 1, pts[:, [0, 2, 1]], pts)) * half
    model = semreg.PointCloud(pts)
    truth = semreg.Pose.from_axis_angle(rng.normal(size=3), math.radians(4), [0.005, -0.003, 0.002])
    scene = model.transformed(truth)
    r = semreg.icp(model, scene, semreg.Pose())
    assert r.fitness == pytest.approx(1.0)
    t, a = semreg.pose_error(r.pose, truth)
    assert t < 1e-5 and a < 1e-3
    assert all(b <= a_ * (1 + 1e-12) + 1e-18 for a_, b in zip(r.cost_history, r.cost_history[1:]))


def test_register_object_with_prior_prunes():
    mesh = semreg.make_cylinder(0.03, 0.1, 24)
    library = semreg.generate_candidate_library(mesh, 45, 45, 0.6, 48, 2)
    assert len(library) == 8 * 5  # poles are sampled once per azimuth
    world = semreg.Pose.from_axis_angle([0, 0, 1], 0.4, [0.2, 0.1, 0.0])
    scene = library[5].cloud.transformed(world)
    viewer = library[5].camera_pose * world.inverse()
    full = semreg.register_object(library, scene, viewer=viewer)
    pruned = semreg.register_object(library, scene, prior=world, viewer=viewer)
    assert full.fitness >= 0.95
    assert pruned.icp_calls * 2 <= full.icp_calls


def test_point_cloud_arrays():
    pts = np.zeros((3, 3))
    cloud = semreg.PointCloud(pts, np.array([1, 2, 2], dtype=np.uint16))
    assert len(cloud) == 3
    assert len(cloud.crop(2)) == 2
    assert cloud.normals is None
    with pytest.raises(semreg.SemregError) as err:
        semreg.PointCloud(np.zeros((3, 2)))
    assert err.value.kind == "InvalidArgument"


def test_calibrate_noiseless():
    rng = np.random.default_rng(2)
    K = {"fx": 525.0, "fy": 520.0, "cx": 319.5, "cy": 239.5, "k1": 0.05, "k2": -0.1, "p1": 0.001, "p2": -0.001,
         "width": 640, "height": 480}
    z = rng.uniform(0.6, 2.0, 200)
    u = rng.uniform(20, 620, 200)
    v = rng.uniform(20, 460, 200)
    # identity extrinsics; distortion applied to the normalized coordinates
    x, y = (u - K["cx"]) / K["fx"], (v - K["cy"]) / K["fy"]
    world = np.stack([x * z, y * z, z], axis=1)
    r2 = x * x + y * y
    radial = 1 + K["k1"] * r2 + K["k2"] * r2 * r2
    xd = x * radial + 2 * K["p1"] * x * y + K["p2"] * (r2 + 2 * x * x)
    yd = y * radial + K["p1"] * (r2 + 2 * y * y) + 2 * K["p2"] * x * y
    pixels = np.stack([K["fx"] * xd + K["cx"], K["fy"] * yd + K["cy"]], axis=1)
    start = dict(K, fx=540.0, fy=510.0, k1=0.0, k2=0.0, p1=0.0, p2=0.0)
    identity = {"q": [1.0, 0.0, 0.0, 0.0], "t": [0.0, 0.0, 0.0]}
    result = semreg.calibrate(world, pixels, {"intrinsics": start, "extrinsics": identity})
    assert result["converged"]
    assert result["mean_pixel_error"] < 1e-6
    assert result["camera"]["intrinsics"]["fx"] == pytest.approx(525.0, rel=1e-6)


def test_config():
    c = semreg.default_config()
    assert c["bench"]["keyframe_interval"] == 5
    assert semreg.check_config({"icp": {"max_iterations": 7}})["icp"]["max_iterations"] == 7
    with pytest.raises(semreg.SemregError, match="noise.label_flip_rate"):
        semreg.check_config({"noise": {"label_flip_rate": 2.0}})
    assert "fusion.label_weight" in semreg.describe_config()


def test_benchmark_runs(tmp_path):
    semreg.save_demo_scene(tmp_path)
    # two frames at a reduced resolution keep this quick
    import json
    scene = json.loads((tmp_path / "scene.json").read_text())
    scene["trajectory"]["poses"] = scene["trajectory"]["poses"][:1]
    scene["intrinsics"].update(width=160, height=120, fx=131.25, fy=131.25, cx=79.5, cy=59.5)
    (tmp_path / "small.json").write_text(json.dumps(scene))
    out = semreg.run_benchmark(tmp_path / "small.json", {"bench": {"mode": "single-frame", "keyframe_interval": 1}})
    assert out["summary"]["records"] == 3
    assert len(out["records"]) == 3
