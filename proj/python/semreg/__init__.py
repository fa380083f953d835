"""Python bindings for the semreg pipeline.

Config, calibration and benchmark results travel as plain dicts.
"""

import json as _json

from . import _core
from ._core import (
    CandidateCrop,
    IcpParams,
    IcpVariant,
    LabeledFrame,
    PointCloud,
    Pose,
    RegistrationResult,
    SemregError,
    SurfelMap,
    TriangleMesh,
    centroid_seed,
    describe_config,
    fitness,
    generate_candidate_library,
    icp,
    integrate_frame,
    is_success,
    load_frames,
    load_library,
    make_box,
    make_cylinder,
    make_icosphere,
    num_threads,
    pose_error,
    quaternion_angle,
    read_mesh,
    read_ply,
    register_object,
    save_demo_scene,
    set_num_threads,
    track_camera,
    write_ply,
)

__all__ = [name for name in dir(_core) if not name.startswith("_")] + ["default_config", "check_config"]


def _dump(obj):
    return "" if obj is None else _json.dumps(obj)


def default_config():
    return _json.loads(_core.default_config())


def check_config(config):
    """Full config after applying the partial dict `config`; raises SemregError naming a bad field."""
    return _json.loads(_core.check_config(_dump(config)))


def calibrate(world, pixels, initial, config=None):
    """initial: {"intrinsics": {...}, "extrinsics": pose}. Returns camera, mean_pixel_error, iterations, converged."""
    return _json.loads(_core.calibrate(world, pixels, _json.dumps(initial), _dump(config)))


def run_benchmark(scene, config=None, seed=0):
    return _json.loads(_core.run_benchmark(str(scene), _dump(config), seed))
