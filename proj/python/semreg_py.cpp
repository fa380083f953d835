#include "semreg/bench.hpp"
#include "semreg/calibration.hpp"
#include "semreg/common.hpp"
#include "semreg/config.hpp"
#include "semreg/fusion.hpp"
#include "semreg/io.hpp"
#include "semreg/mesh.hpp"
#include "semreg/raycast.hpp"
#include "semreg/registration.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace semreg;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_vec3(const Points& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be N x 3");
  const auto r = a.unchecked<2>();
  std::vector<Vec3> out(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

py::array_t<double> from_vec3(const std::vector<Vec3>& v) {
  py::array_t<double> a({py::ssize_t(v.size()), py::ssize_t(3)});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int k = 0; k < 3; ++k) w(i, k) = v[i][k];
  return a;
}

Quat quat_wxyz(const Eigen::Vector4d& q) { return Quat(q[0], q[1], q[2], q[3]); }
Eigen::Vector4d wxyz(const Quat& q) { return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()); }

// JSON crosses the boundary as text; the Python package decodes it.
nlohmann::json parse(const std::string& s) { return s.empty() ? nlohmann::json::object() : nlohmann::json::parse(s); }

PipelineConfig config_from(const std::string& overrides) {
  PipelineConfig c;
  apply_config_json(c, parse(overrides));
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semantic segmentation + ICP registration with label-aware surfel fusion";

  static py::exception<Error> error(m, "SemregError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      instance.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  m.def("set_num_threads", &set_num_threads, py::arg("n"));
  m.def("num_threads", &num_threads);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector4d& q, const Vec3& t) { return Pose(quat_wxyz(q), t); }), py::arg("quaternion"),
           py::arg("translation"))
      .def_static("identity", &Pose::identity)
      .def_static("from_axis_angle", &Pose::from_axis_angle, py::arg("axis"), py::arg("angle"),
                  py::arg("translation") = Vec3::Zero())
      .def_static("from_matrix", [](const Eigen::Matrix4d& T) {
        return Pose(Mat3(T.topLeftCorner<3, 3>()), Vec3(T.topRightCorner<3, 1>()));
      })
      .def_property_readonly("quaternion", [](const Pose& p) { return wxyz(p.rotation()); })
      .def_property_readonly("translation", [](const Pose& p) { return Vec3(p.translation()); })
      .def("matrix", &Pose::matrix)
      .def("inverse", &Pose::inverse)
      .def("__mul__", &Pose::operator*)
      .def("transform_points", [](const Pose& p, const Points& a) {
        auto v = to_vec3(a, "points");
        for (auto& x : v) x = p.transform_point(x);
        return from_vec3(v);
      })
      .def("__repr__", [](const Pose& p) { return "Pose(" + pose_to_json(p).dump() + ")"; });

  m.def("quaternion_angle", [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return quaternion_angle(quat_wxyz(a).normalized(), quat_wxyz(b).normalized());
  }, "rotation angle in degrees between two (w, x, y, z) quaternions");
  m.def("pose_error", [](const Pose& estimate, const Pose& truth) {
    const PoseError e = pose_error(estimate, truth);
    return py::make_tuple(e.translation_norm, e.angle);
  }, py::arg("estimate"), py::arg("truth"), "(translation meters, angle degrees)");
  m.def("is_success", [](double t, double a) { return is_success({t, a}); }, py::arg("translation"), py::arg("angle"));

  py::class_<LabeledPointCloud>(m, "PointCloud")
      .def(py::init([](const Points& points, std::optional<py::array_t<Label>> labels, std::optional<Points> normals) {
             LabeledPointCloud c;
             c.points = to_vec3(points, "points");
             if (labels) {
               c.labels.assign(labels->data(), labels->data() + labels->size());
             } else {
               c.labels.assign(c.points.size(), Label(1));
             }
             if (normals) c.normals = to_vec3(*normals, "normals");
             c.validate();
             return c;
           }),
           py::arg("points"), py::arg("labels") = py::none(), py::arg("normals") = py::none())
      .def_property_readonly("points", [](const LabeledPointCloud& c) { return from_vec3(c.points); })
      .def_property_readonly("labels", [](const LabeledPointCloud& c) { return py::array_t<Label>(c.labels.size(), c.labels.data()); })
      .def_property_readonly("normals", [](const LabeledPointCloud& c) -> py::object {
        if (!c.has_normals()) return py::none();
        return from_vec3(c.normals);
      })
      .def("__len__", &LabeledPointCloud::size)
      .def("centroid", &LabeledPointCloud::centroid)
      .def("transformed", [](const LabeledPointCloud& c, const Pose& p) { return apply(p, c); })
      .def("crop", &crop_by_label, py::arg("label"));
  m.def("read_ply", &read_ply, py::arg("path"));
  m.def("write_ply", [](const std::filesystem::path& p, const LabeledPointCloud& c) { write_ply(p, c); }, py::arg("path"),
        py::arg("cloud"));

  py::class_<TriangleMesh>(m, "TriangleMesh")
      .def(py::init([](const Points& vertices, const py::array_t<std::int64_t>& triangles) {
             TriangleMesh mesh;
             mesh.vertices = to_vec3(vertices, "vertices");
             if (triangles.ndim() != 2 || triangles.shape(1) != 3)
               throw Error(ErrorKind::InvalidArgument, "triangles must be M x 3");
             const auto r = triangles.unchecked<2>();
             for (py::ssize_t i = 0; i < triangles.shape(0); ++i)
               mesh.triangles.push_back({std::uint32_t(r(i, 0)), std::uint32_t(r(i, 1)), std::uint32_t(r(i, 2))});
             mesh.validate();
             return mesh;
           }),
           py::arg("vertices"), py::arg("triangles"))
      .def_property_readonly("vertices", [](const TriangleMesh& t) { return from_vec3(t.vertices); })
      .def_property_readonly("triangles", [](const TriangleMesh& t) {
        py::array_t<std::int64_t> a({py::ssize_t(t.triangles.size()), py::ssize_t(3)});
        auto w = a.mutable_unchecked<2>();
        for (std::size_t i = 0; i < t.triangles.size(); ++i)
          for (int k = 0; k < 3; ++k) w(i, k) = t.triangles[i][k];
        return a;
      })
      .def("bounding_radius", &TriangleMesh::bounding_radius, py::arg("center") = Vec3::Zero());
  m.def("make_box", &make_box, py::arg("size"), py::arg("center") = Vec3::Zero());
  m.def("make_icosphere", &make_icosphere, py::arg("radius"), py::arg("subdivisions"), py::arg("center") = Vec3::Zero());
  m.def("make_cylinder", &make_cylinder, py::arg("radius"), py::arg("height"), py::arg("segments"),
        py::arg("base") = Vec3::Zero());
  m.def("read_mesh", &read_mesh, py::arg("path"));

  m.def("calibrate", [](const Points& world, const Points& pixels, const std::string& initial, const std::string& config) {
    const auto w = to_vec3(world, "world");
    if (pixels.ndim() != 2 || pixels.shape(1) != 2 || pixels.shape(0) != py::ssize_t(w.size()))
      throw Error(ErrorKind::InvalidArgument, "pixels must be N x 2 matching world");
    const auto px = pixels.unchecked<2>();
    std::vector<CalibrationObservation> obs;
    for (std::size_t i = 0; i < w.size(); ++i) obs.push_back({w[i], Vec2(px(i, 0), px(i, 1))});
    const PipelineConfig c = config_from(config);
    const CameraModel init = camera_from_json(parse(initial));
    CalibrationResult r;
    {
      py::gil_scoped_release release;
      r = calibrate(obs, init, calibration_bounds(c, init), c.calibration.optimizer);
    }
    nlohmann::json j{{"camera", camera_to_json(r.model)}, {"mean_pixel_error", r.mean_pixel_error},
                     {"iterations", r.iterations}, {"converged", r.converged}};
    return j.dump();
  }, py::arg("world"), py::arg("pixels"), py::arg("initial"), py::arg("config") = "");

  py::class_<CandidateCrop>(m, "CandidateCrop")
      .def_readonly("cloud", &CandidateCrop::cloud)
      .def_readonly("camera_pose", &CandidateCrop::camera_pose)
      .def_readonly("resolution", &CandidateCrop::resolution)
      .def_property_readonly("viewpoint", [](const CandidateCrop& c) {
        return py::make_tuple(c.viewpoint.azimuth, c.viewpoint.elevation, c.viewpoint.distance);
      });
  m.def("generate_candidate_library", [](const TriangleMesh& mesh, double az, double el, double distance, int res, Label label) {
    py::gil_scoped_release release;
    return generate_candidate_library(mesh, az, el, distance, res, label).views;
  }, py::arg("mesh"), py::arg("azimuth_step") = 30.0, py::arg("elevation_step") = 30.0, py::arg("distance") = 1.0,
     py::arg("resolution") = 250, py::arg("label") = 1);
  m.def("load_library", [](const std::filesystem::path& p) { return load_library(p).views; }, py::arg("path"));

  py::enum_<IcpVariant>(m, "IcpVariant")
      .value("point_to_point", IcpVariant::PointToPoint)
      .value("point_to_plane", IcpVariant::PointToPlane);
  py::class_<IcpParams>(m, "IcpParams")
      .def(py::init<>())
      .def_readwrite("max_iterations", &IcpParams::max_iterations)
      .def_readwrite("correspondence_max_distance", &IcpParams::correspondence_max_distance)
      .def_readwrite("convergence_translation", &IcpParams::convergence_translation)
      .def_readwrite("convergence_rotation", &IcpParams::convergence_rotation)
      .def_readwrite("fitness_epsilon", &IcpParams::fitness_epsilon)
      .def_readwrite("variant", &IcpParams::variant);
  py::class_<RegistrationResult>(m, "RegistrationResult")
      .def_readonly("pose", &RegistrationResult::pose)
      .def_readonly("fitness", &RegistrationResult::fitness)
      .def_readonly("rmse", &RegistrationResult::rmse)
      .def_readonly("iterations", &RegistrationResult::iterations)
      .def_readonly("converged", &RegistrationResult::converged)
      .def_readonly("candidate_index", &RegistrationResult::candidate_index)
      .def_readonly("icp_calls", &RegistrationResult::icp_calls)
      .def_readonly("cost_history", &RegistrationResult::cost_history);
  m.def("centroid_seed", &centroid_seed, py::arg("scene"));
  m.def("icp", [](const LabeledPointCloud& model, const LabeledPointCloud& scene, const Pose& seed, const IcpParams& p) {
    py::gil_scoped_release release;
    return icp(model, scene, seed, p);
  }, py::arg("model"), py::arg("scene"), py::arg("seed"), py::arg("params") = IcpParams{});
  m.def("fitness", py::overload_cast<const LabeledPointCloud&, const LabeledPointCloud&, const Pose&, double>(&fitness),
        py::arg("model"), py::arg("scene"), py::arg("pose"), py::arg("epsilon"));
  m.def("register_object", [](const std::vector<CandidateCrop>& library, const LabeledPointCloud& scene,
                              std::optional<Pose> prior, const IcpParams& p, double max_translation, double max_angle,
                              const Pose& viewer) {
    py::gil_scoped_release release;
    return register_object(library, scene, prior, p, PruneThresholds{max_translation, max_angle}, viewer);
  }, py::arg("library"), py::arg("scene"), py::arg("prior") = py::none(), py::arg("params") = IcpParams{},
     py::arg("max_translation") = 0.5, py::arg("max_angle") = 45.0, py::arg("viewer") = Pose::identity());

  py::class_<SurfelMap>(m, "SurfelMap")
      .def(py::init<>())
      .def("__len__", &SurfelMap::size)
      .def_readonly("frame_count", &SurfelMap::frame_count)
      .def("extract", &extract_cloud, py::arg("min_confidence") = 0.0);
  py::class_<LabeledFrame>(m, "LabeledFrame")
      .def_property_readonly("depth", [](const LabeledFrame& f) {
        return py::array_t<float>({f.height(), f.width()}, f.depth.data());
      })
      .def_property_readonly("labels", [](const LabeledFrame& f) {
        return py::array_t<Label>({f.height(), f.width()}, f.labels.data());
      })
      .def("backproject", [](const LabeledFrame& f) { return backproject(f); });
  m.def("load_frames", [](const std::filesystem::path& dir) {
    auto seq = load_frames(dir);
    return py::make_tuple(seq.frames, seq.poses);
  }, py::arg("path"), "(frames, ground-truth poses or None)");
  m.def("integrate_frame", [](SurfelMap& map, const LabeledFrame& f, const Pose& pose) { integrate_frame(map, f, pose); },
        py::arg("map"), py::arg("frame"), py::arg("camera_from_world"));
  m.def("track_camera", [](const SurfelMap& map, const LabeledFrame& f, const Pose& previous) {
    py::gil_scoped_release release;
    const TrackingResult r = track_camera(map, f, previous);
    return py::make_tuple(r.pose, r.residual_rms);
  }, py::arg("map"), py::arg("frame"), py::arg("previous_pose"), "(camera_from_world, residual rms meters)");

  m.def("save_demo_scene", [](const std::filesystem::path& dir) { save_scene(dir, demo_scene()); }, py::arg("path"));
  m.def("run_benchmark", [](const std::filesystem::path& scene_path, const std::string& config, std::uint64_t seed) {
    const PipelineConfig c = config_from(config);
    const SyntheticScene scene = load_scene(scene_path);
    PipelineResult r;
    {
      py::gil_scoped_release release;
      r = run_pipeline(scene, c, seed);
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : r.records)
      records.push_back({{"frame", rec.frame}, {"label", rec.object_label}, {"status", to_string(rec.status)},
                         {"translation_error", rec.error.translation_norm}, {"angle_error", rec.error.angle},
                         {"success", rec.success}});
    return nlohmann::json{{"summary", summary_to_json(r.summary)}, {"records", records}}.dump();
  }, py::arg("scene"), py::arg("config") = "", py::arg("seed") = 0);

  m.def("default_config", [] { return config_to_json(PipelineConfig{}).dump(); });
  m.def("check_config", [](const std::string& config) { return config_to_json(config_from(config)).dump(); },
        py::arg("config"));
  m.def("describe_config", &describe_config_fields);
}
