#include "semreg/fusion.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace semreg {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr std::size_t kGrain = 4096;

std::size_t chunk_count(std::size_t n) { return (n + kGrain - 1) / kGrain; }

}  // namespace

LabeledFrame LabeledFrame::blank(const CameraIntrinsics& intrinsics, int timestamp) {
  LabeledFrame f;
  f.intrinsics = intrinsics;
  f.timestamp = timestamp;
  f.depth.assign(f.pixel_count(), 0.0f);
  f.labels.assign(f.pixel_count(), kBackgroundLabel);
  return f;
}

void LabeledFrame::validate(double max_range) const {
  intrinsics.validate();
  if (depth.size() != pixel_count() || labels.size() != pixel_count())
    throw Error(ErrorKind::InvalidArgument, "frame buffers do not match the intrinsics resolution");
  for (float d : depth)
    if (!(d >= 0.0f) || d > max_range)
      throw Error(ErrorKind::InvalidArgument, "frame depth outside [0, max_range]");
}

LabelCostMode parse_label_cost_mode(const std::string& name) {
  if (name == "squared") return LabelCostMode::Squared;
  if (name == "indicator") return LabelCostMode::Indicator;
  throw Error(ErrorKind::InvalidArgument, "unknown label_cost_mode '" + name + "' (squared|indicator)");
}

const char* to_string(LabelCostMode mode) { return mode == LabelCostMode::Squared ? "squared" : "indicator"; }

void FusionParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive");
  };
  if (!(label_weight >= 0)) throw Error(ErrorKind::InvalidArgument, "label_weight must be non-negative");
  positive(max_range, "max_range");
  positive(tracking_lost_rms, "tracking_lost_rms");
  positive(merge_radius, "merge_radius");
  positive(merge_angle, "merge_angle");
  positive(merge_depth_band, "merge_depth_band");
  positive(smoothing_depth_sigma, "smoothing_depth_sigma");
  positive(depth_jump, "depth_jump");
  positive(association_distance, "association_distance");
  positive(association_distance_fine, "association_distance_fine");
  if (!(splat_depth_tolerance >= 0))
    throw Error(ErrorKind::InvalidArgument, "splat_depth_tolerance must be non-negative");
  positive(association_angle, "association_angle");
  positive(convergence_translation, "convergence_translation");
  positive(convergence_rotation, "convergence_rotation");
  positive(label_search_translation, "label_search_translation");
  positive(label_search_rotation, "label_search_rotation");
  if (min_valid_pixels < 1 || active_window < 1 || smoothing_radius < 0 || normal_step < 1 ||
      gauss_newton_iterations < 1 || label_search_scales < 0 || label_search_rounds < 0)
    throw Error(ErrorKind::InvalidArgument, "fusion integer parameters out of range");
}

FramePoints backproject_frame(const LabeledFrame& frame, const FusionParams& params) {
  frame.validate(params.max_range);
  const int W = frame.width(), H = frame.height();
  const auto& K = frame.intrinsics;
  const std::size_t N = frame.pixel_count();

  std::vector<float> smooth(N, 0.0f);
  const int R = params.smoothing_radius;
  const double sd2 = params.smoothing_depth_sigma * params.smoothing_depth_sigma;
  const double ss2 = std::max(1.0, double(R) * R);
  std::vector<double> spatial((2 * R + 1) * (2 * R + 1));
  for (int dv = -R; dv <= R; ++dv)
    for (int du = -R; du <= R; ++du) spatial[(dv + R) * (2 * R + 1) + du + R] = std::exp(-(du * du + dv * dv) / (2.0 * ss2));
  parallel_for(static_cast<std::size_t>(H), 8, [&](std::size_t b, std::size_t e) {
    for (int v = int(b); v < int(e); ++v)
      for (int u = 0; u < W; ++u) {
        const double z0 = frame.depth[std::size_t(v) * W + u];
        if (z0 <= 0) continue;
        // taps are taken in mirrored pairs so locally linear depth passes through unchanged
        double wsum = 1.0, zsum = z0;
        auto depth_at = [&](int uu, int vv) {
          return uu < 0 || uu >= W || vv < 0 || vv >= H ? 0.0 : double(frame.depth[std::size_t(vv) * W + uu]);
        };
        for (int dv = 0; dv <= R; ++dv)
          for (int du = -R; du <= R; ++du) {
            if (dv == 0 && du <= 0) continue;
            const double za = depth_at(u + du, v + dv), zb = depth_at(u - du, v - dv);
            if (za <= 0 || zb <= 0) continue;
            const double da = za - z0, db = zb - z0;
            if (da * da > 9.0 * sd2 || db * db > 9.0 * sd2) continue;
            const double s = spatial[(dv + R) * (2 * R + 1) + du + R];
            const double wa = s * std::exp(-da * da / (2.0 * sd2)), wb = s * std::exp(-db * db / (2.0 * sd2));
            const double w = std::min(wa, wb);
            wsum += 2.0 * w;
            zsum += w * (za + zb);
          }
        smooth[std::size_t(v) * W + u] = float(zsum / wsum);
      }
  });

  auto unproject = [&](int u, int v, double z) {
    return Vec3((u - K.c.x()) / K.f.x() * z, (v - K.c.y()) / K.f.y() * z, z);
  };

  const int s = params.normal_step;
  std::vector<Vec3> normals(N, Vec3::Zero());
  parallel_for(static_cast<std::size_t>(H), 8, [&](std::size_t b, std::size_t e) {
    for (int v = int(b); v < int(e); ++v) {
      if (v - s < 0 || v + s >= H) continue;
      for (int u = s; u + s < W; ++u) {
        const std::size_t i = std::size_t(v) * W + u;
        const double z = frame.depth[i];
        if (z <= 0) continue;
        const std::size_t nb[4] = {i - s, i + s, i - std::size_t(s) * W, i + std::size_t(s) * W};
        bool ok = true;
        for (std::size_t j : nb) {
          const double zj = frame.depth[j];
          if (zj <= 0 || std::abs(zj - z) > params.depth_jump) ok = false;
        }
        if (!ok) continue;
        const Vec3 dx = unproject(u + s, v, smooth[nb[1]]) - unproject(u - s, v, smooth[nb[0]]);
        const Vec3 dy = unproject(u, v + s, smooth[nb[3]]) - unproject(u, v - s, smooth[nb[2]]);
        Vec3 n = dx.cross(dy);
        const double len = n.norm();
        if (!(len > 0)) continue;
        n /= len;
        if (n.dot(unproject(u, v, z)) > 0) n = -n;
        normals[i] = n;
      }
    }
  });

  FramePoints out;
  out.cloud.reserve(N, true);
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const std::size_t i = std::size_t(v) * W + u;
      const double z = frame.depth[i];
      if (z <= 0) continue;
      const Vec3 p = unproject(u, v, z);
      const bool valid = normals[i].squaredNorm() > 0;
      out.cloud.push_back(p, frame.labels[i], valid ? normals[i] : Vec3(-p.normalized()));
      out.pixel.push_back(static_cast<std::uint32_t>(i));
      out.normal_valid.push_back(valid ? 1 : 0);
    }
  return out;
}

LabeledPointCloud backproject(const LabeledFrame& frame, const FusionParams& params) {
  return backproject_frame(frame, params).cloud;
}

MapRender render_map(const SurfelMap& map, const CameraIntrinsics& K, const Pose& pose, int min_last_seen,
                     double depth_tolerance) {
  MapRender out;
  out.width = K.width;
  out.height = K.height;
  const std::size_t N = std::size_t(K.width) * K.height;
  constexpr std::uint64_t kEmpty = std::numeric_limits<std::uint64_t>::max();
  const Mat3 R = pose.rotation_matrix();
  const Vec3 t = pose.translation();
  const double fm = K.mean_focal();

  auto atomic_min = [](std::uint64_t& slot, std::uint64_t key) {
    std::atomic_ref<std::uint64_t> cell(slot);
    std::uint64_t cur = cell.load(std::memory_order_relaxed);
    while (key < cur && !cell.compare_exchange_weak(cur, key, std::memory_order_relaxed)) {
    }
  };
  struct Splat {
    double x, y, r;
    float z;
  };
  std::vector<Splat> splats(map.size(), Splat{0, 0, 0, 0.0f});
  parallel_for(map.size(), kGrain, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const Surfel& s = map.surfels[k];
      if (s.last_seen < min_last_seen) continue;
      const Vec3 p = R * s.position + t;
      if (p.z() <= 1e-6) continue;
      if ((R * s.normal).dot(p) > 0) continue;
      splats[k] = {K.f.x() * p.x() / p.z() + K.c.x(), K.f.y() * p.y() / p.z() + K.c.y(),
                   std::min(8.0, s.radius * fm / p.z()), static_cast<float>(p.z())};
    }
  });
  // visit(k, pixel, depth, squared pixel distance) for every pixel surfel k covers
  auto splat = [&](auto&& visit) {
    parallel_for(map.size(), kGrain, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const auto [x, y, r, z] = splats[k];
        if (z <= 0.0f) continue;
        const long u0 = std::lround(x), v0 = std::lround(y);
        if (u0 >= 0 && u0 < K.width && v0 >= 0 && v0 < K.height)
          visit(k, std::size_t(v0) * K.width + u0, z, (u0 - x) * (u0 - x) + (v0 - y) * (v0 - y));
        const long ulo = std::max<long>(0, long(std::ceil(x - r))), uhi = std::min<long>(K.width - 1, long(std::floor(x + r)));
        const long vlo = std::max<long>(0, long(std::ceil(y - r))), vhi = std::min<long>(K.height - 1, long(std::floor(y + r)));
        for (long v = vlo; v <= vhi; ++v)
          for (long u = ulo; u <= uhi; ++u) {
            if (u == u0 && v == v0) continue;
            const double du = u - x, dv = v - y;
            if (du * du + dv * dv < r * r) visit(k, std::size_t(v) * K.width + u, z, du * du + dv * dv);
          }
      }
    });
  };

  std::vector<std::uint64_t> zbuf(N, kEmpty);
  splat([&](std::size_t k, std::size_t i, float z, double) {
    atomic_min(zbuf[i], (std::uint64_t(std::bit_cast<std::uint32_t>(z)) << 32) | std::uint64_t(k));
  });

  if (depth_tolerance > 0) {
    // among surfels within the tolerance of the front depth: most confident, then most central
    std::vector<std::uint64_t> pick(N, kEmpty);
    splat([&](std::size_t k, std::size_t i, float z, double d2) {
      if (zbuf[i] == kEmpty) return;
      const float front = std::bit_cast<float>(static_cast<std::uint32_t>(zbuf[i] >> 32));
      if (z > front + depth_tolerance) return;
      const double c = std::clamp(map.surfels[k].confidence, 0.0, 65535.0);
      const std::uint64_t rank_c = 65535 - static_cast<std::uint64_t>(c);
      const std::uint64_t rank_d = static_cast<std::uint64_t>(std::min(d2, 65.0) * 1000.0);
      atomic_min(pick[i], (rank_c << 48) | (rank_d << 32) | std::uint64_t(k));
    });
    for (std::size_t i = 0; i < N; ++i) {
      if (pick[i] == kEmpty) continue;
      const std::size_t k = pick[i] & 0xffffffffu;
      zbuf[i] = (std::uint64_t(std::bit_cast<std::uint32_t>(splats[k].z)) << 32) | std::uint64_t(k);
    }
  }

  out.index.resize(N);
  out.depth.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    if (zbuf[i] == kEmpty) {
      out.index[i] = MapRender::kNoSurfel;
      out.depth[i] = 0.0f;
    } else {
      out.index[i] = static_cast<std::uint32_t>(zbuf[i] & 0xffffffffu);
      out.depth[i] = std::bit_cast<float>(static_cast<std::uint32_t>(zbuf[i] >> 32));
    }
  }
  return out;
}

double label_cost(const LabeledFrame& frame, const MapRender& render, const SurfelMap& map, LabelCostMode mode) {
  if (render.width != frame.width() || render.height != frame.height())
    throw Error(ErrorKind::InvalidArgument, "render and frame sizes differ");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    if (frame.depth[i] <= 0 || render.index[i] == MapRender::kNoSurfel) continue;
    const std::int64_t d = std::int64_t(frame.labels[i]) - std::int64_t(map.surfels[render.index[i]].label);
    total += mode == LabelCostMode::Squared ? d * d : (d != 0);
  }
  return static_cast<double>(total);
}

double label_cost(const LabeledFrame& frame, const SurfelMap& map, const Pose& candidate_pose, LabelCostMode mode,
                  int min_last_seen, double depth_tolerance) {
  return label_cost(frame, render_map(map, frame.intrinsics, candidate_pose, min_last_seen, depth_tolerance), map,
                    mode);
}

namespace {

struct GeometricTerms {
  Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  double sse = 0.0;        // m^2, associated pairs
  double truncated = 0.0;  // m^2, every usable point, capped at the gate
  std::size_t count = 0;

  void add(const GeometricTerms& o) {
    H += o.H;
    g += o.g;
    sse += o.sse;
    truncated += o.truncated;
    count += o.count;
  }
};

/// Projective point-to-plane association of frame points against a prediction
/// rendered from `prediction_pose`.
class Associator {
 public:
  Associator(const SurfelMap& map, const FramePoints& points, const MapRender& prediction, const Pose& prediction_pose,
             const CameraIntrinsics& K, const FusionParams& params)
      : map_(map), points_(points), prediction_(prediction), Rp_(prediction_pose.rotation_matrix()),
        tp_(prediction_pose.translation()), K_(K), min_cos_(std::cos(params.association_angle * kDegToRad)) {
    for (std::size_t i = 0; i < points.cloud.size(); ++i)
      if (points.normal_valid[i]) usable_.push_back(static_cast<std::uint32_t>(i));
  }

  /// Drops usable points without an association at full resolution under `world_from_camera`.
  void keep_associated(const Pose& world_from_camera, double max_distance) {
    std::vector<std::uint32_t> kept;
    for (std::uint32_t i : usable_)
      if (associate(i, world_from_camera.rotation_matrix(), world_from_camera.translation(), max_distance * max_distance))
        kept.push_back(i);
    usable_ = std::move(kept);
  }

  /// Accumulates terms over usable points whose pixel lies on the stride grid.
  GeometricTerms evaluate(const Pose& world_from_camera, int stride, double max_distance, bool jacobian) const {
    const double max_d2 = max_distance * max_distance;
    const int W = K_.width;
    const Mat3 Rw = world_from_camera.rotation_matrix();
    const Vec3 tw = world_from_camera.translation();
    std::vector<GeometricTerms> partial(chunk_count(usable_.size()));
    parallel_for(usable_.size(), kGrain, [&](std::size_t b, std::size_t e) {
      GeometricTerms acc;
      for (std::size_t k = b; k < e; ++k) {
        const std::uint32_t i = usable_[k];
        const std::uint32_t px = points_.pixel[i];
        if (stride > 1 && ((px % W) % stride != 0 || (px / W) % stride != 0)) continue;
        acc.truncated += max_d2;
        const Vec3 x = Rw * points_.cloud.points[i] + tw;
        const Surfel* match = associate(i, Rw, tw, max_d2);
        if (!match) continue;
        const Surfel& surfel = *match;
        const Vec3 diff = x - surfel.position;
        const double r = surfel.normal.dot(diff);
        acc.sse += r * r;
        acc.truncated += r * r - max_d2;
        ++acc.count;
        if (jacobian) {
          Eigen::Matrix<double, 6, 1> J;
          J << x.cross(surfel.normal), surfel.normal;
          acc.H += J * J.transpose();
          acc.g += J * r;
        }
      }
      partial[b / kGrain] = acc;
    });
    GeometricTerms total;
    for (const auto& p : partial) total.add(p);
    return total;
  }

 private:
  const Surfel* associate(std::uint32_t i, const Mat3& Rw, const Vec3& tw, double max_d2) const {
    const Vec3 x = Rw * points_.cloud.points[i] + tw;
    const Vec3 c = Rp_ * x + tp_;
    if (c.z() <= 1e-6) return nullptr;
    const long u = std::lround(K_.f.x() * c.x() / c.z() + K_.c.x());
    const long v = std::lround(K_.f.y() * c.y() / c.z() + K_.c.y());
    if (u < 0 || v < 0 || u >= K_.width || v >= K_.height) return nullptr;
    const std::uint32_t s = prediction_.index[std::size_t(v) * K_.width + u];
    if (s == MapRender::kNoSurfel) return nullptr;
    const Surfel& surfel = map_.surfels[s];
    if ((x - surfel.position).squaredNorm() > max_d2) return nullptr;
    if ((Rw * points_.cloud.normals[i]).dot(surfel.normal) < min_cos_) return nullptr;
    return &surfel;
  }

  const SurfelMap& map_;
  const FramePoints& points_;
  const MapRender& prediction_;
  Mat3 Rp_;
  Vec3 tp_;
  CameraIntrinsics K_;
  double min_cos_;
  std::vector<std::uint32_t> usable_;
};

}  // namespace

TrackingResult track_camera(const SurfelMap& map, const LabeledFrame& frame, const Pose& previous_pose,
                            const FusionParams& params) {
  params.validate();
  if (map.empty()) throw Error(ErrorKind::InvalidArgument, "cannot track against an empty map");
  const FramePoints points = backproject_frame(frame, params);
  if (points.cloud.size() < std::size_t(params.min_valid_pixels))
    throw Error(ErrorKind::InvalidArgument, "frame has fewer than min_valid_pixels valid pixels");

  const int min_last_seen = map.frame_count - params.active_window;
  const MapRender prediction = render_map(map, frame.intrinsics, previous_pose, min_last_seen, params.splat_depth_tolerance);
  Associator assoc(map, points, prediction, previous_pose, frame.intrinsics, params);

  TrackingResult result;
  Pose world_from_camera = previous_pose.inverse();
  const double tol_r = params.convergence_rotation * kDegToRad;
  const double coarse = params.association_distance, fine = params.association_distance_fine;
  const std::pair<int, double> levels[] = {{4, coarse}, {2, std::sqrt(coarse * fine)}, {1, fine}};
  for (const auto& [stride, gate] : levels) {
    result.converged = false;
    for (int it = 0; it < params.gauss_newton_iterations; ++it) {
      const GeometricTerms terms = assoc.evaluate(world_from_camera, stride, gate, true);
      ++result.iterations;
      if (terms.count < 6) throw Error(ErrorKind::TrackingLost, "too few correspondences");
      const double damping = 1e-9 * (terms.H.trace() / 6.0) + 1e-30;
      const Eigen::Matrix<double, 6, 6> A = terms.H + damping * Eigen::Matrix<double, 6, 6>::Identity();
      const Eigen::Matrix<double, 6, 1> xi = A.ldlt().solve(-terms.g);
      if (!xi.allFinite()) throw Error(ErrorKind::TrackingLost, "singular tracking system");
      const Twist step{xi.head<3>(), xi.tail<3>()};
      world_from_camera = exp(step) * world_from_camera;
      if (step.translational.norm() < params.convergence_translation && step.rotational.norm() < tol_r) {
        result.converged = true;
        break;
      }
    }
  }

  // the label search scores a fixed point set so probes cannot gain by shedding or adding pairs
  assoc.keep_associated(world_from_camera, fine);
  auto geometric = [&](const Pose& camera_from_world, GeometricTerms* terms_out) {
    const GeometricTerms terms = assoc.evaluate(camera_from_world.inverse(), 1, fine, false);
    if (terms_out) *terms_out = terms;
    return terms.truncated * 1e6;
  };
  Pose pose = world_from_camera.inverse();
  GeometricTerms terms;
  double geo = geometric(pose, &terms);
  if (terms.count < 6) throw Error(ErrorKind::TrackingLost, "too few correspondences");
  const double rms = std::sqrt(terms.sse / double(terms.count));
  if (rms > params.tracking_lost_rms) throw Error(ErrorKind::TrackingLost, "residual RMS above threshold");

  double lab = label_cost(frame, map, pose, params.label_cost_mode, min_last_seen, params.splat_depth_tolerance);
  double cost = geo + params.label_weight * lab;
  if (params.label_weight > 0) {
    for (int scale = 0; scale < params.label_search_scales; ++scale) {
      const double st = params.label_search_translation / double(1 << scale);
      const double sr = params.label_search_rotation * kDegToRad / double(1 << scale);
      for (int round = 0; round < params.label_search_rounds; ++round) {
        ++result.iterations;
        Pose best_pose = pose;
        double best_cost = cost, best_geo = geo, best_lab = lab;
        for (int axis = 0; axis < 6; ++axis)
          for (double sign : {1.0, -1.0}) {
            Twist probe;
            if (axis < 3) probe.rotational[axis] = sign * sr;
            else probe.translational[axis - 3] = sign * st;
            const Pose candidate = exp(probe) * pose;
            const double g = geometric(candidate, nullptr);
            if (!(g < best_cost)) continue;  // the label term is non-negative
            const double l = label_cost(frame, map, candidate, params.label_cost_mode, min_last_seen, params.splat_depth_tolerance);
            const double c = g + params.label_weight * l;
            if (c < best_cost) {
              best_cost = c;
              best_pose = candidate;
              best_geo = g;
              best_lab = l;
            }
          }
        if (!(best_cost < cost)) break;
        pose = best_pose;
        cost = best_cost;
        geo = best_geo;
        lab = best_lab;
      }
    }
  }

  terms = assoc.evaluate(pose.inverse(), 1, fine, false);
  result.pose = pose;
  result.geometric_cost = geo;
  result.label_cost = lab;
  result.final_cost = geo + params.label_weight * lab;
  result.correspondences = terms.count;
  result.residual_rms = terms.count ? std::sqrt(terms.sse / double(terms.count)) : 0.0;
  return result;
}

namespace {

struct CellKey {
  static std::uint64_t of(const Vec3& p, double cell) {
    auto c = [&](double v) { return std::uint64_t(std::int64_t(std::floor(v / cell)) + (1 << 20)) & 0x1fffff; };
    return (c(p.x()) << 42) | (c(p.y()) << 21) | c(p.z());
  }
  static std::uint64_t offset(std::uint64_t key, int dx, int dy, int dz) {
    auto part = [&](int shift, int d) { return (((key >> shift) & 0x1fffff) + std::uint64_t(std::int64_t(d))) & 0x1fffff; };
    return (part(42, dx) << 42) | (part(21, dy) << 21) | part(0, dz);
  }
};

}  // namespace

void integrate_frame(SurfelMap& map, const LabeledFrame& frame, const Pose& camera_from_world,
                     const FusionParams& params) {
  params.validate();
  const FramePoints points = backproject_frame(frame, params);
  const Pose world_from_camera = camera_from_world.inverse();
  const Mat3 R = world_from_camera.rotation_matrix();
  const Vec3 t = world_from_camera.translation();
  const double cell = std::max(params.merge_radius, params.merge_depth_band);
  const double r2 = params.merge_radius * params.merge_radius;
  const double band = params.merge_depth_band;
  const double min_cos = std::cos(params.merge_angle * kDegToRad);
  const double fm = frame.intrinsics.mean_focal();
  const int frame_index = map.frame_count;

  const std::size_t existing = map.size();
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
  grid.reserve(existing);
  for (std::size_t k = 0; k < existing; ++k)
    grid[CellKey::of(map.surfels[k].position, cell)].push_back(static_cast<std::uint32_t>(k));

  const std::size_t n = points.cloud.size();
  std::vector<Vec3> xw(n), nw(n);
  std::vector<std::int64_t> target(n, -1);
  parallel_for(n, kGrain, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      if (!points.normal_valid[i]) continue;
      xw[i] = R * points.cloud.points[i] + t;
      nw[i] = R * points.cloud.normals[i];
      const Label label = points.cloud.labels[i];
      const std::uint64_t key = CellKey::of(xw[i], cell);
      double best = std::numeric_limits<double>::infinity();
      std::int64_t best_index = -1;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            const auto it = grid.find(CellKey::offset(key, dx, dy, dz));
            if (it == grid.end()) continue;
            for (std::uint32_t k : it->second) {
              const Surfel& s = map.surfels[k];
              if (s.label != label) continue;
              const Vec3 diff = xw[i] - s.position;
              const double along = s.normal.dot(diff);
              const double tangential = diff.squaredNorm() - along * along;
              if (tangential > r2 || std::abs(along) > band || s.normal.dot(nw[i]) < min_cos) continue;
              if (tangential < best || (tangential == best && std::int64_t(k) < best_index)) {
                best = tangential;
                best_index = k;
              }
            }
          }
      target[i] = best_index;
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (!points.normal_valid[i]) continue;
    const double radius = points.cloud.points[i].z() / fm;
    if (target[i] >= 0) {
      Surfel& s = map.surfels[std::size_t(target[i])];
      const double c = s.confidence;
      s.position = (c * s.position + xw[i]) / (c + 1.0);
      s.normal = (c * s.normal + nw[i]).normalized();
      s.confidence = c + 1.0;
      s.radius = std::min(s.radius, radius);
      s.last_seen = frame_index;
    } else {
      map.surfels.push_back(Surfel{xw[i], nw[i], radius, points.cloud.labels[i], 1.0, frame_index});
    }
  }
  ++map.frame_count;
}

LabeledPointCloud extract_cloud(const SurfelMap& map, double min_confidence) {
  LabeledPointCloud cloud;
  for (const Surfel& s : map.surfels)
    if (s.confidence >= min_confidence) cloud.push_back(s.position, s.label, s.normal);
  return cloud;
}

namespace {

std::string frame_name(std::size_t i, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.%s.png", i, suffix);
  return buf;
}

}  // namespace

void save_frames(const std::filesystem::path& dir, const std::vector<LabeledFrame>& frames,
                 const std::vector<Pose>* poses) {
  if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "no frames to save");
  if (poses && poses->size() != frames.size()) throw Error(ErrorKind::InvalidArgument, "pose count differs from frame count");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const LabeledFrame& f = frames[i];
    Image16 depth{f.width(), f.height(), std::vector<std::uint16_t>(f.pixel_count())};
    Image16 labels{f.width(), f.height(), std::vector<std::uint16_t>(f.labels.begin(), f.labels.end())};
    for (std::size_t k = 0; k < f.pixel_count(); ++k)
      depth.pixels[k] = static_cast<std::uint16_t>(std::clamp(std::lround(f.depth[k] * 1000.0), 0L, 65535L));
    write_png16(dir / frame_name(i, "depth"), depth);
    write_png16(dir / frame_name(i, "labels"), labels);
  }
  write_json(dir / "camera.json", intrinsics_to_json(frames.front().intrinsics));
  if (poses) {
    nlohmann::json list = nlohmann::json::array();
    for (const Pose& p : *poses) list.push_back(pose_to_json(p));
    write_json(dir / "poses.json", {{"poses", list}});
  }
}

FrameSequence load_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::IoFailure, "not a directory: " + dir.string());
  if (!std::filesystem::exists(dir / "camera.json"))
    throw Error(ErrorKind::IoFailure, "missing camera.json in " + dir.string());
  const CameraIntrinsics K = intrinsics_from_json(read_json(dir / "camera.json"));
  FrameSequence seq;
  for (std::size_t i = 0;; ++i) {
    const auto depth_path = dir / frame_name(i, "depth");
    if (!std::filesystem::exists(depth_path)) break;
    const Image16 depth = read_png16(depth_path);
    const Image16 labels = read_png16(dir / frame_name(i, "labels"));
    if (depth.width != K.width || depth.height != K.height || labels.width != K.width || labels.height != K.height)
      throw Error(ErrorKind::ParseError, "frame " + std::to_string(i) + " does not match camera.json resolution");
    LabeledFrame f = LabeledFrame::blank(K, static_cast<int>(i));
    for (std::size_t k = 0; k < f.pixel_count(); ++k) {
      f.depth[k] = static_cast<float>(depth.pixels[k] / 1000.0);
      f.labels[k] = labels.pixels[k];
    }
    seq.frames.push_back(std::move(f));
  }
  if (seq.frames.empty()) throw Error(ErrorKind::IoFailure, "no frames found in " + dir.string());
  if (std::filesystem::exists(dir / "poses.json")) {
    const auto j = read_json(dir / "poses.json");
    if (!j.contains("poses") || !j["poses"].is_array()) throw Error(ErrorKind::ParseError, "poses.json: missing 'poses'");
    std::vector<Pose> poses;
    for (const auto& p : j["poses"]) poses.push_back(pose_from_json(p));
    if (poses.size() != seq.frames.size()) throw Error(ErrorKind::ParseError, "poses.json: count differs from frames");
    seq.poses = std::move(poses);
  }
  return seq;
}

}  // namespace semreg
