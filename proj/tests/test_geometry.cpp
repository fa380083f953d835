#include "doctest.h"
#include "test_support.hpp"

#include "semreg/geometry.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>

using namespace semreg;
using namespace semreg::testing;

TEST_CASE("compose with identity and inverse") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose p(random_quaternion(rng), Vec3::Random());
    const Pose a = compose(Pose::identity(), p);
    CHECK(quaternion_angle(a.rotation(), p.rotation()) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK((a.translation() - p.translation()).norm() < 1e-12);

    const Pose e = compose(p, invert(p));
    CHECK(quaternion_angle(e.rotation(), Quat::Identity()) < 1e-6);
    CHECK(e.translation().norm() < 1e-9);
    CHECK(std::abs(e.rotation().norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("two 45 degree z rotations compose to 90 degrees") {
  const Pose r45 = Pose::from_axis_angle(Vec3::UnitZ(), M_PI / 4);
  const Pose r90 = compose(r45, r45);
  const Mat3 oracle = r45.rotation_matrix() * r45.rotation_matrix();
  CHECK((r90.rotation_matrix() - oracle).norm() < 1e-12);
  CHECK(geodesic_angle_deg(Mat3::Identity(), oracle) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(quaternion_angle(Quat::Identity(), r90.rotation()) == doctest::Approx(90.0).epsilon(1e-9));
}

TEST_CASE("compose applies the right operand first") {
  const Pose rot = Pose::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
  const Pose shift = Pose::from_translation(Vec3(1, 0, 0));
  // shift then rotate: (0,0,0) -> (1,0,0) -> (0,1,0)
  CHECK((compose(rot, shift).transform_point(Vec3::Zero()) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("apply transforms points and normals, keeps labels") {
  LabeledPointCloud cloud;
  cloud.push_back(Vec3(1, 0, 0), 7, Vec3(1, 0, 0));
  cloud.push_back(Vec3(0, 0, 0), 2, Vec3(0, 0, 1));

  const auto same = apply(Pose::identity(), cloud);
  CHECK(same.points == cloud.points);
  CHECK(same.labels == cloud.labels);

  const auto moved = apply(Pose::from_translation(Vec3(1, 0, 0)), cloud);
  CHECK((moved.points[1] - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK((moved.normals[1] - Vec3(0, 0, 1)).norm() < 1e-15);  // normals are not translated

  const Pose rz = Pose::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
  const auto rotated = apply(rz, cloud);
  CHECK((rotated.points[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((rotated.normals[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(rotated.labels == cloud.labels);
}

TEST_CASE("apply preserves pairwise distances") {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    LabeledPointCloud cloud;
    for (int i = 0; i < 50; ++i) cloud.push_back(Vec3::Random(), 1);
    const Pose p(random_quaternion(rng), 5 * Vec3::Random());
    const auto out = apply(p, cloud);
    for (int i = 0; i < 50; ++i)
      for (int j = i + 1; j < 50; ++j)
        worst = std::max(worst, std::abs((out.points[i] - out.points[j]).norm() -
                                         (cloud.points[i] - cloud.points[j]).norm()));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("quaternion angle basics") {
  std::mt19937_64 rng(3);
  const Quat q = random_quaternion(rng);
  CHECK(quaternion_angle(q, q) == doctest::Approx(0.0));
  const Quat neg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK(quaternion_angle(q, neg) == doctest::Approx(0.0));
  const Quat rz(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  CHECK(quaternion_angle(Quat::Identity(), rz) == doctest::Approx(90.0).epsilon(1e-12));
  // A quaternion slightly off unit norm must not produce NaN.
  const Quat almost(1.0 + 1e-15, 0, 0, 0);
  CHECK(quaternion_angle(almost, Quat::Identity()) == 0.0);
}

TEST_CASE("quaternion angle matches rotation-matrix geodesic, is symmetric and a metric") {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Quat a = random_quaternion(rng), b = random_quaternion(rng), c = random_quaternion(rng);
    const double ab = quaternion_angle(a, b);
    worst = std::max(worst, std::abs(ab - geodesic_angle_deg(a.toRotationMatrix(), b.toRotationMatrix())));
    REQUIRE(ab == quaternion_angle(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 180.0);
    REQUIRE(quaternion_angle(a, c) <= ab + quaternion_angle(b, c) + 1e-9);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pose error") {
  const Pose truth = Pose::from_axis_angle(Vec3(1, 2, 3), 0.4, Vec3(0.1, 0.2, 0.3));
  const PoseError zero = pose_error(truth, truth);
  CHECK(zero.translation_norm == 0.0);
  CHECK(zero.angle == doctest::Approx(0.0));

  const Pose shifted(truth.rotation(), truth.translation() + Vec3(0.003, 0.004, 0.0));
  CHECK(pose_error(shifted, truth).translation_norm == doctest::Approx(0.005).epsilon(1e-12));

  const Pose turned = compose(Pose::from_axis_angle(Vec3(-0.3, 0.8, 0.2), rad(10.0)), truth);
  const double oracle = geodesic_angle_deg(turned.rotation_matrix(), truth.rotation_matrix());
  CHECK(oracle == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(std::abs(pose_error(turned, truth).angle - 10.0) < 1e-9);
}

TEST_CASE("twist exponential and logarithm") {
  CHECK(quaternion_angle(exp(Twist{}).rotation(), Quat::Identity()) == 0.0);
  CHECK(exp(Twist{}).translation().norm() == 0.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Twist t{Vec3::Random() * 1.5, Vec3::Random()};
    const Pose e = compose(exp(t), exp(-t));
    CHECK(quaternion_angle(e.rotation(), Quat::Identity()) < 1e-6);
    CHECK(e.translation().norm() < 1e-9);
    const Twist back = log(exp(t));
    CHECK((back.rotational - t.rotational).norm() < 1e-9);
    CHECK((back.translational - t.translational).norm() < 1e-9);
  }
  // Small-angle branch agrees with the closed form.
  const Twist tiny{Vec3(1e-10, -2e-10, 3e-10), Vec3(0.1, 0.2, 0.3)};
  CHECK((exp(tiny).translation() - Vec3(0.1, 0.2, 0.3)).norm() < 1e-9);
}

TEST_CASE("euler zyx round trip") {
  const double roll = 0.1, pitch = -0.2, yaw = 0.3;
  const Mat3 R = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                  Eigen::AngleAxisd(roll, Vec3::UnitX()))
                     .toRotationMatrix();
  const Vec3 e = euler_zyx(R);
  CHECK(e.x() == doctest::Approx(roll));
  CHECK(e.y() == doctest::Approx(pitch));
  CHECK(e.z() == doctest::Approx(yaw));
}

TEST_CASE("crop by label") {
  LabeledPointCloud all3;
  for (int i = 0; i < 10; ++i) all3.push_back(Vec3(i, 0, 0), 3);
  const auto same = crop_by_label(all3, 3);
  CHECK(same.points == all3.points);
  CHECK(crop_by_label(all3, 5).empty());

  std::mt19937_64 rng(6);
  std::vector<Label> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 412 ? 2 : static_cast<Label>(1 + (i % 4 == 1 ? 2 : i % 4));
  std::shuffle(labels.begin(), labels.end(), rng);
  LabeledPointCloud mixed;
  for (std::size_t i = 0; i < labels.size(); ++i) mixed.push_back(Vec3::Random(), labels[i], Vec3::UnitX());
  const auto expected = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label{2}));
  REQUIRE(expected == 412);
  const auto crop = crop_by_label(mixed, 2);
  CHECK(crop.size() == expected);
  CHECK(crop.normals.size() == expected);
  // Order preserved.
  std::size_t k = 0;
  for (std::size_t i = 0; i < mixed.size(); ++i)
    if (mixed.labels[i] == 2) CHECK(mixed.points[i] == crop.points[k++]);

  // Concatenated crops over all labels reproduce the input multiset.
  std::map<Label, int> present;
  for (auto l : labels) present[l]++;
  std::vector<std::tuple<double, double, double, Label>> in, out;
  for (std::size_t i = 0; i < mixed.size(); ++i)
    in.emplace_back(mixed.points[i].x(), mixed.points[i].y(), mixed.points[i].z(), mixed.labels[i]);
  for (const auto& [label, count] : present) {
    const auto c = crop_by_label(mixed, label);
    CHECK(c.size() == static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < c.size(); ++i) out.emplace_back(c.points[i].x(), c.points[i].y(), c.points[i].z(), label);
  }
  std::sort(in.begin(), in.end());
  std::sort(out.begin(), out.end());
  CHECK(in == out);
}

TEST_CASE("crop by label scales linearly") {
  auto make = [](std::size_t n) {
    LabeledPointCloud c;
    c.reserve(n, false);
    for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(i, 0, 0), static_cast<Label>(i % 5));
    return c;
  };
  auto median_time = [](const LabeledPointCloud& c) {
    std::vector<double> t;
    for (int r = 0; r < 5; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const auto out = crop_by_label(c, 2);
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() + out.size() * 0.0);
    }
    std::nth_element(t.begin(), t.begin() + 2, t.end());
    return t[2];
  };
  const auto small = make(200000), large = make(400000);
  const double ratio = median_time(large) / median_time(small);
  MESSAGE("crop_by_label time(2N)/time(N) = " << ratio);
  WARN(ratio >= 1.5);
  WARN(ratio <= 3.0);
}

TEST_CASE("labeled cloud validation") {
  LabeledPointCloud c;
  c.points.push_back(Vec3::Zero());
  CHECK_THROWS(c.validate());
  c.labels.push_back(1);
  CHECK_NOTHROW(c.validate());
  c.normals.push_back(Vec3(0, 0, 2));
  CHECK_THROWS(c.validate());
}

TEST_CASE("success rule gates") {
  CHECK(is_success({0.0079, 1.7}));
  CHECK(is_success({0.049, 14.9}));
  CHECK_FALSE(is_success({0.051, 14.9}));
  CHECK_FALSE(is_success({0.010, 16.0}));
  CHECK_FALSE(is_success({0.05, 1.0}));
  CHECK_FALSE(is_success({0.01, 15.0}));
  CHECK(is_success({std::nextafter(0.05, 0.0), std::nextafter(15.0, 0.0)}));
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> t(0.0, 0.1), a(0.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const PoseError e{t(rng), a(rng)};
    CHECK(is_success(e) == (e.translation_norm * 1000.0 < 50.0 && e.angle < 15.0));
  }
}
