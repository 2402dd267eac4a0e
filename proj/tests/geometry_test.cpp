#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vo/errors.hpp"
#include "vo/geometry.hpp"
#include "vo/rng.hpp"

using vo::Pose;
using vo::Trajectory;

namespace {

constexpr double kPi = 3.14159265358979323846;

Pose random_pose(vo::Rng& rng, double rot_span = 1.2) {
  Pose p;
  // pitch kept inside (-pi/2, pi/2) so Euler extraction is unique
  p.rotation = {rng.uniform(-rot_span, rot_span), rng.uniform(-1.2, 1.2),
                rng.uniform(-rot_span, rot_span)};
  p.translation = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
  return p;
}

double pose_gap(const Pose& a, const Pose& b) {
  return std::max(vo::rotation_distance(a, b), vo::translation_distance(a, b));
}

}  // namespace

TEST_CASE("identity pose maps to identity matrix") {
  Eigen::Matrix4d m = vo::pose_to_matrix(Pose{});
  CHECK((m - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  Pose back = vo::pose_from_matrix(Eigen::Matrix4d::Identity());
  CHECK(back.rotation.norm() == 0.0);
  CHECK(back.translation.norm() == 0.0);
}

TEST_CASE("yaw quarter turn with forward translation") {
  Pose p;
  p.rotation = {0.0, 0.0, kPi / 2};
  p.translation = {1.0, 0.0, 0.0};
  Eigen::Matrix4d m = vo::pose_to_matrix(p);
  Eigen::Matrix3d expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((m.block<3, 3>(0, 0) - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(m(0, 3) == 1.0);
  CHECK(m(1, 3) == 0.0);
}

TEST_CASE("matrix round trip over random poses") {
  vo::Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    Pose p = random_pose(rng);
    Pose q = vo::pose_from_matrix(vo::pose_to_matrix(p));
    CHECK(pose_gap(p, q) < 1e-9);
  }
}

TEST_CASE("matrix conversion canonicalizes angles") {
  Pose p;
  p.rotation = {2 * kPi + 0.25, 0.0, -2 * kPi - 0.5};
  Pose q = vo::pose_from_matrix(vo::pose_to_matrix(p));
  CHECK(q.rotation.x() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q.rotation.z() == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("gimbal lock rows resolve with zero roll") {
  for (double sign : {1.0, -1.0}) {
    Pose p;
    p.rotation = {0.4, sign * kPi / 2, 1.1};
    Eigen::Matrix4d m = vo::pose_to_matrix(p);
    Pose q = vo::pose_from_matrix(m);
    CHECK(q.rotation.x() == 0.0);
    CHECK(std::abs(q.rotation.y()) == doctest::Approx(kPi / 2).epsilon(1e-12));
    // the recovered yaw must reproduce the same rotation matrix
    CHECK((vo::pose_to_matrix(q) - m).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("non-rigid matrices are rejected") {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = 2.0;
  CHECK_THROWS_AS(vo::pose_from_matrix(m), vo::ContractError);
  m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();  // det -1
  CHECK_THROWS_AS(vo::pose_from_matrix(m), vo::ContractError);
  m = Eigen::Matrix4d::Identity();
  m(3, 0) = 0.1;
  CHECK_THROWS_AS(vo::pose_from_matrix(m), vo::ContractError);
}

TEST_CASE("group laws hold") {
  vo::Rng rng(22);
  Pose id;
  for (int i = 0; i < 300; ++i) {
    Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    CHECK(pose_gap(vo::compose(id, b), b) < 1e-9);
    CHECK(pose_gap(vo::compose(a, id), a) < 1e-9);
    CHECK(pose_gap(vo::compose(a, vo::inverse(a)), id) < 1e-9);
    CHECK(pose_gap(vo::compose(vo::inverse(a), a), id) < 1e-9);
    Pose ab_c = vo::compose(vo::compose(a, b), c);
    Pose a_bc = vo::compose(a, vo::compose(b, c));
    CHECK(pose_gap(ab_c, a_bc) < 1e-9);
  }
}

TEST_CASE("compose matches matrix product") {
  vo::Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    Pose a = random_pose(rng), b = random_pose(rng);
    Eigen::Matrix4d direct = vo::pose_to_matrix(a) * vo::pose_to_matrix(b);
    Eigen::Matrix4d via = vo::pose_to_matrix(vo::compose(a, b));
    CHECK((direct - via).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("integration basics") {
  Trajectory still = vo::integrate_relative(std::vector<Pose>(5), Pose{});
  REQUIRE(still.size() == 6);
  for (const Pose& p : still.poses) CHECK(pose_gap(p, Pose{}) == 0.0);

  std::vector<Pose> forward(4);
  for (auto& p : forward) p.translation = {0.0, 0.0, 1.0};
  Trajectory t = vo::integrate_relative(forward, Pose{});
  for (int k = 0; k <= 4; ++k) {
    CHECK(t.poses[k].translation.z() == doctest::Approx(k).epsilon(1e-12));
    CHECK(t.poses[k].translation.x() == 0.0);
  }

  Trajectory empty = vo::integrate_relative({}, Pose{});
  CHECK(empty.size() == 1);
}

TEST_CASE("relative extraction inverts integration") {
  vo::Rng rng(24);
  std::vector<Pose> rels;
  for (int i = 0; i < 40; ++i) {
    Pose r = random_pose(rng, 0.4);
    r.translation *= 0.1;
    rels.push_back(r);
  }
  Pose origin = random_pose(rng);
  Trajectory traj = vo::integrate_relative(rels, origin);
  auto back = vo::relative_from_absolute(traj);
  REQUIRE(back.size() == rels.size());
  for (size_t i = 0; i < rels.size(); ++i) CHECK(pose_gap(back[i], rels[i]) < 1e-9);
  Trajectory again = vo::integrate_relative(back, origin);
  for (size_t i = 0; i < traj.size(); ++i) CHECK(pose_gap(again.poses[i], traj.poses[i]) < 1e-9);

  CHECK_THROWS_AS(vo::relative_from_absolute(Trajectory{}), vo::ContractError);
  CHECK(vo::relative_from_absolute(Trajectory{{Pose{}}, {}}).empty());
}

TEST_CASE("motion distances") {
  Pose a, b;
  CHECK(vo::rotation_distance(a, b) == 0.0);
  CHECK(vo::translation_distance(a, b) == 0.0);

  a.rotation = {0.003, 0.0, 0.004};
  CHECK(vo::rotation_distance(a, b) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(vo::rotation_distance(b, a) == doctest::Approx(0.005).epsilon(1e-12));

  Pose c;
  c.translation = {0.6, 0.0, 0.0};
  CHECK(vo::translation_distance(c, b) == doctest::Approx(0.6).epsilon(1e-12));

  // wrapping: 2pi - 0.01 vs 0 differ by 0.01, not ~2pi
  Pose d;
  d.rotation = {2 * kPi - 0.01, 0.0, 0.0};
  CHECK(vo::rotation_distance(d, b) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("timestamps validate") {
  Trajectory t;
  t.poses.resize(3);
  t.validate();  // no timestamps is fine
  t.timestamps = {0.0, 1.0, 2.0};
  t.validate();
  CHECK(t.has_timestamps());
  t.timestamps = {0.0, 1.0};
  CHECK_THROWS_AS(t.validate(), vo::ContractError);
  t.timestamps = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(t.validate(), vo::ContractError);
}

TEST_CASE("alignment recovers an applied similarity") {
  vo::Rng rng(25);
  Trajectory ref;
  for (int i = 0; i < 60; ++i) {
    Pose p = random_pose(rng, 0.3);
    ref.poses.push_back(p);
  }
  Pose warp;
  warp.rotation = {0.3, -0.2, 0.9};
  const Eigen::Matrix3d r_true = vo::pose_to_matrix(warp).block<3, 3>(0, 0);
  const Eigen::Vector3d t_true(1.0, -2.0, 3.0);
  const double s_true = 2.5;

  // est maps to ref under (s_true, r_true, t_true): build est by inverting it
  Trajectory est;
  for (const Pose& p : ref.poses) {
    Pose q = p;
    q.translation = (1.0 / s_true) * (r_true.transpose() * (p.translation - t_true));
    est.poses.push_back(q);
  }

  vo::Alignment a = vo::umeyama_align(est, ref, true);
  CHECK(a.scale == doctest::Approx(s_true).epsilon(1e-9));
  CHECK((a.rotation - r_true).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.translation - t_true).cwiseAbs().maxCoeff() < 1e-9);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK((a.aligned.poses[i].translation - ref.poses[i].translation).norm() < 1e-9);
}

TEST_CASE("aligning a trajectory to itself is the identity") {
  vo::Rng rng(26);
  Trajectory t;
  for (int i = 0; i < 10; ++i) t.poses.push_back(random_pose(rng));
  vo::Alignment a = vo::umeyama_align(t, t, true);
  CHECK(a.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.translation.norm() < 1e-12);
}

TEST_CASE("rigid alignment of a scaled triangle leaves the analytic residual") {
  // ref: right triangle; est = 2 * ref. Best rigid fit keeps R = I and
  // matches centroids, leaving sum of squared residuals equal to the ref
  // spread: 16/3, i.e. RMSE (16/9)^(1/2) = 4/3.
  Trajectory ref, est;
  const Eigen::Vector3d pts[3] = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
  for (const auto& p : pts) {
    Pose a, b;
    a.translation = p;
    b.translation = 2.0 * p;
    ref.poses.push_back(a);
    est.poses.push_back(b);
  }
  vo::Alignment a = vo::umeyama_align(est, ref, false);
  CHECK(a.scale == 1.0);
  double sq = 0.0;
  for (int i = 0; i < 3; ++i)
    sq += (a.aligned.poses[i].translation - ref.poses[i].translation).squaredNorm();
  CHECK(sq == doctest::Approx(16.0 / 3.0).epsilon(1e-9));
  CHECK(std::sqrt(sq / 3.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

  // allowing scale must fit exactly
  vo::Alignment b = vo::umeyama_align(est, ref, true);
  CHECK(b.scale == doctest::Approx(0.5).epsilon(1e-12));
  double sq2 = 0.0;
  for (int i = 0; i < 3; ++i)
    sq2 += (b.aligned.poses[i].translation - ref.poses[i].translation).squaredNorm();
  CHECK(sq2 < 1e-18);
}

TEST_CASE("alignment rejects degenerate input") {
  Trajectory two, line, ref;
  for (int i = 0; i < 2; ++i) {
    Pose p;
    p.translation = {double(i), 0, 0};
    two.poses.push_back(p);
  }
  CHECK_THROWS_AS(vo::umeyama_align(two, two, true), vo::AlignmentError);

  for (int i = 0; i < 5; ++i) {
    Pose p;
    p.translation = {double(i), 0, 0};  // collinear
    line.poses.push_back(p);
    Pose q;
    q.translation = {double(i), double(i % 2), 1.0};
    ref.poses.push_back(q);
  }
  CHECK_THROWS_AS(vo::umeyama_align(line, ref, true), vo::AlignmentError);

  Trajectory four = ref;
  four.poses.pop_back();
  CHECK_THROWS_AS(vo::umeyama_align(four, ref, true), vo::ContractError);
}

TEST_CASE("alignment never beats itself: residual at most identity residual") {
  vo::Rng rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory ref, est;
    for (int i = 0; i < 25; ++i) {
      Pose p = random_pose(rng, 0.2);
      ref.poses.push_back(p);
      Pose q = p;
      q.translation += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      est.poses.push_back(q);
    }
    auto rmse = [&](const Trajectory& t) {
      double sq = 0.0;
      for (size_t i = 0; i < t.size(); ++i)
        sq += (t.poses[i].translation - ref.poses[i].translation).squaredNorm();
      return std::sqrt(sq / double(t.size()));
    };
    const double raw = rmse(est);
    const double rigid = rmse(vo::umeyama_align(est, ref, false).aligned);
    const double sim = rmse(vo::umeyama_align(est, ref, true).aligned);
    CHECK(rigid <= raw + 1e-12);
    CHECK(sim <= rigid + 1e-12);
  }
}
