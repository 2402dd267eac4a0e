#include "vo/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "vo/errors.hpp"

namespace vo {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRigidTol = 1e-6;
constexpr double kGimbalTol = 1e-6;
}  // namespace

double wrap_angle(double radians) {
  double w = std::remainder(radians, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

void Trajectory::validate() const {
  if (timestamps.empty()) return;
  if (timestamps.size() != poses.size())
    throw ContractError("trajectory has " + std::to_string(poses.size()) + " poses but " +
                        std::to_string(timestamps.size()) + " timestamps");
  for (size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] <= timestamps[i - 1])
      throw ContractError("trajectory timestamps must strictly increase");
}

Eigen::Matrix4d pose_to_matrix(const Pose& p) {
  const double cr = std::cos(p.rotation.x()), sr = std::sin(p.rotation.x());
  const double cp = std::cos(p.rotation.y()), sp = std::sin(p.rotation.y());
  const double cy = std::cos(p.rotation.z()), sy = std::sin(p.rotation.z());
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  // R = Rz(yaw) * Ry(pitch) * Rx(roll)
  m(0, 0) = cy * cp;
  m(0, 1) = cy * sp * sr - sy * cr;
  m(0, 2) = cy * sp * cr + sy * sr;
  m(1, 0) = sy * cp;
  m(1, 1) = sy * sp * sr + cy * cr;
  m(1, 2) = sy * sp * cr - cy * sr;
  m(2, 0) = -sp;
  m(2, 1) = cp * sr;
  m(2, 2) = cp * cr;
  m.block<3, 1>(0, 3) = p.translation;
  return m;
}

Pose pose_from_matrix(const Eigen::Matrix4d& m) {
  const Eigen::Matrix3d r = m.block<3, 3>(0, 0);
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kRigidTol)
    throw ContractError("rotation block is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > kRigidTol)
    throw ContractError("rotation block determinant is not +1");
  if (std::abs(m(3, 0)) > kRigidTol || std::abs(m(3, 1)) > kRigidTol ||
      std::abs(m(3, 2)) > kRigidTol || std::abs(m(3, 3) - 1.0) > kRigidTol)
    throw ContractError("matrix last row is not (0,0,0,1)");

  Pose p;
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sp);
  if (kPi / 2.0 - std::abs(pitch) < kGimbalTol) {
    // Only roll+yaw combined is observable here; fix roll = 0. The same
    // extraction covers both poles.
    p.rotation = {0.0, pitch, std::atan2(-r(0, 1), r(1, 1))};
  } else {
    p.rotation = {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
  }
  p.rotation.x() = wrap_angle(p.rotation.x());
  p.rotation.z() = wrap_angle(p.rotation.z());
  p.translation = m.block<3, 1>(0, 3);
  return p;
}

Pose compose(const Pose& a, const Pose& b) {
  return pose_from_matrix(pose_to_matrix(a) * pose_to_matrix(b));
}

Pose inverse(const Pose& a) {
  Eigen::Matrix4d m = pose_to_matrix(a);
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = m.block<3, 3>(0, 0).transpose();
  inv.block<3, 3>(0, 0) = rt;
  inv.block<3, 1>(0, 3) = -rt * m.block<3, 1>(0, 3);
  return pose_from_matrix(inv);
}

Trajectory integrate_relative(const std::vector<Pose>& relatives, const Pose& origin) {
  Trajectory traj;
  traj.poses.reserve(relatives.size() + 1);
  traj.poses.push_back(origin);
  for (const Pose& rel : relatives) traj.poses.push_back(compose(traj.poses.back(), rel));
  return traj;
}

std::vector<Pose> relative_from_absolute(const Trajectory& traj) {
  if (traj.poses.empty()) throw ContractError("relative_from_absolute: empty trajectory");
  std::vector<Pose> rel;
  rel.reserve(traj.poses.size() - 1);
  for (size_t t = 1; t < traj.poses.size(); ++t)
    rel.push_back(compose(inverse(traj.poses[t - 1]), traj.poses[t]));
  return rel;
}

double rotation_distance(const Pose& a, const Pose& b) {
  const double dr = wrap_angle(a.rotation.x() - b.rotation.x());
  const double dp = wrap_angle(a.rotation.y() - b.rotation.y());
  const double dy = wrap_angle(a.rotation.z() - b.rotation.z());
  return std::sqrt(dr * dr + dp * dp + dy * dy);
}

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

Alignment umeyama_align(const Trajectory& estimate, const Trajectory& reference,
                        bool with_scale) {
  const size_t n = estimate.poses.size();
  if (n != reference.poses.size())
    throw ContractError("umeyama_align: trajectory lengths differ");
  if (n < 3) throw AlignmentError("umeyama_align: need at least 3 poses");

  Eigen::Vector3d mu_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_dst = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_src += estimate.poses[i].translation;
    mu_dst += reference.poses[i].translation;
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  double var_src = 0.0;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d ds = estimate.poses[i].translation - mu_src;
    const Eigen::Vector3d dd = reference.poses[i].translation - mu_dst;
    var_src += ds.squaredNorm();
    cov += dd * ds.transpose();
  }
  var_src /= static_cast<double>(n);
  cov /= static_cast<double>(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  // Rank >= 2 required: collinear or coincident points leave the in-plane
  // rotation unconstrained.
  if (d(0) <= 0.0 || d(1) <= d(0) * 1e-13)
    throw AlignmentError("umeyama_align: degenerate point spread");

  Eigen::Vector3d s_diag = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_diag(2) = -1.0;

  Alignment out;
  out.rotation = svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? d.dot(s_diag) / var_src : 1.0;
  if (!(out.scale > 0.0)) throw AlignmentError("umeyama_align: non-positive scale");
  out.translation = mu_dst - out.scale * out.rotation * mu_src;

  out.aligned.poses.reserve(n);
  out.aligned.timestamps = estimate.timestamps;
  Eigen::Matrix4d sim = Eigen::Matrix4d::Identity();
  sim.block<3, 3>(0, 0) = out.rotation;
  sim.block<3, 1>(0, 3) = out.translation;
  for (const Pose& p : estimate.poses) {
    Eigen::Matrix4d m = pose_to_matrix(p);
    m.block<3, 1>(0, 3) *= out.scale;
    out.aligned.poses.push_back(pose_from_matrix(sim * m));
  }
  return out;
}

}  // namespace vo
