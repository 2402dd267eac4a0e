#pragma once

#include <vector>

#include <Eigen/Dense>

namespace vo {

// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

// 6-DoF rigid pose: Euler angles (roll, pitch, yaw) in radians with ZYX
// composition (R = Rz(yaw) * Ry(pitch) * Rx(roll)) plus translation in
// meters. Default-constructed pose is the identity.
struct Pose {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Vector3d& rot, const Eigen::Vector3d& trans)
      : rotation(rot), translation(trans) {}
};

// Ordered absolute poses, optionally timestamped (seconds).
struct Trajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;

  bool has_timestamps() const { return !timestamps.empty(); }
  size_t size() const { return poses.size(); }
  // Throws ContractError unless timestamps are absent or strictly increasing
  // with one entry per pose.
  void validate() const;
};

// Homogeneous 4x4 from pose; inverse conversion validates rigidity
// (orthonormal R, det +1, proper last row, tolerance 1e-6) and canonicalizes
// angles: roll/yaw in (-pi, pi], pitch in [-pi/2, pi/2]. Rows within 1e-6 of
// gimbal lock resolve with roll = 0.
Eigen::Matrix4d pose_to_matrix(const Pose& p);
Pose pose_from_matrix(const Eigen::Matrix4d& m);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

// trajectory[0] = origin, trajectory[t] = trajectory[t-1] * relatives[t-1].
Trajectory integrate_relative(const std::vector<Pose>& relatives, const Pose& origin = Pose());

// relatives[t] = inverse(abs[t]) * abs[t+1]; inverse of integrate_relative.
std::vector<Pose> relative_from_absolute(const Trajectory& traj);

// L2 norm of the per-axis shortest signed Euler difference / of the
// translation difference. Both symmetric and zero iff the wrapped difference
// is zero.
double rotation_distance(const Pose& a, const Pose& b);
double translation_distance(const Pose& a, const Pose& b);

struct Alignment {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Trajectory aligned;  // estimate mapped through s*R*p + t
};

// Least-squares similarity (or rigid, when with_scale is false) transform
// mapping `estimate` onto `reference`. Throws AlignmentError for fewer than
// 3 poses or a rank-deficient point spread; ContractError on length mismatch.
Alignment umeyama_align(const Trajectory& estimate, const Trajectory& reference,
                        bool with_scale);

}  // namespace vo
