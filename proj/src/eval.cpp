#include "vo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "vo/errors.hpp"

namespace vo {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Matrix4d rigid_inverse(const Eigen::Matrix4d& m) {
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = m.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
  return inv;
}

double rotation_angle(const Eigen::Matrix4d& m) {
  const double trace3 = m(0, 0) + m(1, 1) + m(2, 2);
  return std::acos(std::clamp(0.5 * (trace3 - 1.0), -1.0, 1.0));
}

std::vector<double> cumulative_distance(const Trajectory& traj) {
  std::vector<double> dist(traj.size(), 0.0);
  for (size_t i = 1; i < traj.size(); ++i) {
    dist[i] = dist[i - 1] + (traj.poses[i].translation - traj.poses[i - 1].translation).norm();
  }
  return dist;
}

void check_paired(const Trajectory& estimate, const Trajectory& reference, size_t min_size) {
  if (estimate.size() != reference.size()) {
    throw ContractError("estimate and reference must have equal lengths");
  }
  if (estimate.size() < min_size) {
    throw ContractError("need at least " + std::to_string(min_size) + " poses");
  }
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

}  // namespace

AlignMode align_mode_from_string(const std::string& name) {
  if (name == "none") return AlignMode::kNone;
  if (name == "se3") return AlignMode::kSe3;
  if (name == "sim3") return AlignMode::kSim3;
  throw ConfigError("unknown alignment mode '" + name + "' (expected none|se3|sim3)");
}

std::string to_string(AlignMode mode) {
  switch (mode) {
    case AlignMode::kNone: return "none";
    case AlignMode::kSe3: return "se3";
    default: return "sim3";
  }
}

std::vector<double> default_segment_lengths() {
  return {100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0};
}

SegmentErrors kitti_segment_errors(const Trajectory& estimate, const Trajectory& reference,
                                   const std::vector<double>& lengths, int step) {
  check_paired(estimate, reference, 2);
  if (step < 1) throw ContractError("step must be >= 1");
  if (lengths.empty()) throw ContractError("lengths must be nonempty");
  for (double len : lengths) {
    if (!(len > 0.0)) throw ContractError("segment lengths must be positive");
  }

  const size_t n = reference.size();
  const std::vector<double> dist = cumulative_distance(reference);
  std::vector<Eigen::Matrix4d> est_m(n), ref_m(n);
  for (size_t i = 0; i < n; ++i) {
    est_m[i] = pose_to_matrix(estimate.poses[i]);
    ref_m[i] = pose_to_matrix(reference.poses[i]);
  }

  SegmentErrors out;
  double t_sum = 0.0;
  double r_sum = 0.0;
  for (double len : lengths) {
    double t_bucket = 0.0;
    double r_bucket = 0.0;
    int count = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(step)) {
      const auto it =
          std::lower_bound(dist.begin() + static_cast<long>(start) + 1, dist.end(),
                           dist[start] + len);
      if (it == dist.end()) continue;
      const size_t end = static_cast<size_t>(it - dist.begin());
      const Eigen::Matrix4d rel_ref = rigid_inverse(ref_m[start]) * ref_m[end];
      const Eigen::Matrix4d rel_est = rigid_inverse(est_m[start]) * est_m[end];
      const Eigen::Matrix4d error = rigid_inverse(rel_est) * rel_ref;
      t_bucket += error.topRightCorner<3, 1>().norm() / len;
      r_bucket += rotation_angle(error) / len;
      ++count;
    }
    if (count > 0) {
      LengthBucket bucket;
      bucket.length = len;
      bucket.t_percent = t_bucket / count * 100.0;
      bucket.r_deg_per_100m = r_bucket / count * (180.0 / kPi) * 100.0;
      bucket.segments = count;
      out.breakdown.push_back(bucket);
      t_sum += t_bucket;
      r_sum += r_bucket;
      out.segments += count;
    }
  }
  if (out.segments > 0) {
    out.valid = true;
    out.t_rel = t_sum / out.segments * 100.0;
    out.r_rel = r_sum / out.segments * (180.0 / kPi) * 100.0;
  }
  return out;
}

double ate_rmse(const Trajectory& estimate, const Trajectory& reference, AlignMode align) {
  check_paired(estimate, reference, 1);
  const Trajectory* mapped = &estimate;
  Alignment alignment;
  if (align != AlignMode::kNone) {
    alignment = umeyama_align(estimate, reference, align == AlignMode::kSim3);
    mapped = &alignment.aligned;
  }
  double sq = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    sq += (mapped->poses[i].translation - reference.poses[i].translation).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(reference.size()));
}

double rpe_per_second(const Trajectory& estimate, const Trajectory& reference,
                      const std::vector<double>& timestamps, double delta) {
  check_paired(estimate, reference, 2);
  if (timestamps.size() != estimate.size()) {
    throw ContractError("timestamps must cover every pose");
  }
  if (!(delta > 0.0)) throw ContractError("delta must be positive");
  for (size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      throw ContractError("timestamps must strictly increase");
    }
  }

  const size_t n = estimate.size();
  std::vector<Eigen::Matrix4d> est_m(n), ref_m(n);
  for (size_t i = 0; i < n; ++i) {
    est_m[i] = pose_to_matrix(estimate.poses[i]);
    ref_m[i] = pose_to_matrix(reference.poses[i]);
  }

  double sq = 0.0;
  int count = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(timestamps.begin() + static_cast<long>(i) + 1,
                                     timestamps.end(), timestamps[i] + delta);
    if (it == timestamps.end()) break;
    const size_t j = static_cast<size_t>(it - timestamps.begin());
    const Eigen::Matrix4d rel_ref = rigid_inverse(ref_m[i]) * ref_m[j];
    const Eigen::Matrix4d rel_est = rigid_inverse(est_m[i]) * est_m[j];
    const Eigen::Matrix4d error = rigid_inverse(rel_est) * rel_ref;
    const double drift = error.topRightCorner<3, 1>().norm() / delta;
    sq += drift * drift;
    ++count;
  }
  if (count == 0) throw ContractError("trajectory span is shorter than delta");
  return std::sqrt(sq / static_cast<double>(count));
}

MetricReport compute_metrics(const Trajectory& estimate, const Trajectory& reference,
                             AlignMode ate_align, double rpe_delta) {
  MetricReport report;
  report.segments = kitti_segment_errors(estimate, reference);
  report.ate_align = ate_align;
  report.ate = ate_rmse(estimate, reference, ate_align);
  if (reference.has_timestamps() &&
      reference.timestamps.back() - reference.timestamps.front() >= rpe_delta) {
    report.rpe = rpe_per_second(estimate, reference, reference.timestamps, rpe_delta);
    report.has_rpe = true;
  }
  return report;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json doc;
  doc["t_rel_percent"] = report.segments.t_rel;
  doc["r_rel_deg_per_100m"] = report.segments.r_rel;
  doc["segments"] = report.segments.segments;
  doc["segment_metrics_valid"] = report.segments.valid;
  doc["ate_rmse_m"] = report.ate;
  doc["ate_alignment"] = to_string(report.ate_align);
  if (report.has_rpe) doc["rpe_rmse_m_per_s"] = report.rpe;
  nlohmann::json rows = nlohmann::json::array();
  for (const LengthBucket& bucket : report.segments.breakdown) {
    rows.push_back({{"length_m", bucket.length},
                    {"t_percent", bucket.t_percent},
                    {"r_deg_per_100m", bucket.r_deg_per_100m},
                    {"segments", bucket.segments}});
  }
  doc["breakdown"] = rows;
  return doc.dump(2);
}

std::string report_to_table(const MetricReport& report) {
  std::ostringstream out;
  out << "metric                    value\n";
  if (report.segments.valid) {
    out << "t_rel [%]                 " << format_fixed(report.segments.t_rel, 4) << "\n";
    out << "r_rel [deg/100m]          " << format_fixed(report.segments.r_rel, 4) << "\n";
  } else {
    out << "t_rel [%]                 n/a (trajectory shorter than smallest segment)\n";
    out << "r_rel [deg/100m]          n/a\n";
  }
  out << "ATE RMSE [m] (" << to_string(report.ate_align) << ")"
      << std::string(report.ate_align == AlignMode::kNone ? 6 : 5, ' ')
      << format_fixed(report.ate, 6) << "\n";
  if (report.has_rpe) {
    out << "RPE RMSE [m/s]            " << format_fixed(report.rpe, 6) << "\n";
  }
  if (!report.segments.breakdown.empty()) {
    out << "\nlength[m]   t[%]      r[deg/100m]  segments\n";
    for (const LengthBucket& bucket : report.segments.breakdown) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-11.0f %-9.4f %-12.4f %d\n", bucket.length,
                    bucket.t_percent, bucket.r_deg_per_100m, bucket.segments);
      out << line;
    }
  }
  return out.str();
}

}  // namespace vo
