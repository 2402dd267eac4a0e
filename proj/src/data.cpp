#include "vo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "json.hpp"

#include "vo/errors.hpp"

namespace vo {

namespace {

constexpr double kRigidTol = 1e-4;      // parser tolerance, looser than pose_from_matrix
constexpr double kQuatNormTol = 1e-3;

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_real(const std::string& token, size_t line_number) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("expected a finite real, got '" + token + "'", line_number);
  }
  return value;
}

// Nearest rotation in Frobenius norm; input is already rigid within kRigidTol.
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if ((u * v.transpose()).determinant() < 0.0) s(2) = -1.0;
  return u * s.asDiagonal() * v.transpose();
}

Eigen::Matrix3d quaternion_to_matrix(double qx, double qy, double qz, double qw) {
  Eigen::Matrix3d r;
  r(0, 0) = 1.0 - 2.0 * (qy * qy + qz * qz);
  r(0, 1) = 2.0 * (qx * qy - qz * qw);
  r(0, 2) = 2.0 * (qx * qz + qy * qw);
  r(1, 0) = 2.0 * (qx * qy + qz * qw);
  r(1, 1) = 1.0 - 2.0 * (qx * qx + qz * qz);
  r(1, 2) = 2.0 * (qy * qz - qx * qw);
  r(2, 0) = 2.0 * (qx * qz - qy * qw);
  r(2, 1) = 2.0 * (qy * qz + qx * qw);
  r(2, 2) = 1.0 - 2.0 * (qx * qx + qy * qy);
  return r;
}

// Shepperd's method: pick the largest diagonal pivot for stability.
void matrix_to_quaternion(const Eigen::Matrix3d& r, double& qx, double& qy, double& qz,
                          double& qw) {
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;
    qw = 0.25 * s;
    qx = (r(2, 1) - r(1, 2)) / s;
    qy = (r(0, 2) - r(2, 0)) / s;
    qz = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    qw = (r(2, 1) - r(1, 2)) / s;
    qx = 0.25 * s;
    qy = (r(0, 1) + r(1, 0)) / s;
    qz = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    qw = (r(0, 2) - r(2, 0)) / s;
    qx = (r(0, 1) + r(1, 0)) / s;
    qy = 0.25 * s;
    qz = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    qw = (r(1, 0) - r(0, 1)) / s;
    qx = (r(0, 2) + r(2, 0)) / s;
    qy = (r(1, 2) + r(2, 1)) / s;
    qz = 0.25 * s;
  }
  const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
  qx /= norm;
  qy /= norm;
  qz /= norm;
  qw /= norm;
}

void check_rigidity(const Eigen::Matrix3d& r, size_t line_number) {
  const Eigen::Matrix3d gram = r.transpose() * r;
  const double ortho_err = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kRigidTol) {
    throw ParseError("rotation block is not orthonormal (deviation " + std::to_string(ortho_err) +
                         ")",
                     line_number);
  }
  if (r.determinant() < 0.0) {
    throw ParseError("rotation block is a reflection (negative determinant)", line_number);
  }
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf);
}

}  // namespace

TrajectoryFormat trajectory_format_from_string(const std::string& name) {
  if (name == "kitti") return TrajectoryFormat::kKitti;
  if (name == "tum") return TrajectoryFormat::kTum;
  throw ConfigError("unknown trajectory format '" + name + "' (expected kitti|tum)");
}

std::string to_string(TrajectoryFormat format) {
  return format == TrajectoryFormat::kKitti ? "kitti" : "tum";
}

Trajectory parse_kitti_poses(const std::string& text) {
  Trajectory traj;
  std::istringstream stream(text);
  std::string line;
  size_t line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 12) {
      throw ParseError("expected 12 values, got " + std::to_string(tokens.size()), line_number);
    }
    double v[12];
    for (int i = 0; i < 12; ++i) v[i] = parse_real(tokens[i], line_number);
    Eigen::Matrix3d r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    check_rigidity(r, line_number);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = project_to_rotation(r);
    m(0, 3) = v[3];
    m(1, 3) = v[7];
    m(2, 3) = v[11];
    traj.poses.push_back(pose_from_matrix(m));
  }
  return traj;
}

Trajectory parse_tum_trajectory(const std::string& text) {
  Trajectory traj;
  std::istringstream stream(text);
  std::string line;
  size_t line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    const size_t hash = line.find('#');
    const std::string payload = hash == std::string::npos ? line : line.substr(0, hash);
    const std::vector<std::string> tokens = split_tokens(payload);
    if (tokens.empty()) continue;
    if (tokens.size() != 8) {
      throw ParseError("expected 8 values (timestamp t q), got " + std::to_string(tokens.size()),
                       line_number);
    }
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = parse_real(tokens[i], line_number);
    const double ts = v[0];
    if (!traj.timestamps.empty() && ts <= traj.timestamps.back()) {
      throw ParseError("timestamps must strictly increase", line_number);
    }
    double qx = v[4], qy = v[5], qz = v[6], qw = v[7];
    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (norm < 1e-6) throw ParseError("zero-norm quaternion", line_number);
    if (std::abs(norm - 1.0) > kQuatNormTol) {
      throw ParseError("quaternion norm " + std::to_string(norm) + " deviates from 1 beyond " +
                           std::to_string(kQuatNormTol),
                       line_number);
    }
    qx /= norm;
    qy /= norm;
    qz /= norm;
    qw /= norm;
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = project_to_rotation(quaternion_to_matrix(qx, qy, qz, qw));
    m(0, 3) = v[1];
    m(1, 3) = v[2];
    m(2, 3) = v[3];
    traj.timestamps.push_back(ts);
    traj.poses.push_back(pose_from_matrix(m));
  }
  return traj;
}

std::string write_trajectory(const Trajectory& traj, TrajectoryFormat format) {
  if (format == TrajectoryFormat::kTum && !traj.has_timestamps()) {
    throw ContractError("tum output requires timestamps");
  }
  if (traj.has_timestamps()) traj.validate();
  std::string out;
  for (size_t i = 0; i < traj.poses.size(); ++i) {
    const Eigen::Matrix4d m = pose_to_matrix(traj.poses[i]);
    if (format == TrajectoryFormat::kKitti) {
      for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 4; ++col) {
          if (row != 0 || col != 0) out += ' ';
          out += format_real(m(row, col));
        }
      }
    } else {
      double qx, qy, qz, qw;
      matrix_to_quaternion(m.topLeftCorner<3, 3>(), qx, qy, qz, qw);
      out += format_real(traj.timestamps[i]);
      out += ' ';
      out += format_real(m(0, 3));
      out += ' ';
      out += format_real(m(1, 3));
      out += ' ';
      out += format_real(m(2, 3));
      out += ' ';
      out += format_real(qx);
      out += ' ';
      out += format_real(qy);
      out += ' ';
      out += format_real(qz);
      out += ' ';
      out += format_real(qw);
    }
    out += '\n';
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_sequences < 1) throw ConfigError("num_sequences must be >= 1");
  if (sequence_length < 2) throw ConfigError("sequence_length must be >= 2");
  if (smoothness < 0.0 || smoothness >= 1.0) throw ConfigError("smoothness must be in [0, 1)");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (bias_sigma < 0.0) throw ConfigError("bias_sigma must be >= 0");
  if (channels < 1 || height < 1 || width < 1) throw ConfigError("feature dims must be >= 1");
  if (translation_jitter < 0.0 || rotation_jitter < 0.0) {
    throw ConfigError("jitter magnitudes must be >= 0");
  }
  if (!std::isfinite(forward_step)) throw ConfigError("forward_step must be finite");
}

Tensor encode_motion_features(const Pose& relative, int channels, int height, int width,
                              double sigma, Rng& rng) {
  if (channels < 1 || height < 1 || width < 1) throw ContractError("feature dims must be >= 1");
  if (sigma < 0.0) throw ContractError("sigma must be >= 0");
  const double motion[6] = {relative.translation.x(), relative.translation.y(),
                            relative.translation.z(), relative.rotation.x(),
                            relative.rotation.y(),    relative.rotation.z()};
  std::vector<double> values(static_cast<size_t>(channels) * height * width);
  size_t idx = 0;
  for (int c = 0; c < channels; ++c) {
    const double base = motion[c % 6];
    for (int p = 0; p < height * width; ++p) {
      values[idx++] = sigma == 0.0 ? base : base + rng.normal(0.0, sigma);
    }
  }
  return Tensor::from_data({channels, height, width}, values);
}

std::vector<SequenceSample> synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<SequenceSample> samples;
  samples.reserve(static_cast<size_t>(spec.num_sequences));
  for (int s = 0; s < spec.num_sequences; ++s) {
    SequenceSample sample;
    sample.id = "synth-" + std::to_string(spec.seed) + "-" + std::to_string(s);
    const int pairs = spec.sequence_length - 1;
    // One sensor-bias draw per sequence: the features report motion + bias
    // while the ground truth stays exact, so integration drifts linearly.
    double bias[6];
    for (double& b : bias) b = rng.normal(0.0, spec.bias_sigma);
    double state[6] = {0, 0, 0, 0, 0, 0};
    sample.gt_relative.reserve(static_cast<size_t>(pairs));
    for (int t = 0; t < pairs; ++t) {
      for (int k = 0; k < 6; ++k) {
        const double jitter = k < 3 ? spec.translation_jitter : spec.rotation_jitter;
        const double eps = rng.normal(0.0, jitter);
        state[k] = spec.smoothness * state[k] + (1.0 - spec.smoothness) * eps;
      }
      Pose rel;
      rel.translation = Eigen::Vector3d(state[0], state[1], spec.forward_step + state[2]);
      rel.rotation = Eigen::Vector3d(state[3], state[4], state[5]);
      sample.gt_relative.push_back(rel);
    }
    const Trajectory integrated = integrate_relative(sample.gt_relative, Pose());
    sample.gt_absolute = integrated.poses;
    sample.features.reserve(static_cast<size_t>(pairs));
    for (int t = 0; t < pairs; ++t) {
      Pose sensed = sample.gt_relative[static_cast<size_t>(t)];
      sensed.translation += Eigen::Vector3d(bias[0], bias[1], bias[2]);
      sensed.rotation += Eigen::Vector3d(bias[3], bias[4], bias[5]);
      sample.features.push_back(encode_motion_features(sensed, spec.channels, spec.height,
                                                       spec.width, spec.noise_sigma, rng));
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<int> sample_snippets(size_t trajectory_size, const SnippetOptions& options) {
  if (options.length < 1) throw ContractError("snippet length must be >= 1");
  if (static_cast<size_t>(options.length) > trajectory_size) {
    throw ContractError("trajectory shorter than snippet length");
  }
  if (options.max_overlap < 0.0 || options.max_overlap > 1.0) {
    throw ContractError("max_overlap must be in [0, 1]");
  }
  const int last_start = static_cast<int>(trajectory_size) - options.length;
  std::vector<int> starts;
  if (options.policy == SnippetPolicy::kStride) {
    const int stride = options.stride > 0 ? options.stride : options.length;
    for (int start = 0; start <= last_start; start += stride) starts.push_back(start);
  } else {
    if (options.count < 1) throw ContractError("random policy requires count >= 1");
    Rng rng(options.seed);
    const double max_shared = options.max_overlap * options.length;
    int attempts = 0;
    const int max_attempts = options.count * 100;
    while (static_cast<int>(starts.size()) < options.count && attempts < max_attempts) {
      ++attempts;
      const int candidate =
          last_start == 0 ? 0
                          : static_cast<int>(rng.integer(static_cast<std::uint64_t>(last_start) + 1));
      if (!starts.empty()) {
        const int gap = std::abs(candidate - starts.back());
        const double shared = std::max(0, options.length - gap);
        if (shared > max_shared) continue;
      }
      starts.push_back(candidate);
    }
  }
  return starts;
}

DatasetManifest parse_manifest(const std::string& json_text, const std::string& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("manifest root must be a JSON object");
  DatasetManifest manifest;
  try {
    manifest.name = doc.at("name").get<std::string>();
    manifest.split = doc.value("split", std::string("train"));
    manifest.format = trajectory_format_from_string(doc.value("format", std::string("kitti")));
    manifest.sequence_ids = doc.at("sequence_ids").get<std::vector<std::string>>();
    manifest.pose_files = doc.at("pose_files").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest field error: ") + e.what());
  }
  if (manifest.sequence_ids.size() != manifest.pose_files.size()) {
    throw ParseError("sequence_ids and pose_files must be parallel arrays");
  }
  if (manifest.sequence_ids.empty()) throw ParseError("manifest lists no sequences");
  if (!base_dir.empty()) {
    for (std::string& path : manifest.pose_files) {
      std::filesystem::path p(path);
      if (p.is_relative()) path = (std::filesystem::path(base_dir) / p).string();
    }
  }
  return manifest;
}

DatasetManifest load_manifest(const std::string& path) {
  const std::string text = read_text_file(path);
  return parse_manifest(text, std::filesystem::path(path).parent_path().string());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace vo
