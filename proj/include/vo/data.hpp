#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vo/geometry.hpp"
#include "vo/rng.hpp"
#include "vo/tensor.hpp"

namespace vo {

enum class TrajectoryFormat { kKitti, kTum };

TrajectoryFormat trajectory_format_from_string(const std::string& name);
std::string to_string(TrajectoryFormat format);

// 12 whitespace-separated reals per nonempty line: the top three rows of a
// homogeneous pose, row-major. The rotation block must be rigid within 1e-4
// (it is then projected onto the nearest rotation). Malformed lines raise
// ParseError carrying the 1-based line number.
Trajectory parse_kitti_poses(const std::string& text);

// Lines "timestamp tx ty tz qx qy qz qw" with '#' comments. Quaternion norm
// must be within 1e-3 of 1 (then renormalized); timestamps must strictly
// increase.
Trajectory parse_tum_trajectory(const std::string& text);

// Inverse of the parsers, 17 significant digits per value. The TUM format
// requires timestamps.
std::string write_trajectory(const Trajectory& traj, TrajectoryFormat format);

// One training sequence: per-pair features aligned with gt_relative;
// gt_absolute additionally carries the origin pose at index 0.
struct SequenceSample {
  std::vector<Tensor> features;
  std::vector<Pose> gt_relative;
  std::vector<Pose> gt_absolute;
  std::string id;
};

struct SyntheticSpec {
  std::uint64_t seed = 0;
  int num_sequences = 1;
  int sequence_length = 11;
  double smoothness = 0.8;        // EMA factor for the motion noise
  double noise_sigma = 0.05;      // per-element feature noise
  double bias_sigma = 0.0;        // per-sequence sensor bias on the encoded motion
  int channels = 8;
  int height = 8;
  int width = 8;
  double forward_step = 0.5;      // base translation per frame (m)
  double translation_jitter = 0.1;
  double rotation_jitter = 0.02;

  void validate() const;  // throws ConfigError
};

// Feature encoding shared by the generator and manifest-backed pipelines:
// channel c carries motion component c mod 6 (tx,ty,tz,rx,ry,rz) broadcast
// over the spatial grid, plus N(0, sigma) noise per element.
Tensor encode_motion_features(const Pose& relative, int channels, int height, int width,
                              double sigma, Rng& rng);

// Smooth random trajectories with self-consistent ground truth; output is
// bit-identical for equal SyntheticSpec values (the seed is one of them).
std::vector<SequenceSample> synth_generate(const SyntheticSpec& spec);

enum class SnippetPolicy { kStride, kRandom };

struct SnippetOptions {
  int length = 11;
  SnippetPolicy policy = SnippetPolicy::kStride;
  int stride = 0;            // kStride: start spacing; 0 means `length` (disjoint)
  int count = 0;             // kRandom: windows wanted (must be >= 1)
  double max_overlap = 0.5;  // kRandom: max shared fraction with the previous window
  std::uint64_t seed = 0;
};

// Start indices of `length`-frame windows. Random policy is seed-determined
// and rejects candidates overlapping the previously accepted window by more
// than max_overlap (it may return fewer than `count` windows).
std::vector<int> sample_snippets(size_t trajectory_size, const SnippetOptions& options);

// {"name", "split", "format", "sequence_ids": [...], "pose_files": [...]}
// with the two arrays parallel; relative pose-file paths resolve against the
// manifest's directory.
struct DatasetManifest {
  std::string name;
  std::string split;
  TrajectoryFormat format = TrajectoryFormat::kKitti;
  std::vector<std::string> sequence_ids;
  std::vector<std::string> pose_files;
};

DatasetManifest parse_manifest(const std::string& json_text, const std::string& base_dir);
DatasetManifest load_manifest(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace vo
