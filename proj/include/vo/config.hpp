#pragma once

#include <cstdint>
#include <string>

#include "vo/data.hpp"
#include "vo/model.hpp"

namespace vo {

// Everything needed to reproduce a run. The numeric defaults are the
// reference training protocol; desk-scale runs override them explicitly so
// the documented defaults stay faithful.
struct RunConfig {
  std::uint64_t seed = 0;
  int iterations = 1000;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 4e-4;
  int lr_halve_every = 60000;   // iterations between learning-rate halvings
  double loss_k = 100.0;
  int sequence_length = 11;
  AttentionMode ablation = AttentionMode::kFull;
  double theta_rot = 0.005;     // rad
  double theta_trans = 0.6;     // m
  int buffer_capacity = 11;
  VoModelConfig model;

  std::string source = "synthetic";  // synthetic | manifest
  SyntheticSpec synthetic;
  std::string manifest_path;
  int holdout = 20;                  // sequences reserved for validation
  int snippet_stride = 0;            // manifest windows; 0 keeps them disjoint

  std::string output_dir = "run";
  int checkpoint_every = 0;          // 0: final checkpoint only

  // Copies the shared fields (sequence length, thresholds, ablation, input
  // channels) into the nested specs, then validates everything. Throws
  // ConfigError.
  void finalize();
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Full resolved round trip: parse(run_config_to_json(c)) reproduces c.
std::string run_config_to_json(const RunConfig& config);

// output_dir as-is when absolute; otherwise under $VO_OUTPUT_ROOT when that
// is set, else relative to the working directory.
std::string resolve_output_dir(const RunConfig& config);

}  // namespace vo
