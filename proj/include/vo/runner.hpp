#pragma once

#include <string>
#include <vector>

#include "vo/config.hpp"
#include "vo/data.hpp"
#include "vo/eval.hpp"
#include "vo/model.hpp"

namespace vo {

struct Dataset {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> holdout;
};

// Synthetic source: one generator stream produces train plus `holdout` extra
// sequences. Manifest source: fixed-length windows over each trajectory
// (disjoint unless snippet_stride overrides), re-rooted at the window start,
// features encoded from the ground-truth relatives; the last `holdout`
// windows are held out.
Dataset build_dataset(const RunConfig& config);

struct TrainResult {
  std::string output_dir;
  std::string config_path;      // resolved snapshot, rerunnable
  std::string log_path;         // JSON lines
  std::string checkpoint_path;  // final parameters
  double initial_val_total = 0.0;
  double final_val_total = 0.0;
};

// Seeded init, deterministic batch sampling, forward/backward/AdamW steps
// with the halving schedule, validation before and after. Nothing in the
// outputs depends on wall time, so a rerun from the snapshot is byte-
// identical. `output_dir_override` redirects files without entering the
// snapshot. Throws Error on a non-finite loss.
TrainResult run_train(const RunConfig& config, const std::string& output_dir_override = "");

struct InferenceResult {
  Trajectory trajectory;  // origin pose included, so length = frames
  SequenceDiagnostics diagnostics;
};

InferenceResult infer_sequence(const VoModel& model, const std::vector<Tensor>& features);

// Mean total loss over the samples (forward only).
double validation_loss(const VoModel& model, const std::vector<SequenceSample>& samples,
                       double k);

// Mean per-sequence aligned ATE of the model's estimates against ground
// truth.
double mean_holdout_ate(const VoModel& model, const std::vector<SequenceSample>& samples,
                        AlignMode align = AlignMode::kSim3);

struct InferFiles {
  std::vector<std::string> sequence_ids;
  std::vector<std::string> kitti_files;
  std::vector<std::string> tum_files;
  std::string diagnostics_file;
};

// Loads the config snapshot and checkpoint, runs inference over the input
// ("synthetic" uses the config's held-out sequences; otherwise a manifest
// path), and writes each trajectory in both formats plus a diagnostics JSON
// (stored memory steps and attention weights per sequence).
InferFiles run_infer(const std::string& checkpoint_path, const std::string& config_path,
                     const std::string& input, const std::string& ablation_override,
                     const std::string& output_dir);

// Parses both trajectory files (format auto-detected), associates by nearest
// timestamp within 0.02 s when both sides carry timestamps (raising Error
// when more than 10% stay unmatched), computes the metric report, and writes
// it as JSON when report_path is nonempty.
MetricReport run_eval(const std::string& estimate_path, const std::string& reference_path,
                      AlignMode ate_align, double rpe_delta, const std::string& report_path);

struct SweepRow {
  std::string axis_value;
  double final_val_total = 0.0;
  double mean_ate = 0.0;  // sim3-aligned, held-out mean
};

// Trains and evaluates one run per axis value under the shared seed.
// axis: "sequence_length" {5,7,9,11} | "thresholds" (4 rot/trans pairs) |
// "ablations" {full, temporal_only, none}.
std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis,
                                const std::string& output_dir_override = "");

std::string sweep_table(const std::string& axis, const std::vector<SweepRow>& rows);

}  // namespace vo
