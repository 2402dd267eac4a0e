// Command-line front end: train, infer, eval, and sweep over the library.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "vo/config.hpp"
#include "vo/errors.hpp"
#include "vo/eval.hpp"
#include "vo/runner.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const vo::RunConfig config = vo::load_run_config(config_path);
  const vo::TrainResult result = vo::run_train(config, out_dir);
  std::printf("output dir      %s\n", result.output_dir.c_str());
  std::printf("config snapshot %s\n", result.config_path.c_str());
  std::printf("train log       %s\n", result.log_path.c_str());
  std::printf("checkpoint      %s\n", result.checkpoint_path.c_str());
  std::printf("val l_total     %.6f -> %.6f\n", result.initial_val_total,
              result.final_val_total);
  return 0;
}

int cmd_infer(const std::string& checkpoint, std::string config_path, const std::string& input,
              const std::string& ablation, const std::string& out_dir) {
  if (config_path.empty()) {
    config_path = (std::filesystem::path(checkpoint).parent_path() / "config.json").string();
  }
  const vo::InferFiles files = vo::run_infer(checkpoint, config_path, input, ablation, out_dir);
  for (size_t i = 0; i < files.sequence_ids.size(); ++i) {
    std::printf("%-24s %s\n", files.sequence_ids[i].c_str(), files.kitti_files[i].c_str());
  }
  std::printf("diagnostics     %s\n", files.diagnostics_file.c_str());
  return 0;
}

int cmd_eval(const std::string& est, const std::string& ref, const std::string& align,
             double rpe_delta, const std::string& report_path) {
  const vo::MetricReport report =
      vo::run_eval(est, ref, vo::align_mode_from_string(align), rpe_delta, report_path);
  std::fputs(vo::report_to_table(report).c_str(), stdout);
  if (!report_path.empty()) std::printf("report          %s\n", report_path.c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& out_dir) {
  const vo::RunConfig config = vo::load_run_config(config_path);
  const std::vector<vo::SweepRow> rows = vo::run_sweep(config, axis, out_dir);
  std::fputs(vo::sweep_table(axis, rows).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent visual odometry with selective memory and pose refinement"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  CLI::App* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--out", out_dir, "override the output directory");

  std::string checkpoint, input = "synthetic", ablation;
  CLI::App* infer = app.add_subcommand("infer", "Write trajectories for a trained model");
  infer->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  infer->add_option("--config", config_path, "config snapshot (default: next to checkpoint)");
  infer->add_option("--input", input, "'synthetic' (held-out sequences) or a manifest path");
  infer->add_option("--ablation", ablation, "override attention: full|temporal_only|none");
  infer->add_option("--out", out_dir, "output directory")->required();

  std::string est, ref, align = "sim3", report_path;
  double rpe_delta = 1.0;
  CLI::App* eval = app.add_subcommand("eval", "Compare an estimate against a reference");
  eval->add_option("--est", est, "estimated trajectory file")->required();
  eval->add_option("--ref", ref, "reference trajectory file")->required();
  eval->add_option("--align", align, "ATE alignment: none|se3|sim3");
  eval->add_option("--rpe-delta", rpe_delta, "relative pose error horizon (s)");
  eval->add_option("--report", report_path, "write the metric report JSON here");

  std::string axis;
  CLI::App* sweep = app.add_subcommand("sweep", "Train one run per value of an axis");
  sweep->add_option("--config", config_path, "run config JSON")->required();
  sweep->add_option("--axis", axis, "sequence_length|thresholds|ablations")->required();
  sweep->add_option("--out", out_dir, "override the output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(config_path, out_dir);
    if (infer->parsed()) return cmd_infer(checkpoint, config_path, input, ablation, out_dir);
    if (eval->parsed()) return cmd_eval(est, ref, align, rpe_delta, report_path);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
