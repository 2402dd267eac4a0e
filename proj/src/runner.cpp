#include "vo/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "vo/adam.hpp"
#include "vo/checkpoint.hpp"
#include "vo/errors.hpp"
#include "vo/loss.hpp"
#include "vo/rng.hpp"

namespace vo {

namespace {

std::string sanitize_filename(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

std::vector<Pose> absolute_tail(const SequenceSample& sample) {
  return std::vector<Pose>(sample.gt_absolute.begin() + 1, sample.gt_absolute.end());
}

// Raw pair inputs -> encoded feature maps, one per frame pair.
std::vector<Tensor> encode_sequence(const VoModel& model, const std::vector<Tensor>& raw) {
  std::vector<Tensor> features;
  features.reserve(raw.size());
  for (const Tensor& x : raw) features.push_back(encoder_forward(model, x));
  return features;
}

int first_column_count(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream tokens(line);
    std::string token;
    int count = 0;
    while (tokens >> token) ++count;
    if (count > 0) return count;
  }
  return 0;
}

Trajectory parse_trajectory_auto(const std::string& text) {
  const int columns = first_column_count(text);
  if (columns == 12) return parse_kitti_poses(text);
  if (columns == 8) return parse_tum_trajectory(text);
  throw ParseError("unrecognized trajectory layout: expected 12 (pose rows) or 8 "
                   "(timestamped) columns, found " +
                   std::to_string(columns));
}

// Greedy nearest-timestamp matching, monotone in both sequences. Keeps the
// reference timestamps on both outputs.
void associate_by_timestamp(Trajectory& est, Trajectory& ref, double window) {
  Trajectory est_out, ref_out;
  std::vector<double> unmatched;
  size_t j = 0;
  long last_used = -1;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double t = ref.timestamps[i];
    while (j + 1 < est.size() &&
           std::abs(est.timestamps[j + 1] - t) < std::abs(est.timestamps[j] - t)) {
      ++j;
    }
    if (std::abs(est.timestamps[j] - t) <= window && static_cast<long>(j) > last_used) {
      est_out.poses.push_back(est.poses[j]);
      est_out.timestamps.push_back(t);
      ref_out.poses.push_back(ref.poses[i]);
      ref_out.timestamps.push_back(t);
      last_used = static_cast<long>(j);
    } else {
      unmatched.push_back(t);
    }
  }
  if (unmatched.size() * 10 > ref.size()) {
    std::string message = "timestamp association failed for " +
                          std::to_string(unmatched.size()) + " of " +
                          std::to_string(ref.size()) + " reference frames; unmatched:";
    for (size_t k = 0; k < unmatched.size() && k < 20; ++k) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.6f", unmatched[k]);
      message += buf;
    }
    if (unmatched.size() > 20) message += " ...";
    throw Error(message);
  }
  est = std::move(est_out);
  ref = std::move(ref_out);
}

}  // namespace

Dataset build_dataset(const RunConfig& config_in) {
  RunConfig config = config_in;
  config.finalize();
  Dataset out;
  if (config.source == "synthetic") {
    SyntheticSpec spec = config.synthetic;
    spec.num_sequences = config.synthetic.num_sequences + config.holdout;
    std::vector<SequenceSample> all = synth_generate(spec);
    out.train.assign(all.begin(), all.begin() + config.synthetic.num_sequences);
    out.holdout.assign(all.begin() + config.synthetic.num_sequences, all.end());
    return out;
  }

  const DatasetManifest manifest = load_manifest(config.manifest_path);
  Rng feature_rng(config.synthetic.seed);
  std::vector<SequenceSample> all;
  for (size_t s = 0; s < manifest.sequence_ids.size(); ++s) {
    const std::string text = read_text_file(manifest.pose_files[s]);
    const Trajectory traj = manifest.format == TrajectoryFormat::kKitti
                                ? parse_kitti_poses(text)
                                : parse_tum_trajectory(text);
    SnippetOptions options;
    options.length = config.sequence_length;
    options.policy = SnippetPolicy::kStride;
    options.stride = config.snippet_stride;
    for (int start : sample_snippets(traj.size(), options)) {
      SequenceSample sample;
      sample.id = manifest.sequence_ids[s] + "-w" + std::to_string(start);
      const Pose root_inv = inverse(traj.poses[static_cast<size_t>(start)]);
      sample.gt_absolute.push_back(Pose());
      for (int t = 1; t < config.sequence_length; ++t) {
        sample.gt_absolute.push_back(
            compose(root_inv, traj.poses[static_cast<size_t>(start + t)]));
      }
      Trajectory rooted;
      rooted.poses = sample.gt_absolute;
      sample.gt_relative = relative_from_absolute(rooted);
      for (const Pose& rel : sample.gt_relative) {
        sample.features.push_back(encode_motion_features(
            rel, config.synthetic.channels, config.synthetic.height, config.synthetic.width,
            config.synthetic.noise_sigma, feature_rng));
      }
      all.push_back(std::move(sample));
    }
  }
  if (static_cast<int>(all.size()) <= config.holdout) {
    throw ConfigError("manifest yields too few windows for the holdout split");
  }
  out.train.assign(all.begin(), all.end() - config.holdout);
  out.holdout.assign(all.end() - config.holdout, all.end());
  return out;
}

InferenceResult infer_sequence(const VoModel& model, const std::vector<Tensor>& features) {
  SequenceResult fwd = forward_sequence(model, encode_sequence(model, features));
  InferenceResult out;
  out.trajectory.poses.push_back(Pose());
  for (const PosePrediction& p : fwd.absolutes) out.trajectory.poses.push_back(p.pose());
  out.diagnostics = std::move(fwd.diagnostics);
  return out;
}

double validation_loss(const VoModel& model, const std::vector<SequenceSample>& samples,
                       double k) {
  if (samples.empty()) throw ContractError("validation requires at least one sample");
  double sum = 0.0;
  for (const SequenceSample& sample : samples) {
    const SequenceResult fwd = forward_sequence(model, encode_sequence(model, sample.features));
    const Tensor local = local_loss(fwd.relatives, sample.gt_relative, k);
    const Tensor global = global_loss(fwd.absolutes, absolute_tail(sample), k);
    sum += local.scalar() + global.scalar();
  }
  return sum / static_cast<double>(samples.size());
}

double mean_holdout_ate(const VoModel& model, const std::vector<SequenceSample>& samples,
                        AlignMode align) {
  if (samples.empty()) throw ContractError("ate requires at least one sample");
  double sum = 0.0;
  for (const SequenceSample& sample : samples) {
    const InferenceResult inferred = infer_sequence(model, sample.features);
    Trajectory reference;
    reference.poses = sample.gt_absolute;
    sum += ate_rmse(inferred.trajectory, reference, align);
  }
  return sum / static_cast<double>(samples.size());
}

TrainResult run_train(const RunConfig& config_in, const std::string& output_dir_override) {
  RunConfig config = config_in;
  config.finalize();
  const std::string out_dir =
      output_dir_override.empty() ? resolve_output_dir(config) : output_dir_override;
  std::filesystem::create_directories(out_dir);

  TrainResult result;
  result.output_dir = out_dir;
  result.config_path = out_dir + "/config.json";
  result.log_path = out_dir + "/train_log.jsonl";
  result.checkpoint_path = out_dir + "/checkpoint_final.json";
  write_text_file(result.config_path, run_config_to_json(config));

  const Dataset dataset = build_dataset(config);
  if (dataset.train.empty()) throw ConfigError("no training sequences");

  VoModel model(config.model, config.seed);
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.weight_decay = config.weight_decay;
  AdamOptimizer optimizer(model.parameters().tensors(), adam);

  std::ostringstream log;
  const auto log_val = [&log](int iteration, double value) {
    nlohmann::json row;
    row["event"] = "val";
    row["iteration"] = iteration;
    row["l_total"] = value;
    log << row.dump() << '\n';
  };

  if (!dataset.holdout.empty()) {
    result.initial_val_total = validation_loss(model, dataset.holdout, config.loss_k);
    log_val(0, result.initial_val_total);
  }

  Rng sampler(config.seed + 1);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const double lr = config.learning_rate * std::pow(0.5, iter / config.lr_halve_every);
    optimizer.set_learning_rate(lr);
    optimizer.zero_grad();

    Tensor batch_total;
    double sum_local = 0.0;
    double sum_global = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const size_t idx = static_cast<size_t>(sampler.integer(dataset.train.size()));
      const SequenceSample& sample = dataset.train[idx];
      const SequenceResult fwd =
          forward_sequence(model, encode_sequence(model, sample.features));
      const Tensor local = local_loss(fwd.relatives, sample.gt_relative, config.loss_k);
      const Tensor global = global_loss(fwd.absolutes, absolute_tail(sample), config.loss_k);
      const Tensor total = total_loss(local, global);
      sum_local += local.scalar();
      sum_global += global.scalar();
      batch_total = b == 0 ? total : batch_total + total;
    }
    const Tensor objective = scale_const(batch_total, 1.0 / config.batch_size);
    const double l_total = objective.scalar();
    if (!std::isfinite(l_total)) {
      throw Error("training aborted: non-finite loss at iteration " + std::to_string(iter));
    }
    backward(objective);
    optimizer.step();

    nlohmann::json row;
    row["event"] = "train";
    row["iteration"] = iter;
    row["lr"] = lr;
    row["l_local"] = sum_local / config.batch_size;
    row["l_global"] = sum_global / config.batch_size;
    row["l_total"] = l_total;
    log << row.dump() << '\n';

    if (config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0 &&
        iter + 1 < config.iterations) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.json", iter + 1);
      save_checkpoint(model.parameters(), out_dir + "/" + name);
    }
  }

  if (!dataset.holdout.empty()) {
    result.final_val_total = validation_loss(model, dataset.holdout, config.loss_k);
    log_val(config.iterations, result.final_val_total);
  }
  save_checkpoint(model.parameters(), result.checkpoint_path);
  write_text_file(result.log_path, log.str());
  return result;
}

InferFiles run_infer(const std::string& checkpoint_path, const std::string& config_path,
                     const std::string& input, const std::string& ablation_override,
                     const std::string& output_dir) {
  RunConfig config = load_run_config(config_path);
  if (!ablation_override.empty()) {
    config.ablation = attention_mode_from_string(ablation_override);
  }
  const bool synthetic_input = input.empty() || input == "synthetic";
  if (!synthetic_input) {
    config.source = "manifest";
    config.manifest_path = input;
    config.holdout = 0;
  }
  config.finalize();

  VoModel model(config.model, config.seed);
  load_checkpoint(model.parameters(), checkpoint_path);
  const Dataset dataset = build_dataset(config);
  const std::vector<SequenceSample>& samples =
      synthetic_input && !dataset.holdout.empty() ? dataset.holdout : dataset.train;
  if (samples.empty()) throw ConfigError("no sequences to infer");

  std::filesystem::create_directories(output_dir);
  InferFiles out;
  nlohmann::json sequences = nlohmann::json::array();
  for (const SequenceSample& sample : samples) {
    InferenceResult inferred = infer_sequence(model, sample.features);
    for (size_t t = 0; t < inferred.trajectory.poses.size(); ++t) {
      inferred.trajectory.timestamps.push_back(0.1 * static_cast<double>(t));
    }
    const std::string base = output_dir + "/" + sanitize_filename(sample.id);
    const std::string kitti_path = base + ".kitti.txt";
    const std::string tum_path = base + ".tum.txt";
    write_text_file(kitti_path, write_trajectory(inferred.trajectory, TrajectoryFormat::kKitti));
    write_text_file(tum_path, write_trajectory(inferred.trajectory, TrajectoryFormat::kTum));
    out.sequence_ids.push_back(sample.id);
    out.kitti_files.push_back(kitti_path);
    out.tum_files.push_back(tum_path);

    nlohmann::json entry;
    entry["id"] = sample.id;
    entry["stored_steps"] = inferred.diagnostics.stored_steps;
    entry["alpha_history"] = inferred.diagnostics.alpha_history;
    sequences.push_back(entry);
  }
  nlohmann::json diag;
  diag["ablation"] = to_string(config.ablation);
  diag["sequences"] = sequences;
  out.diagnostics_file = output_dir + "/diagnostics.json";
  write_text_file(out.diagnostics_file, diag.dump(2));
  return out;
}

MetricReport run_eval(const std::string& estimate_path, const std::string& reference_path,
                      AlignMode ate_align, double rpe_delta, const std::string& report_path) {
  Trajectory est = parse_trajectory_auto(read_text_file(estimate_path));
  Trajectory ref = parse_trajectory_auto(read_text_file(reference_path));
  if (est.has_timestamps() && ref.has_timestamps()) {
    associate_by_timestamp(est, ref, 0.02);
  }
  const MetricReport report = compute_metrics(est, ref, ate_align, rpe_delta);
  if (!report_path.empty()) write_text_file(report_path, report_to_json(report));
  return report;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis,
                                const std::string& output_dir_override) {
  if (config.holdout < 1) throw ConfigError("sweep requires held-out sequences");
  struct Variant {
    std::string label;
    RunConfig config;
  };
  std::vector<Variant> variants;
  if (axis == "sequence_length") {
    for (int len : {5, 7, 9, 11}) {
      RunConfig c = config;
      c.sequence_length = len;
      variants.push_back({std::to_string(len) + " frames", c});
    }
  } else if (axis == "thresholds") {
    const double pairs[4][2] = {{0.0, 0.0}, {0.005, 0.6}, {0.01, 0.01}, {1e9, 1e9}};
    for (const auto& pair : pairs) {
      RunConfig c = config;
      c.theta_rot = pair[0];
      c.theta_trans = pair[1];
      char label[64];
      std::snprintf(label, sizeof(label), "rot=%g,trans=%g", pair[0], pair[1]);
      variants.push_back({label, c});
    }
  } else if (axis == "ablations") {
    for (AttentionMode mode :
         {AttentionMode::kFull, AttentionMode::kTemporalOnly, AttentionMode::kNone}) {
      RunConfig c = config;
      c.ablation = mode;
      variants.push_back({to_string(mode), c});
    }
  } else {
    throw ConfigError("unknown sweep axis '" + axis +
                      "' (expected sequence_length|thresholds|ablations)");
  }

  const std::string root =
      output_dir_override.empty() ? resolve_output_dir(config) : output_dir_override;
  std::filesystem::create_directories(root);
  std::vector<SweepRow> rows;
  for (size_t i = 0; i < variants.size(); ++i) {
    const std::string run_dir = root + "/" + axis + "_" + std::to_string(i);
    const TrainResult trained = run_train(variants[i].config, run_dir);
    RunConfig resolved = variants[i].config;
    resolved.finalize();
    VoModel model(resolved.model, resolved.seed);
    load_checkpoint(model.parameters(), trained.checkpoint_path);
    const Dataset dataset = build_dataset(resolved);
    SweepRow row;
    row.axis_value = variants[i].label;
    row.final_val_total = trained.final_val_total;
    row.mean_ate = mean_holdout_ate(model, dataset.holdout);
    rows.push_back(row);
  }

  nlohmann::json doc;
  doc["axis"] = axis;
  nlohmann::json table = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    table.push_back({{"value", row.axis_value},
                     {"final_l_total", row.final_val_total},
                     {"mean_ate_m", row.mean_ate}});
  }
  doc["rows"] = table;
  write_text_file(root + "/sweep_" + axis + ".json", doc.dump(2));
  write_text_file(root + "/sweep_" + axis + ".txt", sweep_table(axis, rows));
  return rows;
}

std::string sweep_table(const std::string& axis, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "axis: " << axis << "\n";
  out << "value                  final_l_total    mean_ate_m\n";
  for (const SweepRow& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %-16.6f %.6f\n", row.axis_value.c_str(),
                  row.final_val_total, row.mean_ate);
    out << line;
  }
  return out.str();
}

}  // namespace vo
