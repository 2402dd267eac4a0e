// Acceptance gate: ten numbered end-to-end checks over the library, from
// finite-difference gradients up to full training reruns. Each check prints
// one PASS/FAIL line with its measured numbers and the process exits nonzero
// when any check fails. Tolerances are pinned here so the gate cannot drift
// apart from the implementation.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/gradient_suite.hpp"
#include "support/memory_oracle.hpp"
#include "support/segment_oracle.hpp"

#include "vo/checkpoint.hpp"
#include "vo/config.hpp"
#include "vo/data.hpp"
#include "vo/errors.hpp"
#include "vo/eval.hpp"
#include "vo/geometry.hpp"
#include "vo/loss.hpp"
#include "vo/model.hpp"
#include "vo/rng.hpp"
#include "vo/runner.hpp"
#include "vo/tensor.hpp"

using namespace vo;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string format(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Fresh per-check directory under the system temp root.
std::string work_dir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "vo_acceptance" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Pose random_pose(Rng& rng, double rot_span = 1.2) {
  Pose p;
  // pitch kept inside (-pi/2, pi/2) so Euler extraction is unique
  p.rotation = {rng.uniform(-rot_span, rot_span), rng.uniform(-1.2, 1.2),
                rng.uniform(-rot_span, rot_span)};
  p.translation = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
  return p;
}

double pose_gap(const Pose& a, const Pose& b) {
  return std::max(rotation_distance(a, b), translation_distance(a, b));
}

Tensor random_map(Rng& rng, Shape shape) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.normal();
  return Tensor::from_data(std::move(shape), std::move(v), false);
}

PosePrediction make_pred(double tx, double ty, double tz, double rx, double ry, double rz) {
  return {Tensor::from_data({6}, {tx, ty, tz, rx, ry, rz}, false)};
}

Trajectory straight_line(int frames, double meters_per_frame) {
  Trajectory traj;
  for (int i = 0; i < frames; ++i) {
    Pose p;
    p.translation = Eigen::Vector3d(0.0, 0.0, meters_per_frame * i);
    traj.poses.push_back(p);
  }
  return traj;
}

std::vector<Pose> smooth_relatives(Rng& rng, int pairs, double rot_sigma, double trans_sigma) {
  std::vector<Pose> rels;
  for (int i = 0; i < pairs; ++i) {
    Pose rel;
    rel.translation = Eigen::Vector3d(rng.normal(0.0, trans_sigma), rng.normal(0.0, trans_sigma),
                                      1.5 + rng.normal(0.0, trans_sigma));
    rel.rotation = Eigen::Vector3d(rng.normal(0.0, rot_sigma), rng.normal(0.0, rot_sigma),
                                   rng.normal(0.0, rot_sigma));
    rels.push_back(rel);
  }
  return rels;
}

// Toy benchmark: small enough for minutes-scale CPU training, hard enough to
// be discriminative. The per-sequence sensor bias puts an integration-drift
// floor under the tracking-only ablation so refinement quality is compared
// on realistic terms.
RunConfig toy_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.iterations = 2000;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.lr_halve_every = 60000;
  c.loss_k = 1.0;
  c.sequence_length = 11;
  c.buffer_capacity = 11;
  c.model.feature_channels = 8;
  c.model.feature_height = 8;
  c.model.feature_width = 8;
  c.model.hidden_channels = 8;
  c.model.encoder_layers = {{8, 1}};
  c.synthetic.seed = seed;
  c.synthetic.num_sequences = 200;
  c.synthetic.channels = 8;
  c.synthetic.height = 8;
  c.synthetic.width = 8;
  c.synthetic.noise_sigma = 0.05;
  c.synthetic.forward_step = 0.05;
  c.synthetic.translation_jitter = 0.05;
  c.synthetic.rotation_jitter = 0.02;
  c.synthetic.bias_sigma = 0.03;
  c.holdout = 20;
  return c;
}

// Seconds-scale run for the harness checks (sweep shape, bit-identical
// reruns), where only the plumbing is under test.
RunConfig micro_config() {
  RunConfig c;
  c.seed = 3;
  c.iterations = 12;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.lr_halve_every = 5;
  c.loss_k = 1.0;
  c.sequence_length = 6;
  c.buffer_capacity = 6;
  c.model.feature_channels = 4;
  c.model.feature_height = 4;
  c.model.feature_width = 4;
  c.model.hidden_channels = 4;
  c.model.encoder_layers = {{4, 1}};
  c.synthetic.seed = 11;
  c.synthetic.num_sequences = 10;
  c.synthetic.channels = 4;
  c.synthetic.height = 4;
  c.synthetic.width = 4;
  c.holdout = 3;
  return c;
}

// 1. Central finite differences across every tensor op plus the composed
//    3-frame full model (C=4, H=W=6, 2 memory slots), all parameters.
Outcome check_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ops = suite::tensor_op_reports(1234);
  const auto composites = suite::composite_reports(1234);
  const double secs = seconds_since(t0);
  const double worst = std::max(suite::max_rel(ops), suite::max_rel(composites));
  int checked = 0;
  for (const auto& r : ops) checked += r.checked;
  for (const auto& r : composites) checked += r.checked;
  Outcome out;
  out.ok = worst < 1e-4 && secs < 60.0;
  out.detail = format("max rel err %.2e over %d gradient entries in %.1f s (limits 1e-4, 60 s)",
                      worst, checked, secs);
  return out;
}

// 2. Memory admission on 50 seeded random walks of 30 steps each, thresholds
//    0.005 rad / 0.6 m, against the independent replay: exact index match.
Outcome check_memory_replay() {
  Rng rng(2025);
  int mismatched_walks = 0;
  int admissions = 0;
  for (int walk = 0; walk < 50; ++walk) {
    std::vector<Pose> anchors;
    Pose cur;
    for (int step = 0; step < 30; ++step) {
      Pose rel;
      rel.translation = {rng.normal(0.0, 0.3), rng.normal(0.0, 0.3), rng.normal(0.0, 0.3)};
      rel.rotation = {rng.normal(0.0, 0.004), rng.normal(0.0, 0.004), rng.normal(0.0, 0.004)};
      cur = compose(cur, rel);
      anchors.push_back(cur);
    }
    const int capacity = 4 + static_cast<int>(rng.integer(5));
    const auto expect = oracle::replay_memory_rule(anchors, capacity, 0.005, 0.6);

    MemoryBuffer buf(capacity);
    std::vector<int> got;
    for (int step = 0; step < 30; ++step) {
      if (buf.update(Tensor::full({1, 1, 1}, double(step)), anchors[step], step, 0.005, 0.6))
        got.push_back(step);
    }
    bool same = got == expect.stored_steps && buf.size() == expect.final_buffer_steps.size();
    for (size_t i = 0; same && i < buf.size(); ++i)
      same = buf.slots()[i].step_index == expect.final_buffer_steps[i];
    if (!same) ++mismatched_walks;
    admissions += static_cast<int>(expect.stored_steps.size());
  }
  Outcome out;
  out.ok = mismatched_walks == 0;
  out.detail = format("50 walks x 30 steps, %d admissions replayed, %d walks mismatched",
                      admissions, mismatched_walks);
  return out;
}

// 3. Attention invariants over 1000 randomized calls: alpha sums to 1 within
//    1e-9, single-slot alpha is exactly (1.0), the temporal read stays in the
//    pointwise convex hull of memory, and temporal_only refinement equals the
//    explicitly assembled temporal pipeline bit for bit.
Outcome check_attention_invariants() {
  Rng rng(77);
  int calls = 0;
  int single_calls = 0;
  double worst_dev = 0.0;
  bool single_exact = true;
  bool hull_ok = true;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(6));
    const int c = 2 + static_cast<int>(rng.integer(3));
    MemoryBuffer buf(8);
    for (int i = 0; i < n; ++i) buf.update(random_map(rng, {c, 3, 3}), Pose{}, i, 0.0, 0.0);
    const Tensor guidance =
        rng.uniform() < 0.1 ? Tensor::zeros({c, 3, 3}) : random_map(rng, {c, 3, 3});

    const AttentionResult temporal = temporal_attention(guidance, buf);
    const AttentionResult spatial = spatial_channel_attention(guidance, buf);
    calls += 2;
    for (const AttentionResult* r : {&temporal, &spatial}) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += r->alpha.at(i);
      worst_dev = std::max(worst_dev, std::abs(sum - 1.0));
      if (n == 1) {
        ++single_calls;
        single_exact = single_exact && r->alpha.numel() == 1 && r->alpha.at(0) == 1.0;
      }
    }
    for (int e = 0; e < temporal.fused.numel(); ++e) {
      double lo = 1e300, hi = -1e300;
      for (const auto& slot : buf.slots()) {
        lo = std::min(lo, slot.state.at(e));
        hi = std::max(hi, slot.state.at(e));
      }
      hull_ok = hull_ok && temporal.fused.at(e) >= lo - 1e-12 && temporal.fused.at(e) <= hi + 1e-12;
    }
  }

  bool bitwise = true;
  for (int trial = 0; trial < 50; ++trial) {
    VoModelConfig cfg;
    cfg.feature_channels = 5;
    cfg.feature_height = 4;
    cfg.feature_width = 4;
    cfg.hidden_channels = 3;
    cfg.encoder_layers = {{5, 2}};
    cfg.buffer_capacity = 6;
    cfg.sequence_length = 5;
    cfg.attention = AttentionMode::kTemporalOnly;
    VoModel model(cfg, 900 + trial);

    MemoryBuffer buf(4);
    const int n = 1 + static_cast<int>(rng.integer(4));
    for (int i = 0; i < n; ++i) buf.update(random_map(rng, {3, 4, 4}), Pose{}, i, 0.0, 0.0);
    const ConvLstmState state{random_map(rng, {3, 4, 4}), random_map(rng, {3, 4, 4})};
    const Tensor x = random_map(rng, {5, 4, 4});

    const RefineResult got = refine_step(model, x, state, buf);

    const AttentionResult att = temporal_attention(state.h, buf);
    Tensor fused = conv2d(concat_channels({att.fused, x}), model.fusion_a.kernel,
                          model.fusion_a.bias, 1, 1);
    fused = conv2d(leaky_relu(fused), model.fusion_b.kernel, model.fusion_b.bias, 1, 1);
    auto [output, next] = convlstm_step(model.refining, fused, state);
    const PosePrediction expect = se3_layer(model.se3_absolute, output);

    for (int i = 0; i < 6; ++i) bitwise = bitwise && got.absolute.vec6.at(i) == expect.vec6.at(i);
    for (int i = 0; i < got.output.numel(); ++i)
      bitwise = bitwise && got.output.at(i) == output.at(i);
    for (int i = 0; i < n; ++i) bitwise = bitwise && got.alpha.at(i) == att.alpha.at(i);
  }

  Outcome out;
  out.ok = worst_dev < 1e-9 && single_exact && hull_ok && bitwise;
  out.detail = format(
      "%d calls: max |sum(alpha)-1| %.1e, %d single-slot exact %s, hull %s, "
      "temporal_only bitwise over 50 models %s",
      calls, worst_dev, single_calls, single_exact ? "yes" : "NO", hull_ok ? "held" : "BROKEN",
      bitwise ? "equal" : "DIFFERENT");
  return out;
}

// 4. Pose algebra: group laws and both round trips (matrix conversion,
//    integrate/extract) to 1e-9 over ten thousand random poses, plus
//    similarity recovery across scales 0.5..3.
Outcome check_pose_algebra() {
  Rng rng(31);
  const Pose id;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    worst = std::max(worst, pose_gap(pose_from_matrix(pose_to_matrix(a)), a));
    worst = std::max(worst, pose_gap(compose(a, id), a));
    worst = std::max(worst, pose_gap(compose(id, b), b));
    worst = std::max(worst, pose_gap(compose(a, inverse(a)), id));
    worst = std::max(worst, pose_gap(compose(inverse(a), a), id));
    worst = std::max(worst,
                     pose_gap(compose(compose(a, b), c), compose(a, compose(b, c))));
  }
  for (int chain = 0; chain < 100; ++chain) {
    std::vector<Pose> rels;
    for (int i = 0; i < 100; ++i) {
      Pose r = random_pose(rng, 0.4);
      r.translation *= 0.1;
      rels.push_back(r);
    }
    const Pose origin = random_pose(rng);
    const Trajectory traj = integrate_relative(rels, origin);
    const std::vector<Pose> back = relative_from_absolute(traj);
    for (size_t i = 0; i < rels.size(); ++i) worst = std::max(worst, pose_gap(back[i], rels[i]));
    const Trajectory again = integrate_relative(back, origin);
    for (size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst, pose_gap(again.poses[i], traj.poses[i]));
  }

  double worst_align = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const double s_true = trial == 0 ? 0.5 : trial == 1 ? 3.0 : rng.uniform(0.5, 3.0);
    const Eigen::Matrix3d r_true =
        pose_to_matrix(random_pose(rng, 1.0)).block<3, 3>(0, 0);
    const Eigen::Vector3d t_true(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    Trajectory ref;
    for (int i = 0; i < 60; ++i) ref.poses.push_back(random_pose(rng, 0.3));
    // est maps onto ref under (s_true, r_true, t_true): build est by inverting
    Trajectory est;
    for (const Pose& p : ref.poses) {
      Pose q = p;
      q.translation = (1.0 / s_true) * (r_true.transpose() * (p.translation - t_true));
      est.poses.push_back(q);
    }
    const Alignment a = umeyama_align(est, ref, true);
    worst_align = std::max(worst_align, std::abs(a.scale - s_true));
    worst_align = std::max(worst_align, (a.rotation - r_true).cwiseAbs().maxCoeff());
    worst_align = std::max(worst_align, (a.translation - t_true).cwiseAbs().maxCoeff());
    for (size_t i = 0; i < ref.size(); ++i)
      worst_align = std::max(
          worst_align, (a.aligned.poses[i].translation - ref.poses[i].translation).norm());
  }

  Outcome out;
  out.ok = worst < 1e-9 && worst_align < 1e-9;
  out.detail = format("worst group/round-trip gap %.1e, worst similarity-recovery err %.1e "
                      "(limit 1e-9)",
                      worst, worst_align);
  return out;
}

// 5. Segment metrics: constant scale error reads back as its percentage,
//    constant yaw-rate error converts to deg/100m, and the production
//    implementation matches the brute-force oracle on a 500-pose trajectory.
Outcome check_metric_oracles() {
  const Trajectory ref = straight_line(901, 1.0);

  Trajectory scaled = ref;
  for (Pose& p : scaled.poses) p.translation *= 1.01;
  const SegmentErrors scale_err = kitti_segment_errors(scaled, ref);
  double worst_scale = std::abs(scale_err.t_rel - 1.0);
  for (const LengthBucket& b : scale_err.breakdown)
    worst_scale = std::max(worst_scale, std::abs(b.t_percent - 1.0));
  const bool scale_ok = scale_err.valid && scale_err.breakdown.size() == 8 && worst_scale < 1e-6;

  Trajectory yawed = ref;
  for (size_t i = 0; i < yawed.poses.size(); ++i)
    yawed.poses[i].rotation = Eigen::Vector3d(0.0, 0.0, 0.001 * static_cast<double>(i));
  const SegmentErrors yaw_err = kitti_segment_errors(yawed, ref);
  const double expected_r = 0.001 * (180.0 / kPi) * 100.0;  // 5.7296 deg/100m
  double worst_yaw = std::abs(yaw_err.r_rel - expected_r);
  for (const LengthBucket& b : yaw_err.breakdown)
    worst_yaw = std::max(worst_yaw, std::abs(b.r_deg_per_100m - expected_r));
  const bool yaw_ok = yaw_err.valid && worst_yaw < 1e-3;

  Rng rng(41);
  const std::vector<Pose> ref_rels = smooth_relatives(rng, 499, 0.01, 0.2);
  std::vector<Pose> est_rels = ref_rels;
  for (Pose& rel : est_rels) {
    rel.translation += Eigen::Vector3d(rng.normal(0.0, 0.02), rng.normal(0.0, 0.02),
                                       rng.normal(0.0, 0.02));
    rel.rotation += Eigen::Vector3d(rng.normal(0.0, 0.004), rng.normal(0.0, 0.004),
                                    rng.normal(0.0, 0.004));
  }
  const Trajectory long_ref = integrate_relative(ref_rels);
  const Trajectory long_est = integrate_relative(est_rels);
  const std::vector<double> lengths = default_segment_lengths();
  const SegmentErrors fast = kitti_segment_errors(long_est, long_ref, lengths, 10);
  const oracle::SegmentResult slow = oracle::segment_errors(long_est, long_ref, lengths, 10);
  double worst_diff = std::max(std::abs(fast.t_rel - slow.t_rel),
                               std::abs(fast.r_rel - slow.r_rel));
  bool oracle_ok = fast.valid && long_ref.size() == 500 && fast.segments == slow.segments &&
                   fast.breakdown.size() == slow.breakdown.size();
  for (size_t i = 0; oracle_ok && i < fast.breakdown.size(); ++i) {
    oracle_ok = fast.breakdown[i].segments == slow.breakdown[i].segments;
    worst_diff = std::max(worst_diff, std::abs(fast.breakdown[i].t_percent -
                                               slow.breakdown[i].t_percent));
    worst_diff = std::max(worst_diff, std::abs(fast.breakdown[i].r_deg_per_100m -
                                               slow.breakdown[i].r_deg));
  }
  oracle_ok = oracle_ok && worst_diff < 1e-9;

  Outcome out;
  out.ok = scale_ok && yaw_ok && oracle_ok;
  out.detail = format("t_rel %.6f%% (target 1 +/- 1e-6), r_rel %.4f deg/100m (target %.4f "
                      "+/- 1e-3), oracle max diff %.1e over %d segments",
                      scale_err.t_rel, yaw_err.r_rel, expected_r, worst_diff, fast.segments);
  return out;
}

// 6. Loss analytics: the 5.0 / 1.0 / 1.5 hand-computed cases to 1e-12, and
//    exact total = local + global recomposition on random inputs.
Outcome check_loss_analytics() {
  const std::vector<Pose> one_gt = {Pose{}};
  double worst_hand = 0.0;
  for (double k : {1.0, 100.0, 7.5}) {
    worst_hand = std::max(
        worst_hand, std::abs(local_loss({make_pred(3, 4, 0, 0, 0, 0)}, one_gt, k).scalar() - 5.0));
    worst_hand = std::max(
        worst_hand,
        std::abs(global_loss({make_pred(3, 4, 0, 0, 0, 0)}, one_gt, k).scalar() - 5.0));
  }
  worst_hand = std::max(
      worst_hand,
      std::abs(local_loss({make_pred(0, 0, 0, 0.006, 0, 0.008)}, one_gt, 100.0).scalar() - 1.0));
  const std::vector<Pose> two_gt = {Pose{}, Pose{}};
  worst_hand = std::max(
      worst_hand,
      std::abs(global_loss({make_pred(1, 0, 0, 0, 0, 0), make_pred(0, 1, 0, 0, 0, 0)}, two_gt,
                           100.0)
                   .scalar() -
               1.5));

  Rng rng(53);
  bool exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(5));
    std::vector<PosePrediction> pred;
    std::vector<Pose> gt;
    for (int i = 0; i < n; ++i) {
      pred.push_back(make_pred(rng.normal(), rng.normal(), rng.normal(), rng.normal(),
                               rng.normal(), rng.normal()));
      Pose g;
      g.translation = {rng.normal(), rng.normal(), rng.normal()};
      g.rotation = {rng.normal(), rng.normal(), rng.normal()};
      gt.push_back(g);
    }
    const double k = rng.uniform(0.1, 100.0);
    const Tensor local = local_loss(pred, gt, k);
    const Tensor global = global_loss(pred, gt, k);
    exact = exact && total_loss(local, global).scalar() == local.scalar() + global.scalar();
  }

  Outcome out;
  out.ok = worst_hand < 1e-12 && exact;
  out.detail = format("hand cases 5.0/1.0/1.5 worst err %.1e (limit 1e-12); "
                      "total == local + global exact on 200 random sets: %s",
                      worst_hand, exact ? "yes" : "NO");
  return out;
}

// 7. Toy training run (seed 7, 200 sequences of 11 frames plus 20 held out,
//    2000 iterations, batch 4, lr 1e-3): validation total must at least
//    halve, sim3-aligned held-out ATE must improve by at least 50% over the
//    untrained model, wall time under 10 minutes.
Outcome check_toy_training() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = toy_config(7);
  RunConfig resolved = cfg;
  resolved.finalize();

  VoModel untrained(resolved.model, resolved.seed);
  const Dataset ds = build_dataset(resolved);
  const double ate_before = mean_holdout_ate(untrained, ds.holdout);

  const TrainResult tr = run_train(cfg, work_dir("toy_training"));
  VoModel trained(resolved.model, resolved.seed);
  load_checkpoint(trained.parameters(), tr.checkpoint_path);
  const double ate_after = mean_holdout_ate(trained, ds.holdout);
  const double secs = seconds_since(t0);

  const double val_ratio = tr.final_val_total / tr.initial_val_total;
  const double improvement = 100.0 * (1.0 - ate_after / ate_before);
  Outcome out;
  out.ok = ds.holdout.size() == 20 && val_ratio < 0.5 && ate_after <= 0.5 * ate_before &&
           secs < 600.0;
  out.detail = format("val %.4f -> %.4f (ratio %.3f, limit 0.5); holdout ATE %.4f -> %.4f "
                      "(improved %.1f%%, need >= 50); %.0f s (limit 600)",
                      tr.initial_val_total, tr.final_val_total, val_ratio, ate_before, ate_after,
                      improvement, secs);
  return out;
}

// 8. Ablation non-degradation on the toy benchmark across 3 seeds: the full
//    model's mean held-out ATE stays within 1.1x the tracking-only mean.
Outcome check_ablation_ordering() {
  double sum_full = 0.0;
  double sum_none = 0.0;
  for (std::uint64_t seed : {101, 202, 303}) {
    for (AttentionMode mode : {AttentionMode::kFull, AttentionMode::kNone}) {
      RunConfig cfg = toy_config(seed);
      cfg.ablation = mode;
      RunConfig resolved = cfg;
      resolved.finalize();
      const TrainResult tr =
          run_train(cfg, work_dir("ablation_" + std::to_string(seed) + "_" + to_string(mode)));
      VoModel model(resolved.model, resolved.seed);
      load_checkpoint(model.parameters(), tr.checkpoint_path);
      const Dataset ds = build_dataset(resolved);
      (mode == AttentionMode::kFull ? sum_full : sum_none) +=
          mean_holdout_ate(model, ds.holdout);
    }
  }
  const double mean_full = sum_full / 3.0;
  const double mean_none = sum_none / 3.0;
  Outcome out;
  out.ok = mean_full <= 1.1 * mean_none;
  out.detail = format("3 seeds: mean holdout ATE full %.4f vs tracking-only %.4f, "
                      "ratio %.3f (limit 1.1)",
                      mean_full, mean_none, mean_full / mean_none);
  return out;
}

// 9. Sequence-length sweep completes over {5, 7, 9, 11} and emits a 4-row
//    table.
Outcome check_sweep_harness() {
  const std::string dir = work_dir("sweep");
  const std::vector<SweepRow> rows = run_sweep(micro_config(), "sequence_length", dir);
  const char* want[] = {"5 frames", "7 frames", "9 frames", "11 frames"};
  bool ok = rows.size() == 4;
  for (size_t i = 0; ok && i < 4; ++i) ok = rows[i].axis_value == want[i];

  const std::string table = slurp(dir + "/sweep_sequence_length.txt");
  int lines = 0;
  for (char ch : table) lines += ch == '\n';
  ok = ok && lines == 6;  // axis line + header + 4 data rows

  Outcome out;
  out.ok = ok;
  out.detail = format("%zu rows (%s .. %s), table has %d lines", rows.size(),
                      rows.empty() ? "-" : rows.front().axis_value.c_str(),
                      rows.empty() ? "-" : rows.back().axis_value.c_str(), lines);
  return out;
}

// 10. Rerunning from the resolved-config snapshot reproduces every artifact
//     byte for byte, and inference is itself deterministic.
Outcome check_reproducibility() {
  RunConfig cfg = micro_config();
  cfg.checkpoint_every = 5;
  const std::string dir_a = work_dir("repro_a");
  const std::string dir_b = work_dir("repro_b");
  const TrainResult a = run_train(cfg, dir_a);
  const RunConfig snapshot = load_run_config(a.config_path);
  run_train(snapshot, dir_b);

  int files = 0;
  bool same = true;
  for (const char* name : {"config.json", "train_log.jsonl", "checkpoint_000005.json",
                           "checkpoint_000010.json", "checkpoint_final.json"}) {
    const std::string lhs = slurp(dir_a + "/" + name);
    same = same && !lhs.empty() && lhs == slurp(dir_b + "/" + name);
    ++files;
  }

  const InferFiles f1 =
      run_infer(a.checkpoint_path, a.config_path, "synthetic", "", work_dir("repro_i1"));
  const InferFiles f2 =
      run_infer(a.checkpoint_path, a.config_path, "synthetic", "", work_dir("repro_i2"));
  same = same && f1.kitti_files.size() == f2.kitti_files.size() &&
         f1.tum_files.size() == f2.tum_files.size();
  for (size_t i = 0; same && i < f1.kitti_files.size(); ++i) {
    same = slurp(f1.kitti_files[i]) == slurp(f2.kitti_files[i]);
    ++files;
  }
  for (size_t i = 0; same && i < f1.tum_files.size(); ++i) {
    same = slurp(f1.tum_files[i]) == slurp(f2.tum_files[i]);
    ++files;
  }
  same = same && slurp(f1.diagnostics_file) == slurp(f2.diagnostics_file);
  ++files;

  Outcome out;
  out.ok = same;
  out.detail = format("%d artifact pairs compared across train/infer reruns: %s", files,
                      same ? "byte-identical" : "DIFFER");
  return out;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {"gradient suite", check_gradient_suite},
      {"memory selection replay", check_memory_replay},
      {"attention invariants", check_attention_invariants},
      {"pose algebra and alignment", check_pose_algebra},
      {"segment metric oracles", check_metric_oracles},
      {"loss analytics", check_loss_analytics},
      {"toy training", check_toy_training},
      {"ablation non-degradation", check_ablation_ordering},
      {"sequence-length sweep", check_sweep_harness},
      {"bit-identical reruns", check_reproducibility},
  };
  int failures = 0;
  for (size_t i = 0; i < std::size(entries); ++i) {
    Outcome out;
    try {
      out = entries[i].fn();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %zu (%s): %s\n", out.ok ? "PASS" : "FAIL", i + 1,
                entries[i].name, out.detail.c_str());
    std::fflush(stdout);
    if (!out.ok) ++failures;
  }
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
