#pragma once

#include <string>
#include <vector>

#include "vo/geometry.hpp"

namespace vo {

enum class AlignMode { kNone, kSe3, kSim3 };

AlignMode align_mode_from_string(const std::string& name);
std::string to_string(AlignMode mode);

struct LengthBucket {
  double length = 0.0;           // segment length (m)
  double t_percent = 0.0;        // mean translational drift over the bucket (%)
  double r_deg_per_100m = 0.0;   // mean rotational drift over the bucket (deg/100m)
  int segments = 0;
};

// Segment-drift summary. `valid` is false when no segment of any requested
// length fits inside the trajectory (short input is flagged, not an error).
struct SegmentErrors {
  double t_rel = 0.0;   // percent, mean over all segments of all lengths
  double r_rel = 0.0;   // degrees per 100 m, same pooling
  int segments = 0;
  bool valid = false;
  std::vector<LengthBucket> breakdown;
};

std::vector<double> default_segment_lengths();  // {100, 200, ..., 800} m

// Drift over path segments: starts sampled every `step` frames, each segment
// ending at the first frame whose cumulative reference path distance reaches
// start + length. Error pose E = inverse(rel_est) * rel_ref; translational
// drift is |t(E)| / length, rotational drift the rotation angle of E per
// meter. Trajectories must be equally long (>= 2 poses) and metrically
// scaled.
SegmentErrors kitti_segment_errors(const Trajectory& estimate, const Trajectory& reference,
                                   const std::vector<double>& lengths = default_segment_lengths(),
                                   int step = 10);

// RMSE of position residuals after optional least-squares alignment (kSe3
// rigid, kSim3 similarity with scale recovery). Alignment needs >= 3 poses
// and a non-degenerate point spread (AlignmentError otherwise).
double ate_rmse(const Trajectory& estimate, const Trajectory& reference, AlignMode align);

// Drift per second: each frame pairs with the first frame at least `delta`
// seconds later; the relative-pose error translation over that window is
// divided by delta, then root-mean-squared. Throws ContractError when the
// span is shorter than delta.
double rpe_per_second(const Trajectory& estimate, const Trajectory& reference,
                      const std::vector<double>& timestamps, double delta = 1.0);

struct MetricReport {
  SegmentErrors segments;
  double ate = 0.0;
  AlignMode ate_align = AlignMode::kSim3;
  double rpe = 0.0;       // meters per second
  bool has_rpe = false;   // set when timestamps exist and span >= delta
};

MetricReport compute_metrics(const Trajectory& estimate, const Trajectory& reference,
                             AlignMode ate_align = AlignMode::kSim3, double rpe_delta = 1.0);

std::string report_to_json(const MetricReport& report);
std::string report_to_table(const MetricReport& report);

}  // namespace vo
