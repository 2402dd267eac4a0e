#pragma once

#include <vector>

#include "vo/geometry.hpp"
#include "vo/model.hpp"
#include "vo/tensor.hpp"

namespace vo {

// Balance factor between rotational and translational error terms.
struct LossWeights {
  double k = 100.0;
};

// Value-level pose as a constant [6] tensor (translation, then rotation).
Tensor pose_to_vec6(const Pose& p);

// Mean over steps of ||t_err||_2 + k * ||wrapped r_err||_2. Differentiable
// through the predictions; rotation differences wrapped per axis to the
// shortest signed angle.
Tensor local_loss(const std::vector<PosePrediction>& pred_rel,
                  const std::vector<Pose>& gt_rel, double k);

// Sum over steps of (1/i) * (||t_err||_2 + k * ||wrapped r_err||_2) with i
// counting from 1; the origin pose is not part of the lists.
Tensor global_loss(const std::vector<PosePrediction>& pred_abs,
                   const std::vector<Pose>& gt_abs, double k);

Tensor total_loss(const Tensor& local, const Tensor& global);

}  // namespace vo
