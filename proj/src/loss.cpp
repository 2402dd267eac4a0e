#include "vo/loss.hpp"

#include "vo/errors.hpp"

namespace vo {

namespace {

Tensor pose_term(const PosePrediction& pred, const Pose& gt, double k) {
  Tensor diff = pred.vec6 - pose_to_vec6(gt);
  Tensor t_err = l2_norm(slice_vec(diff, 0, 3));
  Tensor r_err = l2_norm(wrap_angles(slice_vec(diff, 3, 3)));
  return t_err + scale_const(r_err, k);
}

void check_inputs(size_t pred, size_t gt, double k, const char* what) {
  if (pred == 0) throw ContractError(std::string(what) + ": empty prediction list");
  if (pred != gt)
    throw ContractError(std::string(what) + ": " + std::to_string(pred) + " predictions vs " +
                        std::to_string(gt) + " ground-truth poses");
  if (!(k > 0.0)) throw ContractError(std::string(what) + ": k must be > 0");
}

}  // namespace

Tensor pose_to_vec6(const Pose& p) {
  return Tensor::from_data({6}, {p.translation.x(), p.translation.y(), p.translation.z(),
                                 p.rotation.x(), p.rotation.y(), p.rotation.z()});
}

Tensor local_loss(const std::vector<PosePrediction>& pred_rel,
                  const std::vector<Pose>& gt_rel, double k) {
  check_inputs(pred_rel.size(), gt_rel.size(), k, "local_loss");
  Tensor acc;
  for (size_t i = 0; i < pred_rel.size(); ++i) {
    Tensor term = pose_term(pred_rel[i], gt_rel[i], k);
    acc = acc.defined() ? acc + term : term;
  }
  return scale_const(acc, 1.0 / static_cast<double>(pred_rel.size()));
}

Tensor global_loss(const std::vector<PosePrediction>& pred_abs,
                   const std::vector<Pose>& gt_abs, double k) {
  check_inputs(pred_abs.size(), gt_abs.size(), k, "global_loss");
  Tensor acc;
  for (size_t i = 0; i < pred_abs.size(); ++i) {
    Tensor term = scale_const(pose_term(pred_abs[i], gt_abs[i], k),
                              1.0 / static_cast<double>(i + 1));
    acc = acc.defined() ? acc + term : term;
  }
  return acc;
}

Tensor total_loss(const Tensor& local, const Tensor& global) {
  if (local.numel() != 1 || global.numel() != 1)
    throw ContractError("total_loss: inputs must be scalars");
  return local + global;
}

}  // namespace vo
