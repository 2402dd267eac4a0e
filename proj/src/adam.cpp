#include "vo/adam.hpp"

#include <cmath>
#include <utility>

#include "vo/errors.hpp"

namespace vo {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (params_.empty()) throw ContractError("AdamOptimizer: no parameters");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.defined()) throw ContractError("AdamOptimizer: undefined parameter");
    if (!p.requires_grad()) throw ContractError("AdamOptimizer: parameter does not require grad");
    m_.emplace_back(p.values().size(), 0.0);
    v_.emplace_back(p.values().size(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++steps_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    auto& data = p.mutable_values();
    const bool have_grad = p.has_grad();
    const std::vector<double>* g = have_grad ? &p.grad() : nullptr;
    auto& m = m_[k];
    auto& v = v_[k];
    for (size_t i = 0; i < data.size(); ++i) {
      double update = 0.0;
      if (have_grad) {
        const double gi = (*g)[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        update = mhat / (std::sqrt(vhat) + config_.epsilon);
      }
      data[i] -= lr * (update + config_.weight_decay * data[i]);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace vo
