#pragma once

#include <cstdint>
#include <vector>

#include "vo/tensor.hpp"

namespace vo {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double weight_decay = 4e-4;  // decoupled: applied to the parameter, not the gradient
};

// Adam with decoupled weight decay over a fixed parameter list.
// Parameters without a populated gradient are skipped for the moment update
// but still receive weight decay.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();

  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  double learning_rate() const { return config_.learning_rate; }
  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::int64_t steps_ = 0;
};

}  // namespace vo
