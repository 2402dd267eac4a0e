#pragma once

#include <string>
#include <vector>

#include "vo/tensor.hpp"

namespace vo {

// Named, ordered collection of trainable tensors. Paths are unique; insertion
// order is preserved so optimizer state lines up across runs.
class ParameterMap {
 public:
  void add(const std::string& path, Tensor tensor);
  bool contains(const std::string& path) const;
  const Tensor& get(const std::string& path) const;

  const std::vector<std::string>& paths() const { return paths_; }
  std::vector<Tensor> tensors() const;
  size_t size() const { return paths_.size(); }

 private:
  std::vector<std::string> paths_;
  std::vector<Tensor> tensors_;
};

// JSON checkpoint of parameter values. Loading writes into the map's existing
// tensors in place (shapes must match) so graph handles stay valid.
void save_checkpoint(const ParameterMap& params, const std::string& path);
void load_checkpoint(ParameterMap& params, const std::string& path);

}  // namespace vo
