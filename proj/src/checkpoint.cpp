#include "vo/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "vo/errors.hpp"

namespace vo {

void ParameterMap::add(const std::string& path, Tensor tensor) {
  if (!tensor.defined()) throw ContractError("ParameterMap: undefined tensor for " + path);
  if (contains(path)) throw ContractError("ParameterMap: duplicate path " + path);
  paths_.push_back(path);
  tensors_.push_back(std::move(tensor));
}

bool ParameterMap::contains(const std::string& path) const {
  for (const auto& p : paths_)
    if (p == path) return true;
  return false;
}

const Tensor& ParameterMap::get(const std::string& path) const {
  for (size_t i = 0; i < paths_.size(); ++i)
    if (paths_[i] == path) return tensors_[i];
  throw ContractError("ParameterMap: unknown path " + path);
}

std::vector<Tensor> ParameterMap::tensors() const { return tensors_; }

void save_checkpoint(const ParameterMap& params, const std::string& path) {
  nlohmann::json root = nlohmann::json::object();
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.get(params.paths()[i]);
    nlohmann::json entry;
    entry["shape"] = t.shape();
    entry["data"] = t.values();
    root[params.paths()[i]] = std::move(entry);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out << root.dump(2) << "\n";
  if (!out) throw Error("failed writing checkpoint: " + path);
}

void load_checkpoint(ParameterMap& params, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid checkpoint JSON in " + path + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError("checkpoint root must be an object: " + path);
  for (const auto& name : params.paths()) {
    auto it = root.find(name);
    if (it == root.end()) throw ParseError("checkpoint missing parameter " + name);
    const auto& entry = *it;
    if (!entry.contains("shape") || !entry.contains("data"))
      throw ParseError("checkpoint entry " + name + " missing shape or data");
    Shape shape = entry["shape"].get<Shape>();
    Tensor t = params.get(name);  // shallow handle, writes reach the stored node
    if (shape != t.shape())
      throw ShapeError("checkpoint shape " + shape_str(shape) + " for " + name +
                       " does not match model shape " + shape_str(t.shape()));
    std::vector<double> data = entry["data"].get<std::vector<double>>();
    if (data.size() != t.values().size())
      throw ShapeError("checkpoint data length mismatch for " + name);
    t.mutable_values() = std::move(data);
  }
}

}  // namespace vo
