#include "vo/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "json.hpp"

#include "vo/errors.hpp"

namespace vo {

namespace {

void check_unit_interval(double value, const char* name) {
  if (!(value > 0.0) || !(value < 1.0)) {
    throw ConfigError(std::string(name) + " must lie in (0, 1)");
  }
}

int cumulative_stride(const VoModelConfig& model) {
  int stride = 1;
  for (const EncoderLayerSpec& layer : model.encoder_layers) stride *= layer.stride;
  return stride;
}

}  // namespace

void RunConfig::finalize() {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  check_unit_interval(beta1, "beta1");
  check_unit_interval(beta2, "beta2");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (lr_halve_every < 1) throw ConfigError("lr_halve_every must be >= 1");
  if (!(loss_k > 0.0)) throw ConfigError("loss_k must be positive");
  if (sequence_length < 2) throw ConfigError("sequence_length must be >= 2");
  if (holdout < 0) throw ConfigError("holdout must be >= 0");
  if (snippet_stride < 0) throw ConfigError("snippet_stride must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (source != "synthetic" && source != "manifest") {
    throw ConfigError("source must be synthetic or manifest");
  }
  if (source == "manifest" && manifest_path.empty()) {
    throw ConfigError("manifest source requires manifest_path");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");

  model.attention = ablation;
  model.sequence_length = sequence_length;
  model.theta_rot = theta_rot;
  model.theta_trans = theta_trans;
  model.buffer_capacity = buffer_capacity;
  synthetic.sequence_length = sequence_length;
  if (source == "synthetic") {
    model.input_channels = synthetic.channels;
    synthetic.validate();
    const int stride = cumulative_stride(model);
    if (synthetic.height != model.feature_height * stride ||
        synthetic.width != model.feature_width * stride) {
      throw ConfigError("synthetic feature size must equal model feature size times the "
                        "encoder stride");
    }
  }
  model.validate();
}

namespace {

template <typename T>
T field(const nlohmann::json& doc, const char* name, T fallback) {
  if (!doc.contains(name)) return fallback;
  try {
    return doc.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config field '") + name + "': " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig config;
  config.seed = field<std::uint64_t>(doc, "seed", config.seed);
  config.iterations = field<int>(doc, "iterations", config.iterations);
  config.batch_size = field<int>(doc, "batch_size", config.batch_size);
  config.learning_rate = field<double>(doc, "learning_rate", config.learning_rate);
  config.beta1 = field<double>(doc, "beta1", config.beta1);
  config.beta2 = field<double>(doc, "beta2", config.beta2);
  config.weight_decay = field<double>(doc, "weight_decay", config.weight_decay);
  config.lr_halve_every = field<int>(doc, "lr_halve_every", config.lr_halve_every);
  config.loss_k = field<double>(doc, "loss_k", config.loss_k);
  config.sequence_length = field<int>(doc, "sequence_length", config.sequence_length);
  config.ablation = attention_mode_from_string(
      field<std::string>(doc, "ablation", to_string(config.ablation)));
  config.theta_rot = field<double>(doc, "theta_rot", config.theta_rot);
  config.theta_trans = field<double>(doc, "theta_trans", config.theta_trans);
  config.buffer_capacity = field<int>(doc, "buffer_capacity", config.buffer_capacity);
  config.output_dir = field<std::string>(doc, "output_dir", config.output_dir);
  config.checkpoint_every = field<int>(doc, "checkpoint_every", config.checkpoint_every);

  if (doc.contains("model")) {
    const nlohmann::json& m = doc.at("model");
    if (!m.is_object()) throw ConfigError("model must be a JSON object");
    config.model.input_channels = field<int>(m, "input_channels", config.model.input_channels);
    config.model.feature_channels =
        field<int>(m, "feature_channels", config.model.feature_channels);
    config.model.feature_height = field<int>(m, "feature_height", config.model.feature_height);
    config.model.feature_width = field<int>(m, "feature_width", config.model.feature_width);
    config.model.hidden_channels =
        field<int>(m, "hidden_channels", config.model.hidden_channels);
    if (m.contains("encoder_layers")) {
      config.model.encoder_layers.clear();
      for (const nlohmann::json& layer : m.at("encoder_layers")) {
        if (!layer.is_array() || layer.size() != 2) {
          throw ConfigError("encoder_layers entries must be [out_channels, stride] pairs");
        }
        config.model.encoder_layers.push_back(
            EncoderLayerSpec{layer.at(0).get<int>(), layer.at(1).get<int>()});
      }
    }
  }

  if (doc.contains("data")) {
    const nlohmann::json& d = doc.at("data");
    if (!d.is_object()) throw ConfigError("data must be a JSON object");
    config.source = field<std::string>(d, "source", config.source);
    config.manifest_path = field<std::string>(d, "manifest", config.manifest_path);
    config.holdout = field<int>(d, "holdout", config.holdout);
    config.snippet_stride = field<int>(d, "snippet_stride", config.snippet_stride);
    if (d.contains("synthetic")) {
      const nlohmann::json& s = d.at("synthetic");
      SyntheticSpec& spec = config.synthetic;
      spec.seed = field<std::uint64_t>(s, "seed", spec.seed);
      spec.num_sequences = field<int>(s, "num_sequences", spec.num_sequences);
      spec.smoothness = field<double>(s, "smoothness", spec.smoothness);
      spec.noise_sigma = field<double>(s, "noise_sigma", spec.noise_sigma);
      spec.bias_sigma = field<double>(s, "bias_sigma", spec.bias_sigma);
      spec.channels = field<int>(s, "channels", spec.channels);
      spec.height = field<int>(s, "height", spec.height);
      spec.width = field<int>(s, "width", spec.width);
      spec.forward_step = field<double>(s, "forward_step", spec.forward_step);
      spec.translation_jitter = field<double>(s, "translation_jitter", spec.translation_jitter);
      spec.rotation_jitter = field<double>(s, "rotation_jitter", spec.rotation_jitter);
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

std::string run_config_to_json(const RunConfig& config) {
  nlohmann::json doc;
  doc["seed"] = config.seed;
  doc["iterations"] = config.iterations;
  doc["batch_size"] = config.batch_size;
  doc["learning_rate"] = config.learning_rate;
  doc["beta1"] = config.beta1;
  doc["beta2"] = config.beta2;
  doc["weight_decay"] = config.weight_decay;
  doc["lr_halve_every"] = config.lr_halve_every;
  doc["loss_k"] = config.loss_k;
  doc["sequence_length"] = config.sequence_length;
  doc["ablation"] = to_string(config.ablation);
  doc["theta_rot"] = config.theta_rot;
  doc["theta_trans"] = config.theta_trans;
  doc["buffer_capacity"] = config.buffer_capacity;
  doc["output_dir"] = config.output_dir;
  doc["checkpoint_every"] = config.checkpoint_every;

  nlohmann::json model;
  model["input_channels"] = config.model.input_channels;
  model["feature_channels"] = config.model.feature_channels;
  model["feature_height"] = config.model.feature_height;
  model["feature_width"] = config.model.feature_width;
  model["hidden_channels"] = config.model.hidden_channels;
  nlohmann::json layers = nlohmann::json::array();
  for (const EncoderLayerSpec& layer : config.model.encoder_layers) {
    layers.push_back({layer.out_channels, layer.stride});
  }
  model["encoder_layers"] = layers;
  doc["model"] = model;

  nlohmann::json data;
  data["source"] = config.source;
  data["manifest"] = config.manifest_path;
  data["holdout"] = config.holdout;
  data["snippet_stride"] = config.snippet_stride;
  nlohmann::json synth;
  synth["seed"] = config.synthetic.seed;
  synth["num_sequences"] = config.synthetic.num_sequences;
  synth["smoothness"] = config.synthetic.smoothness;
  synth["noise_sigma"] = config.synthetic.noise_sigma;
  synth["bias_sigma"] = config.synthetic.bias_sigma;
  synth["channels"] = config.synthetic.channels;
  synth["height"] = config.synthetic.height;
  synth["width"] = config.synthetic.width;
  synth["forward_step"] = config.synthetic.forward_step;
  synth["translation_jitter"] = config.synthetic.translation_jitter;
  synth["rotation_jitter"] = config.synthetic.rotation_jitter;
  data["synthetic"] = synth;
  doc["data"] = data;

  return doc.dump(2);
}

std::string resolve_output_dir(const RunConfig& config) {
  std::filesystem::path dir(config.output_dir);
  if (dir.is_absolute()) return dir.string();
  const char* root = std::getenv("VO_OUTPUT_ROOT");
  if (root != nullptr && root[0] != '\0') {
    return (std::filesystem::path(root) / dir).string();
  }
  return dir.string();
}

}  // namespace vo
