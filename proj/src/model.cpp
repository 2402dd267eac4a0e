#include "vo/model.hpp"

#include <cmath>
#include <utility>

#include "vo/errors.hpp"
#include "vo/rng.hpp"

namespace vo {

AttentionMode attention_mode_from_string(const std::string& name) {
  if (name == "full") return AttentionMode::kFull;
  if (name == "temporal_only") return AttentionMode::kTemporalOnly;
  if (name == "none") return AttentionMode::kNone;
  throw ConfigError("unknown attention mode: " + name);
}

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kFull: return "full";
    case AttentionMode::kTemporalOnly: return "temporal_only";
    case AttentionMode::kNone: return "none";
  }
  throw ConfigError("invalid attention mode value");
}

void VoModelConfig::validate() const {
  if (feature_channels < 1 || feature_height < 1 || feature_width < 1)
    throw ConfigError("feature dimensions must be >= 1");
  if (hidden_channels < 1) throw ConfigError("hidden_channels must be >= 1");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (theta_rot < 0.0 || theta_trans < 0.0) throw ConfigError("thresholds must be >= 0");
  if (sequence_length < 2) throw ConfigError("sequence_length must be >= 2");
  if (encoder_layers.empty()) throw ConfigError("encoder needs at least one layer");
  for (const auto& l : encoder_layers) {
    if (l.out_channels < 1) throw ConfigError("encoder layer width must be >= 1");
    if (l.stride < 1) throw ConfigError("encoder layer stride must be >= 1");
  }
  if (encoder_layers.back().out_channels != feature_channels)
    throw ConfigError("last encoder layer must produce feature_channels outputs");
  if (attention == AttentionMode::kFull && feature_channels != hidden_channels)
    throw ConfigError(
        "full attention reweights observations channel-by-channel against the "
        "guidance, which requires feature_channels == hidden_channels");
}

// ---- memory buffer ----------------------------------------------------------

MemoryBuffer::MemoryBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ContractError("MemoryBuffer capacity must be >= 1");
}

bool MemoryBuffer::update(const Tensor& state, const Pose& anchor, int step,
                          double theta_rot, double theta_trans) {
  if (!state.defined()) throw ContractError("MemoryBuffer::update: undefined state");
  if (!slots_.empty()) {
    if (step <= slots_.back().step_index)
      throw ContractError("MemoryBuffer::update: step indices must increase");
    const Pose& last = slots_.back().anchor;
    const bool moved = rotation_distance(anchor, last) >= theta_rot ||
                       translation_distance(anchor, last) >= theta_trans;
    if (!moved) return false;
    if (static_cast<int>(slots_.size()) == capacity_) slots_.erase(slots_.begin());
  }
  slots_.push_back({state, anchor, step});
  return true;
}

// ---- model construction ------------------------------------------------------

namespace {

Tensor kaiming_conv(Rng& rng, int c_out, int c_in, int k) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
  std::vector<double> w(static_cast<size_t>(c_out) * c_in * k * k);
  for (auto& v : w) v = rng.normal(0.0, stddev);
  return Tensor::from_data({c_out, c_in, k, k}, std::move(w), true);
}

Tensor kaiming_linear(Rng& rng, int rows, int cols) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(cols));
  std::vector<double> w(static_cast<size_t>(rows) * cols);
  for (auto& v : w) v = rng.normal(0.0, stddev);
  return Tensor::from_data({rows, cols}, std::move(w), true);
}

}  // namespace

VoModel::VoModel(const VoModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.feature_channels;
  const int ch = config_.hidden_channels;

  int in_ch = config_.input_channels;
  for (size_t i = 0; i < config_.encoder_layers.size(); ++i) {
    const auto& spec = config_.encoder_layers[i];
    ConvLayer layer;
    layer.kernel = kaiming_conv(rng, spec.out_channels, in_ch, 3);
    layer.bias = Tensor::zeros({spec.out_channels}, true);
    layer.stride = spec.stride;
    encoder.push_back(layer);
    params_.add("encoder." + std::to_string(i) + ".kernel", layer.kernel);
    params_.add("encoder." + std::to_string(i) + ".bias", layer.bias);
    in_ch = spec.out_channels;
  }

  tracking.kernel = kaiming_conv(rng, 4 * ch, c + ch, 3);
  tracking.bias = Tensor::zeros({4 * ch}, true);
  tracking.hidden_channels = ch;
  params_.add("tracking.kernel", tracking.kernel);
  params_.add("tracking.bias", tracking.bias);

  se3_relative.weight = kaiming_linear(rng, 6, ch);
  se3_relative.bias = Tensor::zeros({6}, true);
  params_.add("se3_relative.weight", se3_relative.weight);
  params_.add("se3_relative.bias", se3_relative.bias);

  fusion_a.kernel = kaiming_conv(rng, c, ch + c, 3);
  fusion_a.bias = Tensor::zeros({c}, true);
  fusion_b.kernel = kaiming_conv(rng, c, c, 3);
  fusion_b.bias = Tensor::zeros({c}, true);
  params_.add("fusion.0.kernel", fusion_a.kernel);
  params_.add("fusion.0.bias", fusion_a.bias);
  params_.add("fusion.1.kernel", fusion_b.kernel);
  params_.add("fusion.1.bias", fusion_b.bias);

  refining.kernel = kaiming_conv(rng, 4 * ch, c + ch, 3);
  refining.bias = Tensor::zeros({4 * ch}, true);
  refining.hidden_channels = ch;
  params_.add("refining.kernel", refining.kernel);
  params_.add("refining.bias", refining.bias);

  se3_absolute.weight = kaiming_linear(rng, 6, ch);
  se3_absolute.bias = Tensor::zeros({6}, true);
  params_.add("se3_absolute.weight", se3_absolute.weight);
  params_.add("se3_absolute.bias", se3_absolute.bias);
}

ConvLstmState VoModel::zero_recurrent_state() const {
  return {Tensor::zeros({config_.hidden_channels, config_.feature_height, config_.feature_width}),
          Tensor::zeros({config_.hidden_channels, config_.feature_height, config_.feature_width})};
}

// ---- forward pieces -----------------------------------------------------------

Tensor encoder_forward(const VoModel& model, const Tensor& image_pair) {
  if (!image_pair.defined() || image_pair.shape().size() != 3)
    throw ShapeError("encoder_forward: input must be [C, H, W]");
  if (image_pair.shape()[0] != model.config().input_channels)
    throw ShapeError("encoder_forward: expected " +
                     std::to_string(model.config().input_channels) + " input channels, got " +
                     std::to_string(image_pair.shape()[0]));
  int cumulative = 1;
  for (const auto& layer : model.encoder) cumulative *= layer.stride;
  if (image_pair.shape()[1] % cumulative != 0 || image_pair.shape()[2] % cumulative != 0)
    throw ShapeError("encoder_forward: spatial size must divide by cumulative stride " +
                     std::to_string(cumulative));
  Tensor x = image_pair;
  for (const auto& layer : model.encoder)
    x = leaky_relu(conv2d(x, layer.kernel, layer.bias, layer.stride, 1));
  return x;
}

std::pair<Tensor, ConvLstmState> convlstm_step(const ConvLstmParams& params,
                                               const Tensor& x,
                                               const ConvLstmState& state) {
  const int ch = params.hidden_channels;
  Tensor gates = conv2d(concat_channels({x, state.h}), params.kernel, params.bias, 1, 1);
  Tensor i = sigmoid(slice_channels(gates, 0, ch));
  Tensor f = sigmoid(slice_channels(gates, ch, ch));
  Tensor o = sigmoid(slice_channels(gates, 2 * ch, ch));
  Tensor g = tanh(slice_channels(gates, 3 * ch, ch));
  Tensor c = f * state.c + i * g;
  Tensor h = o * tanh(c);
  return {h, ConvLstmState{h, c}};
}

Pose PosePrediction::pose() const {
  const auto& v = vec6.values();
  Pose p;
  p.translation = {v[0], v[1], v[2]};
  p.rotation = {v[3], v[4], v[5]};
  return p;
}

PosePrediction se3_layer(const Se3Params& params, const Tensor& output) {
  return {linear(global_avg_pool(output), params.weight, params.bias)};
}

TrackingResult tracking_step(const VoModel& model, const Tensor& x,
                             const ConvLstmState& state) {
  auto [output, next] = convlstm_step(model.tracking, x, state);
  return {se3_layer(model.se3_relative, output), output, next};
}

// ---- attention ----------------------------------------------------------------

namespace {

Tensor alpha_weights(const Tensor& guidance, const MemoryBuffer& buffer) {
  std::vector<Tensor> sims;
  sims.reserve(buffer.size());
  for (const auto& slot : buffer.slots())
    sims.push_back(cosine_similarity(guidance, slot.state));
  return softmax_vec(stack_scalars(sims));
}

}  // namespace

AttentionResult temporal_attention(const Tensor& guidance, const MemoryBuffer& buffer) {
  if (buffer.empty()) throw ContractError("temporal_attention: empty memory");
  Tensor alpha = alpha_weights(guidance, buffer);
  Tensor fused;
  for (size_t i = 0; i < buffer.size(); ++i) {
    Tensor part = scale(buffer.slots()[i].state, index_vec(alpha, static_cast<int>(i)));
    fused = fused.defined() ? fused + part : part;
  }
  return {fused, alpha, {}};
}

std::pair<Tensor, Tensor> channel_attention(const Tensor& guidance, const Tensor& target) {
  if (guidance.shape() != target.shape())
    throw ShapeError("channel_attention: guidance " + shape_str(guidance.shape()) +
                     " vs target " + shape_str(target.shape()));
  const int c = target.shape()[0];
  std::vector<Tensor> sims;
  sims.reserve(c);
  for (int j = 0; j < c; ++j)
    sims.push_back(cosine_similarity(slice_channels(guidance, j, 1),
                                     slice_channels(target, j, 1)));
  // softmax over channels scaled by C: uniform similarities give beta == 1
  // everywhere and the element passes through unchanged.
  Tensor beta = scale_const(softmax_vec(stack_scalars(sims)), static_cast<double>(c));
  std::vector<Tensor> chans;
  chans.reserve(c);
  for (int j = 0; j < c; ++j)
    chans.push_back(scale(slice_channels(target, j, 1), index_vec(beta, j)));
  return {beta, concat_channels(chans)};
}

AttentionResult spatial_channel_attention(const Tensor& guidance, const MemoryBuffer& buffer) {
  if (buffer.empty()) throw ContractError("spatial_channel_attention: empty memory");
  Tensor alpha = alpha_weights(guidance, buffer);
  AttentionResult out;
  out.alpha = alpha;
  for (size_t i = 0; i < buffer.size(); ++i) {
    auto [beta, reweighted] = channel_attention(guidance, buffer.slots()[i].state);
    out.beta.push_back(beta);
    Tensor part = scale(reweighted, index_vec(alpha, static_cast<int>(i)));
    out.fused = out.fused.defined() ? out.fused + part : part;
  }
  return out;
}

RefineResult refine_step(const VoModel& model, const Tensor& x,
                         const ConvLstmState& state, const MemoryBuffer& buffer) {
  const AttentionMode mode = model.config().attention;
  if (mode == AttentionMode::kNone)
    throw ContractError("refine_step: refining is disabled in attention mode none");
  const Tensor& guidance = state.h;
  AttentionResult att = mode == AttentionMode::kFull
                            ? spatial_channel_attention(guidance, buffer)
                            : temporal_attention(guidance, buffer);
  Tensor x_att = mode == AttentionMode::kFull ? channel_attention(guidance, x).second : x;
  Tensor fused = conv2d(concat_channels({att.fused, x_att}), model.fusion_a.kernel,
                        model.fusion_a.bias, 1, 1);
  fused = conv2d(leaky_relu(fused), model.fusion_b.kernel, model.fusion_b.bias, 1, 1);
  auto [output, next] = convlstm_step(model.refining, fused, state);
  return {se3_layer(model.se3_absolute, output), output, next, att.alpha};
}

// ---- sequence forward ----------------------------------------------------------

SequenceResult forward_sequence(const VoModel& model, const std::vector<Tensor>& features) {
  if (features.empty()) throw ContractError("forward_sequence: no features");
  const auto& cfg = model.config();
  for (const auto& f : features) {
    if (!f.defined() ||
        f.shape() != Shape{cfg.feature_channels, cfg.feature_height, cfg.feature_width})
      throw ShapeError("forward_sequence: feature shape mismatch");
  }

  SequenceResult result;
  MemoryBuffer buffer(cfg.buffer_capacity);
  ConvLstmState tstate = model.zero_recurrent_state();
  Pose anchor;  // integrated tracking pose, value level
  for (size_t t = 0; t < features.size(); ++t) {
    TrackingResult tr = tracking_step(model, features[t], tstate);
    anchor = compose(anchor, tr.relative.pose());
    if (buffer.update(tr.output, anchor, static_cast<int>(t), cfg.theta_rot, cfg.theta_trans))
      result.diagnostics.stored_steps.push_back(static_cast<int>(t));
    result.relatives.push_back(tr.relative);
    tstate = tr.state;
  }

  if (cfg.attention == AttentionMode::kNone) {
    // Value-level integration of the tracked relatives stands in for the
    // refined absolutes; these carry no gradient.
    Pose abs;
    for (const auto& rel : result.relatives) {
      abs = compose(abs, rel.pose());
      result.absolutes.push_back({Tensor::from_data(
          {6}, {abs.translation.x(), abs.translation.y(), abs.translation.z(),
                abs.rotation.x(), abs.rotation.y(), abs.rotation.z()})});
    }
    return result;
  }

  ConvLstmState rstate = model.zero_recurrent_state();
  for (const Tensor& f : features) {
    RefineResult rr = refine_step(model, f, rstate, buffer);
    result.absolutes.push_back(rr.absolute);
    result.diagnostics.alpha_history.push_back(rr.alpha.values());
    rstate = rr.state;
  }
  return result;
}

}  // namespace vo
