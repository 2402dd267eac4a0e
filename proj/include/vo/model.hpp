#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vo/checkpoint.hpp"
#include "vo/geometry.hpp"
#include "vo/tensor.hpp"

namespace vo {

enum class AttentionMode { kFull, kTemporalOnly, kNone };

AttentionMode attention_mode_from_string(const std::string& name);
std::string to_string(AttentionMode mode);

struct EncoderLayerSpec {
  int out_channels = 0;
  int stride = 2;
};

struct VoModelConfig {
  int feature_channels = 8;   // C: encoder output / per-pair feature channels
  int feature_height = 8;     // H
  int feature_width = 8;      // W
  int hidden_channels = 8;    // C_h of both recurrent units
  int input_channels = 6;     // stacked image pair fed to the encoder
  std::vector<EncoderLayerSpec> encoder_layers = {{16, 2}, {16, 2}, {8, 2}};
  double theta_rot = 0.005;   // radians
  double theta_trans = 0.6;   // meters
  int buffer_capacity = 11;
  AttentionMode attention = AttentionMode::kFull;
  int sequence_length = 11;

  // Throws ConfigError; full attention needs feature_channels ==
  // hidden_channels because observations are reweighted channel-by-channel
  // against the guidance.
  void validate() const;
};

// One stored memory element: a recurrent output plus the integrated pose it
// was selected at.
struct MemorySlot {
  Tensor state;
  Pose anchor;
  int step_index = 0;
};

// Bounded store with motion-gated admission and FIFO eviction. The first
// candidate is always admitted so attention always has something to read.
class MemoryBuffer {
 public:
  explicit MemoryBuffer(int capacity);

  // Admits the candidate when the buffer is empty or its anchor moved at
  // least theta_rot or theta_trans away from the last stored anchor.
  // Returns true when stored.
  bool update(const Tensor& state, const Pose& anchor, int step,
              double theta_rot, double theta_trans);

  const std::vector<MemorySlot>& slots() const { return slots_; }
  int capacity() const { return capacity_; }
  bool empty() const { return slots_.empty(); }
  size_t size() const { return slots_.size(); }

 private:
  std::vector<MemorySlot> slots_;
  int capacity_;
};

struct ConvLstmParams {
  Tensor kernel;  // [4*C_h, C_in + C_h, 3, 3], gate order i, f, o, g
  Tensor bias;    // [4*C_h]
  int hidden_channels = 0;
};

struct ConvLstmState {
  Tensor h;  // [C_h, H, W]; doubles as the unit's last output
  Tensor c;  // [C_h, H, W]
};

struct ConvLayer {
  Tensor kernel;  // [C_out, C_in, k, k]
  Tensor bias;    // [C_out]
  int stride = 1;
};

struct Se3Params {
  Tensor weight;  // [6, C_h]
  Tensor bias;    // [6]
};

// 6-DoF prediction kept as a graph tensor (translation x,y,z then roll,
// pitch, yaw) with a value-level pose view.
struct PosePrediction {
  Tensor vec6;
  Pose pose() const;
};

class VoModel {
 public:
  // Kaiming-style fan-in initialization, deterministic per seed; biases zero.
  VoModel(const VoModelConfig& config, std::uint64_t seed);

  const VoModelConfig& config() const { return config_; }
  const ParameterMap& parameters() const { return params_; }
  ParameterMap& parameters() { return params_; }

  ConvLstmState zero_recurrent_state() const;

  std::vector<ConvLayer> encoder;
  ConvLstmParams tracking;
  Se3Params se3_relative;
  ConvLayer fusion_a;  // (C_h + C) -> C
  ConvLayer fusion_b;  // C -> C
  ConvLstmParams refining;
  Se3Params se3_absolute;

 private:
  VoModelConfig config_;
  ParameterMap params_;
};

// Stride-2 conv stack over a stacked image pair. Throws ShapeError when the
// spatial size does not divide by the cumulative stride.
Tensor encoder_forward(const VoModel& model, const Tensor& image_pair);

// One recurrent update: gates from a single 3x3 convolution over
// concat(x, h_prev); c' = f*c + i*g, h' = o*tanh(c'). Returns (output, state')
// where output aliases state'.h.
std::pair<Tensor, ConvLstmState> convlstm_step(const ConvLstmParams& params,
                                               const Tensor& x,
                                               const ConvLstmState& state);

// Pooled features -> affine map to 6 motion values.
PosePrediction se3_layer(const Se3Params& params, const Tensor& output);

struct TrackingResult {
  PosePrediction relative;
  Tensor output;
  ConvLstmState state;
};
TrackingResult tracking_step(const VoModel& model, const Tensor& x,
                             const ConvLstmState& state);

struct AttentionResult {
  Tensor fused;               // M': [C_h, H, W]
  Tensor alpha;               // [n slots], sums to 1
  std::vector<Tensor> beta;   // per slot [C_h]; empty for the temporal path
};

// alpha from cosine similarity between the guidance and each stored state.
// All-zero guidance has similarity 0 everywhere, so alpha is uniform.
AttentionResult temporal_attention(const Tensor& guidance, const MemoryBuffer& buffer);

// Adds per-channel reweighting: beta over channels of each element, softmax
// scaled by C so uniform similarities reproduce the unweighted element.
AttentionResult spatial_channel_attention(const Tensor& guidance, const MemoryBuffer& buffer);

// Channel reweighting of `target` against `guidance` (both [C, H, W]).
// Returns (beta [C], reweighted map).
std::pair<Tensor, Tensor> channel_attention(const Tensor& guidance, const Tensor& target);

struct RefineResult {
  PosePrediction absolute;
  Tensor output;
  ConvLstmState state;
  Tensor alpha;
};

// Attention over memory guided by the previous refined output (state.h),
// fusion with the reweighted observation, recurrent update, absolute pose.
RefineResult refine_step(const VoModel& model, const Tensor& x,
                         const ConvLstmState& state, const MemoryBuffer& buffer);

struct SequenceDiagnostics {
  std::vector<int> stored_steps;
  std::vector<std::vector<double>> alpha_history;  // one row per refine step
};

struct SequenceResult {
  std::vector<PosePrediction> relatives;
  std::vector<PosePrediction> absolutes;  // origin excluded
  SequenceDiagnostics diagnostics;
};

// Tracking pass over all features (filling memory with integrated anchors),
// then a refining pass over the completed buffer. Attention mode kNone skips
// refining and returns value-level integrated tracking poses as absolutes.
SequenceResult forward_sequence(const VoModel& model, const std::vector<Tensor>& features);

}  // namespace vo
