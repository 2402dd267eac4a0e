#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace vo {

using Shape = std::vector<int>;

int shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One recorded operation (or leaf) of the computation graph. The graph is
// the DAG formed by parent links; it is recorded while ops execute and
// released once the last Tensor handle into it goes away.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' grad

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

enum class UnaryOp { kSigmoid, kTanh, kRelu, kLeakyRelu };
enum class BinaryOp { kAdd, kSub, kMul };

/// Dense row-major tensor of doubles participating in a dynamically recorded
/// computation graph. Copies are shallow handles onto the same node; values
/// are immutable except through mutable_values(), which is reserved for
/// optimizers and checkpoint loading.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar_value(double value, bool requires_grad = false);
  // Wraps an existing node. Internal plumbing for the op implementations.
  static Tensor adopt(std::shared_ptr<detail::Node> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int numel() const;
  const std::vector<double>& values() const;
  double at(int flat_index) const;
  double scalar() const;  // requires numel() == 1
  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();
  bool all_finite() const;

  // Copies values into a fresh leaf outside the recorded graph.
  Tensor detach() const;

  // Direct value access for optimizer updates and checkpoint loading.
  std::vector<double>& mutable_values();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---- elementwise and structural operations --------------------------------

Tensor elementwise_unary(const Tensor& x, UnaryOp op);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x);  // fixed slope 0.1

Tensor binary(const Tensor& a, const Tensor& b, BinaryOp op);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);  // Hadamard product

/// Cross-correlation of input [C_in,H,W] with kernel [C_out,C_in,k,k] plus
/// per-channel bias. Output spatial size floor((H + 2*padding - k)/stride)+1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

/// Concatenates [C_i,H,W] parts along the channel dimension, argument order.
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, int first, int count);
Tensor slice_vec(const Tensor& x, int first, int count);

/// [C,H,W] -> [C], per-channel spatial mean.
Tensor global_avg_pool(const Tensor& x);

/// weight [m,n] * x [n] + bias [m].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Numerically stable softmax over a rank-1 tensor.
Tensor softmax_vec(const Tensor& logits);

/// Cosine similarity of two same-shape tensors viewed as flat vectors.
/// Returns 0 when either norm falls below 1e-12 so degenerate guidance never
/// produces NaN.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

Tensor stack_scalars(const std::vector<Tensor>& scalars);
Tensor index_vec(const Tensor& v, int index);

/// Elementwise product with a scalar tensor (broadcast).
Tensor scale(const Tensor& x, const Tensor& scalar);
Tensor scale_const(const Tensor& x, double c);

Tensor sum(const Tensor& x);

/// Euclidean norm of the flattened tensor; gradient defined as 0 at the
/// origin so exact-zero errors do not poison training.
Tensor l2_norm(const Tensor& x);

/// Wraps every element to (-pi, pi]; gradient passes through unchanged.
Tensor wrap_angles(const Tensor& x);

/// Reverse-mode sweep from a scalar loss. Accumulates d loss / d param into
/// the grad buffer of every requires_grad node reachable from the loss.
void backward(const Tensor& loss);

}  // namespace vo
