#include "vo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "vo/errors.hpp"

namespace vo {

namespace {

constexpr double kPi = 3.14159265358979323846;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> data,
                  std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) n->parents = std::move(parents);
  return n;
}

void check_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw ContractError(std::string(what) + ": undefined tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_rank(const Tensor& t, int rank, const char* what) {
  if (static_cast<int>(t.shape().size()) != rank)
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
}

}  // namespace

int shape_numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor handle ---------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (int d : shape)
    if (d < 1) throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->data.assign(static_cast<size_t>(shape_numel(shape)), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (int d : shape)
    if (d < 1) throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
  if (static_cast<size_t>(shape_numel(shape)) != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar_value(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::adopt(std::shared_ptr<detail::Node> node) {
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
  check_defined(*this, "shape");
  return node_->shape;
}

int Tensor::numel() const {
  check_defined(*this, "numel");
  return static_cast<int>(node_->data.size());
}

const std::vector<double>& Tensor::values() const {
  check_defined(*this, "values");
  return node_->data;
}

double Tensor::at(int flat_index) const {
  check_defined(*this, "at");
  if (flat_index < 0 || flat_index >= numel())
    throw ContractError("tensor index out of range");
  return node_->data[static_cast<size_t>(flat_index)];
}

double Tensor::scalar() const {
  if (numel() != 1) throw ContractError("scalar() on tensor of size " + std::to_string(numel()));
  return node_->data[0];
}

bool Tensor::requires_grad() const {
  check_defined(*this, "requires_grad");
  return node_->requires_grad;
}

bool Tensor::has_grad() const {
  check_defined(*this, "has_grad");
  return node_->grad.size() == node_->data.size();
}

const std::vector<double>& Tensor::grad() const {
  check_defined(*this, "grad");
  if (!has_grad()) throw ContractError("grad accessed before backward populated it");
  return node_->grad;
}

void Tensor::zero_grad() {
  check_defined(*this, "zero_grad");
  node_->grad.assign(node_->data.size(), 0.0);
}

bool Tensor::all_finite() const {
  check_defined(*this, "all_finite");
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return from_data(node_->shape, node_->data, false);
}

std::vector<double>& Tensor::mutable_values() {
  check_defined(*this, "mutable_values");
  return node_->data;
}

// ---- unary / binary --------------------------------------------------------

Tensor elementwise_unary(const Tensor& x, UnaryOp op) {
  check_defined(x, "elementwise_unary");
  const auto& in = x.values();
  std::vector<double> out(in.size());
  switch (op) {
    case UnaryOp::kSigmoid:
      for (size_t i = 0; i < in.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
      break;
    case UnaryOp::kTanh:
      for (size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case UnaryOp::kRelu:
      for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case UnaryOp::kLeakyRelu:
      for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.1 * in[i];
      break;
  }
  auto n = make_node(x.shape(), std::move(out), {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp, op](Node& self) {
      xp->ensure_grad();
      const auto& g = self.grad;
      const auto& y = self.data;
      const auto& in = xp->data;
      switch (op) {
        case UnaryOp::kSigmoid:
          for (size_t i = 0; i < g.size(); ++i) xp->grad[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
        case UnaryOp::kTanh:
          for (size_t i = 0; i < g.size(); ++i) xp->grad[i] += g[i] * (1.0 - y[i] * y[i]);
          break;
        case UnaryOp::kRelu:
          for (size_t i = 0; i < g.size(); ++i) xp->grad[i] += in[i] > 0.0 ? g[i] : 0.0;
          break;
        case UnaryOp::kLeakyRelu:
          for (size_t i = 0; i < g.size(); ++i) xp->grad[i] += in[i] > 0.0 ? g[i] : 0.1 * g[i];
          break;
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor sigmoid(const Tensor& x) { return elementwise_unary(x, UnaryOp::kSigmoid); }
Tensor tanh(const Tensor& x) { return elementwise_unary(x, UnaryOp::kTanh); }
Tensor relu(const Tensor& x) { return elementwise_unary(x, UnaryOp::kRelu); }
Tensor leaky_relu(const Tensor& x) { return elementwise_unary(x, UnaryOp::kLeakyRelu); }

Tensor binary(const Tensor& a, const Tensor& b, BinaryOp op) {
  check_defined(a, "binary");
  check_defined(b, "binary");
  check_same_shape(a, b, "binary");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  switch (op) {
    case BinaryOp::kAdd:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
      break;
    case BinaryOp::kSub:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
      break;
    case BinaryOp::kMul:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
      break;
  }
  auto n = make_node(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()});
  if (n->requires_grad) {
    NodePtr ap = a.node_ptr();
    NodePtr bp = b.node_ptr();
    n->backward_fn = [ap, bp, op](Node& self) {
      const auto& g = self.grad;
      switch (op) {
        case BinaryOp::kAdd:
          if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) ap->grad[i] += g[i];
          }
          if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) bp->grad[i] += g[i];
          }
          break;
        case BinaryOp::kSub:
          if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) ap->grad[i] += g[i];
          }
          if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) bp->grad[i] -= g[i];
          }
          break;
        case BinaryOp::kMul:
          if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) ap->grad[i] += g[i] * bp->data[i];
          }
          if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) bp->grad[i] += g[i] * ap->data[i];
          }
          break;
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor operator+(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::kAdd); }
Tensor operator-(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::kSub); }
Tensor operator*(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::kMul); }

// ---- conv2d ----------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
  check_defined(input, "conv2d");
  check_defined(kernel, "conv2d");
  check_defined(bias, "conv2d");
  check_rank(input, 3, "conv2d input");
  check_rank(kernel, 4, "conv2d kernel");
  check_rank(bias, 1, "conv2d bias");
  const int c_in = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const int c_out = kernel.shape()[0], kc = kernel.shape()[1];
  const int kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (kc != c_in)
    throw ShapeError("conv2d: kernel expects " + std::to_string(kc) +
                     " input channels, input has " + std::to_string(c_in));
  if (kh != kw || kh % 2 == 0) throw ContractError("conv2d: kernel must be square with odd size");
  if (bias.shape()[0] != c_out)
    throw ShapeError("conv2d: bias size " + std::to_string(bias.shape()[0]) +
                     " does not match output channels " + std::to_string(c_out));
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (padding < 0) throw ContractError("conv2d: padding must be >= 0");
  const int k = kh;
  const int ho = (h + 2 * padding - k) / stride + 1;
  const int wo = (w + 2 * padding - k) / stride + 1;
  if (h + 2 * padding < k || w + 2 * padding < k || ho < 1 || wo < 1)
    throw ShapeError("conv2d: kernel larger than padded input");

  const auto& in = input.values();
  const auto& ker = kernel.values();
  const auto& b = bias.values();
  std::vector<double> out(static_cast<size_t>(c_out) * ho * wo);
  for (int co = 0; co < c_out; ++co)
    std::fill_n(out.begin() + static_cast<size_t>(co) * ho * wo, ho * wo, b[co]);

  // Accumulate one kernel tap at a time; the inner loops run over the valid
  // output window so no per-pixel bounds checks are needed.
  for (int co = 0; co < c_out; ++co) {
    double* out_c = out.data() + static_cast<size_t>(co) * ho * wo;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* in_c = in.data() + static_cast<size_t>(ci) * h * w;
      const double* ker_c = ker.data() + (static_cast<size_t>(co) * c_in + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = ker_c[ky * k + kx];
          if (wv == 0.0) continue;
          // valid output rows: 0 <= oy*stride + ky - padding < h
          int oy0 = std::max(0, (padding - ky + stride - 1) / stride);
          int oy1 = std::min(ho, (h - 1 - ky + padding) / stride + 1);
          int ox0 = std::max(0, (padding - kx + stride - 1) / stride);
          int ox1 = std::min(wo, (w - 1 - kx + padding) / stride + 1);
          for (int oy = oy0; oy < oy1; ++oy) {
            const int iy = oy * stride + ky - padding;
            const double* in_row = in_c + static_cast<size_t>(iy) * w;
            double* out_row = out_c + static_cast<size_t>(oy) * wo;
            for (int ox = ox0; ox < ox1; ++ox)
              out_row[ox] += wv * in_row[ox * stride + kx - padding];
          }
        }
      }
    }
  }

  auto n = make_node({c_out, ho, wo}, std::move(out),
                     {input.node_ptr(), kernel.node_ptr(), bias.node_ptr()});
  if (n->requires_grad) {
    NodePtr ip = input.node_ptr();
    NodePtr kp = kernel.node_ptr();
    NodePtr bp = bias.node_ptr();
    n->backward_fn = [ip, kp, bp, stride, padding, c_in, h, w, c_out, k, ho,
                      wo](Node& self) {
      const auto& g = self.grad;
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int co = 0; co < c_out; ++co) {
          double acc = 0.0;
          const double* g_c = g.data() + static_cast<size_t>(co) * ho * wo;
          for (int i = 0; i < ho * wo; ++i) acc += g_c[i];
          bp->grad[co] += acc;
        }
      }
      const bool want_din = ip->requires_grad;
      const bool want_dk = kp->requires_grad;
      if (want_din) ip->ensure_grad();
      if (want_dk) kp->ensure_grad();
      if (!want_din && !want_dk) return;
      for (int co = 0; co < c_out; ++co) {
        const double* g_c = g.data() + static_cast<size_t>(co) * ho * wo;
        for (int ci = 0; ci < c_in; ++ci) {
          const double* in_c = ip->data.data() + static_cast<size_t>(ci) * h * w;
          const double* ker_c =
              kp->data.data() + (static_cast<size_t>(co) * c_in + ci) * k * k;
          double* din_c = want_din ? ip->grad.data() + static_cast<size_t>(ci) * h * w : nullptr;
          double* dk_c = want_dk ? kp->grad.data() + (static_cast<size_t>(co) * c_in + ci) * k * k : nullptr;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              int oy0 = std::max(0, (padding - ky + stride - 1) / stride);
              int oy1 = std::min(ho, (h - 1 - ky + padding) / stride + 1);
              int ox0 = std::max(0, (padding - kx + stride - 1) / stride);
              int ox1 = std::min(wo, (w - 1 - kx + padding) / stride + 1);
              const double wv = ker_c[ky * k + kx];
              double dk_acc = 0.0;
              for (int oy = oy0; oy < oy1; ++oy) {
                const int iy = oy * stride + ky - padding;
                const double* g_row = g_c + static_cast<size_t>(oy) * wo;
                const double* in_row = in_c + static_cast<size_t>(iy) * w;
                double* din_row = want_din ? din_c + static_cast<size_t>(iy) * w : nullptr;
                for (int ox = ox0; ox < ox1; ++ox) {
                  const double gv = g_row[ox];
                  const int ix = ox * stride + kx - padding;
                  if (want_dk) dk_acc += gv * in_row[ix];
                  if (want_din) din_row[ix] += gv * wv;
                }
              }
              if (want_dk) dk_c[ky * k + kx] += dk_acc;
            }
          }
        }
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

// ---- concat / slice --------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no parts");
  for (const auto& p : parts) {
    check_defined(p, "concat_channels");
    check_rank(p, 3, "concat_channels part");
  }
  const int h = parts[0].shape()[1], w = parts[0].shape()[2];
  int c_total = 0;
  for (const auto& p : parts) {
    if (p.shape()[1] != h || p.shape()[2] != w)
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(p.shape()) +
                       " vs " + shape_str(parts[0].shape()));
    c_total += p.shape()[0];
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(c_total) * h * w);
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    const auto& v = p.values();
    out.insert(out.end(), v.begin(), v.end());
    parents.push_back(p.node_ptr());
  }
  auto n = make_node({c_total, h, w}, std::move(out), std::move(parents));
  if (n->requires_grad) {
    std::vector<NodePtr> ps;
    for (const auto& p : parts) ps.push_back(p.node_ptr());
    n->backward_fn = [ps](Node& self) {
      size_t offset = 0;
      for (const auto& p : ps) {
        const size_t len = p->data.size();
        if (p->requires_grad) {
          p->ensure_grad();
          for (size_t i = 0; i < len; ++i) p->grad[i] += self.grad[offset + i];
        }
        offset += len;
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

namespace {

// Shared kernel for contiguous-range slices (channel blocks and vector runs).
Tensor slice_range(const Tensor& x, size_t begin, size_t len, Shape out_shape,
                   const char* what) {
  if (begin + len > x.values().size()) throw ContractError(std::string(what) + ": range out of bounds");
  std::vector<double> out(x.values().begin() + begin, x.values().begin() + begin + len);
  auto n = make_node(std::move(out_shape), std::move(out), {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp, begin](Node& self) {
      xp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) xp->grad[begin + i] += self.grad[i];
    };
  }
  return Tensor::adopt(std::move(n));
}

}  // namespace

Tensor slice_channels(const Tensor& x, int first, int count) {
  check_defined(x, "slice_channels");
  check_rank(x, 3, "slice_channels");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (first < 0 || count < 1 || first + count > c)
    throw ContractError("slice_channels: invalid channel range");
  return slice_range(x, static_cast<size_t>(first) * h * w,
                     static_cast<size_t>(count) * h * w, {count, h, w},
                     "slice_channels");
}

Tensor slice_vec(const Tensor& x, int first, int count) {
  check_defined(x, "slice_vec");
  check_rank(x, 1, "slice_vec");
  if (first < 0 || count < 1 || first + count > x.shape()[0])
    throw ContractError("slice_vec: invalid range");
  return slice_range(x, static_cast<size_t>(first), static_cast<size_t>(count),
                     {count}, "slice_vec");
}

// ---- reductions and vector ops ----------------------------------------------

Tensor global_avg_pool(const Tensor& x) {
  check_defined(x, "global_avg_pool");
  check_rank(x, 3, "global_avg_pool");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const double inv = 1.0 / (static_cast<double>(h) * w);
  const auto& in = x.values();
  std::vector<double> out(static_cast<size_t>(c));
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    const double* p = in.data() + static_cast<size_t>(ci) * h * w;
    for (int i = 0; i < h * w; ++i) acc += p[i];
    out[ci] = acc * inv;
  }
  auto n = make_node({c}, std::move(out), {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp, c, h, w, inv](Node& self) {
      xp->ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        const double gv = self.grad[ci] * inv;
        double* p = xp->grad.data() + static_cast<size_t>(ci) * h * w;
        for (int i = 0; i < h * w; ++i) p[i] += gv;
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_defined(x, "linear");
  check_defined(weight, "linear");
  check_defined(bias, "linear");
  check_rank(x, 1, "linear input");
  check_rank(weight, 2, "linear weight");
  check_rank(bias, 1, "linear bias");
  const int m = weight.shape()[0], nn = weight.shape()[1];
  if (x.shape()[0] != nn)
    throw ShapeError("linear: weight expects input size " + std::to_string(nn) +
                     ", got " + std::to_string(x.shape()[0]));
  if (bias.shape()[0] != m)
    throw ShapeError("linear: bias size mismatch");
  const auto& xv = x.values();
  const auto& wv = weight.values();
  const auto& bv = bias.values();
  std::vector<double> out(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double acc = bv[i];
    const double* row = wv.data() + static_cast<size_t>(i) * nn;
    for (int j = 0; j < nn; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  auto n = make_node({m}, std::move(out), {x.node_ptr(), weight.node_ptr(), bias.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    NodePtr wp = weight.node_ptr();
    NodePtr bp = bias.node_ptr();
    n->backward_fn = [xp, wp, bp, m, nn](Node& self) {
      const auto& g = self.grad;
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int i = 0; i < m; ++i) bp->grad[i] += g[i];
      }
      if (wp->requires_grad) {
        wp->ensure_grad();
        for (int i = 0; i < m; ++i) {
          double* row = wp->grad.data() + static_cast<size_t>(i) * nn;
          for (int j = 0; j < nn; ++j) row[j] += g[i] * xp->data[j];
        }
      }
      if (xp->requires_grad) {
        xp->ensure_grad();
        for (int i = 0; i < m; ++i) {
          const double* row = wp->data.data() + static_cast<size_t>(i) * nn;
          for (int j = 0; j < nn; ++j) xp->grad[j] += g[i] * row[j];
        }
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor softmax_vec(const Tensor& logits) {
  check_defined(logits, "softmax_vec");
  check_rank(logits, 1, "softmax_vec");
  const auto& in = logits.values();
  double mx = in[0];
  for (double v : in) mx = std::max(mx, v);
  std::vector<double> out(in.size());
  double total = 0.0;
  for (size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  auto n = make_node(logits.shape(), std::move(out), {logits.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = logits.node_ptr();
    n->backward_fn = [xp](Node& self) {
      xp->ensure_grad();
      const auto& y = self.data;
      const auto& g = self.grad;
      double dot = 0.0;
      for (size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
      for (size_t i = 0; i < y.size(); ++i) xp->grad[i] += y[i] * (g[i] - dot);
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  check_defined(a, "cosine_similarity");
  check_defined(b, "cosine_similarity");
  check_same_shape(a, b, "cosine_similarity");
  const auto& av = a.values();
  const auto& bv = b.values();
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na2 += av[i] * av[i];
    nb2 += bv[i] * bv[i];
  }
  // sqrt of the product (not product of sqrts) so identical inputs give
  // exactly 1.0: sqrt(fl(x*x)) == x for correctly rounded doubles.
  const double nprod = std::sqrt(na2 * nb2);
  const bool degenerate = na2 < 1e-24 || nb2 < 1e-24;
  const double value = degenerate ? 0.0 : dot / nprod;
  auto n = make_node({1}, {value}, {a.node_ptr(), b.node_ptr()});
  if (n->requires_grad) {
    NodePtr ap = a.node_ptr();
    NodePtr bp = b.node_ptr();
    n->backward_fn = [ap, bp, na2, nb2, nprod, value, degenerate](Node& self) {
      if (degenerate) return;  // similarity pinned at 0, gradient defined as 0
      const double g = self.grad[0];
      if (ap->requires_grad) {
        ap->ensure_grad();
        for (size_t i = 0; i < ap->data.size(); ++i)
          ap->grad[i] += g * (bp->data[i] / nprod - value * ap->data[i] / na2);
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (size_t i = 0; i < bp->data.size(); ++i)
          bp->grad[i] += g * (ap->data[i] / nprod - value * bp->data[i] / nb2);
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ContractError("stack_scalars: empty input");
  std::vector<double> out;
  out.reserve(scalars.size());
  std::vector<NodePtr> parents;
  for (const auto& s : scalars) {
    check_defined(s, "stack_scalars");
    if (s.numel() != 1) throw ShapeError("stack_scalars: inputs must be scalars");
    out.push_back(s.values()[0]);
    parents.push_back(s.node_ptr());
  }
  auto n = make_node({static_cast<int>(scalars.size())}, std::move(out), std::move(parents));
  if (n->requires_grad) {
    std::vector<NodePtr> ps;
    for (const auto& s : scalars) ps.push_back(s.node_ptr());
    n->backward_fn = [ps](Node& self) {
      for (size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i]->requires_grad) continue;
        ps[i]->ensure_grad();
        ps[i]->grad[0] += self.grad[i];
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor index_vec(const Tensor& v, int index) {
  check_defined(v, "index_vec");
  check_rank(v, 1, "index_vec");
  if (index < 0 || index >= v.shape()[0]) throw ContractError("index_vec: out of range");
  return slice_vec(v, index, 1);
}

Tensor scale(const Tensor& x, const Tensor& scalar) {
  check_defined(x, "scale");
  check_defined(scalar, "scale");
  if (scalar.numel() != 1) throw ShapeError("scale: multiplier must be a scalar tensor");
  const double s = scalar.values()[0];
  const auto& in = x.values();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] * s;
  auto n = make_node(x.shape(), std::move(out), {x.node_ptr(), scalar.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    NodePtr sp = scalar.node_ptr();
    n->backward_fn = [xp, sp, s](Node& self) {
      const auto& g = self.grad;
      if (xp->requires_grad) {
        xp->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) xp->grad[i] += g[i] * s;
      }
      if (sp->requires_grad) {
        sp->ensure_grad();
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += g[i] * xp->data[i];
        sp->grad[0] += acc;
      }
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor scale_const(const Tensor& x, double c) {
  check_defined(x, "scale_const");
  const auto& in = x.values();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] * c;
  auto n = make_node(x.shape(), std::move(out), {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp, c](Node& self) {
      xp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i] * c;
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor sum(const Tensor& x) {
  check_defined(x, "sum");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto n = make_node({1}, {acc}, {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp](Node& self) {
      xp->ensure_grad();
      const double g = self.grad[0];
      for (auto& v : xp->grad) v += g;
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor l2_norm(const Tensor& x) {
  check_defined(x, "l2_norm");
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  const double norm = std::sqrt(acc);
  auto n = make_node({1}, {norm}, {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp, norm](Node& self) {
      if (norm <= 0.0) return;  // subgradient 0 at the origin
      xp->ensure_grad();
      const double g = self.grad[0] / norm;
      for (size_t i = 0; i < xp->data.size(); ++i) xp->grad[i] += g * xp->data[i];
    };
  }
  return Tensor::adopt(std::move(n));
}

Tensor wrap_angles(const Tensor& x) {
  check_defined(x, "wrap_angles");
  const auto& in = x.values();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    double w = std::remainder(in[i], 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    out[i] = w;
  }
  auto n = make_node(x.shape(), std::move(out), {x.node_ptr()});
  if (n->requires_grad) {
    NodePtr xp = x.node_ptr();
    n->backward_fn = [xp](Node& self) {
      xp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i];
    };
  }
  return Tensor::adopt(std::move(n));
}

// ---- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward requires a defined scalar loss");
  Node* root = loss.node();
  if (!root->requires_grad) return;  // nothing trainable is reachable

  // Post-order DFS over requires_grad nodes; reversed it visits every
  // consumer before its producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      Node* p = top.first->parents[top.second++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }

  // Leaf grads accumulate across calls (optimizer contract); intermediate
  // grads are per-pass scratch and reset here. Every visited node ends the
  // pass with an allocated grad buffer.
  for (Node* n : order) {
    if (n->backward_fn)
      n->grad.assign(n->data.size(), 0.0);
    else
      n->ensure_grad();
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace vo
