#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "inflect/tensor.hpp"

namespace inflect::nn {

template <class Real>
struct Node {
  Tensor<Real> value;
  std::vector<Real> grad;  // allocated on first use
  bool requires_grad = false;
  std::function<void()> backward;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
    return grad;
  }
};

// Handle to a value in the computation. Copies share the same node.
template <class Real>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<Real> value);
  // A leaf whose gradient is accumulated by Graph::backward.
  static Var parameter(Tensor<Real> value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<Real>& value() const { return node_->value; }
  Tensor<Real>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }

  // Empty until a backward pass has reached this node.
  const std::vector<Real>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  Node<Real>* node() const noexcept { return node_.get(); }

 private:
  std::shared_ptr<Node<Real>> node_;
};

// Tape of recorded operations. Constructing a Graph makes it the recording
// target for the current thread until it is destroyed; with no live Graph
// operations are evaluated without recording.
template <class Real>
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  static Graph* current() noexcept { return current_; }

  void record(std::shared_ptr<Node<Real>> node) { tape_.push_back(std::move(node)); }
  std::size_t size() const noexcept { return tape_.size(); }

  // Reverse-mode pass from a scalar; gradients accumulate into every node
  // that requires them, including parameter leaves.
  void backward(const Var<Real>& loss);

 private:
  std::vector<std::shared_ptr<Node<Real>>> tape_;
  Graph* previous_ = nullptr;
  static thread_local Graph* current_;
};

template <class Real>
thread_local Graph<Real>* Graph<Real>::current_ = nullptr;

// Clears parameter gradients, runs backward and returns one gradient tensor
// per parameter (zeros for parameters the loss does not depend on).
template <class Real>
std::vector<Tensor<Real>> gradients(Graph<Real>& graph, const Var<Real>& loss, const std::vector<Var<Real>>& params);

// Creates the output node of an operation, wiring it into the active graph
// when any input requires a gradient. Throws NumericError on non-finite output.
template <class Real>
Var<Real> make_result(Tensor<Real> value, std::initializer_list<const Var<Real>*> inputs, const char* op);

struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

// --- operations -------------------------------------------------------------

// (..., K) x (K, N) -> (..., N)
template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b);

// Batched: (G, M, K) x (G, K, N) -> (G, M, N); with transpose_b, b is (G, N, K).
template <class Real>
Var<Real> bmm(const Var<Real>& a, const Var<Real>& b, bool transpose_b = false);

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b);

// x (..., N) + bias (N)
template <class Real>
Var<Real> add_bias(const Var<Real>& x, const Var<Real>& bias);

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b);

template <class Real>
Var<Real> scale(const Var<Real>& x, double factor);

// x (..., N) * s (..., 1)
template <class Real>
Var<Real> scale_rows(const Var<Real>& x, const Var<Real>& s);

template <class Real>
Var<Real> one_minus(const Var<Real>& x);

template <class Real>
Var<Real> relu(const Var<Real>& x);

template <class Real>
Var<Real> sigmoid(const Var<Real>& x);

// Max-subtracted softmax along `axis`. For the last axis an optional keep
// mask (same number of elements, nonzero = keep) zeroes masked entries; a
// fully masked row yields all zeros.
template <class Real>
Var<Real> softmax(const Var<Real>& x, int axis = -1, const std::vector<std::uint8_t>& mask = {});

template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias, double eps = 1e-5);

// Rows of table (V, D) selected by ids -> (ids.size(), D).
template <class Real>
Var<Real> embedding(const Var<Real>& table, const std::vector<std::int32_t>& ids);

// Identity when ctx is null or the rate is zero.
template <class Real>
Var<Real> dropout(const Var<Real>& x, const DropoutContext* ctx);

template <class Real>
Var<Real> reshape(const Var<Real>& x, Shape shape);

// (A, B, C, D) -> (A, C, B, D)
template <class Real>
Var<Real> swap_middle_axes(const Var<Real>& x);

// (G*H, R, C) -> (G, R, C), averaging each group of H consecutive slices.
template <class Real>
Var<Real> mean_heads(const Var<Real>& x, std::size_t heads);

template <class Real>
Var<Real> concat_last(const std::vector<Var<Real>>& parts);

// x / sum(x) along the last axis; rows summing to zero stay zero.
template <class Real>
Var<Real> normalize_last(const Var<Real>& x);

// Zero-pads the last axis to `width`.
template <class Real>
Var<Real> pad_last(const Var<Real>& x, std::size_t width);

template <class Real>
Var<Real> sum(const Var<Real>& x);

// Weighted mean negative log-likelihood over rows of a probability matrix
// probs (..., C). Row r contributes weight[r] * ((1 - smoothing) * -log p[r, target[r]]
// + smoothing * mean over legal c of -log p[r, c]); `legal` (same element count
// as probs) is required when smoothing > 0.
template <class Real>
Var<Real> nll_loss(const Var<Real>& probs, const std::vector<std::int32_t>& targets, const std::vector<Real>& weights,
                   double smoothing = 0.0, const std::vector<std::uint8_t>& legal = {});

// --- attention --------------------------------------------------------------

template <class Real>
struct AttentionParams {
  Var<Real> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <class Real>
struct AttentionResult {
  Var<Real> output;   // (B, Tq, D)
  Var<Real> weights;  // (B*heads, Tq, Tk), before dropout
};

// Scaled dot-product attention over `heads` heads with input/output
// projections. `mask` has B*Tq*Tk entries (nonzero = may attend).
template <class Real>
AttentionResult<Real> multi_head_attention(const Var<Real>& queries, const Var<Real>& keys, const Var<Real>& values,
                                           const std::vector<std::uint8_t>& mask, std::size_t heads,
                                           const AttentionParams<Real>& params, const DropoutContext* dropout_ctx);

}  // namespace inflect::nn
