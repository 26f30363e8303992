#include "inflect/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "inflect/errors.hpp"
#include "kernels.hpp"

namespace inflect::nn {

// --- Var / Graph --------------------------------------------------------------

template <class Real>
Var<Real> Var<Real>::constant(Tensor<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  return Var(std::move(node));
}

template <class Real>
Var<Real> Var<Real>::parameter(Tensor<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

template <class Real>
Graph<Real>::Graph() : previous_(current_) {
  current_ = this;
}

template <class Real>
Graph<Real>::~Graph() {
  current_ = previous_;
}

template <class Real>
void Graph<Real>::backward(const Var<Real>& loss) {
  if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;
  loss.node()->ensure_grad()[0] += Real(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node<Real>& node = **it;
    if (node.backward && !node.grad.empty()) node.backward();
  }
}

template <class Real>
std::vector<Tensor<Real>> gradients(Graph<Real>& graph, const Var<Real>& loss, const std::vector<Var<Real>>& params) {
  for (auto p : params) p.zero_grad();
  graph.backward(loss);
  std::vector<Tensor<Real>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Tensor<Real> g(p.shape());
    if (!p.grad().empty()) g.data = p.grad();
    out.push_back(std::move(g));
  }
  return out;
}

template <class Real>
Var<Real> make_result(Tensor<Real> value, std::initializer_list<const Var<Real>*> inputs, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  if (auto* graph = Graph<Real>::current()) {
    for (const auto* in : inputs) {
      if (in->requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
    if (node->requires_grad) graph->record(node);
  }
  return Var<Real>(std::move(node));
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <class Real>
std::size_t last_dim(const Var<Real>& x) {
  require(x.value().rank() > 0, "operation needs a tensor of rank >= 1");
  return x.shape().back();
}

}  // namespace

// --- linear algebra -------------------------------------------------------------

template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  require(b.value().rank() == 2, "matmul: right operand must be 2-D, got " + to_string(b.shape()));
  const std::size_t K = b.shape()[0], N = b.shape()[1];
  require(a.value().rank() >= 1 && a.shape().back() == K,
          "matmul: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t M = a.size() / K;
  Shape out_shape = a.shape();
  out_shape.back() = N;
  Tensor<Real> out(out_shape);
  kernels::gemm_nn(M, K, N, a.value().data.data(), b.value().data.data(), out.data.data());
  auto result = make_result(std::move(out), {&a, &b}, "matmul");
  if (result.requires_grad()) {
    result.node()->backward = [a, b, o = result.node(), M, K, N] {
      if (a.requires_grad()) {
        std::vector<Real> bt(K * N);
        kernels::transpose(K, N, b.value().data.data(), bt.data());
        kernels::gemm_nn(M, N, K, o->grad.data(), bt.data(), a.node()->ensure_grad().data());
      }
      if (b.requires_grad()) {
        kernels::gemm_tn(K, M, N, a.value().data.data(), o->grad.data(), b.node()->ensure_grad().data());
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> bmm(const Var<Real>& a, const Var<Real>& b, bool transpose_b) {
  require(a.value().rank() == 3 && b.value().rank() == 3,
          "bmm: operands must be 3-D, got " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t G = a.shape()[0], M = a.shape()[1], K = a.shape()[2];
  const std::size_t N = transpose_b ? b.shape()[1] : b.shape()[2];
  const std::size_t KB = transpose_b ? b.shape()[2] : b.shape()[1];
  require(b.shape()[0] == G && KB == K,
          "bmm: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()) +
              (transpose_b ? " (transposed)" : ""));
  Tensor<Real> out({G, M, N});
  std::vector<Real> bt(transpose_b ? K * N : 0);
  for (std::size_t g = 0; g < G; ++g) {
    const Real* A = a.value().data.data() + g * M * K;
    const Real* B = b.value().data.data() + g * K * N;
    Real* C = out.data.data() + g * M * N;
    if (transpose_b) {
      kernels::transpose(N, K, B, bt.data());
      kernels::gemm_nn(M, K, N, A, bt.data(), C);
    } else {
      kernels::gemm_nn(M, K, N, A, B, C);
    }
  }
  auto result = make_result(std::move(out), {&a, &b}, "bmm");
  if (result.requires_grad()) {
    result.node()->backward = [a, b, o = result.node(), G, M, K, N, transpose_b] {
      std::vector<Real> tmp(K * N);
      for (std::size_t g = 0; g < G; ++g) {
        const Real* A = a.value().data.data() + g * M * K;
        const Real* B = b.value().data.data() + g * K * N;
        const Real* dC = o->grad.data() + g * M * N;
        if (a.requires_grad()) {
          Real* dA = a.node()->ensure_grad().data() + g * M * K;
          if (transpose_b) {
            kernels::gemm_nn(M, N, K, dC, B, dA);
          } else {
            kernels::transpose(K, N, B, tmp.data());
            kernels::gemm_nn(M, N, K, dC, tmp.data(), dA);
          }
        }
        if (b.requires_grad()) {
          Real* dB = b.node()->ensure_grad().data() + g * K * N;
          if (transpose_b) {
            kernels::gemm_tn(N, M, K, dC, A, dB);
          } else {
            kernels::gemm_tn(K, M, N, A, dC, dB);
          }
        }
      }
    };
  }
  return result;
}

// --- elementwise ----------------------------------------------------------------

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  auto result = make_result(std::move(out), {&a, &b}, "add");
  if (result.requires_grad()) {
    result.node()->backward = [a, b, o = result.node()] {
      for (const auto* in : {&a, &b}) {
        if (!in->requires_grad()) continue;
        auto& g = in->node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> add_bias(const Var<Real>& x, const Var<Real>& bias) {
  const std::size_t N = last_dim(x);
  require(bias.size() == N, "add_bias: bias " + to_string(bias.shape()) + " does not match " + to_string(x.shape()));
  Tensor<Real> out = x.value();
  const std::size_t rows = out.size() / N;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < N; ++j) out[r * N + j] += bias.value()[j];
  }
  auto result = make_result(std::move(out), {&x, &bias}, "add_bias");
  if (result.requires_grad()) {
    result.node()->backward = [x, bias, o = result.node(), rows, N] {
      if (x.requires_grad()) {
        auto& g = x.node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
      if (bias.requires_grad()) {
        auto& g = bias.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < N; ++j) g[j] += o->grad[r * N + j];
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  auto result = make_result(std::move(out), {&a, &b}, "mul");
  if (result.requires_grad()) {
    result.node()->backward = [a, b, o = result.node()] {
      if (a.requires_grad()) {
        auto& g = a.node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * b.value()[i];
      }
      if (b.requires_grad()) {
        auto& g = b.node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * a.value()[i];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> scale(const Var<Real>& x, double factor) {
  const auto f = static_cast<Real>(factor);
  Tensor<Real> out = x.value();
  for (auto& v : out.data) v *= f;
  auto result = make_result(std::move(out), {&x}, "scale");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), f] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * f;
    };
  }
  return result;
}

template <class Real>
Var<Real> scale_rows(const Var<Real>& x, const Var<Real>& s) {
  require(s.value().rank() >= 1 && s.shape().back() == 1 && s.size() > 0 && x.size() % s.size() == 0,
          "scale_rows: scale " + to_string(s.shape()) + " incompatible with " + to_string(x.shape()));
  const std::size_t rows = s.size(), N = x.size() / rows;
  require(last_dim(x) == N, "scale_rows: scale " + to_string(s.shape()) + " incompatible with " + to_string(x.shape()));
  Tensor<Real> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < N; ++j) out[r * N + j] *= s.value()[r];
  }
  auto result = make_result(std::move(out), {&x, &s}, "scale_rows");
  if (result.requires_grad()) {
    result.node()->backward = [x, s, o = result.node(), rows, N] {
      if (x.requires_grad()) {
        auto& g = x.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < N; ++j) g[r * N + j] += o->grad[r * N + j] * s.value()[r];
        }
      }
      if (s.requires_grad()) {
        auto& g = s.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          Real acc = 0;
          for (std::size_t j = 0; j < N; ++j) acc += o->grad[r * N + j] * x.value()[r * N + j];
          g[r] += acc;
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> one_minus(const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data) v = Real(1) - v;
  auto result = make_result(std::move(out), {&x}, "one_minus");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node()] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o->grad[i];
    };
  }
  return result;
}

template <class Real>
Var<Real> relu(const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data) v = v > Real(0) ? v : Real(0);
  auto result = make_result(std::move(out), {&x}, "relu");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node()] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.value()[i] > Real(0)) g[i] += o->grad[i];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> sigmoid(const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data) {
    if (v >= Real(0)) {
      v = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      v = e / (Real(1) + e);
    }
  }
  auto result = make_result(std::move(out), {&x}, "sigmoid");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node()] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Real y = o->value[i];
        g[i] += o->grad[i] * y * (Real(1) - y);
      }
    };
  }
  return result;
}

// --- normalizations ---------------------------------------------------------------

template <class Real>
Var<Real> softmax(const Var<Real>& x, int axis, const std::vector<std::uint8_t>& mask) {
  const std::size_t rank = x.value().rank();
  require(rank >= 1, "softmax: scalar input");
  const std::size_t ax = static_cast<std::size_t>(axis < 0 ? axis + static_cast<int>(rank) : axis);
  require(ax < rank, "softmax: axis " + std::to_string(axis) + " out of range for " + to_string(x.shape()));
  require(mask.empty() || (mask.size() == x.size() && ax == rank - 1),
          "softmax: mask must cover the input and apply to the last axis");
  const std::size_t n = x.shape()[ax];
  std::size_t inner = 1;
  for (std::size_t d = ax + 1; d < rank; ++d) inner *= x.shape()[d];
  const std::size_t outer = x.size() / (n * inner);

  Tensor<Real> out(x.shape());
  const auto& in = x.value().data;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      auto keep = [&](std::size_t k) { return mask.empty() || mask[base + k * inner] != 0; };
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        if (keep(k)) mx = std::max(mx, in[base + k * inner]);
      }
      if (mx == -std::numeric_limits<Real>::infinity()) continue;  // fully masked row stays zero
      Real total = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (!keep(k)) continue;
        const Real e = std::exp(in[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= total;
    }
  }
  auto result = make_result(std::move(out), {&x}, "softmax");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), outer, n, inner] {
      auto& g = x.node()->ensure_grad();
      const auto& y = o->value.data;
      for (std::size_t oi = 0; oi < outer; ++oi) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = oi * n * inner + i;
          Real dot = 0;
          for (std::size_t k = 0; k < n; ++k) dot += o->grad[base + k * inner] * y[base + k * inner];
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t idx = base + k * inner;
            g[idx] += y[idx] * (o->grad[idx] - dot);
          }
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias, double eps) {
  const std::size_t D = last_dim(x);
  require(gain.size() == D && bias.size() == D, "layer_norm: gain/bias do not match " + to_string(x.shape()));
  const std::size_t rows = x.size() / D;
  Tensor<Real> out(x.shape());
  std::vector<Real> xhat(x.size());
  std::vector<Real> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = x.value().data.data() + r * D;
    Real mean = 0;
    for (std::size_t j = 0; j < D; ++j) mean += row[j];
    mean /= static_cast<Real>(D);
    Real var = 0;
    for (std::size_t j = 0; j < D; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<Real>(D);
    const Real inv = Real(1) / std::sqrt(var + static_cast<Real>(eps));
    inv_std[r] = inv;
    for (std::size_t j = 0; j < D; ++j) {
      const Real h = (row[j] - mean) * inv;
      xhat[r * D + j] = h;
      out[r * D + j] = h * gain.value()[j] + bias.value()[j];
    }
  }
  auto result = make_result(std::move(out), {&x, &gain, &bias}, "layer_norm");
  if (result.requires_grad()) {
    result.node()->backward = [x, gain, bias, o = result.node(), xhat = std::move(xhat),
                               inv_std = std::move(inv_std), rows, D] {
      const auto& dy = o->grad;
      if (gain.requires_grad()) {
        auto& g = gain.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < D; ++j) g[j] += dy[r * D + j] * xhat[r * D + j];
        }
      }
      if (bias.requires_grad()) {
        auto& g = bias.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < D; ++j) g[j] += dy[r * D + j];
        }
      }
      if (x.requires_grad()) {
        auto& g = x.node()->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          Real mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < D; ++j) {
            const Real d = dy[r * D + j] * gain.value()[j];
            mean_d += d;
            mean_dx += d * xhat[r * D + j];
          }
          mean_d /= static_cast<Real>(D);
          mean_dx /= static_cast<Real>(D);
          for (std::size_t j = 0; j < D; ++j) {
            const Real d = dy[r * D + j] * gain.value()[j];
            g[r * D + j] += inv_std[r] * (d - mean_d - xhat[r * D + j] * mean_dx);
          }
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> normalize_last(const Var<Real>& x) {
  const std::size_t N = last_dim(x);
  const std::size_t rows = x.size() / N;
  Tensor<Real> out = x.value();
  std::vector<Real> totals(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Real total = 0;
    for (std::size_t j = 0; j < N; ++j) total += out[r * N + j];
    totals[r] = total;
    for (std::size_t j = 0; j < N; ++j) out[r * N + j] = total != Real(0) ? out[r * N + j] / total : Real(0);
  }
  auto result = make_result(std::move(out), {&x}, "normalize_last");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), totals = std::move(totals), rows, N] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        if (totals[r] == Real(0)) continue;
        Real dot = 0;
        for (std::size_t j = 0; j < N; ++j) dot += o->grad[r * N + j] * o->value[r * N + j];
        for (std::size_t j = 0; j < N; ++j) g[r * N + j] += (o->grad[r * N + j] - dot) / totals[r];
      }
    };
  }
  return result;
}

// --- indexing and layout ---------------------------------------------------------

template <class Real>
Var<Real> embedding(const Var<Real>& table, const std::vector<std::int32_t>& ids) {
  require(table.value().rank() == 2, "embedding: table must be 2-D");
  const std::size_t V = table.shape()[0], D = table.shape()[1];
  Tensor<Real> out({ids.size(), D});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < V,
            "embedding: id " + std::to_string(ids[i]) + " out of range for " + std::to_string(V) + " rows");
    std::copy_n(table.value().data.data() + static_cast<std::size_t>(ids[i]) * D, D, out.data.data() + i * D);
  }
  auto result = make_result(std::move(out), {&table}, "embedding");
  if (result.requires_grad()) {
    result.node()->backward = [table, ids, o = result.node(), D] {
      auto& g = table.node()->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        Real* dst = g.data() + static_cast<std::size_t>(ids[i]) * D;
        const Real* src = o->grad.data() + i * D;
        for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> dropout(const Var<Real>& x, const DropoutContext* ctx) {
  if (ctx == nullptr || ctx->rate <= 0.0 || ctx->rng == nullptr) return x;
  if (ctx->rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - ctx->rate);
  const auto factor = static_cast<Real>(1.0 / (1.0 - ctx->rate));
  std::vector<Real> mask(x.size());
  for (auto& m : mask) m = keep(*ctx->rng) ? factor : Real(0);
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  auto result = make_result(std::move(out), {&x}, "dropout");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), mask = std::move(mask)] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * mask[i];
    };
  }
  return result;
}

template <class Real>
Var<Real> reshape(const Var<Real>& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  Tensor<Real> out(std::move(shape), x.value().data);
  auto result = make_result(std::move(out), {&x}, "reshape");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node()] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    };
  }
  return result;
}

template <class Real>
Var<Real> swap_middle_axes(const Var<Real>& x) {
  require(x.value().rank() == 4, "swap_middle_axes: expected 4-D input, got " + to_string(x.shape()));
  const std::size_t A = x.shape()[0], B = x.shape()[1], C = x.shape()[2], D = x.shape()[3];
  Tensor<Real> out({A, C, B, D});
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        std::copy_n(x.value().data.data() + ((a * B + b) * C + c) * D, D,
                    out.data.data() + ((a * C + c) * B + b) * D);
      }
    }
  }
  auto result = make_result(std::move(out), {&x}, "swap_middle_axes");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), A, B, C, D] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t c = 0; c < C; ++c) {
            Real* dst = g.data() + ((a * B + b) * C + c) * D;
            const Real* src = o->grad.data() + ((a * C + c) * B + b) * D;
            for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
          }
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> mean_heads(const Var<Real>& x, std::size_t heads) {
  require(x.value().rank() == 3 && heads > 0 && x.shape()[0] % heads == 0,
          "mean_heads: cannot split " + to_string(x.shape()) + " into " + std::to_string(heads) + " heads");
  const std::size_t G = x.shape()[0] / heads, slice = x.shape()[1] * x.shape()[2];
  Tensor<Real> out({G, x.shape()[1], x.shape()[2]});
  const Real inv = Real(1) / static_cast<Real>(heads);
  for (std::size_t g = 0; g < G; ++g) {
    Real* dst = out.data.data() + g * slice;
    for (std::size_t h = 0; h < heads; ++h) {
      const Real* src = x.value().data.data() + (g * heads + h) * slice;
      for (std::size_t i = 0; i < slice; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < slice; ++i) dst[i] *= inv;
  }
  auto result = make_result(std::move(out), {&x}, "mean_heads");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), G, heads, slice, inv] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t gi = 0; gi < G; ++gi) {
        for (std::size_t h = 0; h < heads; ++h) {
          Real* dst = g.data() + (gi * heads + h) * slice;
          const Real* src = o->grad.data() + gi * slice;
          for (std::size_t i = 0; i < slice; ++i) dst[i] += src[i] * inv;
        }
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> concat_last(const std::vector<Var<Real>>& parts) {
  require(!parts.empty(), "concat_last: no inputs");
  const std::size_t rows = parts.front().size() / last_dim(parts.front());
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t w = last_dim(p);
    require(p.size() / w == rows && p.value().rank() == parts.front().value().rank(),
            "concat_last: incompatible shapes " + to_string(parts.front().shape()) + " and " + to_string(p.shape()));
    widths.push_back(w);
    total += w;
  }
  Shape shape = parts.front().shape();
  shape.back() = total;
  Tensor<Real> out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(parts[k].value().data.data() + r * widths[k], widths[k], out.data.data() + r * total + offset);
    }
    offset += widths[k];
  }
  Tensor<Real> value = std::move(out);
  if (!value.all_finite()) throw NumericError("non-finite value produced by concat_last");
  // make_result takes a fixed list; concat can have any arity.
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  auto* graph = Graph<Real>::current();
  const bool tracks =
      graph != nullptr && std::any_of(parts.begin(), parts.end(), [](const Var<Real>& p) { return p.requires_grad(); });
  Var<Real> result(node);
  if (tracks) {
    node->requires_grad = true;
    graph->record(node);
    node->backward = [parts, o = node.get(), widths, rows, total] {
      std::size_t off = 0;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (parts[k].requires_grad()) {
          auto& g = parts[k].node()->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < widths[k]; ++j) g[r * widths[k] + j] += o->grad[r * total + off + j];
          }
        }
        off += widths[k];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> pad_last(const Var<Real>& x, std::size_t width) {
  const std::size_t N = last_dim(x);
  require(width >= N, "pad_last: width " + std::to_string(width) + " smaller than " + to_string(x.shape()));
  const std::size_t rows = x.size() / N;
  Shape shape = x.shape();
  shape.back() = width;
  Tensor<Real> out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.value().data.data() + r * N, N, out.data.data() + r * width);
  }
  auto result = make_result(std::move(out), {&x}, "pad_last");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node(), rows, N, width] {
      auto& g = x.node()->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < N; ++j) g[r * N + j] += o->grad[r * width + j];
      }
    };
  }
  return result;
}

template <class Real>
Var<Real> sum(const Var<Real>& x) {
  Real total = 0;
  for (Real v : x.value().data) total += v;
  auto result = make_result(Tensor<Real>({1}, {total}), {&x}, "sum");
  if (result.requires_grad()) {
    result.node()->backward = [x, o = result.node()] {
      auto& g = x.node()->ensure_grad();
      for (auto& v : g) v += o->grad[0];
    };
  }
  return result;
}

template <class Real>
Var<Real> nll_loss(const Var<Real>& probs, const std::vector<std::int32_t>& targets, const std::vector<Real>& weights,
                   double smoothing, const std::vector<std::uint8_t>& legal) {
  const std::size_t C = last_dim(probs);
  const std::size_t rows = probs.size() / C;
  require(targets.size() == rows && weights.size() == rows,
          "nll_loss: " + std::to_string(rows) + " rows but " + std::to_string(targets.size()) + " targets");
  require(smoothing == 0.0 || legal.size() == probs.size(), "nll_loss: smoothing needs a legal-token mask");
  const auto eps = static_cast<Real>(smoothing);
  constexpr Real floor = std::numeric_limits<Real>::min();
  const auto& p = probs.value().data;
  auto neg_log = [&](std::size_t idx) { return -std::log(std::max(p[idx], floor)); };

  Real total_weight = 0;
  for (Real w : weights) total_weight += w;
  std::vector<std::size_t> legal_count(rows, 0);
  Real loss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (weights[r] == Real(0)) continue;
    require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < C,
            "nll_loss: target " + std::to_string(targets[r]) + " out of range");
    Real row = (Real(1) - eps) * neg_log(r * C + static_cast<std::size_t>(targets[r]));
    if (eps > Real(0)) {
      Real acc = 0;
      for (std::size_t c = 0; c < C; ++c) {
        if (legal[r * C + c]) {
          acc += neg_log(r * C + c);
          ++legal_count[r];
        }
      }
      if (legal_count[r] > 0) row += eps * acc / static_cast<Real>(legal_count[r]);
    }
    loss += weights[r] * row;
  }
  if (total_weight > Real(0)) loss /= total_weight;
  auto result = make_result(Tensor<Real>({1}, {loss}), {&probs}, "nll_loss");
  if (result.requires_grad() && total_weight > Real(0)) {
    result.node()->backward = [probs, targets, weights, legal, legal_count = std::move(legal_count), o = result.node(),
                               rows, C, eps, total_weight] {
      auto& g = probs.node()->ensure_grad();
      const auto& pv = probs.value().data;
      const Real upstream = o->grad[0];
      auto accumulate = [&](std::size_t idx, Real coef) {
        if (pv[idx] >= floor) g[idx] -= upstream * coef / pv[idx];
      };
      for (std::size_t r = 0; r < rows; ++r) {
        if (weights[r] == Real(0)) continue;
        const Real w = weights[r] / total_weight;
        accumulate(r * C + static_cast<std::size_t>(targets[r]), w * (Real(1) - eps));
        if (eps > Real(0) && legal_count[r] > 0) {
          const Real share = w * eps / static_cast<Real>(legal_count[r]);
          for (std::size_t c = 0; c < C; ++c) {
            if (legal[r * C + c]) accumulate(r * C + c, share);
          }
        }
      }
    };
  }
  return result;
}

// --- attention --------------------------------------------------------------------

template <class Real>
AttentionResult<Real> multi_head_attention(const Var<Real>& queries, const Var<Real>& keys, const Var<Real>& values,
                                           const std::vector<std::uint8_t>& mask, std::size_t heads,
                                           const AttentionParams<Real>& params, const DropoutContext* dropout_ctx) {
  require(queries.value().rank() == 3 && keys.value().rank() == 3 && values.value().rank() == 3,
          "attention: expected (batch, length, dim) inputs");
  const std::size_t B = queries.shape()[0], Tq = queries.shape()[1], D = queries.shape()[2];
  const std::size_t Tk = keys.shape()[1];
  if (heads == 0 || D % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(D) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  require(keys.shape() == values.shape() && keys.shape()[0] == B && keys.shape()[2] == D,
          "attention: key/value shape " + to_string(keys.shape()) + " incompatible with " +
              to_string(queries.shape()));
  require(mask.size() == B * Tq * Tk, "attention: mask has " + std::to_string(mask.size()) + " entries, expected " +
                                          std::to_string(B * Tq * Tk));
  const std::size_t dh = D / heads;

  auto split = [&](const Var<Real>& x, const Var<Real>& w, const Var<Real>& b, std::size_t T) {
    auto projected = add_bias(matmul(x, w), b);
    auto grouped = swap_middle_axes(reshape(projected, {B, T, heads, dh}));
    return reshape(grouped, {B * heads, T, dh});
  };
  auto q = split(queries, params.wq, params.bq, Tq);
  auto k = split(keys, params.wk, params.bk, Tk);
  auto v = split(values, params.wv, params.bv, Tk);

  std::vector<std::uint8_t> head_mask(B * heads * Tq * Tk);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      std::copy_n(mask.begin() + static_cast<std::ptrdiff_t>(b * Tq * Tk), Tq * Tk,
                  head_mask.begin() + static_cast<std::ptrdiff_t>((b * heads + h) * Tq * Tk));
    }
  }
  auto scores = scale(bmm(q, k, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(dh)));
  auto weights = softmax(scores, -1, head_mask);
  auto context = bmm(dropout(weights, dropout_ctx), v);
  auto merged = reshape(swap_middle_axes(reshape(context, {B, heads, Tq, dh})), {B, Tq, D});
  return {add_bias(matmul(merged, params.wo), params.bo), weights};
}

// --- instantiations -------------------------------------------------------------

#define INFLECT_INSTANTIATE(R)                                                                                     \
  template class Var<R>;                                                                                           \
  template class Graph<R>;                                                                                         \
  template std::vector<Tensor<R>> gradients(Graph<R>&, const Var<R>&, const std::vector<Var<R>>&);                 \
  template Var<R> make_result(Tensor<R>, std::initializer_list<const Var<R>*>, const char*);                       \
  template Var<R> matmul(const Var<R>&, const Var<R>&);                                                            \
  template Var<R> bmm(const Var<R>&, const Var<R>&, bool);                                                         \
  template Var<R> add(const Var<R>&, const Var<R>&);                                                               \
  template Var<R> add_bias(const Var<R>&, const Var<R>&);                                                          \
  template Var<R> mul(const Var<R>&, const Var<R>&);                                                               \
  template Var<R> scale(const Var<R>&, double);                                                                    \
  template Var<R> scale_rows(const Var<R>&, const Var<R>&);                                                        \
  template Var<R> one_minus(const Var<R>&);                                                                        \
  template Var<R> relu(const Var<R>&);                                                                             \
  template Var<R> sigmoid(const Var<R>&);                                                                          \
  template Var<R> softmax(const Var<R>&, int, const std::vector<std::uint8_t>&);                                   \
  template Var<R> layer_norm(const Var<R>&, const Var<R>&, const Var<R>&, double);                                 \
  template Var<R> embedding(const Var<R>&, const std::vector<std::int32_t>&);                                      \
  template Var<R> dropout(const Var<R>&, const DropoutContext*);                                                   \
  template Var<R> reshape(const Var<R>&, Shape);                                                                   \
  template Var<R> swap_middle_axes(const Var<R>&);                                                                 \
  template Var<R> mean_heads(const Var<R>&, std::size_t);                                                          \
  template Var<R> concat_last(const std::vector<Var<R>>&);                                                         \
  template Var<R> normalize_last(const Var<R>&);                                                                   \
  template Var<R> pad_last(const Var<R>&, std::size_t);                                                            \
  template Var<R> sum(const Var<R>&);                                                                              \
  template Var<R> nll_loss(const Var<R>&, const std::vector<std::int32_t>&, const std::vector<R>&, double,          \
                           const std::vector<std::uint8_t>&);                                                      \
  template AttentionResult<R> multi_head_attention(const Var<R>&, const Var<R>&, const Var<R>&,                     \
                                                   const std::vector<std::uint8_t>&, std::size_t,                  \
                                                   const AttentionParams<R>&, const DropoutContext*);

INFLECT_INSTANTIATE(float)
INFLECT_INSTANTIATE(double)

#undef INFLECT_INSTANTIATE

}  // namespace inflect::nn
