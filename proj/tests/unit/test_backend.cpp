#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "inflect/autograd.hpp"
#include "inflect/errors.hpp"
#include "inflect/optimizer.hpp"

using namespace inflect;
using namespace inflect::nn;
using inflect::testing::check_gradients;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

Var<double> param(Shape shape, std::mt19937_64& rng) { return Var<double>::parameter(random_tensor(shape, rng)); }

// Reduces any tensor to a scalar with fixed random weights so every output
// entry reaches the gradient.
Var<double> weighted_sum(const Var<double>& x, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return sum(mul(x, Var<double>::constant(random_tensor(x.shape(), rng))));
}

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
  return c;
}

}  // namespace

TEST_CASE("matmul against identity, zero and a triple loop") {
  std::mt19937_64 rng(1);
  const auto a = random_tensor({5, 4}, rng);
  Tensor<double> eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  CHECK(matmul(Var<double>::constant(a), Var<double>::constant(eye)).value() == a);
  const auto zero = matmul(Var<double>::constant(a), Var<double>::constant(Tensor<double>({4, 3})));
  for (double v : zero.value().data) CHECK(v == 0.0);

  const auto b = random_tensor({4, 3}, rng);
  const auto c = matmul(Var<double>::constant(a), Var<double>::constant(b));
  CHECK(c.shape() == Shape{5, 3});
  const auto oracle = naive_matmul(a.data, b.data, 5, 4, 3);
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(c.value()[i] == doctest::Approx(oracle[i]).epsilon(1e-12));

  const auto af = a.cast<float>(), bf = b.cast<float>();
  const auto cf = matmul(Var<float>::constant(af), Var<float>::constant(bf));
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(cf.value()[i] - oracle[i]) < 1e-6);
}

TEST_CASE("matmul batches over leading dimensions and rejects bad shapes") {
  std::mt19937_64 rng(2);
  const auto a = random_tensor({2, 3, 4}, rng), b = random_tensor({4, 5}, rng);
  const auto c = matmul(Var<double>::constant(a), Var<double>::constant(b));
  CHECK(c.shape() == Shape{2, 3, 5});
  const auto oracle = naive_matmul(a.data, b.data, 6, 4, 5);
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(c.value()[i] == doctest::Approx(oracle[i]));
  try {
    matmul(Var<double>::constant(a), Var<double>::constant(random_tensor({3, 5}, rng)));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2, 3, 4)") != std::string::npos);
    CHECK(msg.find("(3, 5)") != std::string::npos);
  }
}

TEST_CASE("a row's product does not depend on the other rows in the batch") {
  std::mt19937_64 rng(3);
  const auto a = random_tensor({7, 16}, rng).cast<float>(), b = random_tensor({16, 9}, rng).cast<float>();
  const auto full = matmul(Var<float>::constant(a), Var<float>::constant(b));
  for (std::size_t r = 0; r < 7; ++r) {
    Tensor<float> row({1, 16}, std::vector<float>(a.data.begin() + r * 16, a.data.begin() + (r + 1) * 16));
    const auto single = matmul(Var<float>::constant(row), Var<float>::constant(b));
    for (std::size_t j = 0; j < 9; ++j) CHECK(single.value()[j] == full.value()[r * 9 + j]);
  }
}

TEST_CASE("bmm and its transposed form") {
  std::mt19937_64 rng(4);
  const auto a = random_tensor({3, 2, 4}, rng), b = random_tensor({3, 4, 5}, rng), bt = random_tensor({3, 5, 4}, rng);
  const auto c = bmm(Var<double>::constant(a), Var<double>::constant(b));
  const auto ct = bmm(Var<double>::constant(a), Var<double>::constant(bt), true);
  for (std::size_t g = 0; g < 3; ++g) {
    std::vector<double> ag(a.data.begin() + g * 8, a.data.begin() + (g + 1) * 8);
    std::vector<double> bg(b.data.begin() + g * 20, b.data.begin() + (g + 1) * 20);
    std::vector<double> btg(20);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) btg[i * 5 + j] = bt.data[g * 20 + j * 4 + i];
    const auto o = naive_matmul(ag, bg, 2, 4, 5), ot = naive_matmul(ag, btg, 2, 4, 5);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(c.value()[g * 10 + i] == doctest::Approx(o[i]));
      CHECK(ct.value()[g * 10 + i] == doctest::Approx(ot[i]));
    }
  }
}

TEST_CASE("softmax values") {
  auto uniform = softmax(Var<double>::constant(Tensor<double>({4})));
  for (double v : uniform.value().data) CHECK(v == doctest::Approx(0.25));
  auto forced = softmax(Var<double>::constant(Tensor<double>({3}, {std::log(2.0), 0.0, 0.0})));
  CHECK(forced.value()[0] == doctest::Approx(0.5));
  CHECK(forced.value()[1] == doctest::Approx(0.25));
  CHECK(forced.value()[2] == doctest::Approx(0.25));

  std::mt19937_64 rng(5);
  const auto x = random_tensor({50}, rng, -20.0, 20.0);
  const auto y = softmax(Var<float>::constant(x.cast<float>()));
  long double z = 0;
  for (double v : x.data) z += std::exp(static_cast<long double>(v));
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::abs(static_cast<long double>(y.value()[i]) - std::exp(static_cast<long double>(x.data[i])) / z) < 1e-6);
  }
  // large logits stay finite thanks to max subtraction
  const auto big = softmax(Var<float>::constant(Tensor<float>({2}, {1000.0f, 999.0f})));
  CHECK(big.value().all_finite());
}

TEST_CASE("softmax sums to one along any axis of random shapes") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<std::size_t> d(1, 5);
    const Shape shape{d(rng), d(rng), d(rng)};
    const auto x = Var<float>::constant(random_tensor(shape, rng, -10, 10).cast<float>());
    for (int axis = 0; axis < 3; ++axis) {
      const auto y = softmax(x, axis);
      const std::size_t n = shape[axis];
      std::size_t inner = 1;
      for (std::size_t k = axis + 1; k < 3; ++k) inner *= shape[k];
      const std::size_t outer = y.size() / (n * inner);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < n; ++j) s += y.value()[(o * n + j) * inner + i];
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("masked softmax") {
  const auto x = Var<double>::constant(Tensor<double>({2, 3}, {5.0, 1.0, -2.0, 0.0, 0.0, 0.0}));
  const auto y = softmax(x, -1, {0, 1, 0, 0, 0, 0});
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 1.0);
  CHECK(y.value()[2] == 0.0);
  for (int i = 3; i < 6; ++i) CHECK(y.value()[i] == 0.0);
}

TEST_CASE("attention on one position with identity projections returns the value") {
  const std::size_t D = 3;
  Tensor<double> eye({D, D});
  for (std::size_t i = 0; i < D; ++i) eye[i * D + i] = 1.0;
  AttentionParams<double> p;
  p.wq = p.wk = p.wv = p.wo = Var<double>::constant(eye);
  p.bq = p.bk = p.bv = p.bo = Var<double>::constant(Tensor<double>({D}));
  const auto q = Var<double>::constant(Tensor<double>({1, 1, D}, {0.3, -0.2, 0.9}));
  const auto v = Var<double>::constant(Tensor<double>({1, 1, D}, {1.0, 2.0, 3.0}));
  const auto r = multi_head_attention(q, v, v, {1}, 1, p, nullptr);
  CHECK(r.output.value() == v.value());
  CHECK(r.weights.value()[0] == 1.0);
}

TEST_CASE("attention mask pins the weight to the only allowed key") {
  std::mt19937_64 rng(8);
  const std::size_t D = 4;
  AttentionParams<double> p{param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng),
                            param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng)};
  const auto q = Var<double>::constant(random_tensor({1, 2, D}, rng));
  const auto kv = Var<double>::constant(random_tensor({1, 3, D}, rng));
  const auto r = multi_head_attention(q, kv, kv, {0, 0, 1, 0, 0, 1}, 2, p, nullptr);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t t = 0; t < 2; ++t) {
      CHECK(r.weights.value()[(h * 2 + t) * 3 + 2] == doctest::Approx(1.0));
    }
  }
  CHECK_THROWS_AS(multi_head_attention(q, kv, kv, {1, 1, 1, 1, 1, 1}, 3, p, nullptr), ConfigError);
}

TEST_CASE("multi-head attention matches the direct formula") {
  std::mt19937_64 rng(9);
  const std::size_t B = 2, Tq = 3, Tk = 4, D = 6, H = 2, dh = D / H;
  AttentionParams<double> p{param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng),
                            param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng)};
  const auto q = random_tensor({B, Tq, D}, rng), k = random_tensor({B, Tk, D}, rng), v = random_tensor({B, Tk, D}, rng);
  std::vector<std::uint8_t> mask(B * Tq * Tk, 1);
  mask[1] = 0;
  mask[B * Tq * Tk - 1] = 0;
  const auto r = multi_head_attention(Var<double>::constant(q), Var<double>::constant(k), Var<double>::constant(v),
                                      mask, H, p, nullptr);

  auto project = [&](const Tensor<double>& x, std::size_t T, const Var<double>& w, const Var<double>& b) {
    std::vector<double> out(B * T * D);
    for (std::size_t r = 0; r < B * T; ++r)
      for (std::size_t j = 0; j < D; ++j) {
        double s = b.value()[j];
        for (std::size_t i = 0; i < D; ++i) s += x.data[r * D + i] * w.value()[i * D + j];
        out[r * D + j] = s;
      }
    return out;
  };
  const auto Q = project(q, Tq, p.wq, p.bq), K = project(k, Tk, p.wk, p.bk), V = project(v, Tk, p.wv, p.bv);
  std::vector<double> concat(B * Tq * D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < Tq; ++i) {
        std::vector<double> score(Tk);
        double mx = -1e300;
        for (std::size_t j = 0; j < Tk; ++j) {
          double s = 0;
          for (std::size_t d = 0; d < dh; ++d) s += Q[(b * Tq + i) * D + h * dh + d] * K[(b * Tk + j) * D + h * dh + d];
          score[j] = s / std::sqrt(double(dh));
          if (mask[(b * Tq + i) * Tk + j]) mx = std::max(mx, score[j]);
        }
        double z = 0;
        for (std::size_t j = 0; j < Tk; ++j) {
          score[j] = mask[(b * Tq + i) * Tk + j] ? std::exp(score[j] - mx) : 0.0;
          z += score[j];
        }
        for (std::size_t j = 0; j < Tk; ++j) {
          const double w = score[j] / z;
          CHECK(std::abs(r.weights.value()[((b * H + h) * Tq + i) * Tk + j] - w) < 1e-12);
          for (std::size_t d = 0; d < dh; ++d) concat[(b * Tq + i) * D + h * dh + d] += w * V[(b * Tk + j) * D + h * dh + d];
        }
      }
  Tensor<double> merged({B, Tq, D}, concat);
  const auto expected = project(merged, Tq, p.wo, p.bo);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(r.output.value()[i] - expected[i]) < 1e-5);
}

TEST_CASE("analytic gradients") {
  std::mt19937_64 rng(10);
  auto x = param({5}, rng);
  auto unused = param({3}, rng);
  Graph<double> g;
  const auto grads = gradients(g, sum(mul(x, x)), {x, unused});
  for (std::size_t i = 0; i < 5; ++i) CHECK(grads[0][i] == doctest::Approx(2 * x.value()[i]));
  for (double v : grads[1].data) CHECK(v == 0.0);
  CHECK(grads[1].shape == unused.shape());
  CHECK_THROWS_AS(g.backward(mul(x, x)), ShapeError);
}

TEST_CASE("two-layer network passes a finite-difference check") {
  std::mt19937_64 rng(11);
  auto w1 = param({4, 6}, rng), b1 = param({6}, rng), w2 = param({6, 3}, rng), b2 = param({3}, rng);
  const auto x = Var<double>::constant(random_tensor({5, 4}, rng));
  const auto r = check_gradients({{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}}, [&] {
    auto h = sigmoid(add_bias(matmul(x, w1), b1));
    auto p = softmax(add_bias(matmul(h, w2), b2));
    return nll_loss(p, {0, 2, 1, 1, 0}, std::vector<double>(5, 1.0));
  });
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("every operation passes a finite-difference check") {
  std::mt19937_64 rng(12);
  auto check = [](const char* name, std::vector<std::pair<std::string, Var<double>>> params,
                  std::function<Var<double>()> f) {
    const auto r = check_gradients(params, f);
    INFO(name << " worst " << r.worst << " abs " << r.max_absolute_error);
    CHECK(r.max_relative_error < 1e-5);
  };
  auto a = param({2, 3, 4}, rng), b = param({2, 4, 5}, rng), bt = param({2, 5, 4}, rng), m = param({4, 5}, rng);
  auto same = param({2, 3, 4}, rng), bias = param({4}, rng), s = param({2, 3, 1}, rng);
  auto positive = Var<double>::parameter(random_tensor({2, 3, 4}, rng, 0.1, 1.0));
  auto gain = param({4}, rng);
  auto table = param({6, 4}, rng);

  check("matmul", {{"a", a}, {"m", m}}, [&] { return weighted_sum(matmul(a, m)); });
  check("bmm", {{"a", a}, {"b", b}}, [&] { return weighted_sum(bmm(a, b)); });
  check("bmm_t", {{"a", a}, {"bt", bt}}, [&] { return weighted_sum(bmm(a, bt, true)); });
  check("add", {{"a", a}, {"same", same}}, [&] { return weighted_sum(add(a, same)); });
  check("add_bias", {{"a", a}, {"bias", bias}}, [&] { return weighted_sum(add_bias(a, bias)); });
  check("mul", {{"a", a}, {"same", same}}, [&] { return weighted_sum(mul(a, same)); });
  check("scale", {{"a", a}}, [&] { return weighted_sum(scale(a, -1.7)); });
  check("scale_rows", {{"a", a}, {"s", s}}, [&] { return weighted_sum(scale_rows(a, s)); });
  check("one_minus", {{"a", a}}, [&] { return weighted_sum(one_minus(a)); });
  check("relu", {{"a", a}}, [&] { return weighted_sum(relu(a)); });
  check("sigmoid", {{"a", a}}, [&] { return weighted_sum(sigmoid(a)); });
  check("softmax", {{"a", a}}, [&] { return weighted_sum(softmax(a)); });
  check("softmax_axis1", {{"a", a}}, [&] { return weighted_sum(softmax(a, 1)); });
  std::vector<std::uint8_t> keep(24, 1);
  keep[0] = keep[5] = keep[23] = 0;
  check("softmax_masked", {{"a", a}}, [&] { return weighted_sum(softmax(a, -1, keep)); });
  check("layer_norm", {{"a", a}, {"gain", gain}, {"bias", bias}},
        [&] { return weighted_sum(layer_norm(a, gain, bias)); });
  check("embedding", {{"table", table}}, [&] { return weighted_sum(embedding(table, {0, 3, 3, 5})); });
  check("reshape", {{"a", a}}, [&] { return weighted_sum(reshape(a, {6, 4})); });
  check("swap", {{"a", a}}, [&] { return weighted_sum(swap_middle_axes(reshape(a, {1, 2, 3, 4}))); });
  check("mean_heads", {{"a", a}}, [&] { return weighted_sum(mean_heads(a, 2)); });
  check("concat", {{"a", a}, {"same", same}}, [&] { return weighted_sum(concat_last<double>({a, same, a})); });
  check("normalize", {{"positive", positive}}, [&] { return weighted_sum(normalize_last(positive)); });
  check("pad", {{"a", a}}, [&] { return weighted_sum(pad_last(a, 7)); });
  check("sum", {{"a", a}}, [&] { return scale(sum(a), 0.5); });
  check("nll", {{"positive", positive}}, [&] {
    return nll_loss(normalize_last(positive), {0, 3, 1, 2, 2, 1}, {1.0, 2.0, 0.0, 1.0, 1.0, 0.5});
  });
  std::vector<std::uint8_t> legal(24, 1);
  legal[1] = legal[6] = 0;
  check("nll_smoothed", {{"positive", positive}}, [&] {
    return nll_loss(normalize_last(positive), {0, 3, 1, 2, 2, 1}, std::vector<double>(6, 1.0), 0.1, legal);
  });
}

TEST_CASE("attention gradients pass a finite-difference check") {
  std::mt19937_64 rng(13);
  const std::size_t D = 4;
  AttentionParams<double> p{param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng),
                            param({D, D}, rng), param({D}, rng), param({D, D}, rng), param({D}, rng)};
  auto q = param({2, 3, D}, rng), kv = param({2, 2, D}, rng);
  std::vector<std::uint8_t> mask(12, 1);
  mask[3] = 0;
  const auto r = check_gradients({{"wq", p.wq}, {"bq", p.bq}, {"wk", p.wk}, {"wv", p.wv}, {"bv", p.bv},
                                  {"wo", p.wo}, {"bo", p.bo}, {"q", q}, {"kv", kv}},
                                 [&] { return weighted_sum(multi_head_attention(q, kv, kv, mask, 2, p, nullptr).output); });
  CHECK(r.max_relative_error < 1e-5);
}

TEST_CASE("nll_loss values") {
  const auto p = Var<double>::constant(Tensor<double>({2, 2}, {0.5, 0.5, 0.25, 0.75}));
  CHECK(nll_loss(p, {0, 1}, {1.0, 1.0}).value()[0] == doctest::Approx((std::log(2.0) - std::log(0.75)) / 2));
  CHECK(nll_loss(p, {0, 1}, {1.0, 0.0}).value()[0] == doctest::Approx(std::log(2.0)));
  const auto one = Var<double>::constant(Tensor<double>({1, 3}, {0.0, 1.0, 0.0}));
  CHECK(nll_loss(one, {1}, {1.0}).value()[0] == 0.0);
  // a zero-probability gold token is floored, not infinite
  CHECK(std::isfinite(nll_loss(one, {0}, {1.0}).value()[0]));
}

TEST_CASE("non-finite results raise NumericError") {
  const auto x = Var<float>::constant(Tensor<float>({2}, {1e30f, 1.0f}));
  CHECK_THROWS_AS(scale(x, 1e10), NumericError);
  CHECK_THROWS_AS(mul(x, x), NumericError);
}

TEST_CASE("nothing is recorded without a live graph") {
  std::mt19937_64 rng(14);
  auto x = param({3}, rng);
  const auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  Graph<double> g;
  const auto z = mul(x, x);
  CHECK(z.requires_grad());
  CHECK(g.size() > 0);
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(15);
  const auto x = Var<double>::constant(Tensor<double>({1000}, 1.0));
  CHECK(dropout(x, nullptr).value() == x.value());
  const DropoutContext ctx{0.25, &rng};
  const auto y = dropout(x, &ctx);
  std::size_t zeros = 0;
  for (double v : y.value().data) {
    if (v == 0.0) ++zeros;
    else CHECK(v == doctest::Approx(1.0 / 0.75));
  }
  CHECK(zeros > 180);
  CHECK(zeros < 320);
}

TEST_CASE("adam step") {
  auto p = Var<double>::parameter(Tensor<double>({1}, {1.0}));
  std::vector<Var<double>> params{p};
  auto state = make_optimizer_state(params);
  adam_step(state, params, {Tensor<double>({1}, {1.0})}, 0.1);
  // m = 0.1, v = 0.001; bias-corrected both give 1, so the step is lr * 1 / (1 + eps)
  CHECK(p.value()[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 1);

  auto q = Var<double>::parameter(Tensor<double>({2}, {0.5, -2.0}));
  std::vector<Var<double>> qs{q};
  auto s2 = make_optimizer_state(qs);
  adam_step(s2, qs, {Tensor<double>({2}, {0.0, 0.0})}, 0.1);
  CHECK(q.value()[0] == 0.5);
  CHECK(q.value()[1] == -2.0);
  adam_step(s2, qs, {Tensor<double>({2}, {3.0, -1.0})}, 0.0);
  CHECK(q.value()[0] == 0.5);
  CHECK(s2.step == 2);
  CHECK_THROWS_AS(adam_step(s2, qs, {Tensor<double>({3})}, 0.1), ShapeError);
}

TEST_CASE("adam matches a hand-rolled recurrence over several steps") {
  const std::vector<double> g = {0.3, -1.2, 0.05, 2.0, -0.7};
  auto p = Var<double>::parameter(Tensor<double>({1}, {0.4}));
  std::vector<Var<double>> params{p};
  auto state = make_optimizer_state(params);
  double x = 0.4, m = 0, v = 0;
  for (std::size_t t = 1; t <= g.size(); ++t) {
    adam_step(state, params, {Tensor<double>({1}, {g[t - 1]})}, 0.01);
    m = 0.9 * m + 0.1 * g[t - 1];
    v = 0.999 * v + 0.001 * g[t - 1] * g[t - 1];
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.value()[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("gradient clipping and the learning-rate schedule") {
  std::vector<Tensor<double>> grads{Tensor<double>({2}, {3.0, 0.0}), Tensor<double>({1}, {4.0})};
  CHECK(clip_grad_norm(grads, 1.0) == doctest::Approx(5.0));
  CHECK(grads[0][0] == doctest::Approx(0.6));
  CHECK(grads[1][0] == doctest::Approx(0.8));
  std::vector<Tensor<double>> small{Tensor<double>({1}, {0.5})};
  clip_grad_norm(small, 1.0);
  CHECK(small[0][0] == 0.5);
  std::vector<Tensor<double>> off{Tensor<double>({1}, {50.0})};
  clip_grad_norm(off, 0.0);
  CHECK(off[0][0] == 50.0);

  const LearningRateSchedule lr{1e-3, 400};
  CHECK(lr.at(200) == doctest::Approx(5e-4));
  CHECK(lr.at(400) == doctest::Approx(1e-3));
  CHECK(lr.at(1600) == doctest::Approx(5e-4));
  for (std::uint64_t s = 1; s < 400; ++s) CHECK(lr.at(s) < lr.at(s + 1));
  for (std::uint64_t s = 400; s < 1000; ++s) CHECK(lr.at(s) > lr.at(s + 1));
}
