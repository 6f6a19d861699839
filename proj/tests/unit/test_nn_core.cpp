#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "qfx/error.hpp"
#include "qfx/nn_core.hpp"

using namespace qfx;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("dense forward and backward") {
  DenseLayer id(3, 3);
  for (std::size_t i = 0; i < 3; ++i) id.w(i, i) = 1.0;
  const std::vector<double> x{1.5, -2.0, 0.25};
  CHECK(dense_forward(id, x) == x);

  const auto zero = dense_backward(id, x, std::vector<double>(3, 0.0));
  for (double g : zero.weights) CHECK(g == 0.0);
  for (double g : zero.bias) CHECK(g == 0.0);
  for (double g : zero.input) CHECK(g == 0.0);

  Rng rng(5);
  DenseLayer layer(10, 8);
  init_glorot(layer, rng);
  for (double& b : layer.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  const auto in = random_vec(10, rng);
  const auto up = random_vec(8, rng);
  auto objective = [&](const DenseLayer& l, const std::vector<double>& v) {
    const auto y = dense_forward(l, v);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += up[k] * y[k];
    return s;
  };
  const auto g = dense_backward(layer, in, up);
  std::vector<double> flat;
  append_params(layer, flat);
  const auto fd = oracle::central_difference(
      [&](const std::vector<double>& p) {
        DenseLayer l = layer;
        read_params(l, p, 0);
        return objective(l, in);
      },
      flat);
  std::vector<double> analytic = g.weights;
  analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
  CHECK(oracle::max_abs_diff(analytic, fd) <= 1e-6);
  const auto fdx = oracle::central_difference([&](const std::vector<double>& v) { return objective(layer, v); }, in);
  CHECK(oracle::max_abs_diff(g.input, fdx) <= 1e-6);

  CHECK_THROWS(dense_forward(layer, std::vector<double>(9, 0.0)));
  CHECK_THROWS(dense_backward(layer, in, std::vector<double>(7, 0.0)));
}

TEST_CASE("glorot and angle initialisation ranges") {
  Rng rng(1);
  DenseLayer l(10, 8);
  init_glorot(l, rng);
  const double bound = std::sqrt(6.0 / 18.0);
  for (double w : l.weights) CHECK(std::abs(w) <= bound);
  for (double b : l.bias) CHECK(b == 0.0);
  std::vector<double> a(100);
  init_angles(a, rng);
  for (double t : a) CHECK((t >= 0.0 && t < 2.0 * 3.141592653589793));
}

TEST_CASE("activations") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::tanh(0.0) == 0.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  const auto half = softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0));
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const auto p = softmax(random_vec(5, rng, -1e4, 1e4));
    double s = 0.0;
    for (double v : p) {
      CHECK(std::isfinite(v));
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("weighted cross-entropy") {
  CHECK(weighted_cross_entropy(std::vector<double>{1.0, 0.0}, 0, std::vector<double>{1.0, 1.0}).loss ==
        doctest::Approx(0.0).epsilon(1e-11));
  CHECK(weighted_cross_entropy(std::vector<double>{0.5, 0.5}, 1, std::vector<double>{1.0, 2.0}).loss ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-11));
  CHECK_THROWS(weighted_cross_entropy(std::vector<double>{0.5, 0.5}, 2, std::vector<double>{1.0, 1.0}));

  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto logits = random_vec(3, rng, -3.0, 3.0);
    const std::size_t label = static_cast<std::size_t>(k % 3);
    const std::vector<double> w{0.7, 1.3, 2.0};
    const auto r = weighted_cross_entropy(softmax(logits), label, w);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& z) { return weighted_cross_entropy(softmax(z), label, w).loss; }, logits);
    CHECK(oracle::max_abs_diff(r.grad_logits, fd) <= 1e-6);
  }
}

TEST_CASE("optimizers") {
  SUBCASE("zero gradient and zero lr are identities") {
    std::vector<double> p{1.0, -2.0};
    RmsProp rms(2);
    rms.step(p, std::vector<double>{0.0, 0.0});
    CHECK(p == std::vector<double>{1.0, -2.0});
    Adam adam(2, 0.0);
    adam.step(p, std::vector<double>{0.3, -0.4});
    CHECK(p == std::vector<double>{1.0, -2.0});
    RmsProp frozen(2, 0.0);
    frozen.step(p, std::vector<double>{0.3, -0.4});
    CHECK(p == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("constant gradient descends") {
    std::vector<double> p{0.0};
    Adam adam(1, 1e-3);
    RmsProp rms(1);
    std::vector<double> q{0.0};
    for (int k = 0; k < 100; ++k) {
      adam.step(p, std::vector<double>{2.0});
      rms.step(q, std::vector<double>{-2.0});
    }
    CHECK(p[0] < 0.0);
    CHECK(q[0] > 0.0);
  }
  SUBCASE("RMSprop on w^2 from w=1") {
    std::vector<double> w{1.0};
    RmsProp rms(1);
    int steps = 0;
    while (std::abs(w[0]) >= 1e-3 && steps < 10'000) {
      rms.step(w, std::vector<double>{2.0 * w[0]});
      ++steps;
    }
    CHECK(std::abs(w[0]) < 1e-3);
    MESSAGE("converged after " << steps << " steps");
  }
  SUBCASE("Adam matches the textbook recurrence") {
    std::vector<double> p{0.5};
    Adam adam(1, 0.1);
    double m = 0.0, v = 0.0, ref = 0.5;
    for (int t = 1; t <= 5; ++t) {
      const double g = 0.3 * t;
      adam.step(p, std::vector<double>{g});
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
    }
  }
  SUBCASE("non-finite gradients are skipped and counted") {
    std::vector<double> p{1.0, 2.0};
    Adam adam(2, 0.1);
    CHECK(adam.step(p, std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 1.0}) ==
          StepStatus::kSkippedNonFinite);
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(adam.skipped() == 1);
    CHECK(adam.steps() == 0);
    RmsProp rms(2);
    CHECK(rms.step(p, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}) ==
          StepStatus::kSkippedNonFinite);
    CHECK(rms.skipped() == 1);
    for (double s : rms.square_avg()) CHECK(s == 0.0);
  }
}

TEST_CASE("parameter accounting") {
  CHECK(classical_params(DenseLayer(10, 8)) == ParamCount{0, 88});
  ParamCount c{16, 0};
  c += classical_params(DenseLayer(8, 3));
  CHECK(c.total() == 43);
}

TEST_CASE("checkpoint encoding") {
  Checkpoint ck{{{"kind", "test"}, {"n", 3}}, {1.0, -0.0, 1e-300}};
  const auto bytes = encode_checkpoint(ck);
  REQUIRE(bytes.size() > 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "QFX1");
  const auto back = decode_checkpoint(bytes);
  CHECK(back.header == ck.header);
  CHECK(back.params == ck.params);
  CHECK(std::signbit(back.params[1]));

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), ValidationError);
  const std::vector<unsigned char> truncated(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), ValidationError);

  const auto path = std::filesystem::temp_directory_path() / "qfx_ck_test.qfx";
  save_checkpoint(ck, path);
  CHECK(load_checkpoint(path).params == ck.params);
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
