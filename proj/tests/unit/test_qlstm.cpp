#include <doctest.h>

#include <cmath>
#include <random>

#include "qfx/error.hpp"
#include "qfx/qlstm.hpp"
#include "selftest.hpp"

using namespace qfx;

namespace {

ForecastSample random_sample(Rng& rng, Direction label) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ForecastSample s;
  s.window.assign(4, std::vector<double>(6));
  for (auto& row : s.window)
    for (double& x : row) x = u(rng);
  s.label = label;
  return s;
}

// Up iff the close feature of the last row exceeds 0.5, kept away from the boundary.
std::vector<ForecastSample> separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ForecastSample> out;
  while (out.size() < n) {
    ForecastSample s = random_sample(rng, Direction::kUp);
    const double c = s.window.back()[3];
    if (std::abs(c - 0.5) < 0.1) continue;
    s.label = c > 0.5 ? Direction::kUp : Direction::kDown;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("parameter layout") {
  const QlstmConfig cfg;
  const auto p = QlstmParams::zeros(cfg);
  // Per gate: 8x4+4, 4x2 angles, 4x2+2; head 2x2+2.
  CHECK(p.size() == 4 * (36 + 8 + 10) + 6);
  CHECK(p.count() == ParamCount{32, 190});
  Rng rng(1);
  const auto r = QlstmParams::random(cfg, rng);
  auto q = QlstmParams::zeros(cfg);
  q.unflatten(r.flatten());
  CHECK(q.flatten() == r.flatten());
  CHECK_THROWS(q.unflatten(std::vector<double>(3, 0.0)));
}

TEST_CASE("constant-gate algebra") {
  const QlstmConfig cfg;
  const auto p = QlstmParams::zeros(cfg);
  const CellState prev{{0.4, -0.8}, {1.2, -0.6}};
  const auto next = cell_forward(std::vector<double>(6, 0.3), prev, p);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(next.c[k] == doctest::Approx(0.5 * prev.c[k]).epsilon(1e-15));
    CHECK(next.h[k] == doctest::Approx(0.5 * std::tanh(0.5 * prev.c[k])).epsilon(1e-15));
  }
  const auto probs = sequence_forward(std::vector<std::vector<double>>(4, std::vector<double>(6, 0.7)), p);
  CHECK(probs[0] == 0.5);
  CHECK(probs[1] == 0.5);
}

TEST_CASE("forward properties") {
  const QlstmConfig cfg;
  Rng rng(2);
  const auto p = QlstmParams::random(cfg, rng);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_sample(rng, Direction::kUp);
    const auto state = cell_forward(s.window[0], zero_cell_state(cfg), p);
    for (double h : state.h) CHECK(std::abs(h) <= 1.0);
    const auto probs = sequence_forward(s.window, p);
    CHECK(std::abs(probs[0] + probs[1] - 1.0) <= 1e-9);
    CHECK((probs[0] > 0.0 && probs[1] > 0.0));
  }
  std::vector<std::vector<double>> same(4, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  std::vector<std::vector<double>> distinct = same;
  for (std::size_t t = 0; t < 4; ++t) distinct[t][3] = 0.2 * static_cast<double>(t);
  CHECK(sequence_forward(same, p) != sequence_forward(distinct, p));
  CHECK_THROWS(sequence_forward(std::vector<std::vector<double>>(3, std::vector<double>(6, 0.0)), p));
  CHECK_THROWS(sequence_forward(std::vector<std::vector<double>>(4, std::vector<double>(5, 0.0)), p));
}

TEST_CASE("BPTT gradients match finite differences") {
  const auto r = checks::qlstm_gradients(3, 99);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("class weights") {
  Rng rng(3);
  std::vector<ForecastSample> ds;
  for (int k = 0; k < 3; ++k) ds.push_back(random_sample(rng, Direction::kUp));
  ds.push_back(random_sample(rng, Direction::kDown));
  const auto w = inverse_frequency_weights(ds);
  CHECK(w[0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[1] == doctest::Approx(2.0));
  ds.pop_back();
  CHECK_THROWS_AS(inverse_frequency_weights(ds), ValidationError);
  CHECK_THROWS_AS(train_qlstm(ds, {}, QlstmConfig{}), ValidationError);

  // Weights shape the loss, never the prediction.
  const auto p = QlstmParams::random(QlstmConfig{}, rng);
  const auto s = random_sample(rng, Direction::kUp);
  const auto a = qlstm_loss_and_grad(p, s, std::vector<double>{1.0, 1.0});
  const auto b = qlstm_loss_and_grad(p, s, std::vector<double>{2.0, 1.0});
  CHECK(a.probs == b.probs);
  CHECK(b.loss == doctest::Approx(2.0 * a.loss));
}

TEST_CASE("training") {
  QlstmConfig cfg;
  SUBCASE("zero learning rate leaves parameters unchanged") {
    cfg.lr = 0.0;
    cfg.epochs = 2;
    const auto train = separable(20, 4);
    const auto r = train_qlstm(train, {}, cfg);
    Rng init(cfg.init_seed);
    CHECK(r.params.flatten() == QlstmParams::random(cfg, init).flatten());
    REQUIRE(r.history.size() == 2);
    CHECK(r.history[0].loss == doctest::Approx(r.history[1].loss).epsilon(1e-12));
    CHECK(std::isnan(r.history[0].test_acc));
  }
  SUBCASE("deterministic under a fixed seed") {
    cfg.epochs = 2;
    const auto train = separable(20, 5);
    const auto a = train_qlstm(train, train, cfg);
    const auto b = train_qlstm(train, train, cfg);
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.history.back().loss == b.history.back().loss);
  }
}

TEST_CASE("frozen forecaster") {
  Forecaster empty;
  CHECK_FALSE(empty.loaded());
  CHECK_THROWS(empty.params());
  CHECK_THROWS(empty.predict(std::vector<std::vector<double>>(4, std::vector<double>(6, 0.0))));

  Rng rng(6);
  const auto p = QlstmParams::random(QlstmConfig{}, rng);
  const Forecaster f(p);
  const auto bytes = encode_checkpoint(f.to_checkpoint());
  const auto s = random_sample(rng, Direction::kUp);
  const auto first = f.predict(s.window);
  CHECK(first == sequence_forward(s.window, p));
  for (int k = 0; k < 1000; ++k) CHECK(f.predict(s.window) == first);
  CHECK(encode_checkpoint(f.to_checkpoint()) == bytes);

  const auto g = Forecaster::from_checkpoint(decode_checkpoint(bytes));
  CHECK(g.predict(s.window) == first);
  Checkpoint wrong = f.to_checkpoint();
  wrong.header["kind"] = "qa3c";
  CHECK_THROWS_AS(Forecaster::from_checkpoint(wrong), ValidationError);
}
