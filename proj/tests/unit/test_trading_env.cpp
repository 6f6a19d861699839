#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "qfx/error.hpp"
#include "qfx/trading_env.hpp"
#include "selftest.hpp"
#include "support.hpp"

using namespace qfx;

namespace {

// 60 flat bars at 100 followed by `tail`.
std::vector<double> flat_then(std::vector<double> tail) {
  std::vector<double> closes(60, 100.0);
  closes.insert(closes.end(), tail.begin(), tail.end());
  return closes;
}

}  // namespace

TEST_CASE("reward table") {
  const auto r = checks::reward_table(1'000'000, 8);
  CHECK_MESSAGE(r.pass, r.detail);
  const EnvConfig cfg;
  RewardContext gain{Action::kHold, true, false, 0.0, 0.3, true};
  CHECK(compute_reward(cfg, gain).holding_term == 0.0);
  RewardContext counter{Action::kBuy, true, false, 0.0, 0.0, false};
  CHECK(compute_reward(cfg, counter).total == doctest::Approx(-2.02));
  RewardContext invalid_sell{Action::kSell, false, false, 0.0, 0.0, false};
  CHECK(compute_reward(cfg, invalid_sell).entry_term == -0.1);
  CHECK(compute_reward(cfg, invalid_sell).exit_term == 0.0);
}

TEST_CASE("config validation") {
  EnvConfig c;
  c.clip_low = 40.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  EnvConfig n;
  n.time_cost = -1.0;
  CHECK_THROWS_AS(n.validate(), ValidationError);
  EnvConfig z;
  z.initial_capital = 0.0;
  CHECK_THROWS_AS(z.validate(), ValidationError);
}

TEST_CASE("reset") {
  const auto market = test::constant_market(flat_then({100, 100, 100}), {0.7, 0.3});
  TradingEnv env({}, market, 60, 63);
  const auto o = env.reset();
  CHECK(o[kCashRatio] == 1.0);
  CHECK(o[kHoldingsRatio] == 0.0);
  CHECK(o[kUnrealizedPnlPct] == 0.0);
  CHECK(o[kPUp] == 0.7);
  CHECK(o[kPDown] == 0.3);
  CHECK(env.reset() == o);

  CHECK_THROWS_AS(TradingEnv({}, market, 58, 63), ValidationError);
  CHECK_THROWS_AS(TradingEnv({}, market, 62, 63), ValidationError);
  CHECK_THROWS_AS(TradingEnv({}, market, 60, 64), ValidationError);
}

TEST_CASE("observation vector by hand") {
  auto closes = flat_then({});
  closes.push_back(33.0);  // index 60
  const auto market = test::constant_market(closes, {0.6, 0.4});
  const auto& bar = (*market.bars)[60];
  PortfolioState p{97'000.0, 100.0, 1, 3'000.0};  // avg_cost 30
  const auto o = build_observation(EnvConfig{}, p, bar, {0.6, 0.4});
  const double ma5 = (4 * 100.0 + 33.0) / 5, ma20 = (19 * 100.0 + 33.0) / 20, ma60 = (59 * 100.0 + 33.0) / 60;
  double ss = 0.0;
  for (int k = 0; k < 19; ++k) ss += (100.0 - ma20) * (100.0 - ma20);
  ss += (33.0 - ma20) * (33.0 - ma20);
  const Observation expected{0.6,
                             0.4,
                             0.97,
                             100.0 * 33.0 / 100'000.0,
                             10.0,
                             (33.0 - 30.0) / 33.0,
                             100.0 * (33.0 - ma20) / ma20,
                             100.0 * (33.0 - ma60) / ma60,
                             ma5 - ma20,
                             std::sqrt(ss / 20.0) / ma20};
  for (std::size_t k = 0; k < kObservationSize; ++k) CHECK(o[k] == doctest::Approx(expected[k]).epsilon(1e-12));

  EnrichedBar level = bar;
  level.quote.close = level.ma20;
  CHECK(build_observation(EnvConfig{}, PortfolioState{}, level, {0.5, 0.5})[kDevMa20] == 0.0);
  CHECK_THROWS_AS(build_observation(EnvConfig{}, p, (*market.bars)[10], {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(build_observation(EnvConfig{}, p, bar, {NAN, 0.5}), ValidationError);
}

TEST_CASE("step rewards on scripted paths") {
  SUBCASE("hold while flat") {
    TradingEnv env({}, test::constant_market(flat_then({100, 100})), 60, 62);
    env.reset();
    const auto s = env.step(Action::kHold);
    CHECK(s.reward == doctest::Approx(-0.02).epsilon(1e-12));
    CHECK(s.done);
    CHECK_THROWS_AS(env.step(Action::kHold), std::logic_error);
  }
  SUBCASE("trend buy then profitable sell") {
    TradingEnv env({}, test::constant_market(flat_then({101.0, 101.202, 100.0})), 60, 63);
    env.reset();
    const auto buy = env.step(Action::kBuy);
    CHECK(std::abs(buy.reward - 0.48) <= 1e-9);
    CHECK(env.portfolio().lots == 1);
    CHECK(env.portfolio().cash == 99'000.0);
    const auto sell = env.step(Action::kSell);
    CHECK(std::abs(sell.reward - 19.98) <= 1e-9);
    CHECK(env.portfolio().flat());
    CHECK(env.realized_pnl_cash() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sell.done);
  }
  SUBCASE("losing hold and invalid actions") {
    TradingEnv env({}, test::constant_market(flat_then({100.0, 99.5, 99.5, 99.5})), 60, 64);
    env.enable_trace(true);
    env.reset();
    CHECK(env.step(Action::kSell).reward == doctest::Approx(-0.12));  // flat sell
    CHECK(env.portfolio().cash == 100'000.0);
    CHECK(env.step(Action::kBuy).reward == doctest::Approx(-2.02));  // counter-trend at 99.5
    const auto hold = env.step(Action::kHold);
    CHECK(hold.breakdown.holding_term == 0.0);  // bought at 99.5, still 99.5
    REQUIRE(env.trace().size() == 3);
    CHECK_FALSE(env.trace()[0].valid);
  }
  SUBCASE("holding at a loss") {
    TradingEnv env({}, test::constant_market(flat_then({100.0, 99.5, 99.0})), 60, 63);
    env.reset();
    env.step(Action::kBuy);
    const auto s = env.step(Action::kHold);
    CHECK(std::abs(s.reward - (-1.27)) <= 1e-9);
  }
  SUBCASE("buy without cash is invalid") {
    EnvConfig cfg;
    cfg.initial_capital = 1'500.0;
    TradingEnv env(cfg, test::constant_market(flat_then({100, 100, 100, 100})), 60, 64);
    env.reset();
    env.step(Action::kBuy);
    const auto s = env.step(Action::kBuy);
    CHECK(s.breakdown.entry_term == -0.1);
    CHECK(env.portfolio().lots == 1);
  }
}

TEST_CASE("accounting identity, no shorting and determinism over random actions") {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> move(0.0, 0.01);
  std::vector<double> closes(60, 50.0);
  for (int k = 0; k < 400; ++k) closes.push_back(closes.back() * move(rng));
  const auto market = test::constant_market(closes);
  std::uniform_int_distribution<int> act(0, 2);
  std::vector<Action> actions;
  for (int k = 0; k < 400; ++k) actions.push_back(static_cast<Action>(act(rng)));

  auto run = [&] {
    TradingEnv env({}, market, 60, closes.size());
    env.enable_trace(true);
    env.reset();
    std::vector<double> rewards;
    for (Action a : actions) {
      if (env.done()) break;
      const bool flat_before = env.portfolio().flat();
      const auto before = env.portfolio();
      const auto s = env.step(a);
      rewards.push_back(s.reward);
      const auto& p = env.portfolio();
      CHECK(p.units >= 0.0);
      CHECK(p.cash >= 0.0);
      CHECK(std::abs(p.cash + p.cost_basis - (env.config().initial_capital + env.realized_pnl_cash())) <= 1e-9);
      if (a == Action::kSell && flat_before) {
        CHECK(p.cash == before.cash);
        CHECK(p.units == before.units);
      }
      CHECK(s.breakdown.total_before_clip ==
            s.breakdown.time_cost + s.breakdown.entry_term + s.breakdown.exit_term + s.breakdown.holding_term);
      for (double x : s.observation) CHECK(std::isfinite(x));
    }
    return rewards;
  };
  CHECK(run() == run());
}

TEST_CASE("trace csv") {
  const auto market = test::constant_market(flat_then({100, 101, 102}));
  TradingEnv env({}, market, 60, 63);
  env.enable_trace(true);
  env.reset();
  env.step(Action::kBuy);
  env.step(Action::kSell);
  const auto dir = test::scratch_dir("env_trace");
  write_trace_csv(env.trace(), *market.bars, dir / "trace.csv");
  std::ifstream in(dir / "trace.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header.rfind("date,action", 0) == 0);
  CHECK(first.find(",buy,") != std::string::npos);
}
