#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qfx/backtest.hpp"
#include "qfx/error.hpp"
#include "selftest.hpp"
#include "support.hpp"

using namespace qfx;

namespace {

std::vector<double> flat_then(std::vector<double> tail) {
  std::vector<double> closes(60, 100.0);
  closes.insert(closes.end(), tail.begin(), tail.end());
  return closes;
}

Policy scripted(std::vector<Action> actions) {
  auto k = std::make_shared<std::size_t>(0);
  return [actions, k](const Observation&) { return *k < actions.size() ? actions[(*k)++] : Action::kHold; };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("always-hold policy") {
  const auto market = test::constant_market(flat_then({101, 99, 103, 100}));
  const auto r = run_policy([](const Observation&) { return Action::kHold; }, market, 60, 64, EnvConfig{});
  CHECK(r.trades.empty());
  REQUIRE(r.equity.size() == 4);
  for (const auto& p : r.equity) CHECK(p.equity == 100'000.0);
  const auto m = compute_metrics(r);
  CHECK(m.total_return_pct == 0.0);
  CHECK(m.max_drawdown_pct == 0.0);
  CHECK(m.total_trades == 0);
  CHECK_FALSE(m.win_rate_pct.has_value());
  CHECK(metrics_to_json(m)["win_rate_pct"].is_null());
}

TEST_CASE("scripted round trips") {
  // Buy at 100 and 125, sell everything at 110.
  const auto market = test::constant_market(flat_then({100.0, 125.0, 110.0, 110.0}));
  const auto r = run_policy(scripted({Action::kBuy, Action::kBuy, Action::kSell}), market, 60, 64, EnvConfig{});
  REQUIRE(r.trades.size() == 1);
  const auto& t = r.trades[0];
  CHECK(t.entry_dates.size() == 2);
  CHECK(t.exit_date == (*market.bars)[62].quote.date);
  const double units = 1000.0 / 100.0 + 1000.0 / 125.0;
  CHECK(t.avg_entry == doctest::Approx(2000.0 / units).epsilon(1e-12));
  CHECK(t.notional == 2000.0);
  CHECK(t.pnl_cash == doctest::Approx(units * 110.0 - 2000.0).epsilon(1e-12));
  CHECK(std::abs(t.pnl_pct - 100.0 * (t.exit_price - t.avg_entry) / t.avg_entry) <= 1e-9);
  // Ends flat: the cash P&L is the equity change.
  CHECK(std::abs(t.pnl_cash - (r.equity.back().equity - r.initial_capital)) <= 1e-9);
  CHECK(r.equity.front().equity == r.initial_capital);

  const auto again = run_policy(scripted({Action::kBuy, Action::kBuy, Action::kSell}), market, 60, 64, EnvConfig{});
  CHECK(again.trades[0].pnl_cash == t.pnl_cash);
  CHECK(again.equity.back().equity == r.equity.back().equity);

  CHECK_THROWS_AS(run_policy(scripted({}), market, 64, 64, EnvConfig{}), ValidationError);
}

TEST_CASE("greedy agent backtest is deterministic") {
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> mv(0.0, 0.01);
  std::vector<double> closes(60, 30.0);
  for (int k = 0; k < 100; ++k) closes.push_back(closes.back() * mv(rng));
  const auto market = test::constant_market(closes, {0.55, 0.45});
  Rng init(2);
  const auto agent = ActorCritic::random(NetConfig{}, init);
  const auto a = run_backtest(agent, market, 60, closes.size(), EnvConfig{});
  const auto b = run_backtest(agent, market, 60, closes.size(), EnvConfig{});
  CHECK(compute_metrics(a) == compute_metrics(b));
  CHECK(a.trace.size() == b.trace.size());
  CHECK(a.equity.size() == closes.size() - 60);
}

TEST_CASE("metrics") {
  const auto r = checks::metrics_oracle(test::scratch_dir("bt_oracle"));
  CHECK_MESSAGE(r.pass, r.detail);
  CHECK(max_drawdown_pct({100, 110, 99, 120}) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(max_drawdown_pct({1, 2, 2, 3, 5}) == 0.0);
  const auto m = compute_metrics({0.5, -0.2, 0.1}, {100.0, 100.0});
  CHECK(*m.win_rate_pct == doctest::Approx(66.67).epsilon(1e-4));
  CHECK(*m.best_trade_pct == 0.5);
  CHECK(*m.worst_trade_pct == -0.2);
  CHECK(compute_metrics({}, {100.0, 111.87}).total_return_pct == doctest::Approx(11.87).epsilon(1e-12));
  CHECK_THROWS(compute_metrics({}, {}));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(50.0, 150.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> eq(40);
    for (double& e : eq) e = u(rng);
    CHECK(max_drawdown_pct(eq) == doctest::Approx(oracle::max_drawdown_pct(eq)).epsilon(1e-12));
  }
}

TEST_CASE("report export") {
  const auto dir = test::scratch_dir("bt_export");
  const auto market = test::constant_market(flat_then({100.0, 102.0, 101.0, 99.0, 98.0, 100.0}));
  const auto r =
      run_policy(scripted({Action::kBuy, Action::kSell, Action::kBuy, Action::kSell}), market, 60, 66, EnvConfig{});
  REQUIRE(r.trades.size() == 2);
  const auto m = compute_metrics(r);

  const auto bench_path = dir / "etf.csv";
  std::ofstream(bench_path) << "ticker,name,return_pct\nFXB,Invesco CurrencyShares British Pound,13.81%\nFXE,Euro,-2.5\n";
  const auto bench = load_benchmarks(bench_path);
  REQUIRE(bench.size() == 2);
  CHECK(bench[0].ticker == "FXB");
  CHECK(bench[0].return_pct == 13.81);

  const auto files = export_report(m, r, dir, bench);
  std::ifstream mj(files.metrics_json);
  const auto j = nlohmann::json::parse(mj);
  CHECK(metrics_from_json(j) == m);
  CHECK(j["benchmarks"][0]["ticker"] == "FXB");
  CHECK(j["benchmarks"][0]["return_pct"] == 13.81);
  CHECK(compute_metrics(read_trade_pnls_csv(files.trades_csv), read_equity_csv(files.equity_csv)) == m);

  const std::string svg = slurp(files.chart_svg);
  CHECK(svg.rfind("<svg", 0) == 0);
  const auto points_at = svg.find("points=\"");
  REQUIRE(points_at != std::string::npos);
  const auto points = svg.substr(points_at + 8, svg.find('"', points_at + 8) - points_at - 8);
  std::istringstream ps(points);
  std::string vertex;
  std::size_t vertices = 0;
  while (ps >> vertex) ++vertices;
  CHECK(vertices == r.equity.size());

  std::ofstream(dir / "bad.csv") << "ticker,name,return_pct\nFXB,x,abc\n";
  CHECK_THROWS_AS(load_benchmarks(dir / "bad.csv"), ValidationError);
}
