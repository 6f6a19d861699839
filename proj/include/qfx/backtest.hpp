#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qfx/market_data.hpp"
#include "qfx/qa3c.hpp"
#include "qfx/trading_env.hpp"

namespace qfx {

// One sell-closed round trip; consecutive buys accumulate into it.
struct TradeRecord {
  std::vector<Date> entry_dates;
  Date exit_date;
  double avg_entry = 0.0;
  double exit_price = 0.0;
  double notional = 0.0;  // cash committed by the buys
  double pnl_pct = 0.0;   // percentage points
  double pnl_cash = 0.0;
};

struct EquityPoint {
  Date date;
  double equity = 0.0;
};

struct BacktestResult {
  std::vector<TradeRecord> trades;
  std::vector<EquityPoint> equity;  // starts at initial capital
  std::vector<TraceRow> trace;
  double initial_capital = 0.0;
};

using Policy = std::function<Action(const Observation&)>;

// Runs `policy` over bars [start, end) without learning. The equity curve
// has one point per bar: the capital at `start`, then the close-marked
// equity after each step.
BacktestResult run_policy(const Policy& policy, const MarketView& market, std::size_t start,
                          std::size_t end, const EnvConfig& config);

// Greedy (argmax) rollout of a frozen agent.
BacktestResult run_backtest(const ActorCritic& agent, const MarketView& market, std::size_t start,
                            std::size_t end, const EnvConfig& config);

struct Metrics {
  double total_return_pct = 0.0;
  double max_drawdown_pct = 0.0;
  std::size_t total_trades = 0;
  // Not applicable (nullopt) when there are no trades.
  std::optional<double> win_rate_pct;
  std::optional<double> best_trade_pct;
  std::optional<double> worst_trade_pct;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

double max_drawdown_pct(const std::vector<double>& equity);
Metrics compute_metrics(const std::vector<double>& trade_pnl_pct, const std::vector<double>& equity);
Metrics compute_metrics(const BacktestResult& result);

struct Benchmark {
  std::string ticker;
  std::string name;
  double return_pct = 0.0;
};

std::vector<Benchmark> load_benchmarks(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const Metrics& metrics);
Metrics metrics_from_json(const nlohmann::json& j);

void write_trades_csv(const std::vector<TradeRecord>& trades, const std::filesystem::path& path);
void write_equity_csv(const std::vector<EquityPoint>& equity, const std::filesystem::path& path);
std::vector<double> read_trade_pnls_csv(const std::filesystem::path& path);
std::vector<double> read_equity_csv(const std::filesystem::path& path);

// SVG polyline of cumulative P&L (equity - first equity), one vertex per point.
std::string render_pnl_svg(const std::vector<EquityPoint>& equity);

struct ReportFiles {
  std::filesystem::path metrics_json;
  std::filesystem::path trades_csv;
  std::filesystem::path equity_csv;
  std::filesystem::path chart_svg;
};

// Writes metrics.json, trades.csv, equity.csv and pnl_chart.svg into `dir`.
ReportFiles export_report(const Metrics& metrics, const BacktestResult& result,
                          const std::filesystem::path& dir,
                          const std::vector<Benchmark>& benchmarks = {});

}  // namespace qfx
