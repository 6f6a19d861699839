#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "qfx/backtest.hpp"
#include "qfx/config.hpp"
#include "qfx/market_data.hpp"
#include "qfx/qa3c.hpp"
#include "qfx/qlstm.hpp"

namespace qfx {

// Artifact names inside the run's output directory.
namespace artifacts {
inline constexpr const char* kQuotes = "quotes.csv";
inline constexpr const char* kNormalization = "normalization.json";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kQlstm = "qlstm.qfx";
inline constexpr const char* kQlstmMetrics = "qlstm_metrics.csv";
inline constexpr const char* kAgent = "agent.qfx";
inline constexpr const char* kAgentPartial = "agent.partial.qfx";
inline constexpr const char* kAgentLog = "agent_log.csv";
inline constexpr const char* kTrace = "trace.csv";
inline constexpr const char* kStateTrace = "state_trace.csv";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kTrades = "trades.csv";
inline constexpr const char* kEquity = "equity.csv";
inline constexpr const char* kChart = "pnl_chart.svg";
inline constexpr const char* kReport = "report.md";
inline constexpr const char* kResolvedConfig = "config.resolved.json";
}  // namespace artifacts

struct PreparedMarket {
  std::vector<Quote> quotes;
  std::shared_ptr<const std::vector<EnrichedBar>> bars;
  std::size_t split = 0;  // first test bar
  NormalizationSpec normalization;
};

PreparedMarket prepare_market(std::vector<Quote> quotes, double train_fraction);

nlohmann::json normalization_to_json(const NormalizationSpec& spec, std::size_t split);
NormalizationSpec normalization_from_json(const nlohmann::json& j);

// (P_up, P_down) for every bar; NaN where no full window exists.
std::vector<std::array<double, 2>> forecast_series(const Forecaster& forecaster,
                                                   const std::vector<EnrichedBar>& bars,
                                                   const NormalizationSpec& spec);

MarketView make_market_view(const PreparedMarket& market, const Forecaster& forecaster);

// Bars the agent trains on: from the first bar with a forecast window up to
// the split.
std::pair<std::size_t, std::size_t> agent_train_range(const PreparedMarket& market,
                                                      const QlstmConfig& qlstm);

struct StageOptions {
  bool dump_features = false;
  bool trace = false;
  std::optional<std::filesystem::path> trace_state;
  std::optional<std::filesystem::path> benchmarks;
  std::ostream* log = nullptr;
};

void stage_preprocess(const RunConfig& config, const StageOptions& options);
void stage_train_qlstm(const RunConfig& config, const StageOptions& options);
void stage_train_agent(const RunConfig& config, const StageOptions& options);
void stage_backtest(const RunConfig& config, const StageOptions& options);
void stage_report(const RunConfig& config, const StageOptions& options);
void run_pipeline(const RunConfig& config, const StageOptions& options);

}  // namespace qfx
