#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "qfx/market_data.hpp"

namespace qfx {

struct EnvConfig {
  double initial_capital = 100'000.0;
  double unit_notional = 1'000.0;
  double clip_low = -15.0;
  double clip_high = 30.0;
  double time_cost = 0.02;
  double entry_bonus = 0.5;
  double entry_penalty = 2.0;
  double exit_profit_base = 10.0;
  double exit_profit_slope = 50.0;
  double exit_loss_base = 2.0;
  double exit_loss_slope = 10.0;
  double holding_coef = 5.0;
  double invalid_penalty = 0.1;

  void validate() const;
};

enum class Action : int { kHold = 0, kBuy = 1, kSell = 2 };
inline constexpr std::size_t kNumActions = 3;

struct PortfolioState {
  double cash = 0.0;
  double units = 0.0;       // base-currency amount held
  std::size_t lots = 0;     // buys since the position was last flat
  double cost_basis = 0.0;  // total cash paid for `units`

  bool flat() const { return lots == 0; }
  // Average entry price (cost / units); 0 when flat.
  double avg_cost() const { return flat() ? 0.0 : cost_basis / units; }
  double market_value(double price) const { return units * price; }
  double equity(double price) const { return cash + market_value(price); }
  // Percentage points: 0.61 means +0.61 %.
  double unrealized_pnl_pct(double price) const {
    return flat() ? 0.0 : 100.0 * (price - avg_cost()) / avg_cost();
  }
};

inline constexpr std::size_t kObservationSize = 10;
using Observation = std::array<double, kObservationSize>;

enum ObservationField : std::size_t {
  kPUp = 0,
  kPDown,
  kCashRatio,
  kHoldingsRatio,
  kUnrealizedPnlPct,
  kAvgPriceRatio,
  kDevMa20,
  kDevMa60,
  kMa5Ma20Gap,
  kRelVol20,
};

Observation build_observation(const EnvConfig& config, const PortfolioState& portfolio,
                              const EnrichedBar& bar, const std::array<double, 2>& qlstm_probs);

struct RewardContext {
  Action action = Action::kHold;
  bool valid = true;          // false: buy without cash or sell while flat
  bool with_trend = false;    // price > MA20 at entry
  double realized_pnl_pct = 0.0;
  double unrealized_pnl_pct = 0.0;
  bool has_position = false;  // a position is open on a hold step
};

struct RewardBreakdown {
  double time_cost = 0.0;
  double entry_term = 0.0;
  double exit_term = 0.0;
  double holding_term = 0.0;
  double total_before_clip = 0.0;
  double total = 0.0;
};

RewardBreakdown compute_reward(const EnvConfig& config, const RewardContext& context);

// Bars plus the frozen forecaster's (P_up, P_down) per bar. Shared
// read-only between environments.
struct MarketView {
  std::shared_ptr<const std::vector<EnrichedBar>> bars;
  std::shared_ptr<const std::vector<std::array<double, 2>>> forecasts;

  std::size_t size() const { return bars ? bars->size() : 0; }
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  RewardBreakdown breakdown;
};

struct TraceRow {
  std::size_t index = 0;
  Action action = Action::kHold;
  bool valid = true;
  double price = 0.0;
  double cash = 0.0;
  double units = 0.0;
  double equity = 0.0;  // after the action, marked at the same close
  RewardBreakdown reward;
};

// Daily long-only environment over bars [start, end). The agent acts on bars
// start .. end-2; reaching bar end-1 terminates the episode.
class TradingEnv {
 public:
  TradingEnv(EnvConfig config, MarketView market, std::size_t start, std::size_t end);

  Observation reset();
  StepResult step(Action action);

  bool done() const { return done_; }
  std::size_t index() const { return index_; }
  const PortfolioState& portfolio() const { return portfolio_; }
  const EnvConfig& config() const { return config_; }
  const EnrichedBar& bar() const { return (*market_.bars)[index_]; }
  Observation observation() const;
  double realized_pnl_cash() const { return realized_pnl_cash_; }

  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  EnvConfig config_;
  MarketView market_;
  std::size_t start_;
  std::size_t end_;
  std::size_t index_ = 0;
  PortfolioState portfolio_;
  double realized_pnl_cash_ = 0.0;
  bool done_ = true;
  bool tracing_ = false;
  std::vector<TraceRow> trace_;
};

const char* action_name(Action action);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::vector<EnrichedBar>& bars,
                     const std::filesystem::path& path);

}  // namespace qfx
