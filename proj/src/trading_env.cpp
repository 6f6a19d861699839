#include "qfx/trading_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

void EnvConfig::validate() const {
  if (!(initial_capital > 0.0)) throw ValidationError("env.initial_capital must be positive");
  if (!(unit_notional > 0.0)) throw ValidationError("env.unit_notional must be positive");
  if (!(clip_low < clip_high)) throw ValidationError("env clip bounds need clip_low < clip_high");
  for (double v : {time_cost, entry_bonus, entry_penalty, exit_profit_base, exit_profit_slope,
                   exit_loss_base, exit_loss_slope, holding_coef, invalid_penalty})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("env reward coefficients are magnitudes and must be finite and >= 0");
}

Observation build_observation(const EnvConfig& config, const PortfolioState& portfolio,
                              const EnrichedBar& bar, const std::array<double, 2>& qlstm_probs) {
  if (!bar.usable || !std::isfinite(bar.ma60) || !std::isfinite(bar.vol20))
    throw ValidationError("observation needs a bar with complete indicators");
  if (!std::isfinite(qlstm_probs[0]) || !std::isfinite(qlstm_probs[1]))
    throw ValidationError("observation needs a QLSTM forecast for " + format_date(bar.quote.date));
  const double price = bar.quote.close;
  Observation o{};
  o[kPUp] = qlstm_probs[0];
  o[kPDown] = qlstm_probs[1];
  o[kCashRatio] = portfolio.cash / config.initial_capital;
  o[kHoldingsRatio] = portfolio.market_value(price) / config.initial_capital;
  o[kUnrealizedPnlPct] = portfolio.unrealized_pnl_pct(price);
  o[kAvgPriceRatio] = portfolio.flat() ? 0.0 : (price - portfolio.avg_cost()) / price;
  o[kDevMa20] = 100.0 * (price - bar.ma20) / bar.ma20;
  o[kDevMa60] = 100.0 * (price - bar.ma60) / bar.ma60;
  o[kMa5Ma20Gap] = bar.ma5 - bar.ma20;
  o[kRelVol20] = bar.vol20;
  return o;
}

RewardBreakdown compute_reward(const EnvConfig& config, const RewardContext& ctx) {
  RewardBreakdown r;
  r.time_cost = -config.time_cost;
  if (!ctx.valid) {
    r.entry_term = -config.invalid_penalty;
  } else if (ctx.action == Action::kBuy) {
    r.entry_term = ctx.with_trend ? config.entry_bonus : -config.entry_penalty;
  } else if (ctx.action == Action::kSell) {
    const double pnl = ctx.realized_pnl_pct;
    r.exit_term = pnl > 0.0 ? config.exit_profit_base + config.exit_profit_slope * pnl
                            : -config.exit_loss_base - config.exit_loss_slope * std::abs(pnl);
  } else if (ctx.has_position && ctx.unrealized_pnl_pct < 0.0) {
    r.holding_term = -config.holding_coef * ctx.unrealized_pnl_pct * ctx.unrealized_pnl_pct;
  }
  r.total_before_clip = r.time_cost + r.entry_term + r.exit_term + r.holding_term;
  r.total = std::clamp(r.total_before_clip, config.clip_low, config.clip_high);
  return r;
}

TradingEnv::TradingEnv(EnvConfig config, MarketView market, std::size_t start, std::size_t end)
    : config_(config), market_(std::move(market)), start_(start), end_(end) {
  config_.validate();
  if (!market_.bars || !market_.forecasts || market_.forecasts->size() != market_.bars->size())
    throw ValidationError("environment needs bars and one forecast per bar");
  if (end_ > market_.bars->size()) throw ValidationError("environment range exceeds the series");
  if (start_ < kWarmupBars)
    throw ValidationError("environment start needs at least " + std::to_string(kWarmupBars + 1) +
                          " bars of history");
  if (start_ + 1 >= end_) throw ValidationError("environment range leaves no step of future data");
}

Observation TradingEnv::observation() const {
  return build_observation(config_, portfolio_, bar(), (*market_.forecasts)[index_]);
}

Observation TradingEnv::reset() {
  index_ = start_;
  portfolio_ = PortfolioState{config_.initial_capital, 0.0, 0, 0.0};
  realized_pnl_cash_ = 0.0;
  done_ = false;
  trace_.clear();
  return observation();
}

StepResult TradingEnv::step(Action action) {
  if (done_) throw std::logic_error("step() called on a finished episode; call reset()");
  const EnrichedBar& today = bar();
  const double price = today.quote.close;

  RewardContext ctx;
  ctx.action = action;
  switch (action) {
    case Action::kBuy:
      ctx.valid = portfolio_.cash >= config_.unit_notional;
      ctx.with_trend = price > today.ma20;
      if (ctx.valid) {
        portfolio_.cash -= config_.unit_notional;
        portfolio_.units += config_.unit_notional / price;
        portfolio_.cost_basis += config_.unit_notional;
        ++portfolio_.lots;
      }
      break;
    case Action::kSell:
      ctx.valid = !portfolio_.flat();
      if (ctx.valid) {
        ctx.realized_pnl_pct = portfolio_.unrealized_pnl_pct(price);
        const double proceeds = portfolio_.market_value(price);
        realized_pnl_cash_ += proceeds - portfolio_.cost_basis;
        portfolio_ = PortfolioState{portfolio_.cash + proceeds, 0.0, 0, 0.0};
      }
      break;
    case Action::kHold:
      ctx.has_position = !portfolio_.flat();
      ctx.unrealized_pnl_pct = portfolio_.unrealized_pnl_pct(price);
      break;
    default:
      throw std::invalid_argument("unknown action " + std::to_string(static_cast<int>(action)));
  }

  StepResult result;
  result.breakdown = compute_reward(config_, ctx);
  result.reward = result.breakdown.total;
  if (tracing_)
    trace_.push_back({index_, action, ctx.valid, price, portfolio_.cash, portfolio_.units,
                      portfolio_.equity(price), result.breakdown});

  ++index_;
  const double equity = portfolio_.equity(bar().quote.close);
  done_ = index_ + 1 >= end_ || equity <= 0.0;
  result.done = done_;
  result.observation = observation();
  return result;
}

const char* action_name(Action action) {
  switch (action) {
    case Action::kHold: return "hold";
    case Action::kBuy: return "buy";
    case Action::kSell: return "sell";
  }
  return "?";
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::vector<EnrichedBar>& bars,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "date,action,valid,price,cash,units,equity,reward,time_cost,entry,exit,holding,"
         "reward_before_clip\n";
  for (const TraceRow& r : rows) {
    out << format_date(bars.at(r.index).quote.date) << ',' << action_name(r.action) << ','
        << (r.valid ? 1 : 0) << ',' << format_double(r.price) << ',' << format_double(r.cash) << ','
        << format_double(r.units) << ',' << format_double(r.equity) << ','
        << format_double(r.reward.total) << ',' << format_double(r.reward.time_cost) << ','
        << format_double(r.reward.entry_term) << ',' << format_double(r.reward.exit_term) << ','
        << format_double(r.reward.holding_term) << ',' << format_double(r.reward.total_before_clip)
        << '\n';
  }
}

}  // namespace qfx
