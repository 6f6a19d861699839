#include "qfx/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

namespace fs = std::filesystem;

namespace {

std::ostream& log_of(const StageOptions& options) {
  static std::ostream null_stream(nullptr);
  return options.log ? *options.log : null_stream;
}

void prepare_out_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec || !fs::is_directory(config.out))
    throw ValidationError("cannot create output directory '" + config.out.string() + "'");
  std::ofstream echo(config.out / artifacts::kResolvedConfig);
  echo << nlohmann::json(config).dump(2) << '\n';
}

fs::path require(const RunConfig& config, const char* name, const char* stage) {
  fs::path p = config.out / name;
  if (!fs::exists(p)) throw MissingArtifactError(p.string(), stage);
  return p;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

PreparedMarket load_prepared(const RunConfig& config) {
  const fs::path quotes = require(config, artifacts::kQuotes, "preprocess");
  const fs::path norm = require(config, artifacts::kNormalization, "preprocess");
  PreparedMarket m;
  m.quotes = load_quotes(quotes);
  m.bars = std::make_shared<const std::vector<EnrichedBar>>(compute_indicators(m.quotes));
  const nlohmann::json j = read_json(norm);
  m.split = j.at("split_index").get<std::size_t>();
  m.normalization = normalization_from_json(j);
  if (m.split >= m.bars->size()) throw ValidationError("normalization.json split lies past the series");
  return m;
}

Forecaster load_forecaster(const RunConfig& config) {
  return Forecaster::from_checkpoint(load_checkpoint(require(config, artifacts::kQlstm, "train-qlstm")));
}

std::vector<EquityPoint> read_equity_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<EquityPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    auto d = f.size() >= 2 ? parse_date(f[0]) : std::nullopt;
    auto v = f.size() >= 2 ? parse_double(f[1]) : std::nullopt;
    if (!d || !v) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    out.push_back({*d, *v});
  }
  return out;
}

std::string pct_or_na(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << *v << '%';
  return s.str();
}

void write_report_md(const Metrics& m, const std::vector<Benchmark>& benchmarks, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "# Backtest report\n\n| Metric | Value |\n|---|---|\n"
      << "| Total Return | " << pct_or_na(m.total_return_pct) << " |\n"
      << "| Max Drawdown | " << pct_or_na(m.max_drawdown_pct) << " |\n"
      << "| Total Trades | " << m.total_trades << " |\n"
      << "| Win Rate | " << pct_or_na(m.win_rate_pct) << " |\n"
      << "| Best Trade | " << pct_or_na(m.best_trade_pct) << " |\n"
      << "| Worst Trade | " << pct_or_na(m.worst_trade_pct) << " |\n";
  if (!benchmarks.empty()) {
    std::vector<Benchmark> rows = benchmarks;
    rows.push_back({"--", "Agent", m.total_return_pct});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Benchmark& a, const Benchmark& b) { return a.return_pct > b.return_pct; });
    out << "\n## Total return comparison\n\n| Ticker | Name | Total Return |\n|---|---|---|\n";
    for (const auto& b : rows) out << "| " << b.ticker << " | " << b.name << " | " << pct_or_na(b.return_pct) << " |\n";
  }
}

}  // namespace

PreparedMarket prepare_market(std::vector<Quote> quotes, double train_fraction) {
  PreparedMarket m;
  m.quotes = std::move(quotes);
  auto bars = compute_indicators(m.quotes);
  m.split = split_index(bars.size(), train_fraction);
  const std::vector<EnrichedBar> train(bars.begin(), bars.begin() + static_cast<std::ptrdiff_t>(m.split));
  m.normalization = fit_minmax(train, {kForecastFeatures.begin(), kForecastFeatures.end()});
  m.bars = std::make_shared<const std::vector<EnrichedBar>>(std::move(bars));
  return m;
}

nlohmann::json normalization_to_json(const NormalizationSpec& spec, std::size_t split) {
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& r : spec.ranges)
    ranges.push_back({{"feature", feature_name(r.feature)}, {"min", r.min}, {"max", r.max}});
  return {{"split_index", split}, {"ranges", ranges}};
}

NormalizationSpec normalization_from_json(const nlohmann::json& j) {
  NormalizationSpec spec;
  for (const auto& r : j.at("ranges")) {
    const std::string name = r.at("feature").get<std::string>();
    auto it = std::find_if(kAllFeatures.begin(), kAllFeatures.end(),
                           [&](Feature f) { return feature_name(f) == name; });
    if (it == kAllFeatures.end()) throw ValidationError("unknown feature '" + name + "' in normalization");
    spec.ranges.push_back({*it, r.at("min").get<double>(), r.at("max").get<double>()});
  }
  return spec;
}

std::vector<std::array<double, 2>> forecast_series(const Forecaster& forecaster,
                                                   const std::vector<EnrichedBar>& bars,
                                                   const NormalizationSpec& spec) {
  const std::size_t seq_len = forecaster.params().config.seq_len;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::array<double, 2>> out(bars.size(), {nan, nan});
  for (std::size_t t = first_window_anchor(seq_len); t < bars.size(); ++t)
    out[t] = forecaster.predict(forecast_window(bars, spec, t, seq_len));
  return out;
}

MarketView make_market_view(const PreparedMarket& market, const Forecaster& forecaster) {
  return {market.bars, std::make_shared<const std::vector<std::array<double, 2>>>(
                           forecast_series(forecaster, *market.bars, market.normalization))};
}

std::pair<std::size_t, std::size_t> agent_train_range(const PreparedMarket& market,
                                                      const QlstmConfig& qlstm) {
  const std::size_t start = first_window_anchor(qlstm.seq_len);
  if (market.split < start + 2)
    throw ValidationError("training window too short for the agent: need at least " +
                          std::to_string(start + 2) + " training bars, have " + std::to_string(market.split));
  return {start, market.split};
}

void stage_preprocess(const RunConfig& config, const StageOptions& options) {
  config.validate();
  if (config.data.empty()) throw ValidationError("no input data: pass --data or set \"data\" in the config");
  prepare_out_dir(config);
  PreparedMarket m = prepare_market(load_quotes(config.data), config.train_fraction);
  write_quotes_csv(m.quotes, config.out / artifacts::kQuotes);
  std::ofstream(config.out / artifacts::kNormalization) << normalization_to_json(m.normalization, m.split).dump(2)
                                                         << '\n';
  if (options.dump_features)
    write_feature_dump(*m.bars, m.normalization, m.split, config.out / artifacts::kFeatures);
  const auto& bars = *m.bars;
  log_of(options) << "preprocess: " << bars.size() << " bars " << format_date(bars.front().quote.date)
                  << " .. " << format_date(bars.back().quote.date) << ", train " << m.split << " / test "
                  << bars.size() - m.split << " (test from " << format_date(bars[m.split].quote.date)
                  << ")\n";
}

void stage_train_qlstm(const RunConfig& config, const StageOptions& options) {
  config.validate();
  const PreparedMarket m = load_prepared(config);
  prepare_out_dir(config);
  const std::vector<EnrichedBar> train_bars(m.bars->begin(), m.bars->begin() + static_cast<std::ptrdiff_t>(m.split));
  const auto train = build_forecast_dataset(train_bars, m.normalization, config.qlstm.seq_len);
  const auto test = build_forecast_dataset(*m.bars, m.normalization, config.qlstm.seq_len, m.split);
  log_of(options) << "train-qlstm: " << train.size() << " train / " << test.size() << " test samples\n";
  const QlstmTrainResult r = train_qlstm(train, test, config.qlstm);
  save_checkpoint(Forecaster(r.params).to_checkpoint(), config.out / artifacts::kQlstm);
  write_epoch_metrics_csv(r.history, config.out / artifacts::kQlstmMetrics);
  if (!r.history.empty())
    log_of(options) << "train-qlstm: final loss " << r.history.back().loss << ", train acc "
                    << r.history.back().train_acc << ", test acc " << r.history.back().test_acc << '\n';
}

void stage_train_agent(const RunConfig& config, const StageOptions& options) {
  config.validate();
  const PreparedMarket m = load_prepared(config);
  const Forecaster forecaster = load_forecaster(config);
  prepare_out_dir(config);
  const MarketView view = make_market_view(m, forecaster);
  const auto [start, end] = agent_train_range(m, config.qlstm);
  const EnvConfig env_config = config.env;
  auto factory = [&view, &env_config, start = start, end = end](std::size_t) {
    return TradingEnv(env_config, view, start, end);
  };
  log_of(options) << "train-agent: " << config.agent.workers << " workers, " << config.agent.max_episodes
                  << " episodes over bars [" << start << ", " << end << ")\n";
  try {
    const AgentTrainResult r = train_async(config.agent, factory);
    save_checkpoint(agent_checkpoint(r.net, config.agent, r.version), config.out / artifacts::kAgent);
    write_episode_log_csv(r.log, config.out / artifacts::kAgentLog);
    const ParamCount c = r.net.count();
    log_of(options) << "train-agent: " << r.version << " updates (" << r.skipped_updates
                    << " skipped), params quantum " << c.quantum << " classical " << c.classical
                    << " total " << c.total() << '\n';
  } catch (const TrainingAborted& e) {
    save_checkpoint(agent_checkpoint(e.partial(), config.agent, 0), config.out / artifacts::kAgentPartial);
    throw;
  }
}

void stage_backtest(const RunConfig& config, const StageOptions& options) {
  config.validate();
  const PreparedMarket m = load_prepared(config);
  const Forecaster forecaster = load_forecaster(config);
  const ActorCritic agent =
      agent_from_checkpoint(load_checkpoint(require(config, artifacts::kAgent, "train-agent")));
  prepare_out_dir(config);
  const MarketView view = make_market_view(m, forecaster);
  const std::size_t start = std::max(m.split, first_window_anchor(config.qlstm.seq_len));
  if (start + 1 >= view.size()) throw ValidationError("empty test range for backtest");
  const BacktestResult result = run_backtest(agent, view, start, view.size(), config.env);
  const Metrics metrics = compute_metrics(result);
  std::vector<Benchmark> benchmarks;
  if (options.benchmarks) benchmarks = load_benchmarks(*options.benchmarks);
  export_report(metrics, result, config.out, benchmarks);
  if (options.trace) write_trace_csv(result.trace, *m.bars, config.out / artifacts::kTrace);
  if (options.trace_state) {
    if (!agent.config.quantum) throw ValidationError("--trace-state needs a quantum agent");
    const Observation first = build_observation(config.env, PortfolioState{config.env.initial_capital, 0.0, 0, 0.0},
                                                (*m.bars)[start], (*view.forecasts)[start]);
    std::vector<double> hidden = dense_forward(agent.actor.encoder, first);
    for (double& v : hidden) v = std::tanh(v);
    write_state_csv(vqc_state(agent.config.vqc_spec(), agent.actor.angles, hidden), *options.trace_state);
  }
  log_of(options) << "backtest: return " << metrics.total_return_pct << "%, max drawdown "
                  << metrics.max_drawdown_pct << "%, trades " << metrics.total_trades << ", win rate "
                  << pct_or_na(metrics.win_rate_pct) << '\n';
}

void stage_report(const RunConfig& config, const StageOptions& options) {
  const fs::path trades = require(config, artifacts::kTrades, "backtest");
  const fs::path equity = require(config, artifacts::kEquity, "backtest");
  prepare_out_dir(config);
  const auto points = read_equity_points(equity);
  std::vector<double> curve;
  for (const auto& p : points) curve.push_back(p.equity);
  const Metrics metrics = compute_metrics(read_trade_pnls_csv(trades), curve);
  std::vector<Benchmark> benchmarks;
  if (options.benchmarks) benchmarks = load_benchmarks(*options.benchmarks);

  nlohmann::json j = metrics_to_json(metrics);
  if (!benchmarks.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& b : benchmarks) rows.push_back({{"ticker", b.ticker}, {"name", b.name}, {"return_pct", b.return_pct}});
    j["benchmarks"] = rows;
  }
  std::ofstream(config.out / artifacts::kMetrics) << j.dump(2) << '\n';
  std::ofstream(config.out / artifacts::kChart) << render_pnl_svg(points);
  write_report_md(metrics, benchmarks, config.out / artifacts::kReport);
  log_of(options) << "report: wrote " << (config.out / artifacts::kReport).string() << '\n';
}

void run_pipeline(const RunConfig& config, const StageOptions& options) {
  stage_preprocess(config, options);
  stage_train_qlstm(config, options);
  stage_train_agent(config, options);
  stage_backtest(config, options);
  stage_report(config, options);
}

}  // namespace qfx
