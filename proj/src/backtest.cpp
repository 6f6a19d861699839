#include "qfx/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) lines.push_back(line);
  if (lines.empty()) throw ValidationError("'" + path.string() + "' is empty");
  return lines;
}

std::size_t column(const std::string& header, std::string_view name, const std::filesystem::path& path) {
  const auto cols = split_csv_line(header);
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (cols[k] == name) return k;
  throw ValidationError("'" + path.string() + "' lacks column '" + std::string(name) + "'");
}

std::vector<double> read_column(const std::filesystem::path& path, std::string_view name) {
  const auto lines = read_lines(path);
  const std::size_t col = column(lines[0], name, path);
  std::vector<double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    auto v = col < fields.size() ? parse_double(fields[col]) : std::nullopt;
    if (!v) throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": bad " + std::string(name));
    out.push_back(*v);
  }
  return out;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> number_or_null(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

BacktestResult run_policy(const Policy& policy, const MarketView& market, std::size_t start,
                          std::size_t end, const EnvConfig& config) {
  if (start >= end || end > market.size()) throw ValidationError("empty backtest range");
  TradingEnv env(config, market, start, end);
  env.enable_trace(true);
  BacktestResult result;
  result.initial_capital = config.initial_capital;
  Observation obs = env.reset();
  const auto& bars = *market.bars;
  result.equity.push_back({bars[start].quote.date, config.initial_capital});

  std::vector<Date> entries;
  while (!env.done()) {
    const PortfolioState before = env.portfolio();
    const Date today = env.bar().quote.date;
    const double price = env.bar().quote.close;
    const Action action = policy(obs);
    const StepResult sr = env.step(action);
    const bool valid = env.trace().back().valid;
    if (valid && action == Action::kBuy) entries.push_back(today);
    if (valid && action == Action::kSell) {
      TradeRecord t;
      t.entry_dates = std::move(entries);
      entries.clear();
      t.exit_date = today;
      t.avg_entry = before.avg_cost();
      t.exit_price = price;
      t.notional = before.cost_basis;
      t.pnl_pct = before.unrealized_pnl_pct(price);
      t.pnl_cash = before.market_value(price) - before.cost_basis;
      result.trades.push_back(std::move(t));
    }
    result.equity.push_back({env.bar().quote.date, env.portfolio().equity(env.bar().quote.close)});
    obs = sr.observation;
  }
  result.trace = env.trace();
  return result;
}

BacktestResult run_backtest(const ActorCritic& agent, const MarketView& market, std::size_t start,
                            std::size_t end, const EnvConfig& config) {
  return run_policy(
      [&agent](const Observation& o) { return greedy_action(forward_policy_value(agent, o).policy); },
      market, start, end, config);
}

double max_drawdown_pct(const std::vector<double>& equity) {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0.0) worst = std::max(worst, 100.0 * (peak - e) / peak);
  }
  return worst;
}

Metrics compute_metrics(const std::vector<double>& trade_pnl_pct, const std::vector<double>& equity) {
  if (equity.empty()) throw ValidationError("cannot compute metrics of an empty equity curve");
  Metrics m;
  m.total_return_pct = 100.0 * (equity.back() - equity.front()) / equity.front();
  m.max_drawdown_pct = max_drawdown_pct(equity);
  m.total_trades = trade_pnl_pct.size();
  if (!trade_pnl_pct.empty()) {
    const auto wins = std::count_if(trade_pnl_pct.begin(), trade_pnl_pct.end(), [](double p) { return p > 0.0; });
    m.win_rate_pct = 100.0 * static_cast<double>(wins) / static_cast<double>(trade_pnl_pct.size());
    m.best_trade_pct = *std::max_element(trade_pnl_pct.begin(), trade_pnl_pct.end());
    m.worst_trade_pct = *std::min_element(trade_pnl_pct.begin(), trade_pnl_pct.end());
  }
  return m;
}

Metrics compute_metrics(const BacktestResult& result) {
  std::vector<double> pnls;
  for (const auto& t : result.trades) pnls.push_back(t.pnl_pct);
  std::vector<double> eq;
  for (const auto& p : result.equity) eq.push_back(p.equity);
  return compute_metrics(pnls, eq);
}

std::vector<Benchmark> load_benchmarks(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::size_t c_ticker = column(lines[0], "ticker", path);
  const std::size_t c_name = column(lines[0], "name", path);
  const std::size_t c_ret = column(lines[0], "return_pct", path);
  std::vector<Benchmark> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    const std::size_t need = std::max({c_ticker, c_name, c_ret}) + 1;
    if (f.size() < need) throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": too few fields");
    std::string_view ret = f[c_ret];
    if (!ret.empty() && ret.back() == '%') ret.remove_suffix(1);
    auto v = parse_double(ret);
    if (!v) throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": bad return_pct");
    out.push_back({std::string(f[c_ticker]), std::string(f[c_name]), *v});
  }
  return out;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"total_return_pct", m.total_return_pct},
          {"max_drawdown_pct", m.max_drawdown_pct},
          {"total_trades", m.total_trades},
          {"win_rate_pct", optional_number(m.win_rate_pct)},
          {"best_trade_pct", optional_number(m.best_trade_pct)},
          {"worst_trade_pct", optional_number(m.worst_trade_pct)}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.total_return_pct = j.at("total_return_pct").get<double>();
  m.max_drawdown_pct = j.at("max_drawdown_pct").get<double>();
  m.total_trades = j.at("total_trades").get<std::size_t>();
  m.win_rate_pct = number_or_null(j, "win_rate_pct");
  m.best_trade_pct = number_or_null(j, "best_trade_pct");
  m.worst_trade_pct = number_or_null(j, "worst_trade_pct");
  return m;
}

void write_trades_csv(const std::vector<TradeRecord>& trades, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "entry_dates,exit_date,avg_entry,exit_price,notional,pnl_pct,pnl_cash\n";
  for (const auto& t : trades) {
    for (std::size_t k = 0; k < t.entry_dates.size(); ++k)
      out << (k ? ";" : "") << format_date(t.entry_dates[k]);
    out << ',' << format_date(t.exit_date) << ',' << format_double(t.avg_entry) << ','
        << format_double(t.exit_price) << ',' << format_double(t.notional) << ','
        << format_double(t.pnl_pct) << ',' << format_double(t.pnl_cash) << '\n';
  }
}

void write_equity_csv(const std::vector<EquityPoint>& equity, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "date,equity\n";
  for (const auto& p : equity) out << format_date(p.date) << ',' << format_double(p.equity) << '\n';
}

std::vector<double> read_trade_pnls_csv(const std::filesystem::path& path) {
  return read_column(path, "pnl_pct");
}

std::vector<double> read_equity_csv(const std::filesystem::path& path) {
  return read_column(path, "equity");
}

std::string render_pnl_svg(const std::vector<EquityPoint>& equity) {
  constexpr double kWidth = 800.0, kHeight = 400.0, kMargin = 50.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<title>Cumulative P&amp;L</title>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (equity.empty()) {
    svg << "</svg>\n";
    return svg.str();
  }
  const double base = equity.front().equity;
  double lo = 0.0, hi = 0.0;
  for (const auto& p : equity) {
    lo = std::min(lo, p.equity - base);
    hi = std::max(hi, p.equity - base);
  }
  if (hi == lo) hi = lo + 1.0;
  const double span_x = std::max<double>(1.0, static_cast<double>(equity.size() - 1));
  auto x_of = [&](std::size_t i) { return kMargin + (kWidth - 2 * kMargin) * static_cast<double>(i) / span_x; };
  auto y_of = [&](double pnl) { return kHeight - kMargin - (kHeight - 2 * kMargin) * (pnl - lo) / (hi - lo); };

  char buf[64];
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << y_of(0.0) << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << y_of(0.0) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  svg << "<text x=\"" << kMargin << "\" y=\"" << kMargin - 20 << "\" font-family=\"sans-serif\" font-size=\"14\">"
      << "Cumulative P&amp;L " << format_date(equity.front().date) << " to " << format_date(equity.back().date)
      << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.2f", hi);
  svg << "<text x=\"4\" y=\"" << y_of(hi) << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.2f", lo);
  svg << "<text x=\"4\" y=\"" << y_of(lo) << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < equity.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s%.3f,%.3f", i ? " " : "", x_of(i), y_of(equity[i].equity - base));
    svg << buf;
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

ReportFiles export_report(const Metrics& metrics, const BacktestResult& result,
                          const std::filesystem::path& dir, const std::vector<Benchmark>& benchmarks) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ValidationError("cannot create output directory '" + dir.string() + "'");
  ReportFiles files{dir / "metrics.json", dir / "trades.csv", dir / "equity.csv", dir / "pnl_chart.svg"};

  nlohmann::json j = metrics_to_json(metrics);
  if (!benchmarks.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& b : benchmarks)
      rows.push_back({{"ticker", b.ticker}, {"name", b.name}, {"return_pct", b.return_pct}});
    j["benchmarks"] = rows;
  }
  std::ofstream mj(files.metrics_json);
  if (!mj) throw ValidationError("cannot write '" + files.metrics_json.string() + "'");
  mj << j.dump(2) << '\n';
  mj.close();

  write_trades_csv(result.trades, files.trades_csv);
  write_equity_csv(result.equity, files.equity_csv);
  std::ofstream svg(files.chart_svg);
  if (!svg) throw ValidationError("cannot write '" + files.chart_svg.string() + "'");
  svg << render_pnl_svg(result.equity);
  return files;
}

}  // namespace qfx
