#include "qfx/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_missing(std::string_view field) {
  const std::string v = lower(trim(field));
  return v.empty() || v == "nan" || v == "null" || v == "na" || v == "n/a";
}

[[noreturn]] void malformed(const std::string& source, std::size_t line, const std::string& what) {
  throw ValidationError(source + ":" + std::to_string(line) + ": " + what);
}

double window_mean(const std::vector<Quote>& quotes, std::size_t end, std::size_t n) {
  double sum = 0.0;
  for (std::size_t k = end + 1 - n; k <= end; ++k) sum += quotes[k].close;
  return sum / static_cast<double>(n);
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto parse = [](std::string_view part, auto& value) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    return ec == std::errc() && ptr == part.data() + part.size();
  };
  if (!parse(text.substr(0, 4), y) || !parse(text.substr(5, 2), m) || !parse(text.substr(8, 2), d))
    return std::nullopt;
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

double feature_value(const EnrichedBar& bar, Feature feature) {
  switch (feature) {
    case Feature::kOpen: return bar.quote.open;
    case Feature::kHigh: return bar.quote.high;
    case Feature::kLow: return bar.quote.low;
    case Feature::kClose: return bar.quote.close;
    case Feature::kMa5: return bar.ma5;
    case Feature::kMa10: return bar.ma10;
    case Feature::kMa20: return bar.ma20;
    case Feature::kMa60: return bar.ma60;
    case Feature::kVol20: return bar.vol20;
  }
  return 0.0;
}

std::string_view feature_name(Feature feature) {
  switch (feature) {
    case Feature::kOpen: return "open";
    case Feature::kHigh: return "high";
    case Feature::kLow: return "low";
    case Feature::kClose: return "close";
    case Feature::kMa5: return "ma5";
    case Feature::kMa10: return "ma10";
    case Feature::kMa20: return "ma20";
    case Feature::kMa60: return "ma60";
    case Feature::kVol20: return "vol20";
  }
  return "?";
}

std::vector<Quote> parse_quotes(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, header_line)) {
    ++line_no;
    if (!trim(header_line).empty()) break;
  }
  if (line_no == 0 || trim(header_line).empty())
    throw ValidationError(source_name + ": empty file (expected header date,open,high,low,close)");

  const auto columns = split_csv_line(header_line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) index[lower(trim(columns[i]))] = i;
  std::array<std::size_t, 5> col{};
  const std::array<const char*, 5> names = {"date", "open", "high", "low", "close"};
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto it = index.find(names[k]);
    if (it == index.end())
      malformed(source_name, line_no, std::string("header lacks column '") + names[k] + "'");
    col[k] = it->second;
  }
  const std::size_t needed = *std::max_element(col.begin(), col.end()) + 1;

  std::vector<Quote> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < needed)
      malformed(source_name, line_no,
                "expected at least " + std::to_string(needed) + " fields, got " +
                    std::to_string(fields.size()));
    Quote q;
    auto date = parse_date(fields[col[0]]);
    if (!date) malformed(source_name, line_no, "bad date '" + std::string(fields[col[0]]) + "'");
    q.date = *date;

    if (is_missing(fields[col[4]])) {
      q.close = std::numeric_limits<double>::quiet_NaN();
    } else {
      auto close = parse_double(fields[col[4]]);
      if (!close) malformed(source_name, line_no, "bad close '" + std::string(fields[col[4]]) + "'");
      q.close = *close;
    }
    // open/high/low are carried as given; a missing one falls back to close.
    double* targets[3] = {&q.open, &q.high, &q.low};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto field = fields[col[k + 1]];
      if (is_missing(field)) {
        *targets[k] = q.close;
        continue;
      }
      auto v = parse_double(field);
      if (!v) malformed(source_name, line_no, "bad " + std::string(names[k + 1]) + " '" +
                                                  std::string(field) + "'");
      *targets[k] = *v;
    }
    rows.push_back(q);
  }
  auto cleaned = clean_quotes(std::move(rows));
  if (cleaned.empty()) throw ValidationError(source_name + ": no valid rows after cleaning");
  return cleaned;
}

std::vector<Quote> load_quotes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read quotes file '" + path.string() + "'");
  return parse_quotes(in, path.string());
}

std::vector<Quote> clean_quotes(std::vector<Quote> rows) {
  std::erase_if(rows, [](const Quote& q) { return !std::isfinite(q.close) || q.close <= 0.0; });
  for (Quote& q : rows) {
    if (!std::isfinite(q.open)) q.open = q.close;
    if (!std::isfinite(q.high)) q.high = q.close;
    if (!std::isfinite(q.low)) q.low = q.close;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Quote& a, const Quote& b) { return a.date < b.date; });
  std::vector<Quote> out;
  out.reserve(rows.size());
  for (const Quote& q : rows) {
    if (!out.empty() && out.back().date == q.date)
      out.back() = q;  // later record for the same day wins
    else
      out.push_back(q);
  }
  return out;
}

void write_quotes_csv(const std::vector<Quote>& quotes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "date,open,high,low,close\n";
  for (const Quote& q : quotes)
    out << format_date(q.date) << ',' << format_double(q.open) << ',' << format_double(q.high)
        << ',' << format_double(q.low) << ',' << format_double(q.close) << '\n';
}

std::vector<EnrichedBar> compute_indicators(const std::vector<Quote>& quotes) {
  if (quotes.size() < kWarmupBars + 1)
    throw ValidationError("insufficient history: need at least " +
                          std::to_string(kWarmupBars + 1) + " quotes, got " +
                          std::to_string(quotes.size()));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<EnrichedBar> bars(quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    EnrichedBar& bar = bars[i];
    bar.quote = quotes[i];
    bar.ma5 = i + 1 >= 5 ? window_mean(quotes, i, 5) : nan;
    bar.ma10 = i + 1 >= 10 ? window_mean(quotes, i, 10) : nan;
    bar.ma20 = i + 1 >= 20 ? window_mean(quotes, i, 20) : nan;
    bar.ma60 = i + 1 >= 60 ? window_mean(quotes, i, 60) : nan;
    if (i + 1 >= 20) {
      double ss = 0.0;
      for (std::size_t k = i + 1 - 20; k <= i; ++k) {
        const double d = quotes[k].close - bar.ma20;
        ss += d * d;
      }
      bar.vol20 = std::sqrt(ss / 20.0) / bar.ma20;
    } else {
      bar.vol20 = nan;
    }
    bar.usable = i >= kWarmupBars;
  }
  return bars;
}

std::size_t split_index(std::size_t size, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train fraction must lie in (0, 1)");
  if (size == 0) throw ValidationError("cannot split an empty series");
  return static_cast<std::size_t>(std::floor(static_cast<double>(size) * train_fraction));
}

double NormalizationSpec::scale(std::size_t index, double raw) const {
  const FeatureRange& r = ranges.at(index);
  if (!(r.max > r.min)) return 0.5;
  const double v = (raw - r.min) / (r.max - r.min);
  return std::clamp(v, kClampLow, kClampHigh);
}

std::vector<double> NormalizationSpec::apply(const EnrichedBar& bar) const {
  std::vector<double> out(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k)
    out[k] = scale(k, feature_value(bar, ranges[k].feature));
  return out;
}

NormalizationSpec fit_minmax(const std::vector<EnrichedBar>& train,
                             const std::vector<Feature>& features) {
  NormalizationSpec spec;
  bool any = false;
  for (Feature f : features) {
    FeatureRange r{f, std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
    for (const EnrichedBar& bar : train) {
      if (!bar.usable) continue;
      const double v = feature_value(bar, f);
      r.min = std::min(r.min, v);
      r.max = std::max(r.max, v);
      any = true;
    }
    spec.ranges.push_back(r);
  }
  if (!any) throw ValidationError("cannot fit normalization on an empty training set");
  return spec;
}

std::vector<std::vector<double>> apply_minmax(const NormalizationSpec& spec,
                                              const std::vector<EnrichedBar>& bars) {
  std::vector<std::vector<double>> out;
  out.reserve(bars.size());
  for (const EnrichedBar& bar : bars) out.push_back(spec.apply(bar));
  return out;
}

std::optional<Direction> forward_label(double close_now, double close_later) {
  // Moves within rounding of the threshold are decimal ties and stay excluded.
  constexpr double kTieTolerance = 1e-12;
  const double ret = (close_later - close_now) / close_now;
  if (ret > kLabelThreshold + kTieTolerance) return Direction::kUp;
  if (ret < -kLabelThreshold - kTieTolerance) return Direction::kDown;
  return std::nullopt;
}

std::size_t first_window_anchor(std::size_t seq_len) { return kWarmupBars + seq_len - 1; }

std::vector<std::vector<double>> forecast_window(const std::vector<EnrichedBar>& bars,
                                                 const NormalizationSpec& spec,
                                                 std::size_t anchor, std::size_t seq_len) {
  if (seq_len == 0 || anchor + 1 < seq_len || anchor >= bars.size())
    throw ValidationError("forecast window out of range at index " + std::to_string(anchor));
  std::vector<std::vector<double>> window;
  window.reserve(seq_len);
  for (std::size_t t = anchor + 1 - seq_len; t <= anchor; ++t) {
    if (!bars[t].usable)
      throw ValidationError("forecast window touches warm-up bar " + std::to_string(t));
    window.push_back(spec.apply(bars[t]));
  }
  return window;
}

std::vector<ForecastSample> build_forecast_dataset(const std::vector<EnrichedBar>& bars,
                                                   const NormalizationSpec& spec,
                                                   std::size_t seq_len, std::size_t begin,
                                                   std::size_t end) {
  std::vector<ForecastSample> samples;
  end = std::min(end, bars.size());
  begin = std::max(begin, first_window_anchor(seq_len));
  for (std::size_t t = begin; t < end && t + kLabelHorizon < bars.size(); ++t) {
    auto label = forward_label(bars[t].quote.close, bars[t + kLabelHorizon].quote.close);
    if (!label) continue;
    samples.push_back({forecast_window(bars, spec, t, seq_len), *label, t});
  }
  return samples;
}

void write_feature_dump(const std::vector<EnrichedBar>& bars, const NormalizationSpec& spec,
                        std::size_t split, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "index,date,split,usable,close";
  for (const FeatureRange& r : spec.ranges) out << ",n_" << feature_name(r.feature);
  out << ",label\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const EnrichedBar& bar = bars[i];
    out << i << ',' << format_date(bar.quote.date) << ',' << (i < split ? "train" : "test") << ','
        << (bar.usable ? 1 : 0) << ',' << format_double(bar.quote.close);
    for (std::size_t k = 0; k < spec.ranges.size(); ++k)
      out << ',' << (bar.usable ? format_double(spec.scale(k, feature_value(bar, spec.ranges[k].feature))) : "");
    std::string label;
    if (i + kLabelHorizon < bars.size()) {
      auto l = forward_label(bar.quote.close, bars[i + kLabelHorizon].quote.close);
      if (l) label = *l == Direction::kUp ? "up" : "down";
    }
    out << ',' << label << '\n';
  }
}

}  // namespace qfx
