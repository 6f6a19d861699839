#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qfx {

using Date = std::chrono::year_month_day;

// Parses "YYYY-MM-DD". Returns nullopt for anything else, including
// impossible calendar days.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& date);

struct Quote {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

// Number of leading bars whose indicators are incomplete (MA60 needs 60 closes).
inline constexpr std::size_t kWarmupBars = 59;

struct EnrichedBar {
  Quote quote;
  double ma5 = 0.0;
  double ma10 = 0.0;
  double ma20 = 0.0;
  double ma60 = 0.0;
  double vol20 = 0.0;  // population sigma / mean of the last 20 closes
  bool usable = false;
};

enum class Feature { kOpen, kHigh, kLow, kClose, kMa5, kMa10, kMa20, kMa60, kVol20 };

double feature_value(const EnrichedBar& bar, Feature feature);
std::string_view feature_name(Feature feature);

inline constexpr std::array<Feature, 6> kForecastFeatures = {
    Feature::kOpen, Feature::kHigh, Feature::kLow, Feature::kClose, Feature::kMa5, Feature::kMa10};

inline constexpr std::array<Feature, 9> kAllFeatures = {
    Feature::kOpen, Feature::kHigh, Feature::kLow,  Feature::kClose, Feature::kMa5,
    Feature::kMa10, Feature::kMa20, Feature::kMa60, Feature::kVol20};

inline constexpr double kClampLow = -0.5;
inline constexpr double kClampHigh = 1.5;

struct FeatureRange {
  Feature feature;
  double min = 0.0;
  double max = 0.0;
};

// Min-max scaling fitted on the training split and frozen afterwards.
struct NormalizationSpec {
  std::vector<FeatureRange> ranges;

  // Scales one raw value of ranges[index]. Degenerate ranges map to 0.5;
  // values outside the fitted range are clamped to [kClampLow, kClampHigh].
  double scale(std::size_t index, double raw) const;
  std::vector<double> apply(const EnrichedBar& bar) const;
};

enum class Direction { kUp = 0, kDown = 1 };

inline constexpr double kLabelThreshold = 0.012;
inline constexpr std::size_t kLabelHorizon = 5;

struct ForecastSample {
  // seq_len rows (days t-seq_len+1 .. t), one column per normalized feature.
  std::vector<std::vector<double>> window;
  Direction label = Direction::kUp;
  std::size_t anchor_index = 0;
};

// Reads a date,open,high,low,close CSV (extra columns are ignored) and
// returns cleaned quotes. Throws ValidationError on unreadable files,
// malformed rows (with line number) or an empty result.
std::vector<Quote> load_quotes(const std::filesystem::path& path);
std::vector<Quote> parse_quotes(std::istream& in, const std::string& source_name = "<stream>");

// Drops rows whose close is missing, zero, negative or non-finite, sorts by
// date and keeps the last record for each duplicated date.
std::vector<Quote> clean_quotes(std::vector<Quote> rows);

void write_quotes_csv(const std::vector<Quote>& quotes, const std::filesystem::path& path);

std::vector<EnrichedBar> compute_indicators(const std::vector<Quote>& quotes);

// Returns the split position floor(size * train_fraction).
std::size_t split_index(std::size_t size, double train_fraction);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> temporal_split(const std::vector<T>& items,
                                                         double train_fraction) {
  const std::size_t cut = split_index(items.size(), train_fraction);
  return {std::vector<T>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(cut), items.end())};
}

// Fits ranges over the usable bars of `train`. Throws on an empty set.
NormalizationSpec fit_minmax(const std::vector<EnrichedBar>& train,
                             const std::vector<Feature>& features);

std::vector<std::vector<double>> apply_minmax(const NormalizationSpec& spec,
                                              const std::vector<EnrichedBar>& bars);

// Label for the move from close[t] to close[t + kLabelHorizon]; nullopt when
// the move stays within the +-1.2% band (inclusive).
std::optional<Direction> forward_label(double close_now, double close_later);

// The normalized seq_len x |features| window ending at `anchor`. Requires
// every row in the window to be a usable bar.
std::vector<std::vector<double>> forecast_window(const std::vector<EnrichedBar>& bars,
                                                 const NormalizationSpec& spec,
                                                 std::size_t anchor, std::size_t seq_len);

// First anchor whose whole window lies on usable bars.
std::size_t first_window_anchor(std::size_t seq_len);

// Emits one labelled sample per anchor in [begin, end) that has a full
// window and kLabelHorizon days of lookahead inside `bars`. Anchors whose
// move is within the threshold band are skipped.
std::vector<ForecastSample> build_forecast_dataset(const std::vector<EnrichedBar>& bars,
                                                   const NormalizationSpec& spec,
                                                   std::size_t seq_len = 4,
                                                   std::size_t begin = 0,
                                                   std::size_t end = static_cast<std::size_t>(-1));

// Audit dump: one row per bar with raw close, normalized features and label.
void write_feature_dump(const std::vector<EnrichedBar>& bars, const NormalizationSpec& spec,
                        std::size_t split, const std::filesystem::path& path);

}  // namespace qfx
