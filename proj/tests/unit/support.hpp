#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "qfx/market_data.hpp"
#include "qfx/trading_env.hpp"

namespace qfx::test {

inline Date day(int offset) {
  const Date base{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}};
  return Date{std::chrono::sys_days{base} + std::chrono::days{offset}};
}

inline std::vector<Quote> quotes_from_closes(const std::vector<double>& closes) {
  std::vector<Quote> q;
  for (std::size_t i = 0; i < closes.size(); ++i)
    q.push_back({day(static_cast<int>(i)), closes[i], closes[i], closes[i], closes[i]});
  return q;
}

// Market with a fixed (P_up, P_down) on every bar.
inline MarketView constant_market(const std::vector<double>& closes, std::array<double, 2> probs = {0.5, 0.5}) {
  auto bars = std::make_shared<std::vector<EnrichedBar>>(compute_indicators(quotes_from_closes(closes)));
  auto fc = std::make_shared<std::vector<std::array<double, 2>>>(bars->size(), probs);
  return {bars, fc};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qfx_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace qfx::test
