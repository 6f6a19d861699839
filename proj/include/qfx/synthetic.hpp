#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qfx/market_data.hpp"

namespace qfx {

// Seeded trend + sine + noise daily series on business days.
struct SyntheticSpec {
  std::size_t days = 1500;
  double start_price = 30.0;
  double drift = 0.0001;        // log-return per day
  double sine_amplitude = 0.04; // log-price amplitude
  double sine_period = 120.0;   // days
  double noise = 0.004;         // per-day log-return sigma
  std::uint64_t seed = 42;
  Date start_date = Date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};
};

std::vector<Quote> generate_synthetic_quotes(const SyntheticSpec& spec);

// Strictly increasing closes (noise-free geometric drift).
std::vector<Quote> monotone_uptrend(std::size_t days, double start_price = 30.0,
                                    double daily_growth = 0.003);

}  // namespace qfx
