#include "qfx/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "qfx/nn_core.hpp"

namespace qfx {

namespace {

std::vector<Date> business_days(Date start, std::size_t count) {
  std::vector<Date> out;
  out.reserve(count);
  std::chrono::sys_days day{start};
  while (out.size() < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
    day += std::chrono::days{1};
  }
  return out;
}

}  // namespace

std::vector<Quote> generate_synthetic_quotes(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto dates = business_days(spec.start_date, spec.days);
  std::vector<Quote> out;
  out.reserve(spec.days);
  double walk = 0.0;
  double prev_close = spec.start_price;
  for (std::size_t t = 0; t < spec.days; ++t) {
    walk += spec.drift + spec.noise * gauss(rng);
    const double cycle =
        spec.sine_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.sine_period);
    Quote q;
    q.date = dates[t];
    q.close = spec.start_price * std::exp(walk + cycle);
    q.open = t == 0 ? q.close : prev_close * std::exp(0.25 * spec.noise * gauss(rng));
    const double wiggle_hi = std::abs(0.5 * spec.noise * gauss(rng));
    const double wiggle_lo = std::abs(0.5 * spec.noise * gauss(rng));
    q.high = std::max(q.open, q.close) * std::exp(wiggle_hi);
    q.low = std::min(q.open, q.close) * std::exp(-wiggle_lo);
    out.push_back(q);
    prev_close = q.close;
  }
  return out;
}

std::vector<Quote> monotone_uptrend(std::size_t days, double start_price, double daily_growth) {
  const auto dates = business_days(SyntheticSpec{}.start_date, days);
  std::vector<Quote> out;
  out.reserve(days);
  double price = start_price;
  for (std::size_t t = 0; t < days; ++t) {
    const double open = price;
    price *= 1.0 + daily_growth;
    out.push_back({dates[t], open, price, open, price});
  }
  return out;
}

}  // namespace qfx
