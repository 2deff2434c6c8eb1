#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"

namespace fedsac::env {

/// Hourly base price series with z-score statistics of its training split.
class PriceBook {
 public:
  PriceBook(std::vector<double> base, double train_split) : base_(std::move(base)) {
    if (base_.size() < 48) {
      throw RangeError("price series needs at least 48 hours");
    }
    if (!(train_split > 0.0 && train_split <= 1.0)) {
      throw RangeError("train_split must lie in (0, 1]");
    }
    train_hours_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(train_split * static_cast<double>(base_.size()))));
    double sum = 0.0;
    for (std::size_t h = 0; h < train_hours_; ++h) sum += base_[h];
    mean_ = sum / static_cast<double>(train_hours_);
    double sq = 0.0;
    for (std::size_t h = 0; h < train_hours_; ++h) sq += (base_[h] - mean_) * (base_[h] - mean_);
    std_ = std::max(std::sqrt(sq / static_cast<double>(train_hours_)), 1e-6);
  }

  std::size_t hours() const noexcept { return base_.size(); }
  std::size_t days() const noexcept { return base_.size() / 24; }
  /// Hours [0, train_hours) form the training split; the rest is held out.
  std::size_t train_hours() const noexcept { return train_hours_; }
  double mean() const noexcept { return mean_; }
  double std() const noexcept { return std_; }
  const std::vector<double>& base() const noexcept { return base_; }

  double base_at(long hour) const {
    if (hour < 0 || hour >= static_cast<long>(base_.size())) {
      throw RangeError("price hour " + std::to_string(hour) + " outside the series");
    }
    return base_[static_cast<std::size_t>(hour)];
  }

  double normalize(double price) const { return (price - mean_) / std_; }

 private:
  std::vector<double> base_;
  std::size_t train_hours_ = 0;
  double mean_ = 0.0;
  double std_ = 1.0;
};

/// Reads `hour,price` rows; hours must be consecutive from 0.
inline PriceBook ingest_prices(const std::filesystem::path& file, double train_split) {
  auto table = csv::read_table(file, {"hour", "price"});
  std::vector<double> base;
  base.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto ctx = file.string() + ":" + std::to_string(table.line_numbers[i]);
    const long long hour = csv::parse_int(table.rows[i][0], ctx);
    if (hour != static_cast<long long>(i)) {
      throw GapError(ctx + ": expected hour " + std::to_string(i) + ", found " +
                     std::to_string(hour));
    }
    base.push_back(csv::parse_double(table.rows[i][1], ctx));
  }
  return PriceBook(std::move(base), train_split);
}

/// Per-station price perturbations of one episode: a whole-hour shift of the
/// base series and an additive offset drawn afresh for every hour.
struct StationOffsets {
  int time_offset = 0;
  long first_hour = 0;              ///< absolute hour of additive[0]
  std::vector<double> additive;     ///< one draw per hour from first_hour on
};

struct PriceNoise {
  int max_time_offset = 4;
  double max_additive = 10.0;
};

inline StationOffsets sample_offsets(Rng& rng, const PriceNoise& noise, long first_hour,
                                     int n_hours) {
  StationOffsets o;
  o.time_offset = uniform_int(rng, -noise.max_time_offset, noise.max_time_offset);
  o.first_hour = first_hour;
  o.additive.resize(static_cast<std::size_t>(n_hours));
  for (auto& a : o.additive) {
    a = noise.max_additive > 0.0 ? uniform(rng, -noise.max_additive, noise.max_additive) : 0.0;
  }
  return o;
}

/// ξ at a station for absolute hour t: base[t + shift] + additive(t).
inline double station_price(const PriceBook& book, const StationOffsets& o, long hour) {
  const long k = hour - o.first_hour;
  if (k < 0 || k >= static_cast<long>(o.additive.size())) {
    throw RangeError("station_price: hour " + std::to_string(hour) + " outside the episode");
  }
  return book.base_at(hour + o.time_offset) + o.additive[static_cast<std::size_t>(k)];
}

}  // namespace fedsac::env
