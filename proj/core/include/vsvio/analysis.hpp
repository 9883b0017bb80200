#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsvio/evaluate.hpp"

namespace vsvio::analysis {

inline constexpr double kYawBinWidth = 0.1;  // rad/s
inline constexpr std::size_t kYawBins = 7;   // [0, 0.7)
inline constexpr double kSpeedBinWidth = 2.0;  // m/s
inline constexpr std::size_t kSpeedBins = 8;   // [0, 16)
inline constexpr std::size_t kTraceWindow = 31;

/// Bin index of `value` for bins [k w, (k+1) w), k < count; nullopt outside.
std::optional<std::size_t> bin_index(double value, double width, std::size_t count);

struct BinTable {
  std::string quantity;  // "yaw_rate" or "speed"
  double width = 0.0;
  std::vector<std::size_t> counts;
  std::vector<std::optional<double>> usage;  // absent when the bin is empty

  double lower(std::size_t k) const { return width * static_cast<double>(k); }
  double upper(std::size_t k) const { return width * static_cast<double>(k + 1); }
  std::size_t occupied() const;
};

struct UsageTables {
  BinTable yaw_rate;
  BinTable speed;
};

/// Mean d_t per angular-velocity and speed bin over every stored trace.
/// The forced first decision of each trace is excluded.
UsageTables usage_analysis(const RunReport& report);

void write_bins_csv(std::ostream& out, const BinTable& table);
std::string bins_svg(const BinTable& table, const std::string& title);

/// Centered moving average truncated at the boundaries.
std::vector<double> moving_average(std::span<const int> values, std::size_t window);

/// CSV columns t,p_visual,d,speed,yaw_rate,local_usage (t is 1-based).
void write_trace_csv(std::ostream& out, const SequenceTrace& trace,
                     std::size_t window = kTraceWindow);
std::string trace_svg(const SequenceTrace& trace, const std::string& title,
                      std::size_t window = kTraceWindow);

/// Finds the trace of `sequence` in the first seed of the report; raises
/// ConfigError for an unknown id.
const SequenceTrace& find_trace(const RunReport& report, std::size_t sequence);

/// Spearman rank correlation with average ranks for ties; nullopt when
/// fewer than two points or a constant input.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Speed-bin centers vs usage over occupied bins.
std::optional<double> speed_usage_correlation(const BinTable& speed);

struct ResetStats {
  std::size_t firings = 0;
  std::size_t resets = 0;
  double fraction() const {
    return firings ? static_cast<double>(resets) / static_cast<double>(firings) : 0.0;
  }
};

/// Over firings d_t = 1 with t >= 2 that have a successor step, counts how
/// often p_{t+1} < p_t.
ResetStats reset_stats(const RunReport& report);

}  // namespace vsvio::analysis
