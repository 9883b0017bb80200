#include "vsvio/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "vsvio/errors.hpp"
#include "vsvio/svg.hpp"

namespace vsvio::analysis {

std::optional<std::size_t> bin_index(double value, double width, std::size_t count) {
  if (!(value >= 0.0) || !(width > 0.0)) return std::nullopt;
  // edges are the decimal multiples k*w: 0.3 / 0.1 lands just under 3 in
  // binary, so allow a tiny relative slack before flooring
  const double k = std::floor(value / width + 1e-9);
  if (k >= static_cast<double>(count)) return std::nullopt;
  return static_cast<std::size_t>(k);
}

std::size_t BinTable::occupied() const {
  return static_cast<std::size_t>(std::count_if(usage.begin(), usage.end(),
                                                [](const auto& u) { return u.has_value(); }));
}

namespace {

BinTable make_table(const char* name, double width, std::size_t count) {
  BinTable t;
  t.quantity = name;
  t.width = width;
  t.counts.assign(count, 0);
  t.usage.assign(count, std::nullopt);
  return t;
}

}  // namespace

UsageTables usage_analysis(const RunReport& report) {
  UsageTables out{make_table("yaw_rate", kYawBinWidth, kYawBins),
                  make_table("speed", kSpeedBinWidth, kSpeedBins)};
  std::vector<double> yaw_on(kYawBins, 0.0), speed_on(kSpeedBins, 0.0);
  for (const auto& seed : report.seeds) {
    for (const auto& tr : seed.traces) {
      for (std::size_t t = 1; t < tr.decisions.size(); ++t) {
        if (auto k = bin_index(tr.yaw_rate[t], kYawBinWidth, kYawBins)) {
          ++out.yaw_rate.counts[*k];
          yaw_on[*k] += tr.decisions[t];
        }
        if (auto k = bin_index(tr.speed[t], kSpeedBinWidth, kSpeedBins)) {
          ++out.speed.counts[*k];
          speed_on[*k] += tr.decisions[t];
        }
      }
    }
  }
  for (std::size_t k = 0; k < kYawBins; ++k)
    if (out.yaw_rate.counts[k]) out.yaw_rate.usage[k] = yaw_on[k] / static_cast<double>(out.yaw_rate.counts[k]);
  for (std::size_t k = 0; k < kSpeedBins; ++k)
    if (out.speed.counts[k]) out.speed.usage[k] = speed_on[k] / static_cast<double>(out.speed.counts[k]);
  return out;
}

void write_bins_csv(std::ostream& out, const BinTable& table) {
  out << "bin_lower,bin_upper,count,usage\n";
  char buf[128];
  for (std::size_t k = 0; k < table.counts.size(); ++k) {
    if (!table.usage[k]) continue;  // empty bins are absent
    std::snprintf(buf, sizeof buf, "%.1f,%.1f,%zu,%.6f\n", table.lower(k), table.upper(k),
                  table.counts[k], *table.usage[k]);
    out << buf;
  }
}

std::string bins_svg(const BinTable& table, const std::string& title) {
  std::vector<svg::Bar> bars;
  char buf[64];
  for (std::size_t k = 0; k < table.counts.size(); ++k) {
    std::snprintf(buf, sizeof buf, "[%.1f,%.1f)", table.lower(k), table.upper(k));
    bars.push_back({buf, table.usage[k]});
  }
  return svg::bar_chart(title, "visual usage", bars, 1.0);
}

std::vector<double> moving_average(std::span<const int> values, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(values.size());
  std::vector<double> prefix(values.size() + 1, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + values[i];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size(), i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

void write_trace_csv(std::ostream& out, const SequenceTrace& trace, std::size_t window) {
  const auto local = moving_average(trace.decisions, window);
  out << "t,p_visual,d,speed,yaw_rate,local_usage\n";
  char buf[192];
  for (std::size_t i = 0; i < trace.decisions.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%d,%.9g,%.9g,%.9g\n", i + 1, trace.p_visual[i],
                  trace.decisions[i], trace.speed[i], trace.yaw_rate[i], local[i]);
    out << buf;
  }
}

std::string trace_svg(const SequenceTrace& trace, const std::string& title, std::size_t window) {
  std::vector<double> d(trace.decisions.begin(), trace.decisions.end());
  return svg::line_chart(title, "frame",
                         {{"d_t", "#999999", d, true},
                          {"p_t (visual)", "#d62728", trace.p_visual, false},
                          {"local usage", "#1f77b4", moving_average(trace.decisions, window), false}});
}

const SequenceTrace& find_trace(const RunReport& report, std::size_t sequence) {
  if (!report.seeds.empty()) {
    for (const auto& tr : report.seeds.front().traces)
      if (tr.sequence == sequence) return tr;
  }
  throw ConfigError("no decision trace for sequence " + std::to_string(sequence));
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> speed_usage_correlation(const BinTable& speed) {
  std::vector<double> c, u;
  for (std::size_t k = 0; k < speed.usage.size(); ++k) {
    if (!speed.usage[k]) continue;
    c.push_back(0.5 * (speed.lower(k) + speed.upper(k)));
    u.push_back(*speed.usage[k]);
  }
  return spearman(c, u);
}

ResetStats reset_stats(const RunReport& report) {
  ResetStats s;
  for (const auto& seed : report.seeds) {
    for (const auto& tr : seed.traces) {
      for (std::size_t t = 1; t + 1 < tr.decisions.size(); ++t) {
        if (!tr.decisions[t]) continue;
        ++s.firings;
        if (tr.p_visual[t + 1] < tr.p_visual[t]) ++s.resets;
      }
    }
  }
  return s;
}

}  // namespace vsvio::analysis
