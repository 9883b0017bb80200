#pragma once

// Small static SVG charts written as plain text.

#include <optional>
#include <string>
#include <vector>

namespace vsvio::svg {

struct Bar {
  std::string label;
  std::optional<double> value;  // absent bars are drawn as an empty slot
};

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars, double y_max = 1.0);

struct Series {
  std::string name;
  std::string color;
  std::vector<double> y;
  bool steps = false;  // draw as sticks (0/1 decisions)
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series, double y_min = 0.0, double y_max = 1.0);

}  // namespace vsvio::svg
