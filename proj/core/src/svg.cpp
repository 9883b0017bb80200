#include "vsvio/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace vsvio::svg {

namespace {

constexpr double kWidth = 720, kHeight = 360;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 60;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string header(const std::string& title) {
  std::string s = fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                      "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" font-size=\"12\">\n",
                      kWidth, kHeight, kWidth, kHeight);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt("<text x=\"%.1f\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">", kWidth / 2) +
       escape(title) + "</text>\n";
  return s;
}

std::string axes(double y_min, double y_max) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string s = fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                      x0, y0, x1, y0);
  s += fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", x0, y0, x0, y1);
  for (int k = 0; k <= 4; ++k) {
    const double v = y_min + (y_max - y_min) * k / 4.0;
    const double y = y0 - (y0 - y1) * k / 4.0;
    s += fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", x0, y, x1, y);
    s += fmt("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", x0 - 6, y + 4, v);
  }
  return s;
}

}  // namespace

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars, double y_max) {
  if (y_max <= 0) y_max = 1.0;
  std::string s = header(title) + axes(0.0, y_max);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = bars.empty() ? 0 : (x1 - x0) / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    if (bars[i].value) {
      const double v = std::clamp(*bars[i].value, 0.0, y_max);
      const double h = (y0 - y1) * v / y_max;
      s += fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#4a7ab5\"/>\n",
               cx - slot * 0.35, y0 - h, slot * 0.7, h);
    } else {
      s += fmt("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" fill=\"#999\">n/a</text>\n", cx,
               y0 - 6);
    }
    s += fmt("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"10\">", cx, y0 + 16) +
         escape(bars[i].label) + "</text>\n";
  }
  s += fmt("<text x=\"16\" y=\"%.1f\" transform=\"rotate(-90 16 %.1f)\" text-anchor=\"middle\">",
           (y0 + y1) / 2, (y0 + y1) / 2) +
       escape(y_label) + "</text>\n";
  s += "</svg>\n";
  return s;
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series, double y_min, double y_max) {
  if (y_max <= y_min) y_max = y_min + 1.0;
  std::string s = header(title) + axes(y_min, y_max);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::size_t n = 0;
  for (const auto& se : series) n = std::max(n, se.y.size());
  const double dx = n > 1 ? (x1 - x0) / static_cast<double>(n - 1) : 0.0;
  auto ypos = [&](double v) { return y0 - (y0 - y1) * (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min); };
  double legend_y = kTop + 4;
  for (const auto& se : series) {
    if (se.steps) {
      for (std::size_t i = 0; i < se.y.size(); ++i) {
        if (se.y[i] == 0.0) continue;
        const double x = x0 + dx * static_cast<double>(i);
        s += fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke-width=\"1\" ", x, y0, x,
                 ypos(se.y[i])) +
             "stroke=\"" + escape(se.color) + "\" stroke-opacity=\"0.35\"/>\n";
      }
    } else if (!se.y.empty()) {
      s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + escape(se.color) + "\" points=\"";
      for (std::size_t i = 0; i < se.y.size(); ++i) {
        s += fmt("%.1f,%.1f ", x0 + dx * static_cast<double>(i), ypos(se.y[i]));
      }
      s += "\"/>\n";
    }
    s += fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" ", x1 - 150, legend_y) + "fill=\"" +
         escape(se.color) + "\"/>\n";
    s += fmt("<text x=\"%.1f\" y=\"%.1f\">", x1 - 135, legend_y + 9) + escape(se.name) + "</text>\n";
    legend_y += 16;
  }
  s += fmt("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">", (x0 + x1) / 2, kHeight - 20) +
       escape(x_label) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace vsvio::svg
