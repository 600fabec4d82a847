#include "tws/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace tws::svg {
namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string palette(std::size_t i) {
  static constexpr std::array<const char*, 10> colors = {
      "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % colors.size()];
}

std::string line_chart(const std::string& title, std::span<const Series> series,
                       bool weekly, int width, int height) {
  const double left = 50, right = 150, top = 30, bottom = 30;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::size_t n = 0;
  double ymax = 0.0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) ymax = std::max(ymax, v);
  }
  if (ymax <= 0.0) ymax = 1.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
      << xml_escape(title) << "</text>\n";
  out << "<g stroke=\"#999\" stroke-width=\"1\">"
      << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\"/>"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\"/></g>\n";

  if (weekly && n > 0) {
    static constexpr std::array<const char*, 7> days = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    for (int d = 0; d < 7; ++d) {
      const double x = left + plot_w * d / 7.0;
      out << "<line x1=\"" << num(x) << "\" y1=\"" << top << "\" x2=\"" << num(x) << "\" y2=\""
          << top + plot_h << "\" stroke=\"#eee\"/>";
      out << "<text x=\"" << num(x + plot_w / 14.0) << "\" y=\"" << top + plot_h + 18
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << days[d]
          << "</text>\n";
    }
  }
  out << "<text x=\"" << left - 5 << "\" y=\"" << top + 4
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(ymax)
      << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    if (ser.values.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\" points=\"";
    const double step = n > 1 ? plot_w / static_cast<double>(n - 1) : 0.0;
    for (std::size_t i = 0; i < ser.values.size(); ++i) {
      const double x = left + step * static_cast<double>(i);
      const double y = top + plot_h - plot_h * ser.values[i] / ymax;
      out << num(x) << ',' << num(y) << ' ';
    }
    out << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(s + 1);
    out << "<line x1=\"" << left + plot_w + 10 << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << left + plot_w + 30 << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << ser.color
        << "\" stroke-width=\"2\"/>";
    out << "<text x=\"" << left + plot_w + 35 << "\" y=\"" << num(ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(ser.label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace tws::svg
