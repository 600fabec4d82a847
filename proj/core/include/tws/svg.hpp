#pragma once

#include <span>
#include <string>
#include <vector>

namespace tws::svg {

struct Series {
  std::string label;
  std::vector<double> values;
  std::string color = "#1f77b4";
};

/// Minimal standalone SVG line chart: shared y axis from 0 to the largest
/// value, x axis labelled by weekday when `weekly` is set.
std::string line_chart(const std::string& title, std::span<const Series> series,
                       bool weekly = true, int width = 900, int height = 300);

/// Qualitative palette entry i (cycles).
std::string palette(std::size_t i);

}  // namespace tws::svg
