#pragma once

#include <string>
#include <vector>

namespace planprobe::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 420;
};

/// Static SVG line chart with axes, ticks and a legend.
std::string line_chart(const Chart& chart);

/// Bar chart; `edges` has one more entry than `counts`.
std::string histogram(const std::string& title, const std::string& x_label, const std::vector<double>& edges,
                      const std::vector<double>& counts);

std::string escape(const std::string& text);

void write_file(const std::string& path, const std::string& contents);

}  // namespace planprobe::svg
