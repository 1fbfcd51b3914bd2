#include "planprobe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "planprobe/error.hpp"

namespace planprobe::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double left = 70, right = 170, top = 40, bottom = 50;
  int width = 720, height = 420;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void pad_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

void axes(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
  o << "<rect width='100%' height='100%' fill='white'/>\n";
  o << "<text x='" << f.width / 2 << "' y='22' text-anchor='middle' font-size='15'>" << escape(title) << "</text>\n";
  const double bx = f.px(f.x0), ex = f.px(f.x1), by = f.py(f.y0), ey = f.py(f.y1);
  o << "<path d='M" << num(bx) << "," << num(ey) << " L" << num(bx) << "," << num(by) << " L" << num(ex) << ","
    << num(by) << "' stroke='black' fill='none'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 5.0;
    o << "<text x='" << num(f.px(xv)) << "' y='" << num(by + 16) << "' text-anchor='middle' font-size='11'>"
      << tick_label(xv) << "</text>\n";
    o << "<text x='" << num(bx - 6) << "' y='" << num(f.py(yv) + 4) << "' text-anchor='end' font-size='11'>"
      << tick_label(yv) << "</text>\n";
    o << "<line x1='" << num(bx) << "' x2='" << num(ex) << "' y1='" << num(f.py(yv)) << "' y2='" << num(f.py(yv))
      << "' stroke='#e0e0e0'/>\n";
  }
  o << "<text x='" << num((bx + ex) / 2) << "' y='" << f.height - 10 << "' text-anchor='middle' font-size='12'>"
    << escape(xl) << "</text>\n";
  o << "<text transform='translate(16," << num((by + ey) / 2) << ") rotate(-90)' text-anchor='middle' font-size='12'>"
    << escape(yl) << "</text>\n";
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '\'': out += "&apos;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const Chart& chart) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw ShapeError("svg: series '" + s.name + "' has mismatched x/y");
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y)
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  pad_range(x0, x1);
  pad_range(y0, y1);
  Frame f{x0, x1, y0, y1};
  f.width = chart.width;
  f.height = chart.height;

  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height << "'>\n";
  axes(o, f, chart.title, chart.x_label, chart.y_label);
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    o << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8'"
      << (s.dashed ? " stroke-dasharray='6,4'" : "") << " points='";
    for (std::size_t k = 0; k < s.x.size(); ++k)
      if (std::isfinite(s.y[k])) o << num(f.px(s.x[k])) << "," << num(f.py(s.y[k])) << " ";
    o << "'/>\n";
    const double ly = f.top + 16.0 * static_cast<double>(i);
    const double lx = f.width - f.right + 12;
    o << "<line x1='" << num(lx) << "' x2='" << num(lx + 18) << "' y1='" << num(ly) << "' y2='" << num(ly)
      << "' stroke='" << color << "' stroke-width='2'" << (s.dashed ? " stroke-dasharray='4,3'" : "") << "/>\n";
    o << "<text x='" << num(lx + 24) << "' y='" << num(ly + 4) << "' font-size='11'>" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string histogram(const std::string& title, const std::string& x_label, const std::vector<double>& edges,
                      const std::vector<double>& counts) {
  if (edges.size() != counts.size() + 1) throw ShapeError("svg histogram: need counts + 1 edges");
  double y1 = 0.0;
  for (double c : counts) y1 = std::max(y1, c);
  double x0 = edges.empty() ? 0.0 : edges.front(), x1 = edges.empty() ? 1.0 : edges.back();
  double y0 = 0.0;
  pad_range(x0, x1);
  if (y1 <= 0.0) y1 = 1.0;
  Frame f{x0, x1, y0, y1};
  f.right = 30;
  f.width = 720;
  f.height = 420;
  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height << "'>\n";
  axes(o, f, title, x_label, "count");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double l = f.px(edges[i]), r = f.px(edges[i + 1]);
    const double top = f.py(counts[i]), base = f.py(0.0);
    o << "<rect x='" << num(l) << "' y='" << num(top) << "' width='" << num(std::max(0.0, r - l - 1))
      << "' height='" << num(base - top) << "' fill='" << kPalette[0] << "'/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << contents;
}

}  // namespace planprobe::svg
