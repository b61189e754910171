#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pggtrack/tensor_io.hpp"

namespace pggtrack {

// Just enough SVG to emit metric curves and embedding scatters.
class SvgPlot {
 public:
  SvgPlot(int width, int height, std::string title = "")
      : width_(width), height_(height), title_(std::move(title)) {}

  void add_line(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color) {
    series_.push_back({xs, ys, color, false});
  }
  void add_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                   const std::string& color) {
    series_.push_back({xs, ys, color, true});
  }

  std::string render() const {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : series_)
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (first) {
          x0 = x1 = s.xs[i];
          y0 = y1 = s.ys[i];
          first = false;
        }
        x0 = std::min(x0, s.xs[i]);
        x1 = std::max(x1, s.xs[i]);
        y0 = std::min(y0, s.ys[i]);
        y1 = std::max(y1, s.ys[i]);
      }
    if (x1 - x0 < 1e-12) x1 = x0 + 1;
    if (y1 - y0 < 1e-12) y1 = y0 + 1;
    const double pad = 40.0;
    auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (width_ - 2 * pad); };
    auto py = [&](double y) { return height_ - pad - (y - y0) / (y1 - y0) * (height_ - 2 * pad); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
        << height_ << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title_.empty())
      out << "<text x=\"" << width_ / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
          << title_ << "</text>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << height_ - pad << "\" x2=\"" << width_ - pad
        << "\" y2=\"" << height_ - pad << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
        << height_ - pad << "\" stroke=\"black\"/>\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g / %.3g", x0, x1);
    out << "<text x=\"" << width_ - pad << "\" y=\"" << height_ - pad + 16
        << "\" text-anchor=\"end\" font-size=\"10\">x: " << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g / %.3g", y0, y1);
    out << "<text x=\"" << pad << "\" y=\"" << pad - 6 << "\" font-size=\"10\">y: " << buf
        << "</text>\n";
    for (const auto& s : series_) {
      if (s.scatter) {
        for (std::size_t i = 0; i < s.xs.size(); ++i)
          out << "<circle cx=\"" << px(s.xs[i]) << "\" cy=\"" << py(s.ys[i])
              << "\" r=\"2.5\" fill=\"" << s.color << "\" fill-opacity=\"0.7\"/>\n";
      } else {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.xs.size(); ++i)
          out << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
        out << "\"/>\n";
      }
    }
    out << "</svg>\n";
    return out.str();
  }

  void write(const std::filesystem::path& path) const { write_text_atomic(path, render()); }

 private:
  struct Series {
    std::vector<double> xs, ys;
    std::string color;
    bool scatter;
  };
  int width_, height_;
  std::string title_;
  std::vector<Series> series_;
};

}  // namespace pggtrack
