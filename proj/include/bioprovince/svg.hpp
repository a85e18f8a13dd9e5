#pragma once

// Minimal SVG chart writers: line plots with bands, latitude x depth raster
// maps, heatmaps, stacked bars and scatter plots with a fitted line. Numbers
// are printed with fixed precision so output is byte-stable.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bioprovince/errors.hpp"

namespace bioprovince::svg {

inline std::string num(double v) {
  if (!std::isfinite(v)) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Categorical palette; labels beyond its length wrap around.
inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors{
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
      "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd"};
  return colors;
}

inline const std::string& color_for(int label) {
  const auto& p = palette();
  const auto n = static_cast<int>(p.size());
  return p[static_cast<std::size_t>(((label - 1) % n + n) % n)];
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void raw(const std::string& element) { body_ << element << '\n'; }

  void rect(double x, double y, double w, double h, const std::string& fill, double opacity = 1.0) {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << '"';
    if (opacity < 1.0) body_ << " fill-opacity=\"" << num(opacity) << '"';
    body_ << "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width)
          << "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      body_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    body_ << "\"/>\n";
  }

  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               double opacity) {
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << num(opacity) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      body_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    body_ << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "start",
            int size = 12) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s)
          << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\""
        << num(height_) << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f << str();
  }

 private:
  double width_, height_;
  std::ostringstream body_;
};

// Linear map from a data range onto a pixel range; a degenerate range maps to
// the midpoint.
struct Axis {
  double lo = 0.0, hi = 1.0, px_lo = 0.0, px_hi = 1.0;
  double operator()(double v) const {
    if (hi == lo) return 0.5 * (px_lo + px_hi);
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

inline std::pair<double, double> range_of(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

struct Frame {
  double width = 640, height = 420, left = 70, right = 20, top = 40, bottom = 50;
};

inline void draw_axes(Document& doc, const Frame& f, const Axis& x, const Axis& y,
                      const std::string& title, const std::string& xlabel,
                      const std::string& ylabel) {
  const double x0 = f.left, x1 = f.width - f.right, y0 = f.height - f.bottom, y1 = f.top;
  doc.line(x0, y0, x1, y0, "black");
  doc.line(x0, y0, x0, y1, "black");
  for (int t = 0; t <= 4; ++t) {
    const double vx = x.lo + (x.hi - x.lo) * t / 4.0;
    const double vy = y.lo + (y.hi - y.lo) * t / 4.0;
    doc.line(x(vx), y0, x(vx), y0 + 4, "black");
    doc.text(x(vx), y0 + 18, num(vx), "middle", 10);
    doc.line(x0 - 4, y(vy), x0, y(vy), "black");
    doc.text(x0 - 6, y(vy) + 3, num(vy), "end", 10);
  }
  doc.text(f.width / 2, 22, title, "middle", 14);
  doc.text((x0 + x1) / 2, f.height - 10, xlabel, "middle");
  doc.raw("<text x=\"14\" y=\"" + num((y0 + y1) / 2) +
          "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
          num((y0 + y1) / 2) + ")\">" + escape(ylabel) + "</text>");
}

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> lower;  // optional band, same length as y
  std::vector<double> upper;
};

inline Document line_plot(const std::vector<double>& x, const std::vector<Series>& series,
                          const std::string& title, const std::string& xlabel,
                          const std::string& ylabel) {
  Frame f;
  Document doc(f.width, f.height);
  std::vector<double> ys;
  for (const auto& s : series) {
    ys.insert(ys.end(), s.y.begin(), s.y.end());
    ys.insert(ys.end(), s.lower.begin(), s.lower.end());
    ys.insert(ys.end(), s.upper.begin(), s.upper.end());
  }
  const auto [xlo, xhi] = range_of(x);
  const auto [ylo, yhi] = range_of(ys);
  const Axis ax{xlo, xhi, f.left, f.width - f.right};
  const Axis ay{ylo, yhi, f.height - f.bottom, f.top};
  draw_axes(doc, f, ax, ay, title, xlabel, ylabel);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& c = color_for(static_cast<int>(s) + 1);
    const auto& sr = series[s];
    if (sr.lower.size() == x.size() && sr.upper.size() == x.size() && !x.empty()) {
      std::vector<std::pair<double, double>> band;
      for (std::size_t i = 0; i < x.size(); ++i) band.emplace_back(ax(x[i]), ay(sr.upper[i]));
      for (std::size_t i = x.size(); i-- > 0;) band.emplace_back(ax(x[i]), ay(sr.lower[i]));
      doc.polygon(band, c, 0.2);
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size() && i < sr.y.size(); ++i) pts.emplace_back(ax(x[i]), ay(sr.y[i]));
    doc.polyline(pts, c);
    for (const auto& [px, py] : pts) doc.circle(px, py, 2.5, c);
    doc.text(f.width - f.right - 5, f.top + 14.0 * static_cast<double>(s + 1), sr.name, "end");
    doc.rect(f.width - f.right - 5 - 8.0 * static_cast<double>(sr.name.size()) - 14,
             f.top + 14.0 * static_cast<double>(s + 1) - 9, 10, 10, c);
  }
  return doc;
}

// Latitude x depth raster, depth increasing downward. Each point is drawn as a
// cell sized from the median spacing of the distinct coordinates; opacity is
// optional (one value per point in [0, 1]).
inline Document raster_map(std::span<const double> lat, std::span<const double> depth,
                           std::span<const int> labels, std::span<const double> opacity,
                           const std::string& title) {
  Frame f;
  f.width = 720;
  Document doc(f.width, f.height);
  const auto [xlo, xhi] = range_of(lat);
  const auto [dlo, dhi] = range_of(depth);
  const Axis ax{xlo, xhi, f.left, f.width - f.right - 80};
  const Axis ay{dlo, dhi, f.top, f.height - f.bottom};
  draw_axes(doc, f, ax, Axis{dhi, dlo, f.height - f.bottom, f.top}, title, "latitude (deg)",
            "depth (m)");

  auto step = [](std::span<const double> v, double span_px, double span_data) {
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    if (u.size() < 2 || span_data == 0.0) return 8.0;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < u.size(); ++i) gaps.push_back(u[i] - u[i - 1]);
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    return std::max(1.0, gaps[gaps.size() / 2] / span_data * span_px);
  };
  const double cw = step(lat, ax.px_hi - ax.px_lo, xhi - xlo);
  const double ch = step(depth, ay.px_hi - ay.px_lo, dhi - dlo);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const double op = opacity.empty() ? 1.0 : std::clamp(opacity[j], 0.0, 1.0);
    doc.rect(ax(lat[j]) - cw / 2, ay(depth[j]) - ch / 2, cw, ch, color_for(labels[j]), op);
  }
  int kmax = 0;
  for (int l : labels) kmax = std::max(kmax, l);
  for (int k = 1; k <= kmax; ++k) {
    const double y = f.top + 16.0 * k;
    doc.rect(f.width - 90, y - 10, 12, 12, color_for(k));
    doc.text(f.width - 72, y, "cluster " + std::to_string(k));
  }
  return doc;
}

// Row-normalized table as a white-to-blue heatmap with the value printed in
// each cell.
inline Document heatmap(const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                        const std::vector<std::vector<double>>& values, const std::string& title) {
  const double cell = 48, left = 120, top = 60;
  Document doc(left + cell * static_cast<double>(cols.size()) + 20,
               top + cell * static_cast<double>(rows.size()) + 20);
  doc.text(left, 24, title, "start", 14);
  for (std::size_t c = 0; c < cols.size(); ++c)
    doc.text(left + cell * (static_cast<double>(c) + 0.5), top - 8, cols[c], "middle");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    doc.text(left - 6, top + cell * (static_cast<double>(r) + 0.5) + 4, rows[r], "end");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = std::clamp(values[r][c], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      doc.rect(left + cell * static_cast<double>(c), top + cell * static_cast<double>(r), cell, cell, fill);
      doc.text(left + cell * (static_cast<double>(c) + 0.5), top + cell * (static_cast<double>(r) + 0.5) + 4,
               num(values[r][c]).substr(0, 4), "middle", 10);
    }
  }
  return doc;
}

// One bar per category; segments are the group shares (each row sums to 1).
inline Document stacked_bar(const std::vector<std::string>& categories,
                            const std::vector<std::string>& groups,
                            const std::vector<std::vector<double>>& shares, const std::string& title) {
  Frame f;
  f.width = std::max(360.0, 120.0 + 40.0 * static_cast<double>(categories.size()) + 160.0);
  Document doc(f.width, f.height);
  const double plot_w = f.width - f.left - f.right - 140;
  const Axis ay{0.0, 1.0, f.height - f.bottom, f.top};
  draw_axes(doc, f, Axis{0.0, 1.0, f.left, f.left + plot_w}, ay, title, "cluster", "mean share");
  const double bw = plot_w / std::max<double>(1.0, static_cast<double>(categories.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    double acc = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double v = shares[c][g];
      doc.rect(f.left + bw * static_cast<double>(c) + 4, ay(acc + v), bw - 8, ay(acc) - ay(acc + v),
               color_for(static_cast<int>(g) + 1));
      acc += v;
    }
    doc.text(f.left + bw * (static_cast<double>(c) + 0.5), f.height - f.bottom + 32, categories[c],
             "middle", 10);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double y = f.top + 16.0 * static_cast<double>(g + 1);
    doc.rect(f.width - 150, y - 10, 12, 12, color_for(static_cast<int>(g) + 1));
    doc.text(f.width - 132, y, groups[g]);
  }
  return doc;
}

inline Document scatter_fit(std::span<const double> x, std::span<const double> y, double slope,
                            double intercept, const std::string& title, const std::string& xlabel,
                            const std::string& ylabel) {
  Frame f;
  Document doc(f.width, f.height);
  const auto [xlo, xhi] = range_of(x);
  const auto [ylo, yhi] = range_of(y);
  const Axis ax{xlo, xhi, f.left, f.width - f.right};
  const Axis ay{ylo, yhi, f.height - f.bottom, f.top};
  draw_axes(doc, f, ax, ay, title, xlabel, ylabel);
  for (std::size_t i = 0; i < x.size(); ++i) doc.circle(ax(x[i]), ay(y[i]), 2.0, "#7f7f7f");
  const auto clip = [&](double v) { return std::clamp(v, ylo, yhi); };
  doc.line(ax(xlo), ay(clip(intercept + slope * xlo)), ax(xhi), ay(clip(intercept + slope * xhi)),
           "#d62728", 2.0);
  return doc;
}

}  // namespace bioprovince::svg
