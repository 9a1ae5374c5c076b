#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "survivalkit/errors.hpp"

namespace survivalkit {

// One drawable series. Step series are drawn right-continuous (horizontal
// then vertical), smooth series as polylines.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
  bool step = false;
  bool scatter = false;
  std::string color;  // assigned from the palette when empty
};

struct AxesConfig {
  std::string title;
  std::string x_label = "time (months)";
  std::string y_label = "survival probability";
  double width = 800.0;
  double height = 500.0;
  double margin_left = 70.0;
  double margin_right = 160.0;
  double margin_top = 40.0;
  double margin_bottom = 55.0;
  bool y_is_probability = true;  // fixes the y range to [0, 1]
  bool half_reference_line = false;
  bool zero_reference_line = false;
  bool identity_reference_line = false;
  std::vector<double> extra_y_lines;
};

// The affine data-to-pixel mapping used by every plot; exposed so tests can
// invert rendered coordinates exactly.
struct PlotGeometry {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  double px_left = 0.0, px_width = 1.0;
  double px_top = 0.0, px_height = 1.0;

  double x_to_px(double x) const { return px_left + (x - x_min) / (x_max - x_min) * px_width; }
  double y_to_px(double y) const { return px_top + (y_max - y) / (y_max - y_min) * px_height; }
  double px_to_x(double px) const { return x_min + (px - px_left) / px_width * (x_max - x_min); }
  double px_to_y(double px) const { return y_max - (px - px_top) / px_height * (y_max - y_min); }
};

namespace detail {

inline std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline const std::vector<std::string>& svg_palette() {
  static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                             "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return p;
}

inline std::string xml_escape(const std::string& s) {
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

// Round tick spacing to 1/2/5 times a power of ten.
inline double nice_step(double span, int target_ticks) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / std::max(1, target_ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double step;
  if (frac <= 1.0) {
    step = 1.0;
  } else if (frac <= 2.0) {
    step = 2.0;
  } else if (frac <= 5.0) {
    step = 5.0;
  } else {
    step = 10.0;
  }
  return step * mag;
}

}  // namespace detail

inline PlotGeometry plot_geometry(const std::vector<SvgSeries>& series, const AxesConfig& axes) {
  PlotGeometry geo;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        geo.x_min = geo.x_max = x;
        geo.y_min = geo.y_max = y;
        first = false;
      } else {
        geo.x_min = std::min(geo.x_min, x);
        geo.x_max = std::max(geo.x_max, x);
        geo.y_min = std::min(geo.y_min, y);
        geo.y_max = std::max(geo.y_max, y);
      }
    }
  }
  if (axes.y_is_probability) {
    geo.y_min = 0.0;
    geo.y_max = 1.0;
  }
  if (geo.x_max == geo.x_min) geo.x_max = geo.x_min + 1.0;
  if (geo.y_max == geo.y_min) geo.y_max = geo.y_min + 1.0;
  geo.px_left = axes.margin_left;
  geo.px_width = axes.width - axes.margin_left - axes.margin_right;
  geo.px_top = axes.margin_top;
  geo.px_height = axes.height - axes.margin_top - axes.margin_bottom;
  return geo;
}

// Render series into a self-contained SVG 1.1 document. Output is fully
// deterministic: fixed-precision coordinates, no timestamps, generic fonts.
inline std::string render_xy_svg(const std::vector<SvgSeries>& series, const AxesConfig& axes) {
  if (series.empty()) throw InputError("render: no curves to draw");
  for (const auto& s : series) {
    if (s.points.empty()) throw InputError("render: empty curve '" + s.label + "'");
  }
  const PlotGeometry geo = plot_geometry(series, axes);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 " +
         detail::fmt_tick(axes.width) + " " + detail::fmt_tick(axes.height) + "\">\n";
  out += "<rect width=\"" + detail::fmt_tick(axes.width) + "\" height=\"" +
         detail::fmt_tick(axes.height) + "\" fill=\"white\"/>\n";
  if (!axes.title.empty()) {
    out += "<text x=\"" + detail::fmt_px(axes.width / 2.0) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           detail::xml_escape(axes.title) + "</text>\n";
  }

  // Axes frame.
  const double x0 = geo.px_left;
  const double x1 = geo.px_left + geo.px_width;
  const double y0 = geo.px_top;
  const double y1 = geo.px_top + geo.px_height;
  out += "<rect x=\"" + detail::fmt_px(x0) + "\" y=\"" + detail::fmt_px(y0) + "\" width=\"" +
         detail::fmt_px(geo.px_width) + "\" height=\"" + detail::fmt_px(geo.px_height) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  // Ticks.
  const double xstep = detail::nice_step(geo.x_max - geo.x_min, 6);
  for (double tx = std::ceil(geo.x_min / xstep) * xstep; tx <= geo.x_max + 1e-9; tx += xstep) {
    const double px = geo.x_to_px(tx);
    out += "<line x1=\"" + detail::fmt_px(px) + "\" y1=\"" + detail::fmt_px(y1) + "\" x2=\"" +
           detail::fmt_px(px) + "\" y2=\"" + detail::fmt_px(y1 + 5.0) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + detail::fmt_px(px) + "\" y=\"" + detail::fmt_px(y1 + 20.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_tick(tx) + "</text>\n";
  }
  const double ystep = detail::nice_step(geo.y_max - geo.y_min, 5);
  for (double ty = std::ceil(geo.y_min / ystep) * ystep; ty <= geo.y_max + 1e-9; ty += ystep) {
    const double py = geo.y_to_px(ty);
    out += "<line x1=\"" + detail::fmt_px(x0 - 5.0) + "\" y1=\"" + detail::fmt_px(py) +
           "\" x2=\"" + detail::fmt_px(x0) + "\" y2=\"" + detail::fmt_px(py) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + detail::fmt_px(x0 - 9.0) + "\" y=\"" + detail::fmt_px(py + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_tick(ty) + "</text>\n";
  }

  // Axis labels.
  out += "<text x=\"" + detail::fmt_px((x0 + x1) / 2.0) + "\" y=\"" +
         detail::fmt_px(axes.height - 12.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         detail::xml_escape(axes.x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + detail::fmt_px((y0 + y1) / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
         detail::fmt_px((y0 + y1) / 2.0) + ")\">" + detail::xml_escape(axes.y_label) +
         "</text>\n";

  // Reference lines.
  auto hline = [&](double y, const std::string& dash) {
    if (y < geo.y_min || y > geo.y_max) return;
    const double py = geo.y_to_px(y);
    out += "<line x1=\"" + detail::fmt_px(x0) + "\" y1=\"" + detail::fmt_px(py) + "\" x2=\"" +
           detail::fmt_px(x1) + "\" y2=\"" + detail::fmt_px(py) +
           "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"" + dash + "\"/>\n";
  };
  if (axes.half_reference_line) hline(0.5, "6,4");
  if (axes.zero_reference_line) hline(0.0, "6,4");
  for (double y : axes.extra_y_lines) hline(y, "3,3");
  if (axes.identity_reference_line) {
    const double lo = std::max(geo.x_min, geo.y_min);
    const double hi = std::min(geo.x_max, geo.y_max);
    if (hi > lo) {
      out += "<line x1=\"" + detail::fmt_px(geo.x_to_px(lo)) + "\" y1=\"" +
             detail::fmt_px(geo.y_to_px(lo)) + "\" x2=\"" + detail::fmt_px(geo.x_to_px(hi)) +
             "\" y2=\"" + detail::fmt_px(geo.y_to_px(hi)) +
             "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
    }
  }

  // Series.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color =
        s.color.empty() ? detail::svg_palette()[si % detail::svg_palette().size()] : s.color;
    if (s.scatter) {
      for (const auto& [x, y] : s.points) {
        out += "<circle cx=\"" + detail::fmt_px(geo.x_to_px(x)) + "\" cy=\"" +
               detail::fmt_px(geo.y_to_px(y)) + "\" r=\"2.5\" fill=\"" + color +
               "\" fill-opacity=\"0.7\"/>\n";
      }
    } else {
      std::string path = "M";
      double prev_y = 0.0;
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        const auto [x, y] = s.points[i];
        if (i == 0) {
          path += detail::fmt_px(geo.x_to_px(x)) + " " + detail::fmt_px(geo.y_to_px(y));
        } else if (s.step) {
          // right-continuous: run horizontally at the previous level, then drop
          path += " L" + detail::fmt_px(geo.x_to_px(x)) + " " + detail::fmt_px(geo.y_to_px(prev_y));
          path += " L" + detail::fmt_px(geo.x_to_px(x)) + " " + detail::fmt_px(geo.y_to_px(y));
        } else {
          path += " L" + detail::fmt_px(geo.x_to_px(x)) + " " + detail::fmt_px(geo.y_to_px(y));
        }
        prev_y = y;
      }
      out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.8\"/>\n";
    }
    // Legend entry.
    const double ly = geo.px_top + 18.0 * static_cast<double>(si);
    const double lx = x1 + 12.0;
    out += "<line x1=\"" + detail::fmt_px(lx) + "\" y1=\"" + detail::fmt_px(ly + 5.0) +
           "\" x2=\"" + detail::fmt_px(lx + 22.0) + "\" y2=\"" + detail::fmt_px(ly + 5.0) +
           "\" stroke=\"" + color + "\" stroke-width=\"2.5\"/>\n";
    out += "<text x=\"" + detail::fmt_px(lx + 28.0) + "\" y=\"" + detail::fmt_px(ly + 9.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + detail::xml_escape(s.label) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

// Survival-curve rendering: KM estimates as right-continuous steps starting
// at S(0) = 1, parametric curves as dense polylines, with a 0.5 gridline for
// reading medians.
inline std::string render_survival_svg(const std::vector<SvgSeries>& curves, AxesConfig axes) {
  axes.y_is_probability = true;
  axes.half_reference_line = true;
  for (const auto& c : curves) {
    for (const auto& [x, y] : c.points) {
      (void)x;
      if (y < -1e-9 || y > 1.0 + 1e-9) {
        throw InputError("render_survival_svg: probability out of [0, 1] in '" + c.label + "'");
      }
    }
  }
  return render_xy_svg(curves, axes);
}

}  // namespace survivalkit
