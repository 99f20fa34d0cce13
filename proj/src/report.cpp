#include "taskseq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "taskseq/error.hpp"

namespace taskseq::report {

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

Svg::Svg(double width, double height) : width_(width), height_(height) {
  rect(0, 0, width, height, "#ffffff");
}

void Svg::rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra) {
  body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
           "\" fill=\"" + fill + "\"" + (extra.empty() ? "" : " " + extra) + "/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width,
               const std::string& extra) {
  body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\"" +
           (extra.empty() ? "" : " " + extra) + "/>\n";
}

void Svg::polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                   double width, const std::string& extra) {
  if (points.empty()) return;
  std::string pts;
  for (const auto& [x, y] : points) pts += (pts.empty() ? "" : " ") + fmt(x) + "," + fmt(y);
  body_ += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
           fmt(width) + "\"" + (extra.empty() ? "" : " " + extra) + "/>\n";
}

void Svg::circle(double cx, double cy, double r, const std::string& fill, const std::string& extra) {
  body_ += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" + fill +
           "\"" + (extra.empty() ? "" : " " + extra) + "/>\n";
}

void Svg::text(double x, double y, const std::string& content, double size, const std::string& anchor,
               const std::string& extra) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           fmt(size) + "\" text-anchor=\"" + anchor + "\"" + (extra.empty() ? "" : " " + extra) + ">" +
           xml_escape(content) + "</text>\n";
}

std::string Svg::str() const {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt(width_) + "\" height=\"" + fmt(height_) + "\" viewBox=\"0 0 " + fmt(width_) + " " +
         fmt(height_) + "\">\n" + body_ + "</svg>\n";
}

void Svg::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", "cannot write " + path.string(), {{"path", path.string()}});
  out << str();
}

namespace {

std::string hex(double r, double g, double b) {
  auto channel = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", channel(r), channel(g), channel(b));
  return buf;
}

const char* type_color(TaskType type) {
  switch (type) {
    case TaskType::Coursework: return "#d62728";
    case TaskType::ReadingVideo: return "#1f77b4";
    case TaskType::Quiz: return "#2ca02c";
    case TaskType::GChart: return "#9467bd";
    case TaskType::MultiResponsePoll: return "#ff7f0e";
    case TaskType::DiscussionPost: return "#8c564b";
  }
  return "#000000";
}

}  // namespace

std::string color(ColorScale scale, double t) {
  if (scale == ColorScale::Diverging) {
    t = std::clamp(t, -1.0, 1.0);
    if (t < 0) return hex(1.0 + t * 0.85, 1.0 + t * 0.6, 1.0 + t * 0.1);   // towards blue
    return hex(1.0 - t * 0.1, 1.0 - t * 0.85, 1.0 - t * 0.85);             // towards red
  }
  t = std::clamp(t, 0.0, 1.0);
  return hex(1.0 - 0.92 * t, 1.0 - 0.78 * t, 1.0 - 0.45 * t);
}

void heatmap_svg(const RealMatrix& m, const HeatmapOptions& options, const std::filesystem::path& path) {
  const double margin = 60.0;
  const double plot = 600.0;
  const double cw = m.cols() ? plot / static_cast<double>(m.cols()) : plot;
  const double ch = m.rows() ? plot / static_cast<double>(m.rows()) : plot;
  Svg svg(plot + 2 * margin + 80, plot + 2 * margin);

  double max_abs = 0.0;
  double min_positive = std::numeric_limits<double>::infinity();
  for (double v : m.values()) {
    max_abs = std::max(max_abs, std::fabs(v));
    if (v > 0) min_positive = std::min(min_positive, v);
  }
  const double log_lo = std::isfinite(min_positive) ? std::log10(min_positive) : 0.0;
  const double log_hi = max_abs > 0 ? std::log10(max_abs) : 0.0;

  auto shade = [&](double v) {
    switch (options.scale) {
      case ColorScale::Linear: return color(ColorScale::Linear, max_abs > 0 ? v / max_abs : 0.0);
      case ColorScale::Diverging: return color(ColorScale::Diverging, max_abs > 0 ? v / max_abs : 0.0);
      case ColorScale::Log:
        if (v <= 0) return color(ColorScale::Log, 0.0);
        return color(ColorScale::Log, log_hi > log_lo ? 0.05 + 0.95 * (std::log10(v) - log_lo) / (log_hi - log_lo) : 1.0);
    }
    return std::string("#ffffff");
  };

  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0)
        svg.rect(margin + static_cast<double>(j) * cw, margin + static_cast<double>(i) * ch, cw, ch, shade(m(i, j)));
  svg.rect(margin, margin, plot, plot, "none", "stroke=\"#000000\"");
  svg.text(margin + plot / 2, margin / 2, options.title, 16, "middle");
  svg.text(margin + plot / 2, margin + plot + 35, options.x_label, 12, "middle");
  svg.text(20, margin + plot / 2, options.y_label, 12, "middle",
           "transform=\"rotate(-90 20 " + fmt(margin + plot / 2) + ")\"");

  // colour bar
  const double bx = margin + plot + 20;
  for (int k = 0; k < 50; ++k) {
    const double t = 1.0 - k / 49.0;
    const std::string c = options.scale == ColorScale::Diverging ? color(ColorScale::Diverging, 2 * t - 1)
                                                                 : color(ColorScale::Linear, t);
    svg.rect(bx, margin + k * plot / 50.0, 20, plot / 50.0 + 0.5, c);
  }
  std::string top, bottom;
  switch (options.scale) {
    case ColorScale::Linear: top = fmt(max_abs); bottom = "0"; break;
    case ColorScale::Diverging: top = fmt(max_abs); bottom = fmt(-max_abs); break;
    case ColorScale::Log: top = "1e" + fmt(log_hi); bottom = "1e" + fmt(log_lo); break;
  }
  svg.text(bx + 25, margin + 10, top, 10);
  svg.text(bx + 25, margin + plot, bottom, 10);
  svg.save(path);
}

void deviation_raster_svg(const std::vector<RasterRow>& rows, int tasks, const std::filesystem::path& path) {
  const double margin = 60.0;
  const double plot_w = 600.0;
  const double plot_h = 600.0;
  const double cw = tasks > 0 ? plot_w / tasks : plot_w;
  const double ch = rows.empty() ? plot_h : plot_h / static_cast<double>(rows.size());
  Svg svg(plot_w + 2 * margin + 40, plot_h + 2 * margin);

  double gmin = 100.0, gmax = 0.0;
  for (const auto& r : rows) {
    gmin = std::min(gmin, r.grade);
    gmax = std::max(gmax, r.grade);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = margin + static_cast<double>(i) * ch;
    const auto& r = rows[i];
    const double g = gmax > gmin ? (r.grade - gmin) / (gmax - gmin) : 0.5;
    svg.rect(margin - 25, y, 15, ch, color(ColorScale::Linear, g));
    for (int j = 0; j < tasks; ++j) {
      const double x = margin + j * cw;
      if (static_cast<std::size_t>(j) < r.deviations.size()) {
        if (r.deviations[static_cast<std::size_t>(j)] != 0.0)
          svg.rect(x, y, cw, ch, color(ColorScale::Diverging, r.deviations[static_cast<std::size_t>(j)]));
      } else {
        svg.rect(x, y, cw, ch, "#000000");
      }
    }
  }
  svg.rect(margin, margin, plot_w, plot_h, "none", "stroke=\"#000000\"");
  svg.text(margin + plot_w / 2, margin / 2, "Deviation from nominal order (rows by descending grade)", 14, "middle");
  svg.text(margin + plot_w / 2, margin + plot_h + 35, "completion position", 12, "middle");
  svg.save(path);
}

void contrast_scatter_svg(const TaskContrastReport& report, const std::filesystem::path& path) {
  const double margin = 60.0;
  const double plot = 500.0;
  Svg svg(plot + 2 * margin + 170, plot + 2 * margin);

  double xr = 1e-9, yr = 1e-9;
  for (const auto& c : report.tasks) {
    xr = std::max(xr, std::fabs(c.dfreq));
    if (c.drank) yr = std::max(yr, std::fabs(*c.drank));
  }
  xr *= 1.1;
  yr *= 1.1;
  auto px = [&](double x) { return margin + plot / 2 + x / xr * plot / 2; };
  auto py = [&](double y) { return margin + plot / 2 - y / yr * plot / 2; };

  svg.rect(margin, margin, plot, plot, "none", "stroke=\"#000000\"");
  svg.line(margin, py(0), margin + plot, py(0), "#999999", 1, "stroke-dasharray=\"4 3\"");
  svg.line(px(0), margin, px(0), margin + plot, "#999999", 1, "stroke-dasharray=\"4 3\"");
  for (const auto& c : report.tasks)
    if (c.drank) svg.circle(px(c.dfreq), py(*c.drank), 3, type_color(c.type), "fill-opacity=\"0.6\"");
  double ly = margin + 10;
  for (const auto& t : report.types) {
    if (t.dfreq && t.drank) {
      svg.line(px(t.dfreq->q1), py(t.drank->median), px(t.dfreq->q3), py(t.drank->median), type_color(t.type), 2);
      svg.line(px(t.dfreq->median), py(t.drank->q1), px(t.dfreq->median), py(t.drank->q3), type_color(t.type), 2);
      svg.circle(px(t.dfreq->median), py(t.drank->median), 6, type_color(t.type), "stroke=\"#000000\"");
    }
    svg.circle(margin + plot + 20, ly - 4, 5, type_color(t.type));
    svg.text(margin + plot + 30, ly, std::string(to_token(t.type)), 11);
    ly += 18;
  }
  svg.text(margin + plot / 2, margin / 2, "Task contrast: high minus low performers", 14, "middle");
  svg.text(margin + plot / 2, margin + plot + 35, "difference in completion frequency", 12, "middle");
  svg.text(20, margin + plot / 2, "difference in mean rank (positive: high group earlier)", 12, "middle",
           "transform=\"rotate(-90 20 " + fmt(margin + plot / 2) + ")\"");
  svg.save(path);
}

void curves_svg(const std::vector<ProbabilityCurve>& curves, const std::vector<CurvePoint>& aggregate,
                const std::string& title, const std::filesystem::path& path) {
  const double margin = 60.0;
  const double plot_w = 600.0;
  const double plot_h = 400.0;
  Svg svg(plot_w + 2 * margin, plot_h + 2 * margin);
  std::size_t longest = 1;
  for (const auto& c : curves) longest = std::max(longest, c.values.size());
  auto px = [&](double n) { return margin + (n - 1) / std::max<double>(1.0, static_cast<double>(longest) - 1) * plot_w; };
  auto py = [&](double p) { return margin + (1.0 - p) * plot_h; };

  svg.rect(margin, margin, plot_w, plot_h, "none", "stroke=\"#000000\"");
  svg.line(margin, py(0.5), margin + plot_w, py(0.5), "#999999", 1, "stroke-dasharray=\"2 2\"");
  for (const auto& c : curves) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t m = 0; m < c.values.size(); ++m) pts.emplace_back(px(static_cast<double>(m + 1)), py(c.values[m]));
    svg.polyline(pts, "#1f77b4", 1, "stroke-opacity=\"0.5\"");
  }
  std::vector<std::pair<double, double>> mean, frac;
  for (const auto& p : aggregate) {
    mean.emplace_back(px(p.n), py(p.mean));
    frac.emplace_back(px(p.n), py(p.fraction_above_half));
  }
  svg.polyline(mean, "#ff7f0e", 2.5, "stroke-dasharray=\"8 4\"");
  svg.polyline(frac, "#2ca02c", 2.5, "stroke-dasharray=\"8 4\"");
  svg.text(margin + plot_w / 2, margin / 2, title, 14, "middle");
  svg.text(margin + plot_w / 2, margin + plot_h + 35, "number of completed tasks", 12, "middle");
  svg.text(margin - 8, py(1.0) + 4, "1", 10, "end");
  svg.text(margin - 8, py(0.5) + 4, "0.5", 10, "end");
  svg.text(margin - 8, py(0.0) + 4, "0", 10, "end");
  svg.save(path);
}

}  // namespace taskseq::report
