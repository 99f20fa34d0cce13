#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskseq/classifier.hpp"
#include "taskseq/contrast.hpp"
#include "taskseq/matrix.hpp"
#include "taskseq/seqstats.hpp"

namespace taskseq::report {

/// Minimal SVG builder; text content and attributes are XML-escaped.
class Svg {
public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& extra = {});
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& extra = {});
  void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                double width = 1.0, const std::string& extra = {});
  void circle(double cx, double cy, double r, const std::string& fill, const std::string& extra = {});
  void text(double x, double y, const std::string& content, double size = 12.0,
            const std::string& anchor = "start", const std::string& extra = {});

  std::string str() const;
  void save(const std::filesystem::path& path) const;

private:
  double width_;
  double height_;
  std::string body_;
};

std::string xml_escape(const std::string& text);
std::string fmt(double value);  // fixed 3 decimals

enum class ColorScale { Linear, Log, Diverging };

/// "#rrggbb". Linear/Log: white -> dark blue over t in [0, 1].
/// Diverging: t in [-1, 1], blue (negative) -> white -> red (positive).
std::string color(ColorScale scale, double t);

struct HeatmapOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  ColorScale scale = ColorScale::Linear;
};

void heatmap_svg(const RealMatrix& m, const HeatmapOptions& options, const std::filesystem::path& path);

struct RasterRow {
  std::string learner_id;
  double grade = 0.0;
  std::vector<double> deviations;  // one per completed position
};

/// Learner x position raster; rows in the given order, positions after the
/// learner's last completion are black, grade shown as a side colour bar.
void deviation_raster_svg(const std::vector<RasterRow>& rows, int tasks, const std::filesystem::path& path);

/// dfreq (x) against drank (y) per task, coloured by task type, with per-type
/// median and interquartile bars.
void contrast_scatter_svg(const TaskContrastReport& report, const std::filesystem::path& path);

/// Per-learner P(g1) curves with mean (orange, dashed) and fraction above 0.5
/// (green, dashed).
void curves_svg(const std::vector<ProbabilityCurve>& curves, const std::vector<CurvePoint>& aggregate,
                const std::string& title, const std::filesystem::path& path);

}  // namespace taskseq::report
