#include "starpose/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace starpose {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

void draw_skeleton(std::ostringstream& out, const Pose3d& pose, const SkeletonTopology& topo,
                   double scale, double ox, double oy, const char* color) {
  for (const auto& [a, b] : topo.bones) {
    out << "<line x1=\"" << num(ox + pose.joint(a)[0] * scale) << "\" y1=\""
        << num(oy + pose.joint(a)[1] * scale) << "\" x2=\""
        << num(ox + pose.joint(b)[0] * scale) << "\" y2=\""
        << num(oy + pose.joint(b)[1] * scale) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
  }
  for (int j = 0; j < pose.joint_count(); ++j) {
    out << "<circle cx=\"" << num(ox + pose.joint(j)[0] * scale) << "\" cy=\""
        << num(oy + pose.joint(j)[1] * scale) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
}

}  // namespace

std::string svg_skeleton_overlay(const Pose3d& pred, const Pose3d& gt,
                                 const SkeletonTopology& topo, const std::string& title) {
  const int width = 480, height = 520;
  double max_extent = 1.0;
  for (const Pose3d* pose : {&pred, &gt}) {
    for (int j = 0; j < pose->joint_count(); ++j) {
      max_extent = std::max(max_extent, std::abs(pose->joint(j)[0]));
      max_extent = std::max(max_extent, std::abs(pose->joint(j)[1]));
    }
  }
  const double scale = 220.0 / max_extent;
  const double ox = width / 2.0, oy = height / 2.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"12\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<text x=\"12\" y=\"40\" font-family=\"monospace\" font-size=\"12\" fill=\"#2ca02c\">"
         "ground truth</text>\n";
  out << "<text x=\"12\" y=\"56\" font-family=\"monospace\" font-size=\"12\" fill=\"#d62728\">"
         "prediction</text>\n";
  draw_skeleton(out, gt, topo, scale, ox, oy, "#2ca02c");
  draw_skeleton(out, pred, topo, scale, ox, oy, "#d62728");
  out << "</svg>\n";
  return out.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series) {
  const int width = 640, height = 400;
  const double left = 60, right = 20, top = 40, bottom = 50;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"12\" y=\"22\" font-family=\"monospace\" font-size=\"14\">" << title
      << "</text>\n";

  std::size_t longest = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    longest = std::max(longest, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (longest == 0) {
    out << "<text x=\"" << width / 2 - 40 << "\" y=\"" << height / 2
        << "\" font-family=\"monospace\" font-size=\"16\" fill=\"#888\">no data</text>\n";
    out << "</svg>\n";
    return out.str();
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }

  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](std::size_t i, std::size_t n) {
    return left + (n <= 1 ? 0.0 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1));
  };
  auto py = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
      << num(left + plot_w) << "\" y2=\"" << num(top + plot_h)
      << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << num(left - 50) << "\" y=\"" << num(top + 6)
      << "\" font-family=\"monospace\" font-size=\"11\">" << num(hi) << "</text>\n";
  out << "<text x=\"" << num(left - 50) << "\" y=\"" << num(top + plot_h)
      << "\" font-family=\"monospace\" font-size=\"11\">" << num(lo) << "</text>\n";
  out << "<text x=\"" << num(left + plot_w / 2 - 20) << "\" y=\"" << num(height - 14)
      << "\" font-family=\"monospace\" font-size=\"12\">" << x_label << "</text>\n";

  int color_idx = 0;
  double legend_y = 22;
  for (const auto& s : series) {
    const char* color = kSeriesColors[color_idx % 5];
    if (!s.values.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        out << num(px(i, s.values.size())) << "," << num(py(s.values[i]));
        if (i + 1 < s.values.size()) out << " ";
      }
      out << "\"/>\n";
    }
    out << "<text x=\"" << num(width - 200) << "\" y=\"" << num(legend_y)
        << "\" font-family=\"monospace\" font-size=\"12\" fill=\"" << color << "\">" << s.label
        << "</text>\n";
    legend_y += 16;
    ++color_idx;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace starpose
