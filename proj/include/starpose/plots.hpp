#pragma once

#include <string>
#include <utility>
#include <vector>

#include "starpose/pose.hpp"
#include "starpose/skeleton.hpp"

namespace starpose {

// Deterministic SVG builders: fixed-precision number formatting, no
// timestamps, byte-stable for identical inputs.

// Front-view (x/y) overlay of a predicted and a ground-truth skeleton.
std::string svg_skeleton_overlay(const Pose3d& pred, const Pose3d& gt,
                                 const SkeletonTopology& topo, const std::string& title);

struct ChartSeries {
  std::string label;
  std::vector<double> values;
};

// Simple polyline chart; emits a "no data" placeholder when every series
// is empty.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series);

}  // namespace starpose
