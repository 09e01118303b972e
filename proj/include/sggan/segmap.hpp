#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sggan/core.hpp"

namespace sggan::segmap {

enum class FillRule { Polygon, ConvexHull };

struct RegionSpec {
  std::string name;
  int class_index = 0;  // in [1, n_s-1]; class 0 is background
  std::vector<int> polygon;  // landmark indices, closed implicitly
  FillRule fill_rule = FillRule::Polygon;
  int z_order = 0;  // higher paints over lower; ties broken by class index
};

struct RegionTable {
  int n_s = 0;
  std::vector<RegionSpec> regions;

  // Throws if indices are out of range for `landmark_count`, a class index
  // is outside [1, n_s-1], or some class in [1, n_s-1] has no region.
  void validate(int landmark_count) const;

  std::string serialize() const;
  static RegionTable parse(const std::string& text);
  static RegionTable load(const std::string& path);
  void save(const std::string& path) const;

  // 5-class table for the dlib 68-point convention: background(0),
  // skin(1, convex hull, z=1), eyes(2, contours 36-41/42-47, z=3),
  // nose(3, z=2), mouth(4, outer lip 48-59, z=3).
  static RegionTable default_face68();
};

// Paint regions in (z_order, class_index) order; a pixel belongs to a region
// when its center (x+0.5, y+0.5) is inside the filled area by the even-odd
// rule, with centers exactly on an edge counting as inside. Pixels covered
// by no region get class 0. Output is strictly one-hot.
core::SegmentationMap rasterize(const core::LandmarkSet& landmarks, const RegionTable& table,
                                int height, int width);

// Pointwise (1-t)*source + t*target.
core::LandmarkSet interpolate_landmarks(const core::LandmarkSet& source,
                                        const core::LandmarkSet& target, double t);

// `stages` maps rasterized at t = i/(stages-1).
std::vector<core::SegmentationMap> morph_sequence(const core::LandmarkSet& source,
                                                  const core::LandmarkSet& target, int stages,
                                                  const RegionTable& table, int height,
                                                  int width);

// Compares 5 points derived from a 68-point detection (eye centers as the
// means of contours 36-41 and 42-47, nose tip 30, mouth corners 48 and 54)
// against a 5-point reference; true iff the mean euclidean distance is
// within `threshold` pixels.
bool validate_landmarks(const core::LandmarkSet& detected, const core::LandmarkSet& reference_5pt,
                        double threshold);

// Per-pixel argmax, ties toward the lowest class index.
std::vector<int> one_hot_to_labels(const core::SegmentationMap& map);
core::SegmentationMap labels_to_one_hot(const std::vector<int>& labels, int height, int width,
                                        int n_s);

// Landmark records: one per line, "filename n x1 y1 ... xn yn".
std::vector<std::pair<std::string, core::LandmarkSet>> read_landmark_file(
    const std::string& path);
void write_landmark_file(const std::string& path,
                         const std::vector<std::pair<std::string, core::LandmarkSet>>& records);

// Shared geometric predicates (documented contract for the rasterizer).
bool point_in_polygon_even_odd(const std::vector<core::Point2d>& poly, double px, double py);
std::vector<core::Point2d> convex_hull(std::vector<core::Point2d> pts);

}  // namespace sggan::segmap
