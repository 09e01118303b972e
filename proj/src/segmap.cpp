#include "sggan/segmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sggan::segmap {
namespace {

using core::LandmarkSet;
using core::Point2d;
using core::SegmentationMap;

bool point_on_segment(const Point2d& a, const Point2d& b, double px, double py) {
  double cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
  if (cross != 0.0) return false;
  return px >= std::min(a.x, b.x) && px <= std::max(a.x, b.x) && py >= std::min(a.y, b.y) &&
         py <= std::max(a.y, b.y);
}

std::vector<Point2d> resolve(const LandmarkSet& lm, const std::vector<int>& idx) {
  std::vector<Point2d> pts;
  pts.reserve(idx.size());
  for (int i : idx) {
    if (i < 0 || i >= lm.count())
      throw std::out_of_range("rasterize: landmark index " + std::to_string(i) +
                              " out of range for set of " + std::to_string(lm.count()));
    pts.push_back(lm.points[i]);
  }
  return pts;
}

std::vector<int> range_indices(int lo, int hi) {  // inclusive
  std::vector<int> v(hi - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

const char* fill_name(FillRule f) { return f == FillRule::Polygon ? "polygon" : "hull"; }

FillRule fill_from_name(const std::string& s) {
  if (s == "polygon") return FillRule::Polygon;
  if (s == "hull") return FillRule::ConvexHull;
  throw std::runtime_error("region table: unknown fill rule '" + s + "'");
}

}  // namespace

// Even-odd crossing count plus an explicit on-edge test so that centers
// lying exactly on an edge count as inside.
bool point_in_polygon_even_odd(const std::vector<Point2d>& poly, double px, double py) {
  size_t n = poly.size();
  if (n < 2) return false;
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2d& a = poly[j];
    const Point2d& b = poly[i];
    if (point_on_segment(a, b, px, py)) return true;
    if ((a.y > py) != (b.y > py)) {
      double xcross = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < xcross) inside = !inside;
    }
  }
  return inside;
}

// Andrew monotone chain, collinear points dropped (strict turns only).
std::vector<Point2d> convex_hull(std::vector<Point2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2d& a, const Point2d& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2d& a, const Point2d& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const Point2d& o, const Point2d& a, const Point2d& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

void RegionTable::validate(int landmark_count) const {
  if (n_s < 1) throw std::invalid_argument("region table: n_s must be >= 1");
  std::vector<bool> covered(static_cast<size_t>(n_s), false);
  for (const RegionSpec& r : regions) {
    if (r.class_index < 1 || r.class_index >= n_s)
      throw std::invalid_argument("region '" + r.name + "': class index " +
                                  std::to_string(r.class_index) + " outside [1, " +
                                  std::to_string(n_s - 1) + "]");
    if (r.polygon.size() < 3)
      throw std::invalid_argument("region '" + r.name + "': needs at least 3 landmark indices");
    for (int i : r.polygon)
      if (i < 0 || i >= landmark_count)
        throw std::out_of_range("region '" + r.name + "': landmark index " + std::to_string(i) +
                                " out of range");
    covered[static_cast<size_t>(r.class_index)] = true;
  }
  for (int c = 1; c < n_s; ++c)
    if (!covered[static_cast<size_t>(c)])
      throw std::invalid_argument("region table: class " + std::to_string(c) +
                                  " has no region");
}

std::string RegionTable::serialize() const {
  std::ostringstream os;
  os << "classes " << n_s << "\n";
  for (const RegionSpec& r : regions) {
    os << "region " << r.name << " class " << r.class_index << " fill " << fill_name(r.fill_rule)
       << " z " << r.z_order << " points";
    for (int i : r.polygon) os << " " << i;
    os << "\n";
  }
  return os.str();
}

RegionTable RegionTable::parse(const std::string& text) {
  RegionTable t;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool have_classes = false;
  while (std::getline(is, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    if (tok == "classes") {
      if (!(ls >> t.n_s))
        throw std::runtime_error("region table line " + std::to_string(lineno) +
                                 ": malformed 'classes'");
      have_classes = true;
    } else if (tok == "region") {
      RegionSpec r;
      std::string kw, fill;
      if (!(ls >> r.name >> kw) || kw != "class" || !(ls >> r.class_index) || !(ls >> kw) ||
          kw != "fill" || !(ls >> fill) || !(ls >> kw) || kw != "z" || !(ls >> r.z_order) ||
          !(ls >> kw) || kw != "points")
        throw std::runtime_error("region table line " + std::to_string(lineno) +
                                 ": malformed 'region'");
      r.fill_rule = fill_from_name(fill);
      int idx;
      while (ls >> idx) r.polygon.push_back(idx);
      t.regions.push_back(std::move(r));
    } else {
      throw std::runtime_error("region table line " + std::to_string(lineno) +
                               ": unknown keyword '" + tok + "'");
    }
  }
  if (!have_classes) throw std::runtime_error("region table: missing 'classes' line");
  return t;
}

RegionTable RegionTable::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open region table: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

void RegionTable::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write region table: " + path);
  f << serialize();
}

RegionTable RegionTable::default_face68() {
  RegionTable t;
  t.n_s = 5;
  t.regions.push_back({"skin", 1, range_indices(0, 67), FillRule::ConvexHull, 1});
  t.regions.push_back({"nose", 3, {27, 35, 34, 33, 32, 31}, FillRule::Polygon, 2});
  t.regions.push_back({"eye_left", 2, range_indices(36, 41), FillRule::Polygon, 3});
  t.regions.push_back({"eye_right", 2, range_indices(42, 47), FillRule::Polygon, 3});
  t.regions.push_back({"mouth", 4, range_indices(48, 59), FillRule::Polygon, 3});
  return t;
}

SegmentationMap rasterize(const LandmarkSet& landmarks, const RegionTable& table, int height,
                          int width) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("rasterize: non-positive dimensions");
  table.validate(landmarks.count());

  std::vector<int> labels(static_cast<size_t>(height) * width, 0);

  // paint order: ascending z, then ascending class (higher class wins ties),
  // then declaration order
  std::vector<size_t> order(table.regions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const RegionSpec& ra = table.regions[a];
    const RegionSpec& rb = table.regions[b];
    if (ra.z_order != rb.z_order) return ra.z_order < rb.z_order;
    return ra.class_index < rb.class_index;
  });

  for (size_t oi : order) {
    const RegionSpec& r = table.regions[oi];
    std::vector<Point2d> poly = resolve(landmarks, r.polygon);
    if (r.fill_rule == FillRule::ConvexHull) poly = convex_hull(std::move(poly));
    if (poly.size() < 3) continue;

    double xmin = poly[0].x, xmax = poly[0].x, ymin = poly[0].y, ymax = poly[0].y;
    for (const Point2d& p : poly) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    int x0 = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
    int x1 = std::min(width - 1, static_cast<int>(std::ceil(xmax)));
    int y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));

    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (point_in_polygon_even_odd(poly, x + 0.5, y + 0.5))
          labels[static_cast<size_t>(y) * width + x] = r.class_index;
  }

  return labels_to_one_hot(labels, height, width, table.n_s);
}

LandmarkSet interpolate_landmarks(const LandmarkSet& source, const LandmarkSet& target,
                                  double t) {
  if (source.count() != target.count())
    throw std::invalid_argument("interpolate_landmarks: count mismatch " +
                                std::to_string(source.count()) + " vs " +
                                std::to_string(target.count()));
  LandmarkSet out;
  out.points.reserve(source.points.size());
  for (size_t i = 0; i < source.points.size(); ++i) {
    out.points.push_back({(1.0 - t) * source.points[i].x + t * target.points[i].x,
                          (1.0 - t) * source.points[i].y + t * target.points[i].y});
  }
  return out;
}

std::vector<SegmentationMap> morph_sequence(const LandmarkSet& source, const LandmarkSet& target,
                                            int stages, const RegionTable& table, int height,
                                            int width) {
  if (stages < 2) throw std::invalid_argument("morph_sequence: stages must be >= 2");
  std::vector<SegmentationMap> out;
  out.reserve(static_cast<size_t>(stages));
  for (int i = 0; i < stages; ++i) {
    double t = static_cast<double>(i) / (stages - 1);
    out.push_back(rasterize(interpolate_landmarks(source, target, t), table, height, width));
  }
  return out;
}

bool validate_landmarks(const LandmarkSet& detected, const LandmarkSet& reference_5pt,
                        double threshold) {
  if (reference_5pt.count() != 5)
    throw std::invalid_argument("validate_landmarks: reference must have exactly 5 points");
  if (detected.count() < 68)
    throw std::invalid_argument("validate_landmarks: detection must follow the 68-point "
                                "convention");
  auto mean_of = [&](int lo, int hi) {
    Point2d m{0, 0};
    for (int i = lo; i <= hi; ++i) {
      m.x += detected.points[static_cast<size_t>(i)].x;
      m.y += detected.points[static_cast<size_t>(i)].y;
    }
    m.x /= (hi - lo + 1);
    m.y /= (hi - lo + 1);
    return m;
  };
  Point2d derived[5] = {
      mean_of(36, 41),            // left eye center
      mean_of(42, 47),            // right eye center
      detected.points[30],        // nose tip
      detected.points[48],        // left mouth corner
      detected.points[54],        // right mouth corner
  };
  double total = 0;
  for (int i = 0; i < 5; ++i) {
    double dx = derived[i].x - reference_5pt.points[static_cast<size_t>(i)].x;
    double dy = derived[i].y - reference_5pt.points[static_cast<size_t>(i)].y;
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total / 5.0 <= threshold;
}

std::vector<int> one_hot_to_labels(const SegmentationMap& map) {
  std::vector<int> labels(static_cast<size_t>(map.height) * map.width, 0);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      int best = 0;
      double bv = map.at(y, x, 0);
      for (int c = 1; c < map.classes; ++c) {
        double v = map.at(y, x, c);
        if (v > bv) {
          bv = v;
          best = c;
        }
      }
      labels[static_cast<size_t>(y) * map.width + x] = best;
    }
  return labels;
}

SegmentationMap labels_to_one_hot(const std::vector<int>& labels, int height, int width,
                                  int n_s) {
  if (labels.size() != static_cast<size_t>(height) * width)
    throw std::invalid_argument("labels_to_one_hot: size mismatch");
  SegmentationMap m(height, width, n_s, core::SegKind::OneHot);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int c = labels[static_cast<size_t>(y) * width + x];
      if (c < 0 || c >= n_s)
        throw std::out_of_range("labels_to_one_hot: label " + std::to_string(c) +
                                " outside [0, " + std::to_string(n_s - 1) + "]");
      m.at(y, x, c) = 1.0;
    }
  return m;
}

std::vector<std::pair<std::string, LandmarkSet>> read_landmark_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open landmark file: " + path);
  std::vector<std::pair<std::string, LandmarkSet>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name) || name[0] == '#') continue;
    int n;
    if (!(ls >> n) || n < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed landmark count");
    LandmarkSet lm;
    lm.points.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      Point2d p;
      if (!(ls >> p.x >> p.y))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(n) + " coordinate pairs");
      lm.points.push_back(p);
    }
    out.emplace_back(std::move(name), std::move(lm));
  }
  return out;
}

void write_landmark_file(const std::string& path,
                         const std::vector<std::pair<std::string, LandmarkSet>>& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write landmark file: " + path);
  f.precision(17);
  for (const auto& [name, lm] : records) {
    f << name << " " << lm.count();
    for (const Point2d& p : lm.points) f << " " << p.x << " " << p.y;
    f << "\n";
  }
}

}  // namespace sggan::segmap
