#include "sggan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sggan::data {
namespace fs = std::filesystem;
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, int sh, int sw, int th,
                                    int tw) {
  if (src.size() != static_cast<size_t>(sh) * sw * 3)
    throw std::invalid_argument("resize_bilinear: source size mismatch");
  auto pass = [](const std::vector<double>& in, int h, int w, int tw_, bool horizontal) {
    // triangle filter along one axis; support widens when minifying
    int len = horizontal ? w : h;
    int olen = tw_;
    double scale = static_cast<double>(len) / olen;
    double support = std::max(1.0, scale);
    int other = horizontal ? h : w;
    std::vector<double> out(static_cast<size_t>(other) * olen * 3, 0.0);
    std::vector<std::pair<int, double>> taps;
    for (int o = 0; o < olen; ++o) {
      double center = (o + 0.5) * scale;
      int lo = static_cast<int>(std::floor(center - support));
      int hi = static_cast<int>(std::ceil(center + support));
      taps.clear();
      double wsum = 0;
      for (int i = lo; i <= hi; ++i) {
        int ci = std::clamp(i, 0, len - 1);
        double d = (i + 0.5) - center;
        double wgt = 1.0 - std::fabs(d) / support;
        if (wgt <= 0) continue;
        taps.emplace_back(ci, wgt);
        wsum += wgt;
      }
      for (auto& t : taps) t.second /= wsum;
      for (int j = 0; j < other; ++j)
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (const auto& [ci, wgt] : taps) {
            size_t idx = horizontal ? (static_cast<size_t>(j) * w + ci) * 3 + c
                                    : (static_cast<size_t>(ci) * w + j) * 3 + c;
            acc += wgt * in[idx];
          }
          size_t oidx = horizontal ? (static_cast<size_t>(j) * olen + o) * 3 + c
                                   : (static_cast<size_t>(o) * w + j) * 3 + c;
          out[oidx] = acc;
        }
    }
    return out;
  };
  std::vector<double> tmp = pass(src, sh, sw, tw, true);   // [sh, tw]
  return pass(tmp, sh, tw, th, false);                     // [th, tw]
}

AttributeTable read_attribute_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open attribute table: " + path);
  AttributeTable t;
  std::string line;
  int lineno = 0;
  if (!std::getline(f, line))
    throw std::runtime_error(path + ": empty attribute table");
  lineno++;
  std::vector<std::string> head = split_csv(line);
  if (head.size() < 2 || trim(head[0]) != "filename")
    throw std::runtime_error(path + ":1: header must be 'filename,<attr>,...'");
  for (size_t i = 1; i < head.size(); ++i) t.names.push_back(trim(head[i]));
  while (std::getline(f, line)) {
    lineno++;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv(line);
    if (cells.size() != head.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(head.size()) + " cells, got " +
                               std::to_string(cells.size()));
    std::vector<uint8_t> bits;
    for (size_t i = 1; i < cells.size(); ++i) {
      std::string cell = trim(cells[i]);
      int v;
      try {
        size_t pos = 0;
        v = std::stoi(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (...) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": non-numeric attribute value '" + cell + "'");
      }
      if (v != 0 && v != 1 && v != -1)
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": attribute value must be -1, 0 or 1");
      bits.push_back(v > 0 ? 1 : 0);  // -1/1 encodings normalize to 0/1
    }
    t.rows.emplace_back(trim(cells[0]), std::move(bits));
  }
  return t;
}

void write_attribute_table(const std::string& path, const AttributeTable& table) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write attribute table: " + path);
  f << "filename";
  for (const auto& n : table.names) f << "," << n;
  f << "\n";
  for (const auto& [name, bits] : table.rows) {
    f << name;
    for (uint8_t b : bits) f << "," << static_cast<int>(b);
    f << "\n";
  }
}

DatasetManifest load_manifest(const std::string& root, const ManifestOptions& opts) {
  if (!fs::is_directory(root))
    throw std::runtime_error("dataset root is not a directory: " + root);
  std::string attr_path = (fs::path(root) / "attributes.csv").string();
  std::string lm_path = (fs::path(root) / "landmarks.txt").string();
  if (!fs::exists(attr_path)) throw std::runtime_error("missing attribute table: " + attr_path);
  if (!fs::exists(lm_path)) throw std::runtime_error("missing landmark file: " + lm_path);

  AttributeTable table = read_attribute_table(attr_path);

  // optional column subset
  std::vector<size_t> cols;
  std::vector<std::string> names;
  if (opts.attr_subset.empty()) {
    names = table.names;
    for (size_t i = 0; i < table.names.size(); ++i) cols.push_back(i);
  } else {
    for (const std::string& want : opts.attr_subset) {
      auto it = std::find(table.names.begin(), table.names.end(), want);
      if (it == table.names.end())
        throw std::runtime_error("attribute '" + want + "' not in table (" + attr_path + ")");
      cols.push_back(static_cast<size_t>(it - table.names.begin()));
      names.push_back(want);
    }
  }

  std::unordered_map<std::string, core::LandmarkSet> lm_map;
  for (auto& [name, lm] : segmap::read_landmark_file(lm_path)) lm_map[name] = std::move(lm);

  std::unordered_map<std::string, core::LandmarkSet> lm5_map;
  std::string lm5_path = (fs::path(root) / "landmarks5.txt").string();
  bool have_lm5 = fs::exists(lm5_path);
  if (have_lm5)
    for (auto& [name, lm] : segmap::read_landmark_file(lm5_path)) lm5_map[name] = std::move(lm);

  DatasetManifest m;
  m.root = root;
  m.attr_names = names;
  for (const auto& [file, bits] : table.rows) {
    auto lit = lm_map.find(file);
    if (lit == lm_map.end())
      throw std::runtime_error("no landmark record for '" + file + "' in " + lm_path);
    if (!fs::exists(fs::path(root) / file))
      throw std::runtime_error("image file missing: " + (fs::path(root) / file).string());

    bool ok = true;
    for (const core::Point2d& p : lit->second.points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) ok = false;
    if (ok && have_lm5) {
      auto rit = lm5_map.find(file);
      if (rit != lm5_map.end())
        ok = segmap::validate_landmarks(lit->second, rit->second, opts.landmark_threshold);
    }
    if (!ok) {
      m.excluded++;
      continue;
    }

    ManifestEntry e;
    e.image_file = file;
    e.landmarks = lit->second;
    for (size_t c : cols) e.attrs.push_back(bits[c]);

    if (static_cast<int>(fnv1a64(file) % 100) < opts.test_percent)
      m.test.push_back(std::move(e));
    else
      m.train.push_back(std::move(e));
  }
  return m;
}

core::Sample prepare_sample(const std::string& root, const ManifestEntry& entry, int target_size,
                            const segmap::RegionTable& table) {
  imageio::RawImage raw = imageio::read_image((fs::path(root) / entry.image_file).string());
  int side = std::min(raw.height, raw.width);
  int ox = (raw.width - side) / 2;
  int oy = (raw.height - side) / 2;

  std::vector<double> crop(static_cast<size_t>(side) * side * 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c)
        crop[(static_cast<size_t>(y) * side + x) * 3 + c] =
            raw.rgb[(static_cast<size_t>(y + oy) * raw.width + (x + ox)) * 3 + c];

  std::vector<double> resized = resize_bilinear(crop, side, side, target_size, target_size);

  core::Sample s;
  s.image = core::ImageTensor(target_size, target_size);
  for (size_t i = 0; i < resized.size(); ++i)
    s.image.data[i] = std::clamp(resized[i] / 127.5 - 1.0, -1.0, 1.0);

  double f = static_cast<double>(target_size) / side;
  core::LandmarkSet lm;
  lm.points.reserve(entry.landmarks.points.size());
  for (const core::Point2d& p : entry.landmarks.points)
    lm.points.push_back({(p.x - ox) * f, (p.y - oy) * f});
  s.landmarks = lm;
  s.segmentation = segmap::rasterize(lm, table, target_size, target_size);
  s.attributes = core::AttributeVector(
      core::AttrKind::Binary, std::vector<double>(entry.attrs.begin(), entry.attrs.end()));
  return s;
}

SampleSet load_cache(const std::string& dir) {
  std::string meta_path = (fs::path(dir) / "meta.txt").string();
  std::ifstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot open cache metadata: " + meta_path);
  SampleSet set;
  std::string key;
  int n_attr = 0;
  while (meta >> key) {
    if (key == "image_size") meta >> set.image_size;
    else if (key == "n_s") meta >> set.n_s;
    else if (key == "n_c") meta >> n_attr;
    else if (key == "attr") {
      std::string name;
      meta >> name;
      set.attr_names.push_back(name);
    } else {
      throw std::runtime_error(meta_path + ": unknown key '" + key + "'");
    }
  }
  set.n_c = n_attr;
  if (set.image_size <= 0 || set.n_s <= 0 ||
      static_cast<int>(set.attr_names.size()) != set.n_c)
    throw std::runtime_error(meta_path + ": incomplete metadata");

  AttributeTable table = read_attribute_table((fs::path(dir) / "attributes.csv").string());
  std::unordered_map<std::string, core::LandmarkSet> lm_map;
  std::string lm_path = (fs::path(dir) / "landmarks.txt").string();
  if (fs::exists(lm_path))
    for (auto& [name, lm] : segmap::read_landmark_file(lm_path)) lm_map[name] = std::move(lm);

  for (const auto& [name, bits] : table.rows) {
    int h = 0, w = 0;
    std::string img_path = (fs::path(dir) / "images" / (name + ".png")).string();
    imageio::RawImage raw = imageio::read_png(img_path);
    std::vector<int> labels =
        imageio::read_label_png((fs::path(dir) / "labels" / (name + ".png")).string(), &h, &w);
    if (raw.height != set.image_size || raw.width != set.image_size || h != set.image_size ||
        w != set.image_size)
      throw std::runtime_error("cache entry size mismatch: " + name);

    PackedSample p;
    p.size = set.image_size;
    p.image.resize(static_cast<size_t>(3) * p.size * p.size);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < p.size; ++y)
        for (int x = 0; x < p.size; ++x)
          p.image[(static_cast<size_t>(c) * p.size + y) * p.size + x] =
              static_cast<float>(raw.rgb[(static_cast<size_t>(y) * p.size + x) * 3 + c] / 127.5 -
                                 1.0);
    p.labels.assign(labels.begin(), labels.end());
    for (int l : labels)
      if (l >= set.n_s) throw std::runtime_error("cache label out of range in " + name);
    p.attrs = bits;
    auto lit = lm_map.find(name);
    if (lit != lm_map.end()) p.landmarks = lit->second;
    set.samples.push_back(std::move(p));
  }
  return set;
}

}  // namespace sggan::data
