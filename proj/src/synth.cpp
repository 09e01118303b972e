#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sggan/data.hpp"

namespace sggan::data {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  double r, g, b;
};

// Color families keyed by attribute bits. Components stay within [-0.9, 0.9]
// so the jittered result still fits [-1, 1].
Rgb skin_color(bool light) { return light ? Rgb{0.55, 0.25, 0.00} : Rgb{-0.05, -0.30, -0.45}; }
Rgb rim_color(bool cool) { return cool ? Rgb{-0.40, -0.10, 0.60} : Rgb{0.60, 0.10, -0.40}; }
Rgb bg_color(bool light) { return light ? Rgb{0.55, 0.58, 0.62} : Rgb{-0.62, -0.58, -0.55}; }
Rgb nose_color(bool alt) { return alt ? Rgb{-0.20, 0.30, -0.35} : Rgb{0.15, -0.05, -0.25}; }
Rgb eye_color() { return {-0.65, -0.60, 0.30}; }
Rgb mouth_color() { return {0.72, -0.48, -0.38}; }

// Mouth band centerline; linear in kappa so landmark interpolation matches
// curvature interpolation exactly.
double mouth_center_y(const SynthFaceParams& p, double x) {
  double t = (x - p.cx) / p.mouth_half_w;
  return p.mouth_cy + p.kappa * p.mouth_bend * (0.5 - t * t);
}

bool in_face(const SynthFaceParams& p, double x, double y) {
  double dx = (x - p.cx) / p.rx, dy = (y - p.cy) / p.ry;
  return dx * dx + dy * dy <= 1.0;
}

bool in_rim(const SynthFaceParams& p, double x, double y) {
  if (!in_face(p, x, y)) return false;
  double dx = (x - p.cx) / (p.rx - p.rim), dy = (y - p.cy) / (p.ry - p.rim);
  return dx * dx + dy * dy > 1.0;
}

bool in_eye(const SynthFaceParams& p, double x, double y) {
  for (double sx : {-1.0, 1.0}) {
    double ex = p.cx + sx * p.eye_dx;
    double dx = x - ex, dy = y - p.eye_y;
    if (dx * dx + dy * dy <= p.eye_r * p.eye_r) return true;
  }
  return false;
}

bool in_nose(const SynthFaceParams& p, double x, double y) {
  // triangle: apex (cx, nose_top_y), base corners (cx +- nose_half_w, nose_bot_y)
  if (y < p.nose_top_y || y > p.nose_bot_y) return false;
  double f = (y - p.nose_top_y) / (p.nose_bot_y - p.nose_top_y);
  return std::fabs(x - p.cx) <= f * p.nose_half_w;
}

bool in_mouth(const SynthFaceParams& p, double x, double y) {
  if (std::fabs(x - p.cx) > p.mouth_half_w) return false;
  return std::fabs(y - mouth_center_y(p, x)) <= p.mouth_half_h;
}

uint8_t label_at(const SynthFaceParams& p, double x, double y) {
  // z-order: mouth > eyes > nose > skin > background
  if (in_mouth(p, x, y)) return 4;
  if (in_eye(p, x, y)) return 2;
  if (in_nose(p, x, y)) return 3;
  if (in_face(p, x, y)) return 1;
  return 0;
}

}  // namespace

void SynthFaceParams::validate() const {
  if (canvas < 8) throw std::invalid_argument("synth params: canvas too small");
  if (n_c < 1 || attr_bits.size() != static_cast<size_t>(n_c))
    throw std::invalid_argument("synth params: attr_bits must have n_c entries");
  if (rx <= rim + 2 || ry <= rim + 2 || eye_r <= 0.3 || mouth_half_w <= 0.5 ||
      mouth_half_h <= 0.2 || nose_bot_y <= nose_top_y || nose_half_w <= 0.3)
    throw std::invalid_argument("synth params: degenerate region geometry");
  if (cx - rx < 0.5 || cx + rx > canvas - 0.5 || cy - ry < 0.5 || cy + ry > canvas - 0.5)
    throw std::invalid_argument("synth params: face outside canvas");
  if (kappa < -1 || kappa > 1) throw std::invalid_argument("synth params: kappa outside [-1,1]");
  // Inner-feature landmarks (eyes, nose, mouth band) must stay inside the
  // inner face ellipse for any kappa in [-1, 1].
  double irx = rx - rim, iry = ry - rim;
  core::LandmarkSet lm = synth_landmarks(*this);
  double kappa_sweep = 0.5 * mouth_bend * (1.0 + std::fabs(kappa));
  for (int i = 24; i < lm.count(); ++i) {
    const core::Point2d& q = lm.points[static_cast<size_t>(i)];
    double margin = i >= 43 ? kappa_sweep : 0.0;  // mouth points move with kappa
    double dx = (q.x - cx) / irx;
    double dy_lo = (q.y - margin - cy) / iry;
    double dy_hi = (q.y + margin - cy) / iry;
    if (dx * dx + dy_lo * dy_lo > 1.0 || dx * dx + dy_hi * dy_hi > 1.0)
      throw std::invalid_argument("synth params: inner feature leaves the face region");
  }
  if (mouth_cy - 0.5 * mouth_bend - mouth_half_h <= nose_bot_y)
    throw std::invalid_argument("synth params: mouth overlaps the nose");
}

SynthFaceParams random_face_params(int canvas, int n_c, Rng& rng) {
  if (n_c < 1 || n_c > 4)
    throw std::invalid_argument("random_face_params: n_c must be in [1,4]");
  double s = canvas / 32.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    SynthFaceParams p;
    p.canvas = canvas;
    p.n_c = n_c;
    p.cx = canvas / 2.0 + rng.uniform(-1.0, 1.0) * s;
    p.cy = canvas / 2.0 + rng.uniform(-0.8, 0.8) * s;
    p.rx = rng.uniform(9.8, 11.6) * s;
    p.ry = rng.uniform(10.8, 12.6) * s;
    p.rim = rng.uniform(1.1, 1.5) * s;
    p.eye_dx = rng.uniform(3.4, 4.3) * s;
    p.eye_y = p.cy - p.ry * rng.uniform(0.32, 0.40);
    p.eye_r = rng.uniform(1.3, 1.7) * s;
    p.nose_half_w = rng.uniform(1.5, 2.1) * s;
    p.nose_top_y = p.eye_y + p.eye_r + rng.uniform(0.4, 0.9) * s;
    p.nose_bot_y = p.cy + rng.uniform(1.2, 1.8) * s;
    p.mouth_cy = p.cy + p.ry * rng.uniform(0.40, 0.46);
    p.mouth_half_w = rng.uniform(3.4, 4.4) * s;
    p.mouth_half_h = rng.uniform(0.9, 1.25) * s;
    p.mouth_bend = rng.uniform(1.8, 2.4) * s;
    p.kappa = rng.uniform(-1.0, 1.0);
    p.attr_bits.resize(static_cast<size_t>(n_c));
    for (int i = 0; i < n_c; ++i) p.attr_bits[static_cast<size_t>(i)] = rng.bernoulli() ? 1 : 0;
    p.jitter_seed_mix = rng.uniform(-1.0, 1.0);
    try {
      p.validate();
    } catch (const std::invalid_argument&) {
      continue;  // redraw; the stream advance keeps this deterministic
    }
    return p;
  }
  throw std::runtime_error("random_face_params: no valid geometry after 64 draws");
}

segmap::RegionTable synth_region_table() {
  segmap::RegionTable t;
  t.n_s = kSynthClasses;
  auto rng_idx = [](int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i <= hi; ++i) v.push_back(i);
    return v;
  };
  t.regions.push_back({"skin", 1, rng_idx(0, 23), segmap::FillRule::ConvexHull, 1});
  t.regions.push_back({"nose", 3, rng_idx(40, 42), segmap::FillRule::Polygon, 2});
  t.regions.push_back({"eye_left", 2, rng_idx(24, 31), segmap::FillRule::Polygon, 3});
  t.regions.push_back({"eye_right", 2, rng_idx(32, 39), segmap::FillRule::Polygon, 3});
  t.regions.push_back({"mouth", 4, rng_idx(43, 56), segmap::FillRule::Polygon, 4});
  return t;
}

std::vector<uint8_t> synth_labels(const SynthFaceParams& p) {
  std::vector<uint8_t> labels(static_cast<size_t>(p.canvas) * p.canvas);
  for (int y = 0; y < p.canvas; ++y)
    for (int x = 0; x < p.canvas; ++x)
      labels[static_cast<size_t>(y) * p.canvas + x] = label_at(p, x + 0.5, y + 0.5);
  return labels;
}

core::LandmarkSet synth_landmarks(const SynthFaceParams& p) {
  core::LandmarkSet lm;
  lm.points.reserve(57);
  // 0..23: face ellipse
  for (int i = 0; i < 24; ++i) {
    double a = 2.0 * kPi * i / 24.0;
    lm.points.push_back({p.cx + p.rx * std::cos(a), p.cy + p.ry * std::sin(a)});
  }
  // 24..31 / 32..39: eye circles
  for (double sx : {-1.0, 1.0}) {
    double ex = p.cx + sx * p.eye_dx;
    for (int i = 0; i < 8; ++i) {
      double a = 2.0 * kPi * i / 8.0;
      lm.points.push_back({ex + p.eye_r * std::cos(a), p.eye_y + p.eye_r * std::sin(a)});
    }
  }
  // 40..42: nose triangle
  lm.points.push_back({p.cx, p.nose_top_y});
  lm.points.push_back({p.cx - p.nose_half_w, p.nose_bot_y});
  lm.points.push_back({p.cx + p.nose_half_w, p.nose_bot_y});
  // 43..56: mouth band outline, 7 top then 7 bottom reversed
  for (int i = 0; i < 7; ++i) {
    double x = p.cx - p.mouth_half_w + 2.0 * p.mouth_half_w * i / 6.0;
    lm.points.push_back({x, mouth_center_y(p, x) - p.mouth_half_h});
  }
  for (int i = 6; i >= 0; --i) {
    double x = p.cx - p.mouth_half_w + 2.0 * p.mouth_half_w * i / 6.0;
    lm.points.push_back({x, mouth_center_y(p, x) + p.mouth_half_h});
  }
  return lm;
}

core::Sample synth_sample(const SynthFaceParams& p, Rng& rng) {
  p.validate();
  bool b0 = p.attr_bits[0] != 0;
  bool b1 = p.n_c > 1 ? p.attr_bits[1] != 0 : false;
  bool b2 = p.n_c > 2 ? p.attr_bits[2] != 0 : false;
  bool b3 = p.n_c > 3 ? p.attr_bits[3] != 0 : false;

  // per-sample jitter drawn before the noise field, independent of kappa
  double jit = 0.08 * p.jitter_seed_mix;
  auto shade = [&](Rgb c) {
    return Rgb{c.r + jit, c.g + jit, c.b + jit};
  };
  Rgb colors[5] = {shade(bg_color(b2)), shade(skin_color(b0)), shade(eye_color()),
                   shade(nose_color(b3)), shade(mouth_color())};
  Rgb rimc = shade(rim_color(b1));

  core::Sample s;
  s.image = core::ImageTensor(p.canvas, p.canvas);
  std::vector<uint8_t> labels = synth_labels(p);
  for (int y = 0; y < p.canvas; ++y)
    for (int x = 0; x < p.canvas; ++x) {
      uint8_t l = labels[static_cast<size_t>(y) * p.canvas + x];
      Rgb c = colors[l];
      if (l == 1 && in_rim(p, x + 0.5, y + 0.5)) c = rimc;
      double px[3] = {c.r, c.g, c.b};
      for (int ch = 0; ch < 3; ++ch) {
        double v = px[ch];
        if (p.noise_sigma > 0) v += rng.normal(0.0, p.noise_sigma);
        s.image.at(y, x, ch) = std::clamp(v, -1.0, 1.0);
      }
    }

  s.segmentation = segmap::labels_to_one_hot(
      std::vector<int>(labels.begin(), labels.end()), p.canvas, p.canvas, kSynthClasses);
  std::vector<double> bits(p.attr_bits.begin(), p.attr_bits.end());
  s.attributes = core::AttributeVector(core::AttrKind::Binary, std::move(bits));
  s.landmarks = synth_landmarks(p);
  return s;
}

std::vector<std::string> synth_attr_names(int n_c) {
  static const char* kNames[4] = {"SkinTone", "RimTone", "BrightBg", "NoseTint"};
  if (n_c < 1 || n_c > 4)
    throw std::invalid_argument("synth_attr_names: n_c must be in [1,4]");
  return std::vector<std::string>(kNames, kNames + n_c);
}

SampleSet synth_dataset(int count, int n_c, int size, uint64_t seed) {
  SampleSet set;
  set.image_size = size;
  set.n_s = kSynthClasses;
  set.n_c = n_c;
  set.attr_names = synth_attr_names(n_c);
  set.samples.reserve(static_cast<size_t>(count));
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    SynthFaceParams p = random_face_params(size, n_c, rng);
    core::Sample s = synth_sample(p, rng);
    PackedSample packed = pack(s);
    packed.kappa = p.kappa;
    set.samples.push_back(std::move(packed));
  }
  return set;
}

PackedSample pack(const core::Sample& s) {
  PackedSample p;
  p.size = s.image.height;
  p.image.resize(static_cast<size_t>(3) * p.size * p.size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < p.size; ++y)
      for (int x = 0; x < p.size; ++x)
        p.image[(static_cast<size_t>(c) * p.size + y) * p.size + x] =
            static_cast<float>(s.image.at(y, x, c));
  std::vector<int> labels = segmap::one_hot_to_labels(s.segmentation);
  p.labels.assign(labels.begin(), labels.end());
  p.attrs.resize(s.attributes.values.size());
  for (size_t i = 0; i < p.attrs.size(); ++i)
    p.attrs[i] = s.attributes.values[i] >= 0.5 ? 1 : 0;
  if (s.landmarks) p.landmarks = *s.landmarks;
  return p;
}

core::Sample unpack(const PackedSample& p, int n_s) {
  core::Sample s;
  s.image = core::ImageTensor(p.size, p.size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < p.size; ++y)
      for (int x = 0; x < p.size; ++x)
        s.image.at(y, x, c) = p.image[(static_cast<size_t>(c) * p.size + y) * p.size + x];
  s.segmentation = segmap::labels_to_one_hot(std::vector<int>(p.labels.begin(), p.labels.end()),
                                             p.size, p.size, n_s);
  s.attributes =
      core::AttributeVector(core::AttrKind::Binary,
                            std::vector<double>(p.attrs.begin(), p.attrs.end()));
  if (p.landmarks.count() > 0) s.landmarks = p.landmarks;
  return s;
}

}  // namespace sggan::data
