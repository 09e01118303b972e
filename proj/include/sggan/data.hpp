#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sggan/core.hpp"
#include "sggan/image_io.hpp"
#include "sggan/rng.hpp"
#include "sggan/segmap.hpp"

namespace sggan::data {

// Compact training-ready sample: image as floats in [-1,1], segmentation as
// class labels, attributes as bits.
struct PackedSample {
  int size = 0;
  std::vector<float> image;     // 3*size*size, CHW
  std::vector<uint8_t> labels;  // size*size
  std::vector<uint8_t> attrs;   // n_c bits
  core::LandmarkSet landmarks;
  double kappa = 0;  // synthetic mouth curvature, when applicable
};

struct SampleSet {
  int image_size = 0;
  int n_s = 0;
  int n_c = 0;
  std::vector<std::string> attr_names;
  std::vector<PackedSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

PackedSample pack(const core::Sample& s);
core::Sample unpack(const PackedSample& p, int n_s);

// ---------------------------------------------------------------- synthetic

// Procedural face: ellipse face with a rim ring, two circular eyes, a
// triangular nose and a curved mouth band; kappa in [-1,1] bends the mouth
// (kappa > 0 smiling). Attribute bits pick color families: 0 skin tone,
// 1 rim tone, 2 background tone; extra bits recolor the nose.
struct SynthFaceParams {
  int canvas = 32;
  int n_c = 3;
  double cx = 16, cy = 16;     // face ellipse center
  double rx = 10.5, ry = 11.5; // ellipse radii
  double rim = 1.3;            // rim ring width (part of the skin class)
  double eye_dx = 4.2, eye_y = 12.5, eye_r = 1.6;
  double nose_half_w = 1.8, nose_top_y = 13.5, nose_bot_y = 17.5;
  double mouth_cy = 21.5, mouth_half_w = 4.2, mouth_half_h = 1.1, mouth_bend = 2.2;
  double kappa = 0;           // in [-1, 1]
  double noise_sigma = 0.02;
  std::vector<uint8_t> attr_bits;  // length n_c
  double jitter_seed_mix = 0;      // per-sample color jitter in [-1,1]

  void validate() const;  // shapes inside canvas, non-degenerate
};

SynthFaceParams random_face_params(int canvas, int n_c, Rng& rng);

// Region table matching synth_landmarks' fixed index layout.
segmap::RegionTable synth_region_table();

// Analytic per-pixel labels (0 bg, 1 skin, 2 eyes, 3 nose, 4 mouth).
std::vector<uint8_t> synth_labels(const SynthFaceParams& p);

// Boundary-sampled landmarks: 24 ellipse + 8+8 eyes + 3 nose + 14 mouth.
core::LandmarkSet synth_landmarks(const SynthFaceParams& p);

// Renders the flat-shaded image (plus noise), the analytic one-hot
// segmentation and the landmarks.
core::Sample synth_sample(const SynthFaceParams& p, Rng& rng);

// `count` samples with independently drawn params; kappa uniform in [-1,1].
SampleSet synth_dataset(int count, int n_c, int size, uint64_t seed);

inline constexpr int kSynthClasses = 5;
std::vector<std::string> synth_attr_names(int n_c);

// ---------------------------------------------------------------- ingest

struct ManifestEntry {
  std::string image_file;  // relative to root
  core::LandmarkSet landmarks;
  std::vector<uint8_t> attrs;
};

struct DatasetManifest {
  std::string root;
  std::vector<std::string> attr_names;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  int excluded = 0;  // entries dropped by landmark validation
};

struct ManifestOptions {
  std::vector<std::string> attr_subset;  // empty = all columns
  int test_percent = 5;                  // deterministic split by filename hash
  double landmark_threshold = 10.0;      // px, against landmarks5.txt when present
};

// root must contain images, landmarks.txt and attributes.csv; an optional
// landmarks5.txt enables detection filtering.
DatasetManifest load_manifest(const std::string& root, const ManifestOptions& opts = {});

// Center-crop to the largest centered square, resize (antialiased bilinear)
// to target_size, map to [-1,1], transform landmarks by the same crop/scale
// and rasterize them with `table`.
core::Sample prepare_sample(const std::string& root, const ManifestEntry& entry, int target_size,
                            const segmap::RegionTable& table);

// attributes.csv: header "filename,<name>,...", rows "file,b1,...,bn";
// -1/1 encodings are normalized to 0/1 on read.
struct AttributeTable {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::vector<uint8_t>>> rows;
};
AttributeTable read_attribute_table(const std::string& path);
void write_attribute_table(const std::string& path, const AttributeTable& table);

// Antialiased separable triangle-filter resize of an RGB double image.
std::vector<double> resize_bilinear(const std::vector<double>& src, int sh, int sw, int th,
                                    int tw);

uint64_t fnv1a64(const std::string& s);

// Reads a cache directory produced by the preprocess command.
SampleSet load_cache(const std::string& dir);

}  // namespace sggan::data
