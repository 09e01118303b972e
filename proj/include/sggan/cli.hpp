#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sggan/grid.hpp"
#include "sggan/training.hpp"

namespace sggan::cli {

// User mistakes exit with status 1; anything else is an internal error (2).
class UserError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreprocessArgs {
  std::string root;
  std::string table_file;  // empty = 68-point default table
  std::string out_dir;
  std::vector<std::string> attr_subset;
  int target_size = 128;
  int test_percent = 5;
  double landmark_threshold = 10.0;
};
void cmd_preprocess(const PreprocessArgs& args);

struct TrainArgs {
  std::string config_file;  // empty = defaults
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string out_dir = "out";
  bool synthetic = false;
  int synth_count = 2000;
  uint64_t synth_seed = 7;
  std::string data_dir;  // preprocess cache, when not synthetic
  std::string resume;
};
training::TrainState cmd_train(const TrainArgs& args);

struct TranslateArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::vector<std::string> targets;  // each "Name=1,Other=0"; unset bits are 0
  std::string seg_file;              // label png; empty = harden S(x)
  std::string source_attrs;          // optional, enables the identity diagnostic
  std::string out_dir = "out";
  int margin = 2;
  bool include_input = true;
};
void cmd_translate(const TranslateArgs& args);

struct InterpolateArgs {
  std::string checkpoint;
  std::string input;
  std::string source_landmarks;
  std::string target_landmarks;
  std::string table_file;  // empty = inferred from landmark count (57/68)
  std::string attrs;       // source attributes "Name=1,..."
  std::string out_dir = "out";
  int stages = 4;
};
void cmd_interpolate(const InterpolateArgs& args);

struct MorphArgs {
  std::string checkpoint;
  std::string input;
  std::vector<std::string> refs;  // reference images; s' = hardened S(ref)
  std::string seg_file;           // or a label png directly
  std::string attrs;              // input's own attributes
  std::string out_dir = "out";
};
void cmd_morph(const MorphArgs& args);

// Trains with lambda1 = 0 and the classifier head disabled.
training::TrainState cmd_ablate(const TrainArgs& args);

struct SweepArgs {
  TrainArgs base;
  std::string parameter;  // any numeric TrainConfig key, e.g. "lambda3"
  std::vector<std::string> values;
};
void cmd_sweep(const SweepArgs& args);

struct EvalArgs {
  std::string checkpoint;
  bool synthetic = false;
  int synth_count = 256;
  uint64_t synth_seed = 8;
  std::string data_dir;
  uint64_t seed = 0;
};
training::Metrics cmd_eval(const EvalArgs& args);

// Shared helpers.
std::vector<double> parse_attr_spec(const std::string& spec,
                                    const std::vector<std::string>& names);
core::ImageTensor load_input_image(const std::string& path, int expect_size);
core::SegmentationMap harden(const core::SegmentationMap& soft);

}  // namespace sggan::cli
