#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sggan/data.hpp"
#include "sggan/losses.hpp"
#include "sggan/models.hpp"
#include "sggan/rng.hpp"

namespace sggan::training {

struct TrainConfig {
  losses::LossWeights weights;
  models::ArchConfig arch;
  int batch_size = 8;
  int64_t total_steps = 0;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double lr_s = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int n_critic = 5;  // G updated every n_critic steps (1 in log-form mode)
  uint64_t seed = 0;
  int64_t checkpoint_every = 1000;  // 0 disables intermediate checkpoints
  int64_t log_every = 10;
  bool classifier_enabled = true;
  bool joint_target_shuffle = false;  // permute s and c with one permutation
  bool segmentor_only = false;        // train S alone (skip D and G updates)
  // Eq. 2 is a pixel sum as written; "mean" folds 1/(H*W) into the seg
  // weight so the segmentation term stays commensurate with the other
  // objectives at any resolution.
  std::string seg_reduction = "sum";  // sum | mean
  std::vector<std::string> attr_names;

  void validate() const;
  std::string serialize() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig from_file(const std::string& path);
  void apply_override(const std::string& key, const std::string& value);

  // Eq. 2 sums over pixels; the default lambda2 assumes that scale at
  // 128x128, so the trainer rescales it by (128/image_size)^2 in sum mode.
  // In mean mode the per-pixel average is resolution-free and the factor
  // becomes 1/(H*W).
  double lambda2_scale() const {
    if (seg_reduction == "mean")
      return 1.0 / (static_cast<double>(arch.image_size) * arch.image_size);
    double r = 128.0 / arch.image_size;
    return r * r;
  }
};

// Per-step scalar terms, keyed by name (absent terms were not computed on
// that step, e.g. generator terms on non-G steps).
struct LossRecord {
  int64_t step = 0;
  std::map<std::string, double> terms;
};

struct Adam {
  double lr = 1e-4, b1 = 0.5, b2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<Tensor> m, v;

  void init(const std::vector<nn::Param>& params);
  // Applies one update; missing grads count as zero. Throws (naming
  // `objective` and `step`) if any updated value is non-finite.
  void step(std::vector<nn::Param>& params, const ad::GradMap& grads, const char* objective,
            int64_t step_no);
  void save(const std::string& path) const;
  void load(const std::string& path, const std::vector<nn::Param>& params);
};

struct Batch {
  ad::Var x;      // [N,3,H,W]
  ad::Var s;      // [N,n_s,H,W] one-hot
  ad::Var c;      // [N,n_c]
  ad::Var s_tgt;  // shuffled targets
  ad::Var c_tgt;
  std::vector<int> perm_s, perm_c;
};

Batch pack_batch(const data::SampleSet& ds, const std::vector<int>& indices);

// s' <- permutation of the batch's s, c' <- an independently drawn
// permutation of c (one shared permutation when `joint`).
void sample_targets(Batch& batch, Rng& rng, bool joint = false);

struct TrainState {
  int64_t step = 0;
  models::Networks nets;
  Adam opt_g, opt_d, opt_s;
  Rng rng;  // shuffles, target permutations, gp interpolates
  std::vector<int> epoch_perm;
  size_t cursor = 0;
};

TrainState init_state(const TrainConfig& cfg);

LossRecord train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg);

// Runs total_steps, writing history.csv, checkpoints under out_dir/step-<N>,
// and resuming bit-exactly from `resume_from` when given.
TrainState train(const TrainConfig& cfg, const data::SampleSet& dataset,
                 const std::string& out_dir, const std::string& resume_from = "");

struct Metrics {
  double seg_pixel_acc = 0;       // argmax S(x) vs labels
  double fake_seg_agreement = 0;  // argmax S(G(x,s',c')) vs argmax s'
  double attr_agreement = 0;      // thresholded D_c(G) vs c'
  double cycle_mae = 0;           // |x - G(G(x,s',c'),s,c)|
};
Metrics evaluate(const TrainState& state, const data::SampleSet& val, uint64_t seed,
                 bool classifier_enabled = true);

void save_checkpoint(const std::string& dir, const TrainState& state, const TrainConfig& cfg);
// Loads into a state built from `expect`; throws loudly on ArchConfig
// mismatch between the checkpoint snapshot and `expect`.
void load_checkpoint(const std::string& dir, TrainState& state, const TrainConfig& expect);

// Reads the config snapshot and parameters only (for inference commands).
std::pair<TrainConfig, models::Networks> load_checkpoint_for_inference(const std::string& dir);

void append_history(const std::string& csv_path, const std::vector<LossRecord>& records,
                    bool write_header);

}  // namespace sggan::training
