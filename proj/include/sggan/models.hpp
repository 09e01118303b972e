#pragma once

#include <string>
#include <vector>

#include "sggan/core.hpp"
#include "sggan/nn.hpp"

namespace sggan::models {

struct ArchConfig {
  int image_size = 128;
  int n_s = 5;
  int n_c = 5;
  int base_width = 64;   // filters in the first layer
  int g_resblocks = 6;
  int s_resblocks = 4;
  int d_layers = 6;      // stride-2 convs in the discriminator

  void validate() const;  // throws naming the violated constraint
  bool operator==(const ArchConfig&) const = default;

  int disc_final_width() const { return base_width << (d_layers - 1); }
  int disc_final_extent() const { return image_size >> d_layers; }
};

// Architecture-A trunk + 3-channel TanH head. Input depth 3 + n_s + n_c
// (target segmentation and spatially replicated attributes concatenated).
class GeneratorNet {
public:
  GeneratorNet() = default;
  GeneratorNet(const ArchConfig& cfg, Rng& rng);

  ad::Var forward(const ad::Var& x_cat) const;
  // Convenience: concatenates image, target segmentation, replicated attrs.
  ad::Var forward(const ad::Var& image, const ad::Var& target_seg,
                  const ad::Var& target_attr) const;

  std::vector<nn::Param>& params() { return reg_.params(); }
  const std::vector<nn::Param>& params() const { return reg_.params(); }
  int64_t param_count() const { return reg_.param_count(); }
  const ArchConfig& config() const { return cfg_; }
  int input_depth() const { return 3 + cfg_.n_s + cfg_.n_c; }

private:
  ArchConfig cfg_;
  nn::ParamRegistry reg_;
  nn::Conv2d enc0_, enc1_, enc2_;
  nn::InstanceNorm2d in0_, in1_, in2_;
  std::vector<nn::ResBlock> res_;
  nn::ConvTranspose2d dec0_, dec1_;
  nn::InstanceNorm2d din0_, din1_;
  nn::Conv2d head_;
};

struct DiscOut {
  ad::Var adv_map;     // [N,1,f,f]
  ad::Var cls_logits;  // [N,n_c]
};

// Architecture-B trunk with two heads reading the same feature map:
// 3x3 stride-1 adversarial head and 2x2 stride-1 unpadded classifier head.
class DiscriminatorNet {
public:
  DiscriminatorNet() = default;
  DiscriminatorNet(const ArchConfig& cfg, Rng& rng);

  DiscOut forward(const ad::Var& image) const;
  // Mean of the adversarial map per sample, shape [N].
  static ad::Var adv_scalar(const ad::Var& adv_map);

  std::vector<nn::Param>& params() { return reg_.params(); }
  const std::vector<nn::Param>& params() const { return reg_.params(); }
  int64_t param_count() const { return reg_.param_count(); }
  const ArchConfig& config() const { return cfg_; }

private:
  ArchConfig cfg_;
  nn::ParamRegistry reg_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::InstanceNorm2d> norms_;
  nn::Conv2d adv_head_, cls_head_;
};

// Architecture-A trunk + n_s-channel head normalized per pixel to the
// simplex.
class SegmentorNet {
public:
  SegmentorNet() = default;
  SegmentorNet(const ArchConfig& cfg, Rng& rng);

  ad::Var forward(const ad::Var& image) const;  // [N,n_s,H,W], simplex per pixel

  std::vector<nn::Param>& params() { return reg_.params(); }
  const std::vector<nn::Param>& params() const { return reg_.params(); }
  int64_t param_count() const { return reg_.param_count(); }
  const ArchConfig& config() const { return cfg_; }

private:
  ArchConfig cfg_;
  nn::ParamRegistry reg_;
  nn::Conv2d enc0_, enc1_, enc2_;
  nn::InstanceNorm2d in0_, in1_, in2_;
  std::vector<nn::ResBlock> res_;
  nn::ConvTranspose2d dec0_, dec1_;
  nn::InstanceNorm2d din0_, din1_;
  nn::Conv2d head_;
};

struct Networks {
  GeneratorNet g;
  DiscriminatorNet d;
  SegmentorNet s;
};

// Deterministic given seed (draws G, then D, then S from one stream).
Networks build_networks(const ArchConfig& cfg, uint64_t seed);

// One line per parameter: "<name> <shape> <numel>", plus per-network totals.
std::string arch_ledger(const Networks& nets);

// Parameter archive (binary, named tensors).
void save_param_archive(const std::string& path, const std::vector<nn::Param>& params);
void load_param_archive(const std::string& path, std::vector<nn::Param>& params);

// ---- single-sample wrappers over the core types ----
Tensor pack_image(const core::ImageTensor& img);              // [1,3,H,W]
Tensor pack_seg(const core::SegmentationMap& seg);            // [1,n_s,H,W]
core::ImageTensor unpack_image(const Tensor& t);              // from [1,3,H,W]
core::SegmentationMap unpack_seg_soft(const Tensor& t);       // from [1,n_s,H,W]

core::ImageTensor generator_forward(const GeneratorNet& net, const core::ImageTensor& image,
                                    const core::SegmentationMap& target_seg,
                                    const core::AttributeVector& target_attr);

struct DiscForwardResult {
  int extent = 0;                      // adv map side length
  std::vector<double> adv_map;         // extent*extent
  double adv_scalar = 0;               // mean of adv_map
  std::vector<double> attr_logits;     // n_c
  std::vector<double> attr_probs;      // sigmoid(logits)
};
DiscForwardResult discriminator_forward(const DiscriminatorNet& net,
                                        const core::ImageTensor& image);

core::SegmentationMap segmentor_forward(const SegmentorNet& net, const core::ImageTensor& image);

}  // namespace sggan::models
