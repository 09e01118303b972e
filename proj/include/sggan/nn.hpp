#pragma once

#include <string>
#include <vector>

#include "sggan/autodiff.hpp"
#include "sggan/rng.hpp"

namespace sggan::nn {

struct Param {
  std::string name;
  ad::Var var;
};

// Flat named-parameter registry shared by the networks; construction order
// fixes the checkpoint and ledger order.
class ParamRegistry {
public:
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.var.val().numel();
    return n;
  }

  ad::Var reg(const std::string& name, Tensor init);

private:
  std::vector<Param> params_;
};

// Temporarily clears requires_grad on a parameter set; used when a network
// participates in another network's objective but must not collect updates.
class FreezeGuard {
public:
  explicit FreezeGuard(std::vector<Param>& params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

private:
  std::vector<Param>* params_;
  std::vector<bool> saved_;
};

Tensor gaussian_init(const Shape& shape, Rng& rng, double sd = 0.02);

struct Conv2d {
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;
  ad::Var w, b;

  void build(ParamRegistry& reg, const std::string& name, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;
};

// Adjoint of Conv2d; weight stored [in_c, out_c, k, k].
struct ConvTranspose2d {
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;
  ad::Var w, b;

  void build(ParamRegistry& reg, const std::string& name, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;
};

// Per-sample, per-channel normalization with learnable affine.
struct InstanceNorm2d {
  int c = 0;
  double eps = 1e-5;
  ad::Var gamma, beta;

  void build(ParamRegistry& reg, const std::string& name, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;
};

// conv-IN-ReLU-conv-IN plus identity skip.
struct ResBlock {
  Conv2d c1, c2;
  InstanceNorm2d n1, n2;

  void build(ParamRegistry& reg, const std::string& name, int channels, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;
};

// Per-pixel softmax over the channel dimension.
ad::Var softmax_c(const ad::Var& x);

}  // namespace sggan::nn
