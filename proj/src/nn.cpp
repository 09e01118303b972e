#include "sggan/nn.hpp"

#include <stdexcept>

namespace sggan::nn {

ad::Var ParamRegistry::reg(const std::string& name, Tensor init) {
  auto node = std::make_shared<ad::Node>();
  node->value = std::move(init);
  node->requires_grad = true;
  ad::Var v(std::move(node));
  params_.push_back({name, v});
  return v;
}

FreezeGuard::FreezeGuard(std::vector<Param>& params) : params_(&params) {
  saved_.reserve(params.size());
  for (auto& p : params) {
    saved_.push_back(p.var.node->requires_grad);
    p.var.node->requires_grad = false;
  }
}

FreezeGuard::~FreezeGuard() {
  for (size_t i = 0; i < params_->size(); ++i)
    (*params_)[i].var.node->requires_grad = saved_[i];
}

Tensor gaussian_init(const Shape& shape, Rng& rng, double sd) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, sd);
  return t;
}

void Conv2d::build(ParamRegistry& reg, const std::string& name, Rng& rng) {
  w = reg.reg(name + ".w", gaussian_init(Shape{out_c, in_c, k, k}, rng));
  b = reg.reg(name + ".b", Tensor::zeros(Shape{out_c}));
}

ad::Var Conv2d::operator()(const ad::Var& x) const {
  ad::Var y = ad::conv2d(x, w, stride, pad);
  const Shape& s = y.shape();
  return ad::add(y, ad::bcast_chan(b, s[0], s[2], s[3]));
}

void ConvTranspose2d::build(ParamRegistry& reg, const std::string& name, Rng& rng) {
  w = reg.reg(name + ".w", gaussian_init(Shape{in_c, out_c, k, k}, rng));
  b = reg.reg(name + ".b", Tensor::zeros(Shape{out_c}));
}

ad::Var ConvTranspose2d::operator()(const ad::Var& x) const {
  ad::Var y = ad::conv_transpose2d(x, w, stride, pad);
  const Shape& s = y.shape();
  return ad::add(y, ad::bcast_chan(b, s[0], s[2], s[3]));
}

void InstanceNorm2d::build(ParamRegistry& reg, const std::string& name, Rng&) {
  gamma = reg.reg(name + ".gamma", Tensor::full(Shape{c}, 1.0));
  beta = reg.reg(name + ".beta", Tensor::zeros(Shape{c}));
}

ad::Var InstanceNorm2d::operator()(const ad::Var& x) const {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != c)
    throw std::invalid_argument("InstanceNorm2d: expected [N," + std::to_string(c) + ",H,W], got " +
                                s.str());
  int64_t n = s[0], h = s[2], w_ = s[3];
  double inv_hw = 1.0 / static_cast<double>(h * w_);
  ad::Var mean = ad::affine(ad::sum_hw(x), inv_hw, 0.0);              // [N,C]
  ad::Var xc = ad::sub(x, ad::bcast_hw(mean, h, w_));
  ad::Var var = ad::affine(ad::sum_hw(ad::square(xc)), inv_hw, 0.0);  // biased variance
  ad::Var denom = ad::sqrt_(ad::affine(var, 1.0, eps));
  ad::Var y = ad::div(xc, ad::bcast_hw(denom, h, w_));
  return ad::add(ad::mul(y, ad::bcast_chan(gamma, n, h, w_)), ad::bcast_chan(beta, n, h, w_));
}

void ResBlock::build(ParamRegistry& reg, const std::string& name, int channels, Rng& rng) {
  c1 = {channels, channels, 3, 1, 1};
  c1.build(reg, name + ".c1", rng);
  n1.c = channels;
  n1.build(reg, name + ".n1", rng);
  c2 = {channels, channels, 3, 1, 1};
  c2.build(reg, name + ".c2", rng);
  n2.c = channels;
  n2.build(reg, name + ".n2", rng);
}

ad::Var ResBlock::operator()(const ad::Var& x) const {
  ad::Var h = ad::relu(n1(c1(x)));
  return ad::add(x, n2(c2(h)));
}

ad::Var softmax_c(const ad::Var& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("softmax_c: expected NCHW");
  ad::Var m = ad::Var::constant(ad::channel_max_detached(x.val()));
  ad::Var e = ad::exp_(ad::sub(x, ad::bcast_c1(m, s[1])));
  ad::Var denom = ad::bcast_c1(ad::sum_c(e), s[1]);
  return ad::div(e, denom);
}

}  // namespace sggan::nn
