#include "sggan/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sggan::losses {
namespace {

void check_batch(const ad::Var& x, const char* op) {
  if (!x.defined() || x.shape().rank() < 1 || x.shape()[0] < 1)
    throw std::invalid_argument(std::string(op) + ": empty batch");
}

double clamped_log(double v) { return std::log(v < kLogEps ? kLogEps : v); }

}  // namespace

const char* adv_mode_name(AdvMode m) {
  return m == AdvMode::LogForm ? "log-form" : "gradient-penalty";
}

AdvMode adv_mode_from_name(const std::string& s) {
  if (s == "log-form") return AdvMode::LogForm;
  if (s == "gradient-penalty") return AdvMode::GradientPenalty;
  throw std::invalid_argument("unknown adv_mode: " + s);
}

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || gp_weight < 0)
    throw std::invalid_argument("LossWeights: weights must be >= 0");
}

// ------------------------------------------------------------ scalar forms

double pixelwise_ce(const core::SegmentationMap& target,
                    const core::SegmentationMap& predicted) {
  if (target.height != predicted.height || target.width != predicted.width ||
      target.classes != predicted.classes)
    throw std::invalid_argument("pixelwise_ce: shape mismatch");
  double loss = 0;
  for (size_t i = 0; i < target.data.size(); ++i)
    if (target.data[i] != 0.0) loss -= target.data[i] * clamped_log(predicted.data[i]);
  return loss;
}

double attr_ce(const core::AttributeVector& target, const core::AttributeVector& predicted) {
  if (target.size() != predicted.size())
    throw std::invalid_argument("attr_ce: length mismatch");
  double loss = 0;
  for (int k = 0; k < target.size(); ++k) {
    double c = target.values[static_cast<size_t>(k)];
    double p = predicted.values[static_cast<size_t>(k)];
    loss -= c * clamped_log(p) + (1.0 - c) * clamped_log(1.0 - p);
  }
  return loss;
}

double attr_ce_literal(const core::AttributeVector& target,
                       const core::AttributeVector& predicted) {
  if (target.size() != predicted.size())
    throw std::invalid_argument("attr_ce_literal: length mismatch");
  double loss = 0;
  for (int k = 0; k < target.size(); ++k)
    loss -= target.values[static_cast<size_t>(k)] *
            clamped_log(predicted.values[static_cast<size_t>(k)]);
  return loss;
}

// ------------------------------------------------------------ batched forms

ad::Var ce_sum_per_sample(const ad::Var& target, const ad::Var& predicted) {
  if (target.shape() != predicted.shape())
    throw std::invalid_argument("ce_sum_per_sample: shape mismatch " + target.shape().str() +
                                " vs " + predicted.shape().str());
  ad::Var logp = ad::log_(ad::clamp_min(predicted, kLogEps));
  return ad::neg(ad::sum_samplewise(ad::mul(target, logp)));
}

ad::Var bce_per_sample(const ad::Var& target, const ad::Var& probs) {
  if (target.shape() != probs.shape())
    throw std::invalid_argument("bce_per_sample: shape mismatch");
  ad::Var logp = ad::log_(ad::clamp_min(probs, kLogEps));
  ad::Var log1mp = ad::log_(ad::clamp_min(ad::affine(probs, -1.0, 1.0), kLogEps));
  ad::Var pos = ad::mul(target, logp);
  ad::Var negt = ad::mul(ad::affine(target, -1.0, 1.0), log1mp);
  return ad::neg(ad::sum_samplewise(ad::add(pos, negt)));
}

ad::Var seg_loss_real(const models::SegmentorNet& seg, const ad::Var& x, const ad::Var& s) {
  check_batch(x, "seg_loss_real");
  return ad::mean_all(ce_sum_per_sample(s, seg.forward(x)));
}

ad::Var seg_loss_fake_on(const models::SegmentorNet& seg, const ad::Var& fake,
                         const ad::Var& s_tgt) {
  check_batch(fake, "seg_loss_fake");
  return ad::mean_all(ce_sum_per_sample(s_tgt, seg.forward(fake)));
}

ad::Var seg_loss_fake(const models::SegmentorNet& seg, const models::GeneratorNet& gen,
                      const ad::Var& x, const ad::Var& s_tgt, const ad::Var& c_tgt) {
  check_batch(x, "seg_loss_fake");
  return seg_loss_fake_on(seg, gen.forward(x, s_tgt, c_tgt), s_tgt);
}

ad::Var adv_loss_logform(const models::DiscriminatorNet& disc, const ad::Var& real,
                         const ad::Var& fake) {
  check_batch(real, "adv_loss_logform");
  check_batch(fake, "adv_loss_logform");
  ad::Var p_real = ad::sigmoid_(models::DiscriminatorNet::adv_scalar(disc.forward(real).adv_map));
  ad::Var p_fake = ad::sigmoid_(models::DiscriminatorNet::adv_scalar(disc.forward(fake).adv_map));
  ad::Var term_real = ad::mean_all(ad::log_(ad::clamp_min(p_real, kLogEps)));
  ad::Var term_fake =
      ad::mean_all(ad::log_(ad::clamp_min(ad::affine(p_fake, -1.0, 1.0), kLogEps)));
  return ad::add(term_real, term_fake);
}

ad::Var adv_g_term_logform(const models::DiscriminatorNet& disc, const ad::Var& fake) {
  check_batch(fake, "adv_g_term_logform");
  ad::Var p_fake = ad::sigmoid_(models::DiscriminatorNet::adv_scalar(disc.forward(fake).adv_map));
  return ad::mean_all(ad::log_(ad::clamp_min(ad::affine(p_fake, -1.0, 1.0), kLogEps)));
}

GpTerms adv_loss_gp(const models::DiscriminatorNet& disc, const ad::Var& real,
                    const ad::Var& fake, const std::vector<double>& u) {
  check_batch(real, "adv_loss_gp");
  check_batch(fake, "adv_loss_gp");
  ad::GradEnableGuard gg;  // the penalty differentiates the critic internally
  const Shape& s = real.shape();
  if (real.shape() != fake.shape())
    throw std::invalid_argument("adv_loss_gp: real/fake shape mismatch");
  int64_t n = s[0];
  if (static_cast<int64_t>(u.size()) != n)
    throw std::invalid_argument("adv_loss_gp: need one interpolation coefficient per sample");

  ad::Var da_real = models::DiscriminatorNet::adv_scalar(disc.forward(real).adv_map);
  ad::Var da_fake = models::DiscriminatorNet::adv_scalar(disc.forward(fake).adv_map);

  GpTerms out;
  out.critic_gap = ad::sub(ad::mean_all(da_real), ad::mean_all(da_fake));

  // xhat = u*real + (1-u)*fake, a fresh leaf so the critic can be
  // differentiated with respect to its input.
  int64_t per = s.numel() / n;
  Tensor xh(s);
  const double* rd = real.val().data();
  const double* fd = fake.val().data();
  for (int64_t i = 0; i < n; ++i) {
    double ui = u[static_cast<size_t>(i)];
    for (int64_t j = 0; j < per; ++j) {
      int64_t idx = i * per + j;
      xh[idx] = ui * rd[idx] + (1.0 - ui) * fd[idx];
    }
  }
  ad::Var xhat = ad::Var::leaf(std::move(xh), true);
  ad::Var da_hat = models::DiscriminatorNet::adv_scalar(disc.forward(xhat).adv_map);
  ad::GradMap inner = ad::backward(ad::sum_all(da_hat), /*create_graph=*/true);
  auto it = inner.find(xhat.node.get());
  if (it == inner.end())
    throw std::logic_error("adv_loss_gp: critic produced no input gradient");
  ad::Var grad_norm = ad::sqrt_(ad::sum_samplewise(ad::square(it->second)));
  out.penalty = ad::mean_all(ad::square(ad::affine(grad_norm, 1.0, -1.0)));
  return out;
}

ad::Var adv_g_term_gp(const models::DiscriminatorNet& disc, const ad::Var& fake) {
  check_batch(fake, "adv_g_term_gp");
  return ad::neg(ad::mean_all(models::DiscriminatorNet::adv_scalar(disc.forward(fake).adv_map)));
}

ad::Var cls_loss_real(const models::DiscriminatorNet& disc, const ad::Var& x, const ad::Var& c) {
  check_batch(x, "cls_loss_real");
  ad::Var probs = ad::sigmoid_(disc.forward(x).cls_logits);
  return ad::mean_all(bce_per_sample(c, probs));
}

ad::Var cls_fake_on(const models::DiscriminatorNet& disc, const ad::Var& fake,
                    const ad::Var& c_tgt) {
  check_batch(fake, "cls_loss_fake");
  ad::Var probs = ad::sigmoid_(disc.forward(fake).cls_logits);
  return ad::mean_all(bce_per_sample(c_tgt, probs));
}

ad::Var cls_loss_fake(const models::DiscriminatorNet& disc, const models::GeneratorNet& gen,
                      const ad::Var& x, const ad::Var& s_tgt, const ad::Var& c_tgt) {
  check_batch(x, "cls_loss_fake");
  return cls_fake_on(disc, gen.forward(x, s_tgt, c_tgt), c_tgt);
}

ad::Var rec_loss_on(const models::GeneratorNet& gen, const ad::Var& fake, const ad::Var& x,
                    const ad::Var& s, const ad::Var& c) {
  check_batch(fake, "rec_loss");
  ad::Var recon = gen.forward(fake, s, c);
  return ad::mean_all(ad::abs_(ad::sub(x, recon)));
}

ad::Var rec_loss(const models::GeneratorNet& gen, const ad::Var& x, const ad::Var& s_tgt,
                 const ad::Var& c_tgt, const ad::Var& s, const ad::Var& c) {
  check_batch(x, "rec_loss");
  return rec_loss_on(gen, gen.forward(x, s_tgt, c_tgt), x, s, c);
}

// ------------------------------------------------------------ objectives

ad::Var objective_S(const ad::Var& seg_real) { return seg_real; }

ad::Var objective_D(const LossWeights& w, const DParts& parts) {
  w.validate();
  ad::Var adv;
  if (w.adv_mode == AdvMode::LogForm) {
    adv = ad::neg(parts.adv_logform);
  } else {
    adv = ad::add(ad::neg(parts.critic_gap), ad::affine(parts.gp_penalty, w.gp_weight, 0.0));
  }
  if (!parts.cls_real.defined()) return adv;
  return ad::add(adv, ad::affine(parts.cls_real, w.lambda1, 0.0));
}

ad::Var objective_G(const LossWeights& w, const GParts& parts, double lambda2_scale) {
  w.validate();
  ad::Var total = parts.adv_term;
  if (parts.cls_fake.defined())
    total = ad::add(total, ad::affine(parts.cls_fake, w.lambda1, 0.0));
  total = ad::add(total, ad::affine(parts.seg_fake, w.lambda2 * lambda2_scale, 0.0));
  total = ad::add(total, ad::affine(parts.rec, w.lambda3, 0.0));
  return total;
}

double objective_d_value(const LossWeights& w, double adv_or_gap, double gp_penalty,
                         double cls_real) {
  if (w.adv_mode == AdvMode::LogForm) return -adv_or_gap + w.lambda1 * cls_real;
  return -adv_or_gap + w.gp_weight * gp_penalty + w.lambda1 * cls_real;
}

double objective_g_value(const LossWeights& w, double adv_term, double cls_fake, double seg_fake,
                         double rec, double lambda2_scale) {
  return adv_term + w.lambda1 * cls_fake + w.lambda2 * lambda2_scale * seg_fake +
         w.lambda3 * rec;
}

}  // namespace sggan::losses
