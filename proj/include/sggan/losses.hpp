#pragma once

#include <string>
#include <vector>

#include "sggan/autodiff.hpp"
#include "sggan/core.hpp"
#include "sggan/models.hpp"

namespace sggan::losses {

enum class AdvMode { LogForm, GradientPenalty };

const char* adv_mode_name(AdvMode m);
AdvMode adv_mode_from_name(const std::string& s);

struct LossWeights {
  double lambda1 = 1.0;    // classification
  double lambda2 = 10.0;   // segmentation
  double lambda3 = 5.0;    // reconstruction
  double gp_weight = 10.0; // gradient penalty coefficient
  AdvMode adv_mode = AdvMode::GradientPenalty;

  void validate() const;  // all weights >= 0
};

// Log arguments are clamped below by this everywhere.
inline constexpr double kLogEps = 1e-12;

// ---- spec-facing scalar forms over core types ----

// -sum_pixels sum_classes t * log(max(p, eps)); summed, not pixel-averaged.
double pixelwise_ce(const core::SegmentationMap& target, const core::SegmentationMap& predicted);

// Multi-label binary cross-entropy -sum_k [c log p + (1-c) log(1-p)].
double attr_ce(const core::AttributeVector& target, const core::AttributeVector& predicted);

// Literal -sum_k c_k log p_k form (single-label degenerate case).
double attr_ce_literal(const core::AttributeVector& target,
                       const core::AttributeVector& predicted);

// ---- differentiable batched forms ----

// target/predicted [N,n_s,H,W] -> [N] (per-sample pixel-summed CE)
ad::Var ce_sum_per_sample(const ad::Var& target, const ad::Var& predicted);
// target/probs [N,n_c] -> [N]
ad::Var bce_per_sample(const ad::Var& target, const ad::Var& probs);

// E[A_s(s, S(x))] over the batch
ad::Var seg_loss_real(const models::SegmentorNet& seg, const ad::Var& x, const ad::Var& s);
// E[A_s(s', S(G(x,s',c')))]
ad::Var seg_loss_fake(const models::SegmentorNet& seg, const models::GeneratorNet& gen,
                      const ad::Var& x, const ad::Var& s_tgt, const ad::Var& c_tgt);
// same given a precomputed fake batch
ad::Var seg_loss_fake_on(const models::SegmentorNet& seg, const ad::Var& fake,
                         const ad::Var& s_tgt);

// E[log Da(x)] + E[log(1 - Da(fake))] with Da = sigmoid(mean adv map)
ad::Var adv_loss_logform(const models::DiscriminatorNet& disc, const ad::Var& real,
                         const ad::Var& fake);
// E[log(1 - Da(fake))] (generator's saturating log-form term)
ad::Var adv_g_term_logform(const models::DiscriminatorNet& disc, const ad::Var& fake);

struct GpTerms {
  ad::Var critic_gap;  // mean Da(real) - mean Da(fake), raw critic
  ad::Var penalty;     // E[(||grad_xhat Da(xhat)|| - 1)^2]
};
// u: one uniform interpolation coefficient per sample.
GpTerms adv_loss_gp(const models::DiscriminatorNet& disc, const ad::Var& real,
                    const ad::Var& fake, const std::vector<double>& u);
// -mean Da(fake) (generator's critic term)
ad::Var adv_g_term_gp(const models::DiscriminatorNet& disc, const ad::Var& fake);

ad::Var cls_loss_real(const models::DiscriminatorNet& disc, const ad::Var& x, const ad::Var& c);
ad::Var cls_loss_fake(const models::DiscriminatorNet& disc, const models::GeneratorNet& gen,
                      const ad::Var& x, const ad::Var& s_tgt, const ad::Var& c_tgt);
ad::Var cls_fake_on(const models::DiscriminatorNet& disc, const ad::Var& fake,
                    const ad::Var& c_tgt);

// E[|x - G(G(x,s',c'),s,c)|], mean absolute difference per element
ad::Var rec_loss(const models::GeneratorNet& gen, const ad::Var& x, const ad::Var& s_tgt,
                 const ad::Var& c_tgt, const ad::Var& s, const ad::Var& c);
ad::Var rec_loss_on(const models::GeneratorNet& gen, const ad::Var& fake, const ad::Var& x,
                    const ad::Var& s, const ad::Var& c);

// ---- objectives ----

ad::Var objective_S(const ad::Var& seg_real);

struct DParts {
  ad::Var adv_logform;  // log-form mode
  ad::Var critic_gap;   // gradient-penalty mode
  ad::Var gp_penalty;
  ad::Var cls_real;     // undefined when the classifier is disabled
};
ad::Var objective_D(const LossWeights& w, const DParts& parts);

struct GParts {
  ad::Var adv_term;  // mode-dependent generator adversarial term
  ad::Var cls_fake;  // undefined when the classifier is disabled
  ad::Var seg_fake;
  ad::Var rec;
};
// lambda2_scale multiplies lambda2 (the trainer passes (128/image_size)^2).
ad::Var objective_G(const LossWeights& w, const GParts& parts, double lambda2_scale = 1.0);

// plain-number combiners mirroring the objective structure
double objective_d_value(const LossWeights& w, double adv_or_gap, double gp_penalty,
                         double cls_real);
double objective_g_value(const LossWeights& w, double adv_term, double cls_fake, double seg_fake,
                         double rec, double lambda2_scale = 1.0);

}  // namespace sggan::losses
