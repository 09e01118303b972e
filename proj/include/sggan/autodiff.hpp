#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "sggan/tensor.hpp"

namespace sggan::ad {

struct Node;
using NodeRef = std::shared_ptr<Node>;

// Handle to a value in the compute graph. Copying shares the node.
class Var {
public:
  Var() = default;
  explicit Var(NodeRef n) : node(std::move(n)) {}

  static Var constant(Tensor v);
  static Var leaf(Tensor v, bool requires_grad);
  static Var scalar(double v) { return constant(Tensor::scalar(v)); }

  bool defined() const { return node != nullptr; }
  const Tensor& val() const;
  const Shape& shape() const { return val().shape(); }
  double item() const { return val().item(); }
  bool requires_grad() const;

  NodeRef node;
};

// Backward fn maps (grad wrt output, output var) -> grads wrt parents,
// aligned with `parents`; entries may be undefined for skipped inputs.
// Backward fns are themselves built from graph ops, so running backward
// with create_graph=true yields differentiable gradients (used by the
// gradient penalty).
struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<NodeRef> parents;
  std::function<std::vector<Var>(const Var& grad, const Var& self)> backward;
  const char* op = "leaf";
};

// Thread-local guard: ops invoked inside produce constant results.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Restores grad recording inside a NoGradGuard scope. Needed by terms that
// differentiate internally (the gradient penalty takes the critic's input
// gradient even when only its value is wanted).
class GradEnableGuard {
public:
  GradEnableGuard();
  ~GradEnableGuard();
  GradEnableGuard(const GradEnableGuard&) = delete;
  GradEnableGuard& operator=(const GradEnableGuard&) = delete;

private:
  int saved_;
};
bool grad_enabled();

using GradMap = std::unordered_map<Node*, Var>;

// Reverse-mode sweep from a scalar root. With create_graph=true the
// returned grads are graph nodes that can be differentiated again.
GradMap backward(const Var& root, bool create_graph = false);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var affine(const Var& x, double a, double b);  // a*x + b
Var neg(const Var& x);
Var abs_(const Var& x);
Var clamp_min(const Var& x, double lo);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var exp_(const Var& x);
Var log_(const Var& x);
Var sqrt_(const Var& x);
Var tanh_(const Var& x);
Var sigmoid_(const Var& x);
Var square(const Var& x);
Var mask_mul(const Var& x, Tensor mask);  // elementwise multiply by a constant

// ---- reductions / broadcasts ----
Var sum_all(const Var& x);                    // -> [1]
Var mean_all(const Var& x);                   // -> [1]
Var sum_samplewise(const Var& x);             // [N,...] -> [N]
Var sum_hw(const Var& x);                     // [N,C,H,W] -> [N,C]
Var sum_nhw(const Var& x);                    // [N,C,H,W] -> [C]
Var sum_c(const Var& x);                      // [N,C,H,W] -> [N,1,H,W]
Var bcast_all(const Var& s, const Shape& to);         // [1] -> to
Var bcast_samplewise(const Var& v, const Shape& to);  // [N] -> [N,...]
Var bcast_hw(const Var& m, int64_t h, int64_t w);     // [N,C] -> [N,C,H,W]
Var bcast_chan(const Var& p, int64_t n, int64_t h, int64_t w);  // [C] -> [N,C,H,W]
Var bcast_c1(const Var& x, int64_t c);                // [N,1,H,W] -> [N,C,H,W]

// ---- shape ----
Var reshape(const Var& x, const Shape& to);
Var concat_c(const std::vector<Var>& xs);             // along dim 1 of NCHW
Var slice_c(const Var& x, int64_t c0, int64_t c1);
Var embed_c(const Var& x, int64_t c0, int64_t c_total);

// ---- convolution family (closed under differentiation) ----
// conv2d requires exact fit: (H + 2p - k) divisible by stride.
Var conv2d(const Var& x, const Var& w, int stride, int pad);
Var conv_transpose2d(const Var& x, const Var& w, int stride, int pad);
Var conv2d_wgrad(const Var& x, const Var& gout, int stride, int pad, int kh, int kw);

// Per-pixel channel max as a constant (softmax stabilizer).
Tensor channel_max_detached(const Tensor& x);

}  // namespace sggan::ad
