#include "sggan/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "sggan/kernels.hpp"
#include "sggan/threadpool.hpp"

namespace sggan::ad {
namespace {

thread_local int tl_nograd = 0;

using BackwardFn = std::function<std::vector<Var>(const Var&, const Var&)>;

Var make_node(Tensor value, std::vector<Var> parents, BackwardFn fn, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  if (tl_nograd == 0) {
    for (const auto& p : parents)
      if (p.defined() && p.node->requires_grad) rg = true;
  }
  if (rg) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node);
    n->backward = std::move(fn);
    n->op = op;
  }
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
}

const kern::Kernels& K() { return kern::active(); }

std::vector<double>& tl_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

}  // namespace

Var Var::constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return Var(std::move(n));
}

Var Var::leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad && tl_nograd == 0;
  return Var(std::move(n));
}

const Tensor& Var::val() const {
  if (!node) throw std::logic_error("Var::val on undefined Var");
  return node->value;
}

bool Var::requires_grad() const { return node && node->requires_grad; }

NoGradGuard::NoGradGuard() { tl_nograd++; }
NoGradGuard::~NoGradGuard() { tl_nograd--; }

GradEnableGuard::GradEnableGuard() : saved_(tl_nograd) { tl_nograd = 0; }
GradEnableGuard::~GradEnableGuard() { tl_nograd = saved_; }

bool grad_enabled() { return tl_nograd == 0; }

// ---------------------------------------------------------------- engine

GradMap backward(const Var& root, bool create_graph) {
  if (!root.defined()) throw std::logic_error("backward: undefined root");
  if (!root.requires_grad())
    throw std::logic_error("backward: root does not require grad");

  // DFS postorder: parents precede children, so the reversed list gives a
  // valid reverse-mode order.
  std::vector<NodeRef> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<NodeRef, size_t>> stack;
  stack.emplace_back(root.node, 0);
  seen.insert(root.node.get());
  while (!stack.empty()) {
    auto& [nd, idx] = stack.back();
    if (idx < nd->parents.size()) {
      NodeRef p = nd->parents[idx++];
      if (p && p->requires_grad && seen.insert(p.get()).second)
        stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(nd);
      stack.pop_back();
    }
  }

  GradMap grads;
  grads[root.node.get()] = Var::constant(Tensor::full(root.shape(), 1.0));

  std::unique_ptr<NoGradGuard> guard;
  if (!create_graph) guard = std::make_unique<NoGradGuard>();

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* nd = it->get();
    auto git = grads.find(nd);
    if (git == grads.end()) continue;
    if (!nd->backward) continue;
    std::vector<Var> pg = nd->backward(git->second, Var(*it));
    if (pg.size() != nd->parents.size())
      throw std::logic_error(std::string("backward op ") + nd->op + ": arity mismatch");
    for (size_t i = 0; i < pg.size(); ++i) {
      const NodeRef& parent = nd->parents[i];
      if (!parent || !parent->requires_grad || !pg[i].defined()) continue;
      Var& slot = grads[parent.get()];
      slot = slot.defined() ? add(slot, pg[i]) : pg[i];
    }
  }
  return grads;
}


namespace {
// chunked elementwise map; deterministic since every index computes the same
template <class F>
void par_map(int64_t n, F&& f) {
  ThreadPool::instance().parallel_for(n, 16384, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) f(i);
  });
}
}  // namespace

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::uninit(a.shape());
  K().add(a.val().data(), b.val().data(), out.data(), out.numel());
  return make_node(std::move(out), {a, b},
                   [](const Var& g, const Var&) -> std::vector<Var> { return {g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::uninit(a.shape());
  K().sub(a.val().data(), b.val().data(), out.data(), out.numel());
  return make_node(std::move(out), {a, b},
                   [](const Var& g, const Var&) -> std::vector<Var> { return {g, neg(g)}; },
                   "sub");
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::uninit(a.shape());
  K().mul(a.val().data(), b.val().data(), out.data(), out.numel());
  bool na = a.requires_grad(), nb = b.requires_grad();
  return make_node(std::move(out), {a, b},
                   [a, b, na, nb](const Var& g, const Var&) -> std::vector<Var> {
                     return {na ? mul(g, b) : Var(), nb ? mul(g, a) : Var()};
                   },
                   "mul");
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = Tensor::uninit(a.shape());
  K().div(a.val().data(), b.val().data(), out.data(), out.numel());
  bool na = a.requires_grad(), nb = b.requires_grad();
  return make_node(std::move(out), {a, b},
                   [a, b, na, nb](const Var& g, const Var&) -> std::vector<Var> {
                     Var ga = na ? div(g, b) : Var();
                     Var gb = nb ? neg(div(mul(g, a), mul(b, b))) : Var();
                     return {ga, gb};
                   },
                   "div");
}

Var affine(const Var& x, double a, double b) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  double* od = out.data();
  par_map(out.numel(), [&](int64_t i) { od[i] = a * xd[i] + b; });
  return make_node(std::move(out), {x},
                   [a](const Var& g, const Var&) -> std::vector<Var> {
                     return {affine(g, a, 0.0)};
                   },
                   "affine");
}

Var neg(const Var& x) { return affine(x, -1.0, 0.0); }

namespace {
Var masked(const Var& x, Tensor value, Tensor mask, const char* op) {
  return make_node(std::move(value), {x},
                   [m = std::move(mask)](const Var& g, const Var&) -> std::vector<Var> {
                     return {mask_mul(g, m)};
                   },
                   op);
}
}  // namespace

Var abs_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape()), mask = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) {
    double s = xd[i] > 0 ? 1.0 : (xd[i] < 0 ? -1.0 : 0.0);
    mask[i] = s;
    out[i] = s * xd[i];
  });
  return masked(x, std::move(out), std::move(mask), "abs");
}

Var clamp_min(const Var& x, double lo) {
  Tensor out = Tensor::uninit(x.shape()), mask = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) {
    bool keep = xd[i] >= lo;
    out[i] = keep ? xd[i] : lo;
    mask[i] = keep ? 1.0 : 0.0;
  });
  return masked(x, std::move(out), std::move(mask), "clamp_min");
}

Var relu(const Var& x) {
  Tensor out = Tensor::uninit(x.shape()), mask = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) {
    bool pos = xd[i] > 0;
    out[i] = pos ? xd[i] : 0.0;
    mask[i] = pos ? 1.0 : 0.0;
  });
  return masked(x, std::move(out), std::move(mask), "relu");
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = Tensor::uninit(x.shape()), mask = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) {
    double m = xd[i] > 0 ? 1.0 : slope;
    mask[i] = m;
    out[i] = m * xd[i];
  });
  return masked(x, std::move(out), std::move(mask), "leaky_relu");
}

Var mask_mul(const Var& x, Tensor mask) {
  if (x.shape() != mask.shape())
    throw std::invalid_argument("mask_mul: shape mismatch");
  Tensor out = Tensor::uninit(x.shape());
  K().mul(x.val().data(), mask.data(), out.data(), out.numel());
  return masked(x, std::move(out), std::move(mask), "mask_mul");
}

Var exp_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) { out[i] = std::exp(xd[i]); });
  return make_node(std::move(out), {x},
                   [](const Var& g, const Var& self) -> std::vector<Var> {
                     return {mul(g, self)};
                   },
                   "exp");
}

Var log_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) { out[i] = std::log(xd[i]); });
  return make_node(std::move(out), {x},
                   [x](const Var& g, const Var&) -> std::vector<Var> {
                     return {div(g, x)};
                   },
                   "log");
}

Var sqrt_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) { out[i] = std::sqrt(xd[i]); });
  return make_node(std::move(out), {x},
                   [](const Var& g, const Var& self) -> std::vector<Var> {
                     return {affine(div(g, self), 0.5, 0.0)};
                   },
                   "sqrt");
}

Var tanh_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) { out[i] = std::tanh(xd[i]); });
  return make_node(std::move(out), {x},
                   [](const Var& g, const Var& self) -> std::vector<Var> {
                     return {mul(g, affine(mul(self, self), -1.0, 1.0))};
                   },
                   "tanh");
}

Var sigmoid_(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  const double* xd = x.val().data();
  par_map(out.numel(), [&](int64_t i) { out[i] = 1.0 / (1.0 + std::exp(-xd[i])); });
  return make_node(std::move(out), {x},
                   [](const Var& g, const Var& self) -> std::vector<Var> {
                     return {mul(g, mul(self, affine(self, -1.0, 1.0)))};
                   },
                   "sigmoid");
}

Var square(const Var& x) { return mul(x, x); }

// ---------------------------------------------------------------- reductions

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(K().sum(x.val().data(), x.val().numel()));
  Shape from = x.shape();
  return make_node(std::move(out), {x},
                   [from](const Var& g, const Var&) -> std::vector<Var> {
                     return {bcast_all(g, from)};
                   },
                   "sum_all");
}

Var mean_all(const Var& x) {
  int64_t n = x.val().numel();
  return affine(sum_all(x), 1.0 / static_cast<double>(n), 0.0);
}

Var sum_samplewise(const Var& x) {
  const Shape& s = x.shape();
  if (s.rank() < 2) throw std::invalid_argument("sum_samplewise: rank < 2");
  int64_t n = s[0];
  int64_t per = s.numel() / n;
  Tensor out = Tensor::uninit(Shape{n});
  const double* xd = x.val().data();
  for (int64_t i = 0; i < n; ++i) out[i] = K().sum(xd + i * per, per);
  Shape from = s;
  return make_node(std::move(out), {x},
                   [from](const Var& g, const Var&) -> std::vector<Var> {
                     return {bcast_samplewise(g, from)};
                   },
                   "sum_samplewise");
}

Var sum_hw(const Var& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("sum_hw: expected NCHW");
  int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out = Tensor::uninit(Shape{n, c});
  const double* xd = x.val().data();
  for (int64_t i = 0; i < n * c; ++i) out[i] = K().sum(xd + i * hw, hw);
  int64_t h = s[2], w = s[3];
  return make_node(std::move(out), {x},
                   [h, w](const Var& g, const Var&) -> std::vector<Var> {
                     return {bcast_hw(g, h, w)};
                   },
                   "sum_hw");
}

Var sum_nhw(const Var& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("sum_nhw: expected NCHW");
  int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out(Shape{c});
  const double* xd = x.val().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) out[j] += K().sum(xd + (i * c + j) * hw, hw);
  int64_t h = s[2], w = s[3];
  return make_node(std::move(out), {x},
                   [n, h, w](const Var& g, const Var&) -> std::vector<Var> {
                     return {bcast_chan(g, n, h, w)};
                   },
                   "sum_nhw");
}

Var sum_c(const Var& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("sum_c: expected NCHW");
  int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out = Tensor::uninit(Shape{n, 1, s[2], s[3]});
  const double* xd = x.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i) {
    double* orow = od + i * hw;
    const double* xrow = xd + i * c * hw;
    std::memcpy(orow, xrow, sizeof(double) * hw);
    for (int64_t j = 1; j < c; ++j) K().add(orow, xrow + j * hw, orow, hw);
  }
  return make_node(std::move(out), {x},
                   [c](const Var& g, const Var&) -> std::vector<Var> {
                     return {bcast_c1(g, c)};
                   },
                   "sum_c");
}

// ---------------------------------------------------------------- broadcasts

Var bcast_all(const Var& s, const Shape& to) {
  if (s.val().numel() != 1) throw std::invalid_argument("bcast_all: source not scalar");
  Tensor out = Tensor::full(to, s.val().item());
  return make_node(std::move(out), {s},
                   [](const Var& g, const Var&) -> std::vector<Var> {
                     return {sum_all(g)};
                   },
                   "bcast_all");
}

Var bcast_samplewise(const Var& v, const Shape& to) {
  if (v.shape().rank() != 1 || v.shape()[0] != to[0])
    throw std::invalid_argument("bcast_samplewise: bad shapes");
  int64_t n = to[0], per = to.numel() / n;
  Tensor out = Tensor::uninit(to);
  const double* vd = v.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < per; ++j) od[i * per + j] = vd[i];
  return make_node(std::move(out), {v},
                   [](const Var& g, const Var&) -> std::vector<Var> {
                     return {sum_samplewise(g)};
                   },
                   "bcast_samplewise");
}

Var bcast_hw(const Var& m, int64_t h, int64_t w) {
  const Shape& s = m.shape();
  if (s.rank() != 2) throw std::invalid_argument("bcast_hw: expected [N,C]");
  int64_t n = s[0], c = s[1], hw = h * w;
  Tensor out = Tensor::uninit(Shape{n, c, h, w});
  const double* md = m.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n * c; ++i)
    for (int64_t j = 0; j < hw; ++j) od[i * hw + j] = md[i];
  return make_node(std::move(out), {m},
                   [](const Var& g, const Var&) -> std::vector<Var> {
                     return {sum_hw(g)};
                   },
                   "bcast_hw");
}

Var bcast_chan(const Var& p, int64_t n, int64_t h, int64_t w) {
  const Shape& s = p.shape();
  if (s.rank() != 1) throw std::invalid_argument("bcast_chan: expected [C]");
  int64_t c = s[0], hw = h * w;
  Tensor out = Tensor::uninit(Shape{n, c, h, w});
  const double* pd = p.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      for (int64_t q = 0; q < hw; ++q) od[(i * c + j) * hw + q] = pd[j];
  return make_node(std::move(out), {p},
                   [](const Var& g, const Var&) -> std::vector<Var> {
                     return {sum_nhw(g)};
                   },
                   "bcast_chan");
}

Var bcast_c1(const Var& x, int64_t c) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != 1) throw std::invalid_argument("bcast_c1: expected [N,1,H,W]");
  int64_t n = s[0], hw = s[2] * s[3];
  Tensor out = Tensor::uninit(Shape{n, c, s[2], s[3]});
  const double* xd = x.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      std::memcpy(od + (i * c + j) * hw, xd + i * hw, sizeof(double) * hw);
  return make_node(std::move(out), {x},
                   [](const Var& g, const Var&) -> std::vector<Var> {
                     return {sum_c(g)};
                   },
                   "bcast_c1");
}

// ---------------------------------------------------------------- shape

Var reshape(const Var& x, const Shape& to) {
  if (to.numel() != x.val().numel())
    throw std::invalid_argument("reshape: numel mismatch " + x.shape().str() + " -> " + to.str());
  Tensor out = Tensor::uninit(to);
  std::memcpy(out.data(), x.val().data(), sizeof(double) * out.numel());
  Shape from = x.shape();
  return make_node(std::move(out), {x},
                   [from](const Var& g, const Var&) -> std::vector<Var> {
                     return {reshape(g, from)};
                   },
                   "reshape");
}

Var concat_c(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_c: empty input");
  const Shape& s0 = xs[0].shape();
  if (s0.rank() != 4) throw std::invalid_argument("concat_c: expected NCHW");
  int64_t n = s0[0], h = s0[2], w = s0[3], hw = h * w, ctot = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.rank() != 4 || s[0] != n || s[2] != h || s[3] != w)
      throw std::invalid_argument("concat_c: incompatible shapes");
    ctot += s[1];
  }
  Tensor out = Tensor::uninit(Shape{n, ctot, h, w});
  double* od = out.data();
  int64_t coff = 0;
  std::vector<int64_t> offsets;
  for (const auto& x : xs) {
    int64_t c = x.shape()[1];
    offsets.push_back(coff);
    const double* xd = x.val().data();
    for (int64_t i = 0; i < n; ++i)
      std::memcpy(od + (i * ctot + coff) * hw, xd + i * c * hw, sizeof(double) * c * hw);
    coff += c;
  }
  std::vector<int64_t> cs;
  for (const auto& x : xs) cs.push_back(x.shape()[1]);
  return make_node(std::move(out), xs,
                   [offsets, cs](const Var& g, const Var&) -> std::vector<Var> {
                     std::vector<Var> pg;
                     for (size_t i = 0; i < cs.size(); ++i)
                       pg.push_back(slice_c(g, offsets[i], offsets[i] + cs[i]));
                     return pg;
                   },
                   "concat_c");
}

Var slice_c(const Var& x, int64_t c0, int64_t c1) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || c0 < 0 || c1 > s[1] || c0 >= c1)
    throw std::invalid_argument("slice_c: bad channel range");
  int64_t n = s[0], c = s[1], hw = s[2] * s[3], cs = c1 - c0;
  Tensor out = Tensor::uninit(Shape{n, cs, s[2], s[3]});
  const double* xd = x.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(od + i * cs * hw, xd + (i * c + c0) * hw, sizeof(double) * cs * hw);
  return make_node(std::move(out), {x},
                   [c0, c](const Var& g, const Var&) -> std::vector<Var> {
                     return {embed_c(g, c0, c)};
                   },
                   "slice_c");
}

Var embed_c(const Var& x, int64_t c0, int64_t c_total) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || c0 < 0 || c0 + s[1] > c_total)
    throw std::invalid_argument("embed_c: bad channel range");
  int64_t n = s[0], cs = s[1], hw = s[2] * s[3];
  Tensor out(Shape{n, c_total, s[2], s[3]});
  const double* xd = x.val().data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(od + (i * c_total + c0) * hw, xd + i * cs * hw, sizeof(double) * cs * hw);
  int64_t c1 = c0 + cs;
  return make_node(std::move(out), {x},
                   [c0, c1](const Var& g, const Var&) -> std::vector<Var> {
                     return {slice_c(g, c0, c1)};
                   },
                   "embed_c");
}

// ---------------------------------------------------------------- conv

namespace {

struct ConvDims {
  int64_t n, ci, h, w, co, kh, kw, ho, wo;
  int stride, pad;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad, const char* op) {
  if (xs.rank() != 4 || ws.rank() != 4)
    throw std::invalid_argument(std::string(op) + ": expected NCHW input and OIHW weight");
  ConvDims d;
  d.n = xs[0];
  d.ci = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.co = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.stride = stride;
  d.pad = pad;
  if (ws[1] != d.ci)
    throw std::invalid_argument(std::string(op) + ": channel mismatch x" + xs.str() + " w" +
                                ws.str());
  int64_t hnum = d.h + 2 * pad - d.kh;
  int64_t wnum = d.w + 2 * pad - d.kw;
  if (hnum < 0 || wnum < 0 || hnum % stride != 0 || wnum % stride != 0)
    throw std::invalid_argument(std::string(op) + ": non-exact geometry for " + xs.str() +
                                " k=" + std::to_string(d.kh) + " s=" + std::to_string(stride) +
                                " p=" + std::to_string(pad));
  d.ho = hnum / stride + 1;
  d.wo = wnum / stride + 1;
  return d;
}

// col[r*ld + col0 + q] with r = (c*kh + i)*kw + j, q = ho*wo
void im2col(const double* x, const ConvDims& d, double* col, int64_t ld, int64_t col0) {
  for (int64_t c = 0; c < d.ci; ++c) {
    const double* xc = x + c * d.h * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki)
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        double* row = col + ((c * d.kh + ki) * d.kw + kj) * ld + col0;
        for (int64_t ho = 0; ho < d.ho; ++ho) {
          int64_t iy = ho * d.stride - d.pad + ki;
          double* out = row + ho * d.wo;
          if (iy < 0 || iy >= d.h) {
            for (int64_t wo = 0; wo < d.wo; ++wo) out[wo] = 0.0;
            continue;
          }
          const double* xrow = xc + iy * d.w;
          for (int64_t wo = 0; wo < d.wo; ++wo) {
            int64_t ix = wo * d.stride - d.pad + kj;
            out[wo] = (ix >= 0 && ix < d.w) ? xrow[ix] : 0.0;
          }
        }
      }
  }
}

// adjoint of im2col: scatter-add col back into the image
void col2im_add(const double* col, const ConvDims& d, double* x) {
  for (int64_t c = 0; c < d.ci; ++c) {
    double* xc = x + c * d.h * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki)
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        const double* row = col + ((c * d.kh + ki) * d.kw + kj) * d.ho * d.wo;
        for (int64_t ho = 0; ho < d.ho; ++ho) {
          int64_t iy = ho * d.stride - d.pad + ki;
          if (iy < 0 || iy >= d.h) continue;
          double* xrow = xc + iy * d.w;
          const double* crow = row + ho * d.wo;
          for (int64_t wo = 0; wo < d.wo; ++wo) {
            int64_t ix = wo * d.stride - d.pad + kj;
            if (ix >= 0 && ix < d.w) xrow[ix] += crow[wo];
          }
        }
      }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad, "conv2d");
  Tensor out = Tensor::uninit(Shape{d.n, d.co, d.ho, d.wo});
  int64_t cikk = d.ci * d.kh * d.kw;
  int64_t howo = d.ho * d.wo;
  const double* xd = x.val().data();
  const double* wd = w.val().data();
  double* od = out.data();
  ThreadPool::instance().parallel_for(d.n, 1, [&](int64_t n0, int64_t n1) {
    auto& col = tl_scratch();
    if (static_cast<int64_t>(col.size()) < cikk * howo) col.resize(cikk * howo);
    for (int64_t i = n0; i < n1; ++i) {
      im2col(xd + i * d.ci * d.h * d.w, d, col.data(), howo, 0);
      K().gemm_nn(d.co, howo, cikk, wd, col.data(), od + i * d.co * howo, false);
    }
  });
  bool nx = x.requires_grad(), nw = w.requires_grad();
  int kh = static_cast<int>(d.kh), kw = static_cast<int>(d.kw);
  return make_node(std::move(out), {x, w},
                   [x, w, stride, pad, kh, kw, nx, nw](const Var& g, const Var&) -> std::vector<Var> {
                     Var gx = nx ? conv_transpose2d(g, w, stride, pad) : Var();
                     Var gw = nw ? conv2d_wgrad(x, g, stride, pad, kh, kw) : Var();
                     return {gx, gw};
                   },
                   "conv2d");
}

Var conv_transpose2d(const Var& x, const Var& w, int stride, int pad) {
  // x plays the conv-output role; result has the conv-input geometry.
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.rank() != 4 || ws.rank() != 4 || xs[1] != ws[0])
    throw std::invalid_argument("conv_transpose2d: shape mismatch x" + xs.str() + " w" +
                                ws.str());
  int64_t hout = (xs[2] - 1) * stride - 2 * pad + ws[2];
  int64_t wout = (xs[3] - 1) * stride - 2 * pad + ws[3];
  Shape out_shape{xs[0], ws[1], hout, wout};
  ConvDims d = conv_dims(out_shape, ws, stride, pad, "conv_transpose2d");
  if (d.ho != xs[2] || d.wo != xs[3])
    throw std::invalid_argument("conv_transpose2d: inconsistent geometry");
  Tensor out(out_shape);
  int64_t cikk = d.ci * d.kh * d.kw;
  int64_t howo = d.ho * d.wo;
  const double* xd = x.val().data();
  const double* wd = w.val().data();
  double* od = out.data();
  ThreadPool::instance().parallel_for(d.n, 1, [&](int64_t n0, int64_t n1) {
    auto& col = tl_scratch();
    if (static_cast<int64_t>(col.size()) < cikk * howo) col.resize(cikk * howo);
    for (int64_t i = n0; i < n1; ++i) {
      K().gemm_tn(cikk, howo, d.co, wd, xd + i * d.co * howo, col.data(), false);
      col2im_add(col.data(), d, od + i * d.ci * d.h * d.w);
    }
  });
  bool nx = x.requires_grad(), nw = w.requires_grad();
  int kh = static_cast<int>(d.kh), kw = static_cast<int>(d.kw);
  return make_node(std::move(out), {x, w},
                   [x, w, stride, pad, kh, kw, nx, nw](const Var& g, const Var&) -> std::vector<Var> {
                     Var gx = nx ? conv2d(g, w, stride, pad) : Var();
                     Var gw = nw ? conv2d_wgrad(g, x, stride, pad, kh, kw) : Var();
                     return {gx, gw};
                   },
                   "conv_transpose2d");
}

Var conv2d_wgrad(const Var& x, const Var& gout, int stride, int pad, int kh, int kw) {
  const Shape& xs = x.shape();
  const Shape& gs = gout.shape();
  if (xs.rank() != 4 || gs.rank() != 4 || xs[0] != gs[0])
    throw std::invalid_argument("conv2d_wgrad: shape mismatch");
  Shape ws{gs[1], xs[1], kh, kw};
  ConvDims d = conv_dims(xs, ws, stride, pad, "conv2d_wgrad");
  if (d.ho != gs[2] || d.wo != gs[3])
    throw std::invalid_argument("conv2d_wgrad: gout geometry mismatch");
  int64_t cikk = d.ci * d.kh * d.kw;
  int64_t howo = d.ho * d.wo;
  int64_t kcols = d.n * howo;
  // fully overwritten below; skip the zero fill on these large buffers
  std::unique_ptr<double[]> colcat(new double[static_cast<size_t>(cikk * kcols)]);
  std::unique_ptr<double[]> gcat(new double[static_cast<size_t>(d.co * kcols)]);
  const double* xd = x.val().data();
  const double* gd = gout.val().data();
  ThreadPool::instance().parallel_for(d.n, 1, [&](int64_t n0, int64_t n1) {
    for (int64_t i = n0; i < n1; ++i) {
      im2col(xd + i * d.ci * d.h * d.w, d, colcat.get(), kcols, i * howo);
      for (int64_t o = 0; o < d.co; ++o)
        std::memcpy(gcat.get() + o * kcols + i * howo, gd + (i * d.co + o) * howo,
                    sizeof(double) * howo);
    }
  });
  Tensor out = Tensor::uninit(ws);
  K().gemm_nt(d.co, cikk, kcols, gcat.get(), colcat.get(), out.data(), false);
  bool nx = x.requires_grad(), ng = gout.requires_grad();
  return make_node(std::move(out), {x, gout},
                   [x, gout, stride, pad, nx, ng](const Var& gw, const Var&) -> std::vector<Var> {
                     Var gx = nx ? conv_transpose2d(gout, gw, stride, pad) : Var();
                     Var gg = ng ? conv2d(x, gw, stride, pad) : Var();
                     return {gx, gg};
                   },
                   "conv2d_wgrad");
}

Tensor channel_max_detached(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("channel_max_detached: expected NCHW");
  int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out = Tensor::uninit(Shape{n, 1, s[2], s[3]});
  const double* xd = x.data();
  double* od = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t q = 0; q < hw; ++q) {
      double m = xd[i * c * hw + q];
      for (int64_t j = 1; j < c; ++j) {
        double v = xd[(i * c + j) * hw + q];
        if (v > m) m = v;
      }
      od[i * hw + q] = m;
    }
  return out;
}

}  // namespace sggan::ad
