#include "sggan/training.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sggan::training {
namespace fs = std::filesystem;
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_finite_loss(const char* term, double v, int64_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error("non-finite loss term '" + std::string(term) + "' at step " +
                             std::to_string(step));
}

}  // namespace

// ------------------------------------------------------------ config

void TrainConfig::validate() const {
  weights.validate();
  arch.validate();
  if (batch_size < 2)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 2 (target shuffling "
                                "needs at least two samples)");
  if (lr_g <= 0 || lr_d <= 0 || lr_s <= 0)
    throw std::invalid_argument("TrainConfig: learning rates must be > 0");
  if (total_steps < 0) throw std::invalid_argument("TrainConfig: total_steps must be >= 0");
  if (n_critic < 1) throw std::invalid_argument("TrainConfig: n_critic must be >= 1");
  if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
  if (checkpoint_every < 0)
    throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw std::invalid_argument("TrainConfig: Adam betas must be in [0, 1)");
  if (!attr_names.empty() && static_cast<int>(attr_names.size()) != arch.n_c)
    throw std::invalid_argument("TrainConfig: attr_names length must equal n_c");
  if (seg_reduction != "sum" && seg_reduction != "mean")
    throw std::invalid_argument("TrainConfig: seg_reduction must be sum or mean");
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "adv_mode = " << losses::adv_mode_name(weights.adv_mode) << "\n";
  os << "lambda1 = " << fmt_double(weights.lambda1) << "\n";
  os << "lambda2 = " << fmt_double(weights.lambda2) << "\n";
  os << "lambda3 = " << fmt_double(weights.lambda3) << "\n";
  os << "gp_weight = " << fmt_double(weights.gp_weight) << "\n";
  os << "image_size = " << arch.image_size << "\n";
  os << "n_s = " << arch.n_s << "\n";
  os << "n_c = " << arch.n_c << "\n";
  os << "base_width = " << arch.base_width << "\n";
  os << "g_resblocks = " << arch.g_resblocks << "\n";
  os << "s_resblocks = " << arch.s_resblocks << "\n";
  os << "d_layers = " << arch.d_layers << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "total_steps = " << total_steps << "\n";
  os << "lr_g = " << fmt_double(lr_g) << "\n";
  os << "lr_d = " << fmt_double(lr_d) << "\n";
  os << "lr_s = " << fmt_double(lr_s) << "\n";
  os << "adam_beta1 = " << fmt_double(adam_beta1) << "\n";
  os << "adam_beta2 = " << fmt_double(adam_beta2) << "\n";
  os << "adam_eps = " << fmt_double(adam_eps) << "\n";
  os << "n_critic = " << n_critic << "\n";
  os << "seed = " << seed << "\n";
  os << "checkpoint_every = " << checkpoint_every << "\n";
  os << "log_every = " << log_every << "\n";
  os << "classifier_enabled = " << (classifier_enabled ? 1 : 0) << "\n";
  os << "joint_target_shuffle = " << (joint_target_shuffle ? 1 : 0) << "\n";
  os << "segmentor_only = " << (segmentor_only ? 1 : 0) << "\n";
  os << "seg_reduction = " << seg_reduction << "\n";
  if (!attr_names.empty()) {
    os << "attr_names = ";
    for (size_t i = 0; i < attr_names.size(); ++i)
      os << (i ? "," : "") << attr_names[i];
    os << "\n";
  }
  return os.str();
}

void TrainConfig::apply_override(const std::string& key, const std::string& value) {
  auto to_i64 = [&](const std::string& v) { return std::stoll(v); };
  auto to_d = [&](const std::string& v) { return std::stod(v); };
  auto to_b = [&](const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::invalid_argument("config: boolean key '" + key + "' got '" + v + "'");
  };
  if (key == "adv_mode") weights.adv_mode = losses::adv_mode_from_name(value);
  else if (key == "lambda1") weights.lambda1 = to_d(value);
  else if (key == "lambda2") weights.lambda2 = to_d(value);
  else if (key == "lambda3") weights.lambda3 = to_d(value);
  else if (key == "gp_weight") weights.gp_weight = to_d(value);
  else if (key == "image_size") arch.image_size = static_cast<int>(to_i64(value));
  else if (key == "n_s") arch.n_s = static_cast<int>(to_i64(value));
  else if (key == "n_c") arch.n_c = static_cast<int>(to_i64(value));
  else if (key == "base_width") arch.base_width = static_cast<int>(to_i64(value));
  else if (key == "g_resblocks") arch.g_resblocks = static_cast<int>(to_i64(value));
  else if (key == "s_resblocks") arch.s_resblocks = static_cast<int>(to_i64(value));
  else if (key == "d_layers") arch.d_layers = static_cast<int>(to_i64(value));
  else if (key == "batch_size") batch_size = static_cast<int>(to_i64(value));
  else if (key == "total_steps") total_steps = to_i64(value);
  else if (key == "lr_g") lr_g = to_d(value);
  else if (key == "lr_d") lr_d = to_d(value);
  else if (key == "lr_s") lr_s = to_d(value);
  else if (key == "adam_beta1") adam_beta1 = to_d(value);
  else if (key == "adam_beta2") adam_beta2 = to_d(value);
  else if (key == "adam_eps") adam_eps = to_d(value);
  else if (key == "n_critic") n_critic = static_cast<int>(to_i64(value));
  else if (key == "seed") seed = static_cast<uint64_t>(std::stoull(value));
  else if (key == "checkpoint_every") checkpoint_every = to_i64(value);
  else if (key == "log_every") log_every = to_i64(value);
  else if (key == "classifier_enabled") classifier_enabled = to_b(value);
  else if (key == "joint_target_shuffle") joint_target_shuffle = to_b(value);
  else if (key == "segmentor_only") segmentor_only = to_b(value);
  else if (key == "seg_reduction") {
    if (value != "sum" && value != "mean")
      throw std::invalid_argument("config: seg_reduction must be sum or mean");
    seg_reduction = value;
  }
  else if (key == "attr_names") {
    attr_names.clear();
    std::istringstream is(value);
    std::string name;
    while (std::getline(is, name, ','))
      if (!name.empty()) attr_names.push_back(name);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    size_t h = line.find('#');
    if (h != std::string::npos) line = line.substr(0, h);
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      cfg.apply_override(key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

// ------------------------------------------------------------ Adam

void Adam::init(const std::vector<nn::Param>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.push_back(Tensor::zeros(p.var.shape()));
    v.push_back(Tensor::zeros(p.var.shape()));
  }
}

void Adam::step(std::vector<nn::Param>& params, const ad::GradMap& grads, const char* objective,
                int64_t step_no) {
  if (m.size() != params.size()) throw std::logic_error("Adam::step before init");
  t++;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& pv = params[i].var.node->value;
    auto git = grads.find(params[i].var.node.get());
    const double* g = git != grads.end() && git->second.defined()
                          ? git->second.val().data()
                          : nullptr;
    double* md = m[i].data();
    double* vd = v[i].data();
    double* pd = pv.data();
    for (int64_t j = 0; j < pv.numel(); ++j) {
      double gj = g ? g[j] : 0.0;
      md[j] = b1 * md[j] + (1.0 - b1) * gj;
      vd[j] = b2 * vd[j] + (1.0 - b2) * gj * gj;
      pd[j] -= lr * (md[j] / bc1) / (std::sqrt(vd[j] / bc2) + eps);
      if (!std::isfinite(pd[j]))
        throw std::runtime_error("non-finite parameter '" + params[i].name +
                                 "' after optimizing " + objective + " at step " +
                                 std::to_string(step_no));
    }
  }
}

namespace {
constexpr char kAdamMagic[8] = {'S', 'G', 'A', 'D', 'A', 'M', '0', '1'};
}

void Adam::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write(kAdamMagic, sizeof(kAdamMagic));
  int64_t tt = t;
  uint64_t n = m.size();
  f.write(reinterpret_cast<const char*>(&tt), sizeof(tt));
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (size_t i = 0; i < m.size(); ++i) {
    f.write(reinterpret_cast<const char*>(m[i].data()),
            static_cast<std::streamsize>(sizeof(double) * m[i].numel()));
    f.write(reinterpret_cast<const char*>(v[i].data()),
            static_cast<std::streamsize>(sizeof(double) * v[i].numel()));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

void Adam::load(const std::string& path, const std::vector<nn::Param>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kAdamMagic, sizeof(kAdamMagic)) != 0)
    throw std::runtime_error("not an optimizer archive: " + path);
  int64_t tt = 0;
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&tt), sizeof(tt));
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (n != params.size())
    throw std::runtime_error(path + ": optimizer slot count mismatch");
  init(params);
  t = tt;
  for (size_t i = 0; i < params.size(); ++i) {
    f.read(reinterpret_cast<char*>(m[i].data()),
           static_cast<std::streamsize>(sizeof(double) * m[i].numel()));
    f.read(reinterpret_cast<char*>(v[i].data()),
           static_cast<std::streamsize>(sizeof(double) * v[i].numel()));
  }
  if (!f) throw std::runtime_error("truncated optimizer archive: " + path);
}

// ------------------------------------------------------------ batches

Batch pack_batch(const data::SampleSet& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("pack_batch: empty batch");
  int n = static_cast<int>(indices.size());
  int sz = ds.image_size;
  Tensor x(Shape{n, 3, sz, sz});
  Tensor s(Shape{n, ds.n_s, sz, sz});
  Tensor c(Shape{n, ds.n_c});
  for (int b = 0; b < n; ++b) {
    const data::PackedSample& p = ds.samples[static_cast<size_t>(indices[static_cast<size_t>(b)])];
    int64_t xoff = static_cast<int64_t>(b) * 3 * sz * sz;
    for (size_t i = 0; i < p.image.size(); ++i) x[xoff + static_cast<int64_t>(i)] = p.image[i];
    int64_t soff = static_cast<int64_t>(b) * ds.n_s * sz * sz;
    for (int q = 0; q < sz * sz; ++q)
      s[soff + static_cast<int64_t>(p.labels[static_cast<size_t>(q)]) * sz * sz + q] = 1.0;
    for (int k = 0; k < ds.n_c; ++k)
      c[static_cast<int64_t>(b) * ds.n_c + k] = p.attrs[static_cast<size_t>(k)];
  }
  Batch batch;
  batch.x = ad::Var::constant(std::move(x));
  batch.s = ad::Var::constant(std::move(s));
  batch.c = ad::Var::constant(std::move(c));
  return batch;
}

namespace {
Tensor gather_rows(const Tensor& src, const std::vector<int>& perm) {
  const Shape& sh = src.shape();
  int64_t n = sh[0];
  int64_t per = src.numel() / n;
  Tensor out(sh);
  for (int64_t i = 0; i < n; ++i) {
    const double* from = src.data() + static_cast<int64_t>(perm[static_cast<size_t>(i)]) * per;
    std::copy(from, from + per, out.data() + i * per);
  }
  return out;
}
}  // namespace

void sample_targets(Batch& batch, Rng& rng, bool joint) {
  int n = static_cast<int>(batch.x.shape()[0]);
  if (n < 2) throw std::invalid_argument("sample_targets: batch size must be >= 2");
  batch.perm_s = rng.permutation(n);
  batch.perm_c = joint ? batch.perm_s : rng.permutation(n);
  batch.s_tgt = ad::Var::constant(gather_rows(batch.s.val(), batch.perm_s));
  batch.c_tgt = ad::Var::constant(gather_rows(batch.c.val(), batch.perm_c));
}

// ------------------------------------------------------------ train step

// Deliberately skips TrainConfig::validate(): train() enforces the config
// invariants at its boundary, while the raw step machinery stays usable with
// degenerate settings (zero learning rates) in tests.
TrainState init_state(const TrainConfig& cfg) {
  TrainState st;
  st.nets = models::build_networks(cfg.arch, cfg.seed);
  st.opt_g = {cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  st.opt_d = {cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  st.opt_s = {cfg.lr_s, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  st.opt_g.init(st.nets.g.params());
  st.opt_d.init(st.nets.d.params());
  st.opt_s.init(st.nets.s.params());
  st.rng = Rng(cfg.seed + 0x5eed);
  st.step = 0;
  st.cursor = 0;
  return st;
}

LossRecord train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg) {
  if (!batch.s_tgt.defined() || !batch.c_tgt.defined())
    throw std::invalid_argument("train_step: batch has no sampled targets");
  int64_t step = state.step + 1;
  LossRecord rec;
  rec.step = step;

  models::GeneratorNet& G = state.nets.g;
  models::DiscriminatorNet& D = state.nets.d;
  models::SegmentorNet& S = state.nets.s;

  // (1) segmentor on real pairs, Eq. 8
  {
    ad::Var ls = losses::objective_S(losses::seg_loss_real(S, batch.x, batch.s));
    rec.terms["seg_real"] = ls.item();
    check_finite_loss("seg_real", ls.item(), step);
    ad::GradMap grads = ad::backward(ls);
    state.opt_s.step(S.params(), grads, "L_S", step);
  }

  // (2) discriminator on real + freshly generated detached fakes, Eq. 9
  if (!cfg.segmentor_only) {
    ad::Var fake;
    {
      ad::NoGradGuard ng;
      fake = G.forward(batch.x, batch.s_tgt, batch.c_tgt);
    }
    losses::DParts parts;
    if (cfg.weights.adv_mode == losses::AdvMode::GradientPenalty) {
      std::vector<double> u(static_cast<size_t>(batch.x.shape()[0]));
      for (double& ui : u) ui = state.rng.uniform01();
      losses::GpTerms gp = losses::adv_loss_gp(D, batch.x, fake, u);
      parts.critic_gap = gp.critic_gap;
      parts.gp_penalty = gp.penalty;
      rec.terms["adv"] = gp.critic_gap.item();
      rec.terms["gp"] = gp.penalty.item();
      check_finite_loss("adv", rec.terms["adv"], step);
      check_finite_loss("gp", rec.terms["gp"], step);
    } else {
      parts.adv_logform = losses::adv_loss_logform(D, batch.x, fake);
      rec.terms["adv"] = parts.adv_logform.item();
      check_finite_loss("adv", rec.terms["adv"], step);
    }
    if (cfg.classifier_enabled) {
      parts.cls_real = losses::cls_loss_real(D, batch.x, batch.c);
      rec.terms["cls_real"] = parts.cls_real.item();
      check_finite_loss("cls_real", rec.terms["cls_real"], step);
    }
    ad::Var ld = losses::objective_D(cfg.weights, parts);
    rec.terms["loss_d"] = ld.item();
    check_finite_loss("loss_d", rec.terms["loss_d"], step);
    ad::GradMap grads = ad::backward(ld);
    state.opt_d.step(D.params(), grads, "L_D", step);
  }

  // (3) generator every n_critic steps, Eq. 10
  if (!cfg.segmentor_only && step % cfg.n_critic == 0) {
    nn::FreezeGuard freeze_d(D.params());
    nn::FreezeGuard freeze_s(S.params());
    ad::Var fake = G.forward(batch.x, batch.s_tgt, batch.c_tgt);
    losses::GParts parts;
    models::DiscOut dout = D.forward(fake);
    if (cfg.weights.adv_mode == losses::AdvMode::GradientPenalty) {
      parts.adv_term =
          ad::neg(ad::mean_all(models::DiscriminatorNet::adv_scalar(dout.adv_map)));
    } else {
      ad::Var p_fake = ad::sigmoid_(models::DiscriminatorNet::adv_scalar(dout.adv_map));
      parts.adv_term =
          ad::mean_all(ad::log_(ad::clamp_min(ad::affine(p_fake, -1.0, 1.0), losses::kLogEps)));
    }
    rec.terms["adv_g"] = parts.adv_term.item();
    check_finite_loss("adv_g", rec.terms["adv_g"], step);
    if (cfg.classifier_enabled) {
      ad::Var probs = ad::sigmoid_(dout.cls_logits);
      parts.cls_fake = ad::mean_all(losses::bce_per_sample(batch.c_tgt, probs));
      rec.terms["cls_fake"] = parts.cls_fake.item();
      check_finite_loss("cls_fake", rec.terms["cls_fake"], step);
    }
    parts.seg_fake = losses::seg_loss_fake_on(S, fake, batch.s_tgt);
    rec.terms["seg_fake"] = parts.seg_fake.item();
    check_finite_loss("seg_fake", rec.terms["seg_fake"], step);
    parts.rec = losses::rec_loss_on(G, fake, batch.x, batch.s, batch.c);
    rec.terms["rec"] = parts.rec.item();
    check_finite_loss("rec", rec.terms["rec"], step);
    ad::Var lg = losses::objective_G(cfg.weights, parts, cfg.lambda2_scale());
    rec.terms["loss_g"] = lg.item();
    check_finite_loss("loss_g", rec.terms["loss_g"], step);
    ad::GradMap grads = ad::backward(lg);
    state.opt_g.step(G.params(), grads, "L_G", step);
  }

  state.step = step;
  return rec;
}

// ------------------------------------------------------------ checkpoints

void save_checkpoint(const std::string& dir, const TrainState& state, const TrainConfig& cfg) {
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "config.txt");
    if (!f) throw std::runtime_error("cannot write checkpoint config: " + dir);
    f << cfg.serialize();
  }
  models::save_param_archive((fs::path(dir) / "generator.bin").string(), state.nets.g.params());
  models::save_param_archive((fs::path(dir) / "discriminator.bin").string(),
                             state.nets.d.params());
  models::save_param_archive((fs::path(dir) / "segmentor.bin").string(), state.nets.s.params());
  state.opt_g.save((fs::path(dir) / "adam_g.bin").string());
  state.opt_d.save((fs::path(dir) / "adam_d.bin").string());
  state.opt_s.save((fs::path(dir) / "adam_s.bin").string());
  {
    std::ofstream f(fs::path(dir) / "rng.txt");
    f << state.rng.save_state() << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / "data_state.txt");
    f << "step " << state.step << "\n";
    f << "cursor " << state.cursor << "\n";
    f << "perm";
    for (int i : state.epoch_perm) f << " " << i;
    f << "\n";
  }
}

void load_checkpoint(const std::string& dir, TrainState& state, const TrainConfig& expect) {
  std::ifstream cf(fs::path(dir) / "config.txt");
  if (!cf) throw std::runtime_error("checkpoint has no config snapshot: " + dir);
  std::ostringstream os;
  os << cf.rdbuf();
  TrainConfig saved = TrainConfig::parse(os.str());
  if (!(saved.arch == expect.arch))
    throw std::runtime_error("checkpoint ArchConfig mismatch: " + dir +
                             " was trained with a different architecture");
  models::load_param_archive((fs::path(dir) / "generator.bin").string(), state.nets.g.params());
  models::load_param_archive((fs::path(dir) / "discriminator.bin").string(),
                             state.nets.d.params());
  models::load_param_archive((fs::path(dir) / "segmentor.bin").string(), state.nets.s.params());
  state.opt_g.load((fs::path(dir) / "adam_g.bin").string(), state.nets.g.params());
  state.opt_d.load((fs::path(dir) / "adam_d.bin").string(), state.nets.d.params());
  state.opt_s.load((fs::path(dir) / "adam_s.bin").string(), state.nets.s.params());
  {
    std::ifstream f(fs::path(dir) / "rng.txt");
    if (!f) throw std::runtime_error("checkpoint missing rng state: " + dir);
    std::string s;
    std::getline(f, s);
    state.rng.load_state(s);
  }
  {
    std::ifstream f(fs::path(dir) / "data_state.txt");
    if (!f) throw std::runtime_error("checkpoint missing data state: " + dir);
    std::string key;
    state.epoch_perm.clear();
    while (f >> key) {
      if (key == "step") f >> state.step;
      else if (key == "cursor") f >> state.cursor;
      else if (key == "perm") {
        int v;
        while (f >> v) state.epoch_perm.push_back(v);
      }
    }
  }
}

std::pair<TrainConfig, models::Networks> load_checkpoint_for_inference(const std::string& dir) {
  std::ifstream cf(fs::path(dir) / "config.txt");
  if (!cf) throw std::runtime_error("checkpoint has no config snapshot: " + dir);
  std::ostringstream os;
  os << cf.rdbuf();
  TrainConfig cfg = TrainConfig::parse(os.str());
  models::Networks nets = models::build_networks(cfg.arch, cfg.seed);
  models::load_param_archive((fs::path(dir) / "generator.bin").string(), nets.g.params());
  models::load_param_archive((fs::path(dir) / "discriminator.bin").string(), nets.d.params());
  models::load_param_archive((fs::path(dir) / "segmentor.bin").string(), nets.s.params());
  return {std::move(cfg), std::move(nets)};
}

// ------------------------------------------------------------ history

void append_history(const std::string& csv_path, const std::vector<LossRecord>& records,
                    bool write_header) {
  std::ofstream f(csv_path, write_header ? std::ios::trunc : std::ios::app);
  if (!f) throw std::runtime_error("cannot write loss history: " + csv_path);
  if (write_header) f << "step,term,value\n";
  for (const LossRecord& r : records)
    for (const auto& [term, value] : r.terms)
      f << r.step << "," << term << "," << fmt_double(value) << "\n";
}

// ------------------------------------------------------------ train loop

TrainState train(const TrainConfig& cfg, const data::SampleSet& dataset,
                 const std::string& out_dir, const std::string& resume_from) {
  cfg.validate();
  if (dataset.size() < cfg.batch_size)
    throw std::invalid_argument("train: dataset smaller than one batch");
  if (dataset.image_size != cfg.arch.image_size || dataset.n_s != cfg.arch.n_s ||
      dataset.n_c != cfg.arch.n_c)
    throw std::invalid_argument("train: dataset geometry does not match ArchConfig");

  fs::create_directories(out_dir);
  std::string csv = (fs::path(out_dir) / "history.csv").string();

  TrainState state = init_state(cfg);
  bool fresh = resume_from.empty();
  if (!fresh) {
    load_checkpoint(resume_from, state, cfg);
  } else {
    save_checkpoint((fs::path(out_dir) / "step-0").string(), state, cfg);
    append_history(csv, {}, /*write_header=*/true);
  }

  if (cfg.lambda2_scale() != 1.0)
    std::fprintf(stderr,
                 "[train] lambda2 rescale: base %g x scale %g -> effective %g (image_size %d)\n",
                 cfg.weights.lambda2, cfg.lambda2_scale(),
                 cfg.weights.lambda2 * cfg.lambda2_scale(), cfg.arch.image_size);

  std::vector<LossRecord> pending;
  while (state.step < cfg.total_steps) {
    // epoch boundary: reshuffle; a trailing partial batch is dropped
    if (state.cursor + static_cast<size_t>(cfg.batch_size) >
        static_cast<size_t>(dataset.size()) ||
        state.epoch_perm.empty()) {
      state.epoch_perm = state.rng.permutation(dataset.size());
      state.cursor = 0;
    }
    std::vector<int> idx(state.epoch_perm.begin() + static_cast<int64_t>(state.cursor),
                         state.epoch_perm.begin() + static_cast<int64_t>(state.cursor) +
                             cfg.batch_size);
    state.cursor += static_cast<size_t>(cfg.batch_size);

    Batch batch = pack_batch(dataset, idx);
    sample_targets(batch, state.rng, cfg.joint_target_shuffle);
    LossRecord rec = train_step(state, batch, cfg);

    if (state.step % cfg.log_every == 0) pending.push_back(rec);
    if (pending.size() >= 64) {
      append_history(csv, pending, false);
      pending.clear();
    }
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
      save_checkpoint((fs::path(out_dir) / ("step-" + std::to_string(state.step))).string(),
                      state, cfg);
  }
  append_history(csv, pending, false);
  save_checkpoint((fs::path(out_dir) / ("step-" + std::to_string(state.step))).string(), state,
                  cfg);
  return state;
}

// ------------------------------------------------------------ evaluate

Metrics evaluate(const TrainState& state, const data::SampleSet& val, uint64_t seed,
                 bool classifier_enabled) {
  if (val.size() == 0) throw std::invalid_argument("evaluate: empty validation set");
  ad::NoGradGuard ng;
  Rng rng(seed);
  int n = val.size();
  std::vector<int> donor_s = rng.permutation(n);
  std::vector<int> donor_c = rng.permutation(n);

  const models::GeneratorNet& G = state.nets.g;
  const models::DiscriminatorNet& D = state.nets.d;
  const models::SegmentorNet& S = state.nets.s;
  int sz = val.image_size;

  int64_t seg_correct = 0, seg_total = 0;
  int64_t fake_correct = 0, fake_total = 0;
  int64_t attr_correct = 0, attr_total = 0;
  double mae_sum = 0;

  const int chunk = 16;
  for (int base = 0; base < n; base += chunk) {
    int m = std::min(chunk, n - base);
    std::vector<int> idx(static_cast<size_t>(m));
    std::vector<int> sidx(static_cast<size_t>(m)), cidx(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      idx[static_cast<size_t>(i)] = base + i;
      sidx[static_cast<size_t>(i)] = donor_s[static_cast<size_t>(base + i)];
      cidx[static_cast<size_t>(i)] = donor_c[static_cast<size_t>(base + i)];
    }
    Batch b = pack_batch(val, idx);
    Batch bs = pack_batch(val, sidx);
    Batch bc = pack_batch(val, cidx);
    b.s_tgt = bs.s;
    b.c_tgt = bc.c;

    // segmentor accuracy on real images
    ad::Var sx_var = S.forward(b.x);
    const Tensor& sx = sx_var.val();
    for (int i = 0; i < m; ++i) {
      const data::PackedSample& p = val.samples[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      for (int q = 0; q < sz * sz; ++q) {
        int best = 0;
        double bv = sx[(static_cast<int64_t>(i) * val.n_s + 0) * sz * sz + q];
        for (int cc = 1; cc < val.n_s; ++cc) {
          double vv = sx[(static_cast<int64_t>(i) * val.n_s + cc) * sz * sz + q];
          if (vv > bv) {
            bv = vv;
            best = cc;
          }
        }
        if (best == p.labels[static_cast<size_t>(q)]) seg_correct++;
        seg_total++;
      }
    }

    // fake paths
    ad::Var fake = G.forward(b.x, b.s_tgt, b.c_tgt);
    ad::Var sf_var = S.forward(fake);
    const Tensor& sf = sf_var.val();
    const Tensor& st = b.s_tgt.val();
    for (int i = 0; i < m; ++i)
      for (int q = 0; q < sz * sz; ++q) {
        int best_p = 0, best_t = 0;
        double bp = sf[(static_cast<int64_t>(i) * val.n_s) * sz * sz + q];
        double bt = st[(static_cast<int64_t>(i) * val.n_s) * sz * sz + q];
        for (int cc = 1; cc < val.n_s; ++cc) {
          double vp = sf[(static_cast<int64_t>(i) * val.n_s + cc) * sz * sz + q];
          double vt = st[(static_cast<int64_t>(i) * val.n_s + cc) * sz * sz + q];
          if (vp > bp) {
            bp = vp;
            best_p = cc;
          }
          if (vt > bt) {
            bt = vt;
            best_t = cc;
          }
        }
        if (best_p == best_t) fake_correct++;
        fake_total++;
      }

    if (classifier_enabled) {
      ad::Var logits_var = D.forward(fake).cls_logits;
      const Tensor& logits = logits_var.val();
      const Tensor& ct = b.c_tgt.val();
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < val.n_c; ++k) {
          double p = 1.0 / (1.0 + std::exp(-logits[static_cast<int64_t>(i) * val.n_c + k]));
          int pred = p >= 0.5 ? 1 : 0;
          int want = ct[static_cast<int64_t>(i) * val.n_c + k] >= 0.5 ? 1 : 0;
          if (pred == want) attr_correct++;
          attr_total++;
        }
    }

    ad::Var recon = G.forward(fake, b.s, b.c);
    const Tensor& rx = recon.val();
    const Tensor& xx = b.x.val();
    for (int64_t j = 0; j < rx.numel(); ++j) mae_sum += std::fabs(rx[j] - xx[j]);
  }

  Metrics out;
  out.seg_pixel_acc = static_cast<double>(seg_correct) / static_cast<double>(seg_total);
  out.fake_seg_agreement = static_cast<double>(fake_correct) / static_cast<double>(fake_total);
  out.attr_agreement =
      attr_total > 0 ? static_cast<double>(attr_correct) / static_cast<double>(attr_total) : 0.0;
  out.cycle_mae = mae_sum / (static_cast<double>(n) * 3.0 * sz * sz);
  return out;
}

}  // namespace sggan::training
