#include "sggan/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sggan::models {

void ArchConfig::validate() const {
  if (image_size <= 0 || image_size % 4 != 0)
    throw std::invalid_argument("ArchConfig: image_size must be positive and divisible by 4");
  if (n_s < 1) throw std::invalid_argument("ArchConfig: n_s must be >= 1");
  if (n_c < 1) throw std::invalid_argument("ArchConfig: n_c must be >= 1");
  if (base_width < 1) throw std::invalid_argument("ArchConfig: base_width must be >= 1");
  if (g_resblocks < 0 || s_resblocks < 0)
    throw std::invalid_argument("ArchConfig: resblock counts must be >= 0");
  if (d_layers < 1) throw std::invalid_argument("ArchConfig: d_layers must be >= 1");
  if ((image_size >> d_layers) < 2)
    throw std::invalid_argument(
        "ArchConfig: image_size / 2^d_layers must be >= 2 (got " +
        std::to_string(image_size >> d_layers) + "); the discriminator heads need a 2x2 map");
}

// ------------------------------------------------------------ Generator

GeneratorNet::GeneratorNet(const ArchConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  int b = cfg.base_width;
  int depth = input_depth();

  enc0_ = {depth, b, 7, 1, 3};
  enc0_.build(reg_, "g.enc0", rng);
  in0_.c = b;
  in0_.build(reg_, "g.enc0.in", rng);
  enc1_ = {b, 2 * b, 4, 2, 1};
  enc1_.build(reg_, "g.enc1", rng);
  in1_.c = 2 * b;
  in1_.build(reg_, "g.enc1.in", rng);
  enc2_ = {2 * b, 4 * b, 4, 2, 1};
  enc2_.build(reg_, "g.enc2", rng);
  in2_.c = 4 * b;
  in2_.build(reg_, "g.enc2.in", rng);

  res_.resize(static_cast<size_t>(cfg.g_resblocks));
  for (int i = 0; i < cfg.g_resblocks; ++i)
    res_[static_cast<size_t>(i)].build(reg_, "g.res" + std::to_string(i), 4 * b, rng);

  dec0_ = {4 * b, 2 * b, 4, 2, 1};
  dec0_.build(reg_, "g.dec0", rng);
  din0_.c = 2 * b;
  din0_.build(reg_, "g.dec0.in", rng);
  dec1_ = {2 * b, b, 4, 2, 1};
  dec1_.build(reg_, "g.dec1", rng);
  din1_.c = b;
  din1_.build(reg_, "g.dec1.in", rng);

  head_ = {b, 3, 7, 1, 3};
  head_.build(reg_, "g.head", rng);
}

ad::Var GeneratorNet::forward(const ad::Var& x_cat) const {
  const Shape& s = x_cat.shape();
  if (s.rank() != 4 || s[1] != input_depth())
    throw std::invalid_argument("GeneratorNet: expected input depth " +
                                std::to_string(input_depth()) + ", got " + s.str());
  ad::Var h = ad::relu(in0_(enc0_(x_cat)));
  h = ad::relu(in1_(enc1_(h)));
  h = ad::relu(in2_(enc2_(h)));
  for (const auto& blk : res_) h = blk(h);
  h = ad::relu(din0_(dec0_(h)));
  h = ad::relu(din1_(dec1_(h)));
  return ad::tanh_(head_(h));
}

ad::Var GeneratorNet::forward(const ad::Var& image, const ad::Var& target_seg,
                              const ad::Var& target_attr) const {
  const Shape& s = image.shape();
  ad::Var attr_planes = ad::bcast_hw(target_attr, s[2], s[3]);
  return forward(ad::concat_c({image, target_seg, attr_planes}));
}

// ------------------------------------------------------------ Discriminator

DiscriminatorNet::DiscriminatorNet(const ArchConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  int in_c = 3;
  for (int i = 0; i < cfg.d_layers; ++i) {
    int out_c = cfg.base_width << i;
    nn::Conv2d conv{in_c, out_c, 4, 2, 1};
    conv.build(reg_, "d.layer" + std::to_string(i), rng);
    convs_.push_back(conv);
    nn::InstanceNorm2d norm;
    norm.c = out_c;
    norm.build(reg_, "d.layer" + std::to_string(i) + ".in", rng);
    norms_.push_back(norm);
    in_c = out_c;
  }
  adv_head_ = {in_c, 1, 3, 1, 1};
  adv_head_.build(reg_, "d.adv", rng);
  cls_head_ = {in_c, cfg.n_c, 2, 1, 0};
  cls_head_.build(reg_, "d.cls", rng);
}

DiscOut DiscriminatorNet::forward(const ad::Var& image) const {
  const Shape& s = image.shape();
  if (s.rank() != 4 || s[1] != 3 || s[2] != cfg_.image_size || s[3] != cfg_.image_size)
    throw std::invalid_argument("DiscriminatorNet: expected [N,3," +
                                std::to_string(cfg_.image_size) + "," +
                                std::to_string(cfg_.image_size) + "], got " + s.str());
  ad::Var h = image;
  for (size_t i = 0; i < convs_.size(); ++i)
    h = ad::leaky_relu(norms_[i](convs_[i](h)), 0.01);
  DiscOut out;
  out.adv_map = adv_head_(h);
  ad::Var cls = cls_head_(h);  // [N,n_c,f-1,f-1]
  const Shape& cs = cls.shape();
  double inv = 1.0 / static_cast<double>(cs[2] * cs[3]);
  out.cls_logits = ad::affine(ad::sum_hw(cls), inv, 0.0);  // [N,n_c]
  return out;
}

ad::Var DiscriminatorNet::adv_scalar(const ad::Var& adv_map) {
  const Shape& s = adv_map.shape();
  double inv = 1.0 / static_cast<double>(s[1] * s[2] * s[3]);
  return ad::affine(ad::sum_samplewise(adv_map), inv, 0.0);
}

// ------------------------------------------------------------ Segmentor

SegmentorNet::SegmentorNet(const ArchConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  int b = cfg.base_width;
  enc0_ = {3, b, 7, 1, 3};
  enc0_.build(reg_, "s.enc0", rng);
  in0_.c = b;
  in0_.build(reg_, "s.enc0.in", rng);
  enc1_ = {b, 2 * b, 4, 2, 1};
  enc1_.build(reg_, "s.enc1", rng);
  in1_.c = 2 * b;
  in1_.build(reg_, "s.enc1.in", rng);
  enc2_ = {2 * b, 4 * b, 4, 2, 1};
  enc2_.build(reg_, "s.enc2", rng);
  in2_.c = 4 * b;
  in2_.build(reg_, "s.enc2.in", rng);

  res_.resize(static_cast<size_t>(cfg.s_resblocks));
  for (int i = 0; i < cfg.s_resblocks; ++i)
    res_[static_cast<size_t>(i)].build(reg_, "s.res" + std::to_string(i), 4 * b, rng);

  dec0_ = {4 * b, 2 * b, 4, 2, 1};
  dec0_.build(reg_, "s.dec0", rng);
  din0_.c = 2 * b;
  din0_.build(reg_, "s.dec0.in", rng);
  dec1_ = {2 * b, b, 4, 2, 1};
  dec1_.build(reg_, "s.dec1", rng);
  din1_.c = b;
  din1_.build(reg_, "s.dec1.in", rng);

  head_ = {b, cfg.n_s, 7, 1, 3};
  head_.build(reg_, "s.head", rng);
}

ad::Var SegmentorNet::forward(const ad::Var& image) const {
  const Shape& s = image.shape();
  if (s.rank() != 4 || s[1] != 3)
    throw std::invalid_argument("SegmentorNet: expected [N,3,H,W], got " + s.str());
  ad::Var h = ad::relu(in0_(enc0_(image)));
  h = ad::relu(in1_(enc1_(h)));
  h = ad::relu(in2_(enc2_(h)));
  for (const auto& blk : res_) h = blk(h);
  h = ad::relu(din0_(dec0_(h)));
  h = ad::relu(din1_(dec1_(h)));
  return nn::softmax_c(head_(h));
}

// ------------------------------------------------------------ builder

Networks build_networks(const ArchConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Networks nets;
  nets.g = GeneratorNet(cfg, rng);
  nets.d = DiscriminatorNet(cfg, rng);
  nets.s = SegmentorNet(cfg, rng);
  return nets;
}

namespace {
void ledger_section(std::ostringstream& os, const char* title,
                    const std::vector<nn::Param>& params) {
  int64_t total = 0;
  for (const auto& p : params) {
    os << p.name << " " << p.var.shape().str() << " " << p.var.val().numel() << "\n";
    total += p.var.val().numel();
  }
  os << title << ".total " << total << "\n";
}
}  // namespace

std::string arch_ledger(const Networks& nets) {
  std::ostringstream os;
  ledger_section(os, "generator", nets.g.params());
  ledger_section(os, "discriminator", nets.d.params());
  ledger_section(os, "segmentor", nets.s.params());
  return os.str();
}

// ------------------------------------------------------------ param archive

namespace {
constexpr char kMagic[8] = {'S', 'G', 'P', 'A', 'R', 'V', '0', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_param_archive(const std::string& path, const std::vector<nn::Param>& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write(kMagic, sizeof(kMagic));
  put(f, static_cast<uint64_t>(params.size()));
  for (const auto& p : params) {
    put(f, static_cast<uint32_t>(p.name.size()));
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& s = p.var.shape();
    put(f, static_cast<uint32_t>(s.rank()));
    for (int i = 0; i < s.rank(); ++i) put(f, static_cast<int64_t>(s[i]));
    f.write(reinterpret_cast<const char*>(p.var.val().data()),
            static_cast<std::streamsize>(sizeof(double) * p.var.val().numel()));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

void load_param_archive(const std::string& path, std::vector<nn::Param>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a parameter archive: " + path);
  uint64_t count = 0;
  get(f, count);
  if (count != params.size())
    throw std::runtime_error(path + ": parameter count mismatch (archive " +
                             std::to_string(count) + ", network " +
                             std::to_string(params.size()) + ")");
  for (auto& p : params) {
    uint32_t nlen = 0;
    get(f, nlen);
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    if (name != p.name)
      throw std::runtime_error(path + ": parameter name mismatch (archive '" + name +
                               "', network '" + p.name + "')");
    uint32_t rank = 0;
    get(f, rank);
    if (rank != static_cast<uint32_t>(p.var.shape().rank()))
      throw std::runtime_error(path + ": rank mismatch for " + name);
    for (uint32_t i = 0; i < rank; ++i) {
      int64_t d = 0;
      get(f, d);
      if (d != p.var.shape()[static_cast<int>(i)])
        throw std::runtime_error(path + ": shape mismatch for " + name);
    }
    f.read(reinterpret_cast<char*>(p.var.node->value.data()),
           static_cast<std::streamsize>(sizeof(double) * p.var.val().numel()));
  }
  if (!f) throw std::runtime_error("truncated parameter archive: " + path);
}

// ------------------------------------------------------------ wrappers

Tensor pack_image(const core::ImageTensor& img) {
  Tensor t(Shape{1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t[(static_cast<int64_t>(c) * img.height + y) * img.width + x] = img.at(y, x, c);
  return t;
}

Tensor pack_seg(const core::SegmentationMap& seg) {
  Tensor t(Shape{1, seg.classes, seg.height, seg.width});
  for (int c = 0; c < seg.classes; ++c)
    for (int y = 0; y < seg.height; ++y)
      for (int x = 0; x < seg.width; ++x)
        t[(static_cast<int64_t>(c) * seg.height + y) * seg.width + x] = seg.at(y, x, c);
  return t;
}

core::ImageTensor unpack_image(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.rank() != 4 || s[0] != 1 || s[1] != 3)
    throw std::invalid_argument("unpack_image: expected [1,3,H,W]");
  core::ImageTensor img(static_cast<int>(s[2]), static_cast<int>(s[3]));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double v = t[(static_cast<int64_t>(c) * img.height + y) * img.width + x];
        img.at(y, x, c) = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
      }
  return img;
}

core::SegmentationMap unpack_seg_soft(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.rank() != 4 || s[0] != 1)
    throw std::invalid_argument("unpack_seg_soft: expected [1,C,H,W]");
  core::SegmentationMap seg(static_cast<int>(s[2]), static_cast<int>(s[3]),
                            static_cast<int>(s[1]), core::SegKind::Soft);
  for (int c = 0; c < seg.classes; ++c)
    for (int y = 0; y < seg.height; ++y)
      for (int x = 0; x < seg.width; ++x)
        seg.at(y, x, c) = t[(static_cast<int64_t>(c) * seg.height + y) * seg.width + x];
  return seg;
}

core::ImageTensor generator_forward(const GeneratorNet& net, const core::ImageTensor& image,
                                    const core::SegmentationMap& target_seg,
                                    const core::AttributeVector& target_attr) {
  if (image.height != target_seg.height || image.width != target_seg.width)
    throw std::invalid_argument("generator_forward: image/segmentation size mismatch");
  if (target_seg.classes != net.config().n_s)
    throw std::invalid_argument("generator_forward: segmentation class count mismatch");
  if (target_attr.size() != net.config().n_c)
    throw std::invalid_argument("generator_forward: attribute length mismatch");
  ad::NoGradGuard ng;
  ad::Var x = ad::Var::constant(pack_image(image));
  ad::Var s = ad::Var::constant(pack_seg(target_seg));
  Tensor attr(Shape{1, net.config().n_c});
  for (int i = 0; i < target_attr.size(); ++i) attr[i] = target_attr.values[static_cast<size_t>(i)];
  ad::Var c = ad::Var::constant(std::move(attr));
  return unpack_image(net.forward(x, s, c).val());
}

DiscForwardResult discriminator_forward(const DiscriminatorNet& net,
                                        const core::ImageTensor& image) {
  if (image.height != net.config().image_size || image.width != net.config().image_size)
    throw std::invalid_argument("discriminator_forward: image size mismatch");
  ad::NoGradGuard ng;
  DiscOut out = net.forward(ad::Var::constant(pack_image(image)));
  DiscForwardResult r;
  const Shape& ms = out.adv_map.shape();
  r.extent = static_cast<int>(ms[2]);
  const Tensor& m = out.adv_map.val();
  r.adv_map.assign(m.data(), m.data() + m.numel());
  double sum = 0;
  for (double v : r.adv_map) sum += v;
  r.adv_scalar = sum / static_cast<double>(r.adv_map.size());
  const Tensor& logits = out.cls_logits.val();
  r.attr_logits.assign(logits.data(), logits.data() + logits.numel());
  for (double v : r.attr_logits) r.attr_probs.push_back(1.0 / (1.0 + std::exp(-v)));
  return r;
}

core::SegmentationMap segmentor_forward(const SegmentorNet& net,
                                        const core::ImageTensor& image) {
  ad::NoGradGuard ng;
  ad::Var y = net.forward(ad::Var::constant(pack_image(image)));
  return unpack_seg_soft(y.val());
}

}  // namespace sggan::models
