#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "sggan/models.hpp"
#include "sggan/segmap.hpp"
#include "test_util.hpp"

using namespace sggan;
using models::ArchConfig;

namespace {

ArchConfig tiny_config() {
  ArchConfig cfg;
  cfg.image_size = 8;
  cfg.n_s = 3;
  cfg.n_c = 2;
  cfg.base_width = 4;
  cfg.g_resblocks = 1;
  cfg.s_resblocks = 1;
  cfg.d_layers = 2;
  return cfg;
}

ad::Var random_image_batch(int n, int size, Rng& rng) {
  return ad::Var::constant(testutil::random_tensor(Shape{n, 3, size, size}, rng));
}

}  // namespace

TEST_CASE("paper config reproduces the documented widths") {
  ArchConfig cfg;  // defaults are the paper values
  CHECK(cfg.base_width * 4 == 256);        // generator bottleneck
  CHECK(cfg.disc_final_width() == 2048);   // last discriminator conv
  CHECK(cfg.disc_final_extent() == 2);     // 128 / 2^6

  models::Networks nets = models::build_networks(cfg, 1);
  bool saw_bottleneck = false, saw_final = false;
  for (const auto& p : nets.g.params())
    if (p.name == "g.res0.c1.w") {
      CHECK(p.var.shape() == Shape{256, 256, 3, 3});
      saw_bottleneck = true;
    }
  for (const auto& p : nets.d.params())
    if (p.name == "d.layer5.w") {
      CHECK(p.var.shape() == Shape{2048, 1024, 4, 4});
      saw_final = true;
    }
  CHECK(saw_bottleneck);
  CHECK(saw_final);

  // generator input depth 3 + n_s + n_c
  for (const auto& p : nets.g.params())
    if (p.name == "g.enc0.w") CHECK(p.var.shape() == Shape{64, 3 + 5 + 5, 7, 7});
  // heads per Table 1
  for (const auto& p : nets.d.params()) {
    if (p.name == "d.adv.w") CHECK(p.var.shape() == Shape{1, 2048, 3, 3});
    if (p.name == "d.cls.w") CHECK(p.var.shape() == Shape{5, 2048, 2, 2});
  }
  for (const auto& p : nets.s.params())
    if (p.name == "s.head.w") CHECK(p.var.shape() == Shape{5, 64, 7, 7});
}

TEST_CASE("invalid configs are rejected with the violated constraint named") {
  ArchConfig cfg = tiny_config();
  cfg.image_size = 32;
  cfg.d_layers = 6;  // 32/64 < 2
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("2^d_layers"), std::invalid_argument);
  cfg = tiny_config();
  cfg.image_size = 30;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("divisible by 4"),
                       std::invalid_argument);
  cfg = tiny_config();
  cfg.base_width = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("build_networks is deterministic in the seed") {
  ArchConfig cfg = tiny_config();
  models::Networks a = models::build_networks(cfg, 99);
  models::Networks b = models::build_networks(cfg, 99);
  models::Networks c = models::build_networks(cfg, 100);
  REQUIRE(a.g.params().size() == b.g.params().size());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < a.g.params().size(); ++i) {
    const Tensor& ta = a.g.params()[i].var.val();
    const Tensor& tb = b.g.params()[i].var.val();
    const Tensor& tc = c.g.params()[i].var.val();
    for (int64_t j = 0; j < ta.numel(); ++j) {
      if (ta[j] != tb[j]) all_equal = false;
      if (ta[j] != tc[j]) any_diff_seed = true;
    }
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("generator forward keeps shape, range and determinism") {
  Rng rng(5);
  ArchConfig cfg = tiny_config();
  models::Networks nets = models::build_networks(cfg, 5);
  ad::Var x = random_image_batch(2, 8, rng);
  ad::Var s = ad::Var::constant(testutil::random_tensor(Shape{2, 3, 8, 8}, rng, 0, 1));
  ad::Var c = ad::Var::constant(testutil::random_tensor(Shape{2, 2}, rng, 0, 1));
  ad::NoGradGuard ng;
  ad::Var y1 = nets.g.forward(x, s, c);
  ad::Var y2 = nets.g.forward(x, s, c);
  CHECK(y1.shape() == Shape{2, 3, 8, 8});
  bool in_range = true, identical = true;
  for (int64_t i = 0; i < y1.val().numel(); ++i) {
    if (!(y1.val()[i] > -1.0 && y1.val()[i] < 1.0)) in_range = false;
    if (y1.val()[i] != y2.val()[i]) identical = false;
  }
  CHECK(in_range);
  CHECK(identical);
  CHECK(nets.g.input_depth() == 3 + cfg.n_s + cfg.n_c);

  // wrong input depth rejected
  CHECK_THROWS(nets.g.forward(ad::Var::constant(testutil::random_tensor(Shape{2, 5, 8, 8}, rng))));
}

TEST_CASE("discriminator adv map extent and classifier length") {
  Rng rng(6);
  ArchConfig cfg = tiny_config();
  cfg.image_size = 32;
  cfg.d_layers = 4;
  models::Networks nets = models::build_networks(cfg, 6);
  ad::NoGradGuard ng;
  models::DiscOut out = nets.d.forward(random_image_batch(2, 32, rng));
  CHECK(out.adv_map.shape() == Shape{2, 1, 2, 2});  // 32 / 2^4 = 2
  CHECK(out.cls_logits.shape() == Shape{2, 2});
  ad::Var da = models::DiscriminatorNet::adv_scalar(out.adv_map);
  CHECK(da.shape() == Shape{2});
  // mean of the map matches the scalar definition
  double m = 0;
  for (int i = 0; i < 4; ++i) m += out.adv_map.val()[i];
  CHECK(da.val()[0] == doctest::Approx(m / 4.0));
}

TEST_CASE("segmentor output is a per-pixel simplex of input size") {
  Rng rng(7);
  ArchConfig cfg = tiny_config();
  models::Networks nets = models::build_networks(cfg, 7);
  ad::NoGradGuard ng;
  ad::Var y = nets.s.forward(random_image_batch(2, 8, rng));
  CHECK(y.shape() == Shape{2, 3, 8, 8});
  for (int n = 0; n < 2; ++n)
    for (int q = 0; q < 64; ++q) {
      double sum = 0;
      for (int c = 0; c < 3; ++c) {
        double v = y.val()[(static_cast<int64_t>(n) * 3 + c) * 64 + q];
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-5);
    }

  // n_s = 1 degenerates to all-ones
  ArchConfig one = tiny_config();
  one.n_s = 1;
  models::Networks nets1 = models::build_networks(one, 8);
  ad::Var y1 = nets1.s.forward(random_image_batch(1, 8, rng));
  for (int64_t i = 0; i < y1.val().numel(); ++i) CHECK(y1.val()[i] == doctest::Approx(1.0));
}

TEST_CASE("generator and segmentor preserve spatial size over random configs") {
  Rng rng(9);
  for (int iter = 0; iter < 10; ++iter) {
    ArchConfig cfg;
    cfg.image_size = 4 * (2 + static_cast<int>(rng.randint(6)));  // 8..28
    cfg.image_size = cfg.image_size < 8 ? 8 : cfg.image_size;
    cfg.n_s = 1 + static_cast<int>(rng.randint(5));
    cfg.n_c = 1 + static_cast<int>(rng.randint(4));
    cfg.base_width = 2 + static_cast<int>(rng.randint(3));
    cfg.g_resblocks = static_cast<int>(rng.randint(3));
    cfg.s_resblocks = static_cast<int>(rng.randint(3));
    cfg.d_layers = 2;
    if (cfg.image_size % 4 != 0 || (cfg.image_size >> cfg.d_layers) < 2) continue;
    models::Networks nets = models::build_networks(cfg, 10 + static_cast<uint64_t>(iter));
    ad::NoGradGuard ng;
    ad::Var x = random_image_batch(1, cfg.image_size, rng);
    ad::Var s =
        ad::Var::constant(testutil::random_tensor(Shape{1, cfg.n_s, cfg.image_size,
                                                        cfg.image_size}, rng, 0, 1));
    ad::Var c = ad::Var::constant(testutil::random_tensor(Shape{1, cfg.n_c}, rng, 0, 1));
    CHECK(nets.g.forward(x, s, c).shape() == Shape{1, 3, cfg.image_size, cfg.image_size});
    CHECK(nets.s.forward(x).shape() == Shape{1, cfg.n_s, cfg.image_size, cfg.image_size});
  }
}

TEST_CASE("network output gradients match finite differences on random slices") {
  Rng rng(11);
  ArchConfig cfg = tiny_config();
  models::Networks nets = models::build_networks(cfg, 11);
  Tensor xin = testutil::random_tensor(Shape{1, 3, 8, 8}, rng);
  Tensor sin = testutil::random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  Tensor cin = testutil::random_tensor(Shape{1, 2}, rng, 0, 1);
  Tensor wsum_g = testutil::random_tensor(Shape{1, 3, 8, 8}, rng);
  Tensor wsum_s = testutil::random_tensor(Shape{1, 3, 8, 8}, rng);
  Tensor wsum_d = testutil::random_tensor(Shape{1}, rng);

  auto g_loss = [&] {
    return ad::sum_all(ad::mask_mul(
        nets.g.forward(ad::Var::constant(xin), ad::Var::constant(sin), ad::Var::constant(cin)),
        wsum_g));
  };
  auto s_loss = [&] {
    return ad::sum_all(ad::mask_mul(nets.s.forward(ad::Var::constant(xin)), wsum_s));
  };
  auto d_loss = [&] {
    models::DiscOut out = nets.d.forward(ad::Var::constant(xin));
    return ad::add(ad::sum_all(models::DiscriminatorNet::adv_scalar(out.adv_map)),
                   ad::sum_all(out.cls_logits));
  };

  // a few random parameters from each network, full-tensor FD on small ones
  auto spot_check = [&](std::vector<nn::Param>& params, auto& loss, size_t count) {
    Rng pick(123);
    for (size_t iter = 0; iter < count; ++iter) {
      nn::Param& p = params[pick.randint(params.size())];
      int64_t j = static_cast<int64_t>(pick.randint(static_cast<uint64_t>(p.var.val().numel())));
      ad::Var l = loss();
      ad::GradMap grads = ad::backward(l);
      auto it = grads.find(p.var.node.get());
      double analytic = it == grads.end() ? 0.0 : it->second.val()[j];
      Tensor& data = p.var.node->value;
      double orig = data[j], h = 1e-5;
      data[j] = orig + h;
      double up = loss().item();
      data[j] = orig - h;
      double dn = loss().item();
      data[j] = orig;
      CHECK(testutil::rel_err(analytic, (up - dn) / (2 * h)) < 1e-6);
    }
  };
  spot_check(nets.g.params(), g_loss, 8);
  spot_check(nets.s.params(), s_loss, 8);
  spot_check(nets.d.params(), d_loss, 8);
}

TEST_CASE("checkpoint archive round-trips bit-exactly and rejects mismatches") {
  namespace fs = std::filesystem;
  ArchConfig cfg = tiny_config();
  models::Networks a = models::build_networks(cfg, 21);
  models::Networks b = models::build_networks(cfg, 22);

  std::string path = "/tmp/sggan_test_params.bin";
  models::save_param_archive(path, a.g.params());
  models::load_param_archive(path, b.g.params());
  for (size_t i = 0; i < a.g.params().size(); ++i) {
    const Tensor& ta = a.g.params()[i].var.val();
    const Tensor& tb = b.g.params()[i].var.val();
    for (int64_t j = 0; j < ta.numel(); ++j) CHECK(ta[j] == tb[j]);
  }

  // loading into a different architecture fails loudly
  ArchConfig other = tiny_config();
  other.base_width = 6;
  models::Networks c = models::build_networks(other, 23);
  CHECK_THROWS(models::load_param_archive(path, c.g.params()));
  fs::remove(path);
}

TEST_CASE("single-sample wrappers mirror the batched forward") {
  Rng rng(31);
  ArchConfig cfg = tiny_config();
  models::Networks nets = models::build_networks(cfg, 31);

  core::ImageTensor img(8, 8);
  for (double& v : img.data) v = rng.uniform(-1, 1);
  std::vector<int> labels(64);
  for (int& l : labels) l = static_cast<int>(rng.randint(3));
  core::SegmentationMap seg = segmap::labels_to_one_hot(labels, 8, 8, 3);
  core::AttributeVector attrs(core::AttrKind::Binary, {1.0, 0.0});

  core::ImageTensor out = models::generator_forward(nets.g, img, seg, attrs);
  CHECK(out.height == 8);
  CHECK(out.width == 8);
  for (double v : out.data) CHECK((v > -1.0 && v < 1.0));

  core::SegmentationMap soft = models::segmentor_forward(nets.s, img);
  CHECK(soft.kind == core::SegKind::Soft);
  CHECK(core::validate_sample({img, seg, attrs, std::nullopt}).empty());

  models::DiscForwardResult dr = models::discriminator_forward(nets.d, img);
  CHECK(dr.extent == 2);
  CHECK(dr.attr_logits.size() == 2);
  CHECK(dr.attr_probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(-dr.attr_logits[0]))));
  double mean = (dr.adv_map[0] + dr.adv_map[1] + dr.adv_map[2] + dr.adv_map[3]) / 4;
  CHECK(dr.adv_scalar == doctest::Approx(mean));
}
