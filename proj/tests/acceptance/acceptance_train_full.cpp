// Acceptance criteria 7 and 8: full desk-scale training on 2,000 synthetic
// 32x32 samples for 10,000 steps, then the expression-morphing contract on
// the resulting checkpoint via the interpolate command.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "harness.hpp"
#include "sggan/cli.hpp"
#include "sggan/training.hpp"

using namespace sggan;
namespace fs = std::filesystem;

namespace {

double gray(const core::ImageTensor& img, int y, int x) {
  return (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
}

core::ImageTensor load_stage(const std::string& path) {
  imageio::RawImage raw = imageio::read_png(path);
  return core::to_unit_range(raw.height, raw.width, raw.rgb);
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  acceptance::Harness h;

  std::string out = "/tmp/sggan_acceptance_full";
  fs::remove_all(out);
  fs::create_directories(out);

  training::TrainConfig cfg;
  cfg.arch.image_size = 32;
  cfg.arch.n_s = 5;
  cfg.arch.n_c = 3;
  cfg.arch.base_width = 16;
  cfg.arch.g_resblocks = 6;
  cfg.arch.s_resblocks = 4;
  cfg.arch.d_layers = 4;
  cfg.batch_size = 8;
  cfg.n_critic = 5;
  cfg.total_steps = 10000;
  cfg.checkpoint_every = 2500;
  cfg.log_every = 50;
  cfg.seed = 20240817;
  cfg.attr_names = data::synth_attr_names(3);

  data::SampleSet train_set = data::synth_dataset(2000, 3, 32, 7);
  data::SampleSet val_set = data::synth_dataset(256, 3, 32, 8);

  training::TrainState st = training::train(cfg, train_set, out + "/run");
  double train_min = std::chrono::duration<double>(clock::now() - t0).count() / 60.0;
  h.note("training finished in " + std::to_string(train_min) + " min (target < 120 min)");

  training::Metrics m = training::evaluate(st, val_set, 11);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "fake-segmentation pixel agreement %.1f%% (threshold >= 80%%)",
                m.fake_seg_agreement * 100.0);
  h.criterion("criterion-7a", m.fake_seg_agreement >= 0.80 && train_min < 120.0, buf);
  std::snprintf(buf, sizeof(buf), "cycle reconstruction MAE %.4f (threshold <= 0.10)",
                m.cycle_mae);
  h.criterion("criterion-7b", m.cycle_mae <= 0.10, buf);
  std::snprintf(buf, sizeof(buf), "attribute agreement on fakes %.1f%% (threshold >= 85%%)",
                m.attr_agreement * 100.0);
  h.criterion("criterion-7c", m.attr_agreement >= 0.85, buf);

  // ---- criterion 8: NoSmile2Smile morphing on the trained checkpoint ----
  // fixed probe face; kappa -1 (not smiling) as the input expression
  Rng prng(515);
  data::SynthFaceParams probe = data::random_face_params(32, 3, prng);
  probe.attr_bits = {1, 0, 1};  // light skin: the mouth band is darker than skin
  data::SynthFaceParams frown = probe, smile = probe;
  frown.kappa = -1.0;
  smile.kappa = 1.0;

  Rng noise(99);
  core::Sample input = data::synth_sample(frown, noise);
  imageio::RawImage input_png(32, 32);
  input_png.rgb = core::from_unit_range(input.image);
  imageio::write_png(out + "/probe.png", input_png);
  segmap::write_landmark_file(out + "/lm_frown.txt",
                              {{"frown", data::synth_landmarks(frown)}});
  segmap::write_landmark_file(out + "/lm_smile.txt",
                              {{"smile", data::synth_landmarks(smile)}});

  cli::InterpolateArgs args;
  args.checkpoint = out + "/run/step-10000";
  args.input = out + "/probe.png";
  args.source_landmarks = out + "/lm_frown.txt";
  args.target_landmarks = out + "/lm_smile.txt";
  args.stages = 4;
  args.attrs = "SkinTone=1,RimTone=0,BrightBg=1";
  args.out_dir = out + "/interp";
  cli::cmd_interpolate(args);

  // probe region: pixels the mouth sweeps into (mouth at kappa=1 but not at
  // kappa=-1); background region from the analytic geometry
  std::vector<uint8_t> l_from = data::synth_labels(frown);
  std::vector<uint8_t> l_to = data::synth_labels(smile);
  std::vector<int> probe_px, bg_px;
  for (int q = 0; q < 32 * 32; ++q) {
    if (l_to[static_cast<size_t>(q)] == 4 && l_from[static_cast<size_t>(q)] != 4)
      probe_px.push_back(q);
    if (l_to[static_cast<size_t>(q)] == 0 && l_from[static_cast<size_t>(q)] == 0)
      bg_px.push_back(q);
  }

  double stage_mean[4];
  core::ImageTensor stages[4] = {
      load_stage(out + "/interp/stage_00.png"), load_stage(out + "/interp/stage_01.png"),
      load_stage(out + "/interp/stage_02.png"), load_stage(out + "/interp/stage_03.png")};
  for (int i = 0; i < 4; ++i) {
    double sum = 0;
    for (int q : probe_px) sum += gray(stages[i], q / 32, q % 32);
    stage_mean[i] = sum / static_cast<double>(probe_px.size());
  }
  bool monotone = stage_mean[0] > stage_mean[1] && stage_mean[1] > stage_mean[2] &&
                  stage_mean[2] > stage_mean[3];

  double worst_bg = 0;
  for (int i = 1; i < 4; ++i) {
    double mae = 0;
    for (int q : bg_px) {
      for (int c = 0; c < 3; ++c)
        mae += std::fabs(stages[static_cast<size_t>(i)].at(q / 32, q % 32, c) -
                         stages[0].at(q / 32, q % 32, c));
    }
    worst_bg = std::max(worst_bg, mae / (3.0 * static_cast<double>(bg_px.size())));
  }

  std::snprintf(buf, sizeof(buf),
                "morphing: mouth-sweep mean intensity %.3f > %.3f > %.3f > %.3f (%s), "
                "background drift %.4f (threshold < 0.05)",
                stage_mean[0], stage_mean[1], stage_mean[2], stage_mean[3],
                monotone ? "monotone" : "NOT monotone", worst_bg);
  h.criterion("criterion-8", monotone && worst_bg < 0.05, buf);

  double total_min = std::chrono::duration<double>(clock::now() - t0).count() / 60.0;
  h.note("total runtime " + std::to_string(total_min) + " min");
  return h.finish();
}
