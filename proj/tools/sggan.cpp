// sggan command-line driver: preprocess, train, translate, interpolate,
// morph, ablate, sweep, eval. Exit codes: 0 success, 1 user error, 2
// internal error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sggan/cli.hpp"

namespace {

using sggan::cli::TrainArgs;

void add_train_options(CLI::App* cmd, TrainArgs& args, std::vector<std::string>& overrides) {
  cmd->add_option("--config", args.config_file, "flat key=value config file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--synthetic", args.synthetic, "train on the built-in synthetic dataset");
  cmd->add_option("--synth-count", args.synth_count, "synthetic sample count");
  cmd->add_option("--synth-seed", args.synth_seed, "synthetic dataset seed");
  cmd->add_option("--data", args.data_dir, "preprocess cache directory");
  cmd->add_option("--resume", args.resume, "checkpoint directory to resume from");
  cmd->add_option("--set", overrides, "config override key=value (repeatable)");
  // common shorthands
  cmd->add_option_function<std::string>(
      "--seed", [&args](const std::string& v) { args.overrides.emplace_back("seed", v); },
      "training seed");
  cmd->add_option_function<std::string>(
      "--total-steps",
      [&args](const std::string& v) { args.overrides.emplace_back("total_steps", v); },
      "number of training steps");
  cmd->add_flag_function(
      "--segmentor-only",
      [&args](int64_t) { args.overrides.emplace_back("segmentor_only", "1"); },
      "train the segmentor alone");
}

void apply_kv_overrides(TrainArgs& args, const std::vector<std::string>& kvs) {
  for (const std::string& kv : kvs) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw sggan::cli::UserError("--set expects key=value, got '" + kv + "'");
    args.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segmentation-guided multi-domain face translation"};
  app.require_subcommand(1);

  // preprocess
  sggan::cli::PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand("preprocess", "crop/resize images, rasterize landmarks");
  cmd_pre->add_option("--root", pre.root, "dataset root")->required();
  cmd_pre->add_option("--out", pre.out_dir, "cache output directory")->required();
  cmd_pre->add_option("--table", pre.table_file, "region table file (default: 68-point table)");
  cmd_pre->add_option("--size", pre.target_size, "target image size");
  cmd_pre->add_option("--attrs", pre.attr_subset, "attribute subset (repeatable)");
  cmd_pre->add_option("--test-percent", pre.test_percent, "test split percentage");
  cmd_pre->add_option("--landmark-threshold", pre.landmark_threshold,
                      "mean px distance for detection filtering");

  // train / ablate
  TrainArgs train_args;
  std::vector<std::string> train_sets;
  auto* cmd_train = app.add_subcommand("train", "train the three networks");
  add_train_options(cmd_train, train_args, train_sets);

  TrainArgs ablate_args;
  std::vector<std::string> ablate_sets;
  auto* cmd_ablate =
      app.add_subcommand("ablate", "train without the auxiliary attribute classifier");
  add_train_options(cmd_ablate, ablate_args, ablate_sets);

  // translate
  sggan::cli::TranslateArgs tr;
  auto* cmd_tr = app.add_subcommand("translate", "attribute translation");
  cmd_tr->add_option("--checkpoint", tr.checkpoint, "checkpoint directory")->required();
  cmd_tr->add_option("--input", tr.inputs, "input image(s)")->required();
  cmd_tr->add_option("--target", tr.targets, "target attributes 'Name=1,Other=0' (repeatable)");
  cmd_tr->add_option("--seg", tr.seg_file, "target segmentation label png");
  cmd_tr->add_option("--source-attrs", tr.source_attrs, "input's own attributes");
  cmd_tr->add_option("--out", tr.out_dir, "output directory");
  cmd_tr->add_flag("!--no-input-column", tr.include_input, "omit the input column");

  // interpolate
  sggan::cli::InterpolateArgs itp;
  auto* cmd_itp = app.add_subcommand("interpolate", "expression morphing sequence");
  cmd_itp->add_option("--checkpoint", itp.checkpoint)->required();
  cmd_itp->add_option("--input", itp.input)->required();
  cmd_itp->add_option("--source-landmarks", itp.source_landmarks)->required();
  cmd_itp->add_option("--target-landmarks", itp.target_landmarks)->required();
  cmd_itp->add_option("--table", itp.table_file, "region table file");
  cmd_itp->add_option("--stages", itp.stages, "number of stages");
  cmd_itp->add_option("--attrs", itp.attrs, "source attributes");
  cmd_itp->add_option("--out", itp.out_dir);

  // morph
  sggan::cli::MorphArgs mo;
  auto* cmd_mo = app.add_subcommand("morph", "align input to a target segmentation");
  cmd_mo->add_option("--checkpoint", mo.checkpoint)->required();
  cmd_mo->add_option("--input", mo.input)->required();
  cmd_mo->add_option("--ref", mo.refs, "reference image(s) segmented by S");
  cmd_mo->add_option("--seg", mo.seg_file, "target segmentation label png");
  cmd_mo->add_option("--attrs", mo.attrs, "input's own attributes");
  cmd_mo->add_option("--out", mo.out_dir);

  // sweep
  sggan::cli::SweepArgs sw;
  std::vector<std::string> sweep_sets;
  auto* cmd_sw = app.add_subcommand("sweep", "train once per hyperparameter value");
  add_train_options(cmd_sw, sw.base, sweep_sets);
  cmd_sw->add_option("--parameter", sw.parameter, "config key to sweep")->required();
  cmd_sw->add_option("--values", sw.values, "values to sweep")->required();

  // eval
  sggan::cli::EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "report validation metrics");
  cmd_ev->add_option("--checkpoint", ev.checkpoint)->required();
  cmd_ev->add_flag("--synthetic", ev.synthetic);
  cmd_ev->add_option("--synth-count", ev.synth_count);
  cmd_ev->add_option("--synth-seed", ev.synth_seed);
  cmd_ev->add_option("--data", ev.data_dir);
  cmd_ev->add_option("--seed", ev.seed, "evaluation target-sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pre->parsed()) {
      sggan::cli::cmd_preprocess(pre);
    } else if (cmd_train->parsed()) {
      apply_kv_overrides(train_args, train_sets);
      sggan::cli::cmd_train(train_args);
    } else if (cmd_ablate->parsed()) {
      apply_kv_overrides(ablate_args, ablate_sets);
      sggan::cli::cmd_ablate(ablate_args);
    } else if (cmd_tr->parsed()) {
      sggan::cli::cmd_translate(tr);
    } else if (cmd_itp->parsed()) {
      sggan::cli::cmd_interpolate(itp);
    } else if (cmd_mo->parsed()) {
      sggan::cli::cmd_morph(mo);
    } else if (cmd_sw->parsed()) {
      apply_kv_overrides(sw.base, sweep_sets);
      sggan::cli::cmd_sweep(sw);
    } else if (cmd_ev->parsed()) {
      sggan::cli::cmd_eval(ev);
    }
  } catch (const sggan::cli::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
