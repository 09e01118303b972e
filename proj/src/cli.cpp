#include "sggan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace sggan::cli {
namespace fs = std::filesystem;
namespace {

std::string stem_of(const std::string& file) { return fs::path(file).stem().string(); }

std::vector<std::string> attr_names_or_default(const training::TrainConfig& cfg) {
  if (!cfg.attr_names.empty()) return cfg.attr_names;
  std::vector<std::string> names;
  for (int i = 0; i < cfg.arch.n_c; ++i) names.push_back("attr" + std::to_string(i));
  return names;
}

core::SegmentationMap seg_from_label_file(const std::string& path, int size, int n_s) {
  int h = 0, w = 0;
  std::vector<int> labels = imageio::read_label_png(path, &h, &w);
  if (h != size || w != size)
    throw UserError("segmentation file " + path + " is " + std::to_string(w) + "x" +
                    std::to_string(h) + ", expected " + std::to_string(size) + "x" +
                    std::to_string(size));
  for (int l : labels)
    if (l >= n_s)
      throw UserError("segmentation file " + path + " has label " + std::to_string(l) +
                      " but the checkpoint has n_s=" + std::to_string(n_s));
  return segmap::labels_to_one_hot(labels, h, w, n_s);
}

core::LandmarkSet first_landmark_record(const std::string& path) {
  auto records = segmap::read_landmark_file(path);
  if (records.empty()) throw UserError("landmark file has no records: " + path);
  return records[0].second;
}

segmap::RegionTable table_for(const std::string& table_file, const core::LandmarkSet& lm) {
  if (!table_file.empty()) return segmap::RegionTable::load(table_file);
  if (lm.count() == 68) return segmap::RegionTable::default_face68();
  if (lm.count() == 57) return data::synth_region_table();
  throw UserError("cannot infer a region table for " + std::to_string(lm.count()) +
                  " landmarks; pass --table");
}

training::TrainConfig build_train_config(const TrainArgs& args) {
  training::TrainConfig cfg;
  if (!args.config_file.empty()) cfg = training::TrainConfig::from_file(args.config_file);
  for (const auto& [k, v] : args.overrides) {
    try {
      cfg.apply_override(k, v);
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
  }
  return cfg;
}

data::SampleSet dataset_for(const TrainArgs& args, training::TrainConfig& cfg) {
  if (args.synthetic) {
    if (cfg.arch.n_s != data::kSynthClasses)
      throw UserError("--synthetic requires n_s=" + std::to_string(data::kSynthClasses));
    data::SampleSet ds =
        data::synth_dataset(args.synth_count, cfg.arch.n_c, cfg.arch.image_size, args.synth_seed);
    if (cfg.attr_names.empty()) cfg.attr_names = ds.attr_names;
    return ds;
  }
  if (args.data_dir.empty()) throw UserError("pass --synthetic or --data <preprocess cache>");
  data::SampleSet ds = data::load_cache(args.data_dir);
  if (cfg.attr_names.empty()) cfg.attr_names = ds.attr_names;
  return ds;
}

}  // namespace

std::vector<double> parse_attr_spec(const std::string& spec,
                                    const std::vector<std::string>& names) {
  std::vector<double> bits(names.size(), 0.0);
  if (spec.empty()) return bits;
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw UserError("attribute spec item '" + item + "' is not Name=0|1");
    std::string name = item.substr(0, eq);
    std::string val = item.substr(eq + 1);
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      std::string valid;
      for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
      throw UserError("unknown attribute '" + name + "'; valid names: " + valid);
    }
    if (val != "0" && val != "1")
      throw UserError("attribute '" + name + "' must be 0 or 1, got '" + val + "'");
    bits[static_cast<size_t>(it - names.begin())] = val == "1" ? 1.0 : 0.0;
  }
  return bits;
}

core::ImageTensor load_input_image(const std::string& path, int expect_size) {
  if (!fs::exists(path)) throw UserError("input image not found: " + path);
  imageio::RawImage raw = imageio::read_image(path);
  if (raw.height != expect_size || raw.width != expect_size)
    throw UserError("input " + path + " is " + std::to_string(raw.width) + "x" +
                    std::to_string(raw.height) + ", the checkpoint expects " +
                    std::to_string(expect_size) + "x" + std::to_string(expect_size) +
                    " (run preprocess first)");
  return core::to_unit_range(raw.height, raw.width, raw.rgb);
}

core::SegmentationMap harden(const core::SegmentationMap& soft) {
  return segmap::labels_to_one_hot(segmap::one_hot_to_labels(soft), soft.height, soft.width,
                                   soft.classes);
}

// ------------------------------------------------------------ preprocess

void cmd_preprocess(const PreprocessArgs& args) {
  if (args.root.empty() || args.out_dir.empty())
    throw UserError("preprocess needs --root and --out");
  data::ManifestOptions opts;
  opts.attr_subset = args.attr_subset;
  opts.test_percent = args.test_percent;
  opts.landmark_threshold = args.landmark_threshold;
  data::DatasetManifest manifest;
  try {
    manifest = data::load_manifest(args.root, opts);
  } catch (const std::runtime_error& e) {
    throw UserError(e.what());
  }

  segmap::RegionTable table = args.table_file.empty()
                                  ? segmap::RegionTable::default_face68()
                                  : segmap::RegionTable::load(args.table_file);

  auto write_split = [&](const std::string& split,
                         const std::vector<data::ManifestEntry>& entries) {
    fs::path dir = fs::path(args.out_dir) / split;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "labels");
    data::AttributeTable attr_out;
    attr_out.names = manifest.attr_names;
    std::vector<std::pair<std::string, core::LandmarkSet>> lm_out;
    for (const auto& entry : entries) {
      core::Sample s = data::prepare_sample(args.root, entry, args.target_size, table);
      std::string name = stem_of(entry.image_file);
      imageio::RawImage img(args.target_size, args.target_size);
      img.rgb = core::from_unit_range(s.image);
      imageio::write_png((dir / "images" / (name + ".png")).string(), img);
      imageio::write_label_png((dir / "labels" / (name + ".png")).string(),
                               segmap::one_hot_to_labels(s.segmentation), args.target_size,
                               args.target_size);
      attr_out.rows.emplace_back(name, entry.attrs);
      lm_out.emplace_back(name, *s.landmarks);
    }
    data::write_attribute_table((dir / "attributes.csv").string(), attr_out);
    segmap::write_landmark_file((dir / "landmarks.txt").string(), lm_out);
    std::ofstream meta(dir / "meta.txt");
    meta << "image_size " << args.target_size << "\n";
    meta << "n_s " << table.n_s << "\n";
    meta << "n_c " << manifest.attr_names.size() << "\n";
    for (const auto& n : manifest.attr_names) meta << "attr " << n << "\n";
  };
  write_split("train", manifest.train);
  write_split("test", manifest.test);

  std::ofstream report(fs::path(args.out_dir) / "report.txt");
  report << "train " << manifest.train.size() << "\n";
  report << "test " << manifest.test.size() << "\n";
  report << "excluded " << manifest.excluded << "\n";
  std::cout << "preprocess: " << manifest.train.size() << " train, " << manifest.test.size()
            << " test, " << manifest.excluded << " excluded\n";
}

// ------------------------------------------------------------ train

training::TrainState cmd_train(const TrainArgs& args) {
  training::TrainConfig cfg = build_train_config(args);
  data::SampleSet ds = dataset_for(args, cfg);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  models::Networks probe = models::build_networks(cfg.arch, cfg.seed);
  std::cout << "parameters: generator " << probe.g.param_count() << ", discriminator "
            << probe.d.param_count() << ", segmentor " << probe.s.param_count() << "\n";
  training::TrainState st = training::train(cfg, ds, args.out_dir, args.resume);
  std::cout << "trained to step " << st.step << "; outputs in " << args.out_dir << "\n";
  return st;
}

training::TrainState cmd_ablate(const TrainArgs& args) {
  TrainArgs a = args;
  a.overrides.emplace_back("lambda1", "0");
  a.overrides.emplace_back("classifier_enabled", "0");
  return cmd_train(a);
}

// ------------------------------------------------------------ translate

void cmd_translate(const TranslateArgs& args) {
  if (args.checkpoint.empty() || !fs::exists(args.checkpoint))
    throw UserError("checkpoint not found: " + args.checkpoint);
  if (args.inputs.empty()) throw UserError("translate needs at least one --input");
  auto [cfg, nets] = training::load_checkpoint_for_inference(args.checkpoint);
  std::vector<std::string> names = attr_names_or_default(cfg);

  if (!args.targets.empty() && !cfg.classifier_enabled)
    throw UserError(
        "this checkpoint was trained without the attribute classifier (ablated); "
        "attribute translation is unavailable, use `morph`");

  std::vector<std::vector<double>> target_bits;
  for (const std::string& t : args.targets) target_bits.push_back(parse_attr_spec(t, names));
  if (target_bits.empty() && args.source_attrs.empty())
    throw UserError("translate needs --target specs (or --source-attrs for the identity "
                    "diagnostic)");

  fs::create_directories(args.out_dir);
  GridSpec spec;
  spec.cell = cfg.arch.image_size;
  spec.margin = args.margin;
  spec.include_input = args.include_input;
  std::vector<std::vector<core::ImageTensor>> cells;

  for (const std::string& input : args.inputs) {
    core::ImageTensor x = load_input_image(input, cfg.arch.image_size);
    core::SegmentationMap s_tgt =
        args.seg_file.empty()
            ? harden(models::segmentor_forward(nets.s, x))
            : seg_from_label_file(args.seg_file, cfg.arch.image_size, cfg.arch.n_s);

    std::vector<core::ImageTensor> row;
    if (args.include_input) row.push_back(x);
    spec.row_ids.push_back(stem_of(input));

    if (target_bits.empty()) {
      // identity diagnostic: c' = c, s' = S(x); reports drift, no exactness claim
      std::vector<double> c = parse_attr_spec(args.source_attrs, names);
      core::ImageTensor y = models::generator_forward(
          nets.g, x, s_tgt, core::AttributeVector(core::AttrKind::Binary, c));
      double mae = 0;
      for (size_t i = 0; i < y.data.size(); ++i) mae += std::fabs(y.data[i] - x.data[i]);
      mae /= static_cast<double>(y.data.size());
      std::cout << "identity " << stem_of(input) << " mae " << mae << "\n";
      imageio::RawImage out(y.height, y.width);
      out.rgb = core::from_unit_range(y);
      imageio::write_png((fs::path(args.out_dir) / (stem_of(input) + "_identity.png")).string(),
                         out);
      row.push_back(y);
    } else {
      for (size_t j = 0; j < target_bits.size(); ++j) {
        core::ImageTensor y = models::generator_forward(
            nets.g, x, s_tgt, core::AttributeVector(core::AttrKind::Binary, target_bits[j]));
        imageio::RawImage out(y.height, y.width);
        out.rgb = core::from_unit_range(y);
        imageio::write_png((fs::path(args.out_dir) /
                            (stem_of(input) + "_t" + std::to_string(j) + ".png"))
                               .string(),
                           out);
        row.push_back(std::move(y));
      }
    }
    cells.push_back(std::move(row));
  }
  for (size_t j = 0; j < target_bits.size(); ++j)
    spec.column_labels.push_back("t" + std::to_string(j));
  imageio::write_png((fs::path(args.out_dir) / "grid.png").string(), render_grid(spec, cells));
}

// ------------------------------------------------------------ interpolate

void cmd_interpolate(const InterpolateArgs& args) {
  if (args.checkpoint.empty() || !fs::exists(args.checkpoint))
    throw UserError("checkpoint not found: " + args.checkpoint);
  if (args.stages < 2) throw UserError("interpolate needs --stages >= 2");
  auto [cfg, nets] = training::load_checkpoint_for_inference(args.checkpoint);
  std::vector<std::string> names = attr_names_or_default(cfg);

  core::ImageTensor x = load_input_image(args.input, cfg.arch.image_size);
  core::LandmarkSet src = first_landmark_record(args.source_landmarks);
  core::LandmarkSet dst = first_landmark_record(args.target_landmarks);
  segmap::RegionTable table = table_for(args.table_file, src);
  if (table.n_s != cfg.arch.n_s)
    throw UserError("region table has " + std::to_string(table.n_s) +
                    " classes, the checkpoint expects " + std::to_string(cfg.arch.n_s));

  std::vector<core::SegmentationMap> seq;
  try {
    seq = segmap::morph_sequence(src, dst, args.stages, table, cfg.arch.image_size,
                                 cfg.arch.image_size);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }

  std::vector<double> c = parse_attr_spec(args.attrs, names);
  core::AttributeVector attrs(core::AttrKind::Binary, c);

  fs::create_directories(args.out_dir);
  std::vector<core::ImageTensor> row;
  for (size_t i = 0; i < seq.size(); ++i) {
    core::ImageTensor y = models::generator_forward(nets.g, x, seq[i], attrs);
    imageio::RawImage out(y.height, y.width);
    out.rgb = core::from_unit_range(y);
    char stage_name[32];
    std::snprintf(stage_name, sizeof(stage_name), "stage_%02zu.png", i);
    imageio::write_png((fs::path(args.out_dir) / stage_name).string(), out);
    row.push_back(std::move(y));
  }
  GridSpec spec;
  spec.cell = cfg.arch.image_size;
  spec.row_ids = {stem_of(args.input)};
  for (size_t i = 0; i < seq.size(); ++i)
    spec.column_labels.push_back("stage" + std::to_string(i));
  spec.include_input = false;
  imageio::write_png((fs::path(args.out_dir) / "sequence.png").string(),
                     render_grid(spec, {row}));
}

// ------------------------------------------------------------ morph

void cmd_morph(const MorphArgs& args) {
  if (args.checkpoint.empty() || !fs::exists(args.checkpoint))
    throw UserError("checkpoint not found: " + args.checkpoint);
  if (args.refs.empty() && args.seg_file.empty())
    throw UserError("morph needs reference images (--ref) or a segmentation (--seg)");
  auto [cfg, nets] = training::load_checkpoint_for_inference(args.checkpoint);
  std::vector<std::string> names = attr_names_or_default(cfg);

  core::ImageTensor x = load_input_image(args.input, cfg.arch.image_size);
  std::vector<double> c = parse_attr_spec(args.attrs, names);
  core::AttributeVector attrs(core::AttrKind::Binary, c);

  std::vector<std::pair<std::string, core::SegmentationMap>> targets;
  if (!args.seg_file.empty())
    targets.emplace_back(stem_of(args.seg_file),
                         seg_from_label_file(args.seg_file, cfg.arch.image_size, cfg.arch.n_s));
  for (const std::string& ref : args.refs) {
    core::ImageTensor r = load_input_image(ref, cfg.arch.image_size);
    targets.emplace_back(stem_of(ref), harden(models::segmentor_forward(nets.s, r)));
  }

  fs::create_directories(args.out_dir);
  for (const auto& [name, seg] : targets) {
    core::ImageTensor y = models::generator_forward(nets.g, x, seg, attrs);
    imageio::RawImage out(y.height, y.width);
    out.rgb = core::from_unit_range(y);
    imageio::write_png(
        (fs::path(args.out_dir) / (stem_of(args.input) + "_to_" + name + ".png")).string(), out);
  }
}

// ------------------------------------------------------------ sweep

void cmd_sweep(const SweepArgs& args) {
  if (args.values.empty()) throw UserError("sweep needs a nonempty --values list");
  if (args.parameter.empty()) throw UserError("sweep needs --parameter");

  std::vector<core::ImageTensor> row;
  core::ImageTensor probe;
  bool have_probe = false;
  std::vector<std::string> labels;

  for (const std::string& value : args.values) {
    TrainArgs run = args.base;
    run.overrides.emplace_back(args.parameter, value);
    run.out_dir = (fs::path(args.base.out_dir) / ("sweep-" + args.parameter + "-" + value))
                      .string();
    training::TrainState st = cmd_train(run);
    labels.push_back(args.parameter + "=" + value);

    // translate a fixed probe under this run: first sample, flipped bits
    training::TrainConfig cfg = build_train_config(run);
    data::SampleSet ds = dataset_for(run, cfg);
    core::Sample s0 = data::unpack(ds.samples[0], ds.n_s);
    if (!have_probe) {
      probe = s0.image;
      row.push_back(probe);
      have_probe = true;
    }
    std::vector<double> flipped;
    for (double b : s0.attributes.values) flipped.push_back(b >= 0.5 ? 0.0 : 1.0);
    core::ImageTensor y = models::generator_forward(
        st.nets.g, s0.image, s0.segmentation,
        core::AttributeVector(core::AttrKind::Binary, flipped));
    row.push_back(std::move(y));
  }

  GridSpec spec;
  spec.cell = probe.height;
  spec.row_ids = {"probe"};
  spec.column_labels = labels;
  fs::create_directories(args.base.out_dir);
  imageio::write_png((fs::path(args.base.out_dir) / "sweep_grid.png").string(),
                     render_grid(spec, {row}));
}

// ------------------------------------------------------------ eval

training::Metrics cmd_eval(const EvalArgs& args) {
  if (args.checkpoint.empty() || !fs::exists(args.checkpoint))
    throw UserError("checkpoint not found: " + args.checkpoint);
  auto [cfg, nets] = training::load_checkpoint_for_inference(args.checkpoint);

  data::SampleSet val;
  if (args.synthetic) {
    val = data::synth_dataset(args.synth_count, cfg.arch.n_c, cfg.arch.image_size,
                              args.synth_seed);
  } else {
    if (args.data_dir.empty()) throw UserError("pass --synthetic or --data <preprocess cache>");
    val = data::load_cache(args.data_dir);
  }

  training::TrainState st;
  st.nets = std::move(nets);
  training::Metrics m = training::evaluate(st, val, args.seed, cfg.classifier_enabled);
  std::cout << "seg_pixel_acc " << m.seg_pixel_acc << "\n";
  std::cout << "fake_seg_agreement " << m.fake_seg_agreement << "\n";
  std::cout << "attr_agreement " << m.attr_agreement << "\n";
  std::cout << "cycle_mae " << m.cycle_mae << "\n";
  return m;
}

}  // namespace sggan::cli
