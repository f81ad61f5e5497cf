/**
 * Copyright 2026 The sydnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "sydnet/config.hpp"
#include "sydnet/error.hpp"
#include "sydnet/head_check.hpp"
#include "sydnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace syd;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override, section.key=value (repeatable)");
    app->add_option("--seed", seed, "random seed (overrides train.seed)");
    app->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  }

  RunConfig resolve(const std::optional<fs::path>& fallback = std::nullopt) const {
    std::optional<fs::path> path;
    if (!file.empty()) {
      path = file;
    } else if (fallback && fs::exists(*fallback)) {
      path = fallback;
    }
    RunConfig rc = load_config(path, sets);
    if (seed) rc.train.seed = *seed;
    rc.train.jobs = jobs;
    return rc;
  }
};

/// Owns whatever the configured mode reads and exposes it as TrainData.
struct LoadedData {
  std::optional<DatasetManifest> manifest;
  std::optional<FeatureFile> train_features, test_features;
  TrainData view;
};

std::unique_ptr<LoadedData> load_data(const RunConfig& rc) {
  auto out = std::make_unique<LoadedData>();
  if (rc.train.mode == TrainMode::kScratch) {
    if (rc.data.root.empty()) throw ConfigError("data.root is not set");
    out->manifest = scan_dataset(rc.data.root, rc.data.layout, rc.data.split_file);
    for (const auto& w : out->manifest->warnings) std::cerr << "warning: " << w << '\n';
    if (rc.data.expect_classes) check_expected_classes(*out->manifest, rc.data.expect_classes);
    out->view.manifest = &*out->manifest;
  } else {
    if (rc.data.train_features.empty() || rc.data.test_features.empty()) {
      throw ConfigError("frozen_features mode needs data.train_features and data.test_features");
    }
    out->train_features = load_features(rc.data.train_features);
    out->test_features = load_features(rc.data.test_features);
    if (out->train_features->geometry != out->test_features->geometry) {
      throw DimensionError("train and test feature files differ in geometry");
    }
    out->view.train_features = &*out->train_features;
    out->view.test_features = &*out->test_features;
  }
  return out;
}

ModelShape data_shape(const RunConfig& rc, const TrainData& data) {
  if (rc.train.mode == TrainMode::kScratch) return scratch_shape(rc.train, data.num_classes());
  const auto& g = data.train_features->geometry;
  return {g.h, g.w, g.c, data.num_classes()};
}

fs::path output_dir(const std::string& given, const std::string& default_name) {
  if (!given.empty()) return given;
  const char* root = std::getenv("SYD_RUN_DIR");
  return fs::path(root && *root ? root : "runs") / default_name;
}

void claim_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw ConfigError("output directory '" + dir.string() + "' already exists; choose a new one or pass --force");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void print_count(const ParameterCount& c) {
  std::cout << "parameters: total " << c.total() << " (backbone " << c.backbone << ", channel attention "
            << c.channel_attention << ", spatial attention " << c.spatial_attention << ", classifier " << c.classifier
            << "; " << c.buffers << " BN buffer values)\n";
}

// ---------------------------------------------------------------------------

int cmd_train(const ConfigArgs& args, const std::string& out, bool force) {
  RunConfig rc = args.resolve();
  rc.train.validate();
  auto data = load_data(rc);
  const fs::path dir = output_dir(out, rc.train.patch_set + "_" + to_string(rc.train.baseline) + "_seed" +
                                           std::to_string(rc.train.seed));
  claim_dir(dir, force);
  std::ofstream(dir / "config.resolved") << render_config(rc);
  if (data->manifest) write_manifest_jsonl(*data->manifest, dir / "manifest.jsonl");
  std::cout << "run directory: " << dir.string() << '\n';

  const auto result = train(rc.train, data->view, dir, model_config_hash(rc), [](const MetricsRow& tr, const MetricsRow& te) {
    std::cout << "epoch " << std::setw(3) << tr.epoch << "  lr " << tr.lr << "  train loss " << fixed(tr.loss, 4)
              << " top1 " << fixed(tr.top1) << "  test loss " << fixed(te.loss, 4) << " top1 " << fixed(te.top1)
              << " top5 " << fixed(te.top5) << '\n'
              << std::flush;
  });
  std::cout << "final test top1 " << fixed(result.final_test.top1) << " top5 " << fixed(result.final_test.top5)
            << "; best test top1 " << fixed(result.best_test.top1) << " (epoch " << result.best_test.epoch << ")\n";
  print_count(result.parameters);
  return 0;
}

template <typename T>
EvalResult eval_with(const RunConfig& rc, const TrainData& data, const Checkpoint& ckpt, Split split) {
  auto model = load_model<T>(rc.train, data_shape(rc, data), ckpt);
  return evaluate(model, rc.train, data, split);
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& data_root,
             const std::string& split_name, const std::string& confusion) {
  const fs::path ckpt_path = checkpoint;
  RunConfig rc = args.resolve(ckpt_path.parent_path().parent_path() / "config.resolved");
  if (!data_root.empty()) rc.data.root = data_root;
  const Split split = parse_split(split_name);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.config_hash != model_config_hash(rc)) {
    throw ConfigError("checkpoint '" + ckpt_path.string() +
                      "' was written for a different model configuration (config hash mismatch)");
  }
  auto data = load_data(rc);
  const EvalResult r = rc.train.precision == Precision::kFloat64 ? eval_with<double>(rc, data->view, ckpt, split)
                                                                 : eval_with<float>(rc, data->view, ckpt, split);
  if (const auto* e = ckpt.find("meta.epoch"); e && !e->values.empty()) {
    MetricsRow row = r.row;
    row.epoch = static_cast<std::size_t>(e->values[0]);
    std::cout << kMetricsHeader << '\n' << format_metrics_row(row) << '\n';
  } else {
    std::cout << kMetricsHeader << '\n' << format_metrics_row(r.row) << '\n';
  }
  if (!confusion.empty()) write_confusion_csv(confusion, r.confusion);
  return 0;
}

int cmd_ablate(const ConfigArgs& args, const std::string& describe, std::vector<std::string> sets,
               std::vector<std::string> components, const std::string& out, bool force) {
  if (!describe.empty()) {
    std::cout << describe_patch_set(build_patch_set(describe));
    return 0;
  }
  RunConfig rc = args.resolve();
  if (sets.empty()) sets = {rc.train.patch_set};
  if (components.empty()) components = ablation_components();
  const auto variants = ablation_grid(rc.train, sets, components);
  auto data = load_data(rc);
  const fs::path dir = output_dir(out, "ablation_seed" + std::to_string(rc.train.seed));
  claim_dir(dir, force);
  std::ofstream(dir / "config.resolved") << render_config(rc);
  const RunConfig base = rc;
  const auto rows = run_ablation(variants, data->view, dir, args.jobs, [&base](const TrainConfig& c) {
    RunConfig v = base;
    v.train = c;
    return model_config_hash(v);
  });
  std::size_t failed = 0;
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(48) << r.variant.label << std::right;
    if (r.ok) {
      std::cout << " top1 " << fixed(r.final_test.top1) << " (best " << fixed(r.best_test.top1) << ")  params "
                << r.parameters.total() << '\n';
    } else {
      ++failed;
      std::cout << " FAILED: " << r.error << '\n';
    }
  }
  std::cout << "wrote " << (dir / "ablation.csv").string() << '\n';
  if (failed) std::cerr << failed << " variant(s) failed\n";
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out, bool force) {
  claim_dir(out, force);
  generate_synthetic(spec, out);
  std::cout << "wrote " << spec.num_classes << " classes x (" << spec.samples_per_class << " train + "
            << spec.test_per_class() << " test) " << spec.image_size << "x" << spec.image_size << " images to " << out
            << '\n';
  return 0;
}

int cmd_features(const ConfigArgs& args, const std::string& checkpoint, const std::string& out, bool force) {
  RunConfig rc = args.resolve();
  rc.train.mode = TrainMode::kScratch;
  rc.train.validate();
  auto data = load_data(rc);
  const ModelShape shape = data_shape(rc, data->view);
  std::optional<Model<float>> model;
  if (checkpoint.empty()) {
    Rng rng(derive_seed(rc.train.seed, {1}));
    model.emplace(rc.train, shape, rng);
  } else {
    model.emplace(load_model<float>(rc.train, shape, load_checkpoint(checkpoint)));
  }
  const fs::path dir = out;
  claim_dir(dir, force);
  const FeatureGeometry g{static_cast<std::uint32_t>(shape.h), static_cast<std::uint32_t>(shape.w),
                          static_cast<std::uint32_t>(shape.c)};
  const std::size_t s = rc.train.aug.crop_size;
  for (Split split : {Split::kTrain, Split::kTest}) {
    std::vector<FeatureRecord> records;
    BatchIterator it(*data->manifest, split, rc.train.batch_size, std::nullopt, rc.train.aug.source_size, args.jobs);
    Batch batch;
    while (it.next(batch)) {
      std::vector<float> pixels;
      for (const auto& img : batch.images) {
        const auto px = augment_eval(img, rc.train.aug);
        pixels.insert(pixels.end(), px.begin(), px.end());
      }
      const std::size_t b = batch.images.size();
      const auto f = model->backbone_forward(Tensor<float>({b, s, s, 3}, std::move(pixels)), false);
      const auto values = f.tensor.data();
      for (std::size_t i = 0; i < b; ++i) {
        FeatureRecord r;
        r.label = static_cast<std::uint32_t>(batch.labels[i]);
        r.values.assign(values.begin() + static_cast<std::ptrdiff_t>(i * g.values()),
                        values.begin() + static_cast<std::ptrdiff_t>((i + 1) * g.values()));
        records.push_back(std::move(r));
      }
    }
    const fs::path path = dir / (to_string(split) + ".sydf");
    write_features(path, g, records);
    std::cout << "wrote " << records.size() << " records (" << g.h << "x" << g.w << "x" << g.c << ") to "
              << path.string() << '\n';
  }
  return 0;
}

int cmd_grad_check(HeadCheckSpec spec, double tolerance) {
  const auto results = head_gradient_check(spec);
  std::cout << "grad-check n=" << spec.n << " h=" << spec.h << " w=" << spec.w << " c=" << spec.c
            << " c_a=" << spec.c_a << " L=" << spec.num_classes << " (float64, eval mode)\n";
  std::cout << std::left << std::setw(28) << "parameter" << std::right << std::setw(10) << "elements"
            << std::setw(16) << "max rel error" << std::setw(14) << "grad norm" << '\n';
  const GradCheckResult* worst = nullptr;
  for (const auto& r : results) {
    std::cout << std::left << std::setw(28) << r.name << std::right << std::setw(10) << r.elements << std::setw(16)
              << std::scientific << std::setprecision(3) << r.max_rel_error << std::setw(14) << r.grad_norm
              << std::defaultfloat << '\n';
    if (!worst || r.max_rel_error > worst->max_rel_error) worst = &r;
  }
  if (worst && worst->max_rel_error >= tolerance) {
    std::cout << "FAIL: " << worst->name << "[" << worst->worst_index << "] analytic " << worst->analytic
              << " numeric " << worst->numeric << " rel error " << worst->max_rel_error << " >= tolerance "
              << tolerance << '\n';
    return kExitNumeric;
  }
  std::cout << "OK: all below " << tolerance << '\n';
  return 0;
}

int cmd_describe(const std::string& name, std::size_t grid) {
  std::cout << describe_patch_set(grid ? build_patch_set(name, grid) : build_patch_set(name));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-based attention head for fine-grained image classification"};
  app.require_subcommand(1);
  const std::string keys = "\nConfig keys (section.key = default):\n" + config_help();
  app.footer(keys);

  std::function<int()> action;
  bool force = false;

  ConfigArgs train_args;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
  train_args.attach(train_cmd);
  train_cmd->add_option("--out", train_out, "run directory (default $SYD_RUN_DIR/<set>_<baseline>_seed<seed>)");
  train_cmd->add_flag("--force", force, "replace an existing run directory");
  train_cmd->footer(keys);
  train_cmd->callback([&] { action = [&] { return cmd_train(train_args, train_out, force); }; });

  ConfigArgs eval_args;
  std::string ckpt, eval_data, eval_split = "test", confusion;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and print one metrics row");
  eval_args.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt, "SYDW checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "dataset root (overrides data.root)");
  eval_cmd->add_option("--split", eval_split, "train or test");
  eval_cmd->add_option("--confusion", confusion, "write the confusion matrix CSV here");
  eval_cmd->footer(keys);
  eval_cmd->callback([&] { action = [&] { return cmd_eval(eval_args, ckpt, eval_data, eval_split, confusion); }; });

  ConfigArgs ablate_args;
  std::string describe, ablate_out;
  std::vector<std::string> sets, components;
  auto* ablate_cmd = app.add_subcommand("ablate", "train a grid of component variants");
  ablate_args.attach(ablate_cmd);
  ablate_cmd->add_option("--describe-patches", describe, "print a patch set's rectangles and exit");
  ablate_cmd->add_option("--patch-sets", sets, "patch sets (default patches.set)")->delimiter(',');
  ablate_cmd->add_option("--components", components, "component ids (default all)")->delimiter(',');
  ablate_cmd->add_option("--out", ablate_out, "output directory");
  ablate_cmd->add_flag("--force", force, "replace an existing output directory");
  ablate_cmd->footer(keys + "\nComponents: full patches_only ca_only sa_only sigmoid_sa general_dropout\n"
                            "  no_gaussian_dropout erase1_rand erase1_fixed erase2_fixed gap erase_gap attention\n");
  ablate_cmd->callback(
      [&] { action = [&] { return cmd_ablate(ablate_args, describe, sets, components, ablate_out, force); }; });

  SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic shapes dataset");
  synth_cmd->add_option("--classes", synth.num_classes, "number of classes (2-6)");
  synth_cmd->add_option("--per-class", synth.samples_per_class, "training images per class");
  synth_cmd->add_option("--size", synth.image_size, "image side in pixels");
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_flag("--force", force, "replace an existing directory");
  synth_cmd->footer(keys);
  synth_cmd->callback([&] { action = [&] { return cmd_synth(synth, synth_out, force); }; });

  ConfigArgs feat_args;
  std::string feat_ckpt, feat_out;
  auto* feat_cmd = app.add_subcommand("features", "run the reference CNN over a dataset and write SYDF files");
  feat_args.attach(feat_cmd);
  feat_cmd->add_option("--checkpoint", feat_ckpt, "backbone weights (default: random init from the seed)");
  feat_cmd->add_option("--out", feat_out, "output directory for train.sydf and test.sydf")->required();
  feat_cmd->add_flag("--force", force, "replace an existing directory");
  feat_cmd->footer(keys);
  feat_cmd->callback([&] { action = [&] { return cmd_features(feat_args, feat_ckpt, feat_out, force); }; });

  HeadCheckSpec gc;
  double tolerance = 1e-3;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of every head parameter group");
  gc_cmd->add_option("--tolerance", tolerance, "maximum relative error");
  gc_cmd->add_option("--seed", gc.seed, "random seed");
  gc_cmd->add_option("--n", gc.n, "patches");
  gc_cmd->add_option("--hw", gc.h, "feature map side");
  gc_cmd->add_option("--c", gc.c, "channels");
  gc_cmd->add_option("--c-a", gc.c_a, "attention width");
  gc_cmd->add_option("--classes", gc.num_classes, "classes");
  gc_cmd->footer(keys);
  gc_cmd->callback([&] {
    gc.w = gc.h;
    action = [&] { return cmd_grad_check(gc, tolerance); };
  });

  std::string dp_name;
  std::size_t dp_grid = 0;
  auto* dp_cmd = app.add_subcommand("describe-patches", "print the rectangles of a patch set");
  dp_cmd->add_option("name", dp_name, "P9, P12, P16, P20, P25 or P30")->required();
  dp_cmd->add_option("--grid", dp_grid, "grid side (default: the set's own)");
  dp_cmd->footer(keys);
  dp_cmd->callback([&] { action = [&] { return cmd_describe(dp_name, dp_grid); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return action();
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IngestionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const LabelError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
