// Command-line front end: synthetic data generation, training, the repeated
// experiment protocol, epoch materialization, descriptor-distance sampling,
// and informative-area masking.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "milmix/analysis.hpp"
#include "milmix/augment.hpp"
#include "milmix/checkpoint.hpp"
#include "milmix/codec.hpp"
#include "milmix/config.hpp"
#include "milmix/harness.hpp"
#include "milmix/synthetic.hpp"
#include "milmix/tilemask.hpp"

namespace fs = std::filesystem;
using namespace milmix;

namespace {

// Relative output paths land under $MILMIX_OUT_DIR when it is set.
fs::path resolve_out(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("MILMIX_OUT_DIR")) return fs::path(dir) / p;
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Every config key doubles as a CLI flag; flags override the --config file.
// Values stay strings so apply_config_entry does the parsing for both paths.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", file, "key=value config file; the flags below override it")
        ->check(CLI::ExistingFile);
    const std::pair<const char*, const char*> keys[] = {
        {"dataset", "bag dataset directory"},
        {"model", "abmil | dsmil"},
        {"augment.mode", "none | intra-linear | intra-multilinear | inter-v1 | inter-v2"},
        {"augment.beta", "mixing probability for intra modes, in [0,1]"},
        {"epochs", "training epochs"},
        {"lr", "Adam learning rate"},
        {"repeats", "experiment repetitions"},
        {"train_fraction", "stratified train share, in (0,1)"},
        {"base_seed", "seed of repeat 0; repeat r uses base_seed + r"},
        {"bags_per_class", "subsample to this many bags per class (0 = all)"},
        {"patches_per_bag", "subsample to this many patches per bag (0 = all)"},
        {"output", "output path (subcommand-specific; empty = default)"},
    };
    for (const auto& [key, help] : keys) {
      options[key] = cmd.add_option("--" + std::string(key), values[key], help);
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!file.empty()) cfg = load_config(file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_config_entry(cfg, key, values.at(key));
    }
    return cfg;
  }
};

BagDataset load_required_dataset(const std::string& path, const char* cmd) {
  if (path.empty()) {
    throw ValidationError(std::string(cmd) + ": no dataset given (--dataset or config)");
  }
  return load_dataset(path);
}

void run_synth(const SyntheticSpec& spec, std::uint64_t seed, const std::string& output) {
  validate_spec(spec);
  RngStream rng(seed);
  const BagDataset ds = generate_synthetic(spec, rng);
  const fs::path dir = resolve_out(output);
  save_dataset(dir, ds);
  std::cout << "wrote " << ds.bags.size() << " bags (" << ds.class_names.size() << " classes, "
            << spec.patches_per_bag << " patches x " << spec.dim << " dims) to " << dir.string()
            << "\n";
}

void run_train(const ConfigFlags& flags) {
  ExperimentConfig cfg = flags.resolve();
  validate_config(cfg);
  BagDataset ds = load_required_dataset(cfg.dataset, "train");

  RngStream rng(cfg.base_seed);
  if (cfg.bags_per_class > 0) ds = subsample_dataset(ds, cfg.bags_per_class, rng);
  if (cfg.patches_per_bag > 0) {
    for (auto& bag : ds.bags) bag = subsample_patches(bag, cfg.patches_per_bag, rng);
  }
  auto [train, test] = split_dataset(ds, cfg.train_fraction, rng);
  const TrainResult trained = train_model(cfg.model, train, cfg, rng);
  const Evaluation ev = evaluate(trained.model, test);

  const fs::path ckpt = resolve_out(cfg.output.empty() ? "model.ckpt" : cfg.output);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_model(trained.model, ckpt.string());

  std::cout << "train " << train.bags.size() << " / test " << test.bags.size() << " bags, "
            << cfg.epochs << " epochs, final mean loss "
            << compact_double(trained.loss_history.back()) << "\n";
  std::cout << "test accuracy " << compact_double(ev.accuracy);
  for (std::size_t c = 0; c < ev.class_accuracy.size(); ++c) {
    std::cout << (c == 0 ? " (" : ", ") << ds.class_names[c] << " "
              << compact_double(ev.class_accuracy[c]);
  }
  std::cout << ")\ncheckpoint written to " << ckpt.string() << "\n";
}

void run_experiment_cmd(const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  const BagDataset ds = load_required_dataset(cfg.dataset, "experiment");
  const ExperimentResult result = run_experiment(ds, cfg);
  const std::string csv = results_csv_text(result, cfg);
  if (cfg.output.empty()) {
    std::cout << csv;
  } else {
    const fs::path path = resolve_out(cfg.output);
    write_text(path, csv);
    std::cout << "mean accuracy " << compact_double(result.mean_accuracy) << " (std "
              << compact_double(result.std_accuracy) << ") over " << result.rows.size()
              << " repeats; results written to " << path.string() << "\n";
  }
}

void run_augment(const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  const BagDataset ds = load_required_dataset(cfg.dataset, "augment");
  RngStream rng(cfg.base_seed);
  BagDataset epoch;
  epoch.class_names = ds.class_names;
  epoch.descriptor_dim = ds.descriptor_dim;
  epoch.bags = build_epoch_bags(ds, cfg.augment, rng);
  const fs::path dir = resolve_out(cfg.output.empty() ? "epoch_bags" : cfg.output);
  save_dataset(dir, epoch);
  std::cout << "wrote " << epoch.bags.size() << " bags (mode " << to_string(cfg.augment.mode)
            << ", beta " << compact_double(cfg.augment.beta) << ") to " << dir.string() << "\n";
}

const char* describe_category(PairCategory cat) {
  switch (cat) {
    case PairCategory::kCrossClass: return "two bags of different classes";
    case PairCategory::kAnyPair: return "any two distinct bags";
    case PairCategory::kSameClass0: return "two distinct bags of class 0";
    case PairCategory::kSameClass1: return "two distinct bags of class 1";
    case PairCategory::kWithinBag: return "two distinct patches of one bag";
  }
  return "?";
}

void run_distances(const std::string& dataset, std::size_t pairs, std::uint64_t seed,
                   const std::string& categories, const std::string& output) {
  const BagDataset ds = load_required_dataset(dataset, "distances");
  const fs::path dir = resolve_out(output);
  fs::create_directories(dir);

  std::vector<std::pair<PairCategory, DistanceSummary>> summary;
  for (std::size_t k = 0; k < categories.size(); ++k) {
    const std::string tag(1, categories[k]);
    const PairCategory cat = parse_pair_category(tag);
    // Independent stream per category so any subset reproduces the same values.
    RngStream rng(seed + static_cast<std::uint64_t>(cat));
    const auto values = sample_pair_distances(ds, cat, pairs, rng);

    std::ostringstream raw;
    raw << "# category " << tag << ": " << describe_category(cat) << "\n";
    raw << "cosine_distance\n";
    for (const double v : values) raw << compact_double(v) << "\n";
    write_text(dir / ("distances_" + tag + ".csv"), raw.str());

    summary.emplace_back(cat, summarize_distances(values));
  }
  write_text(dir / "summary.csv", distance_summary_csv(summary));
  std::cout << "wrote " << categories.size() << " raw files + summary.csv (" << pairs
            << " pairs each) to " << dir.string() << "\n";
}

struct MaskArgs {
  std::string image;
  std::size_t patch = 32;
  double coverage = kDefaultCoverageMin;
  unsigned green_threshold = kDefaultGreenThreshold;
  double entropy_min = 0.0;
  std::size_t entropy_window = kDefaultEntropyWindow;
  std::size_t n = 1024;
  std::uint64_t seed = 1;
  std::size_t scale = 8;
  std::size_t downsample = 1;
  std::string coords_out;
  std::string mask_out;
};

void run_mask(const MaskArgs& a) {
  RasterImage img = read_ppm(a.image);
  if (a.downsample > 1) img = downsample_box(img, a.downsample);

  const auto mask = tissue_mask(img, static_cast<std::uint8_t>(a.green_threshold));
  // The rule is off at entropy_min 0; skip the histogram pass entirely.
  const Matrix<double> ent =
      a.entropy_min > 0.0 ? entropy_map(img, a.entropy_window) : Matrix<double>(img.height, img.width);
  const PatchGrid grid = informative_grid(mask, ent, a.patch, a.coverage, a.entropy_min);
  RngStream rng(a.seed);
  const auto coords = sample_coords(grid, a.n, rng);

  const std::string stem = fs::path(a.image).stem().string();
  const fs::path coords_path =
      resolve_out(a.coords_out.empty() ? stem + "_coords.csv" : a.coords_out);
  const fs::path mask_path = resolve_out(a.mask_out.empty() ? stem + "_mask.ppm" : a.mask_out);

  std::ostringstream csv;
  csv << "x_downscaled,y_downscaled,x_full,y_full\n";
  for (const auto& [x, y] : coords) {
    csv << x << "," << y << "," << x * a.scale << "," << y * a.scale << "\n";
  }
  write_text(coords_path, csv.str());

  // Black background, gray tissue, white kept cells.
  RasterImage viz = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::uint8_t v = mask(y, x) ? 128 : 0;
      const auto at = 3 * (y * img.width + x);
      viz.pixels[at] = viz.pixels[at + 1] = viz.pixels[at + 2] = v;
    }
  }
  for (const auto& [cx, cy] : grid.coordinates) {
    for (std::size_t y = cy; y < cy + grid.patch_size; ++y) {
      for (std::size_t x = cx; x < cx + grid.patch_size; ++x) {
        const auto at = 3 * (y * img.width + x);
        viz.pixels[at] = viz.pixels[at + 1] = viz.pixels[at + 2] = 255;
      }
    }
  }
  if (mask_path.has_parent_path()) fs::create_directories(mask_path.parent_path());
  write_ppm(mask_path, viz);

  std::cout << "grid kept " << grid.coordinates.size() << " cells of " << a.patch << " px; wrote "
            << coords.size() << " coordinates to " << coords_path.string() << ", mask to "
            << mask_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-bag MIL toolkit: mixup augmentation, attention heads, experiments"};
  app.require_subcommand(1);
  app.footer("Relative output paths are created under $MILMIX_OUT_DIR when it is set.");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic bag dataset");
  SyntheticSpec spec;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synthetic_bags";
  synth->add_option("--classes", spec.classes, "number of classes");
  synth->add_option("--bags-per-class", spec.bags_per_class, "bags per class");
  synth->add_option("--patches-per-bag", spec.patches_per_bag, "patches per bag");
  synth->add_option("--dim", spec.dim, "descriptor dimension");
  synth->add_option("--signal-fraction", spec.signal_fraction,
                    "share of patches carrying the class signal, in [0,1]");
  synth->add_option("--class-separation", spec.class_separation, "centroid distance");
  synth->add_option("--patch-noise", spec.patch_noise, "patch noise scale");
  synth->add_option("--bag-offset-scale", spec.bag_offset_scale, "per-bag offset scale");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--output", synth_out, "dataset directory to create");
  synth->callback([&] { run_synth(spec, synth_seed, synth_out); });

  // train
  auto* train = app.add_subcommand("train", "single split + training run, writes a checkpoint");
  ConfigFlags train_flags;
  train_flags.attach(*train);
  train->callback([&] { run_train(train_flags); });

  // experiment
  auto* exp = app.add_subcommand("experiment", "repeated protocol, writes the results CSV");
  ConfigFlags exp_flags;
  exp_flags.attach(*exp);
  exp->callback([&] { run_experiment_cmd(exp_flags); });

  // augment
  auto* aug = app.add_subcommand("augment", "materialize one augmented epoch for inspection");
  ConfigFlags aug_flags;
  aug_flags.attach(*aug);
  aug->callback([&] { run_augment(aug_flags); });

  // distances
  auto* dist = app.add_subcommand("distances", "sample patch-pair cosine distances per category");
  std::string dist_dataset, dist_categories = "abcde", dist_out = "distances";
  std::size_t dist_pairs = 10000;
  std::uint64_t dist_seed = 1;
  dist->add_option("--dataset", dist_dataset, "bag dataset directory")->required();
  dist->add_option("--pairs", dist_pairs, "draws per category");
  dist->add_option("--seed", dist_seed, "sampling seed");
  dist->add_option("--categories", dist_categories,
                   "subset of 'abcde': a cross-class, b any, c class-0, d class-1, e within-bag");
  dist->add_option("--output", dist_out, "directory for the raw and summary CSVs");
  dist->callback(
      [&] { run_distances(dist_dataset, dist_pairs, dist_seed, dist_categories, dist_out); });

  // mask
  auto* mask = app.add_subcommand("mask", "informative-area grid + coordinate sampling on a PPM");
  MaskArgs mask_args;
  mask->add_option("--image", mask_args.image, "downscaled P6 PPM")
      ->required()
      ->check(CLI::ExistingFile);
  mask->add_option("--patch", mask_args.patch, "grid cell size in downscaled pixels");
  mask->add_option("--coverage", mask_args.coverage, "minimum tissue fraction per cell");
  mask->add_option("--green-threshold", mask_args.green_threshold,
                   "green values below this count as tissue");
  mask->add_option("--entropy-min", mask_args.entropy_min,
                   "minimum mean cell entropy in bits (0 disables the rule)");
  mask->add_option("--entropy-window", mask_args.entropy_window, "entropy histogram window");
  mask->add_option("--n", mask_args.n, "coordinates to sample");
  mask->add_option("--seed", mask_args.seed, "sampling seed");
  auto* scale_opt = mask->add_option("--scale", mask_args.scale,
                                     "full-resolution factor for the x_full/y_full columns");
  mask->add_option("--downsample", mask_args.downsample,
                   "box-downsample the input by this factor first (1 = as given)");
  mask->add_option("--output", mask_args.coords_out, "coordinates CSV path");
  mask->add_option("--mask-output", mask_args.mask_out, "mask PPM path");
  mask->callback([&] {
    // Downsampling here moves the coordinate frame; follow unless overridden.
    if (mask_args.downsample > 1 && scale_opt->count() == 0) {
      mask_args.scale = mask_args.downsample;
    }
    run_mask(mask_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "milmix: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
