// pybind11 surface: bags and datasets cross as numpy arrays, enums cross as
// their canonical strings, and MilModel stays an opaque handle with
// predict/loss/save.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <string>
#include <vector>

#include "milmix/analysis.hpp"
#include "milmix/augment.hpp"
#include "milmix/checkpoint.hpp"
#include "milmix/codec.hpp"
#include "milmix/config.hpp"
#include "milmix/harness.hpp"
#include "milmix/synthetic.hpp"
#include "milmix/tilemask.hpp"

namespace py = pybind11;
using namespace milmix;

namespace {

template <typename T>
using c_array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Matrix<T> matrix_from(const c_array<T>& a, const char* what) {
  if (a.ndim() != 2) throw ValidationError(std::string(what) + " must be a 2-d array");
  Matrix<T> m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.data().data(), a.data(), sizeof(T) * m.size());
  return m;
}

template <typename T>
py::array_t<T> array_from(const Matrix<T>& m) {
  py::array_t<T> a({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::memcpy(a.mutable_data(), m.data().data(), sizeof(T) * m.size());
  return a;
}

template <typename T>
py::array_t<T> array_from(const std::vector<T>& v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::memcpy(a.mutable_data(), v.data(), sizeof(T) * v.size());
  return a;
}

RasterImage image_from(const c_array<std::uint8_t>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw ValidationError("image must be a (height, width, 3) uint8 array");
  }
  RasterImage img;
  img.height = static_cast<std::size_t>(a.shape(0));
  img.width = static_cast<std::size_t>(a.shape(1));
  img.pixels.resize(3 * img.width * img.height);
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

py::array_t<std::uint8_t> array_from(const RasterImage& img) {
  py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(img.height),
                               static_cast<py::ssize_t>(img.width), py::ssize_t{3}});
  std::memcpy(a.mutable_data(), img.pixels.data(), img.pixels.size());
  return a;
}

BagOrigin parse_origin(const std::string& text) {
  if (text == "real") return BagOrigin::kReal;
  if (text == "intra-mix") return BagOrigin::kIntraMix;
  if (text == "inter-mix") return BagOrigin::kInterMix;
  throw ValidationError("unknown bag origin '" + text + "'");
}

AugmentConfig make_augment(const std::string& mode, double beta) {
  AugmentConfig cfg;
  cfg.mode = parse_augment_mode(mode);
  cfg.beta = beta;
  return cfg;
}

std::vector<float> floats_from(const c_array<float>& a, const char* what) {
  if (a.ndim() != 1) throw ValidationError(std::string(what) + " must be a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

// Keeps the std::variant out of Python; everything that walks a trained model
// goes through these members.
struct PyModel {
  MilModel model;
};

struct PyTrainResult {
  PyModel model;
  std::vector<double> loss_history;
  std::size_t steps_per_epoch = 0;
};

py::array_t<std::size_t> coords_array(
    const std::vector<std::pair<std::size_t, std::size_t>>& coords) {
  py::array_t<std::size_t> a({static_cast<py::ssize_t>(coords.size()), py::ssize_t{2}});
  auto view = a.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < view.shape(0); ++i) {
    view(i, 0) = coords[static_cast<std::size_t>(i)].first;
    view(i, 1) = coords[static_cast<std::size_t>(i)].second;
  }
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Feature-bag MIL toolkit: mixup augmentation, attention heads, experiments";
  m.attr("rng_algorithm") = RngStream::kAlgorithmName;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<TruncationError>(m, "TruncationError", PyExc_ValueError);

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", &RngStream::uniform)
      .def("uniform_int", &RngStream::uniform_int, py::arg("n"))
      .def("normal", &RngStream::normal)
      .def("permutation", &RngStream::permutation, py::arg("n"))
      .def("next_u64", &RngStream::next_u64);

  py::class_<FeatureBag>(m, "FeatureBag")
      .def(py::init([](const std::string& id, const c_array<float>& label,
                       const c_array<float>& features, const std::string& origin) {
             FeatureBag bag;
             bag.id = id;
             bag.label = floats_from(label, "label");
             bag.features = matrix_from<float>(features, "features");
             bag.origin = parse_origin(origin);
             validate_bag(bag);
             return bag;
           }),
           py::arg("id"), py::arg("label"), py::arg("features"), py::arg("origin") = "real")
      .def_readwrite("id", &FeatureBag::id)
      .def_property(
          "label", [](const FeatureBag& b) { return array_from(b.label); },
          [](FeatureBag& b, const c_array<float>& a) { b.label = floats_from(a, "label"); })
      .def_property(
          "features", [](const FeatureBag& b) { return array_from(b.features); },
          [](FeatureBag& b, const c_array<float>& a) {
            b.features = matrix_from<float>(a, "features");
          })
      .def_property(
          "origin", [](const FeatureBag& b) { return std::string(to_string(b.origin)); },
          [](FeatureBag& b, const std::string& s) { b.origin = parse_origin(s); })
      .def_property_readonly("patch_count", &FeatureBag::patch_count)
      .def_property_readonly("dim", &FeatureBag::dim)
      .def_property_readonly("class_count", &FeatureBag::class_count)
      .def("__repr__", [](const FeatureBag& b) {
        return "FeatureBag('" + b.id + "', " + std::to_string(b.patch_count()) + "x" +
               std::to_string(b.dim()) + ")";
      });
  m.def("validate_bag", &validate_bag, py::arg("bag"));

  py::class_<BagDataset>(m, "BagDataset")
      .def(py::init<>())
      .def(py::init([](std::vector<FeatureBag> bags, std::vector<std::string> class_names,
                       std::size_t descriptor_dim) {
             BagDataset ds;
             ds.bags = std::move(bags);
             ds.class_names = std::move(class_names);
             ds.descriptor_dim = descriptor_dim;
             validate_dataset(ds);
             return ds;
           }),
           py::arg("bags"), py::arg("class_names"), py::arg("descriptor_dim"))
      .def_readwrite("bags", &BagDataset::bags)
      .def_readwrite("class_names", &BagDataset::class_names)
      .def_readwrite("descriptor_dim", &BagDataset::descriptor_dim)
      .def("__len__", [](const BagDataset& ds) { return ds.bags.size(); });
  m.def("validate_dataset", &validate_dataset, py::arg("dataset"));

  m.def("subsample_dataset", &subsample_dataset, py::arg("dataset"), py::arg("per_class"),
        py::arg("rng"));
  m.def("subsample_patches", &subsample_patches, py::arg("bag"), py::arg("patches"),
        py::arg("rng"));

  // dataset and bag files
  m.def("save_dataset", &save_dataset, py::arg("directory"), py::arg("dataset"));
  m.def("load_dataset", &load_dataset, py::arg("directory"));
  m.def("save_bag", &save_bag, py::arg("path"), py::arg("bag"));
  m.def("load_bag", &load_bag, py::arg("path"));
  m.def("import_patch_csv", &import_patch_csv, py::arg("path"));

  // synthetic data
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("classes", &SyntheticSpec::classes)
      .def_readwrite("bags_per_class", &SyntheticSpec::bags_per_class)
      .def_readwrite("patches_per_bag", &SyntheticSpec::patches_per_bag)
      .def_readwrite("dim", &SyntheticSpec::dim)
      .def_readwrite("signal_fraction", &SyntheticSpec::signal_fraction)
      .def_readwrite("class_separation", &SyntheticSpec::class_separation)
      .def_readwrite("patch_noise", &SyntheticSpec::patch_noise)
      .def_readwrite("bag_offset_scale", &SyntheticSpec::bag_offset_scale);
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("rng"));

  // augmentation
  m.def("shuffle_instances", &shuffle_instances, py::arg("bag"), py::arg("rng"));
  m.def("intra_mixup", &intra_mixup, py::arg("bag"), py::arg("multilinear"), py::arg("rng"));
  m.def(
      "apply_selective",
      [](const FeatureBag& bag, const std::string& mode, double beta, RngStream& rng) {
        return apply_selective(bag, make_augment(mode, beta), rng);
      },
      py::arg("bag"), py::arg("mode"), py::arg("beta"), py::arg("rng"));
  m.def("inter_mixup", &inter_mixup, py::arg("bag_w"), py::arg("bag_v"), py::arg("alpha"),
        py::arg("mix_labels"));
  m.def(
      "build_epoch_bags",
      [](const BagDataset& train, const std::string& mode, double beta, RngStream& rng) {
        return build_epoch_bags(train, make_augment(mode, beta), rng);
      },
      py::arg("train"), py::arg("mode"), py::arg("beta") = 0.5, py::arg("rng"));

  // experiment configuration
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("dataset", &ExperimentConfig::dataset)
      .def_property(
          "model", [](const ExperimentConfig& c) { return std::string(to_string(c.model)); },
          [](ExperimentConfig& c, const std::string& s) { c.model = parse_model_kind(s); })
      .def_property(
          "augment_mode",
          [](const ExperimentConfig& c) { return std::string(to_string(c.augment.mode)); },
          [](ExperimentConfig& c, const std::string& s) { c.augment.mode = parse_augment_mode(s); })
      .def_property(
          "augment_beta", [](const ExperimentConfig& c) { return c.augment.beta; },
          [](ExperimentConfig& c, double b) { c.augment.beta = b; })
      .def_readwrite("epochs", &ExperimentConfig::epochs)
      .def_readwrite("lr", &ExperimentConfig::lr)
      .def_readwrite("repeats", &ExperimentConfig::repeats)
      .def_readwrite("train_fraction", &ExperimentConfig::train_fraction)
      .def_readwrite("base_seed", &ExperimentConfig::base_seed)
      .def_readwrite("bags_per_class", &ExperimentConfig::bags_per_class)
      .def_readwrite("patches_per_bag", &ExperimentConfig::patches_per_bag)
      .def_readwrite("output", &ExperimentConfig::output);
  m.def("validate_config", &validate_config, py::arg("config"));
  m.def("config_text", &config_text, py::arg("config"));
  m.def("parse_config", &parse_config, py::arg("text"));

  // models
  py::class_<Prediction>(m, "Prediction")
      .def_readonly("class_index", &Prediction::class_index)
      .def_readonly("probability", &Prediction::probability);

  py::class_<PyModel>(m, "Model")
      .def_property_readonly(
          "kind", [](const PyModel& p) { return std::string(to_string(kind_of(p.model))); })
      .def("predict", [](const PyModel& p, const FeatureBag& bag) { return predict(p.model, bag); },
           py::arg("bag"))
      .def("loss", [](const PyModel& p, const FeatureBag& bag) { return mil_loss(p.model, bag); },
           py::arg("bag"))
      .def("save", [](const PyModel& p, const std::string& path) { save_model(p.model, path); },
           py::arg("path"));
  m.def("load_model", [](const std::string& path) { return PyModel{load_model(path)}; },
        py::arg("path"));
  m.def(
      "init_model",
      [](const std::string& kind, std::size_t dim, std::size_t classes, RngStream& rng) {
        return PyModel{init_model(parse_model_kind(kind), dim, classes, rng)};
      },
      py::arg("kind"), py::arg("dim"), py::arg("classes"), py::arg("rng"));

  // harness
  py::class_<PyTrainResult>(m, "TrainResult")
      .def_readonly("model", &PyTrainResult::model)
      .def_readonly("loss_history", &PyTrainResult::loss_history)
      .def_readonly("steps_per_epoch", &PyTrainResult::steps_per_epoch);

  py::class_<Evaluation>(m, "Evaluation")
      .def_readonly("accuracy", &Evaluation::accuracy)
      .def_readonly("class_accuracy", &Evaluation::class_accuracy)
      .def_property_readonly("confusion",
                             [](const Evaluation& e) { return array_from(e.confusion); });

  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("repeat", &ResultRow::repeat)
      .def_readonly("seed", &ResultRow::seed)
      .def_readonly("accuracy", &ResultRow::accuracy)
      .def_readonly("class_accuracy", &ResultRow::class_accuracy)
      .def_readonly("train_size", &ResultRow::train_size)
      .def_readonly("test_size", &ResultRow::test_size);

  py::class_<ExperimentResult>(m, "ExperimentResult")
      .def_readonly("rows", &ExperimentResult::rows)
      .def_readonly("mean_accuracy", &ExperimentResult::mean_accuracy)
      .def_readonly("std_accuracy", &ExperimentResult::std_accuracy);

  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("fraction"), py::arg("rng"));
  m.def(
      "train_model",
      [](const std::string& kind, const BagDataset& train, const ExperimentConfig& cfg,
         RngStream& rng) {
        TrainResult r = train_model(parse_model_kind(kind), train, cfg, rng);
        return PyTrainResult{PyModel{std::move(r.model)}, std::move(r.loss_history),
                             r.steps_per_epoch};
      },
      py::arg("kind"), py::arg("train"), py::arg("config"), py::arg("rng"));
  m.def("evaluate", [](const PyModel& p, const BagDataset& test) { return evaluate(p.model, test); },
        py::arg("model"), py::arg("test"));
  m.def("run_experiment", &run_experiment, py::arg("dataset"), py::arg("config"));
  m.def("results_csv_text", &results_csv_text, py::arg("result"), py::arg("config"));

  // descriptor distances
  py::class_<DistanceSummary>(m, "DistanceSummary")
      .def_readonly("count", &DistanceSummary::count)
      .def_readonly("min", &DistanceSummary::min)
      .def_readonly("q1", &DistanceSummary::q1)
      .def_readonly("median", &DistanceSummary::median)
      .def_readonly("q3", &DistanceSummary::q3)
      .def_readonly("max", &DistanceSummary::max)
      .def_readonly("whisker_low", &DistanceSummary::whisker_low)
      .def_readonly("whisker_high", &DistanceSummary::whisker_high)
      .def_readonly("outlier_count", &DistanceSummary::outlier_count);

  m.def(
      "cosine_distance",
      [](const c_array<float>& x, const c_array<float>& y) {
        const auto xv = floats_from(x, "x");
        const auto yv = floats_from(y, "y");
        return cosine_distance(xv, yv);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "sample_pair_distances",
      [](const BagDataset& ds, const std::string& category, std::size_t n, RngStream& rng) {
        return array_from(sample_pair_distances(ds, parse_pair_category(category), n, rng));
      },
      py::arg("dataset"), py::arg("category"), py::arg("n"), py::arg("rng"));
  m.def(
      "summarize_distances",
      [](const c_array<double>& values) {
        if (values.ndim() != 1) throw ValidationError("values must be a 1-d array");
        return summarize_distances(
            std::span<const double>(values.data(), static_cast<std::size_t>(values.shape(0))));
      },
      py::arg("values"));

  // informative-area masking
  py::class_<PatchGrid>(m, "PatchGrid")
      .def_readonly("patch_size", &PatchGrid::patch_size)
      .def_property_readonly("coordinates",
                             [](const PatchGrid& g) { return coords_array(g.coordinates); })
      .def_property_readonly("coverage", [](const PatchGrid& g) { return array_from(g.coverage); })
      .def("__len__", [](const PatchGrid& g) { return g.coordinates.size(); });

  m.def("read_ppm", [](const std::filesystem::path& p) { return array_from(read_ppm(p)); },
        py::arg("path"));
  m.def(
      "write_ppm",
      [](const std::filesystem::path& p, const c_array<std::uint8_t>& img) {
        write_ppm(p, image_from(img));
      },
      py::arg("path"), py::arg("image"));
  m.def(
      "downsample_box",
      [](const c_array<std::uint8_t>& img, std::size_t factor) {
        return array_from(downsample_box(image_from(img), factor));
      },
      py::arg("image"), py::arg("factor"));
  m.def(
      "tissue_mask",
      [](const c_array<std::uint8_t>& img, std::uint8_t threshold) {
        return array_from(tissue_mask(image_from(img), threshold));
      },
      py::arg("image"), py::arg("green_threshold") = kDefaultGreenThreshold);
  m.def(
      "entropy_map",
      [](const c_array<std::uint8_t>& img, std::size_t window) {
        return array_from(entropy_map(image_from(img), window));
      },
      py::arg("image"), py::arg("window") = kDefaultEntropyWindow);
  m.def(
      "informative_grid",
      [](const c_array<std::uint8_t>& mask, std::size_t patch_size, double coverage_min,
         double entropy_min, const py::object& entropy) {
        const auto mask_m = matrix_from<std::uint8_t>(mask, "mask");
        Matrix<double> ent_m(mask_m.rows(), mask_m.cols());
        if (!entropy.is_none()) {
          ent_m = matrix_from<double>(entropy.cast<c_array<double>>(), "entropy");
        }
        return informative_grid(mask_m, ent_m, patch_size, coverage_min, entropy_min);
      },
      py::arg("mask"), py::arg("patch_size"), py::arg("coverage_min") = kDefaultCoverageMin,
      py::arg("entropy_min") = 0.0, py::arg("entropy") = py::none());
  m.def(
      "sample_coords",
      [](const PatchGrid& grid, std::size_t n, RngStream& rng) {
        return coords_array(sample_coords(grid, n, rng));
      },
      py::arg("grid"), py::arg("n"), py::arg("rng"));
}
