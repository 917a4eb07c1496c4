#include "milmix/harness.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "milmix/augment.hpp"
#include "milmix/errors.hpp"
#include "milmix/rng.hpp"

namespace milmix {

std::pair<BagDataset, BagDataset> split_dataset(const BagDataset& ds, double fraction,
                                                RngStream& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("split: fraction must lie strictly between 0 and 1");
  }
  const std::size_t classes = ds.class_names.size();
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const FeatureBag& bag = ds.bags[i];
    if (!is_one_hot(bag.label)) {
      throw ValidationError("split: bag '" + bag.id + "' has a soft label");
    }
    by_class[argmax_index(bag.label)].push_back(i);
  }

  std::vector<bool> to_train(ds.bags.size(), false);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& members = by_class[c];
    if (members.size() < 2) {
      throw ValidationError("split: class '" + ds.class_names[c] + "' has " +
                            std::to_string(members.size()) + " bags, need at least 2");
    }
    const auto take = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(members.size())));
    const auto perm = rng.permutation(members.size());
    for (std::size_t k = 0; k < take; ++k) to_train[members[perm[k]]] = true;
  }

  BagDataset train, test;
  train.class_names = test.class_names = ds.class_names;
  train.descriptor_dim = test.descriptor_dim = ds.descriptor_dim;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    (to_train[i] ? train : test).bags.push_back(ds.bags[i]);
  }
  return {std::move(train), std::move(test)};
}

TrainResult train_model(ModelKind kind, const BagDataset& train, const ExperimentConfig& cfg,
                        RngStream& rng) {
  if (train.bags.empty()) throw ValidationError("train: empty training set");
  validate_config(cfg);
  const std::size_t classes = train.bags.front().class_count();

  TrainResult result;
  result.model = init_model(kind, train.descriptor_dim, classes, rng);
  result.steps_per_epoch = train.bags.size();

  MilModel grads = result.model;  // same shape; zeroed by the backward pass
  AdamState adam;
  adam.lr = cfg.lr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto bags = build_epoch_bags(train, cfg.augment, rng);
    const auto order = rng.permutation(bags.size());
    double epoch_loss = 0.0;
    for (const std::size_t idx : order) {
      const FeatureBag& bag = bags[idx];
      const double loss = mil_loss_and_grads(result.model, bag, &grads);
      if (!std::isfinite(loss)) {
        throw ValidationError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              ", bag '" + bag.id + "'");
      }
      epoch_loss += loss;
      std::visit(
          [&](auto& m) {
            auto& g = std::get<std::decay_t<decltype(m)>>(grads);
            adam_update(param_spans(m), param_spans(std::as_const(g)), adam);
          },
          result.model);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(bags.size()));
  }
  return result;
}

Evaluation evaluate(const MilModel& model, const BagDataset& test) {
  if (test.bags.empty()) throw ValidationError("evaluate: empty test set");
  const std::size_t classes = test.class_names.size();

  Evaluation ev;
  ev.confusion = Matrix<std::size_t>(classes, classes);
  std::size_t correct = 0;
  for (const FeatureBag& bag : test.bags) {
    if (!is_one_hot(bag.label)) {
      throw ValidationError("evaluate: test bag '" + bag.id + "' has a soft label");
    }
    const std::size_t truth = argmax_index(bag.label);
    const std::size_t guess = predict(model, bag).class_index;
    ev.confusion(truth, guess) += 1;
    if (truth == guess) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(test.bags.size());
  ev.class_accuracy.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t total = 0;
    for (std::size_t p = 0; p < classes; ++p) total += ev.confusion(c, p);
    ev.class_accuracy[c] = static_cast<double>(ev.confusion(c, c)) /
                           static_cast<double>(std::max<std::size_t>(1, total));
  }
  return ev;
}

ExperimentResult run_experiment(const BagDataset& ds, const ExperimentConfig& cfg) {
  validate_config(cfg);
  validate_dataset(ds);

  ExperimentResult result;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.base_seed + r;
    try {
      RngStream rng(seed);
      BagDataset working = ds;
      if (cfg.bags_per_class > 0) working = subsample_dataset(working, cfg.bags_per_class, rng);
      if (cfg.patches_per_bag > 0) {
        for (auto& bag : working.bags) bag = subsample_patches(bag, cfg.patches_per_bag, rng);
      }
      auto [train, test] = split_dataset(working, cfg.train_fraction, rng);
      const TrainResult trained = train_model(cfg.model, train, cfg, rng);
      const Evaluation ev = evaluate(trained.model, test);

      ResultRow row;
      row.repeat = r;
      row.seed = seed;
      row.accuracy = ev.accuracy;
      row.class_accuracy = ev.class_accuracy;
      row.train_size = train.bags.size();
      row.test_size = test.bags.size();
      result.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw std::runtime_error("repeat " + std::to_string(r) + ": " + e.what());
    }
  }

  double mean = 0.0;
  for (const auto& row : result.rows) mean += row.accuracy;
  mean /= static_cast<double>(result.rows.size());
  double var = 0.0;
  for (const auto& row : result.rows) {
    const double d = row.accuracy - mean;
    var += d * d;
  }
  result.mean_accuracy = mean;
  result.std_accuracy =
      result.rows.size() > 1 ? std::sqrt(var / static_cast<double>(result.rows.size() - 1)) : 0.0;
  return result;
}

std::string results_csv_text(const ExperimentResult& result, const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "# experiment results\n";
  out << "# rng: " << RngStream::kAlgorithmName << "\n";
  out << "# split: stratified per class, train count = round(fraction * class size)\n";
  out << "# std: sample standard deviation (n-1 denominator)\n";
  out << "# config:\n";
  std::istringstream cfg_lines(config_text(cfg));
  std::string line;
  while (std::getline(cfg_lines, line)) out << "#   " << line << "\n";

  const std::size_t classes = result.rows.empty() ? 0 : result.rows.front().class_accuracy.size();
  out << "repeat,seed,accuracy";
  for (std::size_t c = 0; c < classes; ++c) out << ",acc_class_" << c;
  out << ",train_size,test_size\n";
  for (const auto& row : result.rows) {
    out << row.repeat << "," << row.seed << "," << compact_double(row.accuracy);
    for (const double a : row.class_accuracy) out << "," << compact_double(a);
    out << "," << row.train_size << "," << row.test_size << "\n";
  }
  out << "# summary: repeats=" << result.rows.size()
      << " mean_accuracy=" << compact_double(result.mean_accuracy)
      << " std_accuracy=" << compact_double(result.std_accuracy) << "\n";
  return out.str();
}

}  // namespace milmix
