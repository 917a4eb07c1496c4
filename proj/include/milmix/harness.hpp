#ifndef MILMIX_HARNESS_HPP
#define MILMIX_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "milmix/bag.hpp"
#include "milmix/config.hpp"
#include "milmix/models.hpp"

namespace milmix {

/// One repeat's scores.
struct ResultRow {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::vector<double> class_accuracy;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std, n-1 denominator
};

struct TrainResult {
  MilModel model;
  std::vector<double> loss_history;  // mean loss per epoch
  std::size_t steps_per_epoch = 0;
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> class_accuracy;      // correct_c / max(1, count_c)
  Matrix<std::size_t> confusion;           // true class x predicted class
};

/// Stratified split: per class, train count = lround(fraction * n_c),
/// selection uniform, remainder to test. Bags keep dataset order within each
/// side. Classes need one-hot labels and at least 2 members.
std::pair<BagDataset, BagDataset> split_dataset(const BagDataset& ds, double fraction,
                                                RngStream& rng);

/// Runs cfg.epochs passes: rebuild the epoch's bags via the augment pipeline,
/// visit them in a fresh random order, one Adam step per bag. Aborts with
/// epoch and bag id when a loss goes non-finite.
TrainResult train_model(ModelKind kind, const BagDataset& train, const ExperimentConfig& cfg,
                        RngStream& rng);

/// Accuracy plus a class-by-class confusion matrix. Test labels must be
/// one-hot (ground truth classes).
Evaluation evaluate(const MilModel& model, const BagDataset& test);

/// Full protocol: repeats x (subsample -> split -> train -> evaluate), seeds
/// base_seed + r. Stage failures are rethrown with the repeat index attached.
ExperimentResult run_experiment(const BagDataset& ds, const ExperimentConfig& cfg);

/// Rows + summary as CSV. Header comments record the RNG, the std convention
/// and the full config; the summary appears as trailing '#' rows.
std::string results_csv_text(const ExperimentResult& result, const ExperimentConfig& cfg);

}  // namespace milmix

#endif  // MILMIX_HARNESS_HPP
