#ifndef MILMIX_ANALYSIS_HPP
#define MILMIX_ANALYSIS_HPP

#include <span>
#include <string>
#include <vector>

#include "milmix/bag.hpp"
#include "milmix/rng.hpp"

namespace milmix {

/// Patch-pair populations for the descriptor-distance study.
///   a  two bags of different classes
///   b  any two distinct bags
///   c  two distinct bags, both class 0
///   d  two distinct bags, both class 1
///   e  one bag, two distinct patch indices
enum class PairCategory { kCrossClass, kAnyPair, kSameClass0, kSameClass1, kWithinBag };

PairCategory parse_pair_category(const std::string& tag);  // "a".."e"
const char* to_string(PairCategory cat);

struct DistanceSummary {
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;   // most extreme points within 1.5*IQR of the box
  double whisker_high = 0.0;
  std::size_t outlier_count = 0;
};

/// 1 - x.y / (|x| |y|), in [0, 2]. Zero-norm inputs are rejected.
double cosine_distance(std::span<const float> x, std::span<const float> y);

/// n independent draws of the category's patch-pair distance. Per draw the
/// bags come first, then the patches:
///   a: w uniform over all bags, v uniform over bags of another class
///   b: w uniform, v uniform over the other bags
///   c/d: both uniform over the class's bags, distinct
///   e: bag uniform over bags with >= 2 patches
/// then patch_w = uniform_int(P_w), patch_v = uniform_int(P_v); category e
/// draws i = uniform_int(P) and j over the remaining P-1 indices.
/// Unsatisfiable categories throw ValidationError naming the constraint.
std::vector<double> sample_pair_distances(const BagDataset& ds, PairCategory cat,
                                          std::size_t n, RngStream& rng);

/// Five-number summary plus 1.5*IQR whiskers. Quartiles use linear
/// interpolation between order statistics (the type-7 convention).
DistanceSummary summarize_distances(std::span<const double> values);

/// One row per category with the DistanceSummary fields; the header records
/// the quartile convention.
std::string distance_summary_csv(const std::vector<std::pair<PairCategory, DistanceSummary>>& rows);

}  // namespace milmix

#endif  // MILMIX_ANALYSIS_HPP
