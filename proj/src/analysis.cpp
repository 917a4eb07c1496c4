#include "milmix/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "milmix/config.hpp"
#include "milmix/errors.hpp"

namespace milmix {

PairCategory parse_pair_category(const std::string& tag) {
  if (tag == "a") return PairCategory::kCrossClass;
  if (tag == "b") return PairCategory::kAnyPair;
  if (tag == "c") return PairCategory::kSameClass0;
  if (tag == "d") return PairCategory::kSameClass1;
  if (tag == "e") return PairCategory::kWithinBag;
  throw ValidationError("unknown pair category '" + tag + "' (expected a..e)");
}

const char* to_string(PairCategory cat) {
  switch (cat) {
    case PairCategory::kCrossClass: return "a";
    case PairCategory::kAnyPair: return "b";
    case PairCategory::kSameClass0: return "c";
    case PairCategory::kSameClass1: return "d";
    case PairCategory::kWithinBag: return "e";
  }
  return "?";
}

double cosine_distance(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size()) throw ValidationError("cosine_distance: length mismatch");
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += static_cast<double>(x[i]) * y[i];
    nx += static_cast<double>(x[i]) * x[i];
    ny += static_cast<double>(y[i]) * y[i];
  }
  if (nx == 0.0 || ny == 0.0) throw ValidationError("cosine_distance: zero-norm input");
  return 1.0 - dot / (std::sqrt(nx) * std::sqrt(ny));
}

namespace {

std::vector<std::size_t> class_members(const BagDataset& ds, std::size_t cls) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const FeatureBag& bag = ds.bags[i];
    if (!is_one_hot(bag.label)) {
      throw ValidationError("distances: bag '" + bag.id + "' has a soft label");
    }
    if (argmax_index(bag.label) == cls) members.push_back(i);
  }
  return members;
}

/// Uniform index over [0, n) excluding `skip`.
std::size_t draw_other(RngStream& rng, std::size_t n, std::size_t skip) {
  const std::size_t v = rng.uniform_int(n - 1);
  return v + (v >= skip ? 1 : 0);
}

}  // namespace

std::vector<double> sample_pair_distances(const BagDataset& ds, PairCategory cat,
                                          std::size_t n, RngStream& rng) {
  validate_dataset(ds);
  const std::size_t bag_count = ds.bags.size();
  std::vector<double> out;
  out.reserve(n);

  auto one_patch = [&](const FeatureBag& bag) {
    return bag.features.row(rng.uniform_int(bag.patch_count()));
  };

  switch (cat) {
    case PairCategory::kCrossClass: {
      // Complement lists: for each class, the bags of every other class.
      std::vector<std::size_t> bag_class(bag_count);
      std::vector<std::size_t> counts(ds.class_names.size(), 0);
      for (std::size_t i = 0; i < bag_count; ++i) {
        if (!is_one_hot(ds.bags[i].label)) {
          throw ValidationError("distances: bag '" + ds.bags[i].id + "' has a soft label");
        }
        bag_class[i] = argmax_index(ds.bags[i].label);
        counts[bag_class[i]] += 1;
      }
      const std::size_t populated =
          static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                 [](std::size_t c) { return c > 0; }));
      if (populated < 2) {
        throw ValidationError("category a requires bags from at least two classes");
      }
      std::vector<std::vector<std::size_t>> complement(ds.class_names.size());
      for (std::size_t c = 0; c < complement.size(); ++c) {
        for (std::size_t i = 0; i < bag_count; ++i) {
          if (bag_class[i] != c) complement[c].push_back(i);
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t w = rng.uniform_int(bag_count);
        const auto& others = complement[bag_class[w]];
        const std::size_t v = others[rng.uniform_int(others.size())];
        const auto pw = one_patch(ds.bags[w]);
        const auto pv = one_patch(ds.bags[v]);
        out.push_back(cosine_distance(pw, pv));
      }
      break;
    }
    case PairCategory::kAnyPair: {
      if (bag_count < 2) throw ValidationError("category b requires at least two bags");
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t w = rng.uniform_int(bag_count);
        const std::size_t v = draw_other(rng, bag_count, w);
        const auto pw = one_patch(ds.bags[w]);
        const auto pv = one_patch(ds.bags[v]);
        out.push_back(cosine_distance(pw, pv));
      }
      break;
    }
    case PairCategory::kSameClass0:
    case PairCategory::kSameClass1: {
      const std::size_t cls = cat == PairCategory::kSameClass0 ? 0 : 1;
      if (cls >= ds.class_names.size()) {
        throw ValidationError(std::string("category ") + to_string(cat) + " requires class " +
                              std::to_string(cls) + " to exist");
      }
      const auto members = class_members(ds, cls);
      if (members.size() < 2) {
        throw ValidationError(std::string("category ") + to_string(cat) + " requires at least two bags of class " +
                              std::to_string(cls));
      }
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t wi = rng.uniform_int(members.size());
        const std::size_t vi = draw_other(rng, members.size(), wi);
        const auto pw = one_patch(ds.bags[members[wi]]);
        const auto pv = one_patch(ds.bags[members[vi]]);
        out.push_back(cosine_distance(pw, pv));
      }
      break;
    }
    case PairCategory::kWithinBag: {
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < bag_count; ++i) {
        if (ds.bags[i].patch_count() >= 2) eligible.push_back(i);
      }
      if (eligible.empty()) {
        throw ValidationError("category e requires a bag with at least two patches");
      }
      for (std::size_t k = 0; k < n; ++k) {
        const FeatureBag& bag = ds.bags[eligible[rng.uniform_int(eligible.size())]];
        const std::size_t i = rng.uniform_int(bag.patch_count());
        const std::size_t j = draw_other(rng, bag.patch_count(), i);
        out.push_back(cosine_distance(bag.features.row(i), bag.features.row(j)));
      }
      break;
    }
  }
  return out;
}

namespace {

/// Linear interpolation between order statistics of the sorted sample
/// (quantile type 7): h = (n-1)p.
double quantile7(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

DistanceSummary summarize_distances(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summarize_distances: empty value list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  DistanceSummary s;
  s.count = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile7(sorted, 0.25);
  s.median = quantile7(sorted, 0.5);
  s.q3 = quantile7(sorted, 0.75);
  const double iqr = s.q3 - s.q1;
  const double fence_low = s.q1 - 1.5 * iqr;
  const double fence_high = s.q3 + 1.5 * iqr;
  s.whisker_low = s.max;
  s.whisker_high = s.min;
  for (const double v : sorted) {
    if (v >= fence_low && v < s.whisker_low) s.whisker_low = v;
    if (v <= fence_high && v > s.whisker_high) s.whisker_high = v;
    if (v < fence_low || v > fence_high) s.outlier_count += 1;
  }
  return s;
}

std::string distance_summary_csv(
    const std::vector<std::pair<PairCategory, DistanceSummary>>& rows) {
  std::ostringstream out;
  out << "# cosine-distance summaries per pair category\n";
  out << "# quartiles: linear interpolation between order statistics (type 7)\n";
  out << "# whiskers: most extreme points within 1.5*IQR of the quartiles\n";
  out << "category,count,min,q1,median,q3,max,whisker_low,whisker_high,outlier_count\n";
  for (const auto& [cat, s] : rows) {
    out << to_string(cat) << "," << s.count << "," << compact_double(s.min) << ","
        << compact_double(s.q1) << "," << compact_double(s.median) << ","
        << compact_double(s.q3) << "," << compact_double(s.max) << ","
        << compact_double(s.whisker_low) << "," << compact_double(s.whisker_high) << ","
        << s.outlier_count << "\n";
  }
  return out.str();
}

}  // namespace milmix
