#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "milmix/analysis.hpp"
#include "milmix/errors.hpp"
#include "milmix/synthetic.hpp"
#include "replay_rng.hpp"

using namespace milmix;

namespace {

FeatureBag direction_bag(std::string id, std::size_t cls, std::size_t classes,
                         std::vector<std::vector<float>> rows) {
  FeatureBag bag;
  bag.id = std::move(id);
  bag.label.assign(classes, 0.0f);
  bag.label[cls] = 1.0f;
  bag.features = Matrix<float>(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), bag.features.row(i).begin());
  }
  return bag;
}

// Class 0 bags point along x, class 1 bags along y, so every pair category
// has a known exact distance.
BagDataset axis_dataset(std::size_t per_class, std::size_t patches) {
  BagDataset ds;
  ds.class_names = {"neg", "pos"};
  ds.descriptor_dim = 2;
  for (std::size_t i = 0; i < per_class; ++i) {
    std::vector<std::vector<float>> rows0(patches, {1.0f, 0.0f});
    std::vector<std::vector<float>> rows1(patches, {0.0f, 1.0f});
    ds.bags.push_back(direction_bag("n" + std::to_string(i), 0, 2, std::move(rows0)));
    ds.bags.push_back(direction_bag("p" + std::to_string(i), 1, 2, std::move(rows1)));
  }
  return ds;
}

}  // namespace

TEST_SUITE("cosine distance") {
  TEST_CASE("hand-checked values") {
    const std::vector<float> ex{1.0f, 0.0f};
    const std::vector<float> ey{0.0f, 1.0f};
    const std::vector<float> diag{1.0f, 1.0f};
    const std::vector<float> ex2{2.0f, 0.0f};
    const std::vector<float> neg{-1.0f, 0.0f};
    CHECK(cosine_distance(ex, ey) == 1.0);
    CHECK(cosine_distance(ex, ex2) == 0.0);
    CHECK(cosine_distance(ex, diag) ==
          doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(cosine_distance(ex, neg) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("symmetry and scale invariance") {
    RngStream rng(110);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<float> x(3), y(3);
      for (auto& v : x) v = static_cast<float>(rng.uniform() * 4.0 - 2.0);
      for (auto& v : y) v = static_cast<float>(rng.uniform() * 4.0 - 2.0);
      if (std::all_of(x.begin(), x.end(), [](float v) { return v == 0.0f; })) continue;
      if (std::all_of(y.begin(), y.end(), [](float v) { return v == 0.0f; })) continue;
      const double d = cosine_distance(x, y);
      REQUIRE(d >= 0.0);
      REQUIRE(d <= 2.0);
      REQUIRE(cosine_distance(y, x) == d);
      // A power-of-two scale leaves every f32 component exact, so the
      // distance must not move at all.
      auto scaled = x;
      for (auto& v : scaled) v *= 4.0f;
      REQUIRE(cosine_distance(scaled, y) == d);
    }
  }

  TEST_CASE("zero norms and length mismatches are rejected") {
    const std::vector<float> zero{0.0f, 0.0f};
    const std::vector<float> ex{1.0f, 0.0f};
    const std::vector<float> three{1.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS(cosine_distance(zero, ex), ValidationError);
    CHECK_THROWS_AS(cosine_distance(ex, zero), ValidationError);
    CHECK_THROWS_AS(cosine_distance(ex, three), ValidationError);
  }
}

TEST_SUITE("distance summaries") {
  TEST_CASE("five numbers of 1..5") {
    const std::vector<double> values{3.0, 1.0, 5.0, 2.0, 4.0};  // unsorted on purpose
    const auto s = summarize_distances(values);
    CHECK(s.count == 5);
    CHECK(s.min == 1.0);
    CHECK(s.q1 == 2.0);
    CHECK(s.median == 3.0);
    CHECK(s.q3 == 4.0);
    CHECK(s.max == 5.0);
    CHECK(s.whisker_low == 1.0);
    CHECK(s.whisker_high == 5.0);
    CHECK(s.outlier_count == 0);
  }

  TEST_CASE("a lone extreme value is an outlier") {
    const std::vector<double> values{1.0, 1.0, 1.0, 1.0, 100.0};
    const auto s = summarize_distances(values);
    CHECK(s.q1 == 1.0);
    CHECK(s.median == 1.0);
    CHECK(s.q3 == 1.0);
    CHECK(s.outlier_count == 1);
    CHECK(s.whisker_low == 1.0);
    CHECK(s.whisker_high == 1.0);  // whiskers exclude the outlier
    CHECK(s.max == 100.0);
  }

  TEST_CASE("even counts interpolate between order statistics") {
    const std::vector<double> values{2.0, 4.0};
    const auto s = summarize_distances(values);
    CHECK(s.q1 == 2.5);  // h = (n-1)p = 0.25 -> 2 + 0.25 * (4-2)
    CHECK(s.median == 3.0);
    CHECK(s.q3 == 3.5);
  }

  TEST_CASE("constant and single-element lists") {
    const std::vector<double> constant(7, 0.25);
    const auto c = summarize_distances(constant);
    CHECK(c.min == 0.25);
    CHECK(c.q3 == 0.25);
    CHECK(c.outlier_count == 0);

    const std::vector<double> one{0.7};
    const auto s = summarize_distances(one);
    CHECK(s.min == 0.7);
    CHECK(s.q1 == 0.7);
    CHECK(s.median == 0.7);
    CHECK(s.q3 == 0.7);
    CHECK(s.max == 0.7);
    CHECK(s.whisker_low == 0.7);
    CHECK(s.whisker_high == 0.7);
  }

  TEST_CASE("empty lists are rejected") {
    CHECK_THROWS_AS(summarize_distances(std::vector<double>{}), ValidationError);
  }
}

TEST_SUITE("pair categories") {
  TEST_CASE("tags round trip") {
    for (const char* tag : {"a", "b", "c", "d", "e"}) {
      CHECK(std::string(to_string(parse_pair_category(tag))) == tag);
    }
    CHECK_THROWS_AS(parse_pair_category("f"), ValidationError);
    CHECK_THROWS_AS(parse_pair_category(""), ValidationError);
  }

  TEST_CASE("axis-aligned classes give exact distances per category") {
    const auto ds = axis_dataset(3, 4);
    RngStream rng(111);
    for (const double d : sample_pair_distances(ds, PairCategory::kCrossClass, 500, rng)) {
      REQUIRE(d == 1.0);
    }
    for (const double d : sample_pair_distances(ds, PairCategory::kSameClass0, 500, rng)) {
      REQUIRE(d == 0.0);
    }
    for (const double d : sample_pair_distances(ds, PairCategory::kSameClass1, 500, rng)) {
      REQUIRE(d == 0.0);
    }
    for (const double d : sample_pair_distances(ds, PairCategory::kWithinBag, 500, rng)) {
      REQUIRE(d == 0.0);
    }
    // Any-pair draws mix both populations.
    const auto mixed = sample_pair_distances(ds, PairCategory::kAnyPair, 500, rng);
    CHECK(std::count(mixed.begin(), mixed.end(), 1.0) > 0);
    CHECK(std::count(mixed.begin(), mixed.end(), 0.0) > 0);
  }

  TEST_CASE("within-bag draws never reuse a patch index") {
    // Two orthogonal patches: a repeated index would yield distance 0.
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 2;
    ds.bags.push_back(direction_bag("b", 0, 2, {{1.0f, 0.0f}, {0.0f, 1.0f}}));
    ds.bags.push_back(direction_bag("c", 1, 2, {{1.0f, 0.0f}, {0.0f, 1.0f}}));
    RngStream rng(112);
    for (const double d : sample_pair_distances(ds, PairCategory::kWithinBag, 2000, rng)) {
      REQUIRE(d == 1.0);
    }
  }

  TEST_CASE("within-bag skips single-patch bags") {
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 2;
    ds.bags.push_back(direction_bag("single", 0, 2, {{5.0f, 5.0f}}));
    ds.bags.push_back(direction_bag("pair", 1, 2, {{1.0f, 0.0f}, {0.0f, 1.0f}}));
    RngStream rng(113);
    for (const double d : sample_pair_distances(ds, PairCategory::kWithinBag, 300, rng)) {
      REQUIRE(d == 1.0);  // only the two-patch bag is eligible
    }
  }

  TEST_CASE("the documented draw order replays exactly") {
    RngStream gen(114);
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 3;
    for (std::size_t i = 0; i < 6; ++i) {
      std::vector<std::vector<float>> rows(2 + i % 3, std::vector<float>(3));
      for (auto& row : rows) {
        for (auto& v : row) v = static_cast<float>(gen.uniform() + 0.1);
      }
      ds.bags.push_back(direction_bag("b" + std::to_string(i), i % 2, 2, std::move(rows)));
    }

    const std::uint64_t seed = 115;
    RngStream rng(seed);
    const auto got = sample_pair_distances(ds, PairCategory::kAnyPair, 50, rng);

    auto st = oracle::seeded(seed);
    for (std::size_t k = 0; k < 50; ++k) {
      const auto w = static_cast<std::size_t>(oracle::bounded(st, ds.bags.size()));
      auto v = static_cast<std::size_t>(oracle::bounded(st, ds.bags.size() - 1));
      if (v >= w) ++v;  // index-shift keeps the pair distinct without rejection
      const auto pw = static_cast<std::size_t>(oracle::bounded(st, ds.bags[w].patch_count()));
      const auto pv = static_cast<std::size_t>(oracle::bounded(st, ds.bags[v].patch_count()));
      const double want =
          cosine_distance(ds.bags[w].features.row(pw), ds.bags[v].features.row(pv));
      REQUIRE(got[k] == want);
    }
  }

  TEST_CASE("unsatisfiable categories name the constraint") {
    BagDataset single_class;
    single_class.class_names = {"neg", "pos"};
    single_class.descriptor_dim = 2;
    single_class.bags.push_back(direction_bag("a0", 0, 2, {{1.0f, 0.0f}}));
    single_class.bags.push_back(direction_bag("a1", 0, 2, {{1.0f, 0.0f}}));
    RngStream rng(116);
    try {
      sample_pair_distances(single_class, PairCategory::kCrossClass, 10, rng);
      FAIL("expected category a to be unsatisfiable");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("two classes") != std::string::npos);
    }
    // Class 1 has no members at all -> d is unsatisfiable.
    CHECK_THROWS_AS(sample_pair_distances(single_class, PairCategory::kSameClass1, 10, rng),
                    ValidationError);
    // Class 0 needs two bags for c; one is not enough.
    BagDataset thin;
    thin.class_names = {"neg", "pos"};
    thin.descriptor_dim = 2;
    thin.bags.push_back(direction_bag("a0", 0, 2, {{1.0f, 0.0f}}));
    thin.bags.push_back(direction_bag("p0", 1, 2, {{0.0f, 1.0f}}));
    CHECK_THROWS_AS(sample_pair_distances(thin, PairCategory::kSameClass0, 10, rng),
                    ValidationError);
    // Two bags are enough for b even when each class has only one.
    CHECK_NOTHROW(sample_pair_distances(thin, PairCategory::kAnyPair, 10, rng));
  }

  TEST_CASE("single-bag and single-patch datasets") {
    BagDataset one_bag;
    one_bag.class_names = {"neg", "pos"};
    one_bag.descriptor_dim = 2;
    one_bag.bags.push_back(direction_bag("only", 0, 2, {{1.0f, 0.0f}}));
    RngStream rng(117);
    CHECK_THROWS_AS(sample_pair_distances(one_bag, PairCategory::kAnyPair, 10, rng),
                    ValidationError);
    try {
      sample_pair_distances(one_bag, PairCategory::kWithinBag, 10, rng);
      FAIL("expected category e to be unsatisfiable");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("two patches") != std::string::npos);
    }
  }

  TEST_CASE("soft labels are rejected for class-based categories") {
    auto ds = axis_dataset(2, 2);
    ds.bags[1].label = {0.5f, 0.5f};
    RngStream rng(118);
    try {
      sample_pair_distances(ds, PairCategory::kCrossClass, 10, rng);
      FAIL("expected the soft label to be rejected");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(ds.bags[1].id) != std::string::npos);
    }
  }

  TEST_CASE("bag offsets push within-bag pairs closer than cross-bag pairs") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.bags_per_class = 10;
    spec.patches_per_bag = 16;
    spec.dim = 8;
    spec.signal_fraction = 1.0;
    spec.class_separation = 0.0;
    spec.patch_noise = 1.0;
    spec.bag_offset_scale = 2.0;
    RngStream gen(119);
    const auto ds = generate_synthetic(spec, gen);
    RngStream rng(120);
    const auto within = sample_pair_distances(ds, PairCategory::kWithinBag, 2000, rng);
    const auto across = sample_pair_distances(ds, PairCategory::kAnyPair, 2000, rng);
    CHECK(summarize_distances(within).median < summarize_distances(across).median);
  }
}

TEST_SUITE("distance report") {
  TEST_CASE("rows follow the categories and the header states conventions") {
    const auto ds = axis_dataset(3, 3);
    RngStream rng(121);
    std::vector<std::pair<PairCategory, DistanceSummary>> rows;
    for (const auto cat : {PairCategory::kCrossClass, PairCategory::kAnyPair,
                           PairCategory::kSameClass0, PairCategory::kSameClass1,
                           PairCategory::kWithinBag}) {
      rows.emplace_back(cat, summarize_distances(sample_pair_distances(ds, cat, 100, rng)));
    }
    const auto text = distance_summary_csv(rows);
    CHECK(text.find("type 7") != std::string::npos);
    CHECK(text.find("1.5*IQR") != std::string::npos);
    CHECK(text.find("category,count,min,q1,median,q3,max,whisker_low,whisker_high,"
                    "outlier_count") != std::string::npos);
    CHECK(text.find("\na,100,") != std::string::npos);
    CHECK(text.find("\ne,100,0,") != std::string::npos);  // all-zero within-bag distances
  }
}
