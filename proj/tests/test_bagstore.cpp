#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "milmix/codec.hpp"
#include "milmix/errors.hpp"
#include "milmix/synthetic.hpp"

using namespace milmix;

namespace {

FeatureBag make_bag(std::string id, std::vector<float> label, std::size_t patches,
                    std::size_t dim, RngStream& rng) {
  FeatureBag bag;
  bag.id = std::move(id);
  bag.label = std::move(label);
  bag.origin = is_one_hot(bag.label) ? BagOrigin::kReal : BagOrigin::kInterMix;
  bag.features = Matrix<float>(patches, dim);
  for (auto& v : bag.features.data()) {
    v = static_cast<float>(rng.uniform() * 20.0 - 10.0);
  }
  return bag;
}

std::vector<float> random_label(std::size_t classes, RngStream& rng) {
  std::vector<float> label(classes, 0.0f);
  if (rng.uniform() < 0.5) {
    label[rng.uniform_int(classes)] = 1.0f;
    return label;
  }
  float total = 0.0f;
  for (auto& v : label) {
    v = static_cast<float>(rng.uniform() + 0.05);
    total += v;
  }
  for (auto& v : label) v /= total;
  // Renormalize the largest entry so the float sum lands within tolerance.
  float sum = 0.0f;
  for (const float v : label) sum += v;
  label[argmax_index(label)] += 1.0f - sum;
  return label;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), 4 * a.size()) == 0);
}

// Test-local little-endian writer, independent of the codec under test.
void le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void lef(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  le32(out, bits);
}

std::filesystem::path temp_dir(const char* tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   (std::string("milmix_test_") + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("bag model") {
  TEST_CASE("one-hot detection and argmax") {
    CHECK(is_one_hot(std::vector<float>{1.0f, 0.0f}));
    CHECK(is_one_hot(std::vector<float>{0.0f, 0.0f, 1.0f}));
    CHECK_FALSE(is_one_hot(std::vector<float>{0.5f, 0.5f}));
    CHECK_FALSE(is_one_hot(std::vector<float>{1.0f, 1.0f}));
    CHECK_FALSE(is_one_hot(std::vector<float>{0.9999f, 0.0001f}));
    CHECK(argmax_index(std::vector<float>{0.1f, 0.7f, 0.2f}) == 1);
    CHECK(argmax_index(std::vector<float>{0.5f, 0.5f}) == 0);  // tie -> lowest
    CHECK(argmax_index(std::vector<float>{0.2f, 0.4f, 0.4f}) == 1);
  }

  TEST_CASE("bag validation names the violated invariant") {
    RngStream rng(1);
    auto good = make_bag("b", {1.0f, 0.0f}, 3, 4, rng);
    CHECK_NOTHROW(validate_bag(good));

    auto no_patches = good;
    no_patches.features = Matrix<float>(0, 4);
    CHECK_THROWS_AS(validate_bag(no_patches), ValidationError);

    auto one_class = good;
    one_class.label = {1.0f};
    CHECK_THROWS_AS(validate_bag(one_class), ValidationError);

    auto bad_value = good;
    bad_value.features(1, 2) = std::nanf("");
    CHECK_THROWS_AS(validate_bag(bad_value), ValidationError);

    auto bad_sum = good;
    bad_sum.label = {0.6f, 0.6f};
    CHECK_THROWS_AS(validate_bag(bad_sum), ValidationError);

    auto negative = good;
    negative.label = {1.5f, -0.5f};
    CHECK_THROWS_AS(validate_bag(negative), ValidationError);

    auto soft_real = good;
    soft_real.label = {0.5f, 0.5f};
    soft_real.origin = BagOrigin::kReal;
    CHECK_THROWS_AS(validate_bag(soft_real), ValidationError);
  }

  TEST_CASE("dataset validation catches duplicates and dim mismatch") {
    RngStream rng(2);
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 4;
    ds.bags.push_back(make_bag("a", {1.0f, 0.0f}, 2, 4, rng));
    ds.bags.push_back(make_bag("b", {0.0f, 1.0f}, 5, 4, rng));
    CHECK_NOTHROW(validate_dataset(ds));

    auto dup = ds;
    dup.bags.push_back(make_bag("a", {1.0f, 0.0f}, 2, 4, rng));
    CHECK_THROWS_AS(validate_dataset(dup), ValidationError);

    auto mismatch = ds;
    mismatch.bags.push_back(make_bag("c", {1.0f, 0.0f}, 2, 3, rng));
    CHECK_THROWS_AS(validate_dataset(mismatch), ValidationError);

    auto label_len = ds;
    label_len.bags.push_back(make_bag("d", {1.0f, 0.0f, 0.0f}, 2, 4, rng));
    CHECK_THROWS_AS(validate_dataset(label_len), ValidationError);
  }
}

TEST_SUITE("codec") {
  TEST_CASE("smallest bag serializes to 36 bytes plus the id") {
    RngStream rng(3);
    FeatureBag bag;
    bag.id = "x";
    bag.label = {1.0f, 0.0f};
    bag.features = Matrix<float>(1, 1);
    bag.features(0, 0) = 2.5f;

    const auto bytes = encode_bag(bag);
    CHECK(bytes.size() == 36 + bag.id.size());

    std::vector<std::uint8_t> expected;
    expected.insert(expected.end(), {'M', 'B', 'A', 'G'});
    le32(expected, 1);  // version
    le32(expected, 1);  // id length
    expected.push_back('x');
    le32(expected, 2);  // C
    le32(expected, 1);  // P
    le32(expected, 1);  // D
    lef(expected, 1.0f);
    lef(expected, 0.0f);
    lef(expected, 2.5f);
    CHECK(bytes == expected);
  }

  TEST_CASE("roundtrip is bit-exact over random bags") {
    RngStream rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t patches = 1 + rng.uniform_int(8);
      const std::size_t dim = 1 + rng.uniform_int(6);
      const std::size_t classes = 2 + rng.uniform_int(3);
      std::string id;
      const std::size_t id_len = rng.uniform_int(13);
      for (std::size_t i = 0; i < id_len; ++i) {
        id.push_back(static_cast<char>('a' + rng.uniform_int(26)));
      }
      const auto bag = make_bag(id, random_label(classes, rng), patches, dim, rng);

      const auto decoded = decode_bag(encode_bag(bag));
      CAPTURE(trial);
      REQUIRE(decoded.id == bag.id);
      REQUIRE(bits_equal(decoded.label, bag.label));
      REQUIRE(decoded.features.rows() == bag.features.rows());
      REQUIRE(decoded.features.cols() == bag.features.cols());
      REQUIRE(bits_equal(decoded.features.data(), bag.features.data()));
      REQUIRE(decoded.origin == bag.origin);
    }
  }

  TEST_CASE("negative zero and denormals survive the roundtrip") {
    FeatureBag bag;
    bag.id = "edge";
    bag.label = {0.0f, 1.0f};
    bag.features = Matrix<float>(1, 3);
    bag.features(0, 0) = -0.0f;
    bag.features(0, 1) = std::numeric_limits<float>::denorm_min();
    bag.features(0, 2) = -std::numeric_limits<float>::max();
    const auto decoded = decode_bag(encode_bag(bag));
    CHECK(bits_equal(decoded.features.data(), bag.features.data()));
  }

  TEST_CASE("corrupted headers raise the right error classes") {
    RngStream rng(5);
    const auto bag = make_bag("victim", {1.0f, 0.0f}, 2, 3, rng);
    const auto bytes = encode_bag(bag);

    SUBCASE("bad magic") {
      auto bad = bytes;
      bad[0] = 'X';
      CHECK_THROWS_AS(decode_bag(bad), FormatError);
    }
    SUBCASE("unsupported version") {
      auto bad = bytes;
      bad[4] = 9;
      CHECK_THROWS_AS(decode_bag(bad), FormatError);
    }
    SUBCASE("truncation at every prefix length") {
      for (std::size_t len = 0; len < bytes.size(); ++len) {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + len);
        CAPTURE(len);
        REQUIRE_THROWS_AS(decode_bag(cut), TruncationError);
      }
    }
    SUBCASE("declared sizes exceeding the payload") {
      auto bad = bytes;
      bad[18] = 0xff;  // low byte of the class count (id "victim" puts it at 18)
      CHECK_THROWS_AS(decode_bag(bad), TruncationError);
    }
    SUBCASE("trailing bytes") {
      auto bad = bytes;
      bad.push_back(0);
      CHECK_THROWS_AS(decode_bag(bad), FormatError);
    }
  }

  TEST_CASE("dataset directory roundtrip") {
    RngStream rng(6);
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 3;
    ds.bags.push_back(make_bag("first", {1.0f, 0.0f}, 2, 3, rng));
    ds.bags.push_back(make_bag("second", {0.0f, 1.0f}, 4, 3, rng));
    ds.bags.push_back(make_bag("third", {1.0f, 0.0f}, 1, 3, rng));

    const auto dir = temp_dir("dataset_roundtrip");
    save_dataset(dir, ds);
    const auto back = load_dataset(dir);
    REQUIRE(back.bags.size() == ds.bags.size());
    CHECK(back.class_names == ds.class_names);
    CHECK(back.descriptor_dim == ds.descriptor_dim);
    for (std::size_t i = 0; i < ds.bags.size(); ++i) {
      CHECK(back.bags[i].id == ds.bags[i].id);
      CHECK(bits_equal(back.bags[i].features.data(), ds.bags[i].features.data()));
      CHECK(bits_equal(back.bags[i].label, ds.bags[i].label));
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("manifest mismatches are rejected") {
    RngStream rng(7);
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 2;
    ds.bags.push_back(make_bag("a", {1.0f, 0.0f}, 1, 2, rng));
    ds.bags.push_back(make_bag("b", {0.0f, 1.0f}, 1, 2, rng));
    const auto dir = temp_dir("manifest_bad");
    save_dataset(dir, ds);

    SUBCASE("class index out of range") {
      std::ofstream manifest(dir / "manifest.txt");
      manifest << "neg\npos\na,5,bag0.mbag\n";
      manifest.close();
      CHECK_THROWS_AS(load_dataset(dir), FormatError);
    }
    SUBCASE("id mismatch with file content") {
      std::ofstream manifest(dir / "manifest.txt");
      manifest << "neg\npos\nwrong,0,bag0.mbag\n";
      manifest.close();
      CHECK_THROWS_AS(load_dataset(dir), FormatError);
    }
    SUBCASE("non-numeric class index") {
      std::ofstream manifest(dir / "manifest.txt");
      manifest << "neg\npos\na,zero,bag0.mbag\n";
      manifest.close();
      CHECK_THROWS_AS(load_dataset(dir), FormatError);
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("csv import groups patches into bags") {
    const auto dir = temp_dir("csv_import");
    const auto csv = dir / "patches.csv";
    {
      std::ofstream out(csv);
      out << "# comment line\n";
      out << "s1,tumor,1.5,2.5\n";
      out << "s1,tumor,3.0,4.0\n";
      out << "s2,normal,0.25,0.125\n";
      out << "s3,tumor,7.0,8.0\n";
    }
    const auto ds = import_patch_csv(csv);
    REQUIRE(ds.bags.size() == 3);
    CHECK(ds.class_names == std::vector<std::string>{"tumor", "normal"});
    CHECK(ds.descriptor_dim == 2);
    CHECK(ds.bags[0].id == "s1");
    CHECK(ds.bags[0].patch_count() == 2);
    CHECK(ds.bags[0].features(1, 1) == 4.0f);
    CHECK(ds.bags[0].label == std::vector<float>{1.0f, 0.0f});
    CHECK(ds.bags[1].label == std::vector<float>{0.0f, 1.0f});

    SUBCASE("inconsistent class for one bag") {
      std::ofstream out(csv, std::ios::app);
      out << "s1,normal,9.0,9.0\n";
      out.close();
      CHECK_THROWS_AS(import_patch_csv(csv), FormatError);
    }
    SUBCASE("feature count change") {
      std::ofstream out(csv, std::ios::app);
      out << "s4,tumor,1.0\n";
      out.close();
      CHECK_THROWS_AS(import_patch_csv(csv), FormatError);
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("subsampling") {
  BagDataset two_class_pool(std::size_t per_class, RngStream& rng) {
    BagDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.descriptor_dim = 2;
    for (std::size_t i = 0; i < per_class; ++i) {
      ds.bags.push_back(make_bag("n" + std::to_string(i), {1.0f, 0.0f}, 3, 2, rng));
      ds.bags.push_back(make_bag("p" + std::to_string(i), {0.0f, 1.0f}, 3, 2, rng));
    }
    return ds;
  }

  TEST_CASE("subsample_dataset keeps exact per-class counts in order") {
    RngStream rng(8);
    const auto ds = two_class_pool(100, rng);
    RngStream pick(9);
    const auto sub = subsample_dataset(ds, 16, pick);
    REQUIRE(sub.bags.size() == 32);
    std::size_t neg = 0, pos = 0;
    for (const auto& bag : sub.bags) {
      (argmax_index(bag.label) == 0 ? neg : pos) += 1;
    }
    CHECK(neg == 16);
    CHECK(pos == 16);

    // Survivors keep their relative dataset order.
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < ds.bags.size(); ++i) position[ds.bags[i].id] = i;
    for (std::size_t i = 1; i < sub.bags.size(); ++i) {
      CHECK(position.at(sub.bags[i - 1].id) < position.at(sub.bags[i].id));
    }
  }

  TEST_CASE("subsample_dataset with the full class size keeps every bag") {
    RngStream rng(10);
    const auto ds = two_class_pool(5, rng);
    RngStream pick(11);
    const auto sub = subsample_dataset(ds, 5, pick);
    REQUIRE(sub.bags.size() == ds.bags.size());
    for (std::size_t i = 0; i < ds.bags.size(); ++i) CHECK(sub.bags[i].id == ds.bags[i].id);
  }

  TEST_CASE("subsample_dataset deficit error names the class") {
    RngStream rng(12);
    const auto ds = two_class_pool(3, rng);
    RngStream pick(13);
    try {
      (void)subsample_dataset(ds, 5, pick);
      FAIL("expected a deficit error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("neg") != std::string::npos);
      CHECK(msg.find("3") != std::string::npos);
    }
  }

  TEST_CASE("subsample_patches keeps a sub-multiset of rows") {
    RngStream rng(14);
    const auto bag = make_bag("big", {1.0f, 0.0f}, 32, 4, rng);
    RngStream pick(15);
    const auto sub = subsample_patches(bag, 10, pick);
    REQUIRE(sub.patch_count() == 10);
    CHECK(sub.id == bag.id);
    CHECK(sub.label == bag.label);

    std::multiset<std::vector<float>> rows;
    for (std::size_t i = 0; i < bag.patch_count(); ++i) {
      const auto r = bag.features.row(i);
      rows.insert(std::vector<float>(r.begin(), r.end()));
    }
    for (std::size_t i = 0; i < sub.patch_count(); ++i) {
      const auto r = sub.features.row(i);
      const auto it = rows.find(std::vector<float>(r.begin(), r.end()));
      REQUIRE(it != rows.end());
      rows.erase(it);  // consume multiplicity
    }
  }

  TEST_CASE("subsample_patches with p equal to P preserves the multiset") {
    RngStream rng(16);
    const auto bag = make_bag("full", {0.0f, 1.0f}, 8, 3, rng);
    RngStream pick(17);
    const auto sub = subsample_patches(bag, 8, pick);
    auto sort_rows = [](const FeatureBag& b) {
      std::vector<std::vector<float>> rows;
      for (std::size_t i = 0; i < b.patch_count(); ++i) {
        const auto r = b.features.row(i);
        rows.emplace_back(r.begin(), r.end());
      }
      std::sort(rows.begin(), rows.end());
      return rows;
    };
    CHECK(sort_rows(sub) == sort_rows(bag));
  }

  TEST_CASE("subsample_patches bound errors") {
    RngStream rng(18);
    const auto bag = make_bag("small", {1.0f, 0.0f}, 4, 2, rng);
    RngStream pick(19);
    CHECK_THROWS_AS(subsample_patches(bag, 0, pick), ValidationError);
    CHECK_THROWS_AS(subsample_patches(bag, 5, pick), ValidationError);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("generation is deterministic and well shaped") {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.bags_per_class = 4;
    spec.patches_per_bag = 16;
    spec.dim = 8;
    RngStream rng1(20), rng2(20);
    const auto a = generate_synthetic(spec, rng1);
    const auto b = generate_synthetic(spec, rng2);

    REQUIRE(a.bags.size() == 12);
    CHECK(a.class_names.size() == 3);
    CHECK(a.descriptor_dim == 8);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.bags.size(); ++i) {
      CHECK(a.bags[i].patch_count() == 16);
      CHECK(a.bags[i].dim() == 8);
      CHECK(is_one_hot(a.bags[i].label));
      ids.insert(a.bags[i].id);
      CHECK(bits_equal(a.bags[i].features.data(), b.bags[i].features.data()));
    }
    CHECK(ids.size() == a.bags.size());
  }

  TEST_CASE("class centroids land on alternating signed axes") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.bags_per_class = 40;
    spec.patches_per_bag = 64;
    spec.dim = 2;
    spec.class_separation = 4.0;
    spec.patch_noise = 1.0;
    RngStream rng(21);
    const auto ds = generate_synthetic(spec, rng);

    // Empirical per-class means: class 0 -> (+2, 0), class 1 -> (0, -2).
    std::array<std::array<double, 2>, 2> mean{};
    std::array<std::size_t, 2> count{};
    for (const auto& bag : ds.bags) {
      const auto cls = argmax_index(bag.label);
      for (std::size_t i = 0; i < bag.patch_count(); ++i) {
        mean[cls][0] += bag.features(i, 0);
        mean[cls][1] += bag.features(i, 1);
      }
      count[cls] += bag.patch_count();
    }
    for (int c = 0; c < 2; ++c)
      for (int d = 0; d < 2; ++d) mean[c][d] /= static_cast<double>(count[c]);

    // 2560 samples per class, sigma 1 -> standard error ~0.02; 0.15 is >7 sigma.
    CHECK(mean[0][0] == doctest::Approx(2.0).epsilon(0.075));
    CHECK(std::abs(mean[0][1]) < 0.15);
    CHECK(mean[1][1] == doctest::Approx(-2.0).epsilon(0.075));
    CHECK(std::abs(mean[1][0]) < 0.15);
  }

  TEST_CASE("nearest-centroid classification separates delta=8 classes") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.bags_per_class = 25;
    spec.patches_per_bag = 32;
    spec.dim = 16;
    spec.class_separation = 8.0;
    RngStream rng(22);
    const auto ds = generate_synthetic(spec, rng);

    // Centroids from the construction: +4 e0 and -4 e1.
    for (const auto& bag : ds.bags) {
      std::vector<double> bag_mean(spec.dim, 0.0);
      for (std::size_t i = 0; i < bag.patch_count(); ++i)
        for (std::size_t d = 0; d < spec.dim; ++d) bag_mean[d] += bag.features(i, d);
      for (auto& v : bag_mean) v /= static_cast<double>(bag.patch_count());
      const double score0 = bag_mean[0];   // projection onto +e0
      const double score1 = -bag_mean[1];  // projection onto -e1
      const std::size_t guess = score0 >= score1 ? 0 : 1;
      CHECK(guess == argmax_index(bag.label));
    }
  }

  TEST_CASE("partial signal fraction leaves background patches centered") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.bags_per_class = 10;
    spec.patches_per_bag = 100;
    spec.dim = 2;
    spec.signal_fraction = 0.25;
    spec.class_separation = 100.0;  // signal patches are unmistakable
    RngStream rng(23);
    const auto ds = generate_synthetic(spec, rng);
    for (const auto& bag : ds.bags) {
      std::size_t far = 0;
      for (std::size_t i = 0; i < bag.patch_count(); ++i) {
        const double norm = std::hypot(bag.features(i, 0), bag.features(i, 1));
        if (norm > 25.0) ++far;
      }
      CHECK(far == 25);  // exactly round(0.25 * 100) signal patches
    }
  }

  TEST_CASE("bag offsets push inter-bag distances above intra-bag distances") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.bags_per_class = 20;
    spec.patches_per_bag = 64;
    spec.dim = 8;
    spec.class_separation = 0.0;
    spec.patch_noise = 1.0;
    spec.bag_offset_scale = 1.0;
    RngStream rng(24);
    const auto ds = generate_synthetic(spec, rng);

    RngStream pick(25);
    double intra = 0.0, inter = 0.0;
    const int pairs = 10000;
    for (int k = 0; k < pairs; ++k) {
      const auto& bag = ds.bags[pick.uniform_int(ds.bags.size())];
      const auto i = pick.uniform_int(bag.patch_count());
      auto j = pick.uniform_int(bag.patch_count() - 1);
      if (j >= i) ++j;
      const auto a = bag.features.row(i);
      const auto b = bag.features.row(j);
      for (std::size_t d = 0; d < a.size(); ++d) {
        intra += (double(a[d]) - b[d]) * (double(a[d]) - b[d]);
      }
    }
    for (int k = 0; k < pairs; ++k) {
      const auto wi = pick.uniform_int(ds.bags.size());
      auto vi = pick.uniform_int(ds.bags.size() - 1);
      if (vi >= wi) ++vi;
      const auto& w = ds.bags[wi];
      const auto& v = ds.bags[vi];
      const auto a = w.features.row(pick.uniform_int(w.patch_count()));
      const auto b = v.features.row(pick.uniform_int(v.patch_count()));
      for (std::size_t d = 0; d < a.size(); ++d) {
        inter += (double(a[d]) - b[d]) * (double(a[d]) - b[d]);
      }
    }
    intra /= pairs;
    inter /= pairs;
    // Expected squared distances: 2*D*sigma^2 = 16 vs 2*D*(sigma^2+tau^2) = 32.
    CHECK(intra == doctest::Approx(16.0).epsilon(0.15));
    CHECK(inter == doctest::Approx(32.0).epsilon(0.15));
    CHECK(intra < inter);
  }

  TEST_CASE("spec validation") {
    SyntheticSpec spec;
    spec.classes = 1;
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
    spec.classes = 2;
    spec.signal_fraction = 1.5;
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
    spec.signal_fraction = 0.5;
    spec.patch_noise = 0.0;
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
  }
}
