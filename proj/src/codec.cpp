#include "milmix/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "milmix/errors.hpp"

namespace milmix {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                      static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24;
    pos_ += 4;
    return v;
  }

  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string text(std::size_t len, const char* what) {
    require(len, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void require(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw TruncationError(std::string("mbag: payload ends inside ") + what);
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_bag(const FeatureBag& bag) {
  validate_bag(bag);
  std::vector<std::uint8_t> out;
  out.reserve(36 + bag.id.size() + 4 * (bag.label.size() + bag.features.size()));
  out.insert(out.end(), {'M', 'B', 'A', 'G'});
  put_u32(out, kMbagVersion);
  put_u32(out, static_cast<std::uint32_t>(bag.id.size()));
  out.insert(out.end(), bag.id.begin(), bag.id.end());
  put_u32(out, static_cast<std::uint32_t>(bag.class_count()));
  put_u32(out, static_cast<std::uint32_t>(bag.patch_count()));
  put_u32(out, static_cast<std::uint32_t>(bag.dim()));
  for (const float v : bag.label) put_f32(out, v);
  for (const float v : bag.features.data()) put_f32(out, v);
  return out;
}

FeatureBag decode_bag(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::string magic = in.text(4, "magic");
  if (magic != "MBAG") throw FormatError("mbag: bad magic '" + magic + "'");
  const std::uint32_t version = in.u32("version");
  if (version != kMbagVersion) {
    throw FormatError("mbag: unsupported version " + std::to_string(version));
  }

  FeatureBag bag;
  const std::uint32_t id_len = in.u32("id length");
  bag.id = in.text(id_len, "id");
  const std::uint32_t class_count = in.u32("class count");
  const std::uint32_t patch_count = in.u32("patch count");
  const std::uint32_t dim = in.u32("descriptor dimension");

  const std::uint64_t payload =
      4ull * (static_cast<std::uint64_t>(class_count) +
              static_cast<std::uint64_t>(patch_count) * dim);
  if (payload > in.remaining()) {
    throw TruncationError("mbag: declared sizes exceed remaining bytes");
  }

  bag.label.resize(class_count);
  for (auto& v : bag.label) v = in.f32("label");
  bag.features = Matrix<float>(patch_count, dim);
  for (auto& v : bag.features.data()) v = in.f32("features");
  if (in.remaining() != 0) {
    throw FormatError("mbag: " + std::to_string(in.remaining()) + " trailing bytes");
  }

  // The layout carries no origin tag; derive it from the label.
  bag.origin = is_one_hot(bag.label) ? BagOrigin::kReal : BagOrigin::kInterMix;
  validate_bag(bag);
  return bag;
}

void save_bag(const std::filesystem::path& path, const FeatureBag& bag) {
  const auto bytes = encode_bag(bag);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

FeatureBag load_bag(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_bag(bytes);
}

void save_dataset(const std::filesystem::path& dir, const BagDataset& ds) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / kManifestName);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  for (const auto& name : ds.class_names) manifest << name << "\n";
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const FeatureBag& bag = ds.bags[i];
    const std::string filename = "bag" + std::to_string(i) + ".mbag";
    save_bag(dir / filename, bag);
    manifest << bag.id << "," << argmax_index(bag.label) << "," << filename << "\n";
  }
}

BagDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kManifestName);
  if (!manifest) throw std::runtime_error("cannot open manifest in " + dir.string());

  BagDataset ds;
  std::string line;
  bool in_rows = false;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (!in_rows && comma == std::string::npos) {
      ds.class_names.push_back(line);
      continue;
    }
    in_rows = true;
    const auto comma2 = line.find(',', comma + 1);
    if (comma == std::string::npos || comma2 == std::string::npos) {
      throw FormatError("manifest: malformed row '" + line + "'");
    }
    const std::string id = line.substr(0, comma);
    const std::string cls = line.substr(comma + 1, comma2 - comma - 1);
    const std::string filename = line.substr(comma2 + 1);
    std::size_t class_index = 0;
    const auto parsed = std::from_chars(cls.data(), cls.data() + cls.size(), class_index);
    if (parsed.ec != std::errc{} || parsed.ptr != cls.data() + cls.size()) {
      throw FormatError("manifest: bad class index '" + cls + "' for '" + id + "'");
    }
    if (class_index >= ds.class_names.size()) {
      throw FormatError("manifest: class index " + cls + " out of range for '" + id + "'");
    }
    FeatureBag bag = load_bag(dir / filename);
    if (bag.id != id) {
      throw FormatError("manifest: id '" + id + "' does not match file content '" +
                        bag.id + "'");
    }
    if (is_one_hot(bag.label) && argmax_index(bag.label) != class_index) {
      throw FormatError("manifest: class index mismatch for '" + id + "'");
    }
    ds.bags.push_back(std::move(bag));
  }
  if (ds.bags.empty()) throw FormatError("manifest: lists no bags");
  ds.descriptor_dim = ds.bags.front().dim();
  validate_dataset(ds);
  return ds;
}

BagDataset import_patch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());

  struct PendingBag {
    std::string class_name;
    std::vector<float> values;
    std::size_t rows = 0;
  };
  std::vector<std::string> bag_order;
  std::map<std::string, PendingBag> pending;
  std::vector<std::string> class_names;
  std::size_t dim = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream row(line);
    std::string bag_id, class_name, cell;
    if (!std::getline(row, bag_id, ',') || !std::getline(row, class_name, ',')) {
      throw FormatError("csv line " + std::to_string(line_no) + ": expected bag_id,class_name,features...");
    }
    std::vector<float> feats;
    while (std::getline(row, cell, ',')) {
      feats.push_back(static_cast<float>(std::stod(cell)));
    }
    if (feats.empty()) {
      throw FormatError("csv line " + std::to_string(line_no) + ": no feature columns");
    }
    if (dim == 0) dim = feats.size();
    if (feats.size() != dim) {
      throw FormatError("csv line " + std::to_string(line_no) + ": feature count changed");
    }
    auto [it, inserted] = pending.try_emplace(bag_id);
    if (inserted) {
      bag_order.push_back(bag_id);
      it->second.class_name = class_name;
      if (std::find(class_names.begin(), class_names.end(), class_name) == class_names.end()) {
        class_names.push_back(class_name);
      }
    } else if (it->second.class_name != class_name) {
      throw FormatError("csv: bag '" + bag_id + "' appears with two classes");
    }
    it->second.values.insert(it->second.values.end(), feats.begin(), feats.end());
    it->second.rows += 1;
  }
  if (bag_order.empty()) throw FormatError("csv: no patch rows found");

  BagDataset ds;
  ds.class_names = class_names;
  ds.descriptor_dim = dim;
  for (const auto& id : bag_order) {
    const PendingBag& pb = pending.at(id);
    FeatureBag bag;
    bag.id = id;
    bag.label.assign(class_names.size(), 0.0f);
    const auto cls = std::find(class_names.begin(), class_names.end(), pb.class_name);
    bag.label[static_cast<std::size_t>(cls - class_names.begin())] = 1.0f;
    bag.features = Matrix<float>(pb.rows, dim);
    std::copy(pb.values.begin(), pb.values.end(), bag.features.data().begin());
    ds.bags.push_back(std::move(bag));
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace milmix
