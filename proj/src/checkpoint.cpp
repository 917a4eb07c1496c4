#include "milmix/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <span>

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
      throw TruncationError(std::string("mmlp: payload ends inside ") + what);
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_block(std::vector<std::uint8_t>& out, const std::string& name,
               const std::vector<std::size_t>& dims, std::span<const float> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (const std::size_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (const float v : data) put_f32(out, v);
}

struct Block {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;
};

Block read_block(Reader& in) {
  Block b;
  const std::uint32_t name_len = in.u32("block name length");
  b.name = in.text(name_len, "block name");
  const std::uint32_t ndim = in.u32("block rank");
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = in.u32("block shape");
    b.dims.push_back(d);
    count *= d;
  }
  if (4ull * count > in.remaining()) {
    throw TruncationError("mmlp: declared block size exceeds remaining bytes");
  }
  b.data.resize(count);
  for (auto& v : b.data) v = in.f32("block data");
  return b;
}

/// Pops the next block, checking name and shape against the expected tensor.
void take_into(std::vector<Block>& blocks, std::size_t& cursor, const char* name,
               Matrix<float>& tensor) {
  if (cursor >= blocks.size()) throw FormatError("mmlp: missing block '" + std::string(name) + "'");
  Block& b = blocks[cursor++];
  if (b.name != name) {
    throw FormatError("mmlp: expected block '" + std::string(name) + "', found '" + b.name + "'");
  }
  if (b.dims.size() != 2) throw FormatError("mmlp: block '" + b.name + "' is not rank 2");
  tensor = Matrix<float>(b.dims[0], b.dims[1]);
  std::copy(b.data.begin(), b.data.end(), tensor.data().begin());
}

void take_into(std::vector<Block>& blocks, std::size_t& cursor, const char* name,
               std::vector<float>& tensor) {
  if (cursor >= blocks.size()) throw FormatError("mmlp: missing block '" + std::string(name) + "'");
  Block& b = blocks[cursor++];
  if (b.name != name) {
    throw FormatError("mmlp: expected block '" + std::string(name) + "', found '" + b.name + "'");
  }
  if (b.dims.size() != 1) throw FormatError("mmlp: block '" + b.name + "' is not rank 1");
  tensor = std::move(b.data);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const MilModel& model) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'M', 'L', 'P'});
  put_u32(out, kMmlpVersion);
  const std::string kind = to_string(kind_of(model));
  put_u32(out, static_cast<std::uint32_t>(kind.size()));
  out.insert(out.end(), kind.begin(), kind.end());

  std::uint32_t block_count = 0;
  std::visit([&](const auto& m) { visit_params(m, [&](const char*, const auto&) { ++block_count; }); },
             model);
  const bool is_dsmil = kind_of(model) == ModelKind::kDsmil;
  if (is_dsmil) ++block_count;
  put_u32(out, block_count);

  std::visit(
      [&](const auto& m) {
        visit_params(m, [&](const char* name, const auto& tensor) {
          put_block(out, name, shape_of(tensor), span_of(tensor));
        });
      },
      model);
  if (is_dsmil) {
    const float sw = std::get<DsmilModel<float>>(model).stream_weight;
    put_block(out, "stream_weight", {1}, std::span<const float>(&sw, 1));
  }
  return out;
}

MilModel decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  const std::string magic = in.text(4, "magic");
  if (magic != "MMLP") throw FormatError("mmlp: bad magic '" + magic + "'");
  const std::uint32_t version = in.u32("version");
  if (version != kMmlpVersion) {
    throw FormatError("mmlp: unsupported version " + std::to_string(version));
  }
  const std::uint32_t kind_len = in.u32("kind length");
  const std::string kind = in.text(kind_len, "kind");
  const std::uint32_t block_count = in.u32("block count");
  std::vector<Block> blocks;
  blocks.reserve(block_count);
  for (std::uint32_t i = 0; i < block_count; ++i) blocks.push_back(read_block(in));
  if (in.remaining() != 0) {
    throw FormatError("mmlp: " + std::to_string(in.remaining()) + " trailing bytes");
  }

  std::size_t cursor = 0;
  if (kind == "abmil") {
    AbmilModel<float> m;
    take_into(blocks, cursor, "attn_v.weight", m.attn_v.weight);
    take_into(blocks, cursor, "attn_v.bias", m.attn_v.bias);
    take_into(blocks, cursor, "attn_u.weight", m.attn_u.weight);
    take_into(blocks, cursor, "attn_u.bias", m.attn_u.bias);
    take_into(blocks, cursor, "attn_w", m.attn_w);
    take_into(blocks, cursor, "classifier.weight", m.classifier.weight);
    take_into(blocks, cursor, "classifier.bias", m.classifier.bias);
    if (cursor != blocks.size()) throw FormatError("mmlp: unexpected extra blocks");
    return m;
  }
  if (kind == "dsmil") {
    DsmilModel<float> m;
    take_into(blocks, cursor, "inst_classifier.weight", m.inst_classifier.weight);
    take_into(blocks, cursor, "inst_classifier.bias", m.inst_classifier.bias);
    take_into(blocks, cursor, "query.weight", m.query.weight);
    take_into(blocks, cursor, "query.bias", m.query.bias);
    take_into(blocks, cursor, "value.weight", m.value.weight);
    take_into(blocks, cursor, "value.bias", m.value.bias);
    take_into(blocks, cursor, "bag_classifier.weight", m.bag_classifier.weight);
    take_into(blocks, cursor, "bag_classifier.bias", m.bag_classifier.bias);
    std::vector<float> sw;
    take_into(blocks, cursor, "stream_weight", sw);
    if (sw.size() != 1) throw FormatError("mmlp: stream_weight must hold one value");
    m.stream_weight = sw[0];
    if (cursor != blocks.size()) throw FormatError("mmlp: unexpected extra blocks");
    return m;
  }
  throw FormatError("mmlp: unknown model kind '" + kind + "'");
}

void save_model(const MilModel& model, const std::string& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

MilModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

}  // namespace milmix
