#include "milmix/tilemask.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>

#include "milmix/errors.hpp"

namespace milmix {

void validate_image(const RasterImage& img) {
  if (img.width == 0 || img.height == 0) {
    throw ValidationError("image: width and height must be positive");
  }
  if (img.pixels.size() != 3 * img.width * img.height) {
    throw ValidationError("image: pixel buffer does not match dimensions");
  }
}

namespace {

// Skips whitespace and '#' comments between PPM header tokens.
std::size_t next_header_value(std::istream& in, const char* what) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  std::size_t value = 0;
  if (!(in >> value)) throw FormatError(std::string("ppm: missing ") + what);
  return value;
}

}  // namespace

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::array<char, 2> magic{};
  in.read(magic.data(), 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') {
    throw FormatError("ppm: not a P6 file: " + path.string());
  }
  RasterImage img;
  img.width = next_header_value(in, "width");
  img.height = next_header_value(in, "height");
  const std::size_t maxval = next_header_value(in, "maxval");
  if (maxval != 255) {
    throw FormatError("ppm: unsupported maxval " + std::to_string(maxval));
  }
  in.get();  // single whitespace byte before the raster
  img.pixels.resize(3 * img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw TruncationError("ppm: raster data ends early");
  }
  validate_image(img);
  return img;
}

void write_ppm(const std::filesystem::path& path, const RasterImage& img) {
  validate_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

RasterImage downsample_box(const RasterImage& img, std::size_t factor) {
  validate_image(img);
  if (factor == 0) throw ValidationError("downsample: factor must be positive");
  const std::size_t out_w = img.width / factor;
  const std::size_t out_h = img.height / factor;
  if (out_w == 0 || out_h == 0) {
    throw ValidationError("downsample: factor exceeds image dimensions");
  }
  RasterImage out;
  out.width = out_w;
  out.height = out_h;
  out.pixels.resize(3 * out_w * out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      std::array<std::uint64_t, 3> sum{};
      for (std::size_t dy = 0; dy < factor; ++dy) {
        for (std::size_t dx = 0; dx < factor; ++dx) {
          const std::size_t p = 3 * ((oy * factor + dy) * img.width + (ox * factor + dx));
          sum[0] += img.pixels[p];
          sum[1] += img.pixels[p + 1];
          sum[2] += img.pixels[p + 2];
        }
      }
      const double area = static_cast<double>(factor * factor);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out.pixels[3 * (oy * out_w + ox) + ch] =
            static_cast<std::uint8_t>(std::lround(static_cast<double>(sum[ch]) / area));
      }
    }
  }
  return out;
}

Matrix<std::uint8_t> tissue_mask(const RasterImage& img, std::uint8_t green_threshold) {
  validate_image(img);
  Matrix<std::uint8_t> mask(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      mask(y, x) = img.green(x, y) < green_threshold ? 1 : 0;
    }
  }
  return mask;
}

Matrix<double> entropy_map(const RasterImage& img, std::size_t window) {
  validate_image(img);
  if (window < 1) throw ValidationError("entropy_map: window must be >= 1");
  if (window > img.width || window > img.height) {
    throw ValidationError("entropy_map: window exceeds image dimensions");
  }

  Matrix<double> map(img.height, img.width);
  std::array<std::size_t, 256> hist{};
  for (std::size_t wy = 0; wy < img.height; wy += window) {
    for (std::size_t wx = 0; wx < img.width; wx += window) {
      hist.fill(0);
      const std::size_t y_end = std::min(wy + window, img.height);
      const std::size_t x_end = std::min(wx + window, img.width);
      for (std::size_t y = wy; y < y_end; ++y) {
        for (std::size_t x = wx; x < x_end; ++x) {
          const long luma = std::lround(0.299 * img.red(x, y) + 0.587 * img.green(x, y) +
                                        0.114 * img.blue(x, y));
          hist[static_cast<std::size_t>(luma)] += 1;
        }
      }
      const double total = static_cast<double>((y_end - wy) * (x_end - wx));
      double entropy = 0.0;
      for (const std::size_t count : hist) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / total;
        entropy -= p * std::log2(p);
      }
      for (std::size_t y = wy; y < y_end; ++y) {
        for (std::size_t x = wx; x < x_end; ++x) map(y, x) = entropy;
      }
    }
  }
  return map;
}

PatchGrid informative_grid(const Matrix<std::uint8_t>& mask, const Matrix<double>& entropy,
                           std::size_t patch_size, double coverage_min, double entropy_min) {
  if (mask.rows() != entropy.rows() || mask.cols() != entropy.cols()) {
    throw ValidationError("informative_grid: mask and entropy dimensions differ");
  }
  if (patch_size == 0) throw ValidationError("informative_grid: patch size must be positive");
  if (patch_size > mask.cols() || patch_size > mask.rows()) {
    throw ValidationError("informative_grid: patch size exceeds image dimensions");
  }

  PatchGrid grid;
  grid.patch_size = patch_size;
  const double cell_area = static_cast<double>(patch_size * patch_size);
  for (std::size_t y = 0; y + patch_size <= mask.rows(); y += patch_size) {
    for (std::size_t x = 0; x + patch_size <= mask.cols(); x += patch_size) {
      std::size_t tissue = 0;
      double entropy_sum = 0.0;
      for (std::size_t dy = 0; dy < patch_size; ++dy) {
        for (std::size_t dx = 0; dx < patch_size; ++dx) {
          tissue += mask(y + dy, x + dx);
          entropy_sum += entropy(y + dy, x + dx);
        }
      }
      const double coverage = static_cast<double>(tissue) / cell_area;
      const double mean_entropy = entropy_sum / cell_area;
      if (coverage >= coverage_min && (entropy_min == 0.0 || mean_entropy >= entropy_min)) {
        grid.coordinates.emplace_back(x, y);
        grid.coverage.push_back(coverage);
      }
    }
  }
  return grid;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_coords(const PatchGrid& grid,
                                                               std::size_t n, RngStream& rng) {
  if (grid.coordinates.empty()) throw ValidationError("sample_coords: empty grid");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(grid.coordinates[rng.uniform_int(grid.coordinates.size())]);
  }
  return out;
}

}  // namespace milmix
