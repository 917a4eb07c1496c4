#ifndef MILMIX_TILEMASK_HPP
#define MILMIX_TILEMASK_HPP

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "milmix/matrix.hpp"
#include "milmix/rng.hpp"

namespace milmix {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  std::uint8_t red(std::size_t x, std::size_t y) const { return pixels[3 * (y * width + x)]; }
  std::uint8_t green(std::size_t x, std::size_t y) const { return pixels[3 * (y * width + x) + 1]; }
  std::uint8_t blue(std::size_t x, std::size_t y) const { return pixels[3 * (y * width + x) + 2]; }
};

void validate_image(const RasterImage& img);

/// Binary PPM (P6), maxval 255. Comments and arbitrary whitespace in the
/// header are accepted on read.
RasterImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RasterImage& img);

/// Mean over factor x factor blocks; trailing rows/columns that do not fill a
/// whole block are dropped. factor 8 gives the 1:8 overview scale.
RasterImage downsample_box(const RasterImage& img, std::size_t factor);

/// mask(y, x) = 1 iff green(x, y) < threshold. Stained tissue is dark in the
/// green channel; background is bright.
Matrix<std::uint8_t> tissue_mask(const RasterImage& img, std::uint8_t green_threshold);

/// Shannon entropy (bits) of the 256-bin luma histogram per non-overlapping
/// window; every pixel carries its window's value so the map aligns with the
/// mask. Luma = round(0.299 R + 0.587 G + 0.114 B). Edge windows that do not
/// fill the full window size are computed over the pixels they do cover.
Matrix<double> entropy_map(const RasterImage& img, std::size_t window);

struct PatchGrid {
  std::size_t patch_size = 0;
  std::vector<std::pair<std::size_t, std::size_t>> coordinates;  // (x, y) top-left
  std::vector<double> coverage;  // tissue fraction per kept cell
};

/// Non-overlapping cells at stride patch_size (only cells fully inside the
/// image), scanned top-to-bottom then left-to-right. A cell is kept iff its
/// tissue fraction >= coverage_min and its mean entropy >= entropy_min;
/// entropy_min = 0 disables the entropy rule.
PatchGrid informative_grid(const Matrix<std::uint8_t>& mask, const Matrix<double>& entropy,
                           std::size_t patch_size, double coverage_min, double entropy_min);

/// n cells drawn uniformly with replacement.
std::vector<std::pair<std::size_t, std::size_t>> sample_coords(const PatchGrid& grid,
                                                               std::size_t n, RngStream& rng);

inline constexpr std::uint8_t kDefaultGreenThreshold = 200;
inline constexpr double kDefaultCoverageMin = 0.75;
inline constexpr std::size_t kDefaultEntropyWindow = 32;

}  // namespace milmix

#endif  // MILMIX_TILEMASK_HPP
