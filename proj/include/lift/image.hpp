#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lift/data.hpp"

namespace lift::image {

inline constexpr std::size_t kSide = 28;
inline constexpr std::size_t kCropSide = 18;

/// Row-major grey levels in [0, 255].
struct PixelSequence {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<int> pixels;

  void validate() const;
  int at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  bool operator==(const PixelSequence&) const = default;
};

/// Interprets a feature row as integer pixels; fails on non-integral or
/// out-of-range values.
PixelSequence from_features(std::span<const double> values, std::size_t width, std::size_t height);

/// Keeps the centred `target` window; the offset is floor((side - target) / 2),
/// i.e. rows/cols 5..22 for 28 -> 18.
PixelSequence center_crop(const PixelSequence& img, std::size_t target = kCropSide);

/// Places `img` in the centre of a zero canvas; inverse of center_crop.
PixelSequence pad_to(const PixelSequence& img, std::size_t width, std::size_t height);

/// Row-major features, divided by 255 when `unit_scale` is set.
FeatureRow flatten_to_features(const PixelSequence& seq, bool unit_scale = false);

/// Inverse of flatten_to_features (rounding back to integer levels).
PixelSequence unflatten(std::span<const double> features, std::size_t width, std::size_t height,
                        bool unit_scale = false);

/// Turns a dataset of 784-pixel rows (e.g. from an image CSV) into cropped
/// 324-feature rows, optionally scaled to [0, 1].
TabularDataset prepare_images(const TabularDataset& raw, bool crop = true, bool unit_scale = false);

/// Image CSV: 784 integer pixel columns plus one label column.
TabularDataset load_image_csv(const std::filesystem::path& path, std::size_t label_column = kSide * kSide,
                              bool has_header = true);

}  // namespace lift::image
