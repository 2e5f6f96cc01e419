#include "lift/image.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lift/error.hpp"

namespace lift::image {

void PixelSequence::validate() const {
  if (pixels.size() != width * height) {
    throw Error(ErrorCode::bad_shape,
                fmt::format("{}x{} image needs {} pixels, got {}", width, height, width * height, pixels.size()));
  }
  for (int v : pixels) {
    if (v < 0 || v > 255) throw Error(ErrorCode::bad_pixel_range, fmt::format("pixel value {} outside [0,255]", v));
  }
}

PixelSequence from_features(std::span<const double> values, std::size_t width, std::size_t height) {
  if (values.size() != width * height) {
    throw Error(ErrorCode::bad_shape, fmt::format("expected {} pixels, got {}", width * height, values.size()));
  }
  PixelSequence out{width, height, {}};
  out.pixels.reserve(values.size());
  for (double v : values) {
    if (v != std::floor(v) || v < 0.0 || v > 255.0) {
      throw Error(ErrorCode::bad_pixel_range, fmt::format("pixel value {} is not an integer in [0,255]", v));
    }
    out.pixels.push_back(static_cast<int>(v));
  }
  return out;
}

PixelSequence center_crop(const PixelSequence& img, std::size_t target) {
  img.validate();
  if (img.width != kSide || img.height != kSide) {
    throw Error(ErrorCode::bad_shape, fmt::format("expected a {0}x{0} image, got {1}x{2}", kSide, img.width, img.height));
  }
  if (target == 0 || target > kSide) throw Error(ErrorCode::bad_shape, fmt::format("crop size {} out of range", target));
  const std::size_t off = (kSide - target) / 2;
  PixelSequence out{target, target, {}};
  out.pixels.reserve(target * target);
  for (std::size_t r = 0; r < target; ++r) {
    for (std::size_t c = 0; c < target; ++c) out.pixels.push_back(img.at(r + off, c + off));
  }
  return out;
}

PixelSequence pad_to(const PixelSequence& img, std::size_t width, std::size_t height) {
  img.validate();
  if (img.width > width || img.height > height) throw Error(ErrorCode::bad_shape, "image larger than canvas");
  const std::size_t off_r = (height - img.height) / 2;
  const std::size_t off_c = (width - img.width) / 2;
  PixelSequence out{width, height, std::vector<int>(width * height, 0)};
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) out.pixels[(r + off_r) * width + c + off_c] = img.at(r, c);
  }
  return out;
}

FeatureRow flatten_to_features(const PixelSequence& seq, bool unit_scale) {
  seq.validate();
  FeatureRow out;
  out.reserve(seq.pixels.size());
  for (int v : seq.pixels) out.push_back(unit_scale ? v / 255.0 : static_cast<double>(v));
  return out;
}

PixelSequence unflatten(std::span<const double> features, std::size_t width, std::size_t height, bool unit_scale) {
  if (features.size() != width * height) throw Error(ErrorCode::bad_shape, "feature count does not match shape");
  PixelSequence out{width, height, {}};
  out.pixels.reserve(features.size());
  for (double v : features) out.pixels.push_back(static_cast<int>(std::lround(unit_scale ? v * 255.0 : v)));
  out.validate();
  return out;
}

TabularDataset prepare_images(const TabularDataset& raw, bool crop, bool unit_scale) {
  if (raw.p() != kSide * kSide) {
    throw Error(ErrorCode::bad_shape, fmt::format("image rows need {} pixels, got {}", kSide * kSide, raw.p()));
  }
  FeatureMatrix rows;
  rows.reserve(raw.size());
  for (const auto& r : raw.rows()) {
    auto img = from_features(r, kSide, kSide);
    if (crop) img = center_crop(img);
    rows.push_back(flatten_to_features(img, unit_scale));
  }
  const std::size_t p = crop ? kCropSide * kCropSide : kSide * kSide;
  FeatureSchema schema{p, {}, raw.schema().target_name};
  return TabularDataset(schema, std::move(rows), raw.targets(), raw.task(), raw.label_set());
}

TabularDataset load_image_csv(const std::filesystem::path& path, std::size_t label_column, bool has_header) {
  CsvOptions opts;
  opts.task = TaskKind::classification;
  opts.target_column = label_column;
  opts.has_header = has_header;
  auto ds = load_csv(path, opts);
  if (!ds.empty() && ds.p() != kSide * kSide) {
    throw Error(ErrorCode::bad_shape, fmt::format("image CSV needs {} pixel columns, got {}", kSide * kSide, ds.p()));
  }
  return ds;
}

}  // namespace lift::image
