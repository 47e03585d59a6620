#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lowlight/errors.hpp"

namespace lowlight {

using Index = Eigen::Index;

/// Interleaved pixel storage: one row per pixel (row-major over image rows and
/// columns), one column per channel. The underlying buffer is therefore
/// ordered by (row, col, channel).
template <typename Scalar>
using PixelArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Single-channel H x W field.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Column-major dense matrix for linear-algebra kernels.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Binary H x W mask.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& a) {
  return a.derived().array().isFinite().all();
}

template <typename Derived>
bool all_in_unit_range(const Eigen::DenseBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return all_finite(a) && (a.derived().array() >= S(0)).all() &&
         (a.derived().array() <= S(1)).all();
}

inline std::string shape_string(Index h, Index w, Index c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

}  // namespace detail

/// Unconstrained dense H x W x C raster (feature maps, attention outputs).
template <typename Scalar>
class FeatureMap {
 public:
  FeatureMap(Index height, Index width, Index channels)
      : height_(height), width_(width), pixels_(PixelArray<Scalar>::Zero(height * width, channels)) {
    detail::require_dims(height >= 1 && width >= 1 && channels >= 1,
                         "FeatureMap: non-positive shape " + detail::shape_string(height, width, channels));
  }

  FeatureMap(Index height, Index width, PixelArray<Scalar> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    detail::require_dims(height >= 1 && width >= 1 && pixels_.cols() >= 1 &&
                             pixels_.rows() == height * width,
                         "FeatureMap: pixel array does not match " +
                             detail::shape_string(height, width, pixels_.cols()));
    detail::require_domain(detail::all_finite(pixels_), "FeatureMap: non-finite value");
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return pixels_.cols(); }
  Index positions() const { return height_ * width_; }

  const PixelArray<Scalar>& pixels() const { return pixels_; }
  PixelArray<Scalar>& pixels() { return pixels_; }

  Scalar operator()(Index row, Index col, Index ch) const { return pixels_(row * width_ + col, ch); }
  Scalar& operator()(Index row, Index col, Index ch) { return pixels_(row * width_ + col, ch); }

  bool same_shape(const FeatureMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels() == other.channels();
  }

 private:
  Index height_;
  Index width_;
  PixelArray<Scalar> pixels_;
};

/// Image raster with 1 (gray) or 3 (RGB) interleaved channels, every value in [0, 1].
///
/// The range invariant is enforced on construction and there is no mutable
/// access to the pixels; derive new images through the free functions or
/// ImageGrid::clamped.
template <typename Scalar>
class ImageGrid {
 public:
  ImageGrid(Index height, Index width, PixelArray<Scalar> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    const Index c = pixels_.cols();
    detail::require_dims(height >= 1 && width >= 1 && (c == 1 || c == 3) &&
                             pixels_.rows() == height * width,
                         "ImageGrid: invalid shape " + detail::shape_string(height, width, c));
    detail::require_domain(detail::all_in_unit_range(pixels_), "ImageGrid: value outside [0, 1]");
  }

  static ImageGrid constant(Index height, Index width, Index channels, Scalar value) {
    return ImageGrid(height, width, PixelArray<Scalar>::Constant(height * width, channels, value));
  }

  /// Clamp to [0, 1] and wrap. Non-finite inputs are rejected.
  static ImageGrid clamped(Index height, Index width, const PixelArray<Scalar>& pixels) {
    detail::require_domain(detail::all_finite(pixels), "ImageGrid: non-finite value");
    return ImageGrid(height, width, pixels.max(Scalar(0)).min(Scalar(1)));
  }

  /// Single-channel image from a plane.
  static ImageGrid from_plane(const Plane<Scalar>& plane) {
    PixelArray<Scalar> px = plane.template reshaped<Eigen::RowMajor>(plane.size(), 1);
    return ImageGrid(plane.rows(), plane.cols(), std::move(px));
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return pixels_.cols(); }
  Index positions() const { return height_ * width_; }

  const PixelArray<Scalar>& pixels() const { return pixels_; }

  Scalar operator()(Index row, Index col, Index ch = 0) const { return pixels_(row * width_ + col, ch); }

  /// Channel `ch` as an H x W plane.
  Plane<Scalar> plane(Index ch = 0) const {
    return pixels_.col(ch).template reshaped<Eigen::RowMajor>(height_, width_);
  }

  bool same_size(Index h, Index w) const { return height_ == h && width_ == w; }
  bool same_shape(const ImageGrid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels() == other.channels();
  }

 private:
  Index height_;
  Index width_;
  PixelArray<Scalar> pixels_;
};

/// 8-bit interleaved buffer to image, value = byte / 255.
template <typename Scalar = double>
ImageGrid<Scalar> from_bytes(std::span<const std::uint8_t> raw, Index h, Index w, Index c) {
  detail::require_dims(h >= 1 && w >= 1 && static_cast<Index>(raw.size()) == h * w * c,
                       "from_bytes: buffer of " + std::to_string(raw.size()) + " bytes does not match " +
                           detail::shape_string(h, w, c));
  PixelArray<Scalar> px(h * w, c);
  for (Index i = 0; i < h * w * c; ++i) px.data()[i] = Scalar(raw[static_cast<std::size_t>(i)]) / Scalar(255);
  return ImageGrid<Scalar>(h, w, std::move(px));
}

/// Quantize one value: round(v * 255) with halves rounded up, clamped to [0, 255].
template <typename Scalar>
std::uint8_t quantize_byte(Scalar v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

template <typename Scalar>
std::vector<std::uint8_t> to_bytes(const ImageGrid<Scalar>& img) {
  const auto& px = img.pixels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(px.size()));
  for (Index i = 0; i < px.size(); ++i) out[static_cast<std::size_t>(i)] = quantize_byte(px.data()[i]);
  return out;
}

/// Quantize a single-channel field the same way images are quantized.
template <typename Scalar>
std::vector<std::uint8_t> plane_to_bytes(const Plane<Scalar>& plane) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(plane.size()));
  for (Index i = 0; i < plane.size(); ++i) out[static_cast<std::size_t>(i)] = quantize_byte(plane.data()[i]);
  return out;
}

/// Per-pixel mean over channels, as a plane.
template <typename Scalar>
Plane<Scalar> channel_mean(const ImageGrid<Scalar>& img) {
  return img.pixels().rowwise().mean().template reshaped<Eigen::RowMajor>(img.height(), img.width());
}

/// Per-pixel minimum over channels, as a plane.
template <typename Scalar>
Plane<Scalar> channel_min(const ImageGrid<Scalar>& img) {
  return img.pixels().rowwise().minCoeff().template reshaped<Eigen::RowMajor>(img.height(), img.width());
}

/// Mask from a single-channel image: positive iff value >= 0.5.
template <typename Scalar>
Mask mask_from_image(const ImageGrid<Scalar>& img) {
  detail::require_dims(img.channels() == 1, "mask_from_image: expected a single-channel image");
  return img.plane() >= Scalar(0.5);
}

template <typename Scalar = double>
ImageGrid<Scalar> image_from_mask(const Mask& mask) {
  return ImageGrid<Scalar>::from_plane(mask.cast<Scalar>());
}

}  // namespace lowlight
