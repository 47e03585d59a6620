#pragma once

#include <cstdint>

#include "lowlight/grid.hpp"
#include "lowlight/rng.hpp"

namespace lowlight {

inline constexpr double kDefaultTMin = 0.1;
inline constexpr double kDefaultAlpha = 0.5;

/// Per-pixel environment light A(z), one scalar per pixel shared by all channels.
template <typename Scalar>
class AtmosphericLightMap {
 public:
  explicit AtmosphericLightMap(Plane<Scalar> values) : values_(std::move(values)) {
    detail::require_dims(values_.rows() >= 1 && values_.cols() >= 1, "AtmosphericLightMap: empty map");
    detail::require_domain(detail::all_in_unit_range(values_), "AtmosphericLightMap: value outside [0, 1]");
  }

  static AtmosphericLightMap constant(Index height, Index width, Scalar value) {
    return AtmosphericLightMap(Plane<Scalar>::Constant(height, width, value));
  }

  Index height() const { return values_.rows(); }
  Index width() const { return values_.cols(); }
  const Plane<Scalar>& values() const { return values_; }
  Scalar operator()(Index row, Index col) const { return values_(row, col); }

 private:
  Plane<Scalar> values_;
};

/// Transmission t(z) in [t_min, 1].
template <typename Scalar>
class TransmissionMap {
 public:
  TransmissionMap(Plane<Scalar> values, Scalar t_min = Scalar(kDefaultTMin))
      : values_(std::move(values)), t_min_(t_min) {
    detail::require_domain(t_min > Scalar(0) && t_min < Scalar(1), "TransmissionMap: t_min must lie in (0, 1)");
    detail::require_dims(values_.rows() >= 1 && values_.cols() >= 1, "TransmissionMap: empty map");
    detail::require_domain(detail::all_finite(values_) && (values_ >= t_min).all() && (values_ <= Scalar(1)).all(),
                           "TransmissionMap: value outside [t_min, 1]");
  }

  /// Clamp arbitrary finite values into [t_min, 1].
  static TransmissionMap clamped(const Plane<Scalar>& values, Scalar t_min = Scalar(kDefaultTMin)) {
    detail::require_domain(detail::all_finite(values), "TransmissionMap: non-finite value");
    return TransmissionMap(values.max(t_min).min(Scalar(1)), t_min);
  }

  static TransmissionMap constant(Index height, Index width, Scalar value, Scalar t_min = Scalar(kDefaultTMin)) {
    return TransmissionMap(Plane<Scalar>::Constant(height, width, value), t_min);
  }

  Index height() const { return values_.rows(); }
  Index width() const { return values_.cols(); }
  Scalar t_min() const { return t_min_; }
  const Plane<Scalar>& values() const { return values_; }
  Scalar operator()(Index row, Index col) const { return values_(row, col); }

 private:
  Plane<Scalar> values_;
  Scalar t_min_;
};

struct ScatterParams {
  double alpha = kDefaultAlpha;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require_domain(alpha >= 0.0 && alpha <= 1.0, "ScatterParams: alpha must lie in [0, 1]");
  }
};

/// A(z) = 1 - alpha * u(z), u uniform on [0, 1), drawn independently per pixel.
///
/// Pixel p (row-major index) uses counter_uniform(seed, p), so the map does
/// not depend on generation order.
template <typename Scalar = double>
AtmosphericLightMap<Scalar> synth_atmospheric_light(Index h, Index w, const ScatterParams& params) {
  detail::require_dims(h >= 1 && w >= 1, "synth_atmospheric_light: empty shape");
  params.validate();
  Plane<Scalar> a(h, w);
  for (Index p = 0; p < h * w; ++p) {
    const double u = counter_uniform(params.seed, static_cast<std::uint64_t>(p));
    a.data()[p] = static_cast<Scalar>(1.0 - params.alpha * u);
  }
  return AtmosphericLightMap<Scalar>(std::move(a));
}

namespace detail {

template <typename Scalar>
void require_same_field_size(const ImageGrid<Scalar>& img, const TransmissionMap<Scalar>& t,
                             const AtmosphericLightMap<Scalar>& a, const char* who) {
  require_dims(img.same_size(t.height(), t.width()) && img.same_size(a.height(), a.width()),
               std::string(who) + ": image, transmission and atmospheric light sizes differ");
}

template <typename Scalar>
auto flat(const Plane<Scalar>& p) {
  return p.template reshaped<Eigen::RowMajor>();
}

}  // namespace detail

/// Forward scattering model I = J t + A (1 - t), per pixel and channel.
template <typename Scalar>
ImageGrid<Scalar> degrade(const ImageGrid<Scalar>& clean, const TransmissionMap<Scalar>& t,
                          const AtmosphericLightMap<Scalar>& a) {
  detail::require_same_field_size(clean, t, a, "degrade");
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> tv = detail::flat(t.values());
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> scatter = detail::flat(a.values()) * (Scalar(1) - tv);
  PixelArray<Scalar> out = (clean.pixels().colwise() * tv).colwise() + scatter;
  return ImageGrid<Scalar>::clamped(clean.height(), clean.width(), out);
}

/// Inverse of `degrade`: J = (I - A (1 - t)) / max(t, t_min), clamped to [0, 1].
template <typename Scalar>
ImageGrid<Scalar> enhance(const ImageGrid<Scalar>& observed, const TransmissionMap<Scalar>& t,
                          const AtmosphericLightMap<Scalar>& a) {
  detail::require_same_field_size(observed, t, a, "enhance");
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> tv = detail::flat(t.values());
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> scatter = detail::flat(a.values()) * (Scalar(1) - tv);
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> denom = tv.max(t.t_min());
  PixelArray<Scalar> out = (observed.pixels().colwise() - scatter).colwise() / denom;
  return ImageGrid<Scalar>::clamped(observed.height(), observed.width(), out);
}

}  // namespace lowlight
