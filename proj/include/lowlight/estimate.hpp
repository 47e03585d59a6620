#pragma once

#include <algorithm>
#include <deque>
#include <numeric>
#include <vector>

#include "lowlight/grid.hpp"
#include "lowlight/lighting.hpp"
#include "lowlight/numeric.hpp"

namespace lowlight {

inline constexpr double kDefaultOmega = 0.95;
inline constexpr double kDefaultTopFraction = 0.001;
inline constexpr Index kDefaultDarkRadius = 7;

/// Windowed minimum over channels and a (2r+1)^2 patch; values in [0, 1].
template <typename Scalar>
class DarkChannel {
 public:
  explicit DarkChannel(Plane<Scalar> values) : values_(std::move(values)) {
    detail::require_domain(detail::all_in_unit_range(values_), "DarkChannel: value outside [0, 1]");
  }

  Index height() const { return values_.rows(); }
  Index width() const { return values_.cols(); }
  const Plane<Scalar>& values() const { return values_; }
  Scalar operator()(Index row, Index col) const { return values_(row, col); }

 private:
  Plane<Scalar> values_;
};

struct RefineConfig {
  double lambda_smooth = 2.0;
  int steps = 60;
  double step_size = 0.05;

  void validate() const {
    detail::require_domain(lambda_smooth >= 0.0, "RefineConfig: lambda_smooth must be nonnegative");
    detail::require_domain(steps >= 1, "RefineConfig: steps must be positive");
    detail::require_domain(step_size > 0.0, "RefineConfig: step_size must be positive");
  }
};

template <typename Scalar>
struct RefineResult {
  TransmissionMap<Scalar> transmission;
  /// Objective before the first step, then after every accepted step.
  std::vector<Scalar> objective;
};

namespace detail {

// 1-D sliding minimum over [i - r, i + r] clipped to [0, n) with a monotone deque.
template <typename Scalar>
void sliding_min(const Scalar* in, Scalar* out, Index n, Index stride, Index r) {
  std::deque<Index> window;
  Index next = 0;
  for (Index i = 0; i < n; ++i) {
    const Index hi = std::min(n - 1, i + r);
    for (; next <= hi; ++next) {
      while (!window.empty() && in[window.back() * stride] >= in[next * stride]) window.pop_back();
      window.push_back(next);
    }
    while (window.front() < i - r) window.pop_front();
    out[i * stride] = in[window.front() * stride];
  }
}

/// Truncated-window minimum filter; the rectangle is separable.
template <typename Scalar>
Plane<Scalar> window_min(const Plane<Scalar>& in, Index radius) {
  require_domain(radius >= 0, "window_min: radius must be nonnegative");
  const Index h = in.rows();
  const Index w = in.cols();
  if (radius == 0) return in;
  Plane<Scalar> rows(h, w);
  for (Index r = 0; r < h; ++r) sliding_min(in.data() + r * w, rows.data() + r * w, w, 1, radius);
  Plane<Scalar> out(h, w);
  for (Index c = 0; c < w; ++c) sliding_min(rows.data() + c, out.data() + c, h, w, radius);
  return out;
}

}  // namespace detail

template <typename Scalar>
DarkChannel<Scalar> dark_channel(const ImageGrid<Scalar>& img, Index radius) {
  return DarkChannel<Scalar>(detail::window_min(channel_min(img), radius));
}

/// Mean channel intensity over the ceil(top_fraction * H * W) pixels (at least
/// one) with the brightest dark channel, ties broken by row-major index.
/// Returned as a constant map.
template <typename Scalar>
AtmosphericLightMap<Scalar> estimate_atmospheric_light(const ImageGrid<Scalar>& img, const DarkChannel<Scalar>& dc,
                                                       double top_fraction = kDefaultTopFraction) {
  detail::require_domain(top_fraction > 0.0 && top_fraction <= 1.0,
                         "estimate_atmospheric_light: top_fraction must lie in (0, 1]");
  detail::require_dims(img.same_size(dc.height(), dc.width()),
                       "estimate_atmospheric_light: image and dark channel sizes differ");
  const auto n = static_cast<std::size_t>(img.positions());
  const std::size_t k = std::clamp<std::size_t>(ceil_count(top_fraction, n), 1, n);

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  const Scalar* d = dc.values().data();
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [d](Index a, Index b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

  const auto intensity = img.pixels().rowwise().mean();
  Scalar sum(0);
  for (std::size_t i = 0; i < k; ++i) sum += intensity(order[i]);
  const Scalar value = std::clamp(sum / static_cast<Scalar>(k), Scalar(0), Scalar(1));
  return AtmosphericLightMap<Scalar>::constant(img.height(), img.width(), value);
}

/// t = clamp(1 - omega * dark_channel(I / A), t_min, 1).
template <typename Scalar>
TransmissionMap<Scalar> init_transmission(const ImageGrid<Scalar>& img, const AtmosphericLightMap<Scalar>& a,
                                          double omega = kDefaultOmega, Index radius = kDefaultDarkRadius,
                                          Scalar t_min = Scalar(kDefaultTMin)) {
  detail::require_domain(omega > 0.0 && omega <= 1.0, "init_transmission: omega must lie in (0, 1]");
  detail::require_dims(img.same_size(a.height(), a.width()), "init_transmission: image and light sizes differ");
  if (!(a.values() > Scalar(0)).all())
    throw SingularParameterError("init_transmission: atmospheric light contains zero");
  // A is shared by all channels, so min_c(I_c / A) = min_c(I_c) / A.
  const Plane<Scalar> normalized = channel_min(img) / a.values();
  const Plane<Scalar> dc = detail::window_min(normalized, radius);
  return TransmissionMap<Scalar>::clamped(Scalar(1) - static_cast<Scalar>(omega) * dc, t_min);
}

namespace detail {

// Forward differences with zero flux past the last row/column.
template <typename Scalar>
Scalar smoothness_energy(const Plane<Scalar>& t) {
  const Index h = t.rows();
  const Index w = t.cols();
  Scalar e(0);
  if (w > 1) e += (t.rightCols(w - 1) - t.leftCols(w - 1)).square().sum();
  if (h > 1) e += (t.bottomRows(h - 1) - t.topRows(h - 1)).square().sum();
  return e;
}

template <typename Scalar>
Scalar refine_objective(const Plane<Scalar>& t, const Plane<Scalar>& t0, Scalar lambda) {
  return (t - t0).square().sum() + lambda * smoothness_energy(t);
}

/// Gradient of sum ||grad t||^2, i.e. 2 D^T D t for the forward-difference operator D.
template <typename Scalar>
Plane<Scalar> smoothness_gradient(const Plane<Scalar>& t) {
  const Index h = t.rows();
  const Index w = t.cols();
  Plane<Scalar> g = Plane<Scalar>::Zero(h, w);
  if (w > 1) {
    const Plane<Scalar> dx = t.rightCols(w - 1) - t.leftCols(w - 1);
    g.leftCols(w - 1) -= dx;
    g.rightCols(w - 1) += dx;
  }
  if (h > 1) {
    const Plane<Scalar> dy = t.bottomRows(h - 1) - t.topRows(h - 1);
    g.topRows(h - 1) -= dy;
    g.bottomRows(h - 1) += dy;
  }
  return Scalar(2) * g;
}

}  // namespace detail

/// Gradient descent on E(t) = sum (t - t0)^2 + lambda * sum ||grad t||^2.
///
/// A step that raises E is retried at half the step size (the reduction
/// persists); after 20 consecutive halvings without descent the iteration
/// stops early. The result is clamped to [t_min, 1] of t0.
template <typename Scalar>
RefineResult<Scalar> refine_transmission(const TransmissionMap<Scalar>& t0, const RefineConfig& cfg) {
  cfg.validate();
  constexpr int kMaxHalvings = 20;
  const Plane<Scalar>& target = t0.values();
  const auto lambda = static_cast<Scalar>(cfg.lambda_smooth);
  auto step = static_cast<Scalar>(cfg.step_size);

  Plane<Scalar> t = target;
  Scalar energy = detail::refine_objective(t, target, lambda);
  std::vector<Scalar> history{energy};
  history.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  for (int it = 0; it < cfg.steps; ++it) {
    const Plane<Scalar> grad = Scalar(2) * (t - target) + lambda * detail::smoothness_gradient(t);
    bool accepted = false;
    for (int halvings = 0; halvings <= kMaxHalvings; ++halvings) {
      Plane<Scalar> candidate = t - step * grad;
      const Scalar e = detail::refine_objective(candidate, target, lambda);
      if (e <= energy) {
        t = std::move(candidate);
        energy = e;
        accepted = true;
        break;
      }
      step /= Scalar(2);
    }
    if (!accepted) break;
    history.push_back(energy);
  }
  return {TransmissionMap<Scalar>::clamped(t, t0.t_min()), std::move(history)};
}

}  // namespace lowlight
