#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lowlight/grid.hpp"
#include "lowlight/rng.hpp"

namespace lowlight {

/// Projections of a non-local block over C channels: theta, phi and g map
/// C -> C/2, w_b maps C/2 -> C.
template <typename Scalar>
struct AffinityWeights {
  Matrix<Scalar> w_theta;
  Matrix<Scalar> w_phi;
  Matrix<Scalar> w_g;
  Matrix<Scalar> w_b;

  Index channels() const { return w_b.rows(); }

  static AffinityWeights zero(Index channels) {
    detail::require_dims(channels >= 2 && channels % 2 == 0, "AffinityWeights: channel count must be even");
    const Index half = channels / 2;
    return {Matrix<Scalar>::Zero(half, channels), Matrix<Scalar>::Zero(half, channels),
            Matrix<Scalar>::Zero(half, channels), Matrix<Scalar>::Zero(channels, half)};
  }

  /// Entries uniform on [-scale, scale), reproducible from `seed`.
  static AffinityWeights random(Index channels, std::uint64_t seed, double scale = 0.5) {
    AffinityWeights w = zero(channels);
    SplitMix64 rng(seed);
    for (Matrix<Scalar>* m : {&w.w_theta, &w.w_phi, &w.w_g, &w.w_b})
      for (Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<Scalar>(scale * (2.0 * rng.uniform() - 1.0));
    return w;
  }

  void validate() const {
    const Index c = channels();
    detail::require_dims(c >= 2 && c % 2 == 0, "AffinityWeights: channel count must be even");
    const Index half = c / 2;
    detail::require_dims(w_theta.rows() == half && w_theta.cols() == c && w_phi.rows() == half &&
                             w_phi.cols() == c && w_g.rows() == half && w_g.cols() == c && w_b.cols() == half,
                         "AffinityWeights: inconsistent matrix shapes");
    detail::require_domain(w_theta.allFinite() && w_phi.allFinite() && w_g.allFinite() && w_b.allFinite(),
                           "AffinityWeights: non-finite entry");
  }

  bool same_shape(const AffinityWeights& o) const {
    return w_theta.rows() == o.w_theta.rows() && w_theta.cols() == o.w_theta.cols() &&
           w_b.rows() == o.w_b.rows() && w_b.cols() == o.w_b.cols();
  }
};

/// Forward intermediates kept for the backward pass. Columns index positions.
template <typename Scalar>
struct NlCache {
  Index height = 0;
  Index width = 0;
  Matrix<Scalar> x;          // C x N
  Matrix<Scalar> theta;      // C/2 x N
  Matrix<Scalar> phi;        // C/2 x N
  Matrix<Scalar> g;          // C/2 x N
  Matrix<Scalar> attention;  // N x N, row-stochastic
  Matrix<Scalar> y;          // C/2 x N
  AffinityWeights<Scalar> weights;
};

template <typename Scalar>
struct NlForward {
  FeatureMap<Scalar> output;
  NlCache<Scalar> cache;
};

template <typename Scalar>
struct NlGradients {
  FeatureMap<Scalar> input;
  AffinityWeights<Scalar> weights;
};

namespace detail {

/// Sum of the values in ascending order. The result depends only on the
/// multiset of values, so permuting positions cannot change a single bit.
template <typename Scalar>
Scalar sorted_sum(std::vector<Scalar>& terms) {
  std::sort(terms.begin(), terms.end());
  Scalar s(0);
  for (Scalar v : terms) s += v;
  return s;
}

}  // namespace detail

/// Row-wise softmax with the row maximum subtracted first.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = m;
  std::vector<Scalar> terms(static_cast<std::size_t>(out.cols()));
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    for (Index c = 0; c < out.cols(); ++c) terms[static_cast<std::size_t>(c)] = row(c);
    row /= detail::sorted_sum(terms);
  }
  return out;
}

/// Affinities theta_i . phi_j, one fixed-order dot product per entry.
template <typename Scalar>
Matrix<Scalar> pairwise_logits(const Matrix<Scalar>& theta, const Matrix<Scalar>& phi) {
  Matrix<Scalar> z(theta.cols(), phi.cols());
  for (Index j = 0; j < phi.cols(); ++j)
    for (Index i = 0; i < theta.cols(); ++i) {
      Scalar s(0);
      for (Index k = 0; k < theta.rows(); ++k) s += theta(k, i) * phi(k, j);
      z(i, j) = s;
    }
  return z;
}

/// y_i = sum_j S_ij g_j, summed in value order (see detail::sorted_sum).
template <typename Scalar>
Matrix<Scalar> aggregate(const Matrix<Scalar>& g, const Matrix<Scalar>& attention) {
  const Index n = g.cols();
  Matrix<Scalar> y(g.rows(), n);
  std::vector<Scalar> terms(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < g.rows(); ++k) {
      for (Index j = 0; j < n; ++j) terms[static_cast<std::size_t>(j)] = attention(i, j) * g(k, j);
      y(k, i) = detail::sorted_sum(terms);
    }
  return y;
}

/// C = W_B y + B with y_i = sum_j S_ij g_j and S = softmax_rows(theta^T phi).
template <typename Scalar>
NlForward<Scalar> nl_forward(const FeatureMap<Scalar>& input, const AffinityWeights<Scalar>& weights) {
  weights.validate();
  detail::require_dims(input.channels() == weights.channels(),
                       "nl_forward: feature map has " + std::to_string(input.channels()) +
                           " channels, weights expect " + std::to_string(weights.channels()));
  NlCache<Scalar> cache;
  cache.height = input.height();
  cache.width = input.width();
  cache.x = input.pixels().matrix().transpose();
  cache.theta = weights.w_theta * cache.x;
  cache.phi = weights.w_phi * cache.x;
  cache.g = weights.w_g * cache.x;
  cache.attention = softmax_rows(pairwise_logits(cache.theta, cache.phi));
  cache.y = aggregate(cache.g, cache.attention);
  cache.weights = weights;

  Matrix<Scalar> out = weights.w_b * cache.y + cache.x;
  PixelArray<Scalar> px = out.transpose().array();
  return {FeatureMap<Scalar>(input.height(), input.width(), std::move(px)), std::move(cache)};
}

/// Exact gradients of a scalar loss given dL/dC = grad_out.
template <typename Scalar>
NlGradients<Scalar> nl_backward(const NlCache<Scalar>& cache, const FeatureMap<Scalar>& grad_out) {
  const AffinityWeights<Scalar>& w = cache.weights;
  detail::require_dims(grad_out.height() == cache.height && grad_out.width() == cache.width &&
                           grad_out.channels() == cache.x.rows(),
                       "nl_backward: upstream gradient shape does not match the cache");
  const Matrix<Scalar> d_out = grad_out.pixels().matrix().transpose();  // C x N
  const Matrix<Scalar>& s = cache.attention;

  AffinityWeights<Scalar> dw;
  dw.w_b = d_out * cache.y.transpose();
  const Matrix<Scalar> d_y = w.w_b.transpose() * d_out;  // C/2 x N

  // y = g S^T
  const Matrix<Scalar> d_g = d_y * s;
  const Matrix<Scalar> d_s = d_y.transpose() * cache.g;  // N x N

  // Softmax Jacobian per row: dZ_ij = S_ij (dS_ij - sum_k S_ik dS_ik).
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = (s.array() * d_s.array()).rowwise().sum();
  const Matrix<Scalar> d_z = (s.array() * (d_s.array().colwise() - row_dot.array())).matrix();

  // Z = theta^T phi
  const Matrix<Scalar> d_theta = cache.phi * d_z.transpose();
  const Matrix<Scalar> d_phi = cache.theta * d_z;

  dw.w_theta = d_theta * cache.x.transpose();
  dw.w_phi = d_phi * cache.x.transpose();
  dw.w_g = d_g * cache.x.transpose();

  Matrix<Scalar> d_x = d_out;
  d_x.noalias() += w.w_theta.transpose() * d_theta;
  d_x.noalias() += w.w_phi.transpose() * d_phi;
  d_x.noalias() += w.w_g.transpose() * d_g;

  PixelArray<Scalar> px = d_x.transpose().array();
  return {FeatureMap<Scalar>(cache.height, cache.width, std::move(px)), std::move(dw)};
}

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries that are zero up
/// to rounding from dominating the ratio.
inline double gradcheck_relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central-difference check of nl_backward on L = sum(R .* nl_forward(B, W))
/// for random B, W and R drawn from `seed`.
inline GradcheckReport nl_gradcheck(Index size, Index channels, std::uint64_t seed, double h = 1e-4) {
  SplitMix64 rng(splitmix64(seed));
  auto draw = [&rng] { return 2.0 * rng.uniform() - 1.0; };
  FeatureMap<double> input(size, size, channels);
  FeatureMap<double> probe(size, size, channels);
  for (Index i = 0; i < input.pixels().size(); ++i) input.pixels().data()[i] = draw();
  for (Index i = 0; i < probe.pixels().size(); ++i) probe.pixels().data()[i] = draw();
  AffinityWeights<double> weights = AffinityWeights<double>::random(channels, rng.next());

  auto loss = [&](const FeatureMap<double>& b, const AffinityWeights<double>& w) {
    return (nl_forward(b, w).output.pixels() * probe.pixels()).sum();
  };

  const auto fwd = nl_forward(input, weights);
  const auto grads = nl_backward(fwd.cache, probe);

  GradcheckReport report;
  auto check = [&](double* param, double analytic, auto&& eval) {
    const double saved = *param;
    *param = saved + h;
    const double up = eval();
    *param = saved - h;
    const double down = eval();
    *param = saved;
    report.max_relative_error =
        std::max(report.max_relative_error, gradcheck_relative_error(analytic, (up - down) / (2.0 * h)));
    ++report.entries_checked;
  };

  for (Index i = 0; i < input.pixels().size(); ++i)
    check(input.pixels().data() + i, grads.input.pixels().data()[i], [&] { return loss(input, weights); });

  Matrix<double>* params[] = {&weights.w_theta, &weights.w_phi, &weights.w_g, &weights.w_b};
  const Matrix<double>* analytic[] = {&grads.weights.w_theta, &grads.weights.w_phi, &grads.weights.w_g,
                                      &grads.weights.w_b};
  for (int m = 0; m < 4; ++m)
    for (Index i = 0; i < params[m]->size(); ++i)
      check(params[m]->data() + i, analytic[m]->data()[i], [&] { return loss(input, weights); });
  return report;
}

}  // namespace lowlight
