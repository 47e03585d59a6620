#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "lowlight/grid.hpp"
#include "lowlight/lighting.hpp"

namespace lowlight {

/// Per-scale weights of the combined saliency loss.
struct LossWeights {
  std::vector<double> lambda;
  std::vector<double> gamma;

  static LossWeights uniform(std::size_t scales, double value = 1.0) {
    return {std::vector<double>(scales, value), std::vector<double>(scales, value)};
  }

  void validate() const {
    detail::require_dims(!lambda.empty() && lambda.size() == gamma.size(),
                         "LossWeights: lambda and gamma must be nonempty and of equal length");
    const auto nonneg = [](double v) { return v >= 0.0; };
    detail::require_domain(std::all_of(lambda.begin(), lambda.end(), nonneg) &&
                               std::all_of(gamma.begin(), gamma.end(), nonneg),
                           "LossWeights: weights must be nonnegative");
  }
};

/// Two linear read-outs (local per-pixel features, one global vector) per class.
/// Row c of each matrix / entry c of each bias belongs to class c in {0, 1}.
template <typename Scalar>
struct FusionParams {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> w_local;
  Eigen::Matrix<Scalar, 2, 1> b_local = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> w_global;
  Eigen::Matrix<Scalar, 2, 1> b_global = Eigen::Matrix<Scalar, 2, 1>::Zero();

  static FusionParams zero(Index local_dims, Index global_dims) {
    FusionParams p;
    p.w_local = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>::Zero(2, local_dims);
    p.w_global = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>::Zero(2, global_dims);
    return p;
  }
};

/// Mean squared error over a batch of light maps: 1/(N H W) sum ||A - A_gt||^2.
template <typename Scalar>
Scalar mse_atmospheric(std::span<const AtmosphericLightMap<Scalar>> estimated,
                       std::span<const AtmosphericLightMap<Scalar>> ground_truth) {
  detail::require_dims(!estimated.empty() && estimated.size() == ground_truth.size(),
                       "mse_atmospheric: batch sizes differ or are empty");
  const Index h = estimated[0].height();
  const Index w = estimated[0].width();
  Scalar sum(0);
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    detail::require_dims(estimated[i].height() == h && estimated[i].width() == w && ground_truth[i].height() == h &&
                             ground_truth[i].width() == w,
                         "mse_atmospheric: map sizes differ");
    sum += (estimated[i].values() - ground_truth[i].values()).square().sum();
  }
  return sum / static_cast<Scalar>(static_cast<Index>(estimated.size()) * h * w);
}

template <typename Scalar>
Scalar mse_atmospheric(const AtmosphericLightMap<Scalar>& estimated, const AtmosphericLightMap<Scalar>& ground_truth) {
  return mse_atmospheric(std::span<const AtmosphericLightMap<Scalar>>(&estimated, 1),
                         std::span<const AtmosphericLightMap<Scalar>>(&ground_truth, 1));
}

/// Two-class softmax, returned as (p0, p1). Evaluated as a logistic of the
/// logit difference so that huge logits do not overflow.
template <typename Scalar>
std::pair<Scalar, Scalar> two_class_softmax(Scalar logit0, Scalar logit1) {
  const Scalar d = logit1 - logit0;
  if (d >= Scalar(0)) {
    const Scalar e = std::exp(-d);
    return {e / (Scalar(1) + e), Scalar(1) / (Scalar(1) + e)};
  }
  const Scalar e = std::exp(d);
  return {Scalar(1) / (Scalar(1) + e), e / (Scalar(1) + e)};
}

/// Per-pixel class logits W_L^c L(v) + b_L^c + W_G^c G + b_G^c, as an N x 2 array.
template <typename Scalar>
PixelArray<Scalar> fusion_logits(const FeatureMap<Scalar>& local, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& global,
                                 const FusionParams<Scalar>& p) {
  detail::require_dims(p.w_local.cols() == local.channels() && p.w_global.cols() == global.size(),
                       "fuse_saliency: feature dimensions do not match fusion parameters");
  const Eigen::Matrix<Scalar, 2, 1> shared = p.w_global * global + p.b_global + p.b_local;
  Matrix<Scalar> logits = local.pixels().matrix() * p.w_local.transpose();  // N x 2
  logits.rowwise() += shared.transpose();
  return logits.array();
}

/// Probability of the salient class (c = 1) at each pixel.
template <typename Scalar>
ImageGrid<Scalar> fuse_saliency(const FeatureMap<Scalar>& local, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& global,
                                const FusionParams<Scalar>& p) {
  const PixelArray<Scalar> logits = fusion_logits(local, global, p);
  PixelArray<Scalar> prob(logits.rows(), 1);
  for (Index i = 0; i < logits.rows(); ++i) prob(i, 0) = two_class_softmax(logits(i, 0), logits(i, 1)).second;
  return ImageGrid<Scalar>(local.height(), local.width(), std::move(prob));
}

/// -1/N sum_i log(max(p_i(true class), eps)); `predicted` holds P(class 1).
template <typename Scalar>
Scalar cross_entropy(const Mask& truth, const ImageGrid<Scalar>& predicted, Scalar eps = Scalar(1e-12)) {
  detail::require_dims(predicted.channels() == 1 && predicted.same_size(truth.rows(), truth.cols()),
                       "cross_entropy: mask and probability map sizes differ");
  detail::require_domain(eps > Scalar(0), "cross_entropy: eps must be positive");
  const Plane<Scalar> p = predicted.plane();
  const Plane<Scalar> p_true = truth.select(p, Scalar(1) - p);
  return -(p_true.max(eps).log().sum()) / static_cast<Scalar>(p.size());
}

/// Dice-form boundary loss 1 - 2|A n B| / (|A| + |B|); two empty masks give 0.
inline double iou_boundary_loss(const Mask& a, const Mask& b) {
  detail::require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "iou_boundary_loss: mask sizes differ");
  const Index inter = (a && b).count();
  const Index total = a.count() + b.count();
  if (total == 0) return 0.0;
  return 1.0 - 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

/// sum_j lambda_j ce_j + sum_j gamma_j dice_j, where dice_j is already the boundary loss value.
inline double total_loss(std::span<const double> ce_per_scale, std::span<const double> dice_per_scale,
                         const LossWeights& w) {
  w.validate();
  detail::require_dims(ce_per_scale.size() == w.lambda.size() && dice_per_scale.size() == w.gamma.size(),
                       "total_loss: per-scale losses and weights differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < ce_per_scale.size(); ++j) total += w.lambda[j] * ce_per_scale[j];
  for (std::size_t j = 0; j < dice_per_scale.size(); ++j) total += w.gamma[j] * dice_per_scale[j];
  return total;
}

/// log(1 - D(t_fake)) + log(1 - D(J_fake)) + log(D(t, J)) at given discriminator outputs.
inline double joint_gan_objective(double d_t_fake, double d_j_fake, double d_real) {
  static constexpr double kEps = 1e-12;
  const auto in_unit = [](double d) { return d >= 0.0 && d <= 1.0; };
  detail::require_domain(in_unit(d_t_fake) && in_unit(d_j_fake) && in_unit(d_real),
                         "joint_gan_objective: discriminator outputs must lie in [0, 1]");
  const auto safe_log = [](double v) { return std::log(std::max(v, kEps)); };
  return safe_log(1.0 - d_t_fake) + safe_log(1.0 - d_j_fake) + safe_log(d_real);
}

}  // namespace lowlight
