#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lowlight/grid.hpp"

namespace lowlight {

inline constexpr double kDefaultBetaSq = 0.3;
inline constexpr int kDefaultThresholds = 256;

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision/recall swept over increasing thresholds.
struct PRCurve {
  std::vector<PrPoint> points;
};

struct PerImageResult {
  std::string id;
  double mae = 0.0;
  double best_f = 0.0;
};

struct EvalReport {
  double mae = 0.0;
  double max_f_beta = 0.0;
  double beta_sq = kDefaultBetaSq;
  std::size_t n_images = 0;
  PRCurve curve;
  std::vector<PerImageResult> per_image;
};

struct ConfusionCounts {
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
};

/// Threshold k of an n-point sweep, k / (n - 1).
inline double sweep_threshold(int k, int n) { return static_cast<double>(k) / static_cast<double>(n - 1); }

/// Positive iff value >= threshold.
template <typename Scalar>
Mask binarize(const ImageGrid<Scalar>& saliency, double threshold) {
  detail::require_dims(saliency.channels() == 1, "binarize: saliency map must be single-channel");
  return saliency.plane().template cast<double>() >= threshold;
}

inline ConfusionCounts confusion(const Mask& pred, const Mask& truth) {
  detail::require_dims(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "confusion: mask sizes differ");
  return {(pred && truth).count(), (pred && !truth).count(), (!pred && truth).count()};
}

/// (precision, recall) from counts. No predicted positives gives precision 1.
inline std::pair<double, double> precision_recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw DegenerateGroundTruthError("precision_recall: ground truth has no positive pixels");
  const double precision =
      c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return {precision, recall};
}

inline std::pair<double, double> precision_recall(const Mask& pred, const Mask& truth) {
  return precision_recall(confusion(pred, truth));
}

/// (1 + b^2) p r / (b^2 p + r); zero denominator gives 0.
inline double f_beta(double precision, double recall, double beta_sq = kDefaultBetaSq) {
  const double denom = beta_sq * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta_sq) * precision * recall / denom;
}

/// One pass over the pixels: each value is bucketed by the last threshold it
/// reaches, then suffix sums give the positives at every threshold. Equal to
/// binarizing at each threshold separately.
template <typename Scalar>
PRCurve pr_curve(const ImageGrid<Scalar>& saliency, const Mask& truth, int n_thresholds = kDefaultThresholds) {
  detail::require_domain(n_thresholds >= 2, "pr_curve: need at least two thresholds");
  detail::require_dims(saliency.channels() == 1 && saliency.same_size(truth.rows(), truth.cols()),
                       "pr_curve: saliency map and ground truth sizes differ");
  const Index gt_total = truth.count();
  if (gt_total == 0) throw DegenerateGroundTruthError("pr_curve: ground truth has no positive pixels");

  const auto n = static_cast<std::size_t>(n_thresholds);
  std::vector<Index> hist_pos(n, 0);
  std::vector<Index> hist_neg(n, 0);
  const Scalar* s = saliency.pixels().data();
  const bool* g = truth.data();
  for (Index i = 0; i < truth.size(); ++i) {
    const auto v = static_cast<double>(s[i]);
    int k = std::clamp(static_cast<int>(std::floor(v * (n_thresholds - 1))), 0, n_thresholds - 1);
    while (k + 1 < n_thresholds && sweep_threshold(k + 1, n_thresholds) <= v) ++k;
    while (k > 0 && sweep_threshold(k, n_thresholds) > v) --k;
    ++(g[i] ? hist_pos : hist_neg)[static_cast<std::size_t>(k)];
  }

  PRCurve curve;
  curve.points.resize(n);
  Index tp = 0;
  Index fp = 0;
  for (int k = n_thresholds - 1; k >= 0; --k) {
    tp += hist_pos[static_cast<std::size_t>(k)];
    fp += hist_neg[static_cast<std::size_t>(k)];
    const auto [p, r] = precision_recall(ConfusionCounts{tp, fp, gt_total - tp});
    curve.points[static_cast<std::size_t>(k)] = {sweep_threshold(k, n_thresholds), p, r};
  }
  return curve;
}

/// Mean absolute difference of two single-channel maps.
template <typename Scalar>
double mae(const ImageGrid<Scalar>& saliency, const ImageGrid<Scalar>& truth) {
  detail::require_dims(saliency.channels() == 1 && truth.channels() == 1 && saliency.same_shape(truth),
                       "mae: maps must be single-channel and of equal size");
  return static_cast<double>((saliency.pixels() - truth.pixels()).abs().sum()) /
         static_cast<double>(saliency.positions());
}

template <typename Scalar>
double mae(const ImageGrid<Scalar>& saliency, const Mask& truth) {
  detail::require_dims(saliency.channels() == 1 && saliency.same_size(truth.rows(), truth.cols()),
                       "mae: saliency map and mask sizes differ");
  return static_cast<double>((saliency.plane() - truth.cast<Scalar>()).abs().sum()) /
         static_cast<double>(saliency.positions());
}

inline double max_f_beta(const PRCurve& curve, double beta_sq = kDefaultBetaSq) {
  double best = 0.0;
  for (const auto& pt : curve.points) best = std::max(best, f_beta(pt.precision, pt.recall, beta_sq));
  return best;
}

struct EvalPair {
  std::string id;
  ImageGrid<double> saliency;
  Mask truth;
};

struct EvalOptions {
  int n_thresholds = kDefaultThresholds;
  double beta_sq = kDefaultBetaSq;
  unsigned jobs = 1;
};

/// Dataset report: mean MAE, the mean PR curve over images, and the maximum
/// F-beta along that mean curve. Images may be scored on up to `jobs`
/// threads; aggregation always runs in input order.
inline EvalReport evaluate_dataset(std::span<const EvalPair> pairs, const EvalOptions& opts = {}) {
  if (pairs.empty()) throw EmptyDatasetError("evaluate_dataset: no image pairs");
  detail::require_domain(opts.n_thresholds >= 2, "evaluate_dataset: need at least two thresholds");

  struct Scored {
    PRCurve curve;
    double mae = 0.0;
  };
  std::vector<Scored> scored(pairs.size());
  auto score = [&](std::size_t i) {
    scored[i].curve = pr_curve(pairs[i].saliency, pairs[i].truth, opts.n_thresholds);
    scored[i].mae = mae(pairs[i].saliency, pairs[i].truth);
  };

  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, pairs.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < pairs.size(); ++i) score(i);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < pairs.size(); i += jobs) score(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.beta_sq = opts.beta_sq;
  report.n_images = pairs.size();
  const auto n = static_cast<std::size_t>(opts.n_thresholds);
  report.curve.points.assign(n, PrPoint{});
  double mae_sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    mae_sum += scored[i].mae;
    for (std::size_t k = 0; k < n; ++k) {
      report.curve.points[k].precision += scored[i].curve.points[k].precision;
      report.curve.points[k].recall += scored[i].curve.points[k].recall;
    }
    report.per_image.push_back({pairs[i].id, scored[i].mae, max_f_beta(scored[i].curve, opts.beta_sq)});
  }
  const auto count = static_cast<double>(pairs.size());
  report.mae = mae_sum / count;
  for (std::size_t k = 0; k < n; ++k) {
    auto& pt = report.curve.points[k];
    pt.threshold = sweep_threshold(static_cast<int>(k), opts.n_thresholds);
    pt.precision /= count;
    pt.recall /= count;
  }
  report.max_f_beta = max_f_beta(report.curve, opts.beta_sq);
  return report;
}

}  // namespace lowlight
