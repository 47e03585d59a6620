#include "doctest.h"

#include <random>

#include "lowlight/losses.hpp"
#include "oracles.hpp"

using namespace lowlight;

namespace {

Mask random_mask(std::mt19937_64& rng, Index h, Index w, double p = 0.5) {
  std::bernoulli_distribution d(p);
  Mask m(h, w);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

std::vector<int> flat(const Mask& m) { return {m.data(), m.data() + m.size()}; }

AtmosphericLightMap<double> random_light(std::mt19937_64& rng, Index h, Index w) {
  const auto v = oracle::uniform_vector(rng, static_cast<std::size_t>(h * w));
  return AtmosphericLightMap<double>(Eigen::Map<const Plane<double>>(v.data(), h, w));
}

}  // namespace

TEST_CASE("mse_atmospheric examples") {
  std::mt19937_64 rng(1);
  const auto a = random_light(rng, 8, 8);
  CHECK(mse_atmospheric(a, a) == 0.0);
  CHECK(mse_atmospheric(AtmosphericLightMap<double>::constant(3, 4, 1.0), AtmosphericLightMap<double>::constant(3, 4, 0.0)) == 1.0);
  const auto b = random_light(rng, 8, 8);
  double sum = 0.0;
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c) sum += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
  CHECK(mse_atmospheric(a, b) == doctest::Approx(sum / 64.0).epsilon(1e-13));
  CHECK(mse_atmospheric(a, b) == mse_atmospheric(b, a));
}

TEST_CASE("mse_atmospheric over a batch divides by the batch size") {
  std::mt19937_64 rng(2);
  std::vector<AtmosphericLightMap<double>> est, gt;
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    est.push_back(random_light(rng, 4, 5));
    gt.push_back(random_light(rng, 4, 5));
    sum += mse_atmospheric(est.back(), gt.back());
  }
  CHECK(mse_atmospheric<double>(est, gt) == doctest::Approx(sum / 3.0).epsilon(1e-13));
  gt.pop_back();
  CHECK_THROWS_AS(mse_atmospheric<double>(est, gt), DimensionError);
  CHECK_THROWS_AS(mse_atmospheric(AtmosphericLightMap<double>::constant(2, 2, 0.5), AtmosphericLightMap<double>::constant(2, 3, 0.5)), DimensionError);
}

TEST_CASE("fusion with zero parameters gives one half") {
  FeatureMap<double> local(3, 3, 5);
  local.pixels().setRandom();
  const Eigen::VectorXd global = Eigen::VectorXd::Random(7);
  const auto s = fuse_saliency(local, global, FusionParams<double>::zero(5, 7));
  CHECK((s.pixels() == 0.5).all());
}

TEST_CASE("fusion hand case and bias shift invariance") {
  FeatureMap<double> local(1, 1, 1);
  local.pixels()(0, 0) = 1.0;
  const Eigen::VectorXd global = Eigen::VectorXd::Constant(1, 1.0);
  auto p = FusionParams<double>::zero(1, 1);
  p.w_local << 0.1, 0.4;
  p.w_global << 0.1, 0.6;
  // logits (0.2, 1.0)
  const double expected = std::exp(1.0) / (std::exp(0.2) + std::exp(1.0));
  const double got = fuse_saliency(local, global, p)(0, 0);
  CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  CHECK(got == doctest::Approx(0.6900).epsilon(1e-4));

  std::mt19937_64 rng(3);
  FeatureMap<double> big(4, 4, 3);
  big.pixels().setRandom();
  const Eigen::VectorXd g = Eigen::VectorXd::Random(2);
  auto q = FusionParams<double>::zero(3, 2);
  q.w_local.setRandom();
  q.w_global.setRandom();
  q.b_local << 0.3, -0.2;
  auto shifted = q;
  shifted.b_local.array() += 17.0;
  shifted.b_global.array() -= 4.0;
  CHECK((fuse_saliency(big, g, q).pixels() - fuse_saliency(big, g, shifted).pixels()).abs().maxCoeff() < 1e-12);

  const auto logits = fusion_logits(big, g, q);
  for (Index i = 0; i < logits.rows(); ++i) {
    const auto [p0, p1] = two_class_softmax(logits(i, 0), logits(i, 1));
    CHECK(std::abs(p0 + p1 - 1.0) < 1e-12);
  }
}

TEST_CASE("two_class_softmax does not overflow") {
  const auto [a0, a1] = two_class_softmax(0.0, 1000.0);
  CHECK(a1 == 1.0);
  CHECK(a0 >= 0.0);
  const auto [b0, b1] = two_class_softmax(800.0, -800.0);
  CHECK(b0 == 1.0);
  CHECK(b1 == 0.0);
}

TEST_CASE("fusion dimension mismatch") {
  FeatureMap<double> local(2, 2, 3);
  CHECK_THROWS_AS(fuse_saliency(local, Eigen::VectorXd(Eigen::VectorXd::Zero(2)), FusionParams<double>::zero(4, 2)), DimensionError);
  CHECK_THROWS_AS(fuse_saliency(local, Eigen::VectorXd(Eigen::VectorXd::Zero(3)), FusionParams<double>::zero(3, 2)), DimensionError);
}

TEST_CASE("cross_entropy examples") {
  std::mt19937_64 rng(4);
  const Mask truth = random_mask(rng, 8, 8);
  CHECK(cross_entropy(truth, image_from_mask<double>(truth)) == 0.0);
  CHECK(cross_entropy(truth, ImageGrid<double>::constant(8, 8, 1, 0.5)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const auto p = oracle::uniform_vector(rng, 64);
  const ImageGrid<double> prob(8, 8, Eigen::Map<const PixelArray<double>>(p.data(), 64, 1));
  double sum = 0.0;
  for (std::size_t i = 0; i < 64; ++i) sum -= std::log(std::max(truth.data()[i] ? p[i] : 1.0 - p[i], 1e-12));
  CHECK(cross_entropy(truth, prob) == doctest::Approx(sum / 64.0).epsilon(1e-13));
  CHECK(cross_entropy(truth, prob) >= 0.0);
}

TEST_CASE("cross_entropy clamps a confident wrong answer") {
  Mask truth = Mask::Constant(1, 2, true);
  const auto wrong = ImageGrid<double>::constant(1, 2, 1, 0.0);
  CHECK(cross_entropy(truth, wrong) == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(cross_entropy(truth, wrong)));
  CHECK_THROWS_AS(cross_entropy(Mask::Constant(2, 2, true), wrong), DimensionError);
  CHECK_THROWS_AS(cross_entropy(truth, wrong, 0.0), DomainError);
}

TEST_CASE("iou_boundary_loss examples") {
  Mask a = Mask::Zero(4, 4), b = Mask::Zero(4, 4);
  CHECK(iou_boundary_loss(a, b) == 0.0);
  a.block(0, 0, 2, 2).setConstant(true);
  CHECK(iou_boundary_loss(a, a) == 0.0);
  b.block(2, 2, 2, 2).setConstant(true);
  CHECK(iou_boundary_loss(a, b) == 1.0);
  Mask c = Mask::Zero(4, 4);
  c.block(0, 1, 2, 2).setConstant(true);  // overlaps a in 2 pixels
  CHECK(iou_boundary_loss(a, c) == 0.5);
  CHECK_THROWS_AS(iou_boundary_loss(a, Mask::Zero(3, 4)), DimensionError);
}

TEST_CASE("iou_boundary_loss matches counting, is symmetric and permutation invariant") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask a = random_mask(rng, 6, 7, 0.4), b = random_mask(rng, 6, 7, 0.6);
    const double l = iou_boundary_loss(a, b);
    CHECK(l == doctest::Approx(oracle::dice_loss(flat(a), flat(b))).epsilon(1e-15));
    CHECK(l == iou_boundary_loss(b, a));
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
    Mask pa(6, 7), pb(6, 7);
    for (Index i = 0; i < 42; ++i) {
      pa.data()[i] = a.data()[(i * 5) % 42];
      pb.data()[i] = b.data()[(i * 5) % 42];
    }
    CHECK(iou_boundary_loss(pa, pb) == l);
  }
}

TEST_CASE("total_loss examples and linearity") {
  const std::vector<double> zero{0.0, 0.0};
  CHECK(total_loss(zero, zero, LossWeights::uniform(2)) == 0.0);
  const std::vector<double> ce{0.5}, dice{0.25};
  CHECK(total_loss(ce, dice, LossWeights::uniform(1)) == 0.75);

  const std::vector<double> ce3{0.3, 0.7, 1.1}, dice3{0.2, 0.4, 0.9};
  LossWeights w{{0.5, 1.0, 2.0}, {1.5, 0.25, 0.75}};
  LossWeights w2 = w;
  for (auto& v : w2.lambda) v *= 2.0;
  for (auto& v : w2.gamma) v *= 2.0;
  CHECK(total_loss(ce3, dice3, w2) == doctest::Approx(2.0 * total_loss(ce3, dice3, w)));
  double manual = 0.0;
  for (int j = 0; j < 3; ++j) manual += w.lambda[j] * ce3[j] + w.gamma[j] * dice3[j];
  CHECK(total_loss(ce3, dice3, w) == doctest::Approx(manual).epsilon(1e-15));

  CHECK_THROWS_AS(total_loss(ce, dice3, w), DimensionError);
  CHECK_THROWS_AS(total_loss(ce, dice, LossWeights{{-1.0}, {1.0}}), DomainError);
  CHECK_THROWS_AS(total_loss(ce, dice, LossWeights{{1.0}, {1.0, 1.0}}), DimensionError);
}

TEST_CASE("joint_gan_objective examples") {
  CHECK(joint_gan_objective(0.0, 0.0, 1.0) == 0.0);
  CHECK(joint_gan_objective(0.5, 0.5, 0.5) == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-15));
  CHECK(joint_gan_objective(0.5, 0.5, 0.5) == doctest::Approx(-2.0794).epsilon(1e-4));
  double prev = joint_gan_objective(0.3, 0.2, 0.05);
  for (double d = 0.1; d <= 1.0; d += 0.05) {
    const double v = joint_gan_objective(0.3, 0.2, d);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(std::isfinite(joint_gan_objective(1.0, 1.0, 0.0)));
  CHECK(joint_gan_objective(1.0, 0.0, 1.0) == doctest::Approx(std::log(1e-12)));
  CHECK_THROWS_AS(joint_gan_objective(-0.1, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(joint_gan_objective(0.0, 0.0, 1.5), DomainError);
}
