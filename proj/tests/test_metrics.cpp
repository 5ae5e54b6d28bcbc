#include <gtest/gtest.h>

#include <cmath>

#include "mspc/datasets.hpp"
#include "mspc/metrics.hpp"
#include "mspc/training.hpp"
#include "support.hpp"

using namespace mspc;
using namespace mspc::testing;

namespace {

// Applies a value-level image map per batch element; no gradient.
class MapModule final : public Module<float> {
 public:
  explicit MapModule(std::function<Tensor<float>(const Tensor<float>&)> f) : f_(std::move(f)) {}
  Var<float> forward(Var<float> x, ParamMode) const override {
    const Tensor<float> v = x.value();
    std::vector<Tensor<float>> out;
    for (int64_t b = 0; b < v.dim(0); ++b) out.push_back(f_(select_leading(v, b)));
    return x.tape().constant(stack<float>(out));
  }
  std::vector<Parameter<float>*> parameters() override { return {}; }
  std::unique_ptr<Module<float>> clone() const override { return std::make_unique<MapModule>(*this); }

 private:
  std::function<Tensor<float>(const Tensor<float>&)> f_;
};

DeformationGrid<double> jittered_grid(uint64_t seed, double amount) {
  std::mt19937_64 rng(seed);
  auto g = DeformationGrid<double>::identity(2);
  g.points += random_tensor({2, 2, 2}, rng, -amount, amount);
  return g;
}

}  // namespace

TEST(Wasserstein1d, Examples) {
  EXPECT_EQ(wasserstein1_1d({1, 2, 3}, {3, 1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1_1d({0}, {2.5}), 2.5);
  EXPECT_DOUBLE_EQ(wasserstein1_1d({0, 1}, {0.5}), 0.5);
}

TEST(SlicedWasserstein, IdenticalSetsGiveZero) {
  std::mt19937_64 rng(1);
  const auto a = random_tensor({10, 3, 4, 4}, rng);
  EXPECT_EQ(sliced_wasserstein(a, a, 64, 7), 0.0);
}

TEST(SlicedWasserstein, PointMassesAlongIdentityProjection) {
  const Tensor<double> a({1, 1}, 0.0), b({1, 1}, 1.75);
  EXPECT_DOUBLE_EQ(sliced_wasserstein(a, b, std::vector<std::vector<double>>{{1.0}}), 1.75);
}

TEST(SlicedWasserstein, SymmetricAndDeterministic) {
  std::mt19937_64 rng(2);
  const auto a = random_tensor({12, 5}, rng), b = random_tensor({9, 5}, rng, 0, 2);
  EXPECT_DOUBLE_EQ(sliced_wasserstein(a, b, 50, 3), sliced_wasserstein(b, a, 50, 3));
  EXPECT_EQ(sliced_wasserstein(a, b, 50, 3), sliced_wasserstein(a, b, 50, 3));
}

TEST(SlicedWasserstein, DimensionMismatchRejected) {
  const Tensor<double> a({2, 3}, 0.0), b({2, 4}, 0.0);
  EXPECT_THROW(sliced_wasserstein(a, b, 8, 0), ContractViolation);
}

TEST(SlicedWasserstein, CloseToHighProjectionReference) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0, 1);
  Tensor<double> a({300, 4}), b({300, 4});
  for (size_t k = 0; k < a.size(); ++k) {
    a[k] = n(rng);
    b[k] = 2.0 * n(rng) + 0.25;
  }
  const double reference = sliced_wasserstein(a, b, 10000, 99);
  for (uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_NEAR(sliced_wasserstein(a, b, 128, seed), reference, 0.05 * reference);
}

TEST(Residual, IdentityTGivesZero) {
  NetworkConfig nc;
  nc.image_size = 16;
  nc.base_width = 8;
  const auto m = build_models<double>(nc, 5);
  std::mt19937_64 rng(1);
  EXPECT_EQ(commutativity_residual(m, random_tensor({3, 3, 16, 16}, rng)), 0.0);
}

TEST(Residual, IdentityGeneratorCommutesWithAnyT) {
  IdentityModule<double> g;
  FixedGridT<double> t(jittered_grid(3, 0.4));
  std::mt19937_64 rng(1);
  EXPECT_EQ(commutativity_residual<double>(g, t, random_tensor({2, 3, 16, 16}, rng)), 0.0);
}

TEST(Residual, MatchesTrainingPath) {
  for (uint64_t s = 0; s < 3; ++s) {
    auto m = toy_models<double>(std::make_unique<TinyConvModule<double>>(3, s + 1),
                                std::make_unique<FixedGridT<double>>(jittered_grid(s + 10, 0.3)));
    std::mt19937_64 rng(s);
    const auto x = random_tensor({2, 3, 16, 16}, rng), y = random_tensor({2, 3, 16, 16}, rng);
    const double r = commutativity_residual(m, x);
    EXPECT_GT(r, 0.0);
    Trainer<double> t(std::move(m), TrainConfig{}, {});
    EXPECT_NEAR(t.compute_losses(x, y).r3, r, 1e-6);
  }
}

TEST(AlignmentTableTest, IdentityTCollapsesPairs) {
  NetworkConfig nc;
  nc.image_size = 16;
  nc.base_width = 8;
  const auto m = build_models<float>(nc, 2);
  const auto d = make_misaligned_task(1, 8, 16);
  const auto t = alignment_table(m, d.source, d.target);
  EXPECT_EQ(t.x_y, t.tx_ty);
  EXPECT_EQ(t.gx_y, t.gtx_ty);
  EXPECT_NE(t.x_y, t.gx_y);
  EXPECT_GT(t.x_y, 0.0);
}

TEST(AlignmentTableTest, SingleImageDomainsFinite) {
  NetworkConfig nc;
  nc.image_size = 16;
  nc.base_width = 8;
  const auto m = build_models<float>(nc, 2);
  const auto d = make_misaligned_task(1, 2, 16);
  const auto t = alignment_table(m, slice_leading(d.source, 0, 1), slice_leading(d.target, 1, 1));
  for (double v : {t.x_y, t.tx_ty, t.gx_y, t.gtx_ty}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(GroundTruth, PerfectGeneratorScoresPerfectly) {
  const auto d = make_misaligned_task(2, 6, 16);
  MapModule g(d.ground_truth);
  const auto e = ground_truth_error(g, d);
  EXPECT_EQ(e.l1, 0.0);
  EXPECT_EQ(e.accuracy, 1.0);
}

TEST(GroundTruth, ZeroGeneratorMatchesLoop) {
  const auto d = make_shapes_task(3, 5, 16);
  MapModule g([](const Tensor<float>& x) { return Tensor<float>(x.shape()); });
  double l1 = 0, hits = 0, count = 0;
  for (int64_t i = 0; i < d.source_count(); ++i) {
    const auto gt = d.ground_truth(d.source_image(i));
    for (float v : gt.data()) {
      l1 += std::abs(v);
      hits += std::abs(v) <= 0.1 ? 1 : 0;
      count += 1;
    }
  }
  const auto e = ground_truth_error(g, d);
  EXPECT_NEAR(e.l1, l1 / count, 1e-9);
  EXPECT_NEAR(e.accuracy, hits / count, 1e-12);
}

TEST(GroundTruth, FullRangeThresholdIsVacuous) {
  const auto d = make_shapes_task(3, 4, 16);
  MapModule g([](const Tensor<float>& x) { return Tensor<float>(x.shape(), -1.f); });
  EXPECT_EQ(ground_truth_error(g, d, 2.0).accuracy, 1.0);
}

TEST(GroundTruth, MissingTruthRejected) {
  auto d = make_shapes_task(3, 4, 16);
  d.ground_truth = nullptr;
  IdentityModule<float> g;
  EXPECT_THROW(ground_truth_error(g, d), ContractViolation);
}
