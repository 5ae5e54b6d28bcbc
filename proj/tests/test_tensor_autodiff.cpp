#include <gtest/gtest.h>

#include <cmath>

#include "gradient_suite.hpp"
#include "mspc/adam.hpp"

using namespace mspc;
using namespace mspc::testing;

TEST(Tensor, ShapeAndReshape) {
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(1), 3);
  EXPECT_EQ(t.reshaped({3, 2}).dim(0), 3);
  EXPECT_THROW(t.reshaped({4, 2}), ContractViolation);
  EXPECT_THROW(Tensor<float>({2}, std::vector<float>{1, 2, 3}), ContractViolation);
}

TEST(Tensor, SliceAndSelect) {
  Tensor<double> t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  auto s = slice_leading(t, 1, 2);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s[0], 2);
  auto e = select_leading(t, 2);
  EXPECT_EQ(e.shape(), (Shape{2}));
  EXPECT_EQ(e[1], 5);
}

TEST(Backward, SumOfSquares) {
  Tape<double> tape;
  Var<double> w = tape.variable(Tensor<double>({3}, std::vector<double>{1, 2, 3}));
  tape.backward(ops::sum(ops::mul(w, w)));
  const auto g = tape.grad(w);
  EXPECT_EQ(g[0], 2);
  EXPECT_EQ(g[1], 4);
  EXPECT_EQ(g[2], 6);
}

TEST(Backward, L1OfIdenticalInputsHasZeroGradient) {
  Tape<double> tape;
  std::mt19937_64 rng(1);
  Var<double> a = tape.variable(random_tensor({4, 4}, rng));
  Var<double> loss = ops::l1_distance(a, a);
  EXPECT_EQ(loss.value().item(), 0.0);
  tape.backward(loss);
  const Tensor<double> g = tape.grad(a);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ParametersCollectedAndFrozenSkipped) {
  Parameter<double> p{"p", Tensor<double>({2}, 1.0)};
  Parameter<double> q{"q", Tensor<double>({2}, 2.0)};
  Tape<double> tape;
  Var<double> vp = tape.parameter(p, true);
  Var<double> vq = tape.parameter(q, false);
  auto grads = tape.backward(ops::sum(ops::mul(vp, vq)));
  ASSERT_EQ(grads.count(&p), 1u);
  EXPECT_EQ(grads.count(&q), 0u);
  EXPECT_EQ(grads.at(&p)[0], 2.0);
}

TEST(Backward, DetachStopsGradient) {
  Tape<double> tape;
  Var<double> a = tape.variable(Tensor<double>({2}, 3.0));
  Var<double> loss = ops::sum(ops::mul(tape.detach(a), a));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(a)[0], 3.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape<double> tape;
  Var<double> a = tape.variable(Tensor<double>({2}, 1.0));
  EXPECT_THROW(tape.backward(a), ContractViolation);
}

TEST(Backward, ShapeMismatchRejected) {
  Tape<double> tape;
  Var<double> a = tape.variable(Tensor<double>({2}, 1.0));
  Var<double> b = tape.variable(Tensor<double>({3}, 1.0));
  EXPECT_THROW(ops::add(a, b), ContractViolation);
  EXPECT_THROW(ops::matmul(a, b), ContractViolation);
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i) {
    auto fn = [](Tape<double>&, const std::vector<Var<double>>& v) {
      Var<double> h = ops::tanh(ops::mul(v[0], v[1]));
      h = ops::leaky_relu(ops::add(h, ops::scale(v[1], 0.5)));
      return ops::mean(ops::mul(h, h));
    };
    const auto r = check_gradients(fn, {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    EXPECT_LT(r.rel_error, 1e-4);
  }
}

TEST(Backward, ReplayIsDeterministic) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor({2, 2, 6, 6}, rng);
  const auto w = random_tensor({3, 2, 3, 3}, rng);
  auto run = [&] {
    Tape<double> tape;
    Var<double> vx = tape.variable(x), vw = tape.variable(w);
    Var<double> b = tape.constant(Tensor<double>({3}, 0.1));
    Var<double> loss = ops::mean(ops::tanh(ops::conv2d(vx, vw, b, 1, 1)));
    tape.backward(loss);
    return std::make_pair(loss.value().item(), tape.grad(vw).storage());
  };
  EXPECT_EQ(run(), run());
}

// Every primitive, 20 random instances, fp64.
TEST(GradientSuite, AllPrimitivesMatchFiniteDifferences) {
  for (const auto& r : run_gradient_suite(20)) {
    SCOPED_TRACE(r.name);
    EXPECT_LT(r.worst_rel, 1e-4);
  }
}

TEST(GradientSuite, Fp32WithinLooseTolerance) {
  // fp32 forward/backward compared against the fp64 analytic gradient.
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_tensor({1, 2, 5, 5}, rng), w = random_tensor({2, 2, 3, 3}, rng);
    Tape<double> td;
    Var<double> xd = td.variable(x), wd = td.variable(w);
    td.backward(ops::mean(ops::tanh(ops::conv2d(xd, wd, td.constant(Tensor<double>({2})), 1, 1))));
    Tape<float> tf;
    Var<float> xf = tf.variable(x.cast<float>()), wf = tf.variable(w.cast<float>());
    tf.backward(ops::mean(ops::tanh(ops::conv2d(xf, wf, tf.constant(Tensor<float>({2})), 1, 1))));
    const Tensor<double> gd = td.grad(wd);
    const Tensor<float> gf = tf.grad(wf);
    double diff = 0, norm = 0;
    for (size_t k = 0; k < gd.size(); ++k) {
      diff += std::pow(gd[k] - gf[k], 2);
      norm += gd[k] * gd[k];
    }
    EXPECT_LT(std::sqrt(diff / norm), 1e-2);
  }
}

TEST(L1Distance, Examples) {
  Tape<double> tape;
  Var<double> a = tape.constant(Tensor<double>({2}, std::vector<double>{0, 0}));
  Var<double> b = tape.constant(Tensor<double>({2}, std::vector<double>{1, -3}));
  EXPECT_DOUBLE_EQ(ops::l1_distance(a, b).value().item(), 2.0);
  EXPECT_EQ(ops::l1_distance(a, a).value().item(), 0.0);
}

TEST(L1Distance, MatchesLoopOracle) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor({8, 8}, rng), y = random_tensor({8, 8}, rng);
  double s = 0;
  for (size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  Tape<double> tape;
  EXPECT_NEAR(ops::l1_distance(tape.constant(x), tape.constant(y)).value().item(), s / 64.0, 1e-12);
}

TEST(GanTerms, ZeroLogits) {
  Tape<double> tape;
  Var<double> z = tape.constant(Tensor<double>({1, 1, 2, 2}, 0.0));
  const auto t = ops::gan_logistic_terms(z, z);
  EXPECT_NEAR(t.d_loss.value().item(), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(t.g_loss_nonsaturating.value().item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(t.g_loss_saturating.value().item(), -std::log(2.0), 1e-12);
}

TEST(GanTerms, PerfectDiscriminatorLimit) {
  Tape<double> tape;
  const auto t = ops::gan_logistic_terms(tape.constant(Tensor<double>({4}, 40.0)), tape.constant(Tensor<double>({4}, -40.0)));
  EXPECT_LT(t.d_loss.value().item(), 1e-15);
}

TEST(GanTerms, FiniteOverWideLogitRange) {
  for (double l = -50; l <= 50; l += 2.5) {
    Tape<double> tape;
    Var<double> a = tape.variable(Tensor<double>({1}, l)), b = tape.variable(Tensor<double>({1}, -l));
    const auto t = ops::gan_logistic_terms(a, b);
    Var<double> total = ops::add(ops::add(t.d_loss, t.g_loss_saturating), t.g_loss_nonsaturating);
    EXPECT_TRUE(std::isfinite(total.value().item()));
    tape.backward(total);
    EXPECT_TRUE(std::isfinite(tape.grad(a)[0]));
    EXPECT_TRUE(std::isfinite(tape.grad(b)[0]));
  }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Parameter<double> p{"p", Tensor<double>({3}, 0.7)};
  std::vector<Parameter<double>*> ps{&p};
  AdamState<double> st;
  GradientMap<double> g{{&p, Tensor<double>({3}, 0.0)}};
  for (int i = 0; i < 10; ++i) adam_step<double>(ps, g, st);
  for (double v : p.value.data()) EXPECT_EQ(v, 0.7);
}

TEST(Adam, FirstStepMovesByLr) {
  Parameter<double> p{"p", Tensor<double>({1}, 0.0)};
  std::vector<Parameter<double>*> ps{&p};
  AdamState<double> st;
  st.config.lr = 2e-4;
  adam_step<double>(ps, {{&p, Tensor<double>({1}, 1.0)}}, st);
  EXPECT_NEAR(p.value[0], -2e-4, 1e-10);  // eps shifts it by lr * 1e-8
}

TEST(Adam, ConvergesOnQuadratic) {
  Parameter<double> p{"w", Tensor<double>({1}, 0.0)};
  std::vector<Parameter<double>*> ps{&p};
  AdamState<double> st;
  st.config.lr = 0.1;
  for (int i = 0; i < 100; ++i) adam_step<double>(ps, {{&p, Tensor<double>({1}, 2 * (p.value[0] - 3))}}, st);
  EXPECT_LT(std::abs(p.value[0] - 3), 0.1);
}
