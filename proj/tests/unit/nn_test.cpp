#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "planprobe/adam.hpp"
#include "planprobe/error.hpp"
#include "planprobe/grad_check.hpp"
#include "planprobe/grad_suite.hpp"
#include "planprobe/nn.hpp"

using namespace planprobe;
using namespace planprobe::nn;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

GradFragment central(GradFragment f) {
  f.stencil = Stencil::Central;
  f.eps = 1e-5;
  return f;
}

}  // namespace

TEST(Dense, IdentityWeightsPassInputThrough) {
  Dense d("d", 3, 3);
  for (std::size_t i = 0; i < 3; ++i) d.weight.value(i, i) = 1.0;
  Rng rng(1);
  const Matrix x = random_matrix(rng, 3, 4);
  EXPECT_EQ(d.forward(x), x);
}

TEST(Dense, ShapeMismatchNamesBothShapes) {
  Dense d("d", 3, 2);
  try {
    d.forward(Matrix(4, 1));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x1]"), std::string::npos) << msg;
  }
}

TEST(Lstm, ZeroParametersAndStateGiveZeroOutput) {
  LstmCell cell("l", 3, 4);
  cell.init_zero();
  Rng rng(2);
  const auto next = cell.forward(random_matrix(rng, 3, 2), LstmState::zeros(4, 2));
  for (double v : next.h.values()) EXPECT_EQ(v, 0.0);
  for (double v : next.c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, FourUnitCellMatchesCentralDifferences) {
  Rng rng(5);
  LstmCell cell("lstm", 3, 4);
  cell.init_uniform(rng);
  const Matrix x = random_matrix(rng, 3, 2);
  const LstmState prev{random_matrix(rng, 4, 2), random_matrix(rng, 4, 2)};
  const Matrix wh = random_matrix(rng, 4, 2), wc = random_matrix(rng, 4, 2);
  GradFragment f{"lstm4", cell.params(),
                 [&] {
                   const auto s = cell.forward(x, prev);
                   return dot(s.h.values(), wh.values()) + dot(s.c.values(), wc.values());
                 },
                 [&] {
                   zero_grads(cell.params());
                   LstmCache cache;
                   cell.forward(x, prev, &cache);
                   Matrix dx;
                   LstmState dprev;
                   cell.backward(cache, wh, wc, dx, dprev);
                 }};
  const auto r = grad_check(central(f), 1e-7);
  EXPECT_TRUE(r.pass) << r.max_relative_error << " at " << r.worst_param;
}

TEST(Dense, ThreeByThreeMatchesCentralDifferences) {
  Rng rng(6);
  Dense d("dense", 3, 3);
  d.init_uniform(rng);
  const Matrix x = random_matrix(rng, 3, 5), w = random_matrix(rng, 3, 5);
  GradFragment f{"dense3", d.params(), [&] { return dot(d.forward(x).values(), w.values()); },
                 [&] {
                   zero_grads(d.params());
                   d.backward(x, w);
                 }};
  const auto r = grad_check(central(f), 1e-7);
  EXPECT_TRUE(r.pass) << r.max_relative_error;
}

TEST(GradCheck, ZeroParameterFragmentPassesVacuously) {
  GradFragment f{"empty", {}, [] { return 1.0; }, [] {}};
  const auto r = grad_check(f);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.num_params, 0u);
}

TEST(GradCheck, WrongGradientIsCaught) {
  Param p("p", 2, 1);
  p.value[0] = 0.3;
  p.value[1] = -1.2;
  GradFragment f{"square", {&p}, [&] { return p.value[0] * p.value[0] + p.value[1] * p.value[1]; },
                 [&] {
                   p.grad[0] = 2.0 * p.value[0];
                   p.grad[1] = 2.0 * p.value[1] * 1.001;
                 }};
  EXPECT_FALSE(grad_check(f).pass);
}

TEST(GradCheck, OversizedFragmentIsRejected) {
  Param p("big", 101, 100);
  GradFragment f{"big", {&p}, [] { return 0.0; }, [] {}};
  EXPECT_THROW(grad_check(f), UsageError);
}

TEST(GradSuite, EveryFragmentPassesAcrossSeeds) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& r : run_grad_suite(seed)) {
      EXPECT_TRUE(r.pass) << "seed " << seed << " " << r.name << " " << r.max_relative_error << " at "
                          << r.worst_param;
    }
  }
}

TEST(Losses, SoftCrossEntropyValues) {
  EXPECT_NEAR(soft_binary_cross_entropy(0.5, 0.5), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(soft_binary_cross_entropy_grad(0.3, 0.9), (0.3 - 0.9) / (0.3 * 0.7), 1e-12);
  EXPECT_NEAR(soft_binary_cross_entropy_grad(0.3, 0.9), -2.857142857142857, 1e-12);
  const double mse = mean_squared_error(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0});
  EXPECT_EQ(mse, 0.0);
}

TEST(Losses, SoftCrossEntropyMinimizedAtTarget) {
  for (double y : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    const double at_min = soft_binary_cross_entropy(y, y);
    EXPECT_NEAR(at_min, binary_entropy(y), 1e-6);
    for (double p = 0.01; p < 1.0; p += 0.01) EXPECT_GE(soft_binary_cross_entropy(p, y) - at_min, -1e-6);
  }
}

TEST(Losses, ClampKeepsExtremePredictionsFinite) {
  EXPECT_TRUE(std::isfinite(soft_binary_cross_entropy(0.0, 1.0)));
  EXPECT_TRUE(std::isfinite(soft_binary_cross_entropy(1.0, 0.0)));
  EXPECT_THROW(soft_binary_cross_entropy(0.5, 1.5), DomainError);
}

TEST(Activations, SoftmaxSumsToOneAndSigmoidIsOpen) {
  Rng rng(3);
  Matrix logits = random_matrix(rng, 7, 5);
  logits(0, 0) = 800.0;
  const Matrix p = softmax_columns(logits);
  for (std::size_t c = 0; c < p.cols(); ++c) {
    double s = 0.0;
    for (double v : p.col(c)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  for (double x : {-30.0, -1.0, 0.0, 2.0, 30.0}) {
    EXPECT_GT(sigmoid(x), 0.0);
    EXPECT_LT(sigmoid(x), 1.0);
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(4);
  Param p("p", 3, 2);
  p.value = random_matrix(rng, 3, 2);
  const Matrix before = p.value;
  AdamState st({&p}, {});
  adam_step({&p}, st);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Param p("p", 1, 1);
  p.value[0] = 2.0;
  p.grad[0] = 1.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState st({&p}, cfg);
  adam_step({&p}, st);
  EXPECT_NEAR(p.value[0], 1.9, 1e-7);
}

TEST(Adam, IdenticalStatesGiveIdenticalResults) {
  Rng rng(8);
  Param a("a", 4, 3), b("b", 4, 3);
  a.value = b.value = random_matrix(rng, 4, 3);
  AdamState sa({&a}, {}), sb({&b}, {});
  for (int i = 0; i < 5; ++i) {
    a.grad = b.grad = random_matrix(rng, 4, 3);
    adam_step({&a}, sa);
    adam_step({&b}, sb);
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(Adam, NonFiniteGradientRaisesAndLeavesParameters) {
  Param p("p", 1, 2);
  p.grad[1] = NAN;
  AdamState st({&p}, {});
  EXPECT_THROW(adam_step({&p}, st), NumericError);
  EXPECT_EQ(p.value, Matrix(1, 2));
}
