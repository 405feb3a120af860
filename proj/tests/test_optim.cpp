#include "mcdrop/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {
namespace {

NetworkSpec scalar_spec() { return NetworkSpec::make({1, 1}, Nonlinearity::kReLU, 1.0); }

NetworkParams scalar_params(double w) {
  NetworkParams p = NetworkParams::zeros(scalar_spec());
  p.weights[0](0, 0) = w;
  return p;
}

NetworkParams scalar_grads(double g) {
  NetworkParams p = NetworkParams::zeros(scalar_spec());
  p.weights[0](0, 0) = g;
  return p;
}

TEST(Adam, FreshStateZeroGradientLeavesParamsUnchanged) {
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(1.5);
  AdamState state = AdamState::create(spec);
  adam_step(state, params, NetworkParams::zeros(spec));
  EXPECT_EQ(params.weights[0](0, 0), 1.5);
}

TEST(Adam, FirstStepHandValue) {
  AdamHyperparams hyper;
  hyper.step_size = 0.1;
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(1.0);
  AdamState state = AdamState::create(spec, hyper);
  adam_step(state, params, scalar_grads(2.0));
  // Bias-corrected first step moves by step_size * g/(|g| + eps).
  const double want = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(params.weights[0](0, 0), want, 1e-15);
}

TEST(Adam, MatchesScalarReferenceOverManySteps) {
  AdamHyperparams hyper;
  hyper.step_size = 0.05;
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(1.0);
  AdamState state = AdamState::create(spec, hyper);

  double w = 1.0, m = 0.0, v = 0.0;
  for (int step = 1; step <= 100; ++step) {
    const double g = 2.0 * w;  // d/dw of w^2
    NetworkParams grads = scalar_grads(2.0 * params.weights[0](0, 0));
    adam_step(state, params, grads);
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(hyper.beta1, step));
    const double v_hat = v / (1.0 - std::pow(hyper.beta2, step));
    w -= hyper.step_size * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    ASSERT_NEAR(params.weights[0](0, 0), w, 1e-12);
  }
  EXPECT_LT(std::abs(w), 1.0);
}

TEST(Adam, RejectsNonFiniteGradients) {
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(1.0);
  AdamState state = AdamState::create(spec);
  EXPECT_THROW(adam_step(state, params, scalar_grads(HUGE_VAL)), TrainingError);
  EXPECT_THROW(adam_step(state, params, scalar_grads(NAN)), TrainingError);
}

TEST(Sgd, MatchesHandRecurrence) {
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(1.0);
  NetworkParams velocity = NetworkParams::zeros(spec);
  const double eta = 0.1, mu = 0.9;
  double w = 1.0, v = 0.0;
  for (int step = 0; step < 5; ++step) {
    const double g = 2.0 * w;
    sgd_step(params, scalar_grads(2.0 * params.weights[0](0, 0)), eta, mu, velocity);
    v = mu * v - eta * g;
    w += v;
    ASSERT_NEAR(params.weights[0](0, 0), w, 1e-14);
    ASSERT_NEAR(velocity.weights[0](0, 0), v, 1e-14);
  }
}

TEST(Sgd, DegenerateHyperparams) {
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(3.0);
  NetworkParams velocity = NetworkParams::zeros(spec);
  sgd_step(params, scalar_grads(1.0), 0.0, 0.5, velocity);
  EXPECT_EQ(params.weights[0](0, 0), 3.0);
  sgd_step(params, scalar_grads(1.0), 0.1, 0.0, velocity);
  EXPECT_NEAR(params.weights[0](0, 0), 2.9, 1e-15);
  EXPECT_THROW(sgd_step(params, scalar_grads(NAN), 0.1, 0.0, velocity), TrainingError);
}

TEST(Sgd, DescendsConvexQuadraticWithinFiftySteps) {
  NetworkSpec spec = scalar_spec();
  NetworkParams params = scalar_params(4.0);
  NetworkParams velocity = NetworkParams::zeros(spec);
  double first = 16.0;
  for (int step = 0; step < 50; ++step)
    sgd_step(params, scalar_grads(2.0 * params.weights[0](0, 0)), 0.05, 0.5, velocity);
  const double w = params.weights[0](0, 0);
  EXPECT_LT(w * w, first);
  EXPECT_LT(std::abs(w), 0.5);
}

TEST(Schedule, ConstantWhenGammaZero) {
  LearningRateSchedule s{0.01, 0.0, 0.75};
  EXPECT_EQ(s.at(0), 0.01);
  EXPECT_EQ(s.at(1000000), 0.01);
}

TEST(Schedule, InverseDecayFormula) {
  LearningRateSchedule s{0.01, 0.0001, 0.75};
  EXPECT_DOUBLE_EQ(s.at(0), 0.01);
  EXPECT_DOUBLE_EQ(s.at(5000), 0.01 * std::pow(1.5, -0.75));
  EXPECT_LT(s.at(100000), s.at(1000));
}

TEST(Train, FitsTinyRegressionProblem) {
  NetworkSpec spec = NetworkSpec::make({1, 16, 1}, Nonlinearity::kTanH, 1.0);
  RngStream rng(101, 0);
  NetworkParams params = NetworkParams::init(spec, rng);
  Matrix x(16, 1), y(16, 1);
  for (std::size_t i = 0; i < 16; ++i) {
    x(i, 0) = -1.0 + 2.0 * static_cast<double>(i) / 15.0;
    y(i, 0) = 0.5 * x(i, 0);
  }
  TrainOptions opts;
  opts.epochs = 300;
  opts.batch_size = 8;
  opts.learning_rate.base = 0.01;
  TrainLog log = train_network(spec, params, x, y, DecaySpec::uniform(spec.depth(), 0.0), opts,
                               rng);
  ASSERT_EQ(log.epoch_objective.size(), 300u);
  EXPECT_LT(log.epoch_objective.back(), 0.05 * log.epoch_objective.front());
  EXPECT_LT(log.epoch_objective.back(), 1e-3);
}

TEST(Train, IdenticalSeedsGiveIdenticalTrajectories) {
  NetworkSpec spec = NetworkSpec::make({2, 8, 1}, Nonlinearity::kReLU, 0.9);
  RngStream data_rng(7, 7);
  Matrix x = Matrix::gaussian(12, 2, data_rng);
  Matrix y = Matrix::gaussian(12, 1, data_rng);
  TrainOptions opts;
  opts.epochs = 20;
  opts.batch_size = 4;

  auto run = [&]() {
    RngStream rng(33, 5);
    NetworkParams params = NetworkParams::init(spec, rng);
    train_network(spec, params, x, y, DecaySpec::uniform(spec.depth(), 0.01), opts, rng);
    return params;
  };
  NetworkParams a = run();
  NetworkParams b = run();
  for (std::size_t t = 0; t < a.tensor_count(); ++t) EXPECT_EQ(a.tensor(t), b.tensor(t));
}

}  // namespace
}  // namespace mcdrop
