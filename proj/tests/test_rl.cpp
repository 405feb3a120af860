// Foraging world, replay buffer, action selection and the Q-learner.

#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/rl.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop::rl {
namespace {

RlConstants empty_arena() {
  RlConstants c;
  c.item_count = 0;
  return c;
}

// ---------------------------------------------------------------------------
// World dynamics
// ---------------------------------------------------------------------------

TEST(World, StraightStepInOpenSpaceEarnsExactlyTheBonus) {
  World w = World::create(empty_arena(), 1);
  const World::StepResult r = w.step(2);
  EXPECT_DOUBLE_EQ(r.reward, 0.05);
  EXPECT_DOUBLE_EQ(w.agent_x(), 353.0);
  EXPECT_DOUBLE_EQ(w.agent_y(), 250.0);
  EXPECT_DOUBLE_EQ(w.heading(), 0.0);
}

TEST(World, TurningStepsInOpenSpaceAreFree) {
  for (std::size_t action : {0u, 1u, 3u, 4u}) {
    World w = World::create(empty_arena(), 1);
    const World::StepResult r = w.step(action);
    EXPECT_DOUBLE_EQ(r.reward, 0.0) << "action " << action;
  }
}

TEST(World, TurnDirectionsAndSpeedsFollowTheActionTable) {
  const RlConstants c = empty_arena();
  World hard_left = World::create(c, 1);
  hard_left.step(0);
  EXPECT_DOUBLE_EQ(hard_left.heading(), 0.3);
  EXPECT_NEAR(hard_left.agent_x(), 350.0 + 2.5 * std::cos(0.3), 1e-12);
  EXPECT_NEAR(hard_left.agent_y(), 250.0 + 2.5 * std::sin(0.3), 1e-12);

  World soft_right = World::create(c, 1);
  soft_right.step(3);
  EXPECT_DOUBLE_EQ(soft_right.heading(), -0.1);
  EXPECT_NEAR(soft_right.agent_x(), 350.0 + 2.75 * std::cos(0.1), 1e-12);
  EXPECT_NEAR(soft_right.agent_y(), 250.0 - 2.75 * std::sin(0.1), 1e-12);
}

TEST(World, EmptyArenaObservationIsAllZeroAtTheCenter) {
  const World w = World::create(empty_arena(), 1);
  const std::vector<double> obs = w.observe();
  ASSERT_EQ(obs.size(), 27u);
  for (double v : obs) EXPECT_EQ(v, 0.0);
}

// Driving straight from the center parks the agent against the right wall
// at x = 690 exactly; the middle eye then sees the wall 10 units ahead.
TEST(World, WallChannelMatchesTheDistanceGeometry) {
  World w = World::create(empty_arena(), 1);
  for (int i = 0; i < 200; ++i) w.step(2);
  EXPECT_DOUBLE_EQ(w.agent_x(), 690.0);
  EXPECT_DOUBLE_EQ(w.agent_y(), 250.0);
  EXPECT_DOUBLE_EQ(w.heading(), 0.0);

  const std::vector<double> obs = w.observe();
  EXPECT_DOUBLE_EQ(obs[4 * 3 + 2], 1.0 - 10.0 / 85.0);
  // Eyes mirrored about the heading see the same wall distance.
  for (std::size_t e = 0; e < 4; ++e) EXPECT_DOUBLE_EQ(obs[e * 3 + 2], obs[(8 - e) * 3 + 2]);
  // No items anywhere, red and green channels stay dark.
  for (std::size_t e = 0; e < 9; ++e) {
    EXPECT_EQ(obs[e * 3 + 0], 0.0);
    EXPECT_EQ(obs[e * 3 + 1], 0.0);
  }

  const World::StepResult pinned = w.step(2);
  double wall_sum = 0.0;
  for (std::size_t e = 0; e < 9; ++e) wall_sum += pinned.observation[e * 3 + 2];
  EXPECT_DOUBLE_EQ(pinned.reward, 0.05 - 0.05 * wall_sum / 9.0);
}

TEST(World, RedPickupsPayOneAndRespawnTheItem) {
  RlConstants c;
  c.red_fraction = 1.0;
  c.forward_bonus = 0.0;
  c.wall_gaze_coeff = 0.0;
  World w = World::create(c, 99);
  for (const Item& item : w.items()) EXPECT_TRUE(item.red);

  RngStream actions(5, 0x77);
  std::size_t pickups = 0;
  for (int step = 0; step < 5000 && pickups < 3; ++step) {
    const std::vector<Item> before = w.items();
    const World::StepResult r = w.step(actions.next_below(kActionCount));
    ASSERT_GE(r.reward, 0.0);
    ASSERT_EQ(r.reward, std::round(r.reward));
    if (r.reward > 0.0) {
      ++pickups;
      EXPECT_EQ(w.items().size(), before.size());
      std::size_t moved = 0;
      for (std::size_t i = 0; i < before.size(); ++i)
        if (before[i].x != w.items()[i].x || before[i].y != w.items()[i].y) ++moved;
      EXPECT_EQ(moved, static_cast<std::size_t>(r.reward));
    }
  }
  EXPECT_GE(pickups, 1u);
}

TEST(World, GreenPickupsCostOne) {
  RlConstants c;
  c.red_fraction = 0.0;
  c.forward_bonus = 0.0;
  c.wall_gaze_coeff = 0.0;
  World w = World::create(c, 99);
  for (const Item& item : w.items()) EXPECT_FALSE(item.red);

  RngStream actions(5, 0x78);
  bool hit = false;
  for (int step = 0; step < 5000 && !hit; ++step) {
    const World::StepResult r = w.step(actions.next_below(kActionCount));
    ASSERT_LE(r.reward, 0.0);
    ASSERT_EQ(r.reward, std::round(r.reward));
    hit = r.reward < 0.0;
  }
  EXPECT_TRUE(hit);
}

TEST(World, TenThousandRandomStepsStayInBounds) {
  World w = World::create(RlConstants{}, 1234);
  RngStream actions(9, 0x55);
  for (int step = 0; step < 10000; ++step) {
    const World::StepResult r = w.step(actions.next_below(kActionCount));
    ASSERT_TRUE(std::isfinite(r.reward));
    ASSERT_GE(w.agent_x(), 10.0);
    ASSERT_LE(w.agent_x(), 690.0);
    ASSERT_GE(w.agent_y(), 10.0);
    ASSERT_LE(w.agent_y(), 490.0);
    ASSERT_EQ(r.observation.size(), 27u);
    for (double v : r.observation) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
  for (const Item& item : w.items()) {
    EXPECT_GE(item.x, 10.0);
    EXPECT_LE(item.x, 690.0);
    EXPECT_GE(item.y, 10.0);
    EXPECT_LE(item.y, 490.0);
  }
}

TEST(World, HalfRedFractionSplitsTheItems) {
  const World w = World::create(RlConstants{}, 3);
  std::size_t red = 0;
  for (const Item& item : w.items()) red += item.red ? 1 : 0;
  EXPECT_EQ(red, 25u);
}

TEST(World, RejectsOutOfRangeActions) {
  World w = World::create(RlConstants{}, 1);
  EXPECT_THROW(w.step(kActionCount), DomainError);
}

// ---------------------------------------------------------------------------
// Replay buffer
// ---------------------------------------------------------------------------

Transition tagged(double reward) {
  Transition t;
  t.obs = {reward};
  t.next_obs = {0.0};
  t.action = 0;
  t.reward = reward;
  return t;
}

TEST(ReplayBuffer, OverwritesOldestOnceFull) {
  ReplayBuffer buffer(4);
  EXPECT_EQ(buffer.capacity(), 4u);
  EXPECT_EQ(buffer.size(), 0u);
  for (int i = 0; i < 6; ++i) buffer.push(tagged(i));
  EXPECT_EQ(buffer.size(), 4u);
  EXPECT_DOUBLE_EQ(buffer.at(0).reward, 4.0);
  EXPECT_DOUBLE_EQ(buffer.at(1).reward, 5.0);
  EXPECT_DOUBLE_EQ(buffer.at(2).reward, 2.0);
  EXPECT_DOUBLE_EQ(buffer.at(3).reward, 3.0);
  EXPECT_THROW(buffer.at(4), DomainError);
}

TEST(ReplayBuffer, PartiallyFilledIndexStopsAtSize) {
  ReplayBuffer buffer(8);
  buffer.push(tagged(1.0));
  buffer.push(tagged(2.0));
  EXPECT_EQ(buffer.size(), 2u);
  EXPECT_THROW(buffer.at(2), DomainError);
}

TEST(ReplayBuffer, SamplingIsUniformOverTheFilledRegion) {
  ReplayBuffer buffer(8);
  for (int i = 0; i < 8; ++i) buffer.push(tagged(i));
  RngStream rng(77, 0x3);
  std::vector<std::size_t> counts(8, 0);
  const std::size_t draws = 16000;
  for (std::size_t i = 0; i < draws; ++i)
    counts[static_cast<std::size_t>(buffer.sample(rng).reward)]++;
  // Binomial(16000, 1/8): sd ~= 41.8, keep 3 sigma.
  for (std::size_t k = 0; k < 8; ++k)
    EXPECT_NEAR(static_cast<double>(counts[k]), 2000.0, 126.0) << "slot " << k;
}

TEST(ReplayBuffer, RejectsEmptySamplingAndZeroCapacity) {
  EXPECT_THROW(ReplayBuffer(0), DomainError);
  ReplayBuffer buffer(4);
  RngStream rng(1, 1);
  EXPECT_THROW(buffer.sample(rng), StateError);
}

// ---------------------------------------------------------------------------
// Action selection
// ---------------------------------------------------------------------------

TEST(ArgmaxLowest, TiesGoToTheLowestIndex) {
  EXPECT_EQ(argmax_lowest({1.0, 5.0, 2.0, 0.0, 3.0}), 1u);
  EXPECT_EQ(argmax_lowest({7.0, 3.0, 7.0, 7.0, 1.0}), 0u);
  EXPECT_EQ(argmax_lowest({2.0, 2.0, 2.0}), 0u);
  EXPECT_EQ(argmax_lowest({4.0}), 0u);
}

// Identity single-layer net: the Q-vector is the observation itself.
struct IdentityNet {
  NetworkSpec spec;
  NetworkParams params;
};

IdentityNet identity_net() {
  IdentityNet net;
  net.spec = NetworkSpec::make({5, 5}, Nonlinearity::kReLU, 1.0, LossKind::kEuclidean);
  net.params = NetworkParams::zeros(net.spec);
  for (std::size_t i = 0; i < 5; ++i) net.params.weights[0](i, i) = 1.0;
  return net;
}

TEST(EpsilonGreedy, ZeroEpsilonPicksTheArgmax) {
  const IdentityNet net = identity_net();
  RngStream rng(1, 2);
  EXPECT_EQ(act_epsilon_greedy(net.spec, net.params, {1.0, 5.0, 2.0, 0.0, 3.0}, 0.0, rng), 1u);
  EXPECT_EQ(act_epsilon_greedy(net.spec, net.params, {7.0, 3.0, 7.0, 7.0, 1.0}, 0.0, rng), 0u);
}

TEST(EpsilonGreedy, FullEpsilonIsUniform) {
  const NetworkSpec spec = default_qnet_spec(1.0);
  const NetworkParams params = NetworkParams::zeros(spec);
  const std::vector<double> obs(27, 0.3);
  RngStream rng(123, 0x5EED);
  std::vector<std::size_t> counts(kActionCount, 0);
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i)
    counts[act_epsilon_greedy(spec, params, obs, 1.0, rng)]++;
  // Binomial(1e5, 0.2): sd ~= 126.5, keep 3 sigma.
  for (std::size_t a = 0; a < kActionCount; ++a)
    EXPECT_NEAR(static_cast<double>(counts[a]), 20000.0, 380.0) << "action " << a;
}

TEST(EpsilonGreedy, RejectsEpsilonOutsideUnitInterval) {
  const IdentityNet net = identity_net();
  RngStream rng(1, 2);
  const std::vector<double> obs(5, 0.0);
  EXPECT_THROW(act_epsilon_greedy(net.spec, net.params, obs, -0.01, rng), DomainError);
  EXPECT_THROW(act_epsilon_greedy(net.spec, net.params, obs, 1.01, rng), DomainError);
}

TEST(Thompson, WithoutDropoutEqualsTheGreedyAction) {
  const IdentityNet net = identity_net();
  RngStream value_rng(8, 0x11);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> q(5);
    for (double& v : q) v = 2.0 * value_rng.next_uniform() - 1.0;
    RngStream thompson_rng(rep, 0x22);
    RngStream greedy_rng(rep, 0x22);
    EXPECT_EQ(act_thompson(net.spec, net.params, q, thompson_rng),
              act_epsilon_greedy(net.spec, net.params, q, 0.0, greedy_rng));
  }
}

TEST(Thompson, SameStreamStateReplaysTheSameAction) {
  const NetworkSpec spec = default_qnet_spec(0.8);
  RngStream init(3, 1);
  const NetworkParams params = NetworkParams::init(spec, init);
  const std::vector<double> obs(27, 0.25);
  std::vector<std::size_t> first, second;
  RngStream a(6, 0x9);
  RngStream b(6, 0x9);
  for (int i = 0; i < 20; ++i) first.push_back(act_thompson(spec, params, obs, a));
  for (int i = 0; i < 20; ++i) second.push_back(act_thompson(spec, params, obs, b));
  EXPECT_EQ(first, second);
}

// Two droppable units (the input and the lone hidden unit) at keep 0.5.
// Both kept: q = [2, -1.5], argmax 0; any unit dropped: q = [0, 0.5],
// argmax 1. So P(action 0) = 0.25 exactly.
TEST(Thompson, ActionFrequenciesMatchMaskEnumeration) {
  NetworkSpec spec = NetworkSpec::make({1, 1, 2}, Nonlinearity::kReLU, 0.5, LossKind::kEuclidean);
  NetworkParams params = NetworkParams::zeros(spec);
  params.weights[0](0, 0) = 2.0;
  params.weights[1](0, 0) = 1.0;
  params.weights[1](0, 1) = -1.0;
  params.biases[1][1] = 0.5;

  RngStream rng(31, 0x13);
  const std::size_t draws = 40000;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < draws; ++i)
    if (act_thompson(spec, params, {1.0}, rng) == 0) ++zeros;
  // Binomial(4e4, 0.25): sd ~= 86.6, keep 3 sigma.
  EXPECT_NEAR(static_cast<double>(zeros), 10000.0, 260.0);
}

// ---------------------------------------------------------------------------
// Q-learner
// ---------------------------------------------------------------------------

TEST(QLearner, RequiresOneFullBatch) {
  const NetworkSpec spec = NetworkSpec::make({2, 4, 5}, Nonlinearity::kReLU, 1.0,
                                             LossKind::kEuclidean);
  RngStream rng(4, 1);
  QLearner learner = QLearner::create(spec, rng);
  ReplayBuffer buffer(16);
  buffer.push(tagged(1.0));
  QLearnerOptions opt;
  opt.batch_size = 8;
  EXPECT_THROW(learner.replay_train(buffer, opt, rng), StateError);
}

Transition fixed_transition() {
  Transition t;
  t.obs = {0.3, -0.2};
  t.next_obs = {0.0, 0.0};
  t.action = 3;
  t.reward = 0.7;
  return t;
}

TEST(QLearner, GammaZeroRegressesTheTakenActionOntoTheReward) {
  const NetworkSpec spec = NetworkSpec::make({2, 8, 5}, Nonlinearity::kReLU, 1.0,
                                             LossKind::kEuclidean);
  RngStream init(21, 1);
  QLearner learner = QLearner::create(spec, init);
  ReplayBuffer buffer(64);
  for (int i = 0; i < 64; ++i) buffer.push(fixed_transition());

  QLearnerOptions opt;
  opt.batch_size = 16;
  opt.gamma = 0.0;
  opt.learning_rate = 0.05;
  opt.momentum = 0.0;
  opt.frozen_refresh = 10;

  const Transition t = fixed_transition();
  auto taken_q = [&] { return forward_weight_averaged(spec, learner.params, t.obs)[3]; };
  const double initial_err = std::abs(taken_q() - 0.7);
  RngStream rng(21, 2);
  for (int step = 0; step < 400; ++step) learner.replay_train(buffer, opt, rng);
  const double final_err = std::abs(taken_q() - 0.7);
  EXPECT_LT(final_err, 0.02);
  EXPECT_LT(final_err, initial_err);
  EXPECT_EQ(learner.replay_steps, 400u);
}

TEST(QLearner, UntakenActionsKeepTheirOutputWeights) {
  const NetworkSpec spec = NetworkSpec::make({2, 6, 5}, Nonlinearity::kReLU, 1.0,
                                             LossKind::kEuclidean);
  RngStream init(9, 1);
  QLearner learner = QLearner::create(spec, init);
  const NetworkParams before = learner.params;

  ReplayBuffer buffer(32);
  for (int i = 0; i < 32; ++i) buffer.push(fixed_transition());
  QLearnerOptions opt;
  opt.batch_size = 32;
  opt.gamma = 0.0;
  opt.learning_rate = 0.01;

  RngStream rng(9, 2);
  learner.replay_train(buffer, opt, rng);

  // The last weight layer is actions x hidden; only the taken action's
  // row receives gradient.
  const Matrix& w_before = before.weights.back();
  const Matrix& w_after = learner.params.weights.back();
  bool taken_changed = false;
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t h = 0; h < w_after.cols(); ++h) {
      if (a == 3)
        taken_changed = taken_changed || w_after(a, h) != w_before(a, h);
      else
        EXPECT_EQ(w_after(a, h), w_before(a, h)) << "action " << a << " hidden " << h;
    }
  EXPECT_TRUE(taken_changed);
  for (std::size_t a = 0; a < 5; ++a) {
    if (a == 3) continue;
    EXPECT_EQ(learner.params.biases.back()[a], before.biases.back()[a]);
  }
  EXPECT_NE(learner.params.biases.back()[3], before.biases.back()[3]);
}

TEST(QLearner, ZeroLearningRateLeavesParamsUntouched) {
  const NetworkSpec spec = NetworkSpec::make({2, 6, 5}, Nonlinearity::kReLU, 0.8,
                                             LossKind::kEuclidean);
  RngStream init(14, 1);
  QLearner learner = QLearner::create(spec, init);
  const NetworkParams before = learner.params;

  ReplayBuffer buffer(32);
  RngStream fill(14, 3);
  for (int i = 0; i < 32; ++i) {
    Transition t;
    t.obs = {fill.next_gaussian(), fill.next_gaussian()};
    t.next_obs = {fill.next_gaussian(), fill.next_gaussian()};
    t.action = fill.next_below(5);
    t.reward = fill.next_gaussian();
    buffer.push(std::move(t));
  }
  QLearnerOptions opt;
  opt.batch_size = 8;
  opt.learning_rate = 0.0;
  RngStream rng(14, 2);
  learner.replay_train(buffer, opt, rng);
  for (std::size_t t = 0; t < before.tensor_count(); ++t)
    EXPECT_EQ(learner.params.tensor(t), before.tensor(t));
}

// Replays the learner's internal draws (batch sampling, then masks) off a
// cloned stream, rebuilds the half-squared TD loss those draws induce, and
// checks the applied update against central differences.
TEST(QLearner, ReplayStepGradientMatchesFiniteDifferences) {
  const NetworkSpec spec = NetworkSpec::make({2, 5, 5}, Nonlinearity::kTanH, 0.7,
                                             LossKind::kEuclidean);
  RngStream init(51, 1);
  QLearner learner = QLearner::create(spec, init);

  ReplayBuffer buffer(40);
  RngStream fill(51, 3);
  for (int i = 0; i < 40; ++i) {
    Transition t;
    t.obs = {fill.next_gaussian(), fill.next_gaussian()};
    t.next_obs = {fill.next_gaussian(), fill.next_gaussian()};
    t.action = fill.next_below(5);
    t.reward = fill.next_gaussian();
    buffer.push(std::move(t));
  }

  QLearnerOptions opt;
  opt.batch_size = 8;
  opt.gamma = 0.9;
  opt.learning_rate = 1.0;
  opt.momentum = 0.0;
  opt.frozen_refresh = 100;

  const NetworkParams before = learner.params;
  const NetworkParams frozen = learner.frozen;
  RngStream rng(51, 2);
  RngStream clone = rng;
  learner.replay_train(buffer, opt, rng);

  Matrix obs(8, 2), next_obs(8, 2);
  std::vector<std::size_t> actions(8);
  std::vector<double> rewards(8);
  for (std::size_t i = 0; i < 8; ++i) {
    const Transition& t = buffer.sample(clone);
    obs.set_row(i, t.obs);
    next_obs.set_row(i, t.next_obs);
    actions[i] = t.action;
    rewards[i] = t.reward;
  }
  const BatchMasks masks = BatchMasks::sample(spec, 8, clone);
  const Matrix q_next = forward_weight_averaged(spec, frozen, next_obs);
  std::vector<double> targets(8);
  for (std::size_t i = 0; i < 8; ++i) {
    double best = q_next(i, 0);
    for (std::size_t a = 1; a < 5; ++a) best = std::max(best, q_next(i, a));
    targets[i] = rewards[i] + opt.gamma * best;
  }

  auto loss = [&](const NetworkParams& p) {
    const ForwardTrace trace = forward_stochastic(spec, p, obs, masks);
    double acc = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const double diff = trace.output()(i, actions[i]) - targets[i];
      acc += diff * diff;
    }
    return acc / 16.0;
  };

  // With momentum 0 and unit learning rate the applied update is the
  // gradient itself.
  NetworkParams applied = NetworkParams::zeros(spec);
  for (std::size_t t = 0; t < applied.tensor_count(); ++t)
    for (std::size_t i = 0; i < applied.tensor(t).size(); ++i)
      applied.tensor(t)[i] = before.tensor(t)[i] - learner.params.tensor(t)[i];

  const NetworkParams numeric = mcdrop::testing::numeric_gradients(spec, before, loss, 1e-5);
  EXPECT_LT(mcdrop::testing::max_grad_rel_err(applied, numeric), 1e-6);
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

RlRunConfig tiny_run_config() {
  RlRunConfig cfg;
  cfg.burn_in_batches = 2;
  cfg.batches = 3;
  cfg.steps_per_batch = 25;
  cfg.replay_capacity = 500;
  cfg.learner.batch_size = 16;
  return cfg;
}

TEST(RunStrategy, LogsOneAverageRewardPerBatch) {
  const StrategyLog log = run_strategy(tiny_run_config(), Strategy::kThompson, 42);
  EXPECT_EQ(log.strategy, Strategy::kThompson);
  ASSERT_EQ(log.avg_reward.size(), 5u);
  for (double r : log.avg_reward) EXPECT_TRUE(std::isfinite(r));
}

TEST(RunComparison, SameSeedIsBitIdentical) {
  const RlRunConfig cfg = tiny_run_config();
  const RlComparison a = run_comparison(cfg, 11);
  const RlComparison b = run_comparison(cfg, 11);
  EXPECT_EQ(a.thompson.avg_reward, b.thompson.avg_reward);
  EXPECT_EQ(a.egreedy.avg_reward, b.egreedy.avg_reward);
  EXPECT_EQ(a.burn_in_batches, 2u);
  EXPECT_EQ(a.thompson.strategy, Strategy::kThompson);
  EXPECT_EQ(a.egreedy.strategy, Strategy::kEpsilonGreedy);

  const RlComparison c = run_comparison(cfg, 12);
  EXPECT_NE(a.thompson.avg_reward, c.thompson.avg_reward);
}

TEST(StrategyNames, RoundTripToStrings) {
  EXPECT_EQ(to_string(Strategy::kThompson), "thompson");
  EXPECT_EQ(to_string(Strategy::kEpsilonGreedy), "epsilon-greedy");
}

TEST(BatchesToThreshold, UsesTrailingWindowsAfterBurnIn) {
  StrategyLog log;
  log.avg_reward = {9.0, 9.0, 0.1, 0.2, 0.55, 0.6, 0.7};
  const std::size_t burn_in = 2;
  // Trailing-3 means over post-burn-in batches: .1, .15, .2833, .45, .6167.
  EXPECT_EQ(batches_to_threshold(log, burn_in, 0.5), 4u);
  EXPECT_EQ(batches_to_threshold(log, burn_in, 0.5, 1), 2u);
  EXPECT_EQ(batches_to_threshold(log, burn_in, 0.05), 0u);
  EXPECT_EQ(batches_to_threshold(log, burn_in, 10.0), log.avg_reward.size());
  EXPECT_THROW(batches_to_threshold(log, burn_in, 0.5, 0), DomainError);
}

TEST(WriteRlCsv, EmitsOnlyPostBurnInRows) {
  RlComparison cmp;
  cmp.burn_in_batches = 2;
  cmp.thompson.strategy = Strategy::kThompson;
  cmp.thompson.avg_reward = {1.0, 2.0, 0.25, 0.5, 0.75};
  cmp.egreedy.strategy = Strategy::kEpsilonGreedy;
  cmp.egreedy.avg_reward = {3.0, 4.0, 0.1, 0.2, 0.3};

  const std::string file =
      (std::filesystem::temp_directory_path() /
       ("mcdrop_rl_csv_" + std::to_string(::getpid()) + ".csv")).string();
  write_rl_csv(cmp, file);

  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "batch_index,avg_reward,strategy");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "0,0.25,thompson");
  EXPECT_EQ(rows[1], "1,0.5,thompson");
  EXPECT_EQ(rows[2], "2,0.75,thompson");
  EXPECT_EQ(rows[3], "0,0.10000000000000001,epsilon-greedy");
  std::filesystem::remove(file);
}

}  // namespace
}  // namespace mcdrop::rl
