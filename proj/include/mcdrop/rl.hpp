#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/optim.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop::rl {

inline constexpr std::size_t kActionCount = 5;  // hard-left, left, straight, right, hard-right

// 2D foraging arena: red items pay +1, green items pay -1, walking straight
// pays a small bonus and staring at walls costs up to the same amount. All
// geometry and reward coefficients live here so runs are self-describing.
struct RlConstants {
  double arena_width = 700.0;
  double arena_height = 500.0;
  std::size_t item_count = 50;
  double item_radius = 10.0;
  double agent_radius = 10.0;
  std::size_t eye_count = 9;
  double eye_fan_deg = 34.0;  // eyes span [-fan, +fan] around the heading
  double eye_range = 85.0;
  double reward_red = 1.0;
  double reward_green = -1.0;
  double forward_bonus = 0.05;
  double wall_gaze_coeff = 0.05;
  double red_fraction = 0.5;
  double speed_straight = 3.0;
  double speed_soft = 2.75;
  double speed_hard = 2.5;
  double turn_soft = 0.1;  // radians per step
  double turn_hard = 0.3;

  std::size_t observation_dim() const { return eye_count * 3; }
};

struct Item {
  double x = 0.0, y = 0.0;
  bool red = true;
};

class World {
 public:
  struct StepResult {
    double reward = 0.0;
    std::vector<double> observation;
  };

  static World create(const RlConstants& c, std::uint64_t seed) {
    World w;
    w.c_ = c;
    w.rng_ = RngStream(seed, 0x30);
    w.agent_x_ = c.arena_width / 2.0;
    w.agent_y_ = c.arena_height / 2.0;
    w.heading_ = 0.0;
    w.items_.resize(c.item_count);
    for (std::size_t i = 0; i < c.item_count; ++i) {
      w.items_[i].red = (static_cast<double>(i) + 0.5) / static_cast<double>(c.item_count) <
                        c.red_fraction;
      w.place_randomly(w.items_[i]);
    }
    return w;
  }

  const RlConstants& constants() const { return c_; }
  double agent_x() const { return agent_x_; }
  double agent_y() const { return agent_y_; }
  double heading() const { return heading_; }
  const std::vector<Item>& items() const { return items_; }

  // 9 eyes x 3 channels (red, green, wall), each 1 at contact and fading
  // linearly to 0 at eye range.
  std::vector<double> observe() const {
    std::vector<double> obs(c_.observation_dim(), 0.0);
    const double fan = c_.eye_fan_deg * M_PI / 180.0;
    for (std::size_t e = 0; e < c_.eye_count; ++e) {
      const double offset =
          -fan + 2.0 * fan * static_cast<double>(e) / static_cast<double>(c_.eye_count - 1);
      const double dx = std::cos(heading_ + offset);
      const double dy = std::sin(heading_ + offset);

      double t_red = HUGE_VAL, t_green = HUGE_VAL;
      for (const Item& item : items_) {
        const double t = ray_circle(dx, dy, item);
        if (item.red)
          t_red = std::min(t_red, t);
        else
          t_green = std::min(t_green, t);
      }
      const double t_wall = ray_wall(dx, dy);
      obs[e * 3 + 0] = intensity(t_red);
      obs[e * 3 + 1] = intensity(t_green);
      obs[e * 3 + 2] = intensity(t_wall);
    }
    return obs;
  }

  StepResult step(std::size_t action) {
    if (action >= kActionCount) throw DomainError("World::step: action index out of range");
    double turn = 0.0, speed = c_.speed_straight;
    switch (action) {
      case 0: turn = c_.turn_hard; speed = c_.speed_hard; break;
      case 1: turn = c_.turn_soft; speed = c_.speed_soft; break;
      case 2: break;
      case 3: turn = -c_.turn_soft; speed = c_.speed_soft; break;
      case 4: turn = -c_.turn_hard; speed = c_.speed_hard; break;
    }
    heading_ = std::remainder(heading_ + turn, 2.0 * M_PI);
    agent_x_ = std::clamp(agent_x_ + speed * std::cos(heading_), c_.agent_radius,
                          c_.arena_width - c_.agent_radius);
    agent_y_ = std::clamp(agent_y_ + speed * std::sin(heading_), c_.agent_radius,
                          c_.arena_height - c_.agent_radius);

    StepResult result;
    const double touch = c_.agent_radius + c_.item_radius;
    for (Item& item : items_) {
      const double ddx = item.x - agent_x_;
      const double ddy = item.y - agent_y_;
      if (ddx * ddx + ddy * ddy < touch * touch) {
        result.reward += item.red ? c_.reward_red : c_.reward_green;
        place_randomly(item);
      }
    }
    if (action == 2) result.reward += c_.forward_bonus;

    result.observation = observe();
    double wall_sum = 0.0;
    for (std::size_t e = 0; e < c_.eye_count; ++e) wall_sum += result.observation[e * 3 + 2];
    result.reward -= c_.wall_gaze_coeff * wall_sum / static_cast<double>(c_.eye_count);
    return result;
  }

 private:
  void place_randomly(Item& item) {
    item.x = c_.item_radius +
             rng_.next_uniform() * (c_.arena_width - 2.0 * c_.item_radius);
    item.y = c_.item_radius +
             rng_.next_uniform() * (c_.arena_height - 2.0 * c_.item_radius);
  }

  double intensity(double t) const {
    if (t >= c_.eye_range) return 0.0;
    return 1.0 - t / c_.eye_range;
  }

  // Distance along the (unit) ray to the item circle, HUGE_VAL on a miss,
  // 0 when the ray starts inside the circle.
  double ray_circle(double dx, double dy, const Item& item) const {
    const double ox = item.x - agent_x_;
    const double oy = item.y - agent_y_;
    const double r2 = c_.item_radius * c_.item_radius;
    const double inside = ox * ox + oy * oy - r2;
    if (inside <= 0.0) return 0.0;
    const double proj = ox * dx + oy * dy;
    if (proj <= 0.0) return HUGE_VAL;
    const double disc = proj * proj - inside;
    if (disc < 0.0) return HUGE_VAL;
    return proj - std::sqrt(disc);
  }

  // Distance to the arena boundary (the agent is always inside it).
  double ray_wall(double dx, double dy) const {
    const double tx = dx > 0.0 ? (c_.arena_width - agent_x_) / dx
                               : (dx < 0.0 ? -agent_x_ / dx : HUGE_VAL);
    const double ty = dy > 0.0 ? (c_.arena_height - agent_y_) / dy
                               : (dy < 0.0 ? -agent_y_ / dy : HUGE_VAL);
    return std::min(tx, ty);
  }

  RlConstants c_;
  std::vector<Item> items_;
  double agent_x_ = 0.0, agent_y_ = 0.0, heading_ = 0.0;
  RngStream rng_{0};
};

// ---------------------------------------------------------------------------
// Q-learning on the dropout network
// ---------------------------------------------------------------------------

struct Transition {
  std::vector<double> obs;
  std::vector<double> next_obs;
  std::size_t action = 0;
  double reward = 0.0;
};

// Fixed-capacity ring. Once full, pushes overwrite the oldest entry;
// sampling is uniform over the filled region only.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : slots_(capacity) {
    if (capacity == 0) throw DomainError("ReplayBuffer: capacity must be positive");
  }

  void push(Transition t) {
    slots_[next_] = std::move(t);
    next_ = (next_ + 1) % slots_.size();
    if (next_ == 0) full_ = true;
  }

  std::size_t size() const { return full_ ? slots_.size() : next_; }
  std::size_t capacity() const { return slots_.size(); }

  const Transition& at(std::size_t i) const {
    if (i >= size()) throw DomainError("ReplayBuffer: index past filled region");
    return slots_[i];
  }

  const Transition& sample(RngStream& rng) const {
    if (size() == 0) throw StateError("ReplayBuffer: cannot sample from an empty buffer");
    return slots_[rng.next_below(size())];
  }

 private:
  std::vector<Transition> slots_;
  std::size_t next_ = 0;
  bool full_ = false;
};

inline NetworkSpec default_qnet_spec(double keep_prob = 0.9) {
  return NetworkSpec::make({27, 64, 64, kActionCount}, Nonlinearity::kReLU, keep_prob,
                           LossKind::kEuclidean, 0.0);
}

inline std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Exploit the weight-averaged Q-estimate with probability 1-epsilon,
// otherwise act uniformly at random.
inline std::size_t act_epsilon_greedy(const NetworkSpec& spec, const NetworkParams& params,
                                      const std::vector<double>& obs, double epsilon,
                                      RngStream& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw DomainError("act_epsilon_greedy: epsilon outside [0,1]");
  if (epsilon > 0.0 && rng.next_uniform() < epsilon)
    return static_cast<std::size_t>(rng.next_below(kActionCount));
  return argmax_lowest(forward_weight_averaged(spec, params, obs));
}

// One stochastic pass with fresh masks; the argmax of the sampled
// Q-function is the Thompson action.
inline std::size_t act_thompson(const NetworkSpec& spec, const NetworkParams& params,
                                const std::vector<double>& obs, RngStream& rng) {
  MaskSet masks = MaskSet::sample(spec, rng);
  return argmax_lowest(forward_stochastic(spec, params, obs, masks).first);
}

struct QLearnerOptions {
  std::size_t batch_size = 32;
  double gamma = 0.9;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t frozen_refresh = 100;  // replay steps between target refreshes
};

// Dropout Q-network with a frozen target copy. Each replay step performs
// one stochastic forward pass per sampled transition and backpropagates
// through the same Bernoulli masks, touching only the taken action's
// output.
struct QLearner {
  NetworkSpec spec;
  NetworkParams params;
  NetworkParams frozen;
  NetworkParams velocity;
  std::size_t replay_steps = 0;

  static QLearner create(const NetworkSpec& spec, RngStream& rng) {
    QLearner q;
    q.spec = spec;
    q.params = NetworkParams::init(spec, rng);
    q.frozen = q.params;
    q.velocity = NetworkParams::zeros(spec);
    return q;
  }

  void replay_train(const ReplayBuffer& buffer, const QLearnerOptions& opt, RngStream& rng) {
    if (buffer.size() < opt.batch_size)
      throw StateError("replay_train: buffer holds fewer transitions than one batch");
    const std::size_t b = opt.batch_size;
    const std::size_t q_in = spec.layer_widths.front();

    Matrix obs(b, q_in), next_obs(b, q_in);
    std::vector<std::size_t> actions(b);
    std::vector<double> rewards(b);
    for (std::size_t i = 0; i < b; ++i) {
      const Transition& tr = buffer.sample(rng);
      obs.set_row(i, tr.obs);
      next_obs.set_row(i, tr.next_obs);
      actions[i] = tr.action;
      rewards[i] = tr.reward;
    }

    const Matrix q_next = forward_weight_averaged(spec, frozen, next_obs);
    ForwardTrace trace = forward_stochastic(spec, params, obs, BatchMasks::sample(spec, b, rng));
    const Matrix& q_pred = trace.output();

    Matrix out_grad(b, kActionCount);
    for (std::size_t i = 0; i < b; ++i) {
      double best_next = q_next(i, 0);
      for (std::size_t a = 1; a < kActionCount; ++a) best_next = std::max(best_next, q_next(i, a));
      const double target = rewards[i] + opt.gamma * best_next;
      out_grad(i, actions[i]) = (q_pred(i, actions[i]) - target) / static_cast<double>(b);
    }

    NetworkParams grads = backward(spec, params, trace, out_grad);
    sgd_step(params, grads, opt.learning_rate, opt.momentum, velocity);
    ++replay_steps;
    if (replay_steps % opt.frozen_refresh == 0) frozen = params;
  }
};

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

enum class Strategy { kThompson, kEpsilonGreedy };

inline std::string to_string(Strategy s) {
  return s == Strategy::kThompson ? "thompson" : "epsilon-greedy";
}

struct RlRunConfig {
  RlConstants constants;
  double keep_prob = 0.9;  // applied before every weight layer of the Q-net
  QLearnerOptions learner;
  std::size_t burn_in_batches = 25;
  std::size_t batches = 150;  // post burn-in
  std::size_t steps_per_batch = 100;
  std::size_t replay_capacity = 10000;
  double eps_start = 0.3;
  double eps_final = 0.05;
  std::size_t eps_anneal_batches = 50;
};

struct StrategyLog {
  Strategy strategy = Strategy::kThompson;
  std::vector<double> avg_reward;  // one mean per-step value per batch, burn-in included
};

struct RlComparison {
  StrategyLog thompson;
  StrategyLog egreedy;
  std::size_t burn_in_batches = 0;
};

inline StrategyLog run_strategy(const RlRunConfig& cfg, Strategy strategy, std::uint64_t seed) {
  RngStream rng(seed, strategy == Strategy::kThompson ? 0xA1 : 0xB1);
  World world = World::create(cfg.constants, rng.next_u64());
  const NetworkSpec spec = default_qnet_spec(cfg.keep_prob);
  RngStream init_rng = rng.fork(0x1);
  QLearner learner = QLearner::create(spec, init_rng);
  ReplayBuffer buffer(cfg.replay_capacity);
  RngStream act_rng = rng.fork(0x2);
  RngStream replay_rng = rng.fork(0x3);

  StrategyLog log;
  log.strategy = strategy;
  std::vector<double> obs = world.observe();
  const std::size_t total = cfg.burn_in_batches + cfg.batches;
  for (std::size_t batch = 0; batch < total; ++batch) {
    double batch_reward = 0.0;
    double epsilon = cfg.eps_final;
    if (batch >= cfg.burn_in_batches && cfg.eps_anneal_batches > 0) {
      const double progress = std::min(
          1.0, static_cast<double>(batch - cfg.burn_in_batches) /
                   static_cast<double>(cfg.eps_anneal_batches));
      epsilon = cfg.eps_start + (cfg.eps_final - cfg.eps_start) * progress;
    }
    for (std::size_t s = 0; s < cfg.steps_per_batch; ++s) {
      std::size_t action;
      if (batch < cfg.burn_in_batches)
        action = static_cast<std::size_t>(act_rng.next_below(kActionCount));
      else if (strategy == Strategy::kThompson)
        action = act_thompson(spec, learner.params, obs, act_rng);
      else
        action = act_epsilon_greedy(spec, learner.params, obs, epsilon, act_rng);

      World::StepResult result = world.step(action);
      buffer.push({obs, result.observation, action, result.reward});
      obs = std::move(result.observation);
      batch_reward += result.reward;
      if (buffer.size() >= cfg.learner.batch_size)
        learner.replay_train(buffer, cfg.learner, replay_rng);
    }
    log.avg_reward.push_back(batch_reward / static_cast<double>(cfg.steps_per_batch));
  }
  return log;
}

inline RlComparison run_comparison(const RlRunConfig& cfg, std::uint64_t seed) {
  RlComparison cmp;
  cmp.burn_in_batches = cfg.burn_in_batches;
  cmp.thompson = run_strategy(cfg, Strategy::kThompson, seed);
  cmp.egreedy = run_strategy(cfg, Strategy::kEpsilonGreedy, seed);
  return cmp;
}

// First post-burn-in batch (0-based offset from the end of burn-in) whose
// trailing `window`-batch mean exceeds the threshold; the log length is the
// "never reached" sentinel.
inline std::size_t batches_to_threshold(const StrategyLog& log, std::size_t burn_in,
                                        double threshold, std::size_t window = 3) {
  if (window == 0) throw DomainError("batches_to_threshold: window must be positive");
  for (std::size_t i = burn_in; i < log.avg_reward.size(); ++i) {
    const std::size_t begin = (i + 1 >= window) ? i + 1 - window : 0;
    const std::size_t lo = std::max(begin, burn_in);
    double acc = 0.0;
    for (std::size_t k = lo; k <= i; ++k) acc += log.avg_reward[k];
    if (acc / static_cast<double>(i - lo + 1) > threshold) return i - burn_in;
  }
  return log.avg_reward.size();
}

// batch_index,avg_reward,strategy for the post-burn-in batches; index 0 is
// the first batch after burn-in ends.
inline void write_rl_csv(const RlComparison& cmp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_rl_csv: cannot open " + path);
  out.precision(17);
  out << "batch_index,avg_reward,strategy\n";
  for (const StrategyLog* log : {&cmp.thompson, &cmp.egreedy})
    for (std::size_t i = cmp.burn_in_batches; i < log->avg_reward.size(); ++i)
      out << i - cmp.burn_in_batches << "," << log->avg_reward[i] << ","
          << to_string(log->strategy) << "\n";
}

}  // namespace mcdrop::rl
