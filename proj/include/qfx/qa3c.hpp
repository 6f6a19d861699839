#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "qfx/nn_core.hpp"
#include "qfx/quantum_sim.hpp"
#include "qfx/trading_env.hpp"

namespace qfx {

struct NetConfig {
  std::size_t obs_dim = kObservationSize;
  std::size_t latent = 8;  // also the VQC qubit count
  int vqc_layers = 2;
  // false: the classical baseline, each VQC replaced by a tanh dense latent->latent.
  bool quantum = true;

  void validate() const;
  VqcSpec vqc_spec() const {
    return {static_cast<int>(latent), static_cast<int>(latent), vqc_layers};
  }
};

// obs -> dense+tanh -> (VQC | dense+tanh) -> linear head.
struct Tower {
  DenseLayer encoder;
  std::vector<double> angles;  // quantum middle
  DenseLayer middle;           // classical middle
  DenseLayer head;
};

struct ActorCritic {
  NetConfig config;
  Tower actor;   // head: latent -> 3 policy logits
  Tower critic;  // head: latent -> 1 value

  static ActorCritic zeros(const NetConfig& config);
  static ActorCritic random(const NetConfig& config, Rng& rng);

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  std::size_t size() const { return count().total(); }
  ParamCount count() const;
};

ParamCount count_params(const Tower& tower, bool quantum);
ParamCount count_params(const ActorCritic& net);

struct PolicyValue {
  std::array<double, kNumActions> policy{};
  double value = 0.0;
};

PolicyValue forward_policy_value(const ActorCritic& net, std::span<const double> state);

// Inverse-CDF sampling with one uniform draw; throws on NaN or negative mass.
Action sample_action(const std::array<double, kNumActions>& policy, Rng& rng);
// Argmax, lowest index wins ties.
Action greedy_action(const std::array<double, kNumActions>& policy);

struct Transition {
  Observation state{};
  Action action = Action::kHold;
  double reward = 0.0;
  double value = 0.0;  // V(state) under the parameters that collected it
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  bool terminal = false;
  Observation bootstrap_state{};
};

struct Returns {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// R starts at v_bootstrap (0 if terminal) and accumulates R <- r + gamma R
// backwards; advantage = R - V(s).
Returns n_step_returns(const RolloutBuffer& buffer, double gamma, double v_bootstrap);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // ActorCritic::flatten order
};

// Sum over the buffer of (R - V(s))^2 - log pi(a|s) * adv - beta * H[pi(.|s)].
// `advantages` enter as constants: no gradient flows through them.
LossGrad loss_and_grads(const ActorCritic& net, const RolloutBuffer& buffer,
                        std::span<const double> returns, std::span<const double> advantages,
                        double entropy_beta);

// Global parameters behind an exclusive-update contract.
class SharedParams {
 public:
  SharedParams(std::vector<double> initial, double lr);

  struct Update {
    std::uint64_t version = 0;
    bool applied = false;
  };

  // One Adam step under the lock. When `pull` is non-null the fresh global
  // vector is copied into it before the lock is released.
  Update apply(std::span<const double> grad, std::vector<double>* pull = nullptr);
  std::vector<double> snapshot() const;
  std::uint64_t version() const { return version_.load(std::memory_order_acquire); }
  std::size_t skipped() const;

 private:
  mutable std::mutex mutex_;
  std::vector<double> params_;
  Adam adam_;
  std::atomic<std::uint64_t> version_{0};
};

std::uint64_t apply_gradients_shared(SharedParams& shared, std::span<const double> grad,
                                     std::vector<double>* pull = nullptr);

struct TrainConfig {
  std::size_t workers = 8;
  std::size_t rollout_len = 30;
  double gamma = 0.995;
  double entropy_beta = 0.05;
  double lr = 1e-5;
  std::size_t max_episodes = 2000;
  std::uint64_t init_seed = 7;
  std::uint64_t sampling_seed = 13;
  NetConfig net;

  void validate() const;
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::size_t worker = 0;
  double total_reward = 0.0;
  std::size_t steps = 0;
  std::uint64_t version = 0;
};

struct AgentTrainResult {
  ActorCritic net;
  std::vector<EpisodeLog> log;  // sorted by episode
  std::uint64_t version = 0;
  std::size_t skipped_updates = 0;
};

// Thrown when a worker fails; carries the global parameters at abort time.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, ActorCritic partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const ActorCritic& partial() const { return partial_; }

 private:
  ActorCritic partial_;
};

using EnvFactory = std::function<TradingEnv(std::size_t worker)>;

AgentTrainResult train_async(const TrainConfig& config, const EnvFactory& make_env);

void write_episode_log_csv(const std::vector<EpisodeLog>& log, const std::filesystem::path& path);

Checkpoint agent_checkpoint(const ActorCritic& net, const TrainConfig& config, std::uint64_t version);
ActorCritic agent_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace qfx
