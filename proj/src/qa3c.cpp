#include "qfx/qa3c.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "qfx/config.hpp"
#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

namespace {

constexpr std::size_t kValueOutputs = 1;

struct TowerCache {
  std::vector<double> input;
  std::vector<double> hidden;  // tanh(encoder(x)), fed to the middle block
  std::vector<double> mixed;   // middle block output, fed to the head
  std::vector<double> out;
};

Tower make_tower(const NetConfig& cfg, std::size_t outputs) {
  Tower t;
  t.encoder = DenseLayer(cfg.obs_dim, cfg.latent);
  if (cfg.quantum)
    t.angles.assign(cfg.vqc_spec().param_count(), 0.0);
  else
    t.middle = DenseLayer(cfg.latent, cfg.latent);
  t.head = DenseLayer(cfg.latent, outputs);
  return t;
}

TowerCache tower_forward(const Tower& t, const NetConfig& cfg, std::span<const double> x) {
  TowerCache c;
  c.input.assign(x.begin(), x.end());
  c.hidden = dense_forward(t.encoder, x);
  for (double& v : c.hidden) v = std::tanh(v);
  if (cfg.quantum) {
    c.mixed = vqc_forward(cfg.vqc_spec(), t.angles, c.hidden);
  } else {
    c.mixed = dense_forward(t.middle, c.hidden);
    for (double& v : c.mixed) v = std::tanh(v);
  }
  c.out = dense_forward(t.head, c.mixed);
  return c;
}

void add_block(std::vector<double>& grad, std::size_t& offset, std::span<const double> block) {
  for (std::size_t k = 0; k < block.size(); ++k) grad[offset + k] += block[k];
  offset += block.size();
}

void add_dense(std::vector<double>& grad, std::size_t& offset, const DenseGrad& g) {
  add_block(grad, offset, g.weights);
  add_block(grad, offset, g.bias);
}

// Accumulates d(upstream . out)/d(tower params) into grad starting at offset,
// in the order encoder, angles | middle, head.
void tower_backward(const Tower& t, const NetConfig& cfg, const TowerCache& c,
                    std::span<const double> upstream, std::vector<double>& grad,
                    std::size_t offset) {
  const DenseGrad head = dense_backward(t.head, c.mixed, upstream);
  std::vector<double> d_hidden;
  std::vector<double> mid_block;
  DenseGrad mid;
  if (cfg.quantum) {
    VqcGradient vg = vqc_gradient(cfg.vqc_spec(), t.angles, c.hidden, head.input);
    mid_block = std::move(vg.params);
    d_hidden = std::move(vg.inputs);
  } else {
    std::vector<double> d_pre(head.input);
    for (std::size_t k = 0; k < d_pre.size(); ++k) d_pre[k] *= 1.0 - c.mixed[k] * c.mixed[k];
    mid = dense_backward(t.middle, c.hidden, d_pre);
    d_hidden = mid.input;
  }
  for (std::size_t k = 0; k < d_hidden.size(); ++k) d_hidden[k] *= 1.0 - c.hidden[k] * c.hidden[k];
  const DenseGrad enc = dense_backward(t.encoder, c.input, d_hidden);

  add_dense(grad, offset, enc);
  if (cfg.quantum)
    add_block(grad, offset, mid_block);
  else
    add_dense(grad, offset, mid);
  add_dense(grad, offset, head);
}

void append_tower(const Tower& t, std::vector<double>& flat) {
  append_params(t.encoder, flat);
  flat.insert(flat.end(), t.angles.begin(), t.angles.end());
  append_params(t.middle, flat);
  append_params(t.head, flat);
}

std::size_t read_tower(Tower& t, std::span<const double> flat, std::size_t off) {
  off = read_params(t.encoder, flat, off);
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.angles.size(), t.angles.begin());
  off += t.angles.size();
  off = read_params(t.middle, flat, off);
  return read_params(t.head, flat, off);
}

std::vector<double> log_softmax(std::span<const double> z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - peak);
  const double lse = peak + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - lse;
  return out;
}

}  // namespace

void NetConfig::validate() const {
  if (obs_dim == 0 || latent == 0) throw ValidationError("network dimensions must be positive");
  if (quantum && (latent > static_cast<std::size_t>(kMaxQubits)))
    throw ValidationError("quantum latent size is the VQC qubit count and must be <= 12");
  if (vqc_layers < 0) throw ValidationError("vqc_layers must be non-negative");
}

ActorCritic ActorCritic::zeros(const NetConfig& config) {
  config.validate();
  ActorCritic net;
  net.config = config;
  net.actor = make_tower(config, kNumActions);
  net.critic = make_tower(config, kValueOutputs);
  return net;
}

ActorCritic ActorCritic::random(const NetConfig& config, Rng& rng) {
  ActorCritic net = zeros(config);
  for (Tower* t : {&net.actor, &net.critic}) {
    init_glorot(t->encoder, rng);
    if (config.quantum)
      init_angles(t->angles, rng);
    else
      init_glorot(t->middle, rng);
    init_glorot(t->head, rng);
  }
  return net;
}

std::vector<double> ActorCritic::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  append_tower(actor, flat);
  append_tower(critic, flat);
  return flat;
}

void ActorCritic::unflatten(std::span<const double> flat) {
  if (flat.size() != size())
    throw std::invalid_argument("actor-critic expects " + std::to_string(size()) +
                                " parameters, got " + std::to_string(flat.size()));
  read_tower(critic, flat, read_tower(actor, flat, 0));
}

ParamCount count_params(const Tower& tower, bool quantum) {
  ParamCount c = classical_params(tower.encoder);
  if (quantum)
    c.quantum += tower.angles.size();
  else
    c += classical_params(tower.middle);
  c += classical_params(tower.head);
  return c;
}

ParamCount count_params(const ActorCritic& net) {
  ParamCount c = count_params(net.actor, net.config.quantum);
  c += count_params(net.critic, net.config.quantum);
  return c;
}

ParamCount ActorCritic::count() const { return count_params(*this); }

PolicyValue forward_policy_value(const ActorCritic& net, std::span<const double> state) {
  if (state.size() != net.config.obs_dim)
    throw std::invalid_argument("policy/value net expects a " + std::to_string(net.config.obs_dim) +
                                "-dim state, got " + std::to_string(state.size()));
  const TowerCache a = tower_forward(net.actor, net.config, state);
  const TowerCache v = tower_forward(net.critic, net.config, state);
  const auto p = softmax(a.out);
  PolicyValue pv;
  std::copy(p.begin(), p.end(), pv.policy.begin());
  pv.value = v.out[0];
  return pv;
}

Action sample_action(const std::array<double, kNumActions>& policy, Rng& rng) {
  for (double p : policy)
    if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("degenerate policy (NaN or negative mass)");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    cumulative += policy[k];
    if (u < cumulative) return static_cast<Action>(k);
  }
  // u landed in the rounding gap above the last cumulative sum.
  for (std::size_t k = kNumActions; k-- > 0;)
    if (policy[k] > 0.0) return static_cast<Action>(k);
  throw std::invalid_argument("degenerate policy (zero mass)");
}

Action greedy_action(const std::array<double, kNumActions>& policy) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumActions; ++k)
    if (policy[k] > policy[best]) best = k;
  if (!std::isfinite(policy[best])) throw std::invalid_argument("degenerate policy (NaN)");
  return static_cast<Action>(best);
}

Returns n_step_returns(const RolloutBuffer& buffer, double gamma, double v_bootstrap) {
  Returns out;
  const std::size_t n = buffer.steps.size();
  out.returns.resize(n);
  out.advantages.resize(n);
  double r = buffer.terminal ? 0.0 : v_bootstrap;
  for (std::size_t k = n; k-- > 0;) {
    r = buffer.steps[k].reward + gamma * r;
    out.returns[k] = r;
    out.advantages[k] = r - buffer.steps[k].value;
  }
  return out;
}

LossGrad loss_and_grads(const ActorCritic& net, const RolloutBuffer& buffer,
                        std::span<const double> returns, std::span<const double> advantages,
                        double entropy_beta) {
  const std::size_t n = buffer.steps.size();
  if (returns.size() != n || advantages.size() != n)
    throw std::invalid_argument("returns/advantages must align with the rollout buffer");
  LossGrad out;
  out.grad.assign(net.size(), 0.0);
  const std::size_t critic_offset = count_params(net.actor, net.config.quantum).total();

  for (std::size_t k = 0; k < n; ++k) {
    const Transition& tr = buffer.steps[k];
    const TowerCache a = tower_forward(net.actor, net.config, tr.state);
    const TowerCache v = tower_forward(net.critic, net.config, tr.state);

    const double value_error = returns[k] - v.out[0];
    const auto logp = log_softmax(a.out);
    std::array<double, kNumActions> p{};
    double entropy = 0.0;
    for (std::size_t j = 0; j < kNumActions; ++j) {
      p[j] = std::exp(logp[j]);
      entropy -= p[j] * logp[j];
    }
    const std::size_t act = static_cast<std::size_t>(tr.action);
    const double adv = advantages[k];
    out.loss += value_error * value_error - logp[act] * adv - entropy_beta * entropy;

    std::array<double, kNumActions> d_logits{};
    for (std::size_t j = 0; j < kNumActions; ++j) {
      const double policy_term = adv * (p[j] - (j == act ? 1.0 : 0.0));
      const double entropy_term = entropy_beta * p[j] * (logp[j] + entropy);
      d_logits[j] = policy_term + entropy_term;
    }
    const double d_value = -2.0 * value_error;
    tower_backward(net.actor, net.config, a, d_logits, out.grad, 0);
    tower_backward(net.critic, net.config, v, std::span<const double>(&d_value, 1), out.grad,
                   critic_offset);
  }
  if (!std::isfinite(out.loss)) throw std::runtime_error("non-finite actor-critic loss");
  return out;
}

SharedParams::SharedParams(std::vector<double> initial, double lr)
    : params_(std::move(initial)), adam_(params_.size(), lr) {}

SharedParams::Update SharedParams::apply(std::span<const double> grad, std::vector<double>* pull) {
  std::lock_guard<std::mutex> lock(mutex_);
  Update u;
  u.applied = adam_.step(params_, grad) == StepStatus::kApplied;
  if (u.applied)
    u.version = version_.fetch_add(1, std::memory_order_acq_rel) + 1;
  else
    u.version = version_.load(std::memory_order_acquire);
  if (pull) *pull = params_;
  return u;
}

std::vector<double> SharedParams::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return params_;
}

std::size_t SharedParams::skipped() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return adam_.skipped();
}

std::uint64_t apply_gradients_shared(SharedParams& shared, std::span<const double> grad,
                                     std::vector<double>* pull) {
  return shared.apply(grad, pull).version;
}

void TrainConfig::validate() const {
  if (workers < 1) throw ValidationError("agent.workers must be >= 1");
  if (rollout_len < 1) throw ValidationError("agent.rollout_len must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("agent.gamma must lie in (0, 1)");
  if (!(entropy_beta >= 0.0)) throw ValidationError("agent.entropy_beta must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("agent.lr must be finite and >= 0");
  net.validate();
}

AgentTrainResult train_async(const TrainConfig& config, const EnvFactory& make_env) {
  config.validate();
  Rng init_rng(config.init_seed);
  const ActorCritic initial = ActorCritic::random(config.net, init_rng);
  SharedParams shared(initial.flatten(), config.lr);

  std::atomic<std::size_t> next_episode{0};
  std::atomic<bool> abort{false};
  std::mutex log_mutex;
  std::vector<EpisodeLog> log;
  std::exception_ptr failure;

  auto worker = [&](std::size_t id) {
    try {
      TradingEnv env = make_env(id);
      ActorCritic net = initial;
      std::vector<double> local = shared.snapshot();
      net.unflatten(local);
      std::seed_seq seq{config.sampling_seed, static_cast<std::uint64_t>(id)};
      Rng rng(seq);
      RolloutBuffer buffer;
      while (!abort.load()) {
        const std::size_t episode = next_episode.fetch_add(1);
        if (episode >= config.max_episodes) break;
        Observation obs = env.reset();
        double total = 0.0;
        std::size_t steps = 0;
        std::uint64_t version = shared.version();
        while (!env.done() && !abort.load()) {
          buffer.steps.clear();
          buffer.terminal = false;
          for (std::size_t t = 0; t < config.rollout_len; ++t) {
            const PolicyValue pv = forward_policy_value(net, obs);
            const Action a = sample_action(pv.policy, rng);
            const StepResult sr = env.step(a);
            buffer.steps.push_back({obs, a, sr.reward, pv.value});
            total += sr.reward;
            ++steps;
            obs = sr.observation;
            if (sr.done) {
              buffer.terminal = true;
              break;
            }
          }
          buffer.bootstrap_state = obs;
          const double v_boot = buffer.terminal ? 0.0 : forward_policy_value(net, obs).value;
          const Returns ret = n_step_returns(buffer, config.gamma, v_boot);
          const LossGrad lg =
              loss_and_grads(net, buffer, ret.returns, ret.advantages, config.entropy_beta);
          version = shared.apply(lg.grad, &local).version;
          net.unflatten(local);
        }
        std::lock_guard<std::mutex> lock(log_mutex);
        log.push_back({episode, id, total, steps, version});
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(log_mutex);
      if (!failure) failure = std::current_exception();
      abort.store(true);
    }
  };

  if (config.workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(config.workers);
    for (std::size_t id = 0; id < config.workers; ++id) threads.emplace_back(worker, id);
    for (auto& t : threads) t.join();
  }

  ActorCritic final_net = initial;
  final_net.unflatten(shared.snapshot());
  if (failure) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw TrainingAborted("agent training aborted: " + what, final_net);
  }

  std::sort(log.begin(), log.end(),
            [](const EpisodeLog& a, const EpisodeLog& b) { return a.episode < b.episode; });
  return {std::move(final_net), std::move(log), shared.version(), shared.skipped()};
}

void write_episode_log_csv(const std::vector<EpisodeLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "episode,worker,total_reward,steps,version\n";
  for (const auto& e : log)
    out << e.episode << ',' << e.worker << ',' << format_double(e.total_reward) << ',' << e.steps
        << ',' << e.version << '\n';
}

Checkpoint agent_checkpoint(const ActorCritic& net, const TrainConfig& config, std::uint64_t version) {
  const ParamCount c = net.count();
  nlohmann::json header = {{"kind", "qa3c"},
                           {"net", net.config},
                           {"train", config},
                           {"version", version},
                           {"param_count", {{"quantum", c.quantum}, {"classical", c.classical}}}};
  return {header, net.flatten()};
}

ActorCritic agent_from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.header.value("kind", "") != "qa3c")
    throw ValidationError("checkpoint is not a QA3C agent checkpoint");
  ActorCritic net = ActorCritic::zeros(checkpoint.header.at("net").get<NetConfig>());
  net.unflatten(checkpoint.params);
  return net;
}

}  // namespace qfx
