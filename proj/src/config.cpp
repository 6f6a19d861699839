#include "qfx/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "qfx/error.hpp"

namespace qfx {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ValidationError("config section '" + section_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config key '" + section_ + "." + key + "' has the wrong type");
    }
  }

  void path(const char* key, std::filesystem::path& target) {
    std::string s = target.string();
    get(key, s);
    target = s;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ValidationError("unknown config key '" + section_ + "." + item.key() + "'");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

void to_json(json& j, const QlstmConfig& c) {
  j = {{"input_dim", c.input_dim}, {"hidden_dim", c.hidden_dim}, {"seq_len", c.seq_len},
       {"n_qubits", c.n_qubits},   {"vqc_layers", c.vqc_layers}, {"epochs", c.epochs},
       {"lr", c.lr},               {"init_seed", c.init_seed},   {"shuffle_seed", c.shuffle_seed}};
}

void from_json(const json& j, QlstmConfig& c) {
  Reader r(j, "qlstm");
  r.get("input_dim", c.input_dim);
  r.get("hidden_dim", c.hidden_dim);
  r.get("seq_len", c.seq_len);
  r.get("n_qubits", c.n_qubits);
  r.get("vqc_layers", c.vqc_layers);
  r.get("epochs", c.epochs);
  r.get("lr", c.lr);
  r.get("init_seed", c.init_seed);
  r.get("shuffle_seed", c.shuffle_seed);
  r.finish();
}

void to_json(json& j, const EnvConfig& c) {
  j = {{"initial_capital", c.initial_capital},
       {"unit_notional", c.unit_notional},
       {"clip_low", c.clip_low},
       {"clip_high", c.clip_high},
       {"time_cost", c.time_cost},
       {"entry_bonus", c.entry_bonus},
       {"entry_penalty", c.entry_penalty},
       {"exit_profit_base", c.exit_profit_base},
       {"exit_profit_slope", c.exit_profit_slope},
       {"exit_loss_base", c.exit_loss_base},
       {"exit_loss_slope", c.exit_loss_slope},
       {"holding_coef", c.holding_coef},
       {"invalid_penalty", c.invalid_penalty}};
}

void from_json(const json& j, EnvConfig& c) {
  Reader r(j, "env");
  r.get("initial_capital", c.initial_capital);
  r.get("unit_notional", c.unit_notional);
  r.get("clip_low", c.clip_low);
  r.get("clip_high", c.clip_high);
  r.get("time_cost", c.time_cost);
  r.get("entry_bonus", c.entry_bonus);
  r.get("entry_penalty", c.entry_penalty);
  r.get("exit_profit_base", c.exit_profit_base);
  r.get("exit_profit_slope", c.exit_profit_slope);
  r.get("exit_loss_base", c.exit_loss_base);
  r.get("exit_loss_slope", c.exit_loss_slope);
  r.get("holding_coef", c.holding_coef);
  r.get("invalid_penalty", c.invalid_penalty);
  r.finish();
}

void to_json(json& j, const NetConfig& c) {
  j = {{"obs_dim", c.obs_dim}, {"latent", c.latent}, {"vqc_layers", c.vqc_layers}, {"quantum", c.quantum}};
}

void from_json(const json& j, NetConfig& c) {
  Reader r(j, "agent.net");
  r.get("obs_dim", c.obs_dim);
  r.get("latent", c.latent);
  r.get("vqc_layers", c.vqc_layers);
  r.get("quantum", c.quantum);
  r.finish();
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"workers", c.workers},         {"rollout_len", c.rollout_len},
       {"gamma", c.gamma},             {"entropy_beta", c.entropy_beta},
       {"lr", c.lr},                   {"max_episodes", c.max_episodes},
       {"init_seed", c.init_seed},     {"sampling_seed", c.sampling_seed},
       {"net", c.net}};
}

void from_json(const json& j, TrainConfig& c) {
  Reader r(j, "agent");
  r.get("workers", c.workers);
  r.get("rollout_len", c.rollout_len);
  r.get("gamma", c.gamma);
  r.get("entropy_beta", c.entropy_beta);
  r.get("lr", c.lr);
  r.get("max_episodes", c.max_episodes);
  r.get("init_seed", c.init_seed);
  r.get("sampling_seed", c.sampling_seed);
  r.get("net", c.net);
  r.finish();
}

void to_json(json& j, const RunConfig& c) {
  j = {{"data", c.data.string()}, {"out", c.out.string()}, {"train_fraction", c.train_fraction},
       {"qlstm", c.qlstm},        {"env", c.env},          {"agent", c.agent}};
}

void from_json(const json& j, RunConfig& c) {
  Reader r(j, "<root>");
  r.path("data", c.data);
  r.path("out", c.out);
  r.get("train_fraction", c.train_fraction);
  r.get("qlstm", c.qlstm);
  r.get("env", c.env);
  r.get("agent", c.agent);
  r.finish();
}

void RunConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0, 1)");
  qlstm.validate();
  env.validate();
  agent.validate();
  if (qlstm.input_dim != kForecastFeatures.size())
    throw ValidationError("qlstm.input_dim must be " + std::to_string(kForecastFeatures.size()) +
                          " (open, high, low, close, ma5, ma10)");
  if (agent.net.obs_dim != kObservationSize)
    throw ValidationError("agent.net.obs_dim must be " + std::to_string(kObservationSize));
}

void RunConfig::apply_seed(std::uint64_t seed) {
  qlstm.init_seed = seed;
  qlstm.shuffle_seed = seed + 1;
  agent.init_seed = seed + 2;
  agent.sampling_seed = seed + 3;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  // Nested from_json wraps type errors as ValidationError.
  RunConfig c;
  from_json(j, c);
  return c;
}

}  // namespace qfx
