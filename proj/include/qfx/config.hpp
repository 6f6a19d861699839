#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "qfx/qa3c.hpp"
#include "qfx/qlstm.hpp"
#include "qfx/trading_env.hpp"

namespace qfx {

// JSON round-trips for the config structs. Missing keys keep their defaults;
// unknown keys are rejected so typos surface as validation errors.
void to_json(nlohmann::json& j, const QlstmConfig& c);
void from_json(const nlohmann::json& j, QlstmConfig& c);
void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);
void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path out = "qfx_out";
  double train_fraction = 0.8;
  QlstmConfig qlstm;
  EnvConfig env;
  TrainConfig agent;

  void validate() const;
  // Sets every seed (QLSTM init/shuffle, agent init/sampling) from one value.
  void apply_seed(std::uint64_t seed);
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace qfx
