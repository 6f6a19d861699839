// qfx: command-line driver for the forecast -> agent -> backtest pipeline.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qfx/config.hpp"
#include "qfx/error.hpp"
#include "qfx/pipeline.hpp"
#include "qfx/synthetic.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

struct CommonFlags {
  std::optional<fs::path> config;
  std::optional<fs::path> data;
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> episodes;
  bool trace = false;
  bool dump_features = false;
  std::optional<fs::path> benchmarks;
  std::optional<fs::path> trace_state;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--data", f.data, "quotes CSV (date,open,high,low,close)");
  sub->add_option("--out", f.out, "output directory for artifacts");
  sub->add_option("--seed", f.seed, "sets every training and sampling seed");
  sub->add_option("--workers", f.workers, "asynchronous agent workers");
  sub->add_option("--episodes", f.episodes, "agent training episodes");
  sub->add_flag("--trace", f.trace, "write the per-step backtest trace");
  sub->add_flag("--dump-features", f.dump_features, "write the normalized feature table");
  sub->add_option("--benchmarks", f.benchmarks, "benchmark CSV (ticker,name,return_pct)");
  sub->add_option("--trace-state", f.trace_state, "dump VQC amplitudes for the first backtest step");
}

// Config file first, then flags on top.
qfx::RunConfig resolve(const CommonFlags& f) {
  qfx::RunConfig c = f.config ? qfx::load_run_config(*f.config) : qfx::RunConfig{};
  if (f.data) c.data = *f.data;
  if (f.out) c.out = *f.out;
  if (f.seed) c.apply_seed(*f.seed);
  if (f.workers) c.agent.workers = *f.workers;
  if (f.episodes) c.agent.max_episodes = *f.episodes;
  c.validate();
  if (!c.data.empty() && !fs::exists(c.data))
    throw qfx::ValidationError("data file '" + c.data.string() + "' does not exist");
  if (f.benchmarks && !fs::exists(*f.benchmarks))
    throw qfx::ValidationError("benchmarks file '" + f.benchmarks->string() + "' does not exist");
  return c;
}

qfx::StageOptions stage_options(const CommonFlags& f) {
  qfx::StageOptions o;
  o.dump_features = f.dump_features;
  o.trace = f.trace;
  o.trace_state = f.trace_state;
  o.benchmarks = f.benchmarks;
  o.log = &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qfx: quantum LSTM forecaster and quantum A3C trading agent"};
  app.require_subcommand(1);

  CommonFlags flags;
  using Stage = void (*)(const qfx::RunConfig&, const qfx::StageOptions&);
  struct Command {
    const char* name;
    const char* help;
    Stage run;
  };
  const Command commands[] = {
      {"preprocess", "clean quotes, compute indicators and fit normalization", qfx::stage_preprocess},
      {"train-qlstm", "train the QLSTM trend forecaster", qfx::stage_train_qlstm},
      {"train-agent", "train the actor-critic agent with asynchronous workers", qfx::stage_train_agent},
      {"backtest", "run the greedy policy over the test range", qfx::stage_backtest},
      {"report", "compute metrics and write the report files", qfx::stage_report},
      {"pipeline", "run every stage in order", qfx::run_pipeline},
  };
  Stage selected = nullptr;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, flags);
    sub->callback([&selected, run = cmd.run] { selected = run; });
  }

  CLI::App* selftest = app.add_subcommand("selftest", "run the oracle suites");

  qfx::SyntheticSpec synth;
  fs::path synth_out = "synthetic.csv";
  bool uptrend = false;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a seeded synthetic quotes CSV");
  synth_cmd->add_option("--out", synth_out, "output CSV path");
  synth_cmd->add_option("--days", synth.days, "number of business days");
  synth_cmd->add_option("--seed", synth.seed, "noise seed");
  synth_cmd->add_flag("--uptrend", uptrend, "strictly increasing noise-free series");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (selftest->parsed()) {
      std::vector<qfx::checks::SuiteSummary> summary;
      return qfx::checks::run_selftest(std::cout, &summary) ? kOk : kRuntime;
    }
    if (synth_cmd->parsed()) {
      const auto quotes = uptrend ? qfx::monotone_uptrend(synth.days) : qfx::generate_synthetic_quotes(synth);
      qfx::write_quotes_csv(quotes, synth_out);
      std::cerr << "wrote " << quotes.size() << " bars to " << synth_out.string() << '\n';
      return kOk;
    }
    selected(resolve(flags), stage_options(flags));
    return kOk;
  } catch (const qfx::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const qfx::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
