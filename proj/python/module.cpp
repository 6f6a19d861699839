#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "qfx/backtest.hpp"
#include "qfx/config.hpp"
#include "qfx/error.hpp"
#include "qfx/pipeline.hpp"
#include "qfx/qa3c.hpp"
#include "qfx/qlstm.hpp"
#include "qfx/quantum_sim.hpp"
#include "qfx/synthetic.hpp"
#include "qfx/trading_env.hpp"
#include "selftest.hpp"

namespace py = pybind11;
using namespace qfx;

namespace {

py::object optional_value(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["total_return_pct"] = m.total_return_pct;
  d["max_drawdown_pct"] = m.max_drawdown_pct;
  d["total_trades"] = m.total_trades;
  d["win_rate_pct"] = optional_value(m.win_rate_pct);
  d["best_trade_pct"] = optional_value(m.best_trade_pct);
  d["worst_trade_pct"] = optional_value(m.worst_trade_pct);
  return d;
}

py::dict quotes_dict(const std::vector<Quote>& quotes) {
  std::vector<std::string> dates;
  std::vector<double> open, high, low, close;
  for (const auto& q : quotes) {
    dates.push_back(format_date(q.date));
    open.push_back(q.open);
    high.push_back(q.high);
    low.push_back(q.low);
    close.push_back(q.close);
  }
  py::dict d;
  d["date"] = dates;
  d["open"] = open;
  d["high"] = high;
  d["low"] = low;
  d["close"] = close;
  return d;
}

VqcSpec vqc_spec(int n_qubits, int n_layers) {
  VqcSpec spec{n_qubits, n_qubits, n_layers};
  spec.validate();
  return spec;
}

RunConfig run_config(const std::string& config_json) {
  RunConfig c = nlohmann::json::parse(config_json).get<RunConfig>();
  c.validate();
  return c;
}

void run_stage(const std::string& stage, const std::string& config_json, bool trace, bool dump_features,
               std::optional<std::filesystem::path> benchmarks, std::optional<std::filesystem::path> trace_state) {
  const RunConfig config = run_config(config_json);
  StageOptions o;
  o.trace = trace;
  o.dump_features = dump_features;
  o.benchmarks = std::move(benchmarks);
  o.trace_state = std::move(trace_state);
  py::gil_scoped_release release;
  if (stage == "preprocess") return stage_preprocess(config, o);
  if (stage == "train-qlstm") return stage_train_qlstm(config, o);
  if (stage == "train-agent") return stage_train_agent(config, o);
  if (stage == "backtest") return stage_backtest(config, o);
  if (stage == "report") return stage_report(config, o);
  if (stage == "pipeline") return run_pipeline(config, o);
  throw ValidationError("unknown stage '" + stage + "'");
}

}  // namespace

PYBIND11_MODULE(_qfx, m) {
  m.doc() = "Quantum-enhanced FX trading core";

  static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
  static py::exception<MissingArtifactError> missing_artifact(m, "MissingArtifactError", validation_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const MissingArtifactError& e) {
      py::set_error(missing_artifact, e.what());
    } catch (const ValidationError& e) {
      py::set_error(validation_error, e.what());
    }
  });

  m.def("load_quotes", [](const std::filesystem::path& path) { return quotes_dict(load_quotes(path)); },
        "Clean daily quotes as column lists.", py::arg("path"));

  m.def(
      "indicators",
      [](const std::filesystem::path& path) {
        const auto bars = compute_indicators(load_quotes(path));
        std::vector<double> ma5, ma10, ma20, ma60, vol20;
        std::vector<bool> usable;
        for (const auto& b : bars) {
          ma5.push_back(b.ma5);
          ma10.push_back(b.ma10);
          ma20.push_back(b.ma20);
          ma60.push_back(b.ma60);
          vol20.push_back(b.vol20);
          usable.push_back(b.usable);
        }
        py::dict d;
        d["ma5"] = ma5;
        d["ma10"] = ma10;
        d["ma20"] = ma20;
        d["ma60"] = ma60;
        d["vol20"] = vol20;
        d["usable"] = usable;
        return d;
      },
      "Rolling indicators per bar of a quotes CSV.", py::arg("path"));

  m.def(
      "forward_label",
      [](double close_now, double close_later) -> py::object {
        const auto l = forward_label(close_now, close_later);
        if (!l) return py::none();
        return py::str(*l == Direction::kUp ? "up" : "down");
      },
      py::arg("close_now"), py::arg("close_later"));

  m.def(
      "vqc_forward",
      [](const std::vector<double>& params, const std::vector<double>& inputs, int n_layers) {
        return vqc_forward(vqc_spec(static_cast<int>(inputs.size()), n_layers), params, inputs);
      },
      "Per-qubit <Z> of the layered R_y/CNOT-ring circuit.", py::arg("params"), py::arg("inputs"),
      py::arg("n_layers"));

  m.def(
      "vqc_gradient",
      [](const std::vector<double>& params, const std::vector<double>& inputs, const std::vector<double>& upstream,
         int n_layers) {
        const auto g = vqc_gradient(vqc_spec(static_cast<int>(inputs.size()), n_layers), params, inputs, upstream);
        return py::make_tuple(g.params, g.inputs);
      },
      "Parameter-shift gradients (params, inputs) of upstream . <Z>.", py::arg("params"), py::arg("inputs"),
      py::arg("upstream"), py::arg("n_layers"));

  m.def(
      "compute_reward",
      [](int action, bool valid, bool with_trend, double realized_pnl_pct, double unrealized_pnl_pct,
         bool has_position) {
        if (action < 0 || action > 2) throw ValidationError("action must be 0 (hold), 1 (buy) or 2 (sell)");
        RewardContext c;
        c.action = static_cast<Action>(action);
        c.valid = valid;
        c.with_trend = with_trend;
        c.realized_pnl_pct = realized_pnl_pct;
        c.unrealized_pnl_pct = unrealized_pnl_pct;
        c.has_position = has_position;
        const auto r = compute_reward(EnvConfig{}, c);
        py::dict d;
        d["time_cost"] = r.time_cost;
        d["entry_term"] = r.entry_term;
        d["exit_term"] = r.exit_term;
        d["holding_term"] = r.holding_term;
        d["total_before_clip"] = r.total_before_clip;
        d["total"] = r.total;
        return d;
      },
      py::arg("action"), py::arg("valid") = true, py::arg("with_trend") = false, py::arg("realized_pnl_pct") = 0.0,
      py::arg("unrealized_pnl_pct") = 0.0, py::arg("has_position") = false);

  m.def(
      "param_counts",
      [](bool quantum) {
        NetConfig net;
        net.quantum = quantum;
        const auto c = count_params(ActorCritic::zeros(net));
        py::dict d;
        d["quantum"] = c.quantum;
        d["classical"] = c.classical;
        d["total"] = c.total();
        return d;
      },
      "Actor-critic parameter counts.", py::arg("quantum") = true);

  m.def("max_drawdown_pct", &max_drawdown_pct, py::arg("equity"));
  m.def(
      "compute_metrics",
      [](const std::vector<double>& trade_pnl_pct, const std::vector<double>& equity) {
        return metrics_dict(compute_metrics(trade_pnl_pct, equity));
      },
      py::arg("trade_pnl_pct"), py::arg("equity"));

  m.def(
      "write_synthetic",
      [](const std::filesystem::path& path, std::size_t days, std::uint64_t seed, bool uptrend) {
        SyntheticSpec spec;
        spec.days = days;
        spec.seed = seed;
        write_quotes_csv(uptrend ? monotone_uptrend(days) : generate_synthetic_quotes(spec), path);
      },
      "Write a seeded synthetic quotes CSV.", py::arg("path"), py::arg("days") = 1500, py::arg("seed") = 42,
      py::arg("uptrend") = false);

  m.def(
      "default_config", [] { return nlohmann::json(RunConfig{}).dump(); }, "Default run config as JSON text.");
  m.def("run_stage", &run_stage, "Run one pipeline stage (or 'pipeline') from a JSON run config.", py::arg("stage"),
        py::arg("config_json"), py::arg("trace") = false, py::arg("dump_features") = false,
        py::arg("benchmarks") = py::none(), py::arg("trace_state") = py::none());

  m.def(
      "selftest",
      [] {
        std::ostringstream out;
        bool ok = false;
        {
          py::gil_scoped_release release;
          ok = checks::run_selftest(out);
        }
        return py::make_tuple(ok, out.str());
      },
      "Run the oracle suites; returns (passed, report).");
}
