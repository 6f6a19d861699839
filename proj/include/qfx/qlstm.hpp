#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qfx/market_data.hpp"
#include "qfx/nn_core.hpp"
#include "qfx/quantum_sim.hpp"

namespace qfx {

struct QlstmConfig {
  std::size_t input_dim = 6;
  std::size_t hidden_dim = 2;
  std::size_t seq_len = 4;
  int n_qubits = 4;
  int vqc_layers = 2;
  int epochs = 50;
  double lr = 5e-3;
  std::uint64_t init_seed = 7;
  std::uint64_t shuffle_seed = 11;

  void validate() const;
  VqcSpec vqc_spec() const { return {n_qubits, n_qubits, vqc_layers}; }
};

// One LSTM gate: concat(x, h) -> dense -> VQC -> dense -> hidden_dim.
struct GateStack {
  DenseLayer in_proj;
  std::vector<double> angles;
  DenseLayer out_proj;
};

enum GateIndex : std::size_t { kForget = 0, kInput = 1, kUpdate = 2, kOutput = 3 };

struct QlstmParams {
  QlstmConfig config;
  std::array<GateStack, 4> gates;
  DenseLayer head;  // hidden_dim -> 2 logits (up, down)

  // All-zero parameters with the shapes implied by `config`.
  static QlstmParams zeros(const QlstmConfig& config);
  static QlstmParams random(const QlstmConfig& config, Rng& rng);

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  std::size_t size() const;
  ParamCount count() const;
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

CellState zero_cell_state(const QlstmConfig& config);
CellState cell_forward(std::span<const double> x, const CellState& state, const QlstmParams& params);

// (P_up, P_down) after unrolling the window from the zero state.
std::array<double, 2> sequence_forward(const std::vector<std::vector<double>>& window,
                                       const QlstmParams& params);

struct QlstmLossGrad {
  double loss = 0.0;
  std::array<double, 2> probs{};
  std::vector<double> grad;  // flattened, same order as QlstmParams::flatten
};

// Weighted cross-entropy of one sample and its full BPTT gradient.
QlstmLossGrad qlstm_loss_and_grad(const QlstmParams& params, const ForecastSample& sample,
                                  std::span<const double> class_weights);

// Inverse class frequency N / (2 N_c); throws if a class is absent.
std::array<double, 2> inverse_frequency_weights(const std::vector<ForecastSample>& samples);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;  // NaN when no test set was supplied
};

struct QlstmTrainResult {
  QlstmParams params;
  std::vector<EpochMetrics> history;
  std::array<double, 2> class_weights{};
};

double accuracy(const QlstmParams& params, const std::vector<ForecastSample>& samples);

// Online RMSprop over shuffled samples. `class_weights` defaults to inverse
// class frequency of `train`.
QlstmTrainResult train_qlstm(const std::vector<ForecastSample>& train,
                             const std::vector<ForecastSample>& test, const QlstmConfig& config,
                             std::span<const double> class_weights = {});

void write_epoch_metrics_csv(const std::vector<EpochMetrics>& history,
                             const std::filesystem::path& path);

// Frozen forecaster used by the trading environment.
class Forecaster {
 public:
  Forecaster() = default;
  explicit Forecaster(QlstmParams params) : params_(std::move(params)), loaded_(true) {}

  static Forecaster from_checkpoint(const Checkpoint& checkpoint);
  Checkpoint to_checkpoint() const;

  bool loaded() const { return loaded_; }
  const QlstmParams& params() const;
  std::array<double, 2> predict(const std::vector<std::vector<double>>& window) const;

 private:
  QlstmParams params_;
  bool loaded_ = false;
};

}  // namespace qfx
