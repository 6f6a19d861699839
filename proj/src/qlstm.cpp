#include "qfx/qlstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qfx/config.hpp"
#include "qfx/csv.hpp"
#include "qfx/error.hpp"

namespace qfx {

namespace {

struct GateCache {
  std::vector<double> angles_in;  // in_proj output, fed to the VQC encoder
  std::vector<double> expect;     // VQC output
  std::vector<double> act;        // sigma or tanh of the out_proj output
};

struct StepCache {
  std::vector<double> v;  // concat(x, h_prev)
  std::vector<double> c_prev;
  std::array<GateCache, 4> gates;
  std::vector<double> c;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

StepCache step_forward(std::span<const double> x, const CellState& state, const QlstmParams& p) {
  const QlstmConfig& cfg = p.config;
  if (x.size() != cfg.input_dim)
    throw std::invalid_argument("QLSTM step expects " + std::to_string(cfg.input_dim) +
                                " features, got " + std::to_string(x.size()));
  if (state.h.size() != cfg.hidden_dim || state.c.size() != cfg.hidden_dim)
    throw std::invalid_argument("QLSTM cell state has the wrong hidden size");
  const VqcSpec spec = cfg.vqc_spec();
  StepCache s;
  s.v.assign(x.begin(), x.end());
  s.v.insert(s.v.end(), state.h.begin(), state.h.end());
  s.c_prev = state.c;
  for (std::size_t g = 0; g < 4; ++g) {
    const GateStack& stack = p.gates[g];
    GateCache& gc = s.gates[g];
    gc.angles_in = dense_forward(stack.in_proj, s.v);
    gc.expect = vqc_forward(spec, stack.angles, gc.angles_in);
    gc.act = dense_forward(stack.out_proj, gc.expect);
    for (double& z : gc.act) z = g == kUpdate ? std::tanh(z) : sigmoid(z);
  }
  const std::size_t n = cfg.hidden_dim;
  s.c.resize(n);
  s.tanh_c.resize(n);
  s.h.resize(n);
  const auto& f = s.gates[kForget].act;
  const auto& i = s.gates[kInput].act;
  const auto& u = s.gates[kUpdate].act;
  const auto& o = s.gates[kOutput].act;
  for (std::size_t k = 0; k < n; ++k) {
    s.c[k] = f[k] * s.c_prev[k] + i[k] * u[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = o[k] * s.tanh_c[k];
  }
  return s;
}

void check_window(const std::vector<std::vector<double>>& window, const QlstmConfig& cfg) {
  if (window.size() != cfg.seq_len)
    throw std::invalid_argument("QLSTM window must have " + std::to_string(cfg.seq_len) +
                                " rows, got " + std::to_string(window.size()));
}

// Offsets of each block inside the flattened parameter vector.
struct Layout {
  std::array<std::size_t, 4> in_proj{};
  std::array<std::size_t, 4> angles{};
  std::array<std::size_t, 4> out_proj{};
  std::size_t head = 0;
  std::size_t total = 0;
};

Layout layout_of(const QlstmParams& p) {
  Layout l;
  std::size_t off = 0;
  for (std::size_t g = 0; g < 4; ++g) {
    l.in_proj[g] = off;
    off += p.gates[g].in_proj.param_count();
    l.angles[g] = off;
    off += p.gates[g].angles.size();
    l.out_proj[g] = off;
    off += p.gates[g].out_proj.param_count();
  }
  l.head = off;
  l.total = off + p.head.param_count();
  return l;
}

void add_dense_grad(std::vector<double>& grad, std::size_t offset, const DenseGrad& dg) {
  for (std::size_t k = 0; k < dg.weights.size(); ++k) grad[offset + k] += dg.weights[k];
  offset += dg.weights.size();
  for (std::size_t k = 0; k < dg.bias.size(); ++k) grad[offset + k] += dg.bias[k];
}

std::size_t predicted_class(const std::array<double, 2>& probs) {
  return probs[1] > probs[0] ? 1 : 0;
}

}  // namespace

void QlstmConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || seq_len == 0)
    throw ValidationError("QLSTM dimensions must be positive");
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw ValidationError("QLSTM gate VQC qubits must be in [1, 12]");
  if (vqc_layers < 0) throw ValidationError("QLSTM vqc_layers must be non-negative");
  if (epochs < 0) throw ValidationError("QLSTM epochs must be non-negative");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("QLSTM lr must be finite and >= 0");
}

QlstmParams QlstmParams::zeros(const QlstmConfig& config) {
  config.validate();
  QlstmParams p;
  p.config = config;
  const std::size_t q = static_cast<std::size_t>(config.n_qubits);
  for (GateStack& g : p.gates) {
    g.in_proj = DenseLayer(config.input_dim + config.hidden_dim, q);
    g.angles.assign(config.vqc_spec().param_count(), 0.0);
    g.out_proj = DenseLayer(q, config.hidden_dim);
  }
  p.head = DenseLayer(config.hidden_dim, 2);
  return p;
}

QlstmParams QlstmParams::random(const QlstmConfig& config, Rng& rng) {
  QlstmParams p = zeros(config);
  for (GateStack& g : p.gates) {
    init_glorot(g.in_proj, rng);
    init_angles(g.angles, rng);
    init_glorot(g.out_proj, rng);
  }
  init_glorot(p.head, rng);
  return p;
}

std::vector<double> QlstmParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const GateStack& g : gates) {
    append_params(g.in_proj, flat);
    flat.insert(flat.end(), g.angles.begin(), g.angles.end());
    append_params(g.out_proj, flat);
  }
  append_params(head, flat);
  return flat;
}

void QlstmParams::unflatten(std::span<const double> flat) {
  if (flat.size() != size())
    throw std::invalid_argument("QLSTM expects " + std::to_string(size()) + " parameters, got " +
                                std::to_string(flat.size()));
  std::size_t off = 0;
  for (GateStack& g : gates) {
    off = read_params(g.in_proj, flat, off);
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), g.angles.size(), g.angles.begin());
    off += g.angles.size();
    off = read_params(g.out_proj, flat, off);
  }
  read_params(head, flat, off);
}

std::size_t QlstmParams::size() const { return count().total(); }

ParamCount QlstmParams::count() const {
  ParamCount c;
  for (const GateStack& g : gates) {
    c += classical_params(g.in_proj);
    c.quantum += g.angles.size();
    c += classical_params(g.out_proj);
  }
  c += classical_params(head);
  return c;
}

CellState zero_cell_state(const QlstmConfig& config) {
  return {std::vector<double>(config.hidden_dim, 0.0), std::vector<double>(config.hidden_dim, 0.0)};
}

CellState cell_forward(std::span<const double> x, const CellState& state, const QlstmParams& params) {
  StepCache s = step_forward(x, state, params);
  return {std::move(s.h), std::move(s.c)};
}

std::array<double, 2> sequence_forward(const std::vector<std::vector<double>>& window,
                                       const QlstmParams& params) {
  check_window(window, params.config);
  CellState state = zero_cell_state(params.config);
  for (const auto& row : window) state = cell_forward(row, state, params);
  const auto probs = softmax(dense_forward(params.head, state.h));
  return {probs[0], probs[1]};
}

QlstmLossGrad qlstm_loss_and_grad(const QlstmParams& params, const ForecastSample& sample,
                                  std::span<const double> class_weights) {
  const QlstmConfig& cfg = params.config;
  check_window(sample.window, cfg);
  const VqcSpec spec = cfg.vqc_spec();
  const std::size_t n = cfg.hidden_dim;

  std::vector<StepCache> steps;
  steps.reserve(cfg.seq_len);
  CellState state = zero_cell_state(cfg);
  for (const auto& row : sample.window) {
    steps.push_back(step_forward(row, state, params));
    state = {steps.back().h, steps.back().c};
  }
  const auto logits = dense_forward(params.head, state.h);
  const auto probs = softmax(logits);
  const auto ce = weighted_cross_entropy(probs, static_cast<std::size_t>(sample.label), class_weights);

  const Layout layout = layout_of(params);
  QlstmLossGrad out;
  out.loss = ce.loss;
  out.probs = {probs[0], probs[1]};
  out.grad.assign(layout.total, 0.0);

  const DenseGrad head_grad = dense_backward(params.head, state.h, ce.grad_logits);
  add_dense_grad(out.grad, layout.head, head_grad);

  std::vector<double> dh = head_grad.input;
  std::vector<double> dc(n, 0.0);
  for (std::size_t t = steps.size(); t-- > 0;) {
    const StepCache& s = steps[t];
    const auto& f = s.gates[kForget].act;
    const auto& i = s.gates[kInput].act;
    const auto& u = s.gates[kUpdate].act;
    const auto& o = s.gates[kOutput].act;
    std::array<std::vector<double>, 4> dz;
    for (auto& v : dz) v.assign(n, 0.0);
    std::vector<double> dc_prev(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double d_o = dh[k] * s.tanh_c[k];
      const double dck = dc[k] + dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      dz[kForget][k] = dck * s.c_prev[k] * f[k] * (1.0 - f[k]);
      dz[kInput][k] = dck * u[k] * i[k] * (1.0 - i[k]);
      dz[kUpdate][k] = dck * i[k] * (1.0 - u[k] * u[k]);
      dz[kOutput][k] = d_o * o[k] * (1.0 - o[k]);
      dc_prev[k] = dck * f[k];
    }
    std::vector<double> dv(s.v.size(), 0.0);
    for (std::size_t g = 0; g < 4; ++g) {
      const GateStack& stack = params.gates[g];
      const GateCache& gc = s.gates[g];
      const DenseGrad og = dense_backward(stack.out_proj, gc.expect, dz[g]);
      add_dense_grad(out.grad, layout.out_proj[g], og);
      const VqcGradient vg = vqc_gradient(spec, stack.angles, gc.angles_in, og.input);
      for (std::size_t k = 0; k < vg.params.size(); ++k) out.grad[layout.angles[g] + k] += vg.params[k];
      const DenseGrad ig = dense_backward(stack.in_proj, s.v, vg.inputs);
      add_dense_grad(out.grad, layout.in_proj[g], ig);
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += ig.input[k];
    }
    dh.assign(dv.begin() + static_cast<std::ptrdiff_t>(cfg.input_dim), dv.end());
    dc = std::move(dc_prev);
  }
  return out;
}

std::array<double, 2> inverse_frequency_weights(const std::vector<ForecastSample>& samples) {
  std::array<std::size_t, 2> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  if (counts[0] == 0 || counts[1] == 0)
    throw ValidationError("QLSTM training needs both up and down samples (got " +
                          std::to_string(counts[0]) + " up, " + std::to_string(counts[1]) + " down)");
  const double total = static_cast<double>(samples.size());
  return {total / (2.0 * static_cast<double>(counts[0])), total / (2.0 * static_cast<double>(counts[1]))};
}

double accuracy(const QlstmParams& params, const std::vector<ForecastSample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (const auto& s : samples)
    if (predicted_class(sequence_forward(s.window, params)) == static_cast<std::size_t>(s.label)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

QlstmTrainResult train_qlstm(const std::vector<ForecastSample>& train,
                             const std::vector<ForecastSample>& test, const QlstmConfig& config,
                             std::span<const double> class_weights) {
  config.validate();
  if (train.empty()) throw ValidationError("QLSTM training set is empty");
  QlstmTrainResult result;
  const auto inverse = inverse_frequency_weights(train);
  if (class_weights.empty()) {
    result.class_weights = inverse;
  } else {
    if (class_weights.size() != 2) throw ValidationError("QLSTM needs exactly two class weights");
    result.class_weights = {class_weights[0], class_weights[1]};
  }

  Rng init_rng(config.init_seed);
  result.params = QlstmParams::random(config, init_rng);
  std::vector<double> flat = result.params.flatten();
  RmsProp optimizer(flat.size(), config.lr);
  Rng shuffle_rng(config.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const auto lg = qlstm_loss_and_grad(result.params, train[idx], result.class_weights);
      loss_sum += lg.loss;
      optimizer.step(flat, lg.grad);
      result.params.unflatten(flat);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(train.size());
    m.train_acc = accuracy(result.params, train);
    m.test_acc = accuracy(result.params, test);
    result.history.push_back(m);
  }
  return result;
}

void write_epoch_metrics_csv(const std::vector<EpochMetrics>& history,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "epoch,loss,train_acc,test_acc\n";
  for (const auto& m : history)
    out << m.epoch << ',' << format_double(m.loss) << ',' << format_double(m.train_acc) << ','
        << (std::isnan(m.test_acc) ? std::string() : format_double(m.test_acc)) << '\n';
}

Forecaster Forecaster::from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.header.value("kind", "") != "qlstm")
    throw ValidationError("checkpoint is not a QLSTM checkpoint");
  const QlstmConfig cfg = checkpoint.header.at("config").get<QlstmConfig>();
  QlstmParams p = QlstmParams::zeros(cfg);
  p.unflatten(checkpoint.params);
  return Forecaster(std::move(p));
}

Checkpoint Forecaster::to_checkpoint() const {
  const QlstmParams& p = params();
  const ParamCount c = p.count();
  nlohmann::json header = {{"kind", "qlstm"},
                           {"config", p.config},
                           {"param_count", {{"quantum", c.quantum}, {"classical", c.classical}}}};
  return {header, p.flatten()};
}

const QlstmParams& Forecaster::params() const {
  if (!loaded_) throw ValidationError("QLSTM forecaster has no trained checkpoint loaded");
  return params_;
}

std::array<double, 2> Forecaster::predict(const std::vector<std::vector<double>>& window) const {
  return sequence_forward(window, params());
}

}  // namespace qfx
