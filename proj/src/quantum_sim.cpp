#include "qfx/quantum_sim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qfx/csv.hpp"

namespace qfx {

namespace {

void check_qubit(const StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits())
    throw std::out_of_range("qubit index " + std::to_string(qubit) + " outside register of " +
                            std::to_string(state.n_qubits()));
}

struct Gate {
  enum class Kind { kRy, kCnot } kind;
  int a = 0;  // target for R_y, control for CNOT
  int b = 0;  // CNOT target
  double angle = 0.0;
  // >= 0: variational parameter index; <= -1: encoding of input (-slot - 1).
  int slot = 0;
  bool shiftable = false;
};

std::vector<Gate> build_circuit(const VqcSpec& spec, std::span<const double> params,
                                std::span<const double> inputs) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw std::invalid_argument("VQC expects " + std::to_string(spec.param_count()) +
                                " parameters, got " + std::to_string(params.size()));
  if (inputs.size() != static_cast<std::size_t>(spec.n_encoding_inputs))
    throw std::invalid_argument("VQC expects " + std::to_string(spec.n_encoding_inputs) +
                                " inputs, got " + std::to_string(inputs.size()));
  std::vector<Gate> gates;
  const int n = spec.n_qubits;
  for (int q = 0; q < spec.n_encoding_inputs; ++q)
    gates.push_back({Gate::Kind::kRy, q, 0, encode_angle(inputs[static_cast<std::size_t>(q)]),
                     -q - 1, true});
  for (int layer = 0; layer < spec.n_layers; ++layer) {
    for (int q = 0; q < n; ++q) {
      const int slot = layer * n + q;
      gates.push_back({Gate::Kind::kRy, q, 0, params[static_cast<std::size_t>(slot)], slot, true});
    }
    if (n > 1)
      for (int q = 0; q < n; ++q) gates.push_back({Gate::Kind::kCnot, q, (q + 1) % n, 0.0, 0, false});
  }
  return gates;
}

void apply_gate(StateVector& state, const Gate& gate, double angle) {
  if (gate.kind == Gate::Kind::kRy)
    apply_ry(state, gate.a, angle);
  else
    apply_cnot(state, gate.a, gate.b);
}

// Probability-weighted Z sign for every qubit in one sweep.
std::vector<double> all_expectations(const StateVector& state) {
  std::vector<double> out(static_cast<std::size_t>(state.n_qubits()), 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    if (p == 0.0) continue;
    for (int q = 0; q < state.n_qubits(); ++q) out[static_cast<std::size_t>(q)] += ((i >> q) & 1U) ? -p : p;
  }
  return out;
}

double contract(const std::vector<double>& values, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t q = 0; q < values.size(); ++q) s += values[q] * weights[q];
  return s;
}

}  // namespace

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::out_of_range("qubit count must be in [1, " + std::to_string(kMaxQubits) +
                            "], got " + std::to_string(n_qubits));
  amplitudes_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amplitudes_) s += std::norm(a);
  return std::sqrt(s);
}

StateVector init_state(int n_qubits) { return StateVector(n_qubits); }

void apply_ry(StateVector& state, int qubit, double theta) {
  check_qubit(state, qubit);
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  auto amps = state.amplitudes();
  const std::size_t stride = std::size_t{1} << qubit;
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const auto a0 = amps[i];
      const auto a1 = amps[i + stride];
      amps[i] = c * a0 - s * a1;
      amps[i + stride] = s * a0 + c * a1;
    }
  }
}

void apply_cnot(StateVector& state, int control, int target) {
  check_qubit(state, control);
  check_qubit(state, target);
  if (control == target) throw std::invalid_argument("CNOT control and target must differ");
  auto amps = state.amplitudes();
  const std::size_t cbit = std::size_t{1} << control;
  const std::size_t tbit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps.size(); ++i)
    if ((i & cbit) && !(i & tbit)) std::swap(amps[i], amps[i | tbit]);
}

double expect_z(const StateVector& state, int qubit) {
  check_qubit(state, qubit);
  const auto amps = state.amplitudes();
  double z = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    z += ((i >> qubit) & 1U) ? -p : p;
  }
  return z;
}

void write_state_csv(const StateVector& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "index,basis,real,imag,probability\n";
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    std::string basis(static_cast<std::size_t>(state.n_qubits()), '0');
    // most significant qubit first, as in |q_{n-1} ... q_0>
    for (int q = 0; q < state.n_qubits(); ++q)
      if ((i >> q) & 1U) basis[static_cast<std::size_t>(state.n_qubits() - 1 - q)] = '1';
    out << i << ',' << basis << ',' << format_double(amps[i].real()) << ','
        << format_double(amps[i].imag()) << ',' << format_double(std::norm(amps[i])) << '\n';
  }
}

void VqcSpec::validate() const {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("VQC qubit count must be in [1, " + std::to_string(kMaxQubits) + "]");
  if (n_encoding_inputs < 0 || n_encoding_inputs > n_qubits)
    throw std::invalid_argument("VQC encoding inputs must be in [0, n_qubits]");
  if (n_layers < 0) throw std::invalid_argument("VQC layer count must be non-negative");
}

StateVector vqc_state(const VqcSpec& spec, std::span<const double> params,
                      std::span<const double> inputs) {
  const auto gates = build_circuit(spec, params, inputs);
  StateVector state(spec.n_qubits);
  for (const Gate& g : gates) apply_gate(state, g, g.angle);
  return state;
}

std::vector<double> vqc_forward(const VqcSpec& spec, std::span<const double> params,
                                std::span<const double> inputs) {
  return all_expectations(vqc_state(spec, params, inputs));
}

VqcGradient vqc_gradient(const VqcSpec& spec, std::span<const double> params,
                         std::span<const double> inputs, std::span<const double> upstream) {
  const auto gates = build_circuit(spec, params, inputs);
  if (upstream.size() != static_cast<std::size_t>(spec.n_qubits))
    throw std::invalid_argument("VQC upstream gradient must have one entry per qubit");

  VqcGradient grad{std::vector<double>(params.size(), 0.0),
                   std::vector<double>(inputs.size(), 0.0)};

  // prefix[k] is the state before gate k; each shifted run resumes from it.
  std::vector<StateVector> prefix;
  prefix.reserve(gates.size());
  StateVector state(spec.n_qubits);
  for (const Gate& g : gates) {
    prefix.push_back(state);
    apply_gate(state, g, g.angle);
  }

  constexpr double kShift = std::numbers::pi / 2.0;
  auto shifted = [&](std::size_t k, double delta) {
    StateVector s = prefix[k];
    apply_gate(s, gates[k], gates[k].angle + delta);
    for (std::size_t j = k + 1; j < gates.size(); ++j) apply_gate(s, gates[j], gates[j].angle);
    return contract(all_expectations(s), upstream);
  };

  for (std::size_t k = 0; k < gates.size(); ++k) {
    const Gate& g = gates[k];
    if (!g.shiftable) continue;
    const double d = 0.5 * (shifted(k, kShift) - shifted(k, -kShift));
    if (g.slot >= 0)
      grad.params[static_cast<std::size_t>(g.slot)] = d;
    else
      grad.inputs[static_cast<std::size_t>(-g.slot - 1)] = d * kEncodingScale;
  }
  return grad;
}

}  // namespace qfx
