#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace qfx {

inline constexpr int kMaxQubits = 12;

// Exact n-qubit register. Basis index bit q holds qubit q (qubit 0 is the
// least significant bit).
class StateVector {
 public:
  using Amplitude = std::complex<double>;

  // |0...0> on n_qubits; throws std::out_of_range unless 1 <= n <= kMaxQubits.
  explicit StateVector(int n_qubits);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const noexcept { return amplitudes_; }
  std::span<Amplitude> amplitudes() noexcept { return amplitudes_; }
  double norm() const;

 private:
  int n_qubits_;
  std::vector<Amplitude> amplitudes_;
};

StateVector init_state(int n_qubits);

// Rotation R_y(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]] on `qubit`.
void apply_ry(StateVector& state, int qubit, double theta);
void apply_cnot(StateVector& state, int control, int target);
double expect_z(const StateVector& state, int qubit);

void write_state_csv(const StateVector& state, const std::filesystem::path& path);

// Angle encoding of a normalized feature.
inline constexpr double kEncodingScale = 3.14159265358979323846;
inline double encode_angle(double x) { return kEncodingScale * x; }

// Layout: R_y(encode(x_i)) on qubits 0..n_encoding_inputs-1, then
// n_layers x [R_y(theta_{l,q}) on every qubit, CNOT ring q -> (q+1) mod n],
// then <Z_q> on every qubit. Parameters are stored layer-major.
struct VqcSpec {
  int n_qubits = 4;
  int n_encoding_inputs = 4;
  int n_layers = 2;

  std::size_t param_count() const {
    return static_cast<std::size_t>(n_qubits) * static_cast<std::size_t>(n_layers);
  }
  void validate() const;
};

struct VqcGradient {
  std::vector<double> params;  // d(upstream . <Z>) / d theta
  std::vector<double> inputs;  // d(upstream . <Z>) / d x
};

// Final statevector of the circuit (for inspection and tracing).
StateVector vqc_state(const VqcSpec& spec, std::span<const double> params,
                      std::span<const double> inputs);

std::vector<double> vqc_forward(const VqcSpec& spec, std::span<const double> params,
                                std::span<const double> inputs);

// Parameter-shift gradient contracted with `upstream` (one entry per qubit).
// Input gradients apply the same rule to the encoding rotations, scaled by
// the encoding slope.
VqcGradient vqc_gradient(const VqcSpec& spec, std::span<const double> params,
                         std::span<const double> inputs, std::span<const double> upstream);

}  // namespace qfx
