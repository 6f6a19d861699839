#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace qfx {

using Rng = std::mt19937_64;

// y = W x + b with W stored row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  std::size_t param_count() const { return weights.size() + bias.size(); }
  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

struct DenseGrad {
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> input;
};

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x);
DenseGrad dense_backward(const DenseLayer& layer, std::span<const double> x,
                         std::span<const double> upstream);

// Glorot-uniform weights in +-sqrt(6/(in+out)), zero bias.
void init_glorot(DenseLayer& layer, Rng& rng);
// Angles uniform in [0, 2 pi).
void init_angles(std::span<double> angles, Rng& rng);

double sigmoid(double x);
std::vector<double> softmax(std::span<const double> logits);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

// loss = -w[label] * log(probs[label] + 1e-12), with the exact gradient of
// that expression through the softmax that produced `probs`.
LossResult weighted_cross_entropy(std::span<const double> probs, std::size_t label,
                                  std::span<const double> class_weights);

bool all_finite(std::span<const double> values);

// Outcome of one optimizer call; non-finite gradients leave the parameters
// and the optimizer state untouched.
enum class StepStatus { kApplied, kSkippedNonFinite };

class RmsProp {
 public:
  explicit RmsProp(std::size_t size, double lr = 5e-3, double decay = 0.99, double eps = 1e-8)
      : lr_(lr), decay_(decay), eps_(eps), square_avg_(size, 0.0) {}

  StepStatus step(std::span<double> params, std::span<const double> grads);
  std::size_t skipped() const { return skipped_; }
  std::span<const double> square_avg() const { return square_avg_; }
  double lr() const { return lr_; }

 private:
  double lr_;
  double decay_;
  double eps_;
  std::vector<double> square_avg_;
  std::size_t skipped_ = 0;
};

class Adam {
 public:
  explicit Adam(std::size_t size, double lr = 1e-5, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

  StepStatus step(std::span<double> params, std::span<const double> grads);
  std::size_t skipped() const { return skipped_; }
  std::uint64_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
  std::size_t skipped_ = 0;
};

struct ParamCount {
  std::size_t quantum = 0;
  std::size_t classical = 0;
  std::size_t total() const { return quantum + classical; }

  ParamCount& operator+=(const ParamCount& other) {
    quantum += other.quantum;
    classical += other.classical;
    return *this;
  }
  friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

inline ParamCount classical_params(const DenseLayer& layer) { return {0, layer.param_count()}; }

// Copies layer parameters (weights then bias) to/from a flat vector.
void append_params(const DenseLayer& layer, std::vector<double>& flat);
std::size_t read_params(DenseLayer& layer, std::span<const double> flat, std::size_t offset);

// Binary checkpoint:
//   bytes 0..3   magic "QFX1"
//   u64 LE       length H of the JSON header
//   H bytes      JSON header (model kind, shapes, seeds, config)
//   u64 LE       parameter count N
//   N x f64 LE   parameters
struct Checkpoint {
  nlohmann::json header;
  std::vector<double> params;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qfx
