#include "qfx/nn_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qfx/error.hpp"

namespace qfx {

namespace {

constexpr char kMagic[4] = {'Q', 'F', 'X', '1'};

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<unsigned char>((v >> (8 * k)) & 0xFFU));
}

std::uint64_t get_u64(std::span<const unsigned char> bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw ValidationError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[pos + k]) << (8 * k);
  pos += 8;
  return v;
}

}  // namespace

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in)
    throw std::invalid_argument("dense layer expects input of size " + std::to_string(layer.in) +
                                ", got " + std::to_string(x.size()));
  std::vector<double> y(layer.bias);
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double* row = layer.weights.data() + r * layer.in;
    double s = 0.0;
    for (std::size_t c = 0; c < layer.in; ++c) s += row[c] * x[c];
    y[r] += s;
  }
  return y;
}

DenseGrad dense_backward(const DenseLayer& layer, std::span<const double> x,
                         std::span<const double> upstream) {
  if (x.size() != layer.in || upstream.size() != layer.out)
    throw std::invalid_argument("dense backward shape mismatch");
  DenseGrad g{std::vector<double>(layer.weights.size(), 0.0),
              std::vector<double>(upstream.begin(), upstream.end()),
              std::vector<double>(layer.in, 0.0)};
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double u = upstream[r];
    if (u == 0.0) continue;
    const double* row = layer.weights.data() + r * layer.in;
    double* grow = g.weights.data() + r * layer.in;
    for (std::size_t c = 0; c < layer.in; ++c) {
      grow[c] = u * x[c];
      g.input[c] += u * row[c];
    }
  }
  return g;
}

void init_glorot(DenseLayer& layer, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : layer.weights) w = dist(rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void init_angles(std::span<double> angles, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
  for (double& a : angles) a = dist(rng);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - peak);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossResult weighted_cross_entropy(std::span<const double> probs, std::size_t label,
                                  std::span<const double> class_weights) {
  if (label >= probs.size() || class_weights.size() != probs.size())
    throw std::invalid_argument("cross-entropy label or class weights out of range");
  constexpr double kEps = 1e-12;
  const double w = class_weights[label];
  const double p = probs[label];
  LossResult r;
  r.loss = -w * std::log(p + kEps);
  // d/dz_j of -w log(p_y + eps) = -w p_y / (p_y + eps) (1[j = y] - p_j)
  const double scale = -w * p / (p + kEps);
  r.grad_logits.resize(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j)
    r.grad_logits[j] = scale * ((j == label ? 1.0 : 0.0) - probs[j]);
  return r;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

StepStatus RmsProp::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != square_avg_.size() || grads.size() != square_avg_.size())
    throw std::invalid_argument("RMSprop shape mismatch");
  if (!all_finite(grads)) {
    ++skipped_;
    return StepStatus::kSkippedNonFinite;
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    square_avg_[k] = decay_ * square_avg_[k] + (1.0 - decay_) * grads[k] * grads[k];
    params[k] -= lr_ * grads[k] / (std::sqrt(square_avg_[k]) + eps_);
  }
  return StepStatus::kApplied;
}

StepStatus Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam shape mismatch");
  if (!all_finite(grads)) {
    ++skipped_;
    return StepStatus::kSkippedNonFinite;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k] * grads[k];
    const double m_hat = m_[k] / c1;
    const double v_hat = v_[k] / c2;
    params[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
  return StepStatus::kApplied;
}

void append_params(const DenseLayer& layer, std::vector<double>& flat) {
  flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
  flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
}

std::size_t read_params(DenseLayer& layer, std::span<const double> flat, std::size_t offset) {
  if (offset + layer.param_count() > flat.size())
    throw std::invalid_argument("flat parameter vector too short");
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), layer.weights.size(),
              layer.weights.begin());
  offset += layer.weights.size();
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), layer.bias.size(),
              layer.bias.begin());
  return offset + layer.bias.size();
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint) {
  const std::string header = checkpoint.header.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  put_u64(out, checkpoint.params.size());
  for (double v : checkpoint.params) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                                      [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; }))
    throw ValidationError("not a QFX1 checkpoint (bad magic)");
  std::size_t pos = 4;
  const std::uint64_t header_len = get_u64(bytes, pos);
  if (pos + header_len > bytes.size()) throw ValidationError("checkpoint truncated");
  Checkpoint cp;
  try {
    cp.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  const std::uint64_t n = get_u64(bytes, pos);
  if (pos + 8 * n != bytes.size()) throw ValidationError("checkpoint parameter block has wrong size");
  cp.params.resize(n);
  for (std::uint64_t k = 0; k < n; ++k) cp.params[k] = std::bit_cast<double>(get_u64(bytes, pos));
  return cp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace qfx
