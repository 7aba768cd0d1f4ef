#pragma once

// Small differentiable kernel: dense tanh networks, an LSTM cell with
// backpropagation through time, a hashed embedding table, MSE, SGD/Adam,
// central-difference gradient checking, and checkpoint serialization.
//
// Everything is float64 and single-sample. Modules expose their parameters
// and gradients as parallel lists of spans so one optimizer can drive any
// composition of them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qf/error.hpp"
#include "qf/random.hpp"

namespace qf {

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }
};

/// Fixed-order dot product with four partial sums.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void fill_uniform(std::span<double> values, double bound, Rng& rng) {
  for (auto& v : values) v = rng.uniform(-bound, bound);
}

struct ParameterSet {
  std::vector<std::span<double>> values;
  std::vector<std::span<double>> grads;

  void append(const ParameterSet& other) {
    values.insert(values.end(), other.values.begin(), other.values.end());
    grads.insert(grads.end(), other.grads.begin(), other.grads.end());
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }
  void zero_grad() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
  }
};

// ---------------------------------------------------------------------------
// Dense network

class DenseNet {
 public:
  struct Layer {
    Matrix weight;  // out × in
    Vector bias;
    Matrix weight_grad;
    Vector bias_grad;
  };

  /// Activations kept by forward() for the matching backward().
  struct Tape {
    std::vector<Vector> inputs;  // input to each layer
    std::vector<Vector> outputs;  // post-activation output of each layer
  };

  DenseNet() = default;

  /// Zero-initialized network with the given layer sizes.
  explicit DenseNet(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ShapeError("DenseNet needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw ShapeError("DenseNet layer sizes must be positive");
      layers_.push_back(Layer{Matrix(sizes_[l + 1], sizes_[l]), Vector(sizes_[l + 1], 0.0), Matrix(sizes_[l + 1], sizes_[l]),
                              Vector(sizes_[l + 1], 0.0)});
    }
  }

  /// Weights uniform in ±1/√fan_in, biases zero.
  static DenseNet seeded(std::vector<std::size_t> sizes, std::uint64_t seed) {
    DenseNet net(std::move(sizes));
    Rng rng(seed);
    for (auto& layer : net.layers_) {
      fill_uniform(layer.weight.data, 1.0 / std::sqrt(static_cast<double>(layer.weight.cols)), rng);
    }
    return net;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += (sizes_[l] + 1) * sizes_[l + 1];
    return n;
  }

  Vector forward(const Vector& x) const { return run(x, nullptr); }
  Vector forward(const Vector& x, Tape& tape) const { return run(x, &tape); }

  /// Accumulates parameter gradients for dLoss/dOutput and returns dLoss/dInput.
  Vector backward(const Tape& tape, const Vector& grad_output) {
    if (grad_output.size() != output_dim()) throw ShapeError("gradient size does not match network output");
    Vector grad = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      auto& layer = layers_[l];
      const bool hidden = l + 1 < layers_.size();
      if (hidden) {
        for (std::size_t o = 0; o < grad.size(); ++o) {
          const double y = tape.outputs[l][o];
          grad[o] *= 1.0 - y * y;
        }
      }
      const auto& in = tape.inputs[l];
      Vector grad_in(layer.weight.cols, 0.0);
      for (std::size_t o = 0; o < layer.weight.rows; ++o) {
        const double g = grad[o];
        layer.bias_grad[o] += g;
        if (g == 0.0) continue;
        double* wg = layer.weight_grad.row(o);
        const double* w = layer.weight.row(o);
        for (std::size_t i = 0; i < layer.weight.cols; ++i) {
          wg[i] += g * in[i];
          grad_in[i] += g * w[i];
        }
      }
      grad = std::move(grad_in);
    }
    return grad;
  }

  ParameterSet parameters() {
    ParameterSet p;
    for (auto& layer : layers_) {
      p.values.emplace_back(layer.weight.data);
      p.grads.emplace_back(layer.weight_grad.data);
      p.values.emplace_back(layer.bias);
      p.grads.emplace_back(layer.bias_grad);
    }
    return p;
  }

  void zero_grad() { parameters().zero_grad(); }

 private:
  Vector run(const Vector& x, Tape* tape) const {
    if (x.size() != input_dim()) {
      throw ShapeError("DenseNet input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(input_dim()));
    }
    if (tape != nullptr) {
      tape->inputs.clear();
      tape->outputs.clear();
    }
    Vector a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Vector out(layer.weight.rows);
      const bool hidden = l + 1 < layers_.size();
      for (std::size_t o = 0; o < layer.weight.rows; ++o) {
        const double z = layer.bias[o] + dot(layer.weight.row(o), a.data(), a.size());
        out[o] = hidden ? std::tanh(z) : z;
      }
      if (tape != nullptr) {
        tape->inputs.push_back(std::move(a));
        tape->outputs.push_back(out);
      }
      a = std::move(out);
    }
    return a;
  }

  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Losses and optimizers

inline double mse(const Vector& prediction, const Vector& target) {
  if (prediction.size() != target.size() || prediction.empty()) throw ShapeError("MSE operands differ in size");
  double s = 0;
  for (std::size_t i = 0; i < prediction.size(); ++i) s += (prediction[i] - target[i]) * (prediction[i] - target[i]);
  return s / static_cast<double>(prediction.size());
}

inline Vector mse_grad(const Vector& prediction, const Vector& target) {
  Vector g(prediction.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (prediction[i] - target[i]) / static_cast<double>(g.size());
  return g;
}

enum class OptimizerKind { SGD, Adam };

class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::Adam, double learning_rate = 1e-3)
      : kind_(kind), lr_(learning_rate) {}

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return steps_; }

  void step(ParameterSet& params) {
    ++steps_;
    if (kind_ == OptimizerKind::SGD) {
      for (std::size_t b = 0; b < params.values.size(); ++b) {
        auto& v = params.values[b];
        const auto& g = params.grads[b];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
      }
      return;
    }
    if (first_.empty()) {
      for (const auto& v : params.values) {
        first_.emplace_back(v.size(), 0.0);
        second_.emplace_back(v.size(), 0.0);
      }
    }
    if (first_.size() != params.values.size()) throw ShapeError("optimizer moments do not match parameter blocks");
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t b = 0; b < params.values.size(); ++b) {
      auto& v = params.values[b];
      const auto& g = params.grads[b];
      auto& m = first_[b];
      auto& s = second_[b];
      if (m.size() != v.size()) throw ShapeError("optimizer moments do not match parameter shapes");
      for (std::size_t i = 0; i < v.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
        s[i] = kBeta2 * s[i] + (1.0 - kBeta2) * g[i] * g[i];
        v[i] -= lr_ * (m[i] / c1) / (std::sqrt(s[i] / c2) + kEpsilon);
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
};

/// One online MSE step. Returns the loss before the update.
inline double train_step(DenseNet& net, const Vector& x, const Vector& target, Optimizer& opt) {
  DenseNet::Tape tape;
  const auto prediction = net.forward(x, tape);
  const double loss = mse(prediction, target);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite loss in train_step");
  net.zero_grad();
  net.backward(tape, mse_grad(prediction, target));
  auto params = net.parameters();
  opt.step(params);
  return loss;
}

// ---------------------------------------------------------------------------
// LSTM cell

class RecurrentCell {
 public:
  // Gate blocks within the stacked parameters, each `hidden` rows.
  enum Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Candidate = 3 };

  struct Step {
    Vector x, h_prev, c_prev;
    Vector i, f, o, g, c, tanh_c;
  };
  using Tape = std::vector<Step>;

  RecurrentCell() = default;

  /// All weights zero, forget-gate bias 1.
  RecurrentCell(std::size_t input_dim, std::size_t hidden_dim)
      : input_(input_dim),
        hidden_(hidden_dim),
        weight_(4 * hidden_dim, input_dim + hidden_dim),
        bias_(4 * hidden_dim, 0.0),
        weight_grad_(4 * hidden_dim, input_dim + hidden_dim),
        bias_grad_(4 * hidden_dim, 0.0) {
    if (input_dim == 0 || hidden_dim == 0) throw ShapeError("RecurrentCell dimensions must be positive");
    for (std::size_t k = 0; k < hidden_; ++k) bias_[Forget * hidden_ + k] = 1.0;
  }

  static RecurrentCell seeded(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    RecurrentCell cell(input_dim, hidden_dim);
    Rng rng(seed);
    fill_uniform(cell.weight_.data, 1.0 / std::sqrt(static_cast<double>(input_dim + hidden_dim)), rng);
    return cell;
  }

  std::size_t input_dim() const { return input_; }
  std::size_t hidden_dim() const { return hidden_; }
  Matrix& weight() { return weight_; }
  Vector& bias() { return bias_; }
  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }

  /// Copy of one gate's (hidden × (input+hidden)) block.
  Matrix gate_weight(Gate gate) const {
    Matrix m(hidden_, input_ + hidden_);
    std::copy_n(weight_.row(gate * hidden_), hidden_ * (input_ + hidden_), m.data.begin());
    return m;
  }

  std::size_t parameter_count() const { return weight_.data.size() + bias_.size(); }

  /// Final hidden state after consuming `tokens` from zero state.
  Vector encode(std::span<const Vector> tokens) const { return run(tokens, nullptr); }
  Vector encode(std::span<const Vector> tokens, Tape& tape) const { return run(tokens, &tape); }

  /// Backpropagation through time from dLoss/dh_T. Accumulates parameter
  /// gradients and returns dLoss/dx_t for every step.
  std::vector<Vector> backward(const Tape& tape, const Vector& grad_hidden) {
    if (grad_hidden.size() != hidden_) throw ShapeError("hidden gradient size mismatch");
    const std::size_t width = input_ + hidden_;
    std::vector<Vector> grad_inputs(tape.size(), Vector(input_, 0.0));
    Vector dh = grad_hidden;
    Vector dc(hidden_, 0.0);
    Vector dz(4 * hidden_);
    Vector concat(width);
    for (std::size_t t = tape.size(); t-- > 0;) {
      const auto& s = tape[t];
      for (std::size_t k = 0; k < hidden_; ++k) {
        const double do_ = dh[k] * s.tanh_c[k];
        const double dck = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        const double di = dck * s.g[k];
        const double df = dck * s.c_prev[k];
        const double dg = dck * s.i[k];
        dc[k] = dck * s.f[k];
        dz[Input * hidden_ + k] = di * s.i[k] * (1.0 - s.i[k]);
        dz[Forget * hidden_ + k] = df * s.f[k] * (1.0 - s.f[k]);
        dz[Output * hidden_ + k] = do_ * s.o[k] * (1.0 - s.o[k]);
        dz[Candidate * hidden_ + k] = dg * (1.0 - s.g[k] * s.g[k]);
      }
      std::copy(s.x.begin(), s.x.end(), concat.begin());
      std::copy(s.h_prev.begin(), s.h_prev.end(), concat.begin() + static_cast<long>(input_));
      Vector dconcat(width, 0.0);
      for (std::size_t r = 0; r < 4 * hidden_; ++r) {
        const double g = dz[r];
        bias_grad_[r] += g;
        if (g == 0.0) continue;
        double* wg = weight_grad_.row(r);
        const double* w = weight_.row(r);
        for (std::size_t j = 0; j < width; ++j) {
          wg[j] += g * concat[j];
          dconcat[j] += g * w[j];
        }
      }
      std::copy_n(dconcat.begin(), input_, grad_inputs[t].begin());
      std::copy(dconcat.begin() + static_cast<long>(input_), dconcat.end(), dh.begin());
    }
    return grad_inputs;
  }

  ParameterSet parameters() {
    ParameterSet p;
    p.values.emplace_back(weight_.data);
    p.grads.emplace_back(weight_grad_.data);
    p.values.emplace_back(bias_);
    p.grads.emplace_back(bias_grad_);
    return p;
  }

 private:
  Vector run(std::span<const Vector> tokens, Tape* tape) const {
    if (tokens.empty()) throw ShapeError("encode_sequence needs at least one token");
    const std::size_t width = input_ + hidden_;
    Vector h(hidden_, 0.0), c(hidden_, 0.0), concat(width), z(4 * hidden_);
    if (tape != nullptr) {
      tape->clear();
      tape->reserve(tokens.size());
    }
    for (const auto& x : tokens) {
      if (x.size() != input_) throw ShapeError("token dimension does not match cell input");
      std::copy(x.begin(), x.end(), concat.begin());
      std::copy(h.begin(), h.end(), concat.begin() + static_cast<long>(input_));
      for (std::size_t r = 0; r < 4 * hidden_; ++r) z[r] = bias_[r] + dot(weight_.row(r), concat.data(), width);
      Step s;
      if (tape != nullptr) {
        s.x = x;
        s.h_prev = h;
        s.c_prev = c;
        s.i.resize(hidden_);
        s.f.resize(hidden_);
        s.o.resize(hidden_);
        s.g.resize(hidden_);
        s.c.resize(hidden_);
        s.tanh_c.resize(hidden_);
      }
      for (std::size_t k = 0; k < hidden_; ++k) {
        const double i = sigmoid(z[Input * hidden_ + k]);
        const double f = sigmoid(z[Forget * hidden_ + k]);
        const double o = sigmoid(z[Output * hidden_ + k]);
        const double g = std::tanh(z[Candidate * hidden_ + k]);
        c[k] = f * c[k] + i * g;
        const double tc = std::tanh(c[k]);
        h[k] = o * tc;
        if (tape != nullptr) {
          s.i[k] = i;
          s.f[k] = f;
          s.o[k] = o;
          s.g[k] = g;
          s.c[k] = c[k];
          s.tanh_c[k] = tc;
        }
      }
      if (tape != nullptr) tape->push_back(std::move(s));
    }
    return h;
  }

  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  Matrix weight_;  // rows: [input | forget | output | candidate] × hidden
  Vector bias_;
  Matrix weight_grad_;
  Vector bias_grad_;
};

inline Vector encode_sequence(const RecurrentCell& cell, std::span<const Vector> tokens) { return cell.encode(tokens); }

// ---------------------------------------------------------------------------
// Embedding table

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t buckets, std::size_t dim, std::uint64_t seed) : table_(buckets, dim), grad_(buckets, dim) {
    Rng rng(seed);
    fill_uniform(table_.data, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  }

  std::size_t buckets() const { return table_.rows; }
  std::size_t dim() const { return table_.cols; }
  std::size_t parameter_count() const { return table_.data.size(); }

  Vector lookup(std::size_t bucket) const {
    const double* r = table_.row(bucket);
    return Vector(r, r + table_.cols);
  }

  void accumulate(std::size_t bucket, const Vector& grad) {
    double* r = grad_.row(bucket);
    for (std::size_t j = 0; j < grad.size(); ++j) r[j] += grad[j];
  }

  ParameterSet parameters() {
    ParameterSet p;
    p.values.emplace_back(table_.data);
    p.grads.emplace_back(grad_.data);
    return p;
  }

 private:
  Matrix table_;
  Matrix grad_;
};

// ---------------------------------------------------------------------------
// Gradient checking

/// Relative error with a floor on the denominator.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares analytic gradients against central differences for every scalar
/// in `params`. `loss` evaluates the objective at the current parameter
/// values; `analytic` must leave dLoss/dparam in `params.grads`.
inline double grad_check(ParameterSet params, const std::function<double()>& loss, const std::function<void()>& analytic,
                         double epsilon = 1e-5) {
  params.zero_grad();
  analytic();
  double worst = 0;
  for (std::size_t b = 0; b < params.values.size(); ++b) {
    auto& v = params.values[b];
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + epsilon;
      const double up = loss();
      v[i] = saved - epsilon;
      const double down = loss();
      v[i] = saved;
      worst = std::max(worst, relative_error(params.grads[b][i], (up - down) / (2.0 * epsilon)));
    }
  }
  return worst;
}

/// Gradient check of a DenseNet under MSE at (x, target).
inline double grad_check(DenseNet& net, const Vector& x, const Vector& target, double epsilon = 1e-5) {
  return grad_check(
      net.parameters(), [&] { return mse(net.forward(x), target); },
      [&] {
        DenseNet::Tape tape;
        const auto y = net.forward(x, tape);
        net.backward(tape, mse_grad(y, target));
      },
      epsilon);
}

/// Gradient check of an LSTM whose final hidden state is regressed onto `target`.
inline double grad_check(RecurrentCell& cell, const std::vector<Vector>& tokens, const Vector& target, double epsilon = 1e-5) {
  return grad_check(
      cell.parameters(), [&] { return mse(cell.encode(tokens), target); },
      [&] {
        RecurrentCell::Tape tape;
        const auto h = cell.encode(tokens, tape);
        cell.backward(tape, mse_grad(h, target));
      },
      epsilon);
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest + little-endian float64 blob

inline void save_checkpoint(const ParameterSet& params, const std::vector<std::string>& names,
                            const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path) {
  if (names.size() != params.values.size()) throw ShapeError("one name per parameter block required");
  nlohmann::ordered_json manifest;
  manifest["format"] = "qf-checkpoint-v1";
  manifest["dtype"] = "float64-le";
  manifest["blob"] = blob_path.filename().string();
  auto blocks = nlohmann::ordered_json::array();
  std::string blob;
  std::size_t offset = 0;
  for (std::size_t b = 0; b < params.values.size(); ++b) {
    blocks.push_back({{"name", names[b]}, {"offset", offset}, {"count", params.values[b].size()}});
    for (double v : params.values[b]) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int k = 0; k < 8; ++k) blob += static_cast<char>((bits >> (8 * k)) & 0xff);
    }
    offset += params.values[b].size();
  }
  manifest["blocks"] = blocks;
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());
  std::ofstream(manifest_path, std::ios::binary) << manifest.dump(2) << "\n";
  std::ofstream(blob_path, std::ios::binary) << blob;
}

inline void load_checkpoint(ParameterSet& params, const std::filesystem::path& manifest_path,
                            const std::filesystem::path& blob_path) {
  std::ifstream min(manifest_path, std::ios::binary);
  if (!min) throw ConfigError("cannot read checkpoint manifest " + manifest_path.string());
  const auto manifest = nlohmann::json::parse(min);
  std::ifstream bin(blob_path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const auto& blocks = manifest.at("blocks");
  if (blocks.size() != params.values.size()) throw ShapeError("checkpoint block count mismatch");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto offset = blocks[b].at("offset").get<std::size_t>();
    const auto count = blocks[b].at("count").get<std::size_t>();
    if (count != params.values[b].size() || (offset + count) * 8 > blob.size()) throw ShapeError("checkpoint block shape mismatch");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[(offset + i) * 8 + k])) << (8 * k);
      std::memcpy(&params.values[b][i], &bits, sizeof bits);
    }
  }
}

/// FNV-1a over the raw parameter bytes; used to prove evaluation is read-only.
inline std::uint64_t parameter_hash(const ParameterSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : params.values) {
    for (double d : v) {
      unsigned char bytes[8];
      std::memcpy(bytes, &d, 8);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace qf
