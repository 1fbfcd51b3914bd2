#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "planprobe/matrix.hpp"
#include "planprobe/rng.hpp"

namespace planprobe::nn {

/// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<Param*>;

void zero_grads(const ParamList& params);
double grad_norm(const ParamList& params);
/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
double clip_grad_norm(const ParamList& params, double max_norm);
void require_finite(const Matrix& m, const std::string& what);

// ---- elementwise activations ----------------------------------------------

double sigmoid(double x);
void tanh_inplace(Matrix& m);
void sigmoid_inplace(Matrix& m);

/// Softmax over each column; stable against large logits.
Matrix softmax_columns(const Matrix& logits);
/// log-softmax over each column.
Matrix log_softmax_columns(const Matrix& logits);

// ---- layers ----------------------------------------------------------------

/// Affine layer y = W x + b over a batch of columns.
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.value.cols(); }
  std::size_t out_features() const { return weight.value.rows(); }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights scaled by `gain`, zero bias.
  void init_uniform(Rng& rng, double gain = 1.0);
  void init_zero();

  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);
  /// Accumulates parameter gradients only.
  void backward_params(const Matrix& x, const Matrix& dy);

  ParamList params() { return {&weight, &bias}; }

  Param weight;
  Param bias;
};

struct LstmState {
  Matrix h;
  Matrix c;

  static LstmState zeros(std::size_t hidden, std::size_t batch = 1) {
    return {Matrix(hidden, batch), Matrix(hidden, batch)};
  }
  std::size_t width() const { return h.rows(); }
  friend bool operator==(const LstmState&, const LstmState&) = default;
};

/// Values retained from an LSTM forward step for the backward pass.
struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, g, o;  // post-activation gates
  Matrix c, tanh_c;
};

/// Standard LSTM cell with gate order (input, forget, candidate, output):
///   c' = sig(f) * c + sig(i) * tanh(g),  h' = sig(o) * tanh(c').
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t in, std::size_t hidden);

  std::size_t input_size() const { return w_input.value.cols(); }
  std::size_t hidden_size() const { return w_recurrent.value.cols(); }

  void init_uniform(Rng& rng, double forget_bias = 1.0);
  void init_zero();

  LstmState forward(const Matrix& x, const LstmState& state, LstmCache* cache = nullptr) const;
  /// Backpropagates dL/dh' and dL/dc' through one step. Accumulates parameter
  /// gradients, writes dL/dx and dL/d(previous state).
  void backward(const LstmCache& cache, const Matrix& dh, const Matrix& dc, Matrix& dx,
                LstmState& dprev);

  ParamList params() { return {&w_input, &w_recurrent, &bias}; }

  Param w_input;      // 4H x in
  Param w_recurrent;  // 4H x H
  Param bias;         // 4H x 1
};

/// Embedding table stored as (dim x rows): each embedding is a contiguous column.
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t rows, std::size_t dim);

  std::size_t num_rows() const { return table.value.cols(); }
  std::size_t dim() const { return table.value.rows(); }

  /// Random orthogonal rows (in blocks of `dim`) with the given norm.
  void init_orthogonal(Rng& rng, double norm);

  std::span<const double> lookup(std::size_t id) const;
  void accumulate(std::size_t id, std::span<const double> grad);

  ParamList params() { return {&table}; }

  Param table;
};

// ---- losses ----------------------------------------------------------------

inline constexpr double kProbClamp = 1e-7;

/// -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1-1e-7].
double soft_binary_cross_entropy(double p, double y);
/// d/dp of soft_binary_cross_entropy: (p - y) / (p (1 - p)).
double soft_binary_cross_entropy_grad(double p, double y);
/// Minimum of the soft cross entropy over p, i.e. the entropy of y.
double binary_entropy(double y);
double soft_binary_cross_entropy(std::span<const double> p, std::span<const double> y);

double mean_squared_error(std::span<const double> pred, std::span<const double> target);

}  // namespace planprobe::nn
