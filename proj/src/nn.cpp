#include "planprobe/nn.hpp"

#include <algorithm>
#include <cmath>

namespace planprobe::nn {

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

double grad_norm(const ParamList& params) {
  double s = 0.0;
  for (const Param* p : params)
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Param* p : params)
      for (double& g : p->grad.values()) g *= scale;
  }
  return norm;
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.all_finite()) throw NumericError("non-finite values in " + what);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void tanh_inplace(Matrix& m) {
  for (double& v : m.values()) v = std::tanh(v);
}

void sigmoid_inplace(Matrix& m) {
  for (double& v : m.values()) v = sigmoid(v);
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t b = 0; b < logits.cols(); ++b) {
    const auto z = logits.col(b);
    auto o = out.col(b);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (o[i] = std::exp(z[i] - m));
    for (double& v : o) v /= s;
  }
  return out;
}

Matrix log_softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t b = 0; b < logits.cols(); ++b) {
    const auto z = logits.col(b);
    auto o = out.col(b);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t i = 0; i < z.size(); ++i) o[i] = z[i] - lse;
  }
  return out;
}

// ---- Dense -------------------------------------------------------------------

Dense::Dense(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Dense::init_uniform(Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in_features()));
  for (double& w : weight.value.values()) w = (2.0 * rng.uniform() - 1.0) * bound;
  bias.value.fill(0.0);
}

void Dense::init_zero() {
  weight.value.fill(0.0);
  bias.value.fill(0.0);
}

Matrix Dense::forward(const Matrix& x) const {
  if (x.rows() != in_features())
    throw ShapeError("dense " + weight.name + ": input " + x.shape_string() + " vs weight " +
                     weight.value.shape_string());
  Matrix y(out_features(), x.cols());
  for (std::size_t b = 0; b < x.cols(); ++b) std::ranges::copy(bias.value.col(0), y.col(b).begin());
  matmul_acc(y, weight.value, x);
  return y;
}

void Dense::backward_params(const Matrix& x, const Matrix& dy) {
  if (dy.rows() != out_features() || dy.cols() != x.cols())
    throw ShapeError("dense " + weight.name + ": grad " + dy.shape_string() + " vs input " +
                     x.shape_string());
  matmul_nt_acc(weight.grad, dy, x);
  auto db = bias.grad.col(0);
  for (std::size_t b = 0; b < dy.cols(); ++b) axpy(db, dy.col(b), 1.0);
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy) {
  backward_params(x, dy);
  Matrix dx(in_features(), x.cols());
  matmul_tn_acc(dx, weight.value, dy);
  return dx;
}

// ---- LSTM --------------------------------------------------------------------

LstmCell::LstmCell(const std::string& name, std::size_t in, std::size_t hidden)
    : w_input(name + ".w_input", 4 * hidden, in),
      w_recurrent(name + ".w_recurrent", 4 * hidden, hidden),
      bias(name + ".bias", 4 * hidden, 1) {}

void LstmCell::init_uniform(Rng& rng, double forget_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size()));
  for (double& w : w_input.value.values()) w = (2.0 * rng.uniform() - 1.0) * bound;
  for (double& w : w_recurrent.value.values()) w = (2.0 * rng.uniform() - 1.0) * bound;
  bias.value.fill(0.0);
  const std::size_t h = hidden_size();
  for (std::size_t k = h; k < 2 * h; ++k) bias.value[k] = forget_bias;
}

void LstmCell::init_zero() {
  w_input.value.fill(0.0);
  w_recurrent.value.fill(0.0);
  bias.value.fill(0.0);
}

LstmState LstmCell::forward(const Matrix& x, const LstmState& state, LstmCache* cache) const {
  const std::size_t hs = hidden_size();
  const std::size_t batch = x.cols();
  if (x.rows() != input_size())
    throw ShapeError("lstm " + w_input.name + ": input " + x.shape_string() + " vs expected [" +
                     std::to_string(input_size()) + "xB]");
  if (state.h.rows() != hs || state.c.rows() != hs || state.h.cols() != batch ||
      state.c.cols() != batch)
    throw ShapeError("lstm " + w_input.name + ": state " + state.h.shape_string() + "/" +
                     state.c.shape_string() + " vs input " + x.shape_string());

  Matrix z(4 * hs, batch);
  for (std::size_t b = 0; b < batch; ++b) std::ranges::copy(bias.value.col(0), z.col(b).begin());
  matmul_acc(z, w_input.value, x);
  matmul_acc(z, w_recurrent.value, state.h);

  LstmState next{Matrix(hs, batch), Matrix(hs, batch)};
  Matrix gi(hs, batch), gf(hs, batch), gg(hs, batch), go(hs, batch), tc(hs, batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < hs; ++k) {
      const double i = sigmoid(z(k, b));
      const double f = sigmoid(z(hs + k, b));
      const double g = std::tanh(z(2 * hs + k, b));
      const double o = sigmoid(z(3 * hs + k, b));
      const double c = f * state.c(k, b) + i * g;
      const double t = std::tanh(c);
      next.c(k, b) = c;
      next.h(k, b) = o * t;
      gi(k, b) = i;
      gf(k, b) = f;
      gg(k, b) = g;
      go(k, b) = o;
      tc(k, b) = t;
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->c = next.c;
    cache->tanh_c = std::move(tc);
  }
  return next;
}

void LstmCell::backward(const LstmCache& cache, const Matrix& dh, const Matrix& dc, Matrix& dx,
                        LstmState& dprev) {
  const std::size_t hs = hidden_size();
  const std::size_t batch = cache.x.cols();
  require_same_shape(dh, cache.c, "lstm backward dh");
  require_same_shape(dc, cache.c, "lstm backward dc");

  Matrix dz(4 * hs, batch);
  dprev.c = Matrix(hs, batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < hs; ++k) {
      const double i = cache.i(k, b), f = cache.f(k, b), g = cache.g(k, b), o = cache.o(k, b);
      const double t = cache.tanh_c(k, b);
      const double dho = dh(k, b);
      const double dct = dc(k, b) + dho * o * (1.0 - t * t);
      dz(k, b) = dct * g * i * (1.0 - i);
      dz(hs + k, b) = dct * cache.c_prev(k, b) * f * (1.0 - f);
      dz(2 * hs + k, b) = dct * i * (1.0 - g * g);
      dz(3 * hs + k, b) = dho * t * o * (1.0 - o);
      dprev.c(k, b) = dct * f;
    }
  }
  matmul_nt_acc(w_input.grad, dz, cache.x);
  matmul_nt_acc(w_recurrent.grad, dz, cache.h_prev);
  auto db = bias.grad.col(0);
  for (std::size_t b = 0; b < batch; ++b) axpy(db, dz.col(b), 1.0);

  dx = Matrix(input_size(), batch);
  matmul_tn_acc(dx, w_input.value, dz);
  dprev.h = Matrix(hs, batch);
  matmul_tn_acc(dprev.h, w_recurrent.value, dz);
}

// ---- Embedding ---------------------------------------------------------------

Embedding::Embedding(const std::string& name, std::size_t rows, std::size_t dim)
    : table(name + ".table", dim, rows) {}

void Embedding::init_orthogonal(Rng& rng, double norm) {
  const std::size_t d = dim();
  for (double& v : table.value.values()) v = rng.normal();
  // Modified Gram-Schmidt within each block of `d` consecutive rows.
  for (std::size_t start = 0; start < num_rows(); start += d) {
    const std::size_t end = std::min(num_rows(), start + d);
    for (std::size_t r = start; r < end; ++r) {
      auto v = table.value.col(r);
      for (std::size_t q = start; q < r; ++q) {
        const auto u = table.value.col(q);
        axpy(v, u, -dot(u, v));
      }
      const double n = std::sqrt(dot(v, v));
      for (double& x : v) x /= n;
    }
  }
  for (double& v : table.value.values()) v *= norm;
}

std::span<const double> Embedding::lookup(std::size_t id) const {
  if (id >= num_rows())
    throw ShapeError("embedding " + table.name + ": id " + std::to_string(id) +
                     " out of range for " + std::to_string(num_rows()) + " rows");
  return table.value.col(id);
}

void Embedding::accumulate(std::size_t id, std::span<const double> grad) {
  if (id >= num_rows() || grad.size() != dim())
    throw ShapeError("embedding " + table.name + ": bad gradient accumulation");
  axpy(table.grad.col(id), grad, 1.0);
}

// ---- losses ------------------------------------------------------------------

namespace {
double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_target(double y) {
  if (!(y >= 0.0 && y <= 1.0))
    throw DomainError("cross-entropy target must lie in [0,1], got " + std::to_string(y));
}
}  // namespace

double soft_binary_cross_entropy(double p, double y) {
  check_target(y);
  if (!std::isfinite(p)) throw NumericError("cross-entropy prediction is not finite");
  const double q = clamp_prob(p);
  return -(y * std::log(q) + (1.0 - y) * std::log1p(-q));
}

double soft_binary_cross_entropy_grad(double p, double y) {
  check_target(y);
  const double q = clamp_prob(p);
  return (q - y) / (q * (1.0 - q));
}

double binary_entropy(double y) {
  check_target(y);
  double h = 0.0;
  if (y > 0.0) h -= y * std::log(clamp_prob(y));
  if (y < 1.0) h -= (1.0 - y) * std::log1p(-clamp_prob(y));
  return h;
}

double soft_binary_cross_entropy(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size())
    throw ShapeError("cross-entropy: " + std::to_string(p.size()) + " predictions vs " +
                     std::to_string(y.size()) + " targets");
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += soft_binary_cross_entropy(p[i], y[i]);
  return s / static_cast<double>(p.size());
}

double mean_squared_error(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw ShapeError("mse: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace planprobe::nn
