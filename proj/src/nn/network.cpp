#include "relapse/nn/network.hpp"

#include <cmath>
#include <string>

#include "relapse/errors.hpp"

namespace relapse::nn {

void NetworkShape::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || fc1 == 0 || fc2 == 0) throw ShapeError("network dims must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
}

NetworkParams::NetworkParams(const NetworkShape& s)
    : shape(s),
      fwd(s.input_dim, s.hidden_dim),
      bwd(s.input_dim, s.hidden_dim),
      bn1(2 * s.hidden_dim),
      bn2(s.fc1),
      fc1_w(s.fc1, 2 * s.hidden_dim),
      fc1_b(s.fc1, 1),
      fc2_w(s.fc2, s.fc1),
      fc2_b(s.fc2, 1),
      head_w(1, s.fc2),
      head_b(1, 1) {
  s.validate();
}

NetworkParams NetworkParams::initialized(const NetworkShape& s, std::uint64_t seed) {
  NetworkParams p(s);
  Rng rng(seed);
  p.fwd.init(rng);
  p.bwd.init(rng);
  glorot_uniform(p.fc1_w, p.fc1_w.cols, p.fc1_w.rows, rng);
  glorot_uniform(p.fc2_w, p.fc2_w.cols, p.fc2_w.rows, rng);
  glorot_uniform(p.head_w, p.head_w.cols, p.head_w.rows, rng);
  return p;
}

std::vector<NamedTensor> NetworkParams::trainable() {
  return {{"lstm_fwd.w_x", &fwd.w_x}, {"lstm_fwd.w_h", &fwd.w_h}, {"lstm_fwd.b", &fwd.b},
          {"lstm_bwd.w_x", &bwd.w_x}, {"lstm_bwd.w_h", &bwd.w_h}, {"lstm_bwd.b", &bwd.b},
          {"bn1.gamma", &bn1.gamma},  {"bn1.beta", &bn1.beta},    {"fc1.w", &fc1_w},
          {"fc1.b", &fc1_b},          {"bn2.gamma", &bn2.gamma},  {"bn2.beta", &bn2.beta},
          {"fc2.w", &fc2_w},          {"fc2.b", &fc2_b},          {"head.w", &head_w},
          {"head.b", &head_b}};
}

std::vector<NamedConstTensor> NetworkParams::trainable() const {
  std::vector<NamedConstTensor> out;
  for (auto& t : const_cast<NetworkParams*>(this)->trainable()) out.push_back({t.name, t.tensor});
  return out;
}

std::vector<NamedTensor> NetworkParams::all_tensors() {
  auto out = trainable();
  out.push_back({"bn1.running_mean", &bn1.running_mean});
  out.push_back({"bn1.running_var", &bn1.running_var});
  out.push_back({"bn2.running_mean", &bn2.running_mean});
  out.push_back({"bn2.running_var", &bn2.running_var});
  return out;
}

std::vector<NamedConstTensor> NetworkParams::all_tensors() const {
  std::vector<NamedConstTensor> out;
  for (auto& t : const_cast<NetworkParams*>(this)->all_tensors()) out.push_back({t.name, t.tensor});
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : trainable()) n += t.tensor->size();
  return n;
}

GradientBundle GradientBundle::zeros_like(const NetworkParams& params) {
  GradientBundle g;
  for (const auto& t : params.trainable()) {
    g.names.push_back(t.name);
    g.grads.emplace_back(t.tensor->rows, t.tensor->cols, 0.0);
  }
  return g;
}

double GradientBundle::squared_norm() const {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.values) s += v * v;
  return s;
}

namespace {

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

// Activations of one LSTM direction over one sequence, stored per processing step.
struct DirectionCache {
  std::size_t steps = 0;
  std::vector<double> gates;   // steps x 4H, post-activation (i, f, g, o)
  std::vector<double> cell;    // steps x H
  std::vector<double> hidden;  // steps x H
  std::vector<double> tanh_c;  // steps x H
};

inline std::size_t row_at(std::size_t step, std::size_t steps, bool reverse) {
  return reverse ? steps - 1 - step : step;
}

void run_direction(const Matrix& x, const LstmCellParams& p, bool reverse, DirectionCache& cache) {
  const std::size_t T = x.rows;
  const std::size_t H = p.hidden_dim;
  const std::size_t D = p.input_dim;
  const std::size_t G = 4 * H;
  cache.steps = T;
  cache.gates.assign(T * G, 0.0);
  cache.cell.assign(T * H, 0.0);
  cache.hidden.assign(T * H, 0.0);
  cache.tanh_c.assign(T * H, 0.0);
  std::vector<double> z(G);
  for (std::size_t s = 0; s < T; ++s) {
    const double* xt = x.values.data() + row_at(s, T, reverse) * D;
    const double* h_prev = s > 0 ? cache.hidden.data() + (s - 1) * H : nullptr;
    const double* c_prev = s > 0 ? cache.cell.data() + (s - 1) * H : nullptr;
    for (std::size_t r = 0; r < G; ++r) {
      double acc = p.b.values[r] + dot(p.w_x.values.data() + r * D, xt, D);
      if (h_prev) acc += dot(p.w_h.values.data() + r * H, h_prev, H);
      z[r] = acc;
    }
    double* gates = cache.gates.data() + s * G;
    double* c = cache.cell.data() + s * H;
    double* h = cache.hidden.data() + s * H;
    double* tc = cache.tanh_c.data() + s * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[H + j]);
      const double g = std::tanh(z[2 * H + j]);
      const double o = sigmoid(z[3 * H + j]);
      gates[j] = i;
      gates[H + j] = f;
      gates[2 * H + j] = g;
      gates[3 * H + j] = o;
      c[j] = f * (c_prev ? c_prev[j] : 0.0) + i * g;
      tc[j] = std::tanh(c[j]);
      h[j] = o * tc[j];
    }
  }
}

void backprop_direction(const Matrix& x, const LstmCellParams& p, bool reverse, const DirectionCache& cache,
                        const double* dh_final, Matrix& dwx, Matrix& dwh, Matrix& db) {
  const std::size_t T = cache.steps;
  const std::size_t H = p.hidden_dim;
  const std::size_t D = p.input_dim;
  const std::size_t G = 4 * H;
  std::vector<double> dh(dh_final, dh_final + H);
  std::vector<double> dc(H, 0.0);
  std::vector<double> dz(G);
  std::vector<double> dh_prev(H);
  for (std::size_t s = T; s-- > 0;) {
    const double* gates = cache.gates.data() + s * G;
    const double* tc = cache.tanh_c.data() + s * H;
    const double* c_prev = s > 0 ? cache.cell.data() + (s - 1) * H : nullptr;
    const double* h_prev = s > 0 ? cache.hidden.data() + (s - 1) * H : nullptr;
    for (std::size_t j = 0; j < H; ++j) {
      const double i = gates[j], f = gates[H + j], g = gates[2 * H + j], o = gates[3 * H + j];
      const double d_o = dh[j] * tc[j];
      dc[j] += dh[j] * o * (1.0 - tc[j] * tc[j]);
      const double d_i = dc[j] * g;
      const double d_g = dc[j] * i;
      const double d_f = dc[j] * (c_prev ? c_prev[j] : 0.0);
      dz[j] = d_i * i * (1.0 - i);
      dz[H + j] = d_f * f * (1.0 - f);
      dz[2 * H + j] = d_g * (1.0 - g * g);
      dz[3 * H + j] = d_o * o * (1.0 - o);
      dc[j] *= f;
    }
    const double* xt = x.values.data() + row_at(s, T, reverse) * D;
    for (std::size_t r = 0; r < G; ++r) {
      db.values[r] += dz[r];
      axpy(dz[r], xt, dwx.values.data() + r * D, D);
      if (h_prev) axpy(dz[r], h_prev, dwh.values.data() + r * H, H);
    }
    if (s == 0) break;
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < G; ++r) axpy(dz[r], p.w_h.values.data() + r * H, dh_prev.data(), H);
    dh.swap(dh_prev);
  }
}

struct DenseCache {
  Matrix pre;  // B x out, before activation
  Matrix out;  // B x out
};

DenseCache dense_batch(const Matrix& in, const Matrix& w, const Matrix& b, Activation act) {
  DenseCache c{Matrix(in.rows, w.rows), Matrix(in.rows, w.rows)};
  for (std::size_t i = 0; i < in.rows; ++i) {
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double z = b.values[r] + dot(w.values.data() + r * w.cols, in.values.data() + i * in.cols, w.cols);
      c.pre(i, r) = z;
      c.out(i, r) = act == Activation::relu ? (z > 0.0 ? z : 0.0) : act == Activation::sigmoid ? sigmoid(z) : z;
    }
  }
  return c;
}

// Given dL/d(out) of a dense layer, accumulates weight/bias grads and returns dL/d(in).
Matrix dense_backward(const Matrix& in, const Matrix& w, const DenseCache& cache, Matrix d_out, Activation act,
                      Matrix& dw, Matrix& db) {
  const std::size_t B = in.rows;
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t r = 0; r < w.rows; ++r) {
      double& d = d_out(i, r);
      if (act == Activation::relu) {
        if (!(cache.pre(i, r) > 0.0)) d = 0.0;
      } else if (act == Activation::sigmoid) {
        const double s = cache.out(i, r);
        d *= s * (1.0 - s);
      }
    }
  }
  Matrix d_in(B, w.cols, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double d = d_out(i, r);
      if (d == 0.0) continue;
      db.values[r] += d;
      axpy(d, in.values.data() + i * in.cols, dw.values.data() + r * w.cols, w.cols);
      axpy(d, w.values.data() + r * w.cols, d_in.values.data() + i * w.cols, w.cols);
    }
  }
  return d_in;
}

struct BnCache {
  Matrix out;
  Matrix xhat;
  BatchNormStats stats;
  BatchNormParams updated;
};

BnCache bn_batch(const Matrix& in, const BatchNormParams& p, Mode mode) {
  auto fwd = batchnorm_forward(in, p, mode);
  BnCache c{std::move(fwd.out), Matrix(in.rows, in.cols), batchnorm_stats(in, p, mode), std::move(fwd.params)};
  for (std::size_t i = 0; i < in.rows; ++i)
    for (std::size_t j = 0; j < in.cols; ++j) c.xhat(i, j) = (in(i, j) - c.stats.mean[j]) * c.stats.inv_std[j];
  return c;
}

Matrix bn_backward(const BnCache& c, const BatchNormParams& p, const Matrix& d_out, Mode mode, Matrix& dgamma,
                   Matrix& dbeta) {
  const std::size_t B = d_out.rows;
  const std::size_t F = d_out.cols;
  Matrix d_in(B, F, 0.0);
  const double n = static_cast<double>(B);
  for (std::size_t j = 0; j < F; ++j) {
    double sum_d = 0.0, sum_dx = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      sum_d += d_out(i, j);
      sum_dx += d_out(i, j) * c.xhat(i, j);
    }
    dgamma.values[j] += sum_dx;
    dbeta.values[j] += sum_d;
    const double g = p.gamma.values[j];
    const double inv = c.stats.inv_std[j];
    for (std::size_t i = 0; i < B; ++i) {
      if (mode == Mode::eval) {
        d_in(i, j) = d_out(i, j) * g * inv;
      } else {
        // dxhat = dy * gamma; dx = inv/n * (n dxhat - sum dxhat - xhat sum(dxhat xhat))
        d_in(i, j) = g * inv / n * (n * d_out(i, j) - sum_d - c.xhat(i, j) * sum_dx);
      }
    }
  }
  return d_in;
}

struct FullPass {
  std::vector<DirectionCache> fwd_cache, bwd_cache;
  Matrix summary;   // B x 2H
  Matrix mask;      // B x 2H
  Matrix dropped;   // B x 2H
  BnCache bn1;
  DenseCache fc1;
  BnCache bn2;
  DenseCache fc2;
  DenseCache head;
};

FullPass run_forward(const NetworkParams& params, std::span<const Matrix> inputs, const PassOptions& opt) {
  params.shape.validate();
  params.fwd.validate();
  params.bwd.validate();
  const std::size_t B = inputs.size();
  if (B == 0) throw ShapeError("network: empty batch");
  const std::size_t H = params.shape.hidden_dim;
  FullPass fp;
  fp.fwd_cache.resize(B);
  fp.bwd_cache.resize(B);
  fp.summary = Matrix(B, 2 * H);
  for (std::size_t b = 0; b < B; ++b) {
    const Matrix& x = inputs[b];
    if (x.rows == 0) throw ShapeError("network: empty input sequence");
    if (x.cols != params.shape.input_dim) {
      throw ShapeError("network: input has " + std::to_string(x.cols) + " features, expected " +
                       std::to_string(params.shape.input_dim));
    }
    run_direction(x, params.fwd, false, fp.fwd_cache[b]);
    run_direction(x, params.bwd, true, fp.bwd_cache[b]);
    const std::size_t T = x.rows;
    std::copy_n(fp.fwd_cache[b].hidden.data() + (T - 1) * H, H, fp.summary.values.data() + b * 2 * H);
    std::copy_n(fp.bwd_cache[b].hidden.data() + (T - 1) * H, H, fp.summary.values.data() + b * 2 * H + H);
  }
  require_finite(fp.summary.values, "bilstm");

  fp.mask = Matrix(B, 2 * H, 1.0);
  if (opt.mode == Mode::train && opt.use_dropout && params.shape.dropout_rate > 0.0) {
    for (std::size_t b = 0; b < B; ++b) {
      const auto m = dropout_mask(2 * H, params.shape.dropout_rate, derive_seed(opt.dropout_seed, {b}));
      std::copy(m.begin(), m.end(), fp.mask.values.begin() + b * 2 * H);
    }
  }
  fp.dropped = fp.summary;
  for (std::size_t k = 0; k < fp.dropped.size(); ++k) fp.dropped.values[k] *= fp.mask.values[k];

  fp.bn1 = bn_batch(fp.dropped, params.bn1, opt.mode);
  require_finite(fp.bn1.out.values, "bn1");
  fp.fc1 = dense_batch(fp.bn1.out, params.fc1_w, params.fc1_b, Activation::relu);
  require_finite(fp.fc1.out.values, "fc1");
  fp.bn2 = bn_batch(fp.fc1.out, params.bn2, opt.mode);
  require_finite(fp.bn2.out.values, "bn2");
  fp.fc2 = dense_batch(fp.bn2.out, params.fc2_w, params.fc2_b, Activation::relu);
  require_finite(fp.fc2.out.values, "fc2");
  fp.head = dense_batch(fp.fc2.out, params.head_w, params.head_b, Activation::sigmoid);
  require_finite(fp.head.out.values, "head");
  return fp;
}

}  // namespace

ForwardResult network_forward(const NetworkParams& params, std::span<const Matrix> inputs, const PassOptions& opt) {
  FullPass fp = run_forward(params, inputs, opt);
  return {std::move(fp.head.out.values), std::move(fp.fc2.out), std::move(fp.bn1.updated),
          std::move(fp.bn2.updated)};
}

BackwardResult network_backward(const NetworkParams& params, std::span<const Matrix> inputs,
                                std::span<const double> labels, LossKind loss, const PassOptions& opt) {
  if (labels.size() != inputs.size()) throw ShapeError("network_backward: labels/batch size mismatch");
  FullPass fp = run_forward(params, inputs, opt);
  const std::size_t B = inputs.size();
  const std::size_t H = params.shape.hidden_dim;

  BackwardResult res;
  res.probabilities = fp.head.out.values;
  auto lr = compute_loss(loss, res.probabilities, labels);
  res.loss = lr.loss;
  if (!std::isfinite(res.loss)) throw NumericError("non-finite value in loss");
  res.gradients = GradientBundle::zeros_like(params);
  auto& g = res.gradients.grads;
  // Index order follows NetworkParams::trainable().
  enum : std::size_t { FWX, FWH, FB, BWX, BWH, BB, BN1G, BN1B, FC1W, FC1B, BN2G, BN2B, FC2W, FC2B, HW, HB };

  Matrix d_p(B, 1);
  d_p.values = lr.dloss_dp;
  Matrix d_fc2 = dense_backward(fp.fc2.out, params.head_w, fp.head, std::move(d_p), Activation::sigmoid, g[HW], g[HB]);
  Matrix d_bn2 = dense_backward(fp.bn2.out, params.fc2_w, fp.fc2, std::move(d_fc2), Activation::relu, g[FC2W], g[FC2B]);
  Matrix d_fc1 = bn_backward(fp.bn2, params.bn2, d_bn2, opt.mode, g[BN2G], g[BN2B]);
  Matrix d_bn1 = dense_backward(fp.bn1.out, params.fc1_w, fp.fc1, std::move(d_fc1), Activation::relu, g[FC1W], g[FC1B]);
  Matrix d_drop = bn_backward(fp.bn1, params.bn1, d_bn1, opt.mode, g[BN1G], g[BN1B]);
  require_finite(d_drop.values, "bn1 backward");
  for (std::size_t k = 0; k < d_drop.size(); ++k) d_drop.values[k] *= fp.mask.values[k];

  for (std::size_t b = 0; b < B; ++b) {
    const double* ds = d_drop.values.data() + b * 2 * H;
    backprop_direction(inputs[b], params.fwd, false, fp.fwd_cache[b], ds, g[FWX], g[FWH], g[FB]);
    backprop_direction(inputs[b], params.bwd, true, fp.bwd_cache[b], ds + H, g[BWX], g[BWH], g[BB]);
  }
  for (std::size_t k = 0; k < g.size(); ++k) require_finite(g[k].values, res.gradients.names[k] + " gradient");
  res.bn1_updated = std::move(fp.bn1.updated);
  res.bn2_updated = std::move(fp.bn2.updated);
  return res;
}

}  // namespace relapse::nn
