#include "relapse/models/autoencoder.hpp"

#include <numeric>

#include "relapse/errors.hpp"
#include "relapse/models/relapse_net.hpp"
#include "relapse/nn/adam.hpp"
#include "relapse/nn/layers.hpp"
#include "relapse/rng.hpp"

namespace relapse::models {

void AutoencoderConfig::validate() const {
  if (input_dim == 0 || encoder_sizes.empty() || batch_size == 0) {
    throw UsageError("autoencoder config: dimensions must be positive");
  }
  for (std::size_t s : encoder_sizes) {
    if (s == 0) throw UsageError("autoencoder config: layer widths must be positive");
  }
  if (encoder_sizes.back() >= input_dim) throw UsageError("autoencoder config: embedding must be narrower than input");
  if (!(learning_rate > 0.0)) throw UsageError("autoencoder config: learning_rate must be positive");
}

namespace {

bool is_linear_layer(const Autoencoder& ae, std::size_t layer) {
  return layer + 1 == ae.encoder_layers || layer + 1 == ae.weights.size();
}

// Activations of every layer (index 0 = input).
std::vector<std::vector<double>> forward_all(const Autoencoder& ae, std::span<const double> x, std::size_t last) {
  if (x.size() != ae.input_dim) throw ShapeError("autoencoder: input width mismatch");
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < last; ++l) {
    const Matrix& w = ae.weights[l];
    std::vector<double> y(w.rows);
    affine(w, acts.back(), ae.biases[l].values, y);
    if (!is_linear_layer(ae, l)) {
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

}  // namespace

std::size_t Autoencoder::embedding_dim() const { return weights[encoder_layers - 1].rows; }

std::vector<double> Autoencoder::encode(std::span<const double> x) const {
  return forward_all(*this, x, encoder_layers).back();
}

std::vector<double> Autoencoder::reconstruct(std::span<const double> x) const {
  return forward_all(*this, x, weights.size()).back();
}

double Autoencoder::reconstruction_mse(std::span<const std::vector<double>> rows) const {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rows) {
    const auto y = reconstruct(r);
    for (std::size_t i = 0; i < y.size(); ++i) total += (y[i] - r[i]) * (y[i] - r[i]);
  }
  return total / static_cast<double>(rows.size() * input_dim);
}

Autoencoder make_autoencoder(const AutoencoderConfig& config) {
  config.validate();
  Autoencoder ae;
  ae.input_dim = config.input_dim;
  std::vector<std::size_t> widths{config.input_dim};
  widths.insert(widths.end(), config.encoder_sizes.begin(), config.encoder_sizes.end());
  for (std::size_t i = config.encoder_sizes.size(); i-- > 0;) {
    widths.push_back(i == 0 ? config.input_dim : config.encoder_sizes[i - 1]);
  }
  ae.encoder_layers = config.encoder_sizes.size();
  Rng rng(derive_seed(config.seed, {0xAE}));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Matrix w(widths[l + 1], widths[l]);
    nn::glorot_uniform(w, widths[l], widths[l + 1], rng);
    ae.weights.push_back(std::move(w));
    ae.biases.emplace_back(widths[l + 1], 1);
  }
  return ae;
}

Autoencoder train_autoencoder(std::span<const std::vector<double>> rows, const AutoencoderConfig& config) {
  Autoencoder ae = make_autoencoder(config);
  if (rows.empty()) throw std::invalid_argument("train_autoencoder: no training rows");
  const std::size_t L = ae.weights.size();
  nn::AdamState adam(config.learning_rate);
  std::vector<Matrix*> params;
  for (std::size_t l = 0; l < L; ++l) params.push_back(&ae.weights[l]);
  for (std::size_t l = 0; l < L; ++l) params.push_back(&ae.biases[l]);
  std::vector<Matrix> grads;
  for (Matrix* p : params) grads.emplace_back(p->rows, p->cols);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    if (rows.size() == 1) {
      batches.push_back({0});
    } else {
      batches = epoch_batches(rows.size(), config.batch_size, derive_seed(config.seed, {0xAE0C, epoch}));
    }
    double total = 0.0;
    for (const auto& batch : batches) {
      for (auto& g : grads) g.fill(0.0);
      const double scale = 2.0 / static_cast<double>(batch.size() * ae.input_dim);
      for (std::size_t idx : batch) {
        const auto acts = forward_all(ae, rows[idx], L);
        std::vector<double> delta(ae.input_dim);
        for (std::size_t i = 0; i < ae.input_dim; ++i) {
          const double e = acts[L][i] - rows[idx][i];
          total += e * e;
          delta[i] = scale * e;
        }
        for (std::size_t l = L; l-- > 0;) {
          const Matrix& w = ae.weights[l];
          Matrix& gw = grads[l];
          Matrix& gb = grads[L + l];
          const auto& in = acts[l];
          for (std::size_t r = 0; r < w.rows; ++r) {
            if (delta[r] == 0.0) continue;
            gb.values[r] += delta[r];
            double* row = &gw.values[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) row[c] += delta[r] * in[c];
          }
          if (l == 0) break;
          std::vector<double> prev(w.cols, 0.0);
          for (std::size_t r = 0; r < w.rows; ++r) {
            if (delta[r] == 0.0) continue;
            const double* row = &w.values[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) prev[c] += delta[r] * row[c];
          }
          if (!is_linear_layer(ae, l - 1)) {
            for (std::size_t c = 0; c < prev.size(); ++c) {
              if (in[c] <= 0.0) prev[c] = 0.0;
            }
          }
          delta = std::move(prev);
        }
      }
      for (const auto& g : grads) require_finite(g.values, "autoencoder gradient");
      nn::adam_update(params, grads, adam);
    }
    ae.epoch_losses.push_back(total / static_cast<double>(rows.size() * ae.input_dim));
  }
  return ae;
}

void store_autoencoder(nn::ParamFile& file, const Autoencoder& ae) {
  file.set_meta("ae_input_dim", std::to_string(ae.input_dim));
  file.set_meta("ae_encoder_layers", std::to_string(ae.encoder_layers));
  file.set_meta("ae_layers", std::to_string(ae.weights.size()));
  for (std::size_t l = 0; l < ae.weights.size(); ++l) {
    file.add_tensor("ae.w" + std::to_string(l), ae.weights[l]);
    file.add_tensor("ae.b" + std::to_string(l), ae.biases[l]);
  }
}

Autoencoder restore_autoencoder(const nn::ParamFile& file) {
  Autoencoder ae;
  ae.input_dim = std::stoul(file.meta_value("ae_input_dim"));
  ae.encoder_layers = std::stoul(file.meta_value("ae_encoder_layers"));
  const std::size_t layers = std::stoul(file.meta_value("ae_layers"));
  for (std::size_t l = 0; l < layers; ++l) {
    ae.weights.push_back(file.tensor("ae.w" + std::to_string(l)));
    ae.biases.push_back(file.tensor("ae.b" + std::to_string(l)));
  }
  return ae;
}

}  // namespace relapse::models
