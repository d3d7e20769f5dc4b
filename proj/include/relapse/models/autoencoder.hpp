#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relapse/nn/matrix.hpp"
#include "relapse/nn/param_io.hpp"

namespace relapse::models {

struct AutoencoderConfig {
  std::size_t input_dim = 144;
  std::vector<std::size_t> encoder_sizes{64, 16};  // last entry is the embedding width
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// Dense layer stack: the encoder mirrors into the decoder. Hidden layers use
// ReLU; the embedding and the reconstruction are linear.
struct Autoencoder {
  std::size_t input_dim = 0;
  std::vector<Matrix> weights;  // encoder layers followed by decoder layers
  std::vector<Matrix> biases;
  std::size_t encoder_layers = 0;
  std::vector<double> epoch_losses;

  std::size_t embedding_dim() const;
  std::vector<double> encode(std::span<const double> x) const;
  std::vector<double> reconstruct(std::span<const double> x) const;
  // Mean squared reconstruction error over all rows and dimensions.
  double reconstruction_mse(std::span<const std::vector<double>> rows) const;
};

Autoencoder make_autoencoder(const AutoencoderConfig& config);
Autoencoder train_autoencoder(std::span<const std::vector<double>> rows, const AutoencoderConfig& config);

void store_autoencoder(nn::ParamFile& file, const Autoencoder& ae);
Autoencoder restore_autoencoder(const nn::ParamFile& file);

}  // namespace relapse::models
