#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relapse/data/days.hpp"
#include "relapse/nn/losses.hpp"
#include "relapse/nn/network.hpp"
#include "relapse/nn/param_io.hpp"

namespace relapse::models {

struct RelapseNetConfig {
  std::size_t hidden_dim = 128;
  std::size_t fc1 = 128;
  std::size_t fc2 = 64;
  double dropout = 0.2;
  nn::LossKind loss = nn::LossKind::bce;
  double learning_rate = 1e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double min_improvement = 1e-5;
  double decision_threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainedRelapseNet {
  nn::NetworkParams params;
  RelapseNetConfig config;
  data::Normalizer normalizer;     // attached by the caller that prepared the inputs
  std::vector<std::size_t> dims;   // 144-vector columns fed to the network (empty = all)
  std::vector<double> epoch_losses;

  bool predict_label(double probability) const { return probability > config.decision_threshold; }
};

// Mini-batch ADAM training, reshuffled every epoch from the config seed. Stops
// early once the epoch training loss has failed to improve by min_improvement
// for `patience` consecutive epochs. A trailing batch of one window is merged
// into the previous batch so batch-norm statistics stay defined.
TrainedRelapseNet train_relapseprednet(std::span<const Matrix> inputs, std::span<const double> labels,
                                       const RelapseNetConfig& config);

// Eval-mode probability for one (already normalized) window.
double predict_window(const TrainedRelapseNet& model, const Matrix& input);
std::vector<double> predict_windows(const TrainedRelapseNet& model, std::span<const Matrix> inputs);

// Last-hidden-layer activations (fc2 width) in eval mode, one row per input.
Matrix export_embeddings(const TrainedRelapseNet& model, std::span<const Matrix> inputs);

// Batches for one epoch: index lists into [0, n).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

nn::ParamFile to_param_file(const TrainedRelapseNet& model);
TrainedRelapseNet from_param_file(const nn::ParamFile& file);

}  // namespace relapse::models
