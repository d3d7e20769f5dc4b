#include "relapse/models/relapse_net.hpp"

#include <numeric>
#include <sstream>

#include "relapse/errors.hpp"
#include "relapse/nn/adam.hpp"
#include "relapse/rng.hpp"

namespace relapse::models {

void RelapseNetConfig::validate() const {
  if (hidden_dim == 0 || fc1 == 0 || fc2 == 0 || batch_size == 0 || max_epochs == 0) {
    throw UsageError("relapse net config: sizes and epochs must be positive");
  }
  if (!(learning_rate > 0.0)) throw UsageError("relapse net config: learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("relapse net config: dropout must be in [0,1)");
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

TrainedRelapseNet train_relapseprednet(std::span<const Matrix> inputs, std::span<const double> labels,
                                       const RelapseNetConfig& config) {
  config.validate();
  if (inputs.size() != labels.size()) throw ShapeError("train_relapseprednet: inputs/labels length mismatch");
  if (inputs.size() < 2) throw std::invalid_argument("train_relapseprednet: need at least 2 training windows");
  nn::NetworkShape shape{inputs.front().cols, config.hidden_dim, config.fc1, config.fc2, config.dropout};
  TrainedRelapseNet model;
  model.config = config;
  model.params = nn::NetworkParams::initialized(shape, derive_seed(config.seed, {0x1417}));
  nn::AdamState adam(config.learning_rate);

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<Matrix> batch_inputs;
  std::vector<double> batch_labels;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto batches = epoch_batches(inputs.size(), config.batch_size, derive_seed(config.seed, {0xE90C, epoch}));
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t i : batches[b]) {
        batch_inputs.push_back(inputs[i]);
        batch_labels.push_back(labels[i]);
      }
      nn::PassOptions opt{nn::Mode::train, true, derive_seed(config.seed, {0xD209, epoch, b})};
      auto res = nn::network_backward(model.params, batch_inputs, batch_labels, config.loss, opt);
      nn::adam_update(model.params, res.gradients, adam);
      model.params.bn1 = std::move(res.bn1_updated);
      model.params.bn2 = std::move(res.bn2_updated);
      total += res.loss * static_cast<double>(batches[b].size());
    }
    const double epoch_loss = total / static_cast<double>(inputs.size());
    model.epoch_losses.push_back(epoch_loss);
    if (epoch_loss < best - config.min_improvement) {
      best = epoch_loss;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return model;
}

std::vector<double> predict_windows(const TrainedRelapseNet& model, std::span<const Matrix> inputs) {
  if (inputs.empty()) return {};
  nn::PassOptions opt{nn::Mode::eval, false, 0};
  return nn::network_forward(model.params, inputs, opt).probabilities;
}

double predict_window(const TrainedRelapseNet& model, const Matrix& input) {
  return predict_windows(model, std::span<const Matrix>(&input, 1)).front();
}

Matrix export_embeddings(const TrainedRelapseNet& model, std::span<const Matrix> inputs) {
  if (inputs.empty()) return Matrix(0, model.params.shape.fc2);
  nn::PassOptions opt{nn::Mode::eval, false, 0};
  return nn::network_forward(model.params, inputs, opt).embeddings;
}

nn::ParamFile to_param_file(const TrainedRelapseNet& model) {
  nn::ParamFile f;
  const auto& c = model.config;
  f.set_meta("family", "rpnet");
  std::ostringstream cfg;
  cfg << "hidden=" << c.hidden_dim << " fc=" << c.fc1 << "/" << c.fc2 << " dropout=" << nn::format_double(c.dropout)
      << " loss=" << nn::to_string(c.loss) << " lr=" << nn::format_double(c.learning_rate)
      << " batch=" << c.batch_size << " max_epochs=" << c.max_epochs << " patience=" << c.patience
      << " threshold=" << nn::format_double(c.decision_threshold);
  f.set_meta("config", cfg.str());
  f.set_meta("seed", std::to_string(c.seed));
  f.set_meta("normalizer_digest", model.normalizer.min.empty() ? "none" : model.normalizer.digest());
  std::string dims;
  for (std::size_t d : model.dims) dims += (dims.empty() ? "" : ",") + std::to_string(d);
  f.set_meta("dims", dims.empty() ? "all" : dims);
  nn::store_network(f, model.params);
  if (!model.normalizer.min.empty()) {
    f.add_tensor("normalizer.min", Matrix::column(model.normalizer.min));
    f.add_tensor("normalizer.max", Matrix::column(model.normalizer.max));
  }
  return f;
}

TrainedRelapseNet from_param_file(const nn::ParamFile& file) {
  if (file.meta_value("family") != "rpnet") throw DataError("parameter file is not an rpnet model");
  TrainedRelapseNet m;
  m.params = nn::restore_network(file);
  m.config.hidden_dim = m.params.shape.hidden_dim;
  m.config.fc1 = m.params.shape.fc1;
  m.config.fc2 = m.params.shape.fc2;
  m.config.dropout = m.params.shape.dropout_rate;
  m.config.seed = std::stoull(file.meta_value("seed"));
  std::istringstream cfg(file.meta_value("config"));
  std::string tok;
  while (cfg >> tok) {
    if (tok.rfind("threshold=", 0) == 0) m.config.decision_threshold = std::stod(tok.substr(10));
    if (tok.rfind("loss=", 0) == 0) m.config.loss = nn::parse_loss(tok.substr(5));
  }
  const auto& dims = file.meta_value("dims");
  if (dims != "all") {
    std::istringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ',')) m.dims.push_back(std::stoul(d));
  }
  if (file.has_tensor("normalizer.min")) {
    m.normalizer.min = file.tensor("normalizer.min").values;
    m.normalizer.max = file.tensor("normalizer.max").values;
  }
  return m;
}

}  // namespace relapse::models
