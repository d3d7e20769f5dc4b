#include "relapse/nn/adam.hpp"

#include <cmath>

#include "relapse/errors.hpp"

namespace relapse::nn {

void AdamState::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("ADAM decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0.0) || !(alpha > 0.0)) throw std::invalid_argument("ADAM alpha and epsilon must be positive");
}

void adam_update(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  state.validate();
  if (params.size() != grads.size()) throw ShapeError("adam_update: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k])) throw ShapeError("adam_update: gradient shape mismatch at tensor " + std::to_string(k));
  }
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows, p->cols, 0.0);
      state.v.emplace_back(p->rows, p->cols, 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_update: state was built for a different parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k]->values;
    const auto& g = grads[k].values;
    auto& m = state.m[k].values;
    auto& v = state.v[k].values;
    if (m.size() != w.size()) throw ShapeError("adam_update: moment buffer shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.alpha * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_update(NetworkParams& params, const GradientBundle& grads, AdamState& state) {
  std::vector<Matrix*> ptrs;
  for (auto& t : params.trainable()) ptrs.push_back(t.tensor);
  adam_update(ptrs, grads.grads, state);
}

}  // namespace relapse::nn
