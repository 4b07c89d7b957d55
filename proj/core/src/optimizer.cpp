#include "sctd/optimizer.hpp"

#include <cmath>

namespace sctd {

void AdamOptions::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw PreconditionError("learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw PreconditionError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw PreconditionError("Adam epsilon must be positive");
}

AdamState AdamState::start(Vec params) {
  AdamState state;
  const auto n = params.size();
  state.params = std::move(params);
  state.first_moment = Vec::Zero(n);
  state.second_moment = Vec::Zero(n);
  return state;
}

AdamState adam_step(AdamState state, const Vec& grad, const AdamOptions& options) {
  if (grad.size() != state.params.size()) {
    throw PreconditionError("gradient and parameter sizes differ");
  }
  state.step += 1;
  state.first_moment = options.beta1 * state.first_moment + (1.0 - options.beta1) * grad;
  state.second_moment =
      options.beta2 * state.second_moment + (1.0 - options.beta2) * grad.cwiseProduct(grad);
  const double k = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, k);
  const double c2 = 1.0 - std::pow(options.beta2, k);
  const Vec m_hat = state.first_moment / c1;
  const Vec v_hat = state.second_moment / c2;
  state.params -=
      options.learning_rate * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + options.epsilon).matrix());
  return state;
}

}  // namespace sctd
