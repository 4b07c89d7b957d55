#pragma once

#include <cstdint>

#include "sctd/types.hpp"

namespace sctd {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  Vec params;
  Vec first_moment;
  Vec second_moment;
  std::int64_t step = 0;

  static AdamState start(Vec params);
};

// Bias-corrected Adam:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   params <- params - lr * (m / (1-b1^k)) / (sqrt(v / (1-b2^k)) + eps)
AdamState adam_step(AdamState state, const Vec& grad, const AdamOptions& options);

}  // namespace sctd
