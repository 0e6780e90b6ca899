#pragma once

#include <cmath>

namespace evorag {

/// Numerically stable log(1 + exp(x)).
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  using std::max;
  return max(x, Scalar(0)) + log1p(exp(-(x < Scalar(0) ? -x : x)));
}

/// log(sigmoid(x)) = -softplus(-x).
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  return -softplus(-x);
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

}  // namespace evorag
