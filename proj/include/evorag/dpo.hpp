#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "evorag/logistic.hpp"
#include "evorag/policy.hpp"
#include "evorag/preference.hpp"

namespace evorag {

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 1e-2;
  int epochs = 1;
  int batch_size = 32;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// -log sigmoid(beta * (logp_pos - logp_neg)). Throws std::invalid_argument
/// for non-finite log-probabilities.
template <typename Scalar>
Scalar dpo_loss(Scalar logp_pos, Scalar logp_neg, Scalar beta) {
  using std::isfinite;
  if (!isfinite(logp_pos) || !isfinite(logp_neg)) {
    throw std::invalid_argument("dpo_loss needs finite log-probabilities");
  }
  return softplus(-beta * (logp_pos - logp_neg));
}

/// Origin state's candidate features plus the preferred and dispreferred
/// candidate rows. log pi(x) is the log-probability of the origin action.
struct DpoExample {
  Eigen::MatrixXd features;
  int positive = 0;
  int negative = 0;
  double temperature = 1.0;
};

/// Throws std::invalid_argument when the two branches do not share an
/// origin or take the same action.
DpoExample dpo_example(const PreferencePair& pair, double temperature);

std::vector<DpoExample> dpo_examples(std::span<const PreferencePair> pairs, double temperature);

/// Mean dpo_loss over the examples under `params`.
double dpo_mean_loss(const PolicyParams& params, std::span<const DpoExample> examples,
                     double beta);

/// Analytic gradient of dpo_mean_loss with respect to the policy weights.
/// Throws std::invalid_argument on malformed examples.
Eigen::VectorXd dpo_gradient(const PolicyParams& params, std::span<const DpoExample> examples,
                             double beta);

struct DpoResult {
  PolicyParams params;
  std::vector<double> epoch_losses;
};

/// `cfg.epochs` passes of mini-batch gradient descent over seeded shuffles.
/// The returned snapshot's version is one above the input's.
DpoResult dpo_train(const PolicyParams& params, std::span<const DpoExample> examples,
                    const DpoConfig& cfg, std::uint64_t seed);

}  // namespace evorag
