#include "evorag/dpo.hpp"

#include <numeric>
#include <stdexcept>

namespace evorag {

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("dpo.beta must be > 0");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("dpo.learning_rate must be >= 0");
  if (epochs < 1) throw std::invalid_argument("dpo.epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("dpo.batch_size must be >= 1");
}

DpoExample dpo_example(const PreferencePair& pair, double temperature) {
  if (!pair.positive || !pair.negative) throw std::invalid_argument("pair is missing a branch");
  const Branch& pos = *pair.positive;
  const Branch& neg = *pair.negative;
  if (pos.origin != neg.origin) throw std::invalid_argument("pair branches do not share an origin");
  if (pos.action() == neg.action()) throw std::invalid_argument("pair branches take the same action");
  const StepRecord& origin = pos.origin_step();
  const auto& cands = origin.candidates;
  auto it = std::find(cands.begin(), cands.end(), neg.action());
  if (it == cands.end()) throw std::invalid_argument("negative action missing from candidate set");
  return {origin.features, pos.action_index(), static_cast<int>(it - cands.begin()), temperature};
}

std::vector<DpoExample> dpo_examples(std::span<const PreferencePair> pairs, double temperature) {
  std::vector<DpoExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(dpo_example(p, temperature));
  return out;
}

namespace {
void check_example(const DpoExample& ex) {
  const auto rows = ex.features.rows();
  if (rows == 0 || ex.features.cols() != kFeatureDim) {
    throw std::invalid_argument("DPO example is missing candidate features");
  }
  if (ex.positive < 0 || ex.positive >= rows || ex.negative < 0 || ex.negative >= rows) {
    throw std::invalid_argument("DPO example action index out of range");
  }
  if (ex.positive == ex.negative) throw std::invalid_argument("DPO example actions must differ");
}
}  // namespace

double dpo_mean_loss(const PolicyParams& params, std::span<const DpoExample> examples,
                     double beta) {
  if (examples.empty()) throw std::invalid_argument("DPO loss needs at least one pair");
  double total = 0.0;
  for (const auto& ex : examples) {
    check_example(ex);
    const Eigen::VectorXd logp = log_probabilities(params, ex.features, ex.temperature);
    total += dpo_loss(logp(ex.positive), logp(ex.negative), beta);
  }
  return total / static_cast<double>(examples.size());
}

Eigen::VectorXd dpo_gradient(const PolicyParams& params, std::span<const DpoExample> examples,
                             double beta) {
  if (examples.empty()) throw std::invalid_argument("DPO gradient needs at least one pair");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.weights.size());
  for (const auto& ex : examples) {
    check_example(ex);
    const Eigen::VectorXd logp = log_probabilities(params, ex.features, ex.temperature);
    const double margin = logp(ex.positive) - logp(ex.negative);
    // d/dm softplus(-beta m) = -beta * sigmoid(-beta m)
    const double coeff = -beta * sigmoid(-beta * margin);
    grad += coeff * (log_prob_gradient(params, ex.features, ex.positive, ex.temperature) -
                     log_prob_gradient(params, ex.features, ex.negative, ex.temperature));
  }
  return grad / static_cast<double>(examples.size());
}

DpoResult dpo_train(const PolicyParams& params, std::span<const DpoExample> examples,
                    const DpoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (examples.empty()) throw std::invalid_argument("DPO training needs at least one pair");

  DpoResult out{params, {}};
  std::vector<std::size_t> order(examples.size());
  std::vector<DpoExample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
      epoch_loss += dpo_mean_loss(out.params, batch, cfg.beta) * static_cast<double>(batch.size());
      out.params.weights -= cfg.learning_rate * dpo_gradient(out.params, batch, cfg.beta);
    }
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  out.params.version = params.version + 1;
  return out;
}

}  // namespace evorag
