#include "evorag/reward_model.hpp"

#include <numeric>
#include <stdexcept>

namespace evorag {

int PrefixEncoderConfig::dimension() const { return embed_dim + kFeatureDim; }

PrefixEncoding encode_prefix(const Branch& branch, const World& world,
                             const PrefixEncoderConfig& cfg) {
  const StepRecord& origin = branch.origin_step();
  const EpisodeState& s = origin.state;

  std::string text = world.question(branch.question_id).question_text;
  for (const auto& q : s.sub_queries) text += " " + q;
  for (int id : s.retrieved_union()) text += " " + world.corpus.document(id).title;
  for (const auto& note : s.notes) text += " " + note;
  const Action& a = origin.action();
  text += " action:";
  text += to_string(a.type);
  if (!a.text.empty()) text += " " + a.text;

  PrefixEncoding enc = PrefixEncoding::Zero(cfg.dimension());
  enc.head(cfg.embed_dim) = embed_text(text, cfg.embed_dim).toDense();
  enc.tail(kFeatureDim) = origin.features.row(origin.chosen).transpose();
  return enc;
}

RmParams RmParams::zeros(int heads, int dim) {
  if (heads < 1 || dim < 1) throw std::invalid_argument("reward model needs heads >= 1, dim >= 1");
  return {Eigen::MatrixXd::Zero(heads, dim), Eigen::VectorXd::Zero(heads)};
}

Eigen::VectorXd score(const RmParams& rm, const PrefixEncoding& enc) {
  if (enc.size() != rm.weights.cols()) {
    throw std::invalid_argument("encoding dimension " + std::to_string(enc.size()) +
                                " does not match reward model dimension " +
                                std::to_string(rm.weights.cols()));
  }
  return rm.weights * enc + rm.bias;
}

double mean_score(const RmParams& rm, const PrefixEncoding& enc) { return score(rm, enc).mean(); }

std::vector<RmExample> rm_examples(std::span<const PreferencePair> pairs, const World& world,
                                   const PrefixEncoderConfig& encoder, int heads,
                                   bool per_component_orientation) {
  if (per_component_orientation && heads != RewardVector::kSize) {
    throw std::invalid_argument("per-component orientation needs one head per reward component");
  }
  std::vector<RmExample> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    RmExample ex;
    ex.positive = encode_prefix(*pair.positive, world, encoder);
    ex.negative = encode_prefix(*pair.negative, world, encoder);
    ex.orientation = Eigen::VectorXd::Ones(heads);
    if (per_component_orientation) {
      const auto pos = pair.positive->component_returns();
      const auto neg = pair.negative->component_returns();
      for (int k = 0; k < heads; ++k) {
        const double d = pos[static_cast<std::size_t>(k)] - neg[static_cast<std::size_t>(k)];
        ex.orientation(k) = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {
void check_examples(const RmParams& rm, std::span<const RmExample> examples) {
  if (examples.empty()) throw std::invalid_argument("reward-model loss needs at least one pair");
  for (const auto& ex : examples) {
    if (ex.positive.size() != rm.dim() || ex.negative.size() != rm.dim() ||
        ex.orientation.size() != rm.heads()) {
      throw std::invalid_argument("reward-model example does not match parameter shape");
    }
  }
}
}  // namespace

double rm_loss(const RmParams& rm, std::span<const RmExample> examples) {
  check_examples(rm, examples);
  const double inv_heads = 1.0 / static_cast<double>(rm.heads());
  double total = 0.0;
  for (const auto& ex : examples) {
    const Eigen::VectorXd diff = rm.weights * (ex.positive - ex.negative);
    double l = 0.0;
    for (int k = 0; k < rm.heads(); ++k) {
      if (ex.orientation(k) == 0.0) continue;
      l -= log_sigmoid(ex.orientation(k) * diff(k));
    }
    total += l * inv_heads;
  }
  return total / static_cast<double>(examples.size());
}

RmParams rm_gradient(const RmParams& rm, std::span<const RmExample> examples) {
  check_examples(rm, examples);
  RmParams g = RmParams::zeros(rm.heads(), rm.dim());
  const double scale = 1.0 / (static_cast<double>(rm.heads()) * static_cast<double>(examples.size()));
  for (const auto& ex : examples) {
    const Eigen::VectorXd delta = ex.positive - ex.negative;
    const Eigen::VectorXd diff = rm.weights * delta;
    for (int k = 0; k < rm.heads(); ++k) {
      const double o = ex.orientation(k);
      if (o == 0.0) continue;
      // d/dd [-log sigmoid(o d)] = -o * sigmoid(-o d)
      g.weights.row(k) -= (scale * o * sigmoid(-o * diff(k))) * delta.transpose();
    }
  }
  return g;
}

RmEpoch rm_train_epoch(const RmParams& rm, std::span<const RmExample> examples,
                       double learning_rate, int batch_size, std::uint64_t seed) {
  check_examples(rm, examples);
  if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x726dULL);
  rng.shuffle(order);

  RmEpoch out{rm, 0.0};
  std::vector<RmExample> batch;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
    out.loss += rm_loss(out.params, batch) * static_cast<double>(batch.size());
    const RmParams g = rm_gradient(out.params, batch);
    out.params.weights -= learning_rate * g.weights;
    out.params.bias -= learning_rate * g.bias;
  }
  out.loss /= static_cast<double>(examples.size());
  return out;
}

}  // namespace evorag
