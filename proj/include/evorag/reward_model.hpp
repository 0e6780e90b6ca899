#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "evorag/logistic.hpp"
#include "evorag/preference.hpp"

namespace evorag {

inline constexpr int kRmHeads = 7;

struct PrefixEncoderConfig {
  int embed_dim = 256;

  int dimension() const;
};

/// Embedding of the serialized prefix (question, sub-queries, retrieved
/// titles, past actions, origin action) followed by the origin action's
/// feature row.
using PrefixEncoding = Eigen::VectorXd;

PrefixEncoding encode_prefix(const Branch& branch, const World& world,
                             const PrefixEncoderConfig& cfg);

/// Linear heads: score = weights * encoding + bias, one row per head.
struct RmParams {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  static RmParams zeros(int heads, int dim);

  int heads() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
  bool valid() const {
    return weights.rows() == bias.size() && weights.rows() > 0 && weights.allFinite() &&
           bias.allFinite();
  }
};

/// One score per head. Throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd score(const RmParams& rm, const PrefixEncoding& enc);
double mean_score(const RmParams& rm, const PrefixEncoding& enc);

/// A preference pair reduced to what the loss needs. `orientation(k)` is +1
/// when head k should rank `positive` higher, -1 for the reverse and 0 to
/// leave head k out; all +1 is the shared-ordering objective.
struct RmExample {
  PrefixEncoding positive;
  PrefixEncoding negative;
  Eigen::VectorXd orientation;
};

/// Shared-ordering examples, or per-component orientation taken from the
/// sign of each component's weighted-return difference.
std::vector<RmExample> rm_examples(std::span<const PreferencePair> pairs, const World& world,
                                   const PrefixEncoderConfig& encoder, int heads,
                                   bool per_component_orientation);

/// Mean over examples of -(1/H) sum_k log sigmoid(o_k * (f_k(x+) - f_k(x-))).
/// Throws std::invalid_argument on an empty example list.
double rm_loss(const RmParams& rm, std::span<const RmExample> examples);

/// Analytic gradient of rm_loss, shaped like RmParams.
RmParams rm_gradient(const RmParams& rm, std::span<const RmExample> examples);

struct RmEpoch {
  RmParams params;
  double loss = 0.0;  // size-weighted mean of the mini-batch losses
};

/// One pass of mini-batch gradient descent over a seeded shuffle.
RmEpoch rm_train_epoch(const RmParams& rm, std::span<const RmExample> examples,
                       double learning_rate, int batch_size, std::uint64_t seed);

}  // namespace evorag
