#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evorag/env.hpp"
#include "evorag/schedule.hpp"

namespace evorag {

/// The seven step-level reward components.
struct RewardVector {
  double ret = 0.0;   // retrieval bonus, {-1, 0, 1}
  double dup = 0.0;   // sub-query overlap penalty, [-1, 0]
  double bt = 0.0;    // backtrack penalty, {-1, 0}
  double ref = 0.0;   // refusal reward, {-1, 0, 1}
  double step = 0.0;  // step cost, -1 by default
  double ans = 0.0;   // answer correctness, [0, 1]
  double act = 0.0;   // retrieval action penalty, {-1, 0}

  static constexpr int kSize = 7;

  double operator[](int i) const;

  friend bool operator==(const RewardVector&, const RewardVector&) = default;
};

/// Component names in RewardVector order; also the trajectory-log keys.
inline constexpr std::array<std::string_view, RewardVector::kSize> kRewardNames = {
    "ret", "dup", "bt", "ref", "step", "ans", "act"};

/// Index into WeightVector paired with each RewardVector component.
/// ret<->beta, dup<->gamma, bt<->delta, ref<->rho, step<->eta, ans<->kappa,
/// act<->lambda.
inline constexpr std::array<int, RewardVector::kSize> kWeightIndexOfReward = {0, 2, 3, 4, 5, 6, 1};

struct RewardSettings {
  /// Raw per-step cost.
  double step_cost = -1.0;
  /// r_act fires when the same-step overlap penalty is below -tau_dup.
  double tau_dup = 0.0;
};

/// Everything the reward functions may look at for one transition.
struct RewardContext {
  const EpisodeState& before;
  const Action& action;
  std::span<const int> retrieved;  // empty unless Search
  const QuestionInstance& question;
  bool enough_evidence = false;    // verifier verdict on `before`
  double p = 0.0;                  // progress ratio at before.t
  int embed_dim = kDefaultEmbedDim;
  RewardSettings settings{};
};

double retrieval_bonus(const RewardContext& ctx);
double overlap_penalty(const RewardContext& ctx);
double backtrack_penalty(const RewardContext& ctx);
double refusal_reward(const RewardContext& ctx);
double step_cost(const RewardContext& ctx);
/// 0.5 * (EM + F1).
double answer_correctness(std::string_view pred, std::string_view gold);
double action_penalty(const RewardContext& ctx);

RewardVector reward_vector(const RewardContext& ctx);

/// Sum over components of weight * reward.
double aggregate(const RewardVector& rv, const WeightVector& w);

/// Per-component weighted contributions, in RewardVector order.
std::array<double, RewardVector::kSize> weighted_components(const RewardVector& rv,
                                                            const WeightVector& w);

}  // namespace evorag
