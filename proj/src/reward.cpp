#include "evorag/reward.hpp"

#include <algorithm>
#include <stdexcept>

#include "evorag/metrics.hpp"
#include "evorag/trajectory.hpp"

namespace evorag {

double RewardVector::operator[](int i) const {
  switch (i) {
    case 0: return ret;
    case 1: return dup;
    case 2: return bt;
    case 3: return ref;
    case 4: return step;
    case 5: return ans;
    case 6: return act;
  }
  throw std::out_of_range("reward index");
}

double retrieval_bonus(const RewardContext& ctx) {
  if (ctx.action.type != ActionType::Search) return 0.0;
  const auto& gold = ctx.question.gold_doc_ids;
  const bool hit = std::any_of(ctx.retrieved.begin(), ctx.retrieved.end(), [&](int id) {
    return std::binary_search(gold.begin(), gold.end(), id);
  });
  return hit ? 1.0 : -1.0;
}

double overlap_penalty(const RewardContext& ctx) {
  if (ctx.action.type != ActionType::Search || ctx.before.sub_queries.empty()) return 0.0;
  const Embedding q = embed_text(ctx.action.text, ctx.embed_dim);
  double best = 0.0;
  for (const auto& prev : ctx.before.sub_queries) {
    best = std::max(best, cosine(q, embed_text(prev, ctx.embed_dim)));
  }
  return -best;
}

double backtrack_penalty(const RewardContext& ctx) {
  return ctx.action.type == ActionType::Backtrack ? -1.0 : 0.0;
}

double refusal_reward(const RewardContext& ctx) {
  if (ctx.action.type != ActionType::Refuse) return 0.0;
  return ctx.enough_evidence ? -1.0 : 1.0;
}

double step_cost(const RewardContext& ctx) { return ctx.settings.step_cost; }

double answer_correctness(std::string_view pred, std::string_view gold) {
  const MetricPair m = score_answer(pred, gold);
  return 0.5 * (static_cast<double>(m.em) + m.f1);
}

namespace {
double action_penalty_given_overlap(const RewardContext& ctx, double dup) {
  if (ctx.action.type != ActionType::Search || ctx.p < 0.3) return 0.0;
  return dup < -ctx.settings.tau_dup ? -1.0 : 0.0;
}
}  // namespace

double action_penalty(const RewardContext& ctx) {
  return action_penalty_given_overlap(ctx, overlap_penalty(ctx));
}

RewardVector reward_vector(const RewardContext& ctx) {
  RewardVector rv;
  rv.ret = retrieval_bonus(ctx);
  rv.dup = overlap_penalty(ctx);
  rv.bt = backtrack_penalty(ctx);
  rv.ref = refusal_reward(ctx);
  rv.step = step_cost(ctx);
  if (ctx.action.type == ActionType::Answer) {
    rv.ans = answer_correctness(ctx.action.text, ctx.question.gold_answer);
  }
  rv.act = action_penalty_given_overlap(ctx, rv.dup);
  return rv;
}

std::array<double, RewardVector::kSize> weighted_components(const RewardVector& rv,
                                                            const WeightVector& w) {
  std::array<double, RewardVector::kSize> out{};
  for (int i = 0; i < RewardVector::kSize; ++i) {
    out[static_cast<std::size_t>(i)] = w[kWeightIndexOfReward[static_cast<std::size_t>(i)]] * rv[i];
  }
  return out;
}

double aggregate(const RewardVector& rv, const WeightVector& w) {
  return w.beta * rv.ret + w.gamma * rv.dup + w.delta * rv.bt + w.rho * rv.ref +
         w.eta * rv.step + w.kappa * rv.ans + w.lambda * rv.act;
}

double episode_return(const Trajectory& traj, int from_step) {
  if (from_step < 0 || from_step > traj.length()) {
    throw std::out_of_range("episode_return: from_step " + std::to_string(from_step) +
                            " outside [0, " + std::to_string(traj.length()) + "]");
  }
  double total = 0.0;
  for (std::size_t i = static_cast<std::size_t>(from_step); i < traj.steps.size(); ++i) {
    total += traj.steps[i].aggregate;
  }
  return total;
}

}  // namespace evorag
