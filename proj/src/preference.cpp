#include "evorag/preference.hpp"

#include <map>
#include <stdexcept>

#include "evorag/reward_model.hpp"

namespace evorag {

std::string_view to_string(PairBasis basis) {
  return basis == PairBasis::TrueReturn ? "true_return" : "rm_score";
}

std::array<double, RewardVector::kSize> Branch::component_returns() const {
  std::array<double, RewardVector::kSize> total{};
  for (const StepRecord& s : suffix.steps) {
    const auto parts = weighted_components(s.reward, s.weights);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += parts[k];
  }
  return total;
}

namespace {
void check_step_index(const Trajectory& traj, int step_index) {
  if (step_index < 0 || step_index >= traj.length()) {
    throw std::out_of_range("branch step index " + std::to_string(step_index) +
                            " outside trajectory of length " + std::to_string(traj.length()));
  }
}
}  // namespace

Branch taken_branch(const Trajectory& traj, int step_index) {
  check_step_index(traj, step_index);
  Branch b;
  b.origin = {traj.episode_id, step_index};
  b.question_id = traj.question_id;
  b.original = true;
  b.suffix.episode_id = traj.episode_id;
  b.suffix.question_id = traj.question_id;
  b.suffix.stage = traj.stage;
  b.suffix.mode = traj.mode;
  b.suffix.seed = traj.seed;
  b.suffix.steps.assign(traj.steps.begin() + step_index, traj.steps.end());
  b.suffix.final_answer = traj.final_answer;
  b.suffix.truncated = traj.truncated;
  b.suffix.final_state = traj.final_state;
  b.suffix.total_return = episode_return(b.suffix, 0);
  b.return_from_origin = b.suffix.total_return;
  return b;
}

Branch branch(const Trajectory& traj, int step_index, const Action& alt,
              const PolicyParams& params, const World& world, const RolloutSettings& settings,
              std::uint64_t seed) {
  check_step_index(traj, step_index);
  const StepRecord& origin = traj.steps[static_cast<std::size_t>(step_index)];
  if (alt == origin.action()) {
    throw std::invalid_argument("branch action must differ from the action originally taken");
  }
  if (std::find(origin.candidates.begin(), origin.candidates.end(), alt) ==
      origin.candidates.end()) {
    throw std::invalid_argument("branch action is not a candidate at the origin state");
  }

  RolloutSettings s = settings;
  s.stage = traj.stage;
  Rng rng(seed, mix_seed(static_cast<std::uint64_t>(traj.episode_id),
                         static_cast<std::uint64_t>(step_index)));
  const QuestionInstance& q = world.question(traj.question_id);

  Branch b;
  b.origin = {traj.episode_id, step_index};
  b.question_id = traj.question_id;
  b.suffix = rollout_from(params, q, world, s, origin.state, alt, rng);
  b.suffix.episode_id = traj.episode_id;
  b.suffix.seed = seed;
  b.return_from_origin = b.suffix.total_return;
  return b;
}

std::vector<PreferencePair> extract_pairs_by_score(std::span<const BranchPtr> branches,
                                                   std::span<const double> scores,
                                                   double threshold, PairBasis basis) {
  if (threshold < 0.0) throw std::invalid_argument("pair threshold must be >= 0");
  if (scores.size() != branches.size()) throw std::invalid_argument("one score per branch");

  std::map<BranchOrigin, std::vector<std::size_t>> by_origin;
  for (std::size_t i = 0; i < branches.size(); ++i) by_origin[branches[i]->origin].push_back(i);

  std::vector<PreferencePair> pairs;
  for (const auto& [origin, members] : by_origin) {
    if (members.size() < 2) continue;
    std::size_t hi = members.front();
    std::size_t lo = members.front();
    for (std::size_t i : members) {
      if (scores[i] > scores[hi]) hi = i;
      if (scores[i] < scores[lo]) lo = i;
    }
    if (hi == lo) continue;
    const double gap = scores[hi] - scores[lo];
    if (gap < threshold) continue;
    pairs.push_back({branches[hi], branches[lo], scores[hi], scores[lo], gap, basis});
  }
  return pairs;
}

std::vector<PreferencePair> extract_rm_pairs(std::span<const BranchPtr> branches, double delta_rm) {
  std::vector<double> returns;
  returns.reserve(branches.size());
  for (const auto& b : branches) returns.push_back(b->return_from_origin);
  return extract_pairs_by_score(branches, returns, delta_rm, PairBasis::TrueReturn);
}

std::vector<PreferencePair> extract_policy_pairs(std::span<const BranchPtr> branches,
                                                 const RmParams& rm, const World& world,
                                                 const PrefixEncoderConfig& encoder,
                                                 double margin) {
  std::vector<double> scores;
  scores.reserve(branches.size());
  for (const auto& b : branches) scores.push_back(mean_score(rm, encode_prefix(*b, world, encoder)));
  return extract_pairs_by_score(branches, scores, margin, PairBasis::RmScore);
}

}  // namespace evorag
