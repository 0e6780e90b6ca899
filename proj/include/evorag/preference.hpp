#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "evorag/policy.hpp"
#include "evorag/trajectory.hpp"

namespace evorag {

struct RmParams;
struct PrefixEncoderConfig;

enum class PairBasis { TrueReturn, RmScore };

std::string_view to_string(PairBasis basis);

struct BranchOrigin {
  int trajectory_id = 0;
  int step_index = 0;

  friend auto operator<=>(const BranchOrigin&, const BranchOrigin&) = default;
};

/// One continuation from a visited state: the action taken there and the
/// rollout that followed it.
struct Branch {
  BranchOrigin origin;
  int question_id = 0;
  /// Steps from the origin to the terminal state; suffix.steps.front() is
  /// the origin step and carries the candidate set and feature matrix.
  Trajectory suffix;
  double return_from_origin = 0.0;
  /// True for the sampled trajectory's own continuation.
  bool original = false;

  const StepRecord& origin_step() const { return suffix.steps.front(); }
  const Action& action() const { return origin_step().action(); }
  int action_index() const { return origin_step().chosen; }

  /// Weighted return of each reward component over the suffix, in
  /// RewardVector order.
  std::array<double, RewardVector::kSize> component_returns() const;
};

using BranchPtr = std::shared_ptr<const Branch>;

struct PreferencePair {
  BranchPtr positive;
  BranchPtr negative;
  double positive_score = 0.0;
  double negative_score = 0.0;
  double gap = 0.0;
  PairBasis basis = PairBasis::TrueReturn;
};

/// The trajectory's own continuation from `step_index`. Throws
/// std::out_of_range for an invalid index.
Branch taken_branch(const Trajectory& traj, int step_index);

/// Re-runs the episode from `step_index` with `alt` in place of the
/// original action, then completes it with the policy. Weights keep using
/// absolute step indices. Throws std::invalid_argument when `alt` equals the
/// original action or is not a candidate there, std::out_of_range for an
/// invalid index.
Branch branch(const Trajectory& traj, int step_index, const Action& alt,
              const PolicyParams& params, const World& world, const RolloutSettings& settings,
              std::uint64_t seed);

/// At every origin with two or more branches, pairs the best-scored branch
/// with the worst-scored one when their gap is at least `threshold`. Pairs
/// come out ordered by origin. `scores` is aligned with `branches`.
std::vector<PreferencePair> extract_pairs_by_score(std::span<const BranchPtr> branches,
                                                   std::span<const double> scores,
                                                   double threshold, PairBasis basis);

/// Pairs ordered by true weighted return, kept when the gap is >= delta_rm.
std::vector<PreferencePair> extract_rm_pairs(std::span<const BranchPtr> branches, double delta_rm);

/// Pairs ordered by the reward model's mean head score, kept when the gap is
/// >= margin.
std::vector<PreferencePair> extract_policy_pairs(std::span<const BranchPtr> branches,
                                                 const RmParams& rm, const World& world,
                                                 const PrefixEncoderConfig& encoder,
                                                 double margin);

}  // namespace evorag
