#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "evorag/env.hpp"
#include "evorag/reward.hpp"
#include "evorag/schedule.hpp"

namespace evorag {

struct StepRecord {
  EpisodeState state;  // before the action
  std::vector<Action> candidates;
  Eigen::MatrixXd features;
  int chosen = 0;
  double log_prob = 0.0;
  std::vector<int> retrieved;
  bool enough_evidence = false;
  RewardVector reward;
  WeightVector weights;
  double aggregate = 0.0;

  const Action& action() const { return candidates[static_cast<std::size_t>(chosen)]; }
};

struct Trajectory {
  int episode_id = 0;
  int question_id = 0;
  Stage stage = Stage::Discovery;
  ScheduleMode mode = ScheduleMode::TimeDynamic;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::optional<std::string> final_answer;
  bool truncated = false;
  double total_return = 0.0;

  /// Terminal state after the last step.
  EpisodeState final_state;

  int length() const { return static_cast<int>(steps.size()); }
};

/// Sum of stored step aggregates from `from_step` on. Throws
/// std::out_of_range when from_step is outside [0, length].
double episode_return(const Trajectory& traj, int from_step);

}  // namespace evorag
