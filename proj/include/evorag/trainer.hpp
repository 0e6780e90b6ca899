#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "evorag/dpo.hpp"
#include "evorag/env.hpp"
#include "evorag/policy.hpp"
#include "evorag/preference.hpp"
#include "evorag/reward_model.hpp"
#include "evorag/schedule.hpp"
#include "evorag/trajectory.hpp"

namespace evorag {

struct TrainConfig {
  int episodes_per_cycle = 16;  // questions sampled per cycle
  int rollouts = 2;             // sampled episodes per question
  double rm_lr = 0.5;
  int rm_batch_size = 32;
  int rm_heads = kRmHeads;
  bool rm_per_component = false;
  PrefixEncoderConfig encoder;
  DpoConfig dpo;
  ScheduleConfig schedule;
  RewardSettings reward;
  PolicyConfig policy;
  double prior_strength = 0.0;  // Discovery starts from prior_policy(strength); 0 = zeros
  double delta_rm = 0.3;
  double delta_policy = 0.2;
  int max_cycles = 6;
  int early_stop_patience = 2;
  double dev_fraction = 0.2;
  std::uint64_t seed = 42;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct EvalReport {
  double em = 0.0;                 // mean over answerable questions
  double f1 = 0.0;                 // mean over answerable questions
  double avg_steps = 0.0;          // mean episode length over all questions
  double refusal_accuracy = 0.0;   // share of unanswerable questions refused
  int n_answerable = 0;
  int n_unanswerable = 0;

  int total() const { return n_answerable + n_unanswerable; }
};

struct EvalSettings {
  ScheduleConfig schedule;
  Stage stage = Stage::Refinement;
  RewardSettings reward;
  PolicyConfig policy;
  bool greedy = true;
  std::uint64_t seed = 0;  // only read when greedy is false
};

/// One episode per question. Throws std::invalid_argument on an empty
/// question list. When `episodes` is given, the trajectories are appended.
EvalReport evaluate(const PolicyParams& params, const World& world,
                    std::span<const int> question_ids, const EvalSettings& settings,
                    std::vector<Trajectory>* episodes = nullptr);

struct QuestionSplit {
  std::vector<int> train;
  std::vector<int> dev;
};

/// Seeded shuffle of the question ids; the first round(fraction * n) become
/// the dev split. Throws std::invalid_argument when either side would be
/// empty.
QuestionSplit split_questions(const World& world, double dev_fraction, std::uint64_t seed);

struct Checkpoint {
  PolicyParams policy;
  RmParams rm;
  Stage stage = Stage::Discovery;
  int cycle = 0;
  EvalReport dev;
};

struct CycleRecord {
  Stage stage = Stage::Discovery;
  int cycle = 0;
  int episodes = 0;
  int branches = 0;
  int rm_pairs = 0;
  int policy_pairs = 0;
  std::optional<double> rm_loss;   // empty when no pair cleared delta_rm
  std::optional<double> dpo_loss;  // mean over the last epoch; empty without pairs
  std::vector<double> dpo_epoch_losses;
  double train_return = 0.0;       // mean return of the sampled episodes
  EvalReport dev;
  std::int64_t policy_version = 0;
};

/// Dev EM must beat the best so far by more than `min_delta`; `patience`
/// consecutive misses stop the stage.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience, double min_delta = 1e-3);

  /// Records one cycle's dev EM; returns true when training should stop.
  bool update(double dev_em);
  bool improved_last() const { return improved_last_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  int misses_ = 0;
  bool improved_last_ = false;
};

struct StageResult {
  Stage stage = Stage::Discovery;
  PolicyParams initial_policy;
  Checkpoint best;
  std::vector<CycleRecord> history;
  int next_episode_id = 0;
};

/// Hooks for logging. Both fire after the cycle's dev evaluation, so the
/// record passed along is complete.
struct TrainObserver {
  /// Every sampled (not branched) training episode.
  std::function<void(const Trajectory&, const CycleRecord&)> on_episode;
  /// The cycle's RM pairs followed by its policy pairs.
  std::function<void(std::span<const PreferencePair>, const CycleRecord&)> on_pairs;
};

/// Cycles of rollouts, branching, one RM epoch and one DPO fine-tune, each
/// followed by a greedy dev evaluation. Returns the highest-dev-EM
/// checkpoint (earliest on ties).
StageResult run_stage(Stage stage, const PolicyParams& init_policy, const RmParams& init_rm,
                      const TrainConfig& cfg, const World& world, const QuestionSplit& split,
                      int first_episode_id = 0, const TrainObserver& observer = {});

struct CurriculumResult {
  QuestionSplit split;
  StageResult discovery;
  StageResult refinement;

  const Checkpoint& final_checkpoint() const { return refinement.best; }
  /// Discovery cycles followed by Refinement cycles.
  std::vector<CycleRecord> history() const;
};

/// Discovery, then Refinement started from Discovery's best policy and RM.
CurriculumResult run_curriculum(const TrainConfig& cfg, const World& world,
                                const TrainObserver& observer = {});

}  // namespace evorag
