#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "evorag/env.hpp"
#include "evorag/reward.hpp"
#include "evorag/schedule.hpp"
#include "evorag/trajectory.hpp"

namespace evorag {

/// Feature layout of a candidate action. Features shared by every candidate
/// at a state (bias, progress, verified, prior_backtracks) cancel inside the
/// softmax; the per-type blocks are what the policy actually ranks on.
namespace feature {
enum : int {
  kBias = 0,
  kProgress,
  kIsSearch,
  kIsBacktrack,
  kIsAnswer,
  kIsRefuse,
  kSearchOverlap,
  kSearchRetrievedCount,
  kSearchLastNovelty,
  kSearchNewEntity,
  kSearchForwardLink,
  kSearchLinked,
  kSearchProgress,
  kSearchVerified,
  kBacktrackStale,
  kBacktrackProgress,
  kAnswerVerified,
  kAnswerAttributeMatch,
  kAnswerLinked,
  kAnswerGrounded,
  kAnswerUngrounded,
  kAnswerProgress,
  kRefuseVerified,
  kRefuseProgress,
  kRefuseNoLead,
  kRefuseNoAnswer,
  kRefuseExhausted,
  kVerified,
  kPriorBacktracks,
  kCount
};
}  // namespace feature

inline constexpr int kFeatureDim = feature::kCount;

inline constexpr std::array<std::string_view, kFeatureDim> kFeatureNames = {
    "bias",
    "progress",
    "is_search",
    "is_backtrack",
    "is_answer",
    "is_refuse",
    "search_overlap",
    "search_retrieved_count",
    "search_last_novelty",
    "search_new_entity",
    "search_forward_link",
    "search_linked",
    "search_progress",
    "search_verified",
    "backtrack_stale",
    "backtrack_progress",
    "answer_verified",
    "answer_attribute_match",
    "answer_linked",
    "answer_grounded",
    "answer_ungrounded",
    "answer_progress",
    "refuse_verified",
    "refuse_progress",
    "refuse_no_lead",
    "refuse_no_answer",
    "refuse_exhausted",
    "verified",
    "prior_backtracks"};

struct CandidateAction {
  Action action;
  Eigen::VectorXd features;
};

/// Linear-softmax policy weights. Snapshots are values: training produces a
/// new snapshot with a higher version.
struct PolicyParams {
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(kFeatureDim);
  std::int64_t version = 0;

  bool valid() const { return weights.size() == kFeatureDim && weights.allFinite(); }
};

/// Weak, hand-set starting preferences standing in for a pretrained agent:
/// search rather than stop, avoid backtracking and answer with grounded
/// values. Every weight is +-`strength`.
PolicyParams prior_policy(double strength = 1.0);

struct PolicyConfig {
  double temperature = 1.0;
  int max_search_candidates = 8;
};

/// Environment facts the featurizer may read.
struct FeatureContext {
  int t_max = 20;
  int top_k = 3;
  int embed_dim = kDefaultEmbedDim;
  bool verified = false;  // verifier verdict on the current state
};

/// Deterministic candidate set for a non-terminal state: template searches,
/// Backtrack when there is history, one Answer per attribute value found in
/// retrieved documents, and Refuse.
std::vector<Action> candidate_actions(const EpisodeState& state, const QuestionInstance& question,
                                      const Corpus& corpus, const PolicyConfig& cfg = {});

/// Reads only the question text, the state and retrieved documents; never the
/// gold answer or gold documents.
Eigen::VectorXd featurize(const EpisodeState& state, const Action& candidate,
                          const QuestionInstance& question, const Corpus& corpus,
                          const FeatureContext& ctx);

/// One row per candidate.
Eigen::MatrixXd feature_matrix(const EpisodeState& state, const std::vector<Action>& candidates,
                               const QuestionInstance& question, const Corpus& corpus,
                               const FeatureContext& ctx);

std::vector<CandidateAction> featurized_candidates(const EpisodeState& state,
                                                   const QuestionInstance& question,
                                                   const Corpus& corpus, const FeatureContext& ctx,
                                                   const PolicyConfig& cfg = {});

/// Log-softmax of features * weights / temperature, one entry per row.
Eigen::VectorXd log_probabilities(const PolicyParams& params, const Eigen::MatrixXd& features,
                                  double temperature);

/// Log-probability of row `chosen`. Throws on an empty candidate matrix, an
/// out-of-range index or a non-positive temperature.
double log_prob(const PolicyParams& params, const Eigen::MatrixXd& features, int chosen,
                double temperature);

/// d log_prob / d weights.
Eigen::VectorXd log_prob_gradient(const PolicyParams& params, const Eigen::MatrixXd& features,
                                  int chosen, double temperature);

struct RolloutSettings {
  ScheduleConfig schedule;
  Stage stage = Stage::Discovery;
  RewardSettings reward;
  PolicyConfig policy;
  bool greedy = false;
};

/// Runs an episode from `start` until Answer/Refuse or t_max. When
/// `forced_first` is set, the first step takes that candidate instead of
/// sampling. Step weights use the absolute step index of each state.
Trajectory rollout_from(const PolicyParams& params, const QuestionInstance& question,
                        const World& world, const RolloutSettings& settings,
                        const EpisodeState& start, std::optional<Action> forced_first, Rng& rng);

/// Fresh episode with its own RNG stream keyed by (seed, episode_id).
Trajectory rollout(const PolicyParams& params, const QuestionInstance& question,
                   const World& world, const RolloutSettings& settings, std::uint64_t seed,
                   int episode_id);

}  // namespace evorag
