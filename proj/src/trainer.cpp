#include "evorag/trainer.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "evorag/metrics.hpp"
#include "evorag/preference.hpp"

namespace evorag {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(episodes_per_cycle >= 1, "train.episodes_per_cycle must be >= 1");
  require(rollouts >= 1, "train.rollouts must be >= 1");
  require(rm_lr >= 0.0 && std::isfinite(rm_lr), "train.rm_lr must be finite and >= 0");
  require(rm_batch_size >= 1, "train.rm_batch_size must be >= 1");
  require(rm_heads == 1 || rm_heads == kRmHeads, "train.rm_heads must be 1 or 7");
  require(!rm_per_component || rm_heads == kRmHeads,
          "train.rm_per_component needs train.rm_heads = 7");
  require(encoder.embed_dim >= kMinEmbedDim, "train.rm_embed_dim must be >= 8");
  require(delta_rm >= 0.0, "train.delta_rm must be >= 0");
  require(delta_policy >= 0.0, "train.delta_policy must be >= 0");
  require(max_cycles >= 1, "train.max_cycles must be >= 1");
  require(early_stop_patience >= 1, "train.early_stop_patience must be >= 1");
  require(dev_fraction > 0.0 && dev_fraction < 1.0, "train.dev_fraction must be in (0, 1)");
  require(schedule.t_max >= 1, "schedule.t_max must be >= 1");
  require(prior_strength >= 0.0 && std::isfinite(prior_strength),
          "policy.prior_strength must be finite and >= 0");
  require(policy.temperature > 0.0, "policy.temperature must be > 0");
  require(policy.max_search_candidates >= 1, "policy.max_search_candidates must be >= 1");
  dpo.validate();
}

EvalReport evaluate(const PolicyParams& params, const World& world,
                    std::span<const int> question_ids, const EvalSettings& settings,
                    std::vector<Trajectory>* episodes) {
  if (question_ids.empty()) throw std::invalid_argument("evaluation needs at least one question");
  const RolloutSettings rs{settings.schedule, settings.stage, settings.reward, settings.policy,
                           settings.greedy};
  EvalReport r;
  double em = 0.0, f1 = 0.0, steps = 0.0, refused = 0.0;
  for (std::size_t i = 0; i < question_ids.size(); ++i) {
    const QuestionInstance& q = world.question(question_ids[i]);
    Trajectory traj = rollout(params, q, world, rs, settings.seed, static_cast<int>(i));
    steps += traj.length();
    if (q.answerable) {
      ++r.n_answerable;
      if (traj.final_answer) {
        const MetricPair m = score_answer(*traj.final_answer, q.gold_answer);
        em += m.em;
        f1 += m.f1;
      }
    } else {
      ++r.n_unanswerable;
      if (!traj.steps.empty() && traj.steps.back().action().type == ActionType::Refuse) {
        refused += 1.0;
      }
    }
    if (episodes) episodes->push_back(std::move(traj));
  }
  if (r.n_answerable > 0) {
    r.em = em / r.n_answerable;
    r.f1 = f1 / r.n_answerable;
  }
  if (r.n_unanswerable > 0) r.refusal_accuracy = refused / r.n_unanswerable;
  r.avg_steps = steps / static_cast<double>(question_ids.size());
  return r;
}

QuestionSplit split_questions(const World& world, double dev_fraction, std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw std::invalid_argument("dev fraction must be in (0, 1)");
  }
  std::vector<int> ids;
  ids.reserve(world.questions.size());
  for (const auto& q : world.questions) ids.push_back(q.question_id);
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(ids.size())));
  if (n_dev == 0 || n_dev >= ids.size()) {
    throw std::invalid_argument("world has too few questions for a train/dev split");
  }
  Rng rng(seed, 0x73706c6974ULL);
  rng.shuffle(ids);
  QuestionSplit s;
  s.dev.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_dev));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_dev), ids.end());
  std::sort(s.dev.begin(), s.dev.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw std::invalid_argument("early-stop patience must be >= 1");
}

bool EarlyStopper::update(double dev_em) {
  improved_last_ = dev_em > best_ + min_delta_;
  if (improved_last_) {
    best_ = dev_em;
    misses_ = 0;
  } else {
    ++misses_;
  }
  return misses_ >= patience_;
}

namespace {

std::uint64_t cycle_seed(const TrainConfig& cfg, Stage stage, int cycle) {
  return mix_seed(cfg.seed, mix_seed(static_cast<std::uint64_t>(stage) + 1,
                                     static_cast<std::uint64_t>(cycle)));
}

/// Question ids for one cycle: successive seeded permutations of the
/// training split, so every question appears once before any repeats.
std::vector<int> cycle_questions(const std::vector<int>& train, int count, std::uint64_t seed) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  std::uint64_t round = 0;
  while (out.size() < static_cast<std::size_t>(count)) {
    std::vector<int> perm = train;
    Rng rng(seed, 0x71000000ULL + round++);
    rng.shuffle(perm);
    for (int id : perm) {
      if (out.size() == static_cast<std::size_t>(count)) break;
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace

StageResult run_stage(Stage stage, const PolicyParams& init_policy, const RmParams& init_rm,
                      const TrainConfig& cfg, const World& world, const QuestionSplit& split,
                      int first_episode_id, const TrainObserver& observer) {
  cfg.validate();
  if (world.questions.empty() || world.corpus.empty()) {
    throw std::invalid_argument("training needs a non-empty world");
  }
  if (split.train.empty() || split.dev.empty()) {
    throw std::invalid_argument("training needs non-empty train and dev splits");
  }
  if (!init_policy.valid()) throw std::invalid_argument("initial policy is malformed");
  if (!init_rm.valid() || init_rm.heads() != cfg.rm_heads ||
      init_rm.dim() != cfg.encoder.dimension()) {
    throw std::invalid_argument("initial reward model does not match the config");
  }

  const RolloutSettings rs{cfg.schedule, stage, cfg.reward, cfg.policy, false};
  const EvalSettings es{cfg.schedule, stage, cfg.reward, cfg.policy, true, 0};

  StageResult result;
  result.stage = stage;
  result.initial_policy = init_policy;
  result.next_episode_id = first_episode_id;

  PolicyParams policy = init_policy;
  RmParams rm = init_rm;
  EarlyStopper stopper(cfg.early_stop_patience);
  bool have_best = false;

  for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    const std::uint64_t seed = cycle_seed(cfg, stage, cycle);
    CycleRecord rec;
    rec.stage = stage;
    rec.cycle = cycle;

    // Rollouts against the current snapshot.
    std::vector<Trajectory> episodes;
    for (int qid : cycle_questions(split.train, cfg.episodes_per_cycle, seed)) {
      const QuestionInstance& q = world.question(qid);
      for (int n = 0; n < cfg.rollouts; ++n) {
        episodes.push_back(rollout(policy, q, world, rs, seed, result.next_episode_id++));
      }
    }
    rec.episodes = static_cast<int>(episodes.size());
    double ret = 0.0;
    for (const auto& e : episodes) ret += e.total_return;
    rec.train_return = ret / static_cast<double>(episodes.size());

    // Siblings: the taken continuation plus one uniformly drawn alternative.
    std::vector<BranchPtr> branches;
    for (const auto& traj : episodes) {
      Rng pick(seed, mix_seed(0x62720000ULL, static_cast<std::uint64_t>(traj.episode_id)));
      for (int i = 0; i < traj.length(); ++i) {
        const StepRecord& s = traj.steps[static_cast<std::size_t>(i)];
        branches.push_back(std::make_shared<const Branch>(taken_branch(traj, i)));
        const auto n_alt = s.candidates.size() - 1;
        if (n_alt == 0) continue;
        auto alt = static_cast<std::size_t>(pick.below(n_alt));
        if (alt >= static_cast<std::size_t>(s.chosen)) ++alt;
        branches.push_back(std::make_shared<const Branch>(
            branch(traj, i, s.candidates[alt], policy, world, rs, seed)));
      }
    }
    rec.branches = static_cast<int>(branches.size());

    // One reward-model epoch on return-ordered pairs.
    const auto rm_pairs = extract_rm_pairs(branches, cfg.delta_rm);
    rec.rm_pairs = static_cast<int>(rm_pairs.size());
    if (!rm_pairs.empty()) {
      const auto examples =
          rm_examples(rm_pairs, world, cfg.encoder, cfg.rm_heads, cfg.rm_per_component);
      RmEpoch epoch = rm_train_epoch(rm, examples, cfg.rm_lr, cfg.rm_batch_size, seed);
      rm = std::move(epoch.params);
      rec.rm_loss = epoch.loss;
    }

    // Policy fine-tune on pairs ranked by the refreshed reward model.
    const auto policy_pairs =
        extract_policy_pairs(branches, rm, world, cfg.encoder, cfg.delta_policy);
    rec.policy_pairs = static_cast<int>(policy_pairs.size());
    if (!policy_pairs.empty()) {
      const auto examples = dpo_examples(policy_pairs, cfg.policy.temperature);
      DpoResult trained = dpo_train(policy, examples, cfg.dpo, seed);
      policy = std::move(trained.params);
      rec.dpo_loss = trained.epoch_losses.back();
      rec.dpo_epoch_losses = std::move(trained.epoch_losses);
    }
    rec.policy_version = policy.version;

    rec.dev = evaluate(policy, world, split.dev, es);
    if (observer.on_episode) {
      for (const auto& e : episodes) observer.on_episode(e, rec);
    }
    if (observer.on_pairs) {
      observer.on_pairs(rm_pairs, rec);
      observer.on_pairs(policy_pairs, rec);
    }

    if (!have_best || rec.dev.em > result.best.dev.em) {
      result.best = {policy, rm, stage, cycle, rec.dev};
      have_best = true;
    }
    const bool stop = stopper.update(rec.dev.em);
    result.history.push_back(std::move(rec));
    if (stop) break;
  }
  return result;
}

std::vector<CycleRecord> CurriculumResult::history() const {
  std::vector<CycleRecord> out = discovery.history;
  out.insert(out.end(), refinement.history.begin(), refinement.history.end());
  return out;
}

CurriculumResult run_curriculum(const TrainConfig& cfg, const World& world,
                                const TrainObserver& observer) {
  cfg.validate();
  CurriculumResult r;
  r.split = split_questions(world, cfg.dev_fraction, cfg.seed);
  const RmParams rm0 = RmParams::zeros(cfg.rm_heads, cfg.encoder.dimension());
  r.discovery = run_stage(Stage::Discovery, prior_policy(cfg.prior_strength), rm0, cfg, world,
                           r.split, 0, observer);
  r.refinement = run_stage(Stage::Refinement, r.discovery.best.policy, r.discovery.best.rm, cfg,
                           world, r.split, r.discovery.next_episode_id, observer);
  return r;
}

}  // namespace evorag
