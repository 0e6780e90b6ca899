// Acceptance run: one PASS/FAIL line per criterion.
//
// Usage: acceptance <config.json> [--work-dir DIR] [--known-red 7,9]
//
// Criteria listed with --known-red still print FAIL when they fail, but do
// not turn the exit status non-zero; any other failure (or an exception)
// does. A known-red criterion that passes is reported as such.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evorag/dpo.hpp"
#include "evorag/experiment.hpp"
#include "evorag/io.hpp"
#include "evorag/preference.hpp"
#include "evorag/reward.hpp"
#include "evorag/reward_model.hpp"
#include "evorag/schedule.hpp"
#include "oracles.hpp"

using namespace evorag;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- 1: weights table ----------------------------------------------------

Outcome weights_table() {
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::TimeDynamic;
  const oracle::Table tab;
  int mismatches = 0;
  auto same = [&](const WeightVector& w, const std::array<double, 7>& row) {
    for (int i = 0; i < 7; ++i) {
      if (w[i] != row[static_cast<std::size_t>(i)]) ++mismatches;
    }
  };
  same(weights_at(cfg, Stage::Discovery, 0), tab.start);
  same(weights_at(cfg, Stage::Discovery, cfg.t_max), tab.mid);
  same(weights_at(cfg, Stage::Refinement, 0), tab.mid);
  same(weights_at(cfg, Stage::Refinement, cfg.t_max), tab.end);
  int rho_off = 0;
  for (Stage s : {Stage::Discovery, Stage::Refinement}) {
    for (ScheduleMode m : {ScheduleMode::TimeDynamic, ScheduleMode::TwoStageFixed}) {
      cfg.mode = m;
      for (int t = 0; t <= cfg.t_max; ++t) {
        if (weights_at(cfg, s, t).rho != 0.5) ++rho_off;
      }
    }
  }
  return {mismatches == 0 && rho_off == 0,
          std::to_string(28 - mismatches) + "/28 anchor cells exact, rho off 0.5 at " +
              std::to_string(rho_off) + " steps"};
}

// --- 2: reward case table ------------------------------------------------

struct RewardFixture {
  World world;
  QuestionInstance q;   // answerable, gold {0, 1}
  QuestionInstance qu;  // unanswerable, no gold

  RewardFixture() {
    world.config.embed_dim = 1 << 20;
    world.corpus = Corpus({{0, "e1", "e1 founded e2"}, {1, "e2", "e2 born v7"},
                           {2, "e9", "e9 owns e8"}},
                          world.config.embed_dim);
    q = {0, "what born e1", "v7", {0, 1}, true, 2};
    qu = {1, "what born e9", "", {}, false, 2};
  }
};

EpisodeState history(std::vector<std::string> queries, int t,
                     std::vector<std::vector<int>> sets = {}) {
  EpisodeState s = EpisodeState::initial(0);
  s.sub_queries = std::move(queries);
  if (sets.empty()) sets.resize(s.sub_queries.size());
  s.retrieved_sets = std::move(sets);
  s.t = t;
  return s;
}

Outcome reward_table() {
  const RewardFixture fx;
  const int dim = fx.world.corpus.embed_dim();
  struct Case {
    std::string name;
    double actual;
    double expected;
    double tol;  // 0 = exact
  };
  std::vector<Case> cases;
  const EpisodeState empty = history({}, 0);
  const EpisodeState one = history({"e1"}, 1, {{0}});
  const auto search = Action::search("e1");
  const auto answer = Action::answer("v7");
  const std::vector<int> none;
  auto ctx = [&](const EpisodeState& s, const Action& a, const std::vector<int>& r,
                 const QuestionInstance& q, bool enough, double p,
                 RewardSettings rs = {}) { return RewardContext{s, a, r, q, enough, p, dim, rs}; };
  auto add = [&](std::string n, double a, double e, double tol = 0.0) {
    cases.push_back({std::move(n), a, e, tol});
  };

  // retrieval bonus
  const std::vector<int> gold_hit{0, 2}, miss{2};
  add("ret search hits gold", retrieval_bonus(ctx(empty, search, gold_hit, fx.q, false, 0)), 1);
  add("ret search misses gold", retrieval_bonus(ctx(empty, search, miss, fx.q, false, 0)), -1);
  add("ret search retrieves nothing", retrieval_bonus(ctx(empty, search, none, fx.q, false, 0)), -1);
  add("ret search on unanswerable", retrieval_bonus(ctx(empty, search, gold_hit, fx.qu, false, 0)), -1);
  add("ret backtrack", retrieval_bonus(ctx(one, Action::backtrack(), none, fx.q, false, 0)), 0);
  add("ret answer", retrieval_bonus(ctx(one, answer, none, fx.q, false, 0)), 0);
  // overlap penalty
  add("dup first search", overlap_penalty(ctx(empty, search, miss, fx.q, false, 0)), 0);
  add("dup repeated query", overlap_penalty(ctx(one, search, miss, fx.q, false, 0.05)), -1);
  // The hashed oracle confirms the two queries share no bucket.
  add("dup disjoint buckets", oracle::cosine("e9 owns", "e1", dim), 0);
  add("dup token-disjoint query",
      overlap_penalty(ctx(one, Action::search("e9 owns"), miss, fx.q, false, 0.05)),
      0);
  add("dup partial overlap",
      overlap_penalty(ctx(one, Action::search("e1 e2"), miss, fx.q, false, 0.05)),
      -1.0 / std::sqrt(2.0), 1e-12);
  add("dup refuse", overlap_penalty(ctx(one, Action::refuse(), none, fx.q, false, 0.05)), 0);
  // backtrack penalty
  add("bt backtrack", backtrack_penalty(ctx(one, Action::backtrack(), none, fx.q, false, 0)), -1);
  add("bt search", backtrack_penalty(ctx(one, search, miss, fx.q, false, 0)), 0);
  // refusal reward
  add("ref refuse without evidence", refusal_reward(ctx(one, Action::refuse(), none, fx.qu, false, 0)), 1);
  add("ref refuse with evidence", refusal_reward(ctx(one, Action::refuse(), none, fx.q, true, 0)), -1);
  add("ref answer", refusal_reward(ctx(one, answer, none, fx.q, true, 0)), 0);
  // step cost
  add("step search", step_cost(ctx(empty, search, miss, fx.q, false, 0)), -1);
  add("step answer", step_cost(ctx(one, answer, none, fx.q, false, 0)), -1);
  add("step configured cost", step_cost(ctx(one, answer, none, fx.q, false, 0, {-0.5, 0.0})), -0.5);
  // answer correctness
  add("ans exact", answer_correctness("v7", "v7"), 1);
  add("ans partial", answer_correctness("george", "george v"), 0.5 * (0.0 + 2.0 / 3.0), 1e-12);
  add("ans wrong", answer_correctness("v8", "v7"), 0);
  add("ans empty prediction", answer_correctness("", "v7"), 0);
  {
    // Last step of a truncated episode: a Search, so no answer reward.
    const EpisodeState late = history({"e1"}, 19, {{0}});
    add("ans truncation", reward_vector(ctx(late, Action::search("e2"), {1}, fx.q, false, 0.95)).ans, 0);
  }
  add("ans only on answer", reward_vector(ctx(one, search, miss, fx.q, false, 0.05)).ans, 0);
  // action penalty
  add("act early duplicate", action_penalty(ctx(one, search, miss, fx.q, false, 0.1)), 0);
  add("act late duplicate", action_penalty(ctx(one, search, miss, fx.q, false, 0.5)), -1);
  add("act boundary no overlap",
      action_penalty(ctx(one, Action::search("e9 owns"), miss, fx.q, false, 0.3)),
      0);
  add("act boundary duplicate", action_penalty(ctx(one, search, miss, fx.q, false, 0.3)), -1);
  add("act just below boundary", action_penalty(ctx(one, search, miss, fx.q, false, 0.29)), 0);
  add("act late backtrack", action_penalty(ctx(one, Action::backtrack(), none, fx.q, false, 0.9)), 0);
  // composition and weighting
  {
    ScheduleConfig sc;
    const RewardVector first = reward_vector(ctx(empty, search, gold_hit, fx.q, false, 0));
    add("vector first gold search", first == RewardVector{1, 0, 0, 0, -1, 0, 0} ? 1 : 0, 1);
    const RewardVector bt = reward_vector(ctx(one, Action::backtrack(), none, fx.q, false, 0.05));
    add("vector backtrack", bt == RewardVector{0, 0, -1, 0, -1, 0, 0} ? 1 : 0, 1);
    add("aggregate first gold search at start",
        aggregate(first, weights_at(sc, Stage::Discovery, 0)), 2.0 - 0.02, 1e-12);
    const RewardVector refuse = reward_vector(ctx(one, Action::refuse(), none, fx.qu, false, 0.05));
    add("aggregate refusal at end", aggregate(refuse, weights_at(sc, Stage::Refinement, sc.t_max)),
        0.5 - 0.10, 1e-12);
  }

  int failed = 0;
  std::string first_failure;
  for (const auto& c : cases) {
    const bool ok = c.tol == 0.0 ? c.actual == c.expected : std::abs(c.actual - c.expected) <= c.tol;
    if (!ok) {
      if (failed++ == 0) first_failure = "; first failure: " + c.name;
    }
  }
  return {failed == 0 && cases.size() >= 25,
          std::to_string(cases.size() - static_cast<std::size_t>(failed)) + "/" +
              std::to_string(cases.size()) + " cases exact" + first_failure};
}

// --- 3: loss constants ---------------------------------------------------

Outcome loss_constants() {
  const double ln2 = std::log(2.0);
  Rng rng(3, 0);
  RmParams rm = RmParams::zeros(kRmHeads, 12);
  for (int k = 0; k < rm.heads(); ++k) rm.bias(k) = rng.uniform();
  std::vector<RmExample> ex;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd x(12), y(12);
    for (int j = 0; j < 12; ++j) {
      x(j) = rng.uniform();
      y(j) = rng.uniform();
    }
    ex.push_back({x, y, Eigen::VectorXd::Ones(kRmHeads)});
  }
  // Zero weights: every head scores both sides by its bias alone, so all
  // heads are tied across every pair.
  const double rm_tied = rm_loss(rm, ex);
  const double tied = dpo_loss(-1.3, -1.3, 0.1);
  const double unit = dpo_loss(0.0, -1.0, 0.1);
  const double unit_ref = oracle::softplus(-0.1);
  const double e1 = std::abs(rm_tied - ln2), e2 = std::abs(tied - ln2), e3 = std::abs(unit - unit_ref);
  return {e1 <= 1e-9 && e2 <= 1e-9 && e3 <= 1e-9,
          "rm tied " + fmt("%.12f", rm_tied) + ", dpo tied " + fmt("%.12f", tied) +
              ", dpo diff=1 " + fmt("%.12f", unit) + " vs " + fmt("%.12f", unit_ref)};
}

// --- 4: gradient checks --------------------------------------------------

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Outcome gradient_checks() {
  const double h = 1e-5;
  double worst_rm = 0.0, worst_dpo = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng(0x67726164ULL, static_cast<std::uint64_t>(inst));
    // reward model
    const int heads = inst % 2 == 0 ? kRmHeads : 1;
    const int dim = 6 + static_cast<int>(rng.below(10));
    RmParams rm = RmParams::zeros(heads, dim);
    for (int i = 0; i < rm.weights.size(); ++i) rm.weights.data()[i] = uniform(rng, -1, 1);
    for (int k = 0; k < heads; ++k) rm.bias(k) = uniform(rng, -1, 1);
    std::vector<RmExample> ex;
    const int n = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      RmExample e{Eigen::VectorXd(dim), Eigen::VectorXd(dim), Eigen::VectorXd(heads)};
      for (int j = 0; j < dim; ++j) {
        e.positive(j) = uniform(rng, -1, 1);
        e.negative(j) = uniform(rng, -1, 1);
      }
      for (int k = 0; k < heads; ++k) e.orientation(k) = static_cast<double>(rng.below(3)) - 1.0;
      ex.push_back(std::move(e));
    }
    const RmParams g = rm_gradient(rm, ex);
    Eigen::VectorXd analytic(rm.weights.size() + heads), numeric(rm.weights.size() + heads);
    for (int i = 0; i < rm.weights.size(); ++i) {
      RmParams a = rm, b = rm;
      a.weights.data()[i] += h;
      b.weights.data()[i] -= h;
      numeric(i) = (rm_loss(a, ex) - rm_loss(b, ex)) / (2 * h);
      analytic(i) = g.weights.data()[i];
    }
    for (int k = 0; k < heads; ++k) {
      RmParams a = rm, b = rm;
      a.bias(k) += h;
      b.bias(k) -= h;
      numeric(rm.weights.size() + k) = (rm_loss(a, ex) - rm_loss(b, ex)) / (2 * h);
      analytic(rm.weights.size() + k) = g.bias(k);
    }
    worst_rm = std::max(worst_rm, oracle::rel_error(analytic, numeric));

    // DPO
    PolicyParams p;
    for (int j = 0; j < kFeatureDim; ++j) p.weights(j) = uniform(rng, -1, 1);
    const double beta = uniform(rng, 0.05, 2.0);
    std::vector<DpoExample> dex;
    const int m = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < m; ++i) {
      const int rows = 2 + static_cast<int>(rng.below(5));
      DpoExample d;
      d.features = Eigen::MatrixXd(rows, kFeatureDim);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < kFeatureDim; ++c) d.features(r, c) = uniform(rng, -1, 1);
      }
      d.positive = static_cast<int>(rng.below(static_cast<std::uint64_t>(rows)));
      d.negative = (d.positive + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(rows - 1)))) % rows;
      d.temperature = uniform(rng, 0.3, 2.0);
      dex.push_back(std::move(d));
    }
    const Eigen::VectorXd gd = dpo_gradient(p, dex, beta);
    Eigen::VectorXd nd(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j) {
      PolicyParams a = p, b = p;
      a.weights(j) += h;
      b.weights(j) -= h;
      nd(j) = (dpo_mean_loss(a, dex, beta) - dpo_mean_loss(b, dex, beta)) / (2 * h);
    }
    worst_dpo = std::max(worst_dpo, oracle::rel_error(gd, nd));
  }
  return {worst_rm < 1e-4 && worst_dpo < 1e-4,
          "100 instances each, worst relative error rm " + fmt("%.2e", worst_rm) + ", dpo " +
              fmt("%.2e", worst_dpo)};
}

// --- 5: return oracle ----------------------------------------------------

Outcome return_oracle() {
  WorldConfig wc;
  wc.n_questions = 60;
  wc.seed = 5;
  const World world = generate_world(wc);
  const int dim = world.corpus.embed_dim();
  double worst = 0.0;
  int steps = 0;
  const ScheduleMode modes[] = {ScheduleMode::NoReward, ScheduleMode::TwoStageFixed,
                                ScheduleMode::TimeDynamic};
  for (int e = 0; e < 1000; ++e) {
    Rng rng(0x726574ULL, static_cast<std::uint64_t>(e));
    PolicyParams p;
    for (int j = 0; j < kFeatureDim; ++j) p.weights(j) = uniform(rng, -2, 2);
    RolloutSettings rs;
    rs.schedule.mode = modes[e % 3];
    rs.stage = (e / 3) % 2 == 0 ? Stage::Discovery : Stage::Refinement;
    rs.schedule.t_max = 4 + static_cast<int>(rng.below(17));
    const auto& q = world.questions[static_cast<std::size_t>(rng.below(world.questions.size()))];
    const Trajectory traj = rollout(p, q, world, rs, 99, e);
    const Json log = Json::parse(trajectory_to_json(traj, q).dump());
    double total = 0.0;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      const StepRecord& s = traj.steps[i];
      const auto r = oracle::rewards(s.state, s.action(), s.retrieved, q, rs.schedule.t_max, dim);
      const auto w = oracle::weights(rs.schedule.mode, rs.stage, s.state.t, rs.schedule.t_max);
      const double agg = oracle::combine(r, w);
      total += agg;
      const Json& ls = log["steps"][i];
      worst = std::max({worst, std::abs(ls["aggregate"].get<double>() - agg),
                        std::abs(s.aggregate - agg)});
      const RewardVector logged = reward_from_json(ls["reward"]);
      for (int k = 0; k < 7; ++k) {
        worst = std::max(worst, std::abs(logged[k] - r[static_cast<std::size_t>(k)]));
      }
      ++steps;
    }
    worst = std::max({worst, std::abs(episode_return(traj, 0) - total),
                      std::abs(traj.total_return - total)});
  }
  return {worst <= 1e-9, "1000 episodes, " + std::to_string(steps) +
                             " steps, worst deviation " + fmt("%.2e", worst)};
}

// --- 6: pair-extraction oracle -------------------------------------------

World tiny_world(Rng& rng, bool answerable) {
  World w;
  w.config.top_k = 2;
  w.config.embed_dim = 1 << 20;
  auto ent = [&] { return "e" + std::to_string(1 + rng.below(6)); };
  const std::string a = ent();
  std::string b = ent();
  while (b == a) b = ent();
  std::vector<Document> docs;
  docs.push_back({0, a, a + " founded " + b});
  docs.push_back({1, b, answerable ? b + " born v1" : b + " owns " + ent()});
  for (int i = 2; i < 4; ++i) {
    const std::string x = ent();
    docs.push_back({i, x, rng.below(2) ? x + " leads " + (rng.below(2) ? a : b) : x + " born v2"});
  }
  w.corpus = Corpus(std::move(docs), w.config.embed_dim);
  QuestionInstance q{0, "what born " + a, answerable ? "v1" : "", {}, answerable, 2};
  if (answerable) q.gold_doc_ids = {0, 1};
  w.questions = {q};
  return w;
}

Outcome pair_oracle() {
  int origins = 0, pairs_checked = 0, mismatches = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    Rng rng(0x70616972ULL, static_cast<std::uint64_t>(inst));
    const World world = tiny_world(rng, rng.below(4) != 0);
    const auto& q = world.questions.front();
    PolicyParams p;
    for (int j = 0; j < kFeatureDim; ++j) p.weights(j) = uniform(rng, -1, 1);
    RolloutSettings rs;
    rs.schedule.t_max = 3;
    rs.stage = rng.below(2) ? Stage::Discovery : Stage::Refinement;
    rs.policy.max_search_candidates = 3;
    rs.greedy = true;
    const Trajectory traj = rollout(p, q, world, rs, 11, inst);
    const oracle::Env env{world, rs.schedule, rs.stage, rs.policy};

    std::vector<BranchPtr> branches;
    std::map<int, std::vector<double>> truth;  // step -> oracle return per candidate
    for (int i = 0; i < traj.length(); ++i) {
      const StepRecord& s = traj.steps[static_cast<std::size_t>(i)];
      auto& ret = truth[i];
      for (std::size_t c = 0; c < s.candidates.size(); ++c) {
        ret.push_back(oracle::greedy_return(env, p, q, s.state, s.candidates[c]));
        const Branch b = static_cast<int>(c) == s.chosen
                             ? taken_branch(traj, i)
                             : branch(traj, i, s.candidates[c], p, world, rs, 11);
        worst = std::max(worst, std::abs(b.return_from_origin - ret.back()));
        branches.push_back(std::make_shared<const Branch>(b));
      }
      ++origins;
    }
    const auto pairs = extract_rm_pairs(branches, 0.3);
    std::set<int> paired;
    for (const auto& pr : pairs) {
      const int i = pr.positive->origin.step_index;
      paired.insert(i);
      const auto& ret = truth[i];
      const double hi = *std::max_element(ret.begin(), ret.end());
      const double lo = *std::min_element(ret.begin(), ret.end());
      const auto& cands = traj.steps[static_cast<std::size_t>(i)].candidates;
      const auto at = [&](const BranchPtr& b) {
        return ret[static_cast<std::size_t>(
            std::find(cands.begin(), cands.end(), b->action()) - cands.begin())];
      };
      if (std::abs(pr.positive_score - hi) > 1e-9 || std::abs(pr.negative_score - lo) > 1e-9 ||
          std::abs(at(pr.positive) - hi) > 1e-9 || std::abs(at(pr.negative) - lo) > 1e-9 ||
          pr.gap < 0.3) {
        ++mismatches;
      }
      ++pairs_checked;
    }
    for (const auto& [i, ret] : truth) {
      const double spread = *std::max_element(ret.begin(), ret.end()) -
                            *std::min_element(ret.begin(), ret.end());
      if ((spread >= 0.3) != (paired.count(i) == 1)) ++mismatches;
    }
  }
  return {mismatches == 0 && worst <= 1e-9,
          "200 tiny worlds, " + std::to_string(origins) + " states, " +
              std::to_string(pairs_checked) + " pairs, " + std::to_string(mismatches) +
              " mismatches, worst return deviation " + fmt("%.2e", worst)};
}

// --- 7-9: trend reproduction ---------------------------------------------

struct Trends {
  std::map<std::string, EvalReport> mode;
  std::map<std::string, EvalReport> preset;
};

Trends run_comparison(const ExperimentConfig& cfg) {
  cmd_gen_world(cfg);
  Trends t;
  for (const auto& row : cmd_compare(cfg, schedule_modes(), combination_presets())) {
    (row.kind == "mode" ? t.mode : t.preset)[row.name] = row.dev;
  }
  return t;
}

Outcome schedule_trend(const Trends& t) {
  const double td = t.mode.at("time_dynamic").em, ts = t.mode.at("two_stage").em,
               nr = t.mode.at("no_reward").em;
  return {td >= ts && ts >= nr && td - nr >= 0.05,
          "dev EM time_dynamic " + fmt("%.3f", td) + ", two_stage " + fmt("%.3f", ts) +
              ", no_reward " + fmt("%.3f", nr) + " (need td >= ts >= nr and td - nr >= 0.05)"};
}

Outcome efficiency_trend(const Trends& t) {
  const auto& full = t.preset.at("full");
  const auto& explore = t.preset.at("exploration_heavy");
  double best_other = 0.0;
  std::string ems;
  for (const auto& [name, r] : t.preset) {
    ems += " " + name + "=" + fmt("%.3f", r.em);
    if (name != "full") best_other = std::max(best_other, r.em);
  }
  return {explore.avg_steps > full.avg_steps && full.em >= best_other,
          "avg steps exploration_heavy " + fmt("%.3f", explore.avg_steps) + " vs full " +
              fmt("%.3f", full.avg_steps) + "; EM" + ems};
}

Outcome refusal_trend(const Trends& t) {
  const double full = t.preset.at("full").refusal_accuracy;
  const double nr = t.preset.at("no_reward").refusal_accuracy;
  return {full - nr >= 0.10, "refusal accuracy full " + fmt("%.3f", full) + " vs no_reward " +
                                 fmt("%.3f", nr) + " (need +0.10)"};
}

// --- 10: determinism -----------------------------------------------------

Outcome determinism(const ExperimentConfig& base) {
  ExperimentConfig a = base, b = base;
  a.world_dir = b.world_dir = base.resolved_world_dir();
  a.out_dir = base.out_dir / "determinism_a";
  b.out_dir = base.out_dir / "determinism_b";
  cmd_train(a);
  cmd_train(b);
  std::string detail;
  bool same = true;
  for (const char* f : {"metrics.csv", "trajectories.jsonl"}) {
    const std::string x = read_file(a.out_dir / f), y = read_file(b.out_dir / f);
    const bool eq = x == y && !x.empty();
    same = same && eq;
    detail += std::string(detail.empty() ? "" : ", ") + f + (eq ? " identical (" : " DIFFERS (") +
              std::to_string(x.size()) + " bytes)";
  }
  return {same, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path;
  std::string work_dir = "acceptance_runs";
  std::vector<int> known_red;
  app.add_option("config", config_path, "Experiment config for the trend criteria")->required();
  app.add_option("--work-dir", work_dir, "Where runs are written");
  app.add_option("--known-red", known_red, "Criteria expected to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  cfg.out_dir = work_dir;
  cfg.world_dir.clear();
  fs::remove_all(cfg.out_dir);

  const std::set<int> expected_red(known_red.begin(), known_red.end());
  int unexpected = 0;
  Trends trends;
  bool trends_ok = false;
  std::string trends_error;

  std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, weights_table},
      {2, reward_table},
      {3, loss_constants},
      {4, gradient_checks},
      {5, return_oracle},
      {6, pair_oracle},
      {7, [&] { return schedule_trend(trends); }},
      {8, [&] { return efficiency_trend(trends); }},
      {9, [&] { return refusal_trend(trends); }},
      {10, [&] { return determinism(cfg); }},
  };
  for (auto& [id, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    if (id == 7) {
      try {
        trends = run_comparison(cfg);
        trends_ok = true;
      } catch (const std::exception& e) {
        trends_error = e.what();
      }
    }
    Outcome o;
    if (id >= 7 && id <= 9 && !trends_ok) {
      o = {false, "comparison failed: " + trends_error};
    } else {
      try {
        o = fn();
      } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
      }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool red_ok = expected_red.count(id) != 0;
    std::string note;
    if (!o.pass && red_ok) note = " [known red]";
    if (o.pass && red_ok) note = " [listed as known red but passed]";
    if (!o.pass && !red_ok) ++unexpected;
    std::printf("criterion %d: %s - %s (%.1fs)%s\n", id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, note.c_str());
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
