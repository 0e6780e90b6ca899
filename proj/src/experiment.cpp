#include "evorag/experiment.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

#include "evorag/metrics.hpp"

namespace evorag {

namespace fs = std::filesystem;

namespace {

// WeightVector indices.
enum : int { kBeta = 0, kLambda, kGamma, kDelta, kRho, kEta, kKappa };

struct ComponentAlias {
  std::string_view long_name;
  std::string_view short_name;
  int weight;
};

constexpr std::array<ComponentAlias, 7> kComponents = {{
    {"retrieval_bonus", "ret", kBeta},
    {"action_penalty", "act", kLambda},
    {"overlap", "dup", kGamma},
    {"backtrack", "bt", kDelta},
    {"refusal", "ref", kRho},
    {"step_cost", "step", kEta},
    {"answer_correctness", "ans", kKappa},
}};

Preset keep_only(std::string name, std::initializer_list<int> weights) {
  Preset p{std::move(name), false, {}};
  for (int w : weights) p.keep[static_cast<std::size_t>(w)] = true;
  return p;
}

}  // namespace

Preset parse_preset(std::string_view name) {
  if (name == "full") return keep_only("full", {kBeta, kLambda, kGamma, kDelta, kRho, kEta, kKappa});
  if (name == "no_reward") {
    Preset p = keep_only("no_reward", {kBeta, kLambda, kGamma, kDelta, kRho, kEta, kKappa});
    p.no_reward = true;
    return p;
  }
  if (name == "best2") return keep_only("best2", {kDelta, kKappa});
  if (name == "best3") return keep_only("best3", {kDelta, kKappa, kGamma});
  if (name == "exploration_heavy") return keep_only("exploration_heavy", {kBeta, kGamma});
  if (name == "efficiency_heavy") return keep_only("efficiency_heavy", {kDelta, kEta});
  constexpr std::string_view kSingle = "single:";
  if (name.substr(0, kSingle.size()) == kSingle) {
    const std::string_view c = name.substr(kSingle.size());
    for (const auto& alias : kComponents) {
      if (c == alias.long_name || c == alias.short_name) {
        return keep_only("single:" + std::string(alias.long_name), {alias.weight});
      }
    }
    throw std::invalid_argument("unknown reward component '" + std::string(c) + "' in preset");
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> combination_presets() {
  return {"no_reward", "best2", "best3", "exploration_heavy", "efficiency_heavy", "full"};
}

std::vector<std::string> schedule_modes() { return {"no_reward", "two_stage", "time_dynamic"}; }

// --- config ---------------------------------------------------------------

void ExperimentConfig::validate() const {
  try {
    world.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (anchors_name != "table" && anchors_name != "swapped") {
    throw std::invalid_argument("schedule.anchors must be \"table\" or \"swapped\"");
  }
  (void)parse_preset(preset);
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
  effective_train_config(*this).validate();
}

fs::path ExperimentConfig::resolved_world_dir() const {
  return world_dir.empty() ? out_dir / "world" : world_dir;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  world.seed = s;
  train.seed = s;
}

namespace {

using Setter = std::function<void(ExperimentConfig&, const Json&, const std::string&)>;

template <typename T>
T as(const Json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw std::invalid_argument(key + ": expected true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw std::invalid_argument(key + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw std::invalid_argument(key + ": expected a non-negative integer");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw std::invalid_argument(key + ": expected a number");
  } else {
    if (!v.is_string()) throw std::invalid_argument(key + ": expected a string");
  }
  return v.get<T>();
}

template <typename T, typename Field>
Setter field(Field f) {
  return [f](ExperimentConfig& c, const Json& v, const std::string& key) { f(c) = as<T>(v, key); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = [] {
    std::vector<std::pair<std::string, Setter>> t;
    auto add = [&](std::string key, Setter s) { t.emplace_back(std::move(key), std::move(s)); };
    add("seed", [](ExperimentConfig& c, const Json& v, const std::string& k) {
      c.set_seed(as<std::uint64_t>(v, k));
    });
    add("preset", field<std::string>([](ExperimentConfig& c) -> std::string& { return c.preset; }));
    add("out_dir", [](ExperimentConfig& c, const Json& v, const std::string& k) {
      c.out_dir = as<std::string>(v, k);
    });
    add("world_dir", [](ExperimentConfig& c, const Json& v, const std::string& k) {
      c.world_dir = as<std::string>(v, k);
    });
    add("world.n_questions", field<int>([](ExperimentConfig& c) -> int& { return c.world.n_questions; }));
    add("world.hops_min", field<int>([](ExperimentConfig& c) -> int& { return c.world.hops_min; }));
    add("world.hops_max", field<int>([](ExperimentConfig& c) -> int& { return c.world.hops_max; }));
    add("world.distractors_per_question",
        field<int>([](ExperimentConfig& c) -> int& { return c.world.distractors_per_question; }));
    add("world.unanswerable_fraction",
        field<double>([](ExperimentConfig& c) -> double& { return c.world.unanswerable_fraction; }));
    add("world.top_k", field<int>([](ExperimentConfig& c) -> int& { return c.world.top_k; }));
    add("world.vocab_size", field<int>([](ExperimentConfig& c) -> int& { return c.world.vocab_size; }));
    add("world.embed_dim", field<int>([](ExperimentConfig& c) -> int& { return c.world.embed_dim; }));
    add("schedule.t_max", field<int>([](ExperimentConfig& c) -> int& { return c.train.schedule.t_max; }));
    add("schedule.mode", [](ExperimentConfig& c, const Json& v, const std::string& k) {
      try {
        c.train.schedule.mode = parse_schedule_mode(as<std::string>(v, k));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(k + ": " + e.what());
      }
    });
    add("schedule.anchors", [](ExperimentConfig& c, const Json& v, const std::string& k) {
      c.anchors_name = as<std::string>(v, k);
      if (c.anchors_name == "table") {
        c.train.schedule.anchors = default_anchors();
      } else if (c.anchors_name == "swapped") {
        c.train.schedule.anchors = swapped_lambda_gamma_anchors();
      } else {
        throw std::invalid_argument(k + ": expected \"table\" or \"swapped\"");
      }
    });
    for (int w = 0; w < WeightVector::kSize; ++w) {
      for (std::string_view which : {"start", "mid", "end"}) {
        add("anchor." + std::string(kWeightNames[w]) + "." + std::string(which),
            [w, which](ExperimentConfig& c, const Json& v, const std::string& k) {
              auto& a = c.train.schedule.anchors;
              WeightVector& target = which == "start" ? a.start : (which == "mid" ? a.mid : a.end);
              target[w] = as<double>(v, k);
              if (!(target[w] >= 0.0)) throw std::invalid_argument(k + ": must be >= 0");
            });
      }
    }
    add("reward.step_cost", field<double>([](ExperimentConfig& c) -> double& { return c.train.reward.step_cost; }));
    add("reward.tau_dup", field<double>([](ExperimentConfig& c) -> double& { return c.train.reward.tau_dup; }));
    add("train.episodes_per_cycle",
        field<int>([](ExperimentConfig& c) -> int& { return c.train.episodes_per_cycle; }));
    add("train.rollouts", field<int>([](ExperimentConfig& c) -> int& { return c.train.rollouts; }));
    add("train.rm_lr", field<double>([](ExperimentConfig& c) -> double& { return c.train.rm_lr; }));
    add("train.rm_batch_size", field<int>([](ExperimentConfig& c) -> int& { return c.train.rm_batch_size; }));
    add("train.rm_heads", field<int>([](ExperimentConfig& c) -> int& { return c.train.rm_heads; }));
    add("train.rm_per_component",
        field<bool>([](ExperimentConfig& c) -> bool& { return c.train.rm_per_component; }));
    add("train.rm_embed_dim", field<int>([](ExperimentConfig& c) -> int& { return c.train.encoder.embed_dim; }));
    add("train.delta_rm", field<double>([](ExperimentConfig& c) -> double& { return c.train.delta_rm; }));
    add("train.delta_policy", field<double>([](ExperimentConfig& c) -> double& { return c.train.delta_policy; }));
    add("train.max_cycles", field<int>([](ExperimentConfig& c) -> int& { return c.train.max_cycles; }));
    add("train.early_stop_patience",
        field<int>([](ExperimentConfig& c) -> int& { return c.train.early_stop_patience; }));
    add("train.dev_fraction", field<double>([](ExperimentConfig& c) -> double& { return c.train.dev_fraction; }));
    add("dpo.beta", field<double>([](ExperimentConfig& c) -> double& { return c.train.dpo.beta; }));
    add("dpo.learning_rate", field<double>([](ExperimentConfig& c) -> double& { return c.train.dpo.learning_rate; }));
    add("dpo.epochs", field<int>([](ExperimentConfig& c) -> int& { return c.train.dpo.epochs; }));
    add("dpo.batch_size", field<int>([](ExperimentConfig& c) -> int& { return c.train.dpo.batch_size; }));
    add("policy.temperature", field<double>([](ExperimentConfig& c) -> double& { return c.train.policy.temperature; }));
    add("policy.prior_strength",
        field<double>([](ExperimentConfig& c) -> double& { return c.train.prior_strength; }));
    add("policy.max_search_candidates",
        field<int>([](ExperimentConfig& c) -> int& { return c.train.policy.max_search_candidates; }));
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

ExperimentConfig parse_config(const Json& flat) {
  if (!flat.is_object()) throw std::invalid_argument("config must be a JSON object");
  const auto& table = setters();
  auto find = [&](const std::string& key) -> const Setter* {
    for (const auto& [k, s] : table) {
      if (k == key) return &s;
    }
    return nullptr;
  };
  for (const auto& [key, _] : flat.items()) {
    if (!find(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  ExperimentConfig cfg;
  // The anchor table comes first so that individual anchor cells override it.
  if (flat.contains("schedule.anchors")) {
    (*find("schedule.anchors"))(cfg, flat.at("schedule.anchors"), "schedule.anchors");
  }
  for (const auto& [key, value] : flat.items()) {
    if (key != "schedule.anchors") (*find(key))(cfg, value, key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

TrainConfig effective_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  const Preset p = parse_preset(cfg.preset);
  if (p.no_reward) {
    t.schedule.mode = ScheduleMode::NoReward;
  } else {
    t.schedule.anchors = mask_components(t.schedule.anchors, p.keep);
  }
  return t;
}

// --- commands -------------------------------------------------------------

std::string cmd_gen_world(const ExperimentConfig& cfg) {
  cfg.validate();
  WorldConfig wc = cfg.world;
  wc.seed = cfg.seed;
  return save_world(generate_world(wc), cfg.resolved_world_dir());
}

namespace {

CheckpointFile checkpoint_file(const Checkpoint& cp, const TrainConfig& t,
                               const QuestionSplit& split, const std::string& hash) {
  return {cp, t.schedule, t.policy, t.reward, split.dev, hash};
}

}  // namespace

TrainRun cmd_train(const ExperimentConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const fs::path world_dir = cfg.resolved_world_dir();
  TrainRun run;
  run.world_hash = world_hash(world_dir);
  const World world = load_world(world_dir);
  run.config = effective_train_config(cfg);

  const std::string mode(to_string(run.config.schedule.mode));
  std::string trajectories;
  std::string pairs;
  TrainObserver observer;
  if (options.write_trajectories) {
    observer.on_episode = [&](const Trajectory& traj, const CycleRecord&) {
      trajectories += trajectory_to_json(traj, world.question(traj.question_id)).dump();
      trajectories += '\n';
    };
  }
  if (options.write_pairs) {
    observer.on_pairs = [&](std::span<const PreferencePair> ps, const CycleRecord& rec) {
      for (const auto& p : ps) {
        pairs += pair_to_json(p, rec).dump();
        pairs += '\n';
      }
    };
  }
  run.result = run_curriculum(run.config, world, observer);

  std::string metrics = csv_header_metrics();
  for (const auto& rec : run.result.history()) metrics += csv_row(rec, mode, cfg.preset);
  write_file_atomic(cfg.out_dir / "metrics.csv", metrics);
  if (options.write_trajectories) write_file_atomic(cfg.out_dir / "trajectories.jsonl", trajectories);
  if (options.write_pairs) write_file_atomic(cfg.out_dir / "pairs.jsonl", pairs);

  const auto& split = run.result.split;
  write_file_atomic(cfg.out_dir / "checkpoints" / "discovery_best.json",
                    to_json(checkpoint_file(run.result.discovery.best, run.config, split,
                                            run.world_hash))
                            .dump(1) +
                        "\n");
  write_file_atomic(cfg.out_dir / "checkpoints" / "refinement_best.json",
                    to_json(checkpoint_file(run.result.refinement.best, run.config, split,
                                            run.world_hash))
                            .dump(1) +
                        "\n");
  const Checkpoint& best = run.result.final_checkpoint();
  const Json report{{"schedule_mode", mode},
                    {"preset", cfg.preset},
                    {"seed", cfg.seed},
                    {"world_hash", run.world_hash},
                    {"discovery_cycles", run.result.discovery.history.size()},
                    {"refinement_cycles", run.result.refinement.history.size()},
                    {"best_stage", to_string(best.stage)},
                    {"best_cycle", best.cycle},
                    {"dev", to_json(best.dev)}};
  write_file_atomic(cfg.out_dir / "report.json", report.dump(2) + "\n");
  return run;
}

std::vector<ComparisonRow> cmd_compare(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& modes,
                                       const std::vector<std::string>& presets) {
  cfg.validate();
  for (const auto& m : modes) (void)parse_schedule_mode(m);
  for (const auto& p : presets) (void)parse_preset(p);

  struct Cached {
    EvalReport dev;
    std::string hash;
    int cycles = 0;
    std::vector<std::string> step_rows;  // per dev episode, without kind/name
  };
  std::map<std::pair<std::string, std::string>, Cached> cache;  // (mode, preset)
  std::string steps_csv = "kind,name,question_id,answerable,steps,outcome,em\n";

  auto run_one = [&](const std::string& kind, const std::string& name, ExperimentConfig c) {
    const TrainConfig eff = effective_train_config(c);
    const std::string mode(to_string(eff.schedule.mode));
    const auto key = std::make_pair(mode, c.preset);
    c.out_dir = cfg.out_dir / "runs" / (kind + "_" + name);
    c.world_dir = cfg.resolved_world_dir();
    auto it = cache.find(key);
    if (it == cache.end()) {
      const TrainRun run = cmd_train(c, {false, false});
      const Checkpoint& best = run.result.final_checkpoint();
      Cached entry{best.dev, run.world_hash,
                   static_cast<int>(run.result.discovery.history.size() +
                                    run.result.refinement.history.size()),
                   {}};
      // Per-episode step counts of the selected policy on the dev split.
      const World world = load_world(c.world_dir);
      std::vector<Trajectory> episodes;
      evaluate(best.policy, world, run.result.split.dev,
               {eff.schedule, Stage::Refinement, eff.reward, eff.policy, true, 0}, &episodes);
      for (const auto& e : episodes) {
        const QuestionInstance& q = world.question(e.question_id);
        const std::string outcome =
            e.truncated ? "truncated" : std::string(to_string(e.steps.back().action().type));
        const int em = e.final_answer ? score_answer(*e.final_answer, q.gold_answer).em : 0;
        entry.step_rows.push_back(std::to_string(q.question_id) + ',' +
                                  (q.answerable ? "1" : "0") + ',' + std::to_string(e.length()) +
                                  ',' + outcome + ',' + std::to_string(em));
      }
      it = cache.emplace(key, std::move(entry)).first;
    }
    for (const auto& r : it->second.step_rows) steps_csv += kind + ',' + name + ',' + r + '\n';
    return ComparisonRow{kind, name, mode, c.preset, it->second.dev, it->second.hash,
                         it->second.cycles};
  };

  std::vector<ComparisonRow> rows;
  for (const auto& m : modes) {
    ExperimentConfig c = cfg;
    c.train.schedule.mode = parse_schedule_mode(m);
    if (c.preset == "no_reward") c.preset = "full";
    if (c.train.schedule.mode == ScheduleMode::NoReward) c.preset = "no_reward";
    rows.push_back(run_one("mode", m, c));
  }
  for (const auto& p : presets) {
    ExperimentConfig c = cfg;
    c.preset = p;
    rows.push_back(run_one("preset", p, c));
  }

  std::string csv = "kind,name,schedule_mode,preset,dev_em,dev_f1,avg_steps,refusal_acc,"
                    "n_answerable,n_unanswerable,cycles,world_hash\n";
  for (const auto& r : rows) {
    csv += r.kind + ',' + r.name + ',' + r.schedule_mode + ',' + r.preset + ',' +
           format_double(r.dev.em) + ',' + format_double(r.dev.f1) + ',' +
           format_double(r.dev.avg_steps) + ',' + format_double(r.dev.refusal_accuracy) + ',' +
           std::to_string(r.dev.n_answerable) + ',' + std::to_string(r.dev.n_unanswerable) + ',' +
           std::to_string(r.cycles) + ',' + r.world_hash + '\n';
  }
  write_file_atomic(cfg.out_dir / "comparison.csv", csv);
  write_file_atomic(cfg.out_dir / "step_distribution.csv", steps_csv);
  return rows;
}

EvalReport cmd_eval(const fs::path& checkpoint_path, const fs::path& world_dir,
                    const fs::path& report_path) {
  CheckpointFile cp;
  try {
    cp = checkpoint_from_json(Json::parse(read_file(checkpoint_path)));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("corrupt checkpoint " + checkpoint_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("corrupt checkpoint " + checkpoint_path.string() + ": " + e.what());
  }
  const std::string hash = world_hash(world_dir);
  if (!cp.world_hash.empty() && cp.world_hash != hash) {
    throw std::runtime_error("checkpoint was trained on world " + cp.world_hash + ", not " + hash);
  }
  const World world = load_world(world_dir);
  std::vector<int> ids = cp.dev_question_ids;
  if (ids.empty()) {
    for (const auto& q : world.questions) ids.push_back(q.question_id);
  }
  const EvalReport r = evaluate(cp.checkpoint.policy, world, ids,
                                {cp.schedule, cp.checkpoint.stage, cp.reward, cp.policy, true, 0});
  if (!report_path.empty()) write_file_atomic(report_path, to_json(r).dump(2) + "\n");
  return r;
}

std::string cmd_dump_weights(const ExperimentConfig& cfg) {
  cfg.validate();
  const TrainConfig t = effective_train_config(cfg);
  std::string csv = "schedule_mode,stage,t,p";
  for (auto name : kWeightNames) csv += "," + std::string(name);
  csv += '\n';
  for (Stage stage : {Stage::Discovery, Stage::Refinement}) {
    for (int step = 0; step <= t.schedule.t_max; ++step) {
      const WeightVector w = weights_at(t.schedule, stage, step);
      csv += std::string(to_string(t.schedule.mode)) + ',' + std::string(to_string(stage)) + ',' +
             std::to_string(step) + ',' + format_double(progress(step, t.schedule.t_max));
      for (int i = 0; i < WeightVector::kSize; ++i) csv += ',' + format_double(w[i]);
      csv += '\n';
    }
  }
  return csv;
}

std::string format_report(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "EM %.4f  F1 %.4f  avg_steps %.3f  refusal_acc %.4f  "
                "(answerable %d, unanswerable %d, total %d)",
                r.em, r.f1, r.avg_steps, r.refusal_accuracy, r.n_answerable, r.n_unanswerable,
                r.total());
  return buf;
}

}  // namespace evorag
