#include "evorag/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evorag/metrics.hpp"

namespace evorag {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " +
                               ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move " + tmp.string() + " into place at " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string content_hash(std::string_view content) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
  return buf;
}

namespace {

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw std::invalid_argument(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

Json to_json(const WeightVector& w) {
  Json j = Json::object();
  for (int i = 0; i < WeightVector::kSize; ++i) j[std::string(kWeightNames[i])] = w[i];
  return j;
}

Json to_json(const RewardVector& r) {
  Json j = Json::object();
  for (int i = 0; i < RewardVector::kSize; ++i) j[std::string(kRewardNames[i])] = r[i];
  return j;
}

Json anchors_to_json(const WeightAnchors& a) {
  return Json{{"start", to_json(a.start)}, {"mid", to_json(a.mid)}, {"end", to_json(a.end)}};
}

WeightAnchors anchors_from_json(const Json& j) {
  return {weights_from_json(get_field<Json>(j, "start")),
          weights_from_json(get_field<Json>(j, "mid")),
          weights_from_json(get_field<Json>(j, "end"))};
}

}  // namespace

// --- world ---------------------------------------------------------------

Json to_json(const WorldConfig& c) {
  return Json{{"n_questions", c.n_questions},
              {"hops_min", c.hops_min},
              {"hops_max", c.hops_max},
              {"distractors_per_question", c.distractors_per_question},
              {"unanswerable_fraction", c.unanswerable_fraction},
              {"top_k", c.top_k},
              {"vocab_size", c.vocab_size},
              {"embed_dim", c.embed_dim},
              {"seed", c.seed}};
}

WorldConfig world_config_from_json(const Json& j) {
  WorldConfig c;
  c.n_questions = get_field<int>(j, "n_questions");
  c.hops_min = get_field<int>(j, "hops_min");
  c.hops_max = get_field<int>(j, "hops_max");
  c.distractors_per_question = get_field<int>(j, "distractors_per_question");
  c.unanswerable_fraction = get_field<double>(j, "unanswerable_fraction");
  c.top_k = get_field<int>(j, "top_k");
  c.vocab_size = get_field<int>(j, "vocab_size");
  c.embed_dim = get_field<int>(j, "embed_dim");
  c.seed = get_field<std::uint64_t>(j, "seed");
  c.validate();
  return c;
}

std::string world_to_jsonl(const World& world) {
  std::string out;
  for (const auto& d : world.corpus.documents()) {
    out += Json{{"record", "document"}, {"doc_id", d.doc_id}, {"title", d.title}, {"text", d.text}}
               .dump();
    out += '\n';
  }
  for (const auto& q : world.questions) {
    out += Json{{"record", "question"},
                {"question_id", q.question_id},
                {"question_text", q.question_text},
                {"gold_answer", q.gold_answer},
                {"gold_doc_ids", q.gold_doc_ids},
                {"answerable", q.answerable},
                {"hops", q.hops}}
               .dump();
    out += '\n';
  }
  return out;
}

World world_from_jsonl(std::string_view jsonl, const WorldConfig& cfg) {
  std::vector<Document> docs;
  std::vector<QuestionInstance> questions;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      const auto kind = get_field<std::string>(j, "record");
      if (kind == "document") {
        docs.push_back({get_field<int>(j, "doc_id"), get_field<std::string>(j, "title"),
                        get_field<std::string>(j, "text")});
      } else if (kind == "question") {
        QuestionInstance q;
        q.question_id = get_field<int>(j, "question_id");
        q.question_text = get_field<std::string>(j, "question_text");
        q.gold_answer = get_field<std::string>(j, "gold_answer");
        q.gold_doc_ids = get_field<std::vector<int>>(j, "gold_doc_ids");
        q.answerable = get_field<bool>(j, "answerable");
        q.hops = get_field<int>(j, "hops");
        std::sort(q.gold_doc_ids.begin(), q.gold_doc_ids.end());
        questions.push_back(std::move(q));
      } else {
        throw std::invalid_argument("unknown record kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("world line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("world line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (questions.empty()) throw std::invalid_argument("world file has no question records");
  World w;
  w.config = cfg;
  w.corpus = Corpus(std::move(docs), cfg.embed_dim);
  w.questions = std::move(questions);
  for (const auto& q : w.questions) {
    for (int id : q.gold_doc_ids) {
      if (!w.corpus.contains(id)) {
        throw std::invalid_argument("question " + std::to_string(q.question_id) +
                                    " cites unknown document " + std::to_string(id));
      }
    }
  }
  return w;
}

WorldFiles world_files(const fs::path& dir) {
  return {dir / "world.jsonl", dir / "manifest.json"};
}

std::string save_world(const World& world, const fs::path& dir) {
  const WorldFiles files = world_files(dir);
  const std::string records = world_to_jsonl(world);
  const std::string hash = content_hash(records);
  const Json manifest{{"seed", world.config.seed},
                      {"config", to_json(world.config)},
                      {"documents", world.corpus.size()},
                      {"questions", world.questions.size()},
                      {"content_hash", hash}};
  write_file_atomic(files.records, records);
  write_file_atomic(files.manifest, manifest.dump(2) + "\n");
  return hash;
}

namespace {
Json read_manifest(const fs::path& dir) {
  const WorldFiles files = world_files(dir);
  if (!fs::exists(files.manifest) || !fs::exists(files.records)) {
    throw std::runtime_error("no world found in " + dir.string() + " (run gen-world first)");
  }
  try {
    return Json::parse(read_file(files.manifest));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt world manifest " + files.manifest.string() + ": " + e.what());
  }
}
}  // namespace

World load_world(const fs::path& dir) {
  const Json manifest = read_manifest(dir);
  const std::string records = read_file(world_files(dir).records);
  const auto expected = get_field<std::string>(manifest, "content_hash");
  if (content_hash(records) != expected) {
    throw std::runtime_error("world records in " + dir.string() + " do not match the manifest hash");
  }
  return world_from_jsonl(records, world_config_from_json(get_field<Json>(manifest, "config")));
}

std::string world_hash(const fs::path& dir) {
  return get_field<std::string>(read_manifest(dir), "content_hash");
}

// --- parameters and checkpoints -----------------------------------------

Json to_json(const PolicyParams& p) {
  Json weights = Json::object();
  for (int i = 0; i < kFeatureDim; ++i) weights[std::string(kFeatureNames[i])] = p.weights(i);
  return Json{{"version", p.version}, {"weights", weights}};
}

PolicyParams policy_from_json(const Json& j) {
  PolicyParams p;
  p.version = get_field<std::int64_t>(j, "version");
  const Json weights = get_field<Json>(j, "weights");
  if (!weights.is_object()) throw std::invalid_argument("policy weights must be an object");
  for (const auto& [name, value] : weights.items()) {
    auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
    if (it == kFeatureNames.end()) throw std::invalid_argument("unknown policy feature '" + name + "'");
    if (!value.is_number()) throw std::invalid_argument("policy weight '" + name + "' is not a number");
    p.weights(it - kFeatureNames.begin()) = value.get<double>();
  }
  if (weights.size() != static_cast<std::size_t>(kFeatureDim)) {
    throw std::invalid_argument("policy checkpoint must list all " + std::to_string(kFeatureDim) +
                                " features");
  }
  if (!p.valid()) throw std::invalid_argument("policy weights are not finite");
  return p;
}

Json to_json(const RmParams& rm) {
  Json heads = Json::array();
  for (int k = 0; k < rm.heads(); ++k) {
    const std::string name =
        rm.heads() == RewardVector::kSize ? std::string(kRewardNames[k]) : "total";
    std::vector<double> w(rm.weights.row(k).begin(), rm.weights.row(k).end());
    heads.push_back(Json{{"name", name}, {"bias", rm.bias(k)}, {"weights", w}});
  }
  return Json{{"dim", rm.dim()}, {"heads", heads}};
}

RmParams reward_model_from_json(const Json& j) {
  const int dim = get_field<int>(j, "dim");
  const Json heads = get_field<Json>(j, "heads");
  if (!heads.is_array() || (heads.size() != 1 && heads.size() != RewardVector::kSize)) {
    throw std::invalid_argument("reward model must have 1 or 7 heads");
  }
  RmParams rm = RmParams::zeros(static_cast<int>(heads.size()), dim);
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const auto w = get_field<std::vector<double>>(heads[k], "weights");
    if (w.size() != static_cast<std::size_t>(dim)) {
      throw std::invalid_argument("reward-model head " + std::to_string(k) + " has " +
                                  std::to_string(w.size()) + " weights, expected " +
                                  std::to_string(dim));
    }
    for (int d = 0; d < dim; ++d) rm.weights(static_cast<Eigen::Index>(k), d) = w[static_cast<std::size_t>(d)];
    rm.bias(static_cast<Eigen::Index>(k)) = get_field<double>(heads[k], "bias");
  }
  if (!rm.valid()) throw std::invalid_argument("reward-model parameters are not finite");
  return rm;
}

Json to_json(const EvalReport& r) {
  return Json{{"em", r.em},
              {"f1", r.f1},
              {"avg_steps", r.avg_steps},
              {"refusal_accuracy", r.refusal_accuracy},
              {"n_answerable", r.n_answerable},
              {"n_unanswerable", r.n_unanswerable},
              {"n_total", r.total()}};
}

EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  r.em = get_field<double>(j, "em");
  r.f1 = get_field<double>(j, "f1");
  r.avg_steps = get_field<double>(j, "avg_steps");
  r.refusal_accuracy = get_field<double>(j, "refusal_accuracy");
  r.n_answerable = get_field<int>(j, "n_answerable");
  r.n_unanswerable = get_field<int>(j, "n_unanswerable");
  return r;
}

Json to_json(const CheckpointFile& c) {
  const Checkpoint& cp = c.checkpoint;
  return Json{{"format", kCheckpointFormat},
              {"stage", to_string(cp.stage)},
              {"cycle", cp.cycle},
              {"dev", to_json(cp.dev)},
              {"schedule",
               {{"mode", to_string(c.schedule.mode)},
                {"t_max", c.schedule.t_max},
                {"anchors", anchors_to_json(c.schedule.anchors)}}},
              {"policy_config",
               {{"temperature", c.policy.temperature},
                {"max_search_candidates", c.policy.max_search_candidates}}},
              {"reward", {{"step_cost", c.reward.step_cost}, {"tau_dup", c.reward.tau_dup}}},
              {"world_hash", c.world_hash},
              {"dev_question_ids", c.dev_question_ids},
              {"policy", to_json(cp.policy)},
              {"reward_model", to_json(cp.rm)}};
}

CheckpointFile checkpoint_from_json(const Json& j) {
  if (get_field<int>(j, "format") != kCheckpointFormat) {
    throw std::invalid_argument("unsupported checkpoint format");
  }
  CheckpointFile c;
  c.checkpoint.stage = parse_stage(get_field<std::string>(j, "stage"));
  c.checkpoint.cycle = get_field<int>(j, "cycle");
  c.checkpoint.dev = eval_report_from_json(get_field<Json>(j, "dev"));
  const Json s = get_field<Json>(j, "schedule");
  c.schedule.mode = parse_schedule_mode(get_field<std::string>(s, "mode"));
  c.schedule.t_max = get_field<int>(s, "t_max");
  c.schedule.anchors = anchors_from_json(get_field<Json>(s, "anchors"));
  if (c.schedule.t_max < 1) throw std::invalid_argument("checkpoint t_max must be >= 1");
  const Json pc = get_field<Json>(j, "policy_config");
  c.policy.temperature = get_field<double>(pc, "temperature");
  c.policy.max_search_candidates = get_field<int>(pc, "max_search_candidates");
  if (!(c.policy.temperature > 0.0) || c.policy.max_search_candidates < 1) {
    throw std::invalid_argument("checkpoint policy config is invalid");
  }
  const Json rw = get_field<Json>(j, "reward");
  c.reward.step_cost = get_field<double>(rw, "step_cost");
  c.reward.tau_dup = get_field<double>(rw, "tau_dup");
  c.world_hash = get_field<std::string>(j, "world_hash");
  c.dev_question_ids = get_field<std::vector<int>>(j, "dev_question_ids");
  c.checkpoint.policy = policy_from_json(get_field<Json>(j, "policy"));
  c.checkpoint.rm = reward_model_from_json(get_field<Json>(j, "reward_model"));
  return c;
}

// --- logs ----------------------------------------------------------------

Json trajectory_to_json(const Trajectory& traj, const QuestionInstance& question) {
  Json steps = Json::array();
  for (const StepRecord& s : traj.steps) {
    const Action& a = s.action();
    Json step{{"t", s.state.t}, {"action_type", to_string(a.type)}};
    if (a.type == ActionType::Search) step["query"] = a.text;
    if (a.type == ActionType::Answer) step["answer"] = a.text;
    step["doc_ids"] = s.retrieved;
    step["reward"] = to_json(s.reward);
    step["weights"] = to_json(s.weights);
    step["aggregate"] = s.aggregate;
    step["log_prob"] = s.log_prob;
    steps.push_back(std::move(step));
  }
  const MetricPair m = score_answer(traj.final_answer.value_or(""), question.gold_answer);
  return Json{{"episode_id", traj.episode_id},
              {"question_id", traj.question_id},
              {"stage", to_string(traj.stage)},
              {"schedule_mode", to_string(traj.mode)},
              {"steps", steps},
              {"final_answer", traj.final_answer ? Json(*traj.final_answer) : Json(nullptr)},
              {"truncated", traj.truncated},
              {"em", m.em},
              {"f1", m.f1}};
}

RewardVector reward_from_json(const Json& j) {
  RewardVector r;
  r.ret = get_field<double>(j, "ret");
  r.dup = get_field<double>(j, "dup");
  r.bt = get_field<double>(j, "bt");
  r.ref = get_field<double>(j, "ref");
  r.step = get_field<double>(j, "step");
  r.ans = get_field<double>(j, "ans");
  r.act = get_field<double>(j, "act");
  return r;
}

WeightVector weights_from_json(const Json& j) {
  WeightVector w;
  for (int i = 0; i < WeightVector::kSize; ++i) {
    w[i] = get_field<double>(j, std::string(kWeightNames[i]).c_str());
  }
  return w;
}

namespace {
Json action_json(const Action& a) {
  Json j{{"type", to_string(a.type)}};
  if (!a.text.empty()) j["text"] = a.text;
  return j;
}
}  // namespace

Json pair_to_json(const PreferencePair& pair, const CycleRecord& cycle) {
  return Json{{"stage", to_string(cycle.stage)},
              {"cycle", cycle.cycle},
              {"basis", to_string(pair.basis)},
              {"trajectory_id", pair.positive->origin.trajectory_id},
              {"step_index", pair.positive->origin.step_index},
              {"positive", action_json(pair.positive->action())},
              {"negative", action_json(pair.negative->action())},
              {"positive_score", pair.positive_score},
              {"negative_score", pair.negative_score},
              {"gap", pair.gap}};
}

std::string csv_header_metrics() {
  return "stage,cycle,schedule_mode,preset,episodes,branches,rm_pairs,policy_pairs,rm_loss,"
         "dpo_loss,dpo_epoch_losses,train_return,dev_em,dev_f1,avg_steps,refusal_acc,"
         "policy_version\n";
}

std::string csv_row(const CycleRecord& r, std::string_view schedule_mode, std::string_view preset) {
  std::string curve;
  for (std::size_t i = 0; i < r.dpo_epoch_losses.size(); ++i) {
    if (i) curve += ';';
    curve += format_double(r.dpo_epoch_losses[i]);
  }
  std::string row;
  row += std::string(to_string(r.stage)) + ',' + std::to_string(r.cycle) + ',';
  row += std::string(schedule_mode) + ',' + std::string(preset) + ',';
  row += std::to_string(r.episodes) + ',' + std::to_string(r.branches) + ',';
  row += std::to_string(r.rm_pairs) + ',' + std::to_string(r.policy_pairs) + ',';
  row += (r.rm_loss ? format_double(*r.rm_loss) : "") + ',';
  row += (r.dpo_loss ? format_double(*r.dpo_loss) : "") + ',';
  row += curve + ',' + format_double(r.train_return) + ',';
  row += format_double(r.dev.em) + ',' + format_double(r.dev.f1) + ',';
  row += format_double(r.dev.avg_steps) + ',' + format_double(r.dev.refusal_accuracy) + ',';
  row += std::to_string(r.policy_version) + '\n';
  return row;
}

}  // namespace evorag
