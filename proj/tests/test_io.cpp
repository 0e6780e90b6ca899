#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "evorag/io.hpp"

using namespace evorag;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evorag_test_io_" + name);
  fs::remove_all(p);
  return p;
}

World small_world() {
  WorldConfig wc;
  wc.n_questions = 15;
  return generate_world(wc);
}

}  // namespace

TEST_CASE("doubles print in round-trip form") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e21, 0.0, 123456789.125}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("world JSONL round-trips") {
  const World w = small_world();
  const std::string text = world_to_jsonl(w);
  const World back = world_from_jsonl(text, w.config);
  CHECK(back.questions == w.questions);
  CHECK(back.corpus.documents() == w.corpus.documents());
  CHECK(world_to_jsonl(back) == text);
  CHECK_THROWS_AS(world_from_jsonl("{\"record\": \"document\"}\n", w.config), std::invalid_argument);
  CHECK_THROWS_AS(world_from_jsonl("", w.config), std::invalid_argument);
}

TEST_CASE("saved worlds are hash-checked") {
  const World w = small_world();
  const fs::path dir = scratch("world");
  const std::string hash = save_world(w, dir);
  CHECK(hash == content_hash(world_to_jsonl(w)));
  CHECK(world_hash(dir) == hash);
  CHECK(load_world(dir).questions == w.questions);
  write_file_atomic(world_files(dir).records, world_to_jsonl(w) + "\n");
  CHECK_THROWS_AS(load_world(dir), std::runtime_error);
  CHECK_THROWS_AS(load_world(scratch("missing")), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("policy and reward-model parameters round-trip") {
  Rng rng(1);
  PolicyParams p;
  for (int i = 0; i < kFeatureDim; ++i) p.weights(i) = rng.uniform() - 0.5;
  p.version = 4;
  const PolicyParams pb = policy_from_json(Json::parse(to_json(p).dump()));
  CHECK(pb.weights == p.weights);
  CHECK(pb.version == 4);
  Json broken = to_json(p);
  broken["weights"].erase("bias");
  CHECK_THROWS_AS(policy_from_json(broken), std::invalid_argument);

  for (int heads : {1, kRmHeads}) {
    RmParams rm = RmParams::zeros(heads, 9);
    for (int i = 0; i < rm.weights.size(); ++i) rm.weights.data()[i] = rng.uniform();
    const RmParams back = reward_model_from_json(Json::parse(to_json(rm).dump()));
    CHECK(back.weights == rm.weights);
    CHECK(back.bias == rm.bias);
  }
}

TEST_CASE("checkpoints round-trip and reject other formats") {
  CheckpointFile c;
  c.checkpoint.policy = prior_policy(0.5);
  c.checkpoint.rm = RmParams::zeros(kRmHeads, 4);
  c.checkpoint.stage = Stage::Refinement;
  c.checkpoint.cycle = 3;
  c.checkpoint.dev.em = 0.25;
  c.checkpoint.dev.n_answerable = 4;
  c.schedule.mode = ScheduleMode::TwoStageFixed;
  c.schedule.t_max = 9;
  c.policy.temperature = 0.5;
  c.dev_question_ids = {1, 4};
  c.world_hash = "abc";
  const Json j = to_json(c);
  const CheckpointFile back = checkpoint_from_json(Json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(back.checkpoint.cycle == 3);
  CHECK(back.schedule.mode == ScheduleMode::TwoStageFixed);
  Json other = j;
  other["format"] = kCheckpointFormat + 1;
  CHECK_THROWS_AS(checkpoint_from_json(other), std::invalid_argument);
}

TEST_CASE("trajectory records carry the logged fields") {
  const World w = small_world();
  RolloutSettings rs;
  const Trajectory t = rollout(prior_policy(1.0), w.questions[0], w, rs, 2, 0);
  const Json j = Json::parse(trajectory_to_json(t, w.questions[0]).dump());
  REQUIRE(j["steps"].size() == t.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const Json& s = j["steps"][i];
    CHECK(s["t"] == t.steps[i].state.t);
    CHECK(s["aggregate"].get<double>() == t.steps[i].aggregate);
    CHECK(reward_from_json(s["reward"]) == t.steps[i].reward);
    CHECK(weights_from_json(s["weights"]) == t.steps[i].weights);
    CHECK(s["doc_ids"].get<std::vector<int>>() == t.steps[i].retrieved);
  }
  CHECK(j["question_id"] == t.question_id);
}

TEST_CASE("metrics rows match the header") {
  CycleRecord r;
  r.cycle = 2;
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(count(csv_header_metrics()) == count(csv_row(r, "time_dynamic", "full")));
}

TEST_CASE("atomic writes create parents and reads fail loudly") {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "a" / "b.txt", "hello");
  CHECK(read_file(dir / "a" / "b.txt") == "hello");
  write_file_atomic(dir / "a" / "b.txt", "bye");
  CHECK(read_file(dir / "a" / "b.txt") == "bye");
  CHECK_THROWS_AS(read_file(dir / "nope"), std::runtime_error);
  fs::remove_all(dir);
}
