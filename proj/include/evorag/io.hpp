#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evorag/env.hpp"
#include "evorag/policy.hpp"
#include "evorag/preference.hpp"
#include "evorag/reward_model.hpp"
#include "evorag/trainer.hpp"

namespace evorag {

using Json = nlohmann::ordered_json;

/// Writes through a sibling temporary file and renames it into place.
/// Creates missing parent directories. Throws std::runtime_error on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws std::runtime_error when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Hex FNV-1a of `content`; used as the world content hash.
std::string content_hash(std::string_view content);

// --- world ---------------------------------------------------------------

Json to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json(const Json& j);

/// One JSON record per line: documents first (`"record": "document"`), then
/// questions (`"record": "question"`).
std::string world_to_jsonl(const World& world);

/// Rebuilds a world from its JSONL records and config. Throws
/// std::invalid_argument on malformed records or an empty question list.
World world_from_jsonl(std::string_view jsonl, const WorldConfig& cfg);

struct WorldFiles {
  std::filesystem::path records;   // world.jsonl
  std::filesystem::path manifest;  // manifest.json
};

WorldFiles world_files(const std::filesystem::path& dir);

/// Writes world.jsonl and manifest.json (config, seed, content hash).
/// Returns the content hash.
std::string save_world(const World& world, const std::filesystem::path& dir);

/// Loads and hash-checks a saved world. Throws std::runtime_error when the
/// files are missing or do not match the manifest.
World load_world(const std::filesystem::path& dir);

/// Content hash recorded in a world directory's manifest.
std::string world_hash(const std::filesystem::path& dir);

// --- parameters and checkpoints -----------------------------------------

Json to_json(const PolicyParams& params);
/// Throws std::invalid_argument on missing or unknown feature names.
PolicyParams policy_from_json(const Json& j);

/// Heads are named after reward components (seven heads) or "total".
Json to_json(const RmParams& rm);
RmParams reward_model_from_json(const Json& j);

Json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const Json& j);

/// Everything cmd_eval needs to replay a checkpoint greedily.
struct CheckpointFile {
  Checkpoint checkpoint;
  ScheduleConfig schedule;
  PolicyConfig policy;
  RewardSettings reward;
  std::vector<int> dev_question_ids;
  std::string world_hash;
};

inline constexpr int kCheckpointFormat = 1;

Json to_json(const CheckpointFile& c);
/// Throws std::invalid_argument on a wrong format version or malformed
/// fields.
CheckpointFile checkpoint_from_json(const Json& j);

// --- logs ----------------------------------------------------------------

/// One trajectory-log record: per-step actions, retrieved ids, raw reward
/// components, weights, aggregate and log-probability, plus EM/F1 of the
/// final answer against `question`.
Json trajectory_to_json(const Trajectory& traj, const QuestionInstance& question);

RewardVector reward_from_json(const Json& j);
WeightVector weights_from_json(const Json& j);

Json pair_to_json(const PreferencePair& pair, const CycleRecord& cycle);

std::string csv_header_metrics();
std::string csv_row(const CycleRecord& r, std::string_view schedule_mode, std::string_view preset);

}  // namespace evorag
