#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evorag/io.hpp"
#include "evorag/trainer.hpp"

namespace evorag {

/// A reward-combination preset: which weight components stay on. Masked
/// components are zero at every anchor. `no_reward` switches the schedule to
/// NoReward mode instead of masking.
struct Preset {
  std::string name;
  bool no_reward = false;
  std::array<bool, WeightVector::kSize> keep{};  // WeightVector order
};

/// full, no_reward, best2, best3, exploration_heavy, efficiency_heavy or
/// single:<component>, where <component> is one of retrieval_bonus,
/// action_penalty, overlap, backtrack, refusal, step_cost,
/// answer_correctness (or the short reward names ret, act, dup, bt, ref,
/// step, ans). Throws std::invalid_argument for anything else.
Preset parse_preset(std::string_view name);

/// The six rows of the reward-combination comparison, baseline first.
std::vector<std::string> combination_presets();

/// no_reward, two_stage, time_dynamic.
std::vector<std::string> schedule_modes();

struct ExperimentConfig {
  WorldConfig world;
  TrainConfig train;
  std::string anchors_name = "table";  // "table" or "swapped"
  std::string preset = "full";
  std::filesystem::path out_dir = "runs/default";
  std::filesystem::path world_dir;  // empty: <out_dir>/world
  std::uint64_t seed = 42;          // drives world generation and training

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
  std::filesystem::path resolved_world_dir() const;
  void set_seed(std::uint64_t s);
};

/// Flat JSON object with dotted keys (e.g. "train.rm_lr"). Unknown keys,
/// wrong value types and invalid values are errors naming the key.
ExperimentConfig parse_config(const Json& flat);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every recognised key, in documentation order.
std::vector<std::string> config_keys();

/// Training config after applying the preset mask, the anchor choice and
/// the seed.
TrainConfig effective_train_config(const ExperimentConfig& cfg);

// --- commands -------------------------------------------------------------

/// Generates the world and writes it to the resolved world directory.
/// Returns the content hash.
std::string cmd_gen_world(const ExperimentConfig& cfg);

struct TrainOptions {
  bool write_trajectories = true;
  bool write_pairs = true;
};

struct TrainRun {
  CurriculumResult result;
  TrainConfig config;
  std::string world_hash;
};

/// Trains on the saved world and writes metrics.csv, trajectories.jsonl,
/// pairs.jsonl, report.json and the two stage checkpoints under out_dir.
/// Throws std::runtime_error when the world is missing.
TrainRun cmd_train(const ExperimentConfig& cfg, const TrainOptions& options = {});

struct ComparisonRow {
  std::string kind;  // "mode" or "preset"
  std::string name;
  std::string schedule_mode;
  std::string preset;
  EvalReport dev;
  std::string world_hash;
  int cycles = 0;
};

/// Trains one run per schedule mode (with the configured preset) and one per
/// preset (with the configured mode) under the same seed and world. Writes
/// comparison.csv, step_distribution.csv and each run's metrics under
/// out_dir/runs/<name>/. Identical (mode, preset) runs are trained once.
std::vector<ComparisonRow> cmd_compare(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& modes,
                                       const std::vector<std::string>& presets);

/// Greedy evaluation of a checkpoint on its dev questions (all questions
/// when it lists none). Writes the report as JSON when `report_path` is
/// non-empty. Throws on a corrupt checkpoint or a world-hash mismatch.
EvalReport cmd_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& world_dir,
                    const std::filesystem::path& report_path = {});

/// Tidy CSV of weights_at for every t in [0, t_max] in both stages.
std::string cmd_dump_weights(const ExperimentConfig& cfg);

std::string format_report(const EvalReport& r);

}  // namespace evorag
