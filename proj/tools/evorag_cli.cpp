#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evorag/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string world;
  std::string mode;
  std::string preset;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
  auto* opt = cmd->add_option("--config", f.config, "Flat JSON experiment config");
  if (config_required) opt->required();
  cmd->add_option("--seed", f.seed, "Seed for world generation and training (overrides config)");
  cmd->add_option("--out", f.out, "Output directory (overrides config out_dir)");
  cmd->add_option("--world", f.world, "World directory (overrides config world_dir)");
}

void add_mode_preset(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--mode", f.mode, "Schedule mode: no_reward, two_stage or time_dynamic");
  cmd->add_option("--preset", f.preset,
                  "Reward preset: full, no_reward, best2, best3, exploration_heavy, "
                  "efficiency_heavy or single:<component>");
}

evorag::ExperimentConfig resolve(const CommonFlags& f) {
  evorag::ExperimentConfig cfg = evorag::load_config(f.config);
  if (f.seed) cfg.set_seed(*f.seed);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.world.empty()) cfg.world_dir = f.world;
  if (!f.mode.empty()) cfg.train.schedule.mode = evorag::parse_schedule_mode(f.mode);
  if (!f.preset.empty()) cfg.preset = f.preset;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-shaped multi-hop retrieval agent trained with a reward model and DPO"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  auto* gen = app.add_subcommand("gen-world", "Generate the synthetic world and its manifest");
  add_common(gen, gen_flags);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "Run the two-stage curriculum on a generated world");
  add_common(train, train_flags);
  add_mode_preset(train, train_flags);

  CommonFlags cmp_flags;
  std::vector<std::string> modes;
  std::vector<std::string> presets;
  auto* compare = app.add_subcommand("compare", "Train and compare schedule modes and presets");
  add_common(compare, cmp_flags);
  add_mode_preset(compare, cmp_flags);
  compare->add_option("--modes", modes, "Schedule modes to compare")->delimiter(',');
  compare->add_option("--presets", presets, "Reward presets to compare")->delimiter(',');

  std::string checkpoint;
  std::string world_dir;
  std::string report_path;
  CommonFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint JSON written by train")->required();
  eval->add_option("--world", world_dir, "World directory (default: the config's world)");
  eval->add_option("--config", eval_flags.config, "Config used to locate the world");
  eval->add_option("--out", report_path, "Write the report as JSON to this file");

  CommonFlags dump_flags;
  std::string dump_out;
  auto* dump = app.add_subcommand("dump-weights", "Print the reward weights over t for both stages");
  dump->add_option("--config", dump_flags.config, "Flat JSON experiment config")->required();
  dump->add_option("--out", dump_out, "Also write the CSV to this file");
  add_mode_preset(dump, dump_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const evorag::ExperimentConfig cfg = resolve(gen_flags);
      const std::string hash = evorag::cmd_gen_world(cfg);
      std::cout << "world written to " << cfg.resolved_world_dir().string() << " (hash " << hash
                << ")\n";
    } else if (*train) {
      const evorag::ExperimentConfig cfg = resolve(train_flags);
      const evorag::TrainRun run = evorag::cmd_train(cfg);
      const auto& best = run.result.final_checkpoint();
      std::cout << "best checkpoint: " << evorag::to_string(best.stage) << " cycle " << best.cycle
                << "\n"
                << evorag::format_report(best.dev) << "\n"
                << "outputs in " << cfg.out_dir.string() << "\n";
    } else if (*compare) {
      const evorag::ExperimentConfig cfg = resolve(cmp_flags);
      if (modes.empty() && presets.empty()) {
        modes = evorag::schedule_modes();
        presets = evorag::combination_presets();
      }
      const auto rows = evorag::cmd_compare(cfg, modes, presets);
      for (const auto& r : rows) {
        std::printf("%-6s %-18s %s\n", r.kind.c_str(), r.name.c_str(),
                    evorag::format_report(r.dev).c_str());
      }
      std::cout << "comparison written to " << (cfg.out_dir / "comparison.csv").string() << "\n";
    } else if (*eval) {
      std::filesystem::path wd = world_dir;
      if (wd.empty()) {
        if (eval_flags.config.empty()) throw std::invalid_argument("eval needs --world or --config");
        wd = evorag::load_config(eval_flags.config).resolved_world_dir();
      }
      const evorag::EvalReport r = evorag::cmd_eval(checkpoint, wd, report_path);
      std::cout << evorag::format_report(r) << "\n";
    } else if (*dump) {
      const evorag::ExperimentConfig cfg = resolve(dump_flags);
      const std::string csv = evorag::cmd_dump_weights(cfg);
      std::cout << csv;
      if (!dump_out.empty()) evorag::write_file_atomic(dump_out, csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
