#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "densctl/manifest.hpp"

// Pipeline stages shared by the CLI subcommands and `run-plan`. A stage reads
// the files named in its config, writes artifacts into ctx.out_dir, writes
// `<stage>.manifest.json` there, and returns the manifest.

namespace densctl::pipeline {

struct StageContext {
  std::filesystem::path out_dir;
  /// Manifest and config paths are recorded relative to this when possible.
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  /// Progress lines; null when quiet.
  std::ostream* log = nullptr;
};

/// gen-data, pretrain, fit-density, train-regressor, perturb, sample,
/// finetune, eval, sweep, acceptance.
const std::vector<std::string>& stage_names();

RunManifest run_stage(const std::string& stage, const nlohmann::json& config, const StageContext& ctx);

struct PlanStage {
  std::string id;
  std::string stage;
  nlohmann::json config = nlohmann::json::object();
};

struct ExperimentPlan {
  std::uint64_t seed = 0;
  std::vector<PlanStage> stages;

  static ExperimentPlan from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ExperimentPlan load_plan(const std::filesystem::path& path);

/// Stages run in order, each into out_dir/<id>. A config string "@id/file"
/// names out_dir/id/file. A failing stage stops the plan; manifests already
/// written stay on disk.
std::vector<RunManifest> run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir,
                                  std::ostream* log = nullptr);

}  // namespace densctl::pipeline
