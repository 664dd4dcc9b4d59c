// densctl: command-line front end over the pipeline stages.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "densctl/error.hpp"
#include "densctl/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using densctl::Error;
using densctl::ErrorKind;

namespace {

// Exit codes. 1 is reserved for "ran, but the result failed a check".
constexpr int kExitChecksFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 11;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return 3;
    case ErrorKind::DimensionMismatch: return 4;
    case ErrorKind::NonFinite: return 5;
    case ErrorKind::Format: return 6;
    case ErrorKind::Io: return 7;
    case ErrorKind::Starvation: return 8;
    case ErrorKind::Divergence: return 9;
    case ErrorKind::State: return 10;
  }
  return 3;
}

// Collects the flags a user actually gave into the stage config, so stage
// defaults stay in one place.
class StageCommand {
 public:
  StageCommand(CLI::App& parent, std::string stage, const std::string& help)
      : stage_(std::move(stage)), app_(parent.add_subcommand(stage_, help)) {
    app_->add_option("--config", config_file_, "JSON file with extra stage settings (flags win)")
        ->check(CLI::ExistingFile);
  }

  template <class T>
  StageCommand& opt(const std::string& flag, const std::string& key, const std::string& help, bool required = false) {
    auto value = std::make_shared<T>();
    CLI::Option* o = app_->add_option(flag, *value, help);
    if (required) o->required();
    setters_.push_back([o, value, key](json& cfg) {
      if (o->count() > 0) cfg[key] = *value;
    });
    return *this;
  }

  StageCommand& flag(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* o = app_->add_flag(flag, *value, help);
    setters_.push_back([o, value, key](json& cfg) {
      if (o->count() > 0) cfg[key] = *value;
    });
    return *this;
  }

  // Generator by file or by stage directory.
  StageCommand& generator() {
    opt<std::string>("--model", "generator", "generator .mlpw");
    return opt<std::string>("--gan", "gan", "directory holding generator.mlpw");
  }

  CLI::App* app() const { return app_; }
  const std::string& stage() const { return stage_; }

  json config() const {
    json cfg = json::object();
    if (!config_file_.empty()) {
      std::ifstream in(config_file_);
      try {
        cfg = json::parse(in);
      } catch (const json::parse_error& e) {
        densctl::fail(ErrorKind::Format, "--config '" + config_file_ + "' is not JSON: " + e.what());
      }
      densctl::require(cfg.is_object(), ErrorKind::Format, "--config must hold a JSON object");
    }
    for (const auto& s : setters_) s(cfg);
    return cfg;
  }

 private:
  std::string stage_;
  CLI::App* app_;
  std::string config_file_;
  std::vector<std::function<void(json&)>> setters_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-steered sampling and fine-tuning for generative models"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool quiet = false;
  app.add_option("--seed", seed, "seed for every random draw")->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory for artifacts and the run manifest")->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "no progress output");

  std::vector<std::unique_ptr<StageCommand>> cmds;
  auto cmd = [&](const std::string& stage, const std::string& help) -> StageCommand& {
    cmds.push_back(std::make_unique<StageCommand>(app, stage, help));
    return *cmds.back();
  };

  cmd("gen-data", "draw a synthetic dataset, its true density and a held-out set")
      .opt<std::string>("--kind", "kind", "benchmark | ring | two-moons | mixture")
      .opt<std::size_t>("--count", "count", "training rows")
      .opt<std::size_t>("--heldout", "heldout", "held-out rows")
      .opt<std::size_t>("--modes", "modes", "ring modes")
      .opt<double>("--radius", "radius", "ring radius")
      .opt<double>("--sigma", "sigma", "ring mode std")
      .opt<double>("--noise", "noise", "two-moons noise");

  cmd("pretrain", "train a WGAN-GP pair on a dataset")
      .opt<std::string>("--data", "data", "training features (FVEC1 or CSV)", true)
      .opt<std::string>("--heldout", "heldout", "features to score the generator against")
      .opt<std::size_t>("--latent-dim", "latent_dim", "latent size")
      .opt<std::size_t>("--iters", "iterations", "generator updates")
      .opt<std::size_t>("--batch", "batch", "batch size")
      .opt<std::size_t>("--n-critic", "n_critic", "critic steps per generator step")
      .opt<double>("--penalty", "penalty", "gradient-penalty weight")
      .opt<double>("--lr-g", "lr_g", "generator learning rate")
      .opt<double>("--lr-d", "lr_d", "critic learning rate");

  cmd("fit-density", "k-NN density of every row")
      .opt<std::string>("--data", "data", "features", true)
      .opt<std::size_t>("--k", "k", "neighbours")
      .opt<unsigned>("--n", "n", "distance exponent");

  cmd("train-regressor", "fit the density regressor")
      .opt<std::string>("--data", "data", "features", true)
      .opt<std::string>("--densities", "densities", "DENS1 targets", true)
      .opt<std::size_t>("--epochs", "epochs", "epochs")
      .opt<std::size_t>("--batch", "batch", "batch size")
      .opt<double>("--lr", "lr", "peak learning rate")
      .opt<std::size_t>("--train-rows", "train_rows", "use only the first N rows (0 = all)");

  cmd("perturb", "move latents toward higher or lower density")
      .generator()
      .opt<std::string>("--regressor", "regressor", "density regressor .mlpw", true)
      .opt<std::string>("--direction", "direction", "ascend | descend")
      .opt<std::size_t>("--steps", "steps", "gradient steps")
      .opt<double>("--alpha", "alpha", "step size")
      .opt<double>("--eps", "eps", "L-inf budget")
      .flag("--normalize", "normalize", "unit-L2 gradient steps")
      .opt<std::size_t>("--count", "count", "latents to perturb");

  cmd("sample", "density-weighted rejection sampling")
      .generator()
      .opt<std::string>("--regressor", "regressor", "density regressor .mlpw", true)
      .opt<std::string>("--densities", "densities", "densities the threshold is taken from", true)
      .opt<double>("--tau-percentile", "tau_percentile", "threshold percentile")
      .opt<double>("--weight", "weight", "w > 1 favours dense regions, w < 1 sparse ones")
      .opt<std::size_t>("--max-attempts", "max_attempts", "consecutive rejections before giving up")
      .opt<double>("--phi", "phi", "latent truncation scale")
      .opt<std::size_t>("--count", "count", "samples to keep");

  cmd("finetune", "fine-tune a pair toward density-weighted data")
      .opt<std::string>("--gan", "gan", "directory with generator.mlpw and discriminator.mlpw", true)
      .opt<std::string>("--regressor", "regressor", "density regressor .mlpw", true)
      .opt<std::string>("--data", "data", "real features", true)
      .opt<std::string>("--densities", "densities", "density of every real row", true)
      .opt<double>("--tau-percentile", "tau_percentile", "threshold percentile")
      .opt<double>("--weight", "weight", "density weight")
      .opt<std::size_t>("--iters", "iterations", "iterations")
      .opt<std::size_t>("--batch", "batch", "batch size")
      .opt<double>("--lr-g", "lr_g", "generator learning rate")
      .opt<double>("--lr-d", "lr_d", "critic learning rate")
      .opt<double>("--penalty", "penalty", "gradient-penalty weight")
      .opt<std::size_t>("--max-attempts", "max_attempts", "consecutive rejections before giving up");

  cmd("eval", "precision, recall and Frechet distance")
      .opt<std::string>("--real", "real", "reference features", true)
      .opt<std::string>("--gen", "gen", "generated features", true)
      .opt<std::size_t>("--knn", "knn", "manifold neighbours");

  cmd("sweep", "sampling grid over thresholds and weights, with its Pareto front")
      .generator()
      .opt<std::string>("--regressor", "regressor", "density regressor .mlpw", true)
      .opt<std::string>("--densities", "densities", "densities the thresholds are taken from", true)
      .opt<std::string>("--real", "real", "reference features", true)
      .opt<std::vector<double>>("--tau-percentiles", "tau_percentiles", "threshold percentiles")
      .opt<std::vector<double>>("--weights", "weights", "weights")
      .opt<std::size_t>("--count", "count", "samples per configuration")
      .opt<std::size_t>("--knn", "knn", "manifold neighbours");

  std::string plan_file;
  CLI::App* run_plan = app.add_subcommand("run-plan", "run a JSON experiment plan; --seed overrides the plan's");
  run_plan->add_option("plan", plan_file, "plan file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    std::vector<densctl::RunManifest> manifests;
    if (run_plan->parsed()) {
      auto plan = densctl::pipeline::load_plan(plan_file);
      if (app.get_option("--seed")->count() > 0) plan.seed = seed;
      manifests = densctl::pipeline::run_plan(plan, out_dir, log);
    } else {
      for (const auto& c : cmds) {
        if (!c->app()->parsed()) continue;
        densctl::pipeline::StageContext ctx{out_dir, out_dir, seed, log};
        manifests.push_back(densctl::pipeline::run_stage(c->stage(), c->config(), ctx));
      }
    }
    bool checks_ok = true;
    for (const auto& m : manifests) {
      if (m.metrics.contains("all_pass")) checks_ok = checks_ok && m.metrics["all_pass"].get<bool>();
    }
    return checks_ok ? 0 : kExitChecksFailed;
  } catch (const Error& e) {
    std::cerr << "error[" << densctl::to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return kExitInternal;
  }
}
