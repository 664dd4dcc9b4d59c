#include "densctl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "densctl/acceptance.hpp"
#include "densctl/density.hpp"
#include "densctl/error.hpp"
#include "densctl/finetune.hpp"
#include "densctl/formats.hpp"
#include "densctl/gan.hpp"
#include "densctl/metrics.hpp"
#include "densctl/perturb.hpp"
#include "densctl/sampler.hpp"
#include "densctl/stats.hpp"
#include "densctl/sweep.hpp"
#include "densctl/synthetic.hpp"

namespace densctl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip text for a double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string shown_path(const fs::path& p, const fs::path& base) {
  if (!base.empty()) {
    const fs::path rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(base));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  }
  return p.generic_string();
}

// Typed access to a stage config. Every key read is echoed (with defaults
// filled in) and keys nobody read are rejected, so typos fail loudly.
class Params {
 public:
  Params(const json& cfg, const StageContext& ctx, std::string stage)
      : cfg_(cfg), ctx_(ctx), stage_(std::move(stage)) {
    require(cfg_.is_object(), ErrorKind::InvalidArgument, stage_ + ": config must be an object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    T v = std::move(fallback);
    if (auto it = cfg_.find(key); it != cfg_.end() && !it->is_null()) {
      try {
        v = it->template get<T>();
      } catch (const json::exception&) {
        fail(ErrorKind::InvalidArgument, stage_ + ": config '" + key + "' has the wrong type");
      }
    }
    echo_[key] = v;
    return v;
  }

  std::optional<fs::path> optional_input(const std::string& key) {
    used_.insert(key);
    auto it = cfg_.find(key);
    if (it == cfg_.end() || it->is_null()) return std::nullopt;
    require(it->is_string(), ErrorKind::InvalidArgument, stage_ + ": config '" + key + "' must be a path");
    const fs::path p = it->get<std::string>();
    require(fs::exists(p), ErrorKind::Io, stage_ + ": missing stage input '" + key + "': " + p.string());
    echo_[key] = shown_path(p, ctx_.base_dir);
    return p;
  }

  fs::path input(const std::string& key) {
    auto p = optional_input(key);
    require(p.has_value(), ErrorKind::InvalidArgument, stage_ + ": config needs '" + key + "'");
    return *p;
  }

  bool has(const std::string& key) const { return cfg_.contains(key) && !cfg_.at(key).is_null(); }

  std::uint64_t seed() { return get<std::uint64_t>("seed", ctx_.seed); }

  json finish() const {
    for (const auto& [key, value] : cfg_.items()) {
      if (!used_.count(key)) fail(ErrorKind::InvalidArgument, stage_ + ": unknown config key '" + key + "'");
    }
    return echo_;
  }

 private:
  const json& cfg_;
  const StageContext& ctx_;
  std::string stage_;
  std::set<std::string> used_;
  json echo_ = json::object();
};

class StageRun {
 public:
  StageRun(std::string command, const StageContext& ctx)
      : ctx_(ctx), start_(std::chrono::steady_clock::now()), created_(utc_now()) {
    manifest_.command = std::move(command);
    fs::create_directories(ctx_.out_dir);
  }

  void input(const std::string& role, const fs::path& p) { manifest_.add_input(role, p, ctx_.base_dir); }
  fs::path out(const std::string& name) const { return ctx_.out_dir / name; }
  void output(const std::string& role, const fs::path& p) { manifest_.add_output(role, p, ctx_.base_dir); }
  json& metrics() { return manifest_.metrics; }
  const RunManifest& manifest() const { return manifest_; }
  /// Extra wall-clock data, kept with the timestamps.
  json& timing() { return timing_; }
  void log(const std::string& line) const {
    if (ctx_.log) *ctx_.log << "[" << manifest_.command << "] " << line << '\n';
  }

  RunManifest finish(const Params& params, std::uint64_t seed) {
    manifest_.config = params.finish();
    manifest_.seed = seed;
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.timestamps = {{"created_utc", created_}, {"elapsed_seconds", elapsed}};
    for (const auto& [key, value] : timing_.items()) manifest_.timestamps[key] = value;
    manifest_.write(out(manifest_.command + ".manifest.json"));
    log("done in " + num(std::round(elapsed * 10) / 10) + " s -> " + ctx_.out_dir.string());
    return manifest_;
  }

 private:
  const StageContext& ctx_;
  std::chrono::steady_clock::time_point start_;
  std::string created_;
  RunManifest manifest_;
  json timing_ = json::object();
};

Matrix load_data(Params& p, StageRun& run, const std::string& key) {
  const fs::path path = p.input(key);
  run.input(key, path);
  return io::read_features(path);
}

std::vector<double> load_densities(Params& p, StageRun& run, const std::string& key, std::size_t rows) {
  const fs::path path = p.input(key);
  run.input(key, path);
  auto d = io::read_dens(path).densities;
  require(d.size() == rows, ErrorKind::DimensionMismatch,
          "'" + key + "' has " + std::to_string(d.size()) + " densities for " + std::to_string(rows) + " rows");
  return d;
}

DensityRegressor load_regressor(Params& p, StageRun& run) {
  const fs::path path = p.input("regressor");
  run.input("regressor", path);
  DensityRegressor reg{io::read_mlpw(path), {}};
  require(reg.net.output_dim() == 1, ErrorKind::DimensionMismatch, "regressor must have one output");
  return reg;
}

// Generator from `generator` or from `gan`/generator.mlpw.
Mlp load_generator(Params& p, StageRun& run) {
  if (p.has("generator")) {
    p.optional_input("gan");
    const fs::path g = p.input("generator");
    run.input("generator", g);
    return io::read_mlpw(g);
  }
  p.optional_input("generator");
  const fs::path dir = p.input("gan");
  const fs::path g = dir / "generator.mlpw";
  require(fs::exists(g), ErrorKind::Io, "missing stage input: " + g.string());
  run.input("generator", g);
  return io::read_mlpw(g);
}

void write_dens(StageRun& run, const std::string& file, std::vector<double> d, std::uint32_t k, std::uint32_t n) {
  const fs::path path = run.out(file);
  io::write_dens(path, {std::move(d), k, n});
  run.output(file.substr(0, file.find('.')), path);
}

void write_fvec(StageRun& run, const std::string& file, const Matrix& m) {
  const fs::path path = run.out(file);
  io::write_fvec(path, m);
  run.output(file.substr(0, file.find('.')), path);
}

void write_mlpw(StageRun& run, const std::string& file, const Mlp& net) {
  const fs::path path = run.out(file);
  io::write_mlpw(path, net);
  run.output(file.substr(0, file.find('.')), path);
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

json report_json(const EvalReport& r) {
  return {{"precision", r.precision},       {"recall", r.recall},       {"frechet_distance", r.frechet_distance},
          {"frechet_jitter", r.frechet_jitter}, {"real_count", r.real_count}, {"gen_count", r.gen_count},
          {"knn", r.k}};
}

void write_gan_log(const fs::path& path, const std::vector<GanLogEntry>& log, bool filtered) {
  auto out = open_text(path);
  out << "iteration,d_loss,g_loss,penalty" << (filtered ? ",gen_density_mean,gen_attempts" : "") << '\n';
  for (const auto& e : log) {
    out << e.iteration << ',' << num(e.d_loss) << ',' << num(e.g_loss) << ',' << num(e.penalty);
    if (filtered) out << ',' << num(e.gen_density_mean) << ',' << e.gen_attempts;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

RunManifest gen_data(const json& cfg, const StageContext& ctx) {
  StageRun run("gen-data", ctx);
  Params p(cfg, ctx, "gen-data");
  const std::uint64_t seed = p.seed();
  const auto kind = p.get<std::string>("kind", "benchmark");
  const auto count = p.get<std::size_t>("count", 4000);
  const auto heldout = p.get<std::size_t>("heldout", 2000);

  auto make = [&](std::size_t n, std::uint64_t s) {
    if (kind == "benchmark") return SyntheticSpec::benchmark_mixture(n, s);
    if (kind == "ring") {
      return SyntheticSpec::ring(p.get<std::size_t>("modes", 8), p.get<double>("radius", 2.0),
                                 p.get<double>("sigma", 0.2), n, s);
    }
    if (kind == "two-moons") return SyntheticSpec::two_moons(p.get<double>("noise", 0.1), n, s);
    if (kind == "mixture") {
      SyntheticSpec spec;
      spec.count = n;
      spec.seed = s;
      for (const auto& c : p.get<json>("components", json::array())) {
        spec.components.push_back({c.at("mean").get<std::vector<double>>(),
                                   c.at("covariance").get<std::vector<double>>(), c.value("weight", 1.0)});
      }
      return spec;
    }
    fail(ErrorKind::InvalidArgument, "gen-data: unknown kind '" + kind + "' (benchmark, ring, two-moons, mixture)");
  };

  const SyntheticData data = generate_synthetic(make(count, seed));
  write_fvec(run, "data.fvec", data.features.features);
  write_dens(run, "true_density.dens", data.true_density, 0, 0);
  run.metrics() = {{"rows", data.features.size()}, {"dim", data.features.dim()}};
  if (heldout > 0) {
    const SyntheticData held = generate_synthetic(make(heldout, Rng(seed).split(1).next_u64()));
    write_fvec(run, "heldout.fvec", held.features.features);
    run.metrics()["heldout_rows"] = held.features.size();
  }
  run.log(std::to_string(count) + " " + kind + " samples");
  return run.finish(p, seed);
}

RunManifest pretrain(const json& cfg, const StageContext& ctx) {
  StageRun run("pretrain", ctx);
  Params p(cfg, ctx, "pretrain");
  const std::uint64_t seed = p.seed();
  const Matrix data = load_data(p, run, "data");
  std::optional<Matrix> held;
  if (auto h = p.optional_input("heldout")) {
    run.input("heldout", *h);
    held = io::read_features(*h);
  }
  GanArch arch;
  arch.latent_dim = p.get("latent_dim", arch.latent_dim);
  arch.data_dim = data.cols();
  arch.generator_hidden = p.get("generator_hidden", arch.generator_hidden);
  arch.discriminator_hidden = p.get("discriminator_hidden", arch.discriminator_hidden);
  PretrainConfig pc;
  pc.iterations = p.get("iterations", pc.iterations);
  pc.batch_size = p.get("batch", pc.batch_size);
  pc.n_critic = p.get("n_critic", pc.n_critic);
  pc.penalty_coef = p.get("penalty", pc.penalty_coef);
  pc.optim.lr_generator = p.get("lr_g", pc.optim.lr_generator);
  pc.optim.lr_discriminator = p.get("lr_d", pc.optim.lr_discriminator);
  pc.seed = seed;
  const auto eval_count = p.get<std::size_t>("eval_count", 2000);
  const auto baseline = p.get<double>("fid_baseline", kBenchmarkFidBaseline);

  run.log("training " + std::to_string(pc.iterations) + " iterations");
  const GanPair pair = pretrain_gan(data, arch, pc);
  write_mlpw(run, "generator.mlpw", pair.generator);
  write_mlpw(run, "discriminator.mlpw", pair.discriminator);
  write_gan_log(run.out("pretrain_log.csv"), pair.log, false);
  run.output("pretrain_log", run.out("pretrain_log.csv"));

  Rng rng = Rng(seed).split(3);
  const FeatureSet gen{generate(pair.generator, eval_count, rng), "generated"};
  const FeatureSet ref{held ? *held : data, held ? "heldout" : "data"};
  const EvalReport rep = evaluate(ref, gen);
  run.metrics() = report_json(rep);
  run.metrics()["reference"] = ref.source_tag;
  run.metrics()["fid_baseline"] = baseline;
  run.metrics()["fid_within_baseline"] = rep.frechet_distance <= baseline;
  if (!pair.log.empty()) {
    run.metrics()["final_d_loss"] = pair.log.back().d_loss;
    run.metrics()["final_g_loss"] = pair.log.back().g_loss;
  }
  run.log("FID " + num(rep.frechet_distance) + " (baseline " + num(baseline) + ")");
  return run.finish(p, seed);
}

RunManifest fit_density(const json& cfg, const StageContext& ctx) {
  StageRun run("fit-density", ctx);
  Params p(cfg, ctx, "fit-density");
  const std::uint64_t seed = p.seed();
  const Matrix data = load_data(p, run, "data");
  DensityConfig dc;
  dc.k = p.get("k", dc.k);
  dc.n = p.get("n", dc.n);
  const DensityEstimate est = estimate_density({data, "data"}, dc);
  const auto [lo, hi] = std::minmax_element(est.densities.begin(), est.densities.end());
  run.metrics() = {{"rows", est.size()},
                   {"duplicates", est.duplicates},
                   {"mean", stats::mean(est.densities)},
                   {"min", *lo},
                   {"max", *hi}};
  write_dens(run, "density.dens", est.densities, static_cast<std::uint32_t>(dc.k), dc.n);
  return run.finish(p, seed);
}

RunManifest train_regressor(const json& cfg, const StageContext& ctx) {
  StageRun run("train-regressor", ctx);
  Params p(cfg, ctx, "train-regressor");
  const std::uint64_t seed = p.seed();
  const Matrix data = load_data(p, run, "data");
  const fs::path dpath = p.input("densities");
  run.input("densities", dpath);
  const io::DensityFile dens = io::read_dens(dpath);
  require(dens.densities.size() == data.rows(), ErrorKind::DimensionMismatch,
          "train-regressor: density count does not match data rows");
  RegressorConfig rc;
  rc.hidden = p.get("hidden", rc.hidden);
  rc.epochs = p.get("epochs", rc.epochs);
  rc.batch_size = p.get("batch", rc.batch_size);
  rc.learning_rate = p.get("lr", rc.learning_rate);
  rc.seed = seed;
  const auto train_rows = std::min(p.get<std::size_t>("train_rows", 0), data.rows());
  const std::size_t n = train_rows == 0 ? data.rows() : train_rows;

  DensityEstimate est;
  est.densities.assign(dens.densities.begin(), dens.densities.begin() + static_cast<std::ptrdiff_t>(n));
  est.config = {dens.k, dens.n};
  run.log("training on " + std::to_string(n) + " rows, " + std::to_string(rc.epochs) + " epochs");
  const DensityRegressor reg = densctl::train_regressor({data.slice_rows(0, n), "data"}, est, rc);
  const std::vector<double> pred = pseudo_density(reg, data);
  write_mlpw(run, "regressor.mlpw", reg.net);
  write_dens(run, "pseudo_density.dens", pred, dens.k, dens.n);
  run.metrics() = {{"train_rows", n},
                   {"train_mse", reg.stats.train_mse},
                   {"heldout_mse", reg.stats.heldout_mse},
                   {"heldout_r2", reg.stats.heldout_r2},
                   {"spearman_vs_targets", stats::spearman(pred, dens.densities)}};
  return run.finish(p, seed);
}

RunManifest perturb(const json& cfg, const StageContext& ctx) {
  StageRun run("perturb", ctx);
  Params p(cfg, ctx, "perturb");
  const std::uint64_t seed = p.seed();
  const Mlp gen = load_generator(p, run);
  const DensityRegressor reg = load_regressor(p, run);
  PerturbConfig pc;
  pc.direction = direction_from_string(p.get<std::string>("direction", to_string(pc.direction)));
  pc.steps = p.get("steps", pc.steps);
  pc.step_size = p.get("alpha", pc.step_size);
  pc.budget = p.get("eps", pc.budget);
  pc.normalize_gradient = p.get("normalize", pc.normalize_gradient);
  const auto count = p.get<std::size_t>("count", 100);

  Rng rng(seed);
  const Matrix z = sample_latents(count, gen.input_dim(), rng);
  const auto results = perturb_latents(gen, reg, z, pc);

  const fs::path csv = run.out("perturb.csv");
  {
    auto out = open_text(csv);
    const std::size_t d = gen.input_dim();
    for (std::size_t j = 0; j < d; ++j) out << "z_" << j << ',';
    for (std::size_t j = 0; j < d; ++j) out << "delta_" << j << ',';
    out << "density_before,density_after\n";
    for (const auto& r : results) {
      for (double v : r.original_z) out << num(v) << ',';
      for (double v : r.delta) out << num(v) << ',';
      out << num(r.density_before) << ',' << num(r.density_after) << '\n';
    }
  }
  run.output("perturb", csv);

  std::size_t moved = 0;
  double change = 0, worst = 0;
  for (const auto& r : results) {
    const double dd = r.density_after - r.density_before;
    moved += pc.direction == Direction::Ascend ? dd > 0 : dd < 0;
    change += dd;
    for (double v : r.delta) worst = std::max(worst, std::abs(v));
  }
  const double n = static_cast<double>(std::max<std::size_t>(count, 1));
  run.metrics() = {{"count", count},
                   {"moved_in_direction", moved},
                   {"fraction_moved", static_cast<double>(moved) / n},
                   {"mean_density_change", change / n},
                   {"max_abs_delta", worst},
                   {"budget_held", worst <= pc.budget}};
  run.log(std::to_string(moved) + "/" + std::to_string(count) + " moved " + to_string(pc.direction));
  return run.finish(p, seed);
}

RunManifest sample(const json& cfg, const StageContext& ctx) {
  StageRun run("sample", ctx);
  Params p(cfg, ctx, "sample");
  const std::uint64_t seed = p.seed();
  const Mlp gen = load_generator(p, run);
  const DensityRegressor reg = load_regressor(p, run);
  const fs::path dpath = p.input("densities");
  run.input("densities", dpath);
  const auto real = io::read_dens(dpath).densities;
  const auto pct = p.get<double>("tau_percentile", 50.0);
  SamplingConfig sc;
  sc.tau = calibrate_threshold(real, pct).threshold;
  sc.weight = p.get("weight", sc.weight);
  sc.max_attempts_per_accept = p.get("max_attempts", sc.max_attempts_per_accept);
  const auto phi = p.get<double>("phi", 1.0);
  if (phi != 1.0) sc.truncation = TruncationConfig{phi, {}};
  const auto count = p.get<std::size_t>("count", 2000);

  Rng rng(seed);
  const SampleBatch batch = importance_sample(gen, reg, sc, count, rng);
  write_fvec(run, "samples.fvec", batch.accepted_outputs());
  const auto below = static_cast<double>(std::count_if(batch.densities.begin(), batch.densities.end(),
                                                        [&](double r) { return r < sc.tau; }));
  const double frac_below = batch.attempts ? below / static_cast<double>(batch.attempts) : 0.0;
  run.metrics() = {{"tau", sc.tau},
                   {"attempts", batch.attempts},
                   {"accepted", batch.accepted_count()},
                   {"acceptance_rate", batch.acceptance_rate()},
                   {"fraction_below_tau", frac_below},
                   {"expected_rate", acceptance_rate(frac_below, sc.weight)},
                   {"expected_rate_perfect_fit", acceptance_rate(pct / 100.0, sc.weight)},
                   {"cost_multiplier", 1.0 / batch.acceptance_rate()}};
  run.log(std::to_string(count) + " accepted of " + std::to_string(batch.attempts) + " attempts");
  return run.finish(p, seed);
}

RunManifest finetune(const json& cfg, const StageContext& ctx) {
  StageRun run("finetune", ctx);
  Params p(cfg, ctx, "finetune");
  const std::uint64_t seed = p.seed();
  const fs::path dir = p.input("gan");
  run.input("generator", dir / "generator.mlpw");
  run.input("discriminator", dir / "discriminator.mlpw");
  const DensityRegressor reg = load_regressor(p, run);
  const Matrix data = load_data(p, run, "data");
  const auto dens = load_densities(p, run, "densities", data.rows());
  const auto pct = p.get<double>("tau_percentile", 50.0);
  FinetuneConfig fc;
  fc.tau = calibrate_threshold(dens, pct).threshold;
  fc.weight = p.get("weight", fc.weight);
  fc.iterations = p.get("iterations", fc.iterations);
  fc.batch_size = p.get("batch", fc.batch_size);
  fc.optim.lr_generator = p.get("lr_g", fc.optim.lr_generator);
  fc.optim.lr_discriminator = p.get("lr_d", fc.optim.lr_discriminator);
  fc.penalty_coef = p.get("penalty", fc.penalty_coef);
  fc.max_attempts_per_accept = p.get("max_attempts", fc.max_attempts_per_accept);
  fc.seed = seed;

  GanPair pair = make_gan(io::read_mlpw(dir / "generator.mlpw"), io::read_mlpw(dir / "discriminator.mlpw"), fc.optim);
  const WeightedDataset real(data, dens, fc.tau, fc.weight);
  run.log(std::to_string(fc.iterations) + " iterations at w=" + num(fc.weight));
  std::optional<GanPair> result;
  try {
    result = finetune_gan(std::move(pair), reg, real, fc);
  } catch (const DivergenceError& e) {
    io::write_mlpw(run.out("last_good_generator.mlpw"), e.last_good().generator);
    io::write_mlpw(run.out("last_good_discriminator.mlpw"), e.last_good().discriminator);
    throw;
  }
  const GanPair& tuned = *result;
  write_mlpw(run, "generator.mlpw", tuned.generator);
  write_mlpw(run, "discriminator.mlpw", tuned.discriminator);
  write_gan_log(run.out("finetune_log.csv"), tuned.log, true);
  run.output("finetune_log", run.out("finetune_log.csv"));

  const double above = static_cast<double>(std::count_if(dens.begin(), dens.end(), [&](double r) { return r > fc.tau; })) /
                       static_cast<double>(dens.size());
  const TwoBin eq = equilibrium_target({above, 1.0 - above}, fc.weight);
  auto window_mean = [&](std::size_t begin, std::size_t end) {
    double s = 0;
    for (std::size_t i = begin; i < end; ++i) s += tuned.log[i].gen_density_mean;
    return end > begin ? s / static_cast<double>(end - begin) : 0.0;
  };
  const std::size_t t = tuned.log.size(), w = std::max<std::size_t>(t / 10, 1);
  std::size_t attempts = 0;
  for (const auto& e : tuned.log) attempts += e.gen_attempts;
  run.metrics() = {{"tau", fc.tau},
                   {"real_fraction_above_tau", above},
                   {"equilibrium_fraction_above_tau", eq.above},
                   {"gen_density_mean_first", window_mean(0, std::min(w, t))},
                   {"gen_density_mean_last", window_mean(t - std::min(w, t), t)},
                   {"gen_attempts", attempts}};
  if (t > 0) {
    run.metrics()["final_d_loss"] = tuned.log.back().d_loss;
    run.metrics()["final_g_loss"] = tuned.log.back().g_loss;
  }
  return run.finish(p, seed);
}

RunManifest eval(const json& cfg, const StageContext& ctx) {
  StageRun run("eval", ctx);
  Params p(cfg, ctx, "eval");
  const std::uint64_t seed = p.seed();
  const Matrix real = load_data(p, run, "real");
  const Matrix gen = load_data(p, run, "gen");
  const auto k = p.get<std::size_t>("knn", kDefaultManifoldK);
  const EvalReport rep = evaluate({real, "real"}, {gen, "gen"}, k);
  run.metrics() = report_json(rep);
  const fs::path txt = run.out("eval.txt");
  {
    auto out = open_text(txt);
    for (const auto& [key, value] : run.metrics().items()) out << key << '=' << value.dump() << '\n';
  }
  run.output("eval", txt);
  run.log("precision " + num(rep.precision) + " recall " + num(rep.recall) + " FID " + num(rep.frechet_distance));
  return run.finish(p, seed);
}

std::string point_dir(const SweepPoint& pt) { return "tau" + num(pt.tau_percentile) + "_w" + num(pt.weight); }

void write_points(const fs::path& path, const std::vector<const SweepPoint*>& pts, const SweepPoint* baseline,
                  const std::vector<std::string>& extra_head, const std::vector<std::vector<std::string>>& extra) {
  auto out = open_text(path);
  out << "tau_percentile,tau,weight,precision,recall,frechet,acceptance_rate,attempts";
  for (const auto& h : extra_head) out << ',' << h;
  out << '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const SweepPoint& s = *pts[i];
    out << (pts[i] == baseline ? std::string("none") : num(s.tau_percentile)) << ','
        << (pts[i] == baseline ? std::string("none") : num(s.tau)) << ',' << num(s.weight) << ',' << num(s.precision) << ',' << num(s.recall) << ','
        << num(s.frechet) << ',' << num(s.acceptance_rate) << ',' << s.attempts;
    if (!extra.empty())
      for (const auto& v : extra[i]) out << ',' << v;
    out << '\n';
  }
}

RunManifest sweep(const json& cfg, const StageContext& ctx) {
  StageRun run("sweep", ctx);
  Params p(cfg, ctx, "sweep");
  const std::uint64_t seed = p.seed();
  const Mlp gen = load_generator(p, run);
  const DensityRegressor reg = load_regressor(p, run);
  const fs::path dpath = p.input("densities");
  run.input("densities", dpath);
  const auto dens = io::read_dens(dpath).densities;
  const Matrix real = load_data(p, run, "real");
  SweepConfig sc;
  sc.tau_percentiles = p.get("tau_percentiles", sc.tau_percentiles);
  sc.weights = p.get("weights", sc.weights);
  sc.count = p.get("count", sc.count);
  sc.knn = p.get("knn", sc.knn);
  sc.seed = seed;

  run.log(std::to_string(sc.tau_percentiles.size() * sc.weights.size()) + " configurations");
  const SweepResult res = sweep_sampling(gen, reg, dens, {real, "real"}, sc);

  // one manifest per configuration
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const SweepPoint& pt = res.points[i];
    const fs::path sub = ctx.out_dir / point_dir(pt);
    fs::create_directories(sub);
    RunManifest m;
    m.command = "sample";
    m.seed = seed;
    m.config = {{"tau_percentile", pt.tau_percentile}, {"weight", pt.weight}, {"count", sc.count}};
    m.inputs = run.manifest().inputs;
    io::write_fvec(sub / "samples.fvec", res.samples[i]);
    m.add_output("samples", sub / "samples.fvec", ctx.base_dir);
    m.metrics = {{"tau", pt.tau},           {"precision", pt.precision},          {"recall", pt.recall},
                 {"frechet_distance", pt.frechet}, {"acceptance_rate", pt.acceptance_rate}, {"attempts", pt.attempts}};
    m.timestamps = {{"created_utc", utc_now()}};
    m.write(sub / "sample.manifest.json");
    // the samples, not the sub-manifest: that one carries a wall-clock stamp
    run.output(point_dir(pt), sub / "samples.fvec");
  }

  std::vector<const SweepPoint*> all;
  for (const auto& pt : res.points) all.push_back(&pt);
  all.push_back(&res.baseline);
  std::vector<SweepPoint> flat;
  for (const auto* pt : all) flat.push_back(*pt);
  const auto front = pareto_front(flat);

  std::vector<std::vector<std::string>> flags;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool dom = i < res.points.size() && std::count(res.dominated_by_baseline.begin(), res.dominated_by_baseline.end(), i);
    const bool on = std::count(front.begin(), front.end(), i) > 0;
    flags.push_back({dom ? "1" : "0", on ? "1" : "0"});
  }
  write_points(run.out("sweep.csv"), all, &res.baseline, {"dominated_by_baseline", "on_frontier"}, flags);
  run.output("sweep", run.out("sweep.csv"));
  std::vector<const SweepPoint*> frontier;
  for (std::size_t i : front) frontier.push_back(all[i]);
  std::sort(frontier.begin(), frontier.end(), [](const SweepPoint* a, const SweepPoint* b) { return a->recall < b->recall; });
  write_points(run.out("frontier.csv"), frontier, &res.baseline, {}, {});
  run.output("frontier", run.out("frontier.csv"));

  json dominated = json::array();
  for (std::size_t i : res.dominated_by_baseline) dominated.push_back(point_dir(res.points[i]));
  run.metrics() = {{"configurations", res.points.size()},
                   {"baseline_precision", res.baseline.precision},
                   {"baseline_recall", res.baseline.recall},
                   {"precision_monotone_in_w", res.precision_monotone},
                   {"dominated_by_baseline", dominated},
                   {"frontier_size", front.size()}};
  return run.finish(p, seed);
}

RunManifest acceptance_stage(const json& cfg, const StageContext& ctx) {
  StageRun run("acceptance", ctx);
  Params p(cfg, ctx, "acceptance");
  const std::uint64_t seed = p.seed();
  acceptance::Options opts;
  opts.seeds = p.get("seeds", opts.seeds);
  opts.scratch_dir = ctx.out_dir / "scratch";
  opts.on_result = [&](const acceptance::Criterion& c) { run.log(acceptance::format(c)); };
  const auto results = acceptance::run(opts);
  fs::remove_all(opts.scratch_dir);

  const fs::path txt = run.out("acceptance.txt");
  json rows = json::array();
  json seconds = json::object();
  bool all = true;
  {
    auto out = open_text(txt);
    for (auto c : results) {
      seconds[std::to_string(c.id)] = c.seconds;
      c.seconds = -1;  // no timings in the table, so it stays reproducible
      out << acceptance::format(c) << '\n';
      rows.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
      all = all && c.pass;
    }
  }
  run.output("acceptance", txt);
  run.timing()["criterion_seconds"] = seconds;
  run.metrics() = {{"criteria", rows}, {"all_pass", all}};
  return run.finish(p, seed);
}

using StageFn = RunManifest (*)(const json&, const StageContext&);

const std::map<std::string, StageFn>& registry() {
  static const std::map<std::string, StageFn> r = {
      {"gen-data", gen_data}, {"pretrain", pretrain}, {"fit-density", fit_density},
      {"train-regressor", train_regressor}, {"perturb", perturb}, {"sample", sample},
      {"finetune", finetune}, {"eval", eval}, {"sweep", sweep}, {"acceptance", acceptance_stage}};
  return r;
}

json resolve_refs(const json& j, const fs::path& out_dir, const std::set<std::string>& done, const std::string& stage) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.empty() || s[0] != '@') return j;
    const auto slash = s.find('/');
    const std::string id = s.substr(1, slash == std::string::npos ? std::string::npos : slash - 1);
    require(done.count(id) > 0, ErrorKind::InvalidArgument,
            "plan stage '" + stage + "': '" + s + "' refers to a stage that has not run before it");
    return (out_dir / id / (slash == std::string::npos ? "" : s.substr(slash + 1))).string();
  }
  if (j.is_object() || j.is_array()) {
    json out = j;
    for (auto& [key, value] : out.items()) value = resolve_refs(value, out_dir, done, stage);
    return out;
  }
  return j;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"gen-data", "pretrain", "fit-density", "train-regressor", "perturb",
                                                 "sample",   "finetune", "eval",        "sweep",           "acceptance"};
  return names;
}

RunManifest run_stage(const std::string& stage, const json& config, const StageContext& ctx) {
  const auto& r = registry();
  const auto it = r.find(stage);
  require(it != r.end(), ErrorKind::InvalidArgument, "unknown stage '" + stage + "'");
  return it->second(config, ctx);
}

ExperimentPlan ExperimentPlan::from_json(const json& j) {
  require(j.is_object(), ErrorKind::Format, "plan must be a JSON object");
  ExperimentPlan plan;
  try {
    plan.seed = j.value("seed", std::uint64_t{0});
    for (const auto& s : j.value("stages", json::array())) {
      PlanStage st;
      st.stage = s.at("stage").get<std::string>();
      st.id = s.value("id", st.stage);
      st.config = s.value("config", json::object());
      plan.stages.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed plan: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& s : plan.stages) {
    require(registry().count(s.stage) > 0, ErrorKind::InvalidArgument, "plan: unknown stage '" + s.stage + "'");
    require(!s.id.empty() && s.id.find_first_of("/\\") == std::string::npos && s.id != "." && s.id != "..",
            ErrorKind::InvalidArgument, "plan: bad stage id '" + s.id + "'");
    require(ids.insert(s.id).second, ErrorKind::InvalidArgument, "plan: duplicate stage id '" + s.id + "'");
  }
  return plan;
}

json ExperimentPlan::to_json() const {
  json stages_json = json::array();
  for (const auto& s : stages) stages_json.push_back({{"id", s.id}, {"stage", s.stage}, {"config", s.config}});
  return {{"seed", seed}, {"stages", stages_json}};
}

ExperimentPlan load_plan(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open plan '" + path.string() + "'");
  try {
    return ExperimentPlan::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, "plan '" + path.string() + "' is not JSON: " + e.what());
  }
}

std::vector<RunManifest> run_plan(const ExperimentPlan& plan, const fs::path& out_dir, std::ostream* log) {
  // Check every reference before running anything.
  std::set<std::string> done;
  for (const auto& s : plan.stages) {
    resolve_refs(s.config, out_dir, done, s.id);
    done.insert(s.id);
  }
  std::vector<RunManifest> manifests;
  done.clear();
  for (const auto& s : plan.stages) {
    StageContext ctx{out_dir / s.id, out_dir, plan.seed, log};
    manifests.push_back(run_stage(s.stage, resolve_refs(s.config, out_dir, done, s.id), ctx));
    done.insert(s.id);
  }
  return manifests;
}

}  // namespace densctl::pipeline
