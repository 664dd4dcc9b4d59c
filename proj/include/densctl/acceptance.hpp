#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

// The repo's acceptance suite: one pass/fail verdict per criterion, shared by
// the `acceptance` test binary and the `acceptance` plan stage.

namespace densctl::acceptance {

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = false;
  /// Measured values behind the verdict. Never contains timings.
  std::string detail;
  /// Negative when not measured; format() then omits it.
  double seconds = 0.0;
};

struct Options {
  /// Seeds for the multi-seed toy experiments.
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  /// Scratch space for the determinism check; a temp dir when empty.
  std::filesystem::path scratch_dir;
  /// Called as each criterion finishes.
  std::function<void(const Criterion&)> on_result;
};

std::vector<Criterion> run(const Options& opts = {});

/// "PASS  7  fine-tuning direction  <detail>  (12.3 s)"
std::string format(const Criterion& c);

}  // namespace densctl::acceptance
