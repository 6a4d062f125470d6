#pragma once

#include "config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace deconf::cli {

struct RunContext {
  Json config;                    // merged and validated
  std::filesystem::path out_dir;  // created if missing
  unsigned threads = 0;           // 0 = all cores; never echoed, it cannot change results
  std::string version;
};

struct FitInputs {
  std::filesystem::path draws;
};

struct EffectsInputs {
  std::filesystem::path draws;
  std::filesystem::path check;  // empty: ppc_summary.txt next to the draws file
  bool override_gate = false;
};

int cmd_simulate(const RunContext& ctx);
int cmd_fit(const RunContext& ctx);
int cmd_check(const RunContext& ctx, const FitInputs& in);
int cmd_effects(const RunContext& ctx, const EffectsInputs& in);
int cmd_benchmark(const RunContext& ctx);

}  // namespace deconf::cli
