#include "commands.hpp"
#include "config.hpp"

#include "deconf/common.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#ifndef DECONF_VERSION
#define DECONF_VERSION "0.0.0"
#endif

namespace {

using deconf::cli::Json;

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> params;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.configs, "JSON config file; repeat to layer several, later files win");
  app->add_option("--param", c.params, "override one setting, e.g. fit.latent_dim=6 (value is JSON)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--threads", c.threads, "worker threads, 0 = all cores (results do not depend on it)");
  app->add_option("--out-dir", c.out_dir, "directory for outputs")->capture_default_str();
}

// Subcommand flags that map one-to-one onto config keys. Only flags the user
// actually passed end up in the patch.
struct FlagPatch {
  Json patch = Json::object();

  template <class T>
  void add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
           const std::string& help) {
    app->add_option_function<T>(
           flag, [this, section, key](const T& v) { patch[section][key] = v; }, help);
  }
};

// "name=value" pairs for --set / --versus and --role.
std::pair<std::string, std::string> split_pair(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw deconf::UsageError(std::string(flag) + " expects name=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

double parse_value(const std::string& text, const char* flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw deconf::UsageError(std::string(flag) + ": '" + text + "' is not a number");
}

deconf::cli::RunContext resolve(const Common& c, const FlagPatch& flags) {
  using namespace deconf::cli;
  RunContext ctx;
  ctx.config = default_config();
  for (const auto& path : c.configs) merge_config(ctx.config, read_config_file(path), path);
  for (const auto& p : c.params) merge_config(ctx.config, dotted_assignment(p), "--param " + p);
  merge_config(ctx.config, flags.patch, "command-line flags");
  if (c.seed) ctx.config["seed"] = *c.seed;
  ctx.out_dir = c.out_dir;
  ctx.threads = c.threads;
  ctx.version = DECONF_VERSION;
  return ctx;
}

int run(int argc, char** argv) {
  CLI::App app{"Deconfounded effect estimation with probabilistic latent factor models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DECONF_VERSION);

  Common common;
  FlagPatch flags;
  std::function<int()> action;

  auto* defaults = app.add_subcommand("defaults", "print every setting with its default value");
  defaults->callback([&] {
    action = [] {
      std::cout << deconf::cli::default_config().dump(2) << '\n';
      return 0;
    };
  });

  auto* simulate = app.add_subcommand("simulate", "generate a semi-synthetic dataset with known effects");
  add_common(simulate, common);
  flags.add<long long>(simulate, "--n", "simulate", "n", "number of individuals");
  flags.add<long long>(simulate, "--d", "simulate", "d", "number of causes");
  flags.add<double>(simulate, "--nu-x", "simulate", "nu_x", "variance share of the causal term");
  flags.add<double>(simulate, "--nu-z", "simulate", "nu_z", "variance share of the confounder");
  flags.add<std::string>(simulate, "--signal", "simulate", "signal", "fitted, residual or raw");
  simulate->callback([&] {
    action = [&] { return deconf::cli::cmd_simulate(resolve(common, flags)); };
  });

  std::vector<std::string> roles;
  auto* fit = app.add_subcommand("fit", "fit the latent factor model and store posterior draws");
  add_common(fit, common);
  flags.add<std::string>(fit, "--data", "data", "path", "input CSV");
  fit->add_option("--role", roles, "column role, e.g. Hippocampus=cause_volume");
  flags.add<std::string>(fit, "--model", "fit", "model", "ppca or bpmf");
  flags.add<long long>(fit, "--latent-dim", "fit", "latent_dim", "number of latent factors K");
  flags.add<long long>(fit, "--warmup", "fit", "n_warmup", "Gibbs warmup sweeps");
  flags.add<long long>(fit, "--samples", "fit", "n_samples", "retained draws");
  flags.add<long long>(fit, "--thin", "fit", "thin", "thinning interval");
  flags.add<double>(fit, "--hold-fraction", "fit", "hold_fraction", "share of cells held out for checking");
  fit->callback([&] {
    action = [&] {
      for (const auto& r : roles) {
        const auto [col, role] = split_pair(r, "--role");
        flags.patch["data"]["roles"][col] = role;
      }
      return deconf::cli::cmd_fit(resolve(common, flags));
    };
  });

  deconf::cli::FitInputs check_in;
  auto* check = app.add_subcommand("check", "posterior predictive check on the held-out cells");
  add_common(check, common);
  check->add_option("--draws", check_in.draws, "draws.bin written by fit")->required();
  flags.add<std::string>(check, "--data", "data", "path", "dataset (default: the one used by fit)");
  flags.add<long long>(check, "--replicates", "check", "n_replicates", "replicated datasets per row");
  flags.add<double>(check, "--tau", "check", "tau", "pass threshold for the mean p-value");
  check->callback([&] {
    action = [&] { return deconf::cli::cmd_check(resolve(common, flags), check_in); };
  });

  deconf::cli::EffectsInputs effects_in;
  std::vector<std::string> set, versus;
  auto* effects = app.add_subcommand("effects", "outcome model and average causal effects");
  add_common(effects, common);
  effects->add_option("--draws", effects_in.draws, "draws.bin written by fit")->required();
  effects->add_option("--check", effects_in.check, "check summary (default: ppc_summary.txt beside the draws)");
  effects->add_flag("--override-gate", effects_in.override_gate,
                    "estimate effects even though the predictive check failed or is missing");
  flags.add<std::string>(effects, "--data", "data", "path", "dataset (default: the one used by fit)");
  flags.add<std::string>(effects, "--outcome-transform", "effects", "outcome_transform", "adas or proportion");
  flags.add<std::string>(effects, "--units", "effects", "intervention_units", "standardized or raw");
  effects->add_option("--set", set, "intervention cause=value; repeat for several causes");
  effects->add_option("--versus", versus, "reference intervention for a contrast, cause=value");
  effects->callback([&] {
    action = [&] {
      if (!versus.empty() && set.empty()) throw deconf::UsageError("--versus needs --set");
      auto ctx = resolve(common, flags);
      if (!set.empty()) {
        Json item;
        item["name"] = "command-line";
        for (const auto& s : set) {
          const auto [col, v] = split_pair(s, "--set");
          item["set"][col] = parse_value(v, "--set");
        }
        for (const auto& s : versus) {
          const auto [col, v] = split_pair(s, "--versus");
          item["versus"][col] = parse_value(v, "--versus");
        }
        ctx.config["effects"]["interventions"].push_back(item);
      }
      return deconf::cli::cmd_effects(ctx, effects_in);
    };
  });

  std::vector<std::string> grid;
  auto* benchmark = app.add_subcommand("benchmark", "simulation study over confounding strengths");
  add_common(benchmark, common);
  flags.add<long long>(benchmark, "--sims", "benchmark", "n_sims", "simulations per grid cell");
  flags.add<std::string>(benchmark, "--signal", "benchmark", "signal", "fitted, residual or raw");
  benchmark->add_option("--grid", grid, "nu_x:nu_z ratios as a/b, e.g. 1/1 10/1");
  benchmark->callback([&] {
    action = [&] {
      if (!grid.empty()) flags.patch["benchmark"]["grid"] = grid;
      return deconf::cli::cmd_benchmark(resolve(common, flags));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(deconf::ErrorKind::Usage);
  }
  return action();
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const deconf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(deconf::ErrorKind::Usage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(deconf::ErrorKind::Numerical);
  }
}
