#include "commands.hpp"

#include "deconf/ace.hpp"
#include "deconf/csv.hpp"
#include "deconf/data.hpp"
#include "deconf/draws_io.hpp"
#include "deconf/outcome.hpp"
#include "deconf/ppc.hpp"
#include "deconf/random.hpp"
#include "deconf/synth.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

namespace deconf::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t master_seed(const Json& c) { return c.at("seed").get<std::uint64_t>(); }

std::ofstream open_output(const RunContext& ctx, const std::string& name, bool binary = false) {
  fs::create_directories(ctx.out_dir);
  const fs::path path = ctx.out_dir / name;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Comment block at the top of every text output: tool version, subcommand,
// and the resolved configuration of the sections it used.
std::vector<std::string> header_lines(const RunContext& ctx, const std::string& command,
                                      const std::vector<std::string>& sections) {
  Json used;
  used["seed"] = ctx.config.at("seed");
  for (const auto& s : sections) used[s] = ctx.config.at(s);
  return {"deconf " + ctx.version + " " + command, "config=" + echo(used)};
}

void write_summary(std::ostream& out, const std::vector<std::string>& header,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
  csv::write_comments(out, header);
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

std::string fmt(double v) { return csv::format_double(v); }

synth::GridPoint parse_ratio(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw UsageError("grid entry '" + text + "' is not of the form a/b");
  synth::GridPoint g;
  g.a = csv::parse_number(text.substr(0, slash), 0, "benchmark.grid");
  g.b = csv::parse_number(text.substr(slash + 1), 0, "benchmark.grid");
  return g;
}

synth::SurrogateConfig surrogate_from(const Json& s) {
  synth::SurrogateConfig c;
  c.n = s.at("n").get<Index>();
  c.d = s.at("d").get<Index>();
  c.factors = s.at("factors").get<Index>();
  c.factor_loading_sd = s.at("factor_loading_sd").get<double>();
  c.age_loading_sd = s.at("age_loading_sd").get<double>();
  c.gender_loading_sd = s.at("gender_loading_sd").get<double>();
  c.noise_sd = s.at("noise_sd").get<double>();
  return c;
}

synth::SynthConfig synth_from(const Json& s) {
  synth::SynthConfig c;
  c.n_clusters = s.at("n_clusters").get<Index>();
  const auto& band = s.at("band");
  if (band.size() != 2) throw UsageError("band must list two percentiles");
  c.band_lo = band[0].get<double>();
  c.band_hi = band[1].get<double>();
  c.effect_scale = s.at("effect_scale").get<double>();
  c.age_coef_scale = s.at("age_coef_scale").get<double>();
  c.signal = synth::parse_signal(s.at("signal").get<std::string>());
  return c;
}

PlfmSpec plfm_from(const Json& f) {
  PlfmSpec s;
  s.kind = parse_model(f.at("model").get<std::string>());
  s.latent_dim = f.at("latent_dim").get<Index>();
  s.prior_scale_loadings = f.at("prior_scale_loadings").get<double>();
  s.prior_scale_coefficients = f.at("prior_scale_coefficients").get<double>();
  s.noise_shape = f.at("noise_shape").get<double>();
  s.noise_scale = f.at("noise_scale").get<double>();
  s.ard_shape = f.at("ard_shape").get<double>();
  s.ard_scale = f.at("ard_scale").get<double>();
  s.learn_loading_scale = f.at("learn_loading_scale").get<bool>();
  return s;
}

RoleDeclaration roles_from(const Json& data) {
  RoleDeclaration roles;
  for (auto it = data.at("roles").begin(); it != data.at("roles").end(); ++it) {
    roles.add(it.key(), parse_role(it.value().get<std::string>()));
  }
  if (roles.columns.empty()) throw UsageError("no column roles declared (data.roles or --role)");
  return roles;
}

// Loads the dataset and applies TIV normalization when configured and
// possible. Standardization is left to the caller.
Dataset load_model_inputs(const Json& data) {
  const std::string path = data.at("path").get<std::string>();
  if (path.empty()) throw UsageError("no dataset given (data.path or --data)");
  Dataset ds = load_dataset(path, roles_from(data));
  if (data.at("normalize_tiv").get<bool>() && ds.tiv) ds = normalize_by_tiv(ds);
  return ds;
}

struct Reloaded {
  FitArtifact artifact;
  Json fit_config;
  Dataset standardized;
};

// Everything later stages need: the artifact, and the dataset it was fitted
// on, passed through the stored standardization. The data section stored in
// the artifact is used unless the current run names a dataset itself.
Reloaded reload(const fs::path& draws_path, const Json& current_data) {
  Reloaded r;
  r.artifact = load_artifact(draws_path);
  try {
    r.fit_config = Json::parse(r.artifact.config_text);
  } catch (const Json::parse_error&) {
    throw DataError("draws file " + draws_path.string() + " carries an unreadable configuration");
  }
  Json data = r.fit_config.at("data");
  if (!current_data.at("path").get<std::string>().empty()) {
    data["path"] = current_data.at("path");
    if (!current_data.at("roles").empty()) data["roles"] = current_data.at("roles");
    data["normalize_tiv"] = current_data.at("normalize_tiv");
  }
  Dataset ds = load_model_inputs(data);
  if (ds.cause_names != r.artifact.cause_names || ds.covariate_names != r.artifact.covariate_names) {
    throw DataError("dataset columns no longer match the ones the draws were fitted on");
  }
  if (ds.n() != r.artifact.draws.n()) {
    throw DataError("dataset has " + std::to_string(ds.n()) + " rows, the fit had " +
                    std::to_string(r.artifact.draws.n()));
  }
  ds.causes = r.artifact.standardization.apply_causes(ds.causes);
  ds.covariates = r.artifact.standardization.apply_covariates(ds.covariates);
  r.standardized = std::move(ds);
  return r;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

Index cause_index(const Dataset& ds, const std::string& name) {
  const auto it = std::find(ds.cause_names.begin(), ds.cause_names.end(), name);
  if (it == ds.cause_names.end()) throw UsageError("'" + name + "' is not a cause column");
  return static_cast<Index>(it - ds.cause_names.begin());
}

Intervention intervention_from(const Json& set, const Dataset& ds, const Standardization& st, bool raw_units) {
  Intervention iv;
  std::vector<double> values;
  for (auto it = set.begin(); it != set.end(); ++it) {
    const Index j = cause_index(ds, it.key());
    if (!it.value().is_number()) throw UsageError("intervention value for '" + it.key() + "' must be a number");
    double v = it.value().get<double>();
    if (raw_units) v = (v - st.cause_location(j)) / st.cause_scale(j);
    iv.columns.push_back(j);
    values.push_back(v);
  }
  iv.values = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  iv.validate(ds.d());
  return iv;
}

}  // namespace

int cmd_simulate(const RunContext& ctx) {
  const Json& s = ctx.config.at("simulate");
  synth::SynthConfig cfg = synth_from(s);
  cfg.nu_x = s.at("nu_x").get<double>();
  cfg.nu_z = s.at("nu_z").get<double>();
  cfg.seed = derive_seed(master_seed(ctx.config), "simulate");
  const synth::SynthDataset syn = synth::generate(surrogate_from(s), cfg);
  const auto header = header_lines(ctx, "simulate", {"simulate"});

  {
    auto out = open_output(ctx, "dataset.csv");
    write_dataset(out, syn.data, header);
  }
  {
    auto out = open_output(ctx, "truth.csv");
    std::vector<std::string> lines = header;
    lines.push_back("row 1: effects on the standardized linear-predictor scale; row 2: raw sparse-normal beta");
    lines.push_back("gamma=" + fmt(syn.true_gamma));
    lines.push_back("b0=" + fmt(syn.b0));
    lines.push_back("positive_fraction=" + fmt(syn.positive_fraction));
    std::string sk = "sigma_k=";
    for (Index k = 0; k < syn.sigma_k.size(); ++k) sk += (k ? ";" : "") + fmt(syn.sigma_k(k));
    lines.push_back(sk);
    Matrix truth(2, syn.data.d());
    truth.row(0) = syn.true_effects.transpose();
    truth.row(1) = syn.true_beta.transpose();
    csv::write_matrix(out, lines, syn.data.cause_names, truth);
  }
  {
    auto out = open_output(ctx, "confounder.csv");
    Matrix u = syn.u;
    csv::write_matrix(out, header, {"u"}, u);
  }
  {
    // Config fragment that points `fit` at the generated file.
    Json roles = Json::object();
    for (const auto& [name, role] : roles_of(syn.data).columns) roles[name] = role_name(role);
    Json frag;
    frag["data"] = {{"path", fs::absolute(ctx.out_dir / "dataset.csv").lexically_normal().string()},
                    {"roles", roles}};
    auto out = open_output(ctx, "roles.json");
    out << frag.dump(2) << '\n';
  }
  std::cerr << "simulate: wrote " << syn.data.n() << " rows, " << syn.data.d() << " causes to "
            << ctx.out_dir.string() << "\n";
  return 0;
}

int cmd_fit(const RunContext& ctx) {
  const Json& f = ctx.config.at("fit");
  const std::uint64_t seed = master_seed(ctx.config);
  const Dataset raw = load_model_inputs(ctx.config.at("data"));
  auto [ds, st] = standardize(raw);
  for (const auto& w : st.warnings) std::cerr << "warning: " << w << "\n";

  PlfmSpec spec = plfm_from(f);
  spec.seed = derive_seed(seed, "gibbs");
  const ChainConfig chain{f.at("n_warmup").get<Index>(), f.at("n_samples").get<Index>(), f.at("thin").get<Index>()};
  const HoldoutSplit split = split_holdout(ds, f.at("hold_fraction").get<double>(), derive_seed(seed, "holdout"));
  const PosteriorDraws draws = fit_gibbs(split.observed, ds.covariates, spec, chain);

  Json used;
  used["seed"] = ctx.config.at("seed");
  used["data"] = ctx.config.at("data");
  used["fit"] = f;

  FitArtifact art;
  art.draws = draws;
  art.mask = split.mask;
  art.standardization = st;
  art.cause_names = ds.cause_names;
  art.covariate_names = ds.covariate_names;
  art.config_text = used.dump();
  {
    auto out = open_output(ctx, "draws.bin", true);
    write_artifact(out, art);
  }

  const auto header = header_lines(ctx, "fit", {"data", "fit"});
  const auto& dg = draws.diagnostics;
  {
    auto out = open_output(ctx, "fit_summary.txt");
    std::vector<std::pair<std::string, std::string>> kv = {
        {"model", model_name(spec.kind)},
        {"K", std::to_string(spec.latent_dim)},
        {"N", std::to_string(ds.n())},
        {"D", std::to_string(ds.d())},
        {"P", std::to_string(ds.p())},
        {"n_warmup", std::to_string(chain.n_warmup)},
        {"n_samples", std::to_string(chain.n_samples)},
        {"thin", std::to_string(chain.thin)},
        {"iterations", std::to_string(dg.iterations)},
        {"held_out_cells", std::to_string(split.mask.held.count())},
        {"sigma2_mean", fmt(dg.sigma2_mean)},
        {"sigma2_sd", fmt(dg.sigma2_sd)},
        {"sigma2_ess", fmt(dg.sigma2_ess)},
        {"loading_norm_mean", fmt(dg.loading_norm_mean)},
        {"warnings", std::to_string(st.warnings.size())},
    };
    write_summary(out, header, kv);
  }
  {
    auto out = open_output(ctx, "substitute.csv");
    std::vector<std::string> names;
    for (Index k = 0; k < spec.latent_dim; ++k) names.push_back("z" + std::to_string(k + 1));
    csv::write_matrix(out, header, names, extract_substitute(draws).z_hat);
  }
  std::cerr << "fit: " << model_name(spec.kind) << " K=" << spec.latent_dim << ", " << draws.size()
            << " draws, sigma2 mean " << fmt(dg.sigma2_mean) << "\n";
  return 0;
}

int cmd_check(const RunContext& ctx, const FitInputs& in) {
  const Json& c = ctx.config.at("check");
  const Reloaded r = reload(in.draws, ctx.config.at("data"));
  const HoldoutSplit split = apply_mask(r.standardized.causes, r.artifact.mask);
  PpcConfig cfg;
  cfg.n_replicates = c.at("n_replicates").get<Index>();
  cfg.tau = c.at("tau").get<double>();
  cfg.statistic_draws = c.at("statistic_draws").get<Index>();
  cfg.threads = ctx.threads;
  const PpcReport report = bayesian_p_values(r.artifact.draws, split.observed, split.holdout,
                                             r.standardized.covariates, cfg,
                                             derive_seed(master_seed(ctx.config), "ppc"));
  std::vector<std::string> header = header_lines(ctx, "check", {"check"});
  header.push_back("fit_config=" + r.artifact.config_text);
  {
    auto out = open_output(ctx, "ppc.csv");
    write_ppc_table(out, report, header);
  }
  {
    auto out = open_output(ctx, "ppc_summary.txt");
    csv::write_comments(out, header);
    write_ppc_summary(out, report);
  }
  std::cerr << "check: mean p = " << fmt(report.mean_p) << " (tau " << fmt(report.tau) << "), "
            << (report.passed ? "passed" : "FAILED") << "\n";
  return report.passed ? 0 : static_cast<int>(ErrorKind::Gate);
}

int cmd_effects(const RunContext& ctx, const EffectsInputs& in) {
  const Json& e = ctx.config.at("effects");
  const fs::path check_path = in.check.empty() ? in.draws.parent_path() / "ppc_summary.txt" : in.check;

  GateStatus gate;
  gate.override_gate = in.override_gate;
  if (fs::exists(check_path)) {
    const auto kv = read_key_values(check_path);
    if (!kv.count("passed") || !kv.count("mean_p") || !kv.count("tau")) {
      throw DataError(check_path.string() + " is not a check summary");
    }
    gate.passed = kv.at("passed") == "true";
    gate.mean_p = csv::parse_number(kv.at("mean_p"), 0, "mean_p");
    gate.tau = csv::parse_number(kv.at("tau"), 0, "tau");
  } else if (!in.override_gate) {
    throw GateError("no posterior predictive check found at " + check_path.string() +
                    "; run `deconf check` first or pass --override-gate");
  }
  if (!gate.passed && !gate.override_gate) {
    throw GateError("the posterior predictive check failed (mean p = " + fmt(gate.mean_p) + ", tau = " +
                    fmt(gate.tau) + "); refusing to estimate effects without --override-gate");
  }

  const Reloaded r = reload(in.draws, ctx.config.at("data"));
  const Dataset& ds = r.standardized;
  const SubstituteConfounder z_hat = extract_substitute(r.artifact.draws);

  DesignOptions options;
  options.include_age = e.at("include_age").get<bool>();
  for (const auto& name : e.at("extra_covariates")) {
    const auto s = name.get<std::string>();
    const auto it = std::find(ds.covariate_names.begin(), ds.covariate_names.end(), s);
    if (it == ds.covariate_names.end()) throw UsageError("'" + s + "' is not a covariate column");
    options.extra_covariates.push_back(static_cast<Index>(it - ds.covariate_names.begin()));
  }
  const ResidualizedDesign design = residualize(ds, r.artifact.draws, z_hat, options);

  const std::string transform = e.at("outcome_transform").get<std::string>();
  Vector y;
  if (transform == "adas") {
    y = scale_outcome(ds.outcome, e.at("max_score").get<double>());
  } else if (transform == "proportion") {
    y = ds.outcome;
  } else {
    throw UsageError("effects.outcome_transform must be 'adas' or 'proportion'");
  }

  BetaRegConfig bcfg;
  bcfg.prior.coef_scale = e.at("prior_scale").get<double>();
  bcfg.prior.log_phi_mean = e.at("log_phi_mean").get<double>();
  bcfg.prior.log_phi_sd = e.at("log_phi_sd").get<double>();
  bcfg.n_warmup = e.at("n_warmup").get<Index>();
  bcfg.n_samples = e.at("n_samples").get<Index>();
  bcfg.thin = e.at("thin").get<Index>();
  const std::uint64_t seed = derive_seed(master_seed(ctx.config), "outcome");
  const BetaRegFit fit = fit_beta_regression(design.design(), y, bcfg, seed, design.names);
  if (fit.flagged) std::cerr << "warning: outcome sampler flagged: " << fit.diagnostic << "\n";

  std::vector<std::string> header = header_lines(ctx, "effects", {"effects"});
  header.push_back("fit_config=" + r.artifact.config_text);
  {
    auto out = open_output(ctx, "coefficients.csv");
    write_coefficients(out, summarize_coefficients(fit), header);
  }

  const std::string units = e.at("intervention_units").get<std::string>();
  if (units != "standardized" && units != "raw") {
    throw UsageError("effects.intervention_units must be 'standardized' or 'raw'");
  }
  const bool raw_units = units == "raw";
  const Vector in_sample = mean_prediction(fit, design.design());
  {
    auto out = open_output(ctx, "ace.csv");
    csv::write_comments(out, header);
    out << "name,mean,lo95,hi95,n_individuals,gate_passed,gate_overridden\n";
    for (const auto& item : e.at("interventions")) {
      if (!item.is_object() || !item.contains("name") || !item.contains("set")) {
        throw UsageError("each intervention needs a 'name' and a 'set' object");
      }
      for (auto it = item.begin(); it != item.end(); ++it) {
        if (it.key() != "name" && it.key() != "set" && it.key() != "versus") {
          throw UsageError("unknown intervention key '" + it.key() + "'");
        }
      }
      const Intervention a = intervention_from(item.at("set"), ds, r.artifact.standardization, raw_units);
      const AceEstimate est =
          item.contains("versus")
              ? ace_contrast(ds, r.artifact.draws, z_hat, fit, options, a,
                             intervention_from(item.at("versus"), ds, r.artifact.standardization, raw_units), gate)
              : average_causal_effect(ds, r.artifact.draws, z_hat, fit, options, a, gate);
      out << item.at("name").get<std::string>() << ',' << fmt(est.mean) << ',' << fmt(est.lo95) << ','
          << fmt(est.hi95) << ',' << est.n_individuals << ',' << (est.gate_passed ? 1 : 0) << ','
          << (est.gate_overridden ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open_output(ctx, "effects_summary.txt");
    write_summary(out, header,
                  {{"n_draws", std::to_string(fit.n_draws())},
                   {"acceptance_rate", fmt(fit.acceptance_rate)},
                   {"proposal_scale", fmt(fit.proposal_scale)},
                   {"min_ess", fmt(fit.ess.minCoeff())},
                   {"flagged", fit.flagged ? "true" : "false"},
                   {"in_sample_mean_prediction", fmt(in_sample.mean())},
                   {"gate_passed", gate.passed ? "true" : "false"},
                   {"gate_overridden", !gate.passed && gate.override_gate ? "true" : "false"}});
  }
  std::cerr << "effects: " << fit.n_draws() << " outcome draws, acceptance " << fmt(fit.acceptance_rate) << "\n";
  return 0;
}

int cmd_benchmark(const RunContext& ctx) {
  const Json& b = ctx.config.at("benchmark");
  synth::BenchmarkConfig cfg;
  cfg.grid.clear();
  for (const auto& g : b.at("grid")) cfg.grid.push_back(parse_ratio(g.get<std::string>()));
  cfg.n_sims = b.at("n_sims").get<Index>();
  cfg.nu_eps = b.at("nu_eps").get<double>();
  cfg.surrogate = surrogate_from(b);
  cfg.synth = synth_from(b);
  cfg.synth.k_fit = b.at("latent_dim").get<Index>();
  cfg.chain = ChainConfig{b.at("n_warmup").get<Index>(), b.at("n_samples").get<Index>(), b.at("thin").get<Index>()};
  cfg.hold_fraction = b.at("hold_fraction").get<double>();
  cfg.ppc.n_replicates = b.at("n_replicates").get<Index>();
  cfg.ppc.tau = b.at("tau").get<double>();
  cfg.ppc.statistic_draws = b.at("statistic_draws").get<Index>();
  cfg.logistic_l2 = b.at("l2").get<double>();
  cfg.seed = derive_seed(master_seed(ctx.config), "benchmark");
  cfg.threads = ctx.threads;

  const synth::BenchmarkTable table = synth::run_benchmark(cfg);
  const auto header = header_lines(ctx, "benchmark", {"benchmark"});
  {
    auto out = open_output(ctx, "benchmark.csv");
    synth::write_benchmark_table(out, table, header);
  }
  {
    auto out = open_output(ctx, "benchmark_sims.csv");
    synth::write_benchmark_sims(out, table, header);
  }
  std::cerr << "benchmark: " << table.cells.size() << " cells x " << cfg.n_sims << " simulations\n";
  return 0;
}

}  // namespace deconf::cli
