// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any failed. Pass criterion numbers as arguments to run a
// subset, e.g. `deconf_acceptance 3 4`.

#include "conjugacy.hpp"
#include "helpers.hpp"

#include "deconf/ace.hpp"
#include "deconf/csv.hpp"
#include "deconf/data.hpp"
#include "deconf/outcome.hpp"
#include "deconf/parallel.hpp"
#include "deconf/ppc.hpp"
#include "deconf/stats.hpp"
#include "deconf/synth.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#ifndef DECONF_CLI_PATH
#error "DECONF_CLI_PATH must point at the deconf executable"
#endif

using namespace deconf;
using namespace deconf::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// --- 1 and 2: simulation study ----------------------------------------------

const synth::BenchmarkTable& benchmark_table() {
  static const synth::BenchmarkTable table = [] {
    synth::BenchmarkConfig cfg;  // 15 ratios, 50 sims, N=2000, D=19, K=5
    cfg.seed = 20240601;
    cfg.threads = 0;
    auto t = synth::run_benchmark(cfg);
    std::ofstream out("acceptance_benchmark.csv");
    synth::write_benchmark_table(out, t, {"acceptance benchmark, seed 20240601"});
    std::ofstream sims("acceptance_benchmark_sims.csv");
    synth::write_benchmark_sims(sims, t, {"acceptance benchmark, seed 20240601"});
    return t;
  }();
  return table;
}

Outcome criterion_ordering() {
  const auto& table = benchmark_table();
  using namespace synth;
  Outcome o{true, ""};
  int checked = 0, held = 0;
  for (const auto& c : table.cells) {
    if (c.point.b < c.point.a) continue;
    ++checked;
    const double* m = c.mean_rmse;
    const double best_plfm = std::min(m[kPpca], m[kBpmf]);
    const bool ok = m[kOracle] <= best_plfm && best_plfm < m[kRoa] && m[kRoa] < m[kNonCausal];
    held += ok ? 1 : 0;
    if (!ok) {
      o.pass = false;
      o.detail += " " + c.point.label() + "[O " + num(m[kOracle]) + " P " + num(m[kPpca]) + " B " +
                  num(m[kBpmf]) + " R " + num(m[kRoa]) + " N " + num(m[kNonCausal]) + "]";
    }
  }
  o.detail = std::to_string(held) + "/" + std::to_string(checked) +
             " cells with nu_z >= nu_x ordered Oracle <= PLFM < ROA < Non-causal" +
             (o.pass ? "" : "; violations:" + o.detail);
  return o;
}

Outcome criterion_delta_trend() {
  const auto& table = benchmark_table();
  std::vector<double> position, delta;
  int positive = 0;
  for (std::size_t c = 0; c < table.cells.size(); ++c) {
    position.push_back(static_cast<double>(c));
    delta.push_back(table.cells[c].delta(synth::kRoa));
    positive += delta.back() > 0.0 ? 1 : 0;
  }
  const auto corr = stats::spearman(position, delta);
  Outcome o;
  o.pass = positive == static_cast<int>(delta.size()) && corr.rho < 0.0 && corr.p_value < 0.05;
  std::string values;
  for (double d : delta) values += (values.empty() ? "" : " ") + num(d, 3);
  o.detail = "dROA > 0 in " + std::to_string(positive) + "/" + std::to_string(delta.size()) +
             " cells; Spearman rho " + num(corr.rho) + " p " + num(corr.p_value) + "; dROA: " + values;
  return o;
}

// --- 3: predictive check calibration ------------------------------------------

PlfmSample sample_from_model(ModelKind kind, std::uint64_t seed) {
  PlfmSample s = sample_plfm(500, 19, 5, 2, 0.5, seed);
  if (kind == ModelKind::BPMF) {
    // Loadings with ARD scales drawn from their prior.
    Rng rng(derive_seed(seed, "tau"));
    Matrix w = s.w;
    for (Index k = 0; k < w.cols(); ++k) w.col(k) *= std::sqrt(rng.inverse_gamma(2.0, 1.0));
    s.x += s.z * (w - s.w).transpose();
    s.w = w;
  }
  return s;
}

Outcome criterion_ppc() {
  constexpr int reps = 50;
  struct Rep {
    double p_fit[2], p_misfit[2];
  };
  std::vector<Rep> out(reps);
  parallel_for(reps, resolve_threads(0), [&](std::size_t r) {
    for (int m = 0; m < 2; ++m) {
      const ModelKind kind = m == 0 ? ModelKind::PPCA : ModelKind::BPMF;
      const std::uint64_t seed = derive_seed(3000 + m, r);
      const PlfmSample smp = sample_from_model(kind, seed);
      const HoldoutSplit split = split_holdout(smp.x, 0.2, derive_seed(seed, "holdout"));
      PlfmSpec spec;
      spec.kind = kind;
      spec.latent_dim = 5;
      spec.seed = derive_seed(seed, "gibbs");
      const PosteriorDraws draws = fit_gibbs(split.observed, smp.f, spec, ChainConfig{300, 150, 1});
      PpcConfig cfg{200, 0.1, 30, 1};
      out[r].p_fit[m] = bayesian_p_values(draws, split.observed, split.holdout, smp.f, cfg, seed).mean_p;
      MaskedMatrix shifted = split.holdout;
      shifted.values = shifted.present.select(shifted.values.array() + 1e3, shifted.values);
      out[r].p_misfit[m] = bayesian_p_values(draws, split.observed, shifted, smp.f, cfg, seed).mean_p;
    }
  });
  Outcome o{true, ""};
  for (int m = 0; m < 2; ++m) {
    int calibrated = 0, rejected = 0;
    double lo = 1.0, hi = 0.0, worst_misfit = 0.0;
    for (const auto& rep : out) {
      calibrated += rep.p_fit[m] >= 0.3 && rep.p_fit[m] <= 0.7 ? 1 : 0;
      rejected += rep.p_misfit[m] < 0.05 ? 1 : 0;
      lo = std::min(lo, rep.p_fit[m]);
      hi = std::max(hi, rep.p_fit[m]);
      worst_misfit = std::max(worst_misfit, rep.p_misfit[m]);
    }
    o.pass = o.pass && calibrated >= 45 && rejected == reps;
    o.detail += std::string(m == 0 ? "PPCA" : "; BPMF") + ": mean p in [0.3, 0.7] for " +
                std::to_string(calibrated) + "/50 (range " + num(lo, 3) + ".." + num(hi, 3) +
                "), misfit rejected " + std::to_string(rejected) + "/50 (max " + num(worst_misfit, 3) + ")";
  }
  return o;
}

// --- 4: Gibbs conditionals and subspace recovery ------------------------------

Outcome criterion_gibbs() {
  Outcome o{true, ""};
  int ok = 0, total = 0;
  double worst = 0.0;
  for (std::uint64_t seed : {41u, 42u}) {
    for (const auto& c : run_conjugacy_checks(seed, 10000)) {
      ++total;
      ok += c.ok(3.0) ? 1 : 0;
      worst = std::max({worst, c.mean_z(), c.var_z()});
      if (!c.ok(3.0)) o.detail += " [" + c.name + " z " + num(c.mean_z(), 3) + "/" + num(c.var_z(), 3) + "]";
    }
  }
  o.pass = ok == total;
  std::string angles;
  for (int m = 0; m < 2; ++m) {
    const PlfmSample smp = sample_plfm(2000, 19, 5, 2, 1e-2, 4000 + m);
    PlfmSpec spec;
    spec.kind = m == 0 ? ModelKind::PPCA : ModelKind::BPMF;
    spec.latent_dim = 5;
    spec.seed = 4100 + m;
    const auto draws = fit_gibbs(MaskedMatrix::dense(smp.x), smp.f, spec, ChainConfig{300, 150, 1});
    const double angle = max_principal_angle_deg(smp.w, draws.mean_loadings());
    o.pass = o.pass && angle < 10.0;
    angles += std::string(m == 0 ? " PPCA " : " BPMF ") + num(angle, 3) + " deg";
  }
  o.detail = std::to_string(ok) + "/" + std::to_string(total) + " conditional moments within 3 MC s.e. (max z " +
             num(worst, 3) + ")" + o.detail + "; subspace angle" + angles;
  return o;
}

// --- 5: beta regression --------------------------------------------------------

Outcome criterion_beta() {
  Outcome o{true, ""};
  // Gradient against central differences.
  Vector beta(3);
  beta << 0.4, -0.2, 0.1;
  const BetaSample g = sample_beta_regression(300, 0.2, beta, 15.0, 51);
  const BetaPrior prior;
  Rng rng(52);
  double worst_rel = 0.0;
  for (int point = 0; point < 20; ++point) {
    BetaParams p{0.5 * rng.normal(), Vector(3), std::exp(1.0 + rng.normal())};
    for (Index j = 0; j < 3; ++j) p.beta(j) = 0.5 * rng.normal();
    const auto ld = beta_log_likelihood(p, g.design, g.y, &prior);
    for (Index k = 0; k < 5; ++k) {
      auto at = [&](double h) {
        BetaParams q = p;
        if (k == 0) q.b0 += h;
        else if (k <= 3) q.beta(k - 1) += h;
        else q.phi += h;
        return beta_log_likelihood(q, g.design, g.y, &prior).value;
      };
      const double base = k == 0 ? p.b0 : k <= 3 ? p.beta(k - 1) : p.phi;
      const double h = 1e-5 * std::max(1.0, std::abs(base));
      const double fd = (at(h) - at(-h)) / (2.0 * h);
      worst_rel = std::max(worst_rel, std::abs(fd - ld.gradient(k)) / std::max(1.0, std::abs(ld.gradient(k))));
    }
  }
  o.pass = worst_rel < 1e-5;

  // Recovery at N=2000: coefficients and log phi (the sampled scale).
  Vector truth(4);
  truth << 0.5, -0.3, 0.0, 0.2;
  const double b0 = 0.1, phi = 30.0;
  BetaRegConfig cfg;
  cfg.n_warmup = 2000;
  cfg.n_samples = 2000;
  const BetaSample s = sample_beta_regression(2000, b0, truth, phi, 53);
  const BetaRegFit fit = fit_beta_regression(s.design, s.y, cfg, 54);
  const Vector mean = fit.draws.colwise().mean();
  double worst_err = std::abs(mean(0) - b0);
  for (Index j = 0; j < 4; ++j) worst_err = std::max(worst_err, std::abs(mean(1 + j) - truth(j)));
  const double log_phi_err = std::abs(fit.draws.col(5).array().log().mean() - std::log(phi));
  worst_err = std::max(worst_err, log_phi_err);
  o.pass = o.pass && worst_err < 0.1;

  // Interval coverage over repeated simulations.
  constexpr int sims = 100;
  std::vector<int> covered(sims, 0);
  std::vector<int> intervals(sims, 0);
  parallel_for(sims, resolve_threads(0), [&](std::size_t r) {
    const BetaSample d = sample_beta_regression(500, b0, truth, phi, derive_seed(55, r));
    BetaRegConfig c;
    c.n_warmup = 1000;
    c.n_samples = 2000;
    const BetaRegFit f = fit_beta_regression(d.design, d.y, c, derive_seed(56, r));
    Vector t(6);
    t << b0, truth, std::log(phi);
    for (Index k = 0; k < 6; ++k) {
      Vector col = f.draws.col(k);
      if (k == 5) col = col.array().log();
      std::vector<double> sorted(col.data(), col.data() + col.size());
      std::sort(sorted.begin(), sorted.end());
      const double lo = stats::sorted_quantile(sorted, 0.025);
      const double hi = stats::sorted_quantile(sorted, 0.975);
      covered[r] += t(k) >= lo && t(k) <= hi ? 1 : 0;
      ++intervals[r];
    }
  });
  const double coverage = static_cast<double>(std::accumulate(covered.begin(), covered.end(), 0)) /
                          static_cast<double>(std::accumulate(intervals.begin(), intervals.end(), 0));
  o.pass = o.pass && coverage >= 0.90 && coverage <= 0.99;
  o.detail = "max gradient rel. error " + num(worst_rel, 3) + " over 20 points; max |posterior mean - truth| " +
             num(worst_err, 3) + " at N=2000; 95% coverage " + num(100.0 * coverage, 4) + "% over " +
             std::to_string(sims) + " sims";
  return o;
}

// --- 6: average causal effect identities --------------------------------------

Outcome criterion_ace() {
  const PlfmSample smp = sample_plfm(300, 6, 2, 2, 0.3, 61);
  Dataset ds;
  ds.causes = smp.x;
  ds.causes.col(0).setConstant(0.25);  // do(x_0 = 0.25) is then the identity
  ds.covariates = smp.f;
  for (Index j = 0; j < 6; ++j) {
    ds.cause_names.push_back("c" + std::to_string(j));
    ds.cause_roles.push_back(Role::CauseVolume);
  }
  ds.covariate_names = {"age", "sex"};
  ds.age_index = 0;
  PlfmSpec spec;
  spec.latent_dim = 2;
  spec.seed = 62;
  const auto draws = fit_gibbs(MaskedMatrix::dense(ds.causes), ds.covariates, spec, ChainConfig{200, 100, 1});
  const auto z_hat = extract_substitute(draws);
  const auto design = residualize(ds, draws, z_hat);
  Rng rng(63);
  ds.outcome.resize(ds.n());
  for (Index i = 0; i < ds.n(); ++i) {
    const double mu = stats::logistic(-0.5 + 0.4 * design.residuals(i, 1) - 0.3 * ds.covariates(i, 0));
    const double a = rng.gamma(mu * 20.0, 1.0), b = rng.gamma((1.0 - mu) * 20.0, 1.0);
    ds.outcome(i) = std::clamp(a / (a + b), 1e-9, 1.0 - 1e-9);
  }
  BetaRegConfig cfg;
  cfg.n_warmup = 500;
  cfg.n_samples = 500;
  const BetaRegFit fit = fit_beta_regression(design.design(), ds.outcome, cfg, 64, design.names);
  const GateStatus gate{true, false, 0.5, 0.1};

  const Vector in_sample = mean_prediction(fit, design.design());
  const AceEstimate identity =
      average_causal_effect(ds, draws, z_hat, fit, {}, Intervention{{0}, Vector::Constant(1, 0.25)}, gate);
  const double identity_err = (identity.draws - in_sample).cwiseAbs().maxCoeff();

  Intervention a{{1, 3}, Vector(2)}, b{{1, 3}, Vector(2)};
  a.values << 1.0, -0.5;
  b.values << -1.0, 0.75;
  const AceEstimate ab = ace_contrast(ds, draws, z_hat, fit, {}, a, b, gate);
  const AceEstimate ba = ace_contrast(ds, draws, z_hat, fit, {}, b, a, gate);
  const bool antisymmetric = ab.draws == -ba.draws && ab.mean == -ba.mean;

  Outcome o;
  o.pass = identity_err <= 1e-12 && antisymmetric;
  o.detail = "identity intervention max per-draw deviation " + num(identity_err, 3) + " over " +
             std::to_string(identity.draws.size()) + " draws; contrast antisymmetry " +
             (antisymmetric ? "exact" : "violated") + " (ACE(a,b) mean " + num(ab.mean) + ")";
  return o;
}

// --- 7: residual property -----------------------------------------------------

Outcome criterion_residual() {
  const PlfmSample smp = sample_plfm(2000, 19, 5, 2, 1e-6, 71);
  PlfmSpec spec;
  spec.latent_dim = 5;
  spec.seed = 72;
  const auto draws = fit_gibbs(MaskedMatrix::dense(smp.x), smp.f, spec, ChainConfig{300, 150, 1});
  const auto z_hat = extract_substitute(draws);
  const Matrix r1 = residualize(smp.x, smp.f, draws, z_hat);
  const Matrix r2 = residualize(smp.x, smp.f, draws, z_hat);
  const double max_abs = r1.cwiseAbs().maxCoeff();
  const bool identical = std::memcmp(r1.data(), r2.data(), sizeof(double) * static_cast<std::size_t>(r1.size())) == 0;
  Outcome o;
  o.pass = max_abs < 0.05 && identical;
  o.detail = "noiseless residual max-norm " + num(max_abs, 3) + " (N=2000, D=19, K=5); repeated calls " +
             (identical ? "bit-identical" : "differ");
  return o;
}

// --- 8: CLI determinism -------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files[e.path().filename().string()] = slurp(e.path());
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DECONF_CLI_PATH + "\" " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_cli() {
  const fs::path root = fs::absolute("acceptance_cli");
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  struct Step {
    std::string name, dir, args;
  };
  const std::vector<Step> steps = {
      {"simulate", r + "/sim", "simulate --n 300 --seed 8"},
      {"fit", r + "/fit", "fit --config " + r + "/sim/roles.json --warmup 150 --samples 60 --seed 8"},
      {"check", r + "/fit", "check --draws " + r + "/fit/draws.bin --replicates 100 --seed 8"},
      {"effects", r + "/eff",
       "effects --draws " + r + "/fit/draws.bin --override-gate --set x1=1 --versus x1=-1 "
       "--param effects.n_warmup=300 --param effects.n_samples=300 --seed 8"},
      {"benchmark", r + "/bench",
       "benchmark --grid 1/1 2/1 --sims 2 --param benchmark.n=300 --param benchmark.n_warmup=60 "
       "--param benchmark.n_samples=30 --seed 8"},
  };
  Outcome o{true, ""};
  for (const auto& step : steps) {
    const std::string base = step.args + " --out-dir " + step.dir;
    // Snapshot only what this step writes (check shares its directory with fit).
    std::set<std::string> before;
    if (fs::exists(step.dir))
      for (const auto& [k, v] : snapshot(step.dir)) before.insert(k);
    const int first = run_cli(base + " --threads 1");
    auto a = snapshot(step.dir);
    const int second = run_cli(base + " --threads 3");
    auto b = snapshot(step.dir);
    std::vector<std::string> differing;
    int compared = 0;
    for (const auto& [name, bytes] : a) {
      if (before.count(name) && step.name == "check") continue;
      ++compared;
      if (!b.count(name) || b[name] != bytes) differing.push_back(name);
    }
    const bool ok = first == 0 && second == 0 && compared > 0 && differing.empty();
    o.pass = o.pass && ok;
    o.detail += (o.detail.empty() ? "" : "; ") + step.name + " " +
                (ok ? std::to_string(compared) + " files identical"
                    : "exit " + std::to_string(first) + "/" + std::to_string(second) + ", differing " +
                          std::to_string(differing.size()));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion_ordering}, {2, criterion_delta_trend}, {3, criterion_ppc},      {4, criterion_gibbs},
      {5, criterion_beta},     {6, criterion_ace},         {7, criterion_residual}, {8, criterion_cli},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::printf("criterion %d: %s  %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
