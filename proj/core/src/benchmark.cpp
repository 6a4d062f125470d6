#include "deconf/synth.hpp"

#include "deconf/csv.hpp"
#include "deconf/outcome.hpp"
#include "deconf/parallel.hpp"
#include "deconf/random.hpp"
#include "deconf/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace deconf::synth {

const char* arm_name(int arm) {
  static const char* names[kArmCount] = {"Non-causal", "ROA", "PPCA", "BPMF", "Oracle"};
  return names[arm];
}

void BenchmarkConfig::validate() const {
  if (grid.empty()) throw UsageError("benchmark grid is empty");
  for (const auto& g : grid) {
    if (!(g.a >= 0.0) || !(g.b >= 0.0) || !(g.a + g.b > 0.0)) {
      throw UsageError("benchmark grid ratios must be non-negative and not both zero");
    }
  }
  if (!(nu_eps > 0.0 && nu_eps < 1.0)) throw UsageError("benchmark nu_eps must lie in (0, 1)");
  if (n_sims < 1) throw UsageError("n_sims must be at least 1");
  surrogate.validate();
  chain.validate();
  ppc.validate();
  if (!(hold_fraction > 0.0 && hold_fraction < 0.5)) throw UsageError("hold_fraction must lie in (0, 0.5)");
}

namespace {

double rmse100(const Vector& coef, const Vector& truth) {
  return 100.0 * std::sqrt((coef.head(truth.size()) - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Matrix hstack(std::initializer_list<const Matrix*> parts) {
  Index cols = 0;
  for (const Matrix* m : parts) cols += m->cols();
  Matrix out(parts.begin()[0]->rows(), cols);
  Index at = 0;
  for (const Matrix* m : parts) {
    out.middleCols(at, m->cols()) = *m;
    at += m->cols();
  }
  return out;
}

}  // namespace

SimulationResult run_simulation(const BenchmarkConfig& cfg, double nu_x, double nu_z,
                                std::uint64_t seed) {
  SimulationResult res;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double& r : res.rmse) r = nan;
  for (int m = 0; m < 2; ++m) {
    res.mean_p[m] = nan;
    res.excluded[m] = false;
  }

  SynthConfig sc = cfg.synth;
  sc.nu_x = nu_x;
  sc.nu_z = nu_z;
  sc.seed = derive_seed(seed, "synth");
  const Surrogate sur = make_surrogate(cfg.surrogate, derive_seed(seed, "surrogate"));
  const SynthDataset syn = generate(sur.causes, sur.age, sur.gender, sc);
  const Matrix& x = syn.data.causes;
  const Vector& y = syn.data.outcome;
  const Vector& truth = syn.true_effects;
  const Matrix age = syn.data.covariates.col(0);

  auto logistic_coef = [&](const Matrix& design) {
    return Vector(fit_logistic(design, y, cfg.logistic_l2).tail(design.cols()));
  };

  res.rmse[kNonCausal] = rmse100(logistic_coef(x), truth);
  res.rmse[kRoa] = rmse100(logistic_coef(stats::regress_out(age, x).residuals), truth);
  const Matrix u = syn.u;
  res.rmse[kOracle] = rmse100(logistic_coef(hstack({&x, &age, &u})), truth);

  // Substitute-confounder arms share one holdout mask.
  const auto [std_ds, standardization] = standardize(syn.data);
  const HoldoutSplit split = split_holdout(std_ds.causes, cfg.hold_fraction, derive_seed(seed, "holdout"));
  for (int m = 0; m < 2; ++m) {
    const ModelKind kind = m == 0 ? ModelKind::PPCA : ModelKind::BPMF;
    const int arm = m == 0 ? kPpca : kBpmf;
    try {
      PlfmSpec spec = cfg.plfm;
      spec.kind = kind;
      spec.latent_dim = sc.k_fit;
      spec.seed = derive_seed(seed, m == 0 ? "fit-ppca" : "fit-bpmf");
      const PosteriorDraws draws = fit_gibbs(split.observed, std_ds.covariates, spec, cfg.chain);
      const PpcReport report = bayesian_p_values(draws, split.observed, split.holdout, std_ds.covariates,
                                                 cfg.ppc, derive_seed(seed, m == 0 ? "ppc-ppca" : "ppc-bpmf"));
      res.mean_p[m] = report.mean_p;
      if (!report.passed) {
        res.excluded[m] = true;
        res.failure[m] = "ppc gate";
        continue;
      }
      const SubstituteConfounder z_hat = extract_substitute(draws);
      const ResidualizedDesign design = residualize(std_ds, draws, z_hat, DesignOptions{});
      res.rmse[arm] = rmse100(logistic_coef(design.design()), truth);
    } catch (const Error& e) {
      res.excluded[m] = true;
      res.failure[m] = e.what();
    }
  }
  return res;
}

BenchmarkTable run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  BenchmarkTable table;
  const auto n_cells = cfg.grid.size();
  const auto n_sims = static_cast<std::size_t>(cfg.n_sims);
  table.cells.resize(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    auto& cell = table.cells[c];
    cell.point = cfg.grid[c];
    const double share = 1.0 - cfg.nu_eps;
    cell.nu_x = share * cell.point.a / (cell.point.a + cell.point.b);
    cell.nu_z = share * cell.point.b / (cell.point.a + cell.point.b);
    cell.sims.resize(n_sims);
  }

  parallel_for(n_cells * n_sims, resolve_threads(cfg.threads), [&](std::size_t job) {
    const std::size_t c = job / n_sims;
    const std::size_t s = job % n_sims;
    auto& cell = table.cells[c];
    cell.sims[s] = run_simulation(cfg, cell.nu_x, cell.nu_z, derive_seed(cfg.seed, c, s));
  });

  for (auto& cell : table.cells) {
    double p_sum[2] = {0.0, 0.0};
    Index p_count[2] = {0, 0};
    for (int a = 0; a < kArmCount; ++a) {
      double sum = 0.0;
      Index used = 0;
      for (const auto& sim : cell.sims) {
        if (std::isfinite(sim.rmse[a])) {
          sum += sim.rmse[a];
          ++used;
        }
      }
      cell.n_used[a] = used;
      cell.mean_rmse[a] = used > 0 ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    }
    for (const auto& sim : cell.sims) {
      for (int m = 0; m < 2; ++m) {
        if (std::isfinite(sim.mean_p[m])) {
          p_sum[m] += sim.mean_p[m];
          ++p_count[m];
        }
      }
      cell.excluded_ppca += sim.excluded[0] ? 1 : 0;
      cell.excluded_bpmf += sim.excluded[1] ? 1 : 0;
    }
    cell.mean_p_ppca = p_count[0] ? p_sum[0] / static_cast<double>(p_count[0]) : 0.0;
    cell.mean_p_bpmf = p_count[1] ? p_sum[1] / static_cast<double>(p_count[1]) : 0.0;
  }
  return table;
}

namespace {

std::string fmt3(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void write_benchmark_table(std::ostream& out, const BenchmarkTable& table,
                           const std::vector<std::string>& comments) {
  csv::write_comments(out, comments);
  out << "ratio,Non-causal,ROA,PPCA,BPMF,Oracle,dROA,dPPCA,dBPMF,n_sims,"
         "excluded_PPCA,excluded_BPMF,mean_p_PPCA,mean_p_BPMF\n";
  for (const auto& c : table.cells) {
    out << c.point.label();
    for (int a = 0; a < kArmCount; ++a) out << ',' << fmt3(c.mean_rmse[a]);
    out << ',' << fmt3(c.delta(kRoa)) << ',' << fmt3(c.delta(kPpca)) << ',' << fmt3(c.delta(kBpmf))
        << ',' << c.sims.size() << ',' << c.excluded_ppca << ',' << c.excluded_bpmf << ','
        << fmt3(c.mean_p_ppca) << ',' << fmt3(c.mean_p_bpmf) << '\n';
  }
}

void write_benchmark_sims(std::ostream& out, const BenchmarkTable& table,
                          const std::vector<std::string>& comments) {
  csv::write_comments(out, comments);
  out << "ratio,sim,Non-causal,ROA,PPCA,BPMF,Oracle,mean_p_PPCA,mean_p_BPMF,note_PPCA,note_BPMF\n";
  for (const auto& c : table.cells) {
    for (std::size_t s = 0; s < c.sims.size(); ++s) {
      const auto& r = c.sims[s];
      out << c.point.label() << ',' << s + 1;
      for (int a = 0; a < kArmCount; ++a) {
        out << ',' << (std::isfinite(r.rmse[a]) ? csv::format_double(r.rmse[a]) : "NA");
      }
      for (int m = 0; m < 2; ++m) {
        out << ',' << (std::isfinite(r.mean_p[m]) ? csv::format_double(r.mean_p[m]) : "NA");
      }
      for (int m = 0; m < 2; ++m) {
        std::string note = r.failure[m];
        for (char& ch : note)
          if (ch == ',' || ch == '\n') ch = ';';
        out << ',' << note;
      }
      out << '\n';
    }
  }
}

}  // namespace deconf::synth
