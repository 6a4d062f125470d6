#pragma once

#include "deconf/data.hpp"
#include "deconf/plfm.hpp"
#include "deconf/ppc.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace deconf::synth {

/// Which version of the causes drives the outcome's causal term.
///   Fitted:   x_hat = E[X | age, gender] (per-column least squares fit)
///   Residual: X - E[X | age, gender]
///   Raw:      X itself
enum class CauseSignal { Fitted, Residual, Raw };

std::string signal_name(CauseSignal s);
CauseSignal parse_signal(const std::string& name);

struct SynthConfig {
  double nu_x = 0.45;
  double nu_z = 0.45;
  Index n_clusters = 4;
  double band_lo = 20.0;  // percentiles of the sparse-normal zero band
  double band_hi = 80.0;
  double effect_scale = 0.5;
  double age_coef_scale = 0.2;
  Index k_fit = 5;
  CauseSignal signal = CauseSignal::Fitted;
  std::uint64_t seed = 0;

  double nu_eps() const { return 1.0 - nu_x - nu_z; }
  void validate() const;
};

/// Built-in stand-in for real causes: D correlated Gaussians driven by a
/// two-factor structure plus linear age and gender effects.
struct SurrogateConfig {
  Index n = 2000;
  Index d = 19;
  Index factors = 2;
  double factor_loading_sd = 0.8;
  double age_loading_sd = 0.5;
  double gender_loading_sd = 0.3;
  double noise_sd = 0.6;

  void validate() const;
};

struct Surrogate {
  Matrix causes;  // standardized columns
  Vector age;
  Vector gender;  // 0/1
};

Surrogate make_surrogate(const SurrogateConfig& cfg, std::uint64_t seed);

struct SynthDataset {
  Dataset data;          // causes, covariates (age, gender), binary outcome
  Vector u;              // cluster labels 1..k
  Vector true_beta;      // sparse-normal draws
  Vector true_effects;   // beta * sqrt(nu_x) / sigma_x
  double true_gamma = 0.0;
  Vector sigma_k;        // per-cluster noise scale
  double b0 = 0.0;
  double positive_fraction = 0.0;
  /// Weighted linear-predictor terms, columns: causes, u, age, noise.
  Matrix terms;
};

/// Two leading principal-component scores, each min-max scaled to [0, 1].
/// A component with no spread scales to all zeros.
Matrix pca_top2(const Matrix& x);

struct KMeansResult {
  Eigen::VectorXi labels;  // 1..k, ordered by the first centroid coordinate
  Matrix centroids;        // k x dim, same order
  double cost = 0.0;       // within-cluster sum of squares
  std::vector<double> cost_trace;  // Lloyd objective of the winning restart
};

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint (at most
/// max_iter), best of `restarts` by cost. Empty clusters are reseeded at the
/// point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts = 10,
                    int max_iter = 300);

/// Normal(0, sd^2) draws with everything between the given percentiles of
/// that distribution set to zero.
Vector sparse_normal(Index n, double sd, double band_lo, double band_hi, std::uint64_t seed);

/// Semi-synthetic outcome on top of given causes and (age, gender).
SynthDataset generate(const Matrix& causes, const Vector& age, const Vector& gender,
                      const SynthConfig& cfg);

/// Same, on a fresh surrogate.
SynthDataset generate(const SurrogateConfig& surrogate, const SynthConfig& cfg);

/// Sum of the per-term variances: (cause term, confounder terms, noise term).
Eigen::Vector3d variance_shares(const SynthDataset& ds);

struct GridPoint {
  double a = 1.0;  // nu_x : nu_z = a : b
  double b = 1.0;
  std::string label() const;
};

/// The standard fifteen nu_x : nu_z ratios, from 10/1 down to 1/10.
std::vector<GridPoint> default_grid();

struct BenchmarkConfig {
  std::vector<GridPoint> grid = default_grid();
  double nu_eps = 0.1;
  Index n_sims = 50;
  SurrogateConfig surrogate;
  SynthConfig synth;  // nu_x, nu_z, seed are set per cell
  PlfmSpec plfm;      // kind is set per arm
  ChainConfig chain{300, 150, 1};
  double hold_fraction = 0.2;
  PpcConfig ppc{100, 0.1, 30, 1};
  double logistic_l2 = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

enum Arm { kNonCausal = 0, kRoa, kPpca, kBpmf, kOracle, kArmCount };
const char* arm_name(int arm);

struct SimulationResult {
  double rmse[kArmCount];  // RMSE x 100, NaN when the arm was excluded
  double mean_p[2];        // PPC mean p for PPCA, BPMF
  bool excluded[2];
  std::string failure[2];
};

struct CellResult {
  GridPoint point;
  double nu_x = 0.0, nu_z = 0.0;
  std::vector<SimulationResult> sims;
  double mean_rmse[kArmCount];
  Index n_used[kArmCount];
  Index excluded_ppca = 0, excluded_bpmf = 0;
  double mean_p_ppca = 0.0, mean_p_bpmf = 0.0;

  double delta(int arm) const { return mean_rmse[kNonCausal] - mean_rmse[arm]; }
};

struct BenchmarkTable {
  std::vector<CellResult> cells;
};

/// One simulation: generate, fit the five logistic arms, score them.
SimulationResult run_simulation(const BenchmarkConfig& cfg, double nu_x, double nu_z,
                                std::uint64_t seed);

BenchmarkTable run_benchmark(const BenchmarkConfig& cfg);

/// ratio, Non-causal, ROA, PPCA, BPMF, Oracle, dROA, dPPCA, dBPMF, then PPC
/// exclusion counts and mean p-values.
void write_benchmark_table(std::ostream& out, const BenchmarkTable& table,
                           const std::vector<std::string>& comments);

/// Every simulation of every cell, one line each.
void write_benchmark_sims(std::ostream& out, const BenchmarkTable& table,
                          const std::vector<std::string>& comments);

}  // namespace deconf::synth
