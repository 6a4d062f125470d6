#include "deconf/synth.hpp"

#include "deconf/csv.hpp"
#include "deconf/random.hpp"
#include "deconf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace deconf::synth {

std::string signal_name(CauseSignal s) {
  switch (s) {
    case CauseSignal::Fitted: return "fitted";
    case CauseSignal::Residual: return "residual";
    case CauseSignal::Raw: return "raw";
  }
  return "?";
}

CauseSignal parse_signal(const std::string& name) {
  if (name == "fitted") return CauseSignal::Fitted;
  if (name == "residual") return CauseSignal::Residual;
  if (name == "raw") return CauseSignal::Raw;
  throw UsageError("unknown cause signal '" + name + "' (expected fitted, residual or raw)");
}

void SynthConfig::validate() const {
  if (!(nu_x >= 0.0) || !(nu_z >= 0.0) || !(nu_eps() > 0.0)) {
    throw UsageError("variance shares need nu_x >= 0, nu_z >= 0 and nu_x + nu_z < 1");
  }
  if (n_clusters < 1) throw UsageError("n_clusters must be at least 1");
  if (!(band_lo > 0.0 && band_lo <= band_hi && band_hi < 100.0)) {
    throw UsageError("sparse band percentiles must satisfy 0 < lo <= hi < 100");
  }
  if (!(effect_scale > 0.0) || !(age_coef_scale >= 0.0)) throw UsageError("effect scales must be positive");
  if (k_fit < 1) throw UsageError("k_fit must be at least 1");
}

void SurrogateConfig::validate() const {
  if (n < 3 || d < 2) throw UsageError("surrogate needs n >= 3 and d >= 2");
  if (factors < 0) throw UsageError("surrogate factor count must be non-negative");
  if (!(noise_sd > 0.0)) throw UsageError("surrogate noise_sd must be positive");
}

Surrogate make_surrogate(const SurrogateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto normals = [&](Index r, Index c, double sd) {
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = sd * rng.normal();
    return m;
  };
  Surrogate s;
  s.age = normals(cfg.n, 1, 1.0);
  s.gender.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) s.gender(i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const Matrix g = normals(cfg.n, cfg.factors, 1.0);
  const Matrix loadings = normals(cfg.d, cfg.factors, cfg.factor_loading_sd);
  const Vector age_load = normals(cfg.d, 1, cfg.age_loading_sd);
  const Vector gender_load = normals(cfg.d, 1, cfg.gender_loading_sd);
  Matrix x = g * loadings.transpose() + s.age * age_load.transpose() +
             (s.gender.array() - 0.5).matrix() * gender_load.transpose() +
             normals(cfg.n, cfg.d, cfg.noise_sd);
  for (Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).mean();
    const double sd = stats::sample_sd(Vector(x.col(j)));
    x.col(j) = (x.col(j).array() - m) / sd;
  }
  s.causes = std::move(x);
  return s;
}

Matrix pca_top2(const Matrix& x) {
  if (x.cols() < 2 || x.rows() <= 2) throw UsageError("pca_top2 needs at least 2 columns and 3 rows");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  if (!(cov.trace() > 0.0)) throw DataError("pca_top2: data have no variance");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_top2: eigendecomposition failed");
  const Index d = x.cols();
  Matrix v(d, 2);
  for (Index c = 0; c < 2; ++c) {
    Vector col = eig.eigenvectors().col(d - 1 - c);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
    v.col(c) = col;
  }
  Matrix scores = centered * v;
  const double first_range = scores.col(0).maxCoeff() - scores.col(0).minCoeff();
  for (Index c = 0; c < 2; ++c) {
    const double lo = scores.col(c).minCoeff();
    const double range = scores.col(c).maxCoeff() - lo;
    // Round-off spread on a degenerate component is not a direction.
    if (range <= 1e-9 * first_range || range == 0.0) {
      scores.col(c).setZero();
    } else {
      scores.col(c) = (scores.col(c).array() - lo) / range;
    }
  }
  return scores;
}

namespace {

struct Lloyd {
  Eigen::VectorXi assign;
  Matrix centroids;
  double cost = 0.0;
  std::vector<double> trace;
};

double assign_points(const Matrix& pts, const Matrix& cen, Eigen::VectorXi& assign, Vector& dist2) {
  double cost = 0.0;
  for (Index i = 0; i < pts.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < cen.rows(); ++c) {
      const double dd = (pts.row(i) - cen.row(c)).squaredNorm();
      if (dd < best) {
        best = dd;
        arg = static_cast<int>(c);
      }
    }
    assign(i) = arg;
    dist2(i) = best;
    cost += best;
  }
  return cost;
}

Lloyd run_lloyd(const Matrix& pts, Index k, Rng& rng, int max_iter) {
  const Index n = pts.rows();
  Lloyd out;
  out.centroids.resize(k, pts.cols());
  // k-means++ seeding.
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  Index first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  out.centroids.row(0) = pts.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Vector d2 = (pts.rowwise() - pts.row(first)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target <= 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // All remaining points coincide with a centroid: take an unused one.
      std::vector<Index> unused;
      for (Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
      pick = unused[static_cast<std::size_t>(rng.below(unused.size()))];
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    out.centroids.row(c) = pts.row(pick);
    d2 = d2.cwiseMin((pts.rowwise() - pts.row(pick)).rowwise().squaredNorm());
  }

  out.assign = Eigen::VectorXi::Constant(n, -1);
  Eigen::VectorXi next(n);
  Vector dist2(n);
  for (int it = 0; it < max_iter; ++it) {
    const double cost = assign_points(pts, out.centroids, next, dist2);
    out.trace.push_back(cost);
    out.cost = cost;
    if (next == out.assign) break;
    out.assign = next;
    Matrix sums = Matrix::Zero(k, pts.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(out.assign(i)) += pts.row(i);
      ++counts(out.assign(i));
    }
    for (Index c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        out.centroids.row(c) = sums.row(c) / static_cast<double>(counts(c));
        continue;
      }
      // Empty cluster: move it onto the worst-served point that is not the
      // only member of its own cluster.
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (counts(out.assign(i)) > 1 && dist2(i) > far_d) {
          far_d = dist2(i);
          far = i;
        }
      }
      if (far >= 0) {
        --counts(out.assign(far));
        out.assign(far) = static_cast<int>(c);
        counts(c) = 1;
        dist2(far) = 0.0;
        out.centroids.row(c) = pts.row(far);
      }
    }
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1 || points.rows() < k) throw UsageError("kmeans needs 1 <= k <= number of points");
  if (restarts < 1 || max_iter < 1) throw UsageError("kmeans needs restarts >= 1 and max_iter >= 1");
  Lloyd best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Lloyd run = run_lloyd(points, k, rng, max_iter);
    if (run.cost < best.cost) best = std::move(run);
  }
  // Relabel by the first centroid coordinate so labels are comparable runs.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return best.centroids(a, 0) < best.centroids(b, 0);
  });
  std::vector<int> rank(static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);

  KMeansResult out;
  out.labels.resize(points.rows());
  for (Index i = 0; i < points.rows(); ++i) out.labels(i) = rank[static_cast<std::size_t>(best.assign(i))] + 1;
  out.centroids.resize(k, points.cols());
  for (Index c = 0; c < k; ++c) out.centroids.row(c) = best.centroids.row(order[static_cast<std::size_t>(c)]);
  out.cost = best.cost;
  out.cost_trace = std::move(best.trace);
  return out;
}

Vector sparse_normal(Index n, double sd, double band_lo, double band_hi, std::uint64_t seed) {
  if (!(sd > 0.0)) throw UsageError("sparse_normal needs sd > 0");
  if (!(band_lo > 0.0 && band_lo <= band_hi && band_hi < 100.0)) {
    throw UsageError("sparse_normal band must satisfy 0 < lo <= hi < 100");
  }
  const double lo = stats::normal_quantile(band_lo / 100.0);
  const double hi = stats::normal_quantile(band_hi / 100.0);
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    const double z = rng.normal();
    // Thresholds apply to the unit-scale draw so scaling by sd commutes.
    v(i) = (z > lo && z < hi) ? 0.0 : sd * z;
  }
  return v;
}

namespace {

double sd_of(const Vector& v) { return stats::sample_sd(v); }

// term * sqrt(weight) / sd(term), or zeros when either factor vanishes.
Vector weighted(const Vector& term, double weight) {
  const double sd = sd_of(term);
  if (weight <= 0.0 || !(sd > 0.0)) return Vector::Zero(term.size());
  return term * (std::sqrt(weight) / sd);
}

}  // namespace

SynthDataset generate(const Matrix& causes, const Vector& age, const Vector& gender,
                      const SynthConfig& cfg) {
  cfg.validate();
  const Index n = causes.rows();
  const Index d = causes.cols();
  if (age.size() != n || gender.size() != n) throw UsageError("age/gender length differs from causes");
  if (n < std::max<Index>(3, cfg.n_clusters) || d < 2) throw UsageError("generate needs n >= 3, n >= k and d >= 2");
  if (!causes.allFinite() || !age.allFinite() || !gender.allFinite()) throw DataError("non-finite generator input");

  Matrix f(n, 2);
  f.col(0) = age;
  f.col(1) = gender;
  const stats::OlsSplit split = stats::regress_out(f, causes);
  const Matrix& signal = cfg.signal == CauseSignal::Fitted     ? split.fitted
                         : cfg.signal == CauseSignal::Residual ? split.residuals
                                                               : causes;

  SynthDataset out;
  const KMeansResult km = kmeans(pca_top2(causes), cfg.n_clusters, derive_seed(cfg.seed, "kmeans"));
  out.u = km.labels.cast<double>();
  out.true_beta = sparse_normal(d, cfg.effect_scale, cfg.band_lo, cfg.band_hi, derive_seed(cfg.seed, "beta"));
  {
    Rng rng(derive_seed(cfg.seed, "gamma"));
    out.true_gamma = cfg.age_coef_scale * rng.normal();
  }
  out.sigma_k.resize(cfg.n_clusters);
  {
    Rng rng(derive_seed(cfg.seed, "sigma"));
    for (Index k = 0; k < cfg.n_clusters; ++k) out.sigma_k(k) = 1.0 + rng.inverse_gamma(3.0, 1.0);
  }
  Vector eps(n);
  {
    Rng rng(derive_seed(cfg.seed, "noise"));
    for (Index i = 0; i < n; ++i) eps(i) = out.sigma_k(km.labels(i) - 1) * rng.normal();
  }

  const Vector x_term = signal * out.true_beta;
  const double sigma_x = sd_of(x_term);
  out.terms.resize(n, 4);
  out.terms.col(0) = weighted(x_term, cfg.nu_x);
  out.terms.col(1) = weighted(out.u, 0.9 * cfg.nu_z);
  out.terms.col(2) = weighted(age * out.true_gamma, 0.1 * cfg.nu_z);
  out.terms.col(3) = weighted(eps, cfg.nu_eps());
  const Vector lin = out.terms.rowwise().sum();

  out.true_effects = Vector::Zero(d);
  if (cfg.nu_x > 0.0 && sigma_x > 0.0) out.true_effects = out.true_beta * (std::sqrt(cfg.nu_x) / sigma_x);

  // Balance the classes: the same uniforms are reused for every candidate
  // intercept, so the positive fraction is monotone in b0.
  Vector uni(n);
  {
    Rng rng(derive_seed(cfg.seed, "bernoulli"));
    for (Index i = 0; i < n; ++i) uni(i) = rng.uniform();
  }
  auto fraction = [&](double b0) {
    Index pos = 0;
    for (Index i = 0; i < n; ++i) pos += uni(i) < stats::logistic(b0 + lin(i)) ? 1 : 0;
    return static_cast<double>(pos) / static_cast<double>(n);
  };
  double lo = -50.0, hi = 50.0;
  double best_b0 = 0.0, best_gap = std::numeric_limits<double>::infinity(), best_frac = 0.0;
  for (int step = 0; step < 100; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double frac = fraction(mid);
    if (std::abs(frac - 0.5) < best_gap) {
      best_gap = std::abs(frac - 0.5);
      best_b0 = mid;
      best_frac = frac;
    }
    if (frac == 0.5) break;
    if (frac < 0.5) lo = mid;
    else hi = mid;
  }
  if (best_gap > 0.02) {
    throw NumericalError("could not balance the outcome: best positive fraction " +
                         csv::format_double(best_frac) + " after 100 bisection steps");
  }
  out.b0 = best_b0;
  out.positive_fraction = best_frac;

  Dataset& ds = out.data;
  ds.causes = causes;
  ds.covariates = f;
  ds.outcome.resize(n);
  for (Index i = 0; i < n; ++i) ds.outcome(i) = uni(i) < stats::logistic(best_b0 + lin(i)) ? 1.0 : 0.0;
  for (Index j = 0; j < d; ++j) {
    ds.cause_names.push_back("x" + std::to_string(j + 1));
    ds.cause_roles.push_back(Role::CauseVolume);
  }
  ds.covariate_names = {"age", "gender"};
  ds.age_index = 0;
  ds.outcome_name = "y";
  ds.validate();
  return out;
}

SynthDataset generate(const SurrogateConfig& surrogate, const SynthConfig& cfg) {
  const Surrogate s = make_surrogate(surrogate, derive_seed(cfg.seed, "surrogate"));
  return generate(s.causes, s.age, s.gender, cfg);
}

Eigen::Vector3d variance_shares(const SynthDataset& ds) {
  auto var = [](const Vector& v) {
    const double s = stats::sample_sd(v);
    return s * s;
  };
  return {var(ds.terms.col(0)), var(ds.terms.col(1)) + var(ds.terms.col(2)), var(ds.terms.col(3))};
}

std::string GridPoint::label() const {
  auto fmt = [](double v) {
    if (v == std::floor(v)) return std::to_string(static_cast<long long>(v));
    return csv::format_double(v);
  };
  return fmt(a) + "/" + fmt(b);
}

std::vector<GridPoint> default_grid() {
  return {{10, 1}, {5, 1}, {4, 1}, {3, 1}, {5, 2}, {5, 3}, {3, 2}, {1, 1},
          {2, 3},  {3, 5}, {2, 5}, {1, 3}, {1, 4}, {1, 5}, {1, 10}};
}

}  // namespace deconf::synth
