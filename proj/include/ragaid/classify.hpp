/// @file classify.hpp
/// @brief Distribution distances, 1-NN search and Gaussian/GMM Bayes classification.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ragaid/error.hpp"
#include "ragaid/features.hpp"

namespace ragaid {

enum class DistanceMetric { CityBlock, Euclidean, Bhattacharyya };

inline std::string_view to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::CityBlock: return "cityblock";
    case DistanceMetric::Euclidean: return "euclidean";
    case DistanceMetric::Bhattacharyya: return "bhattacharyya";
  }
  return "?";
}

inline DistanceMetric parse_metric(std::string_view s) {
  if (s == "cityblock" || s == "CityBlock") return DistanceMetric::CityBlock;
  if (s == "euclidean" || s == "Euclidean") return DistanceMetric::Euclidean;
  if (s == "bhattacharyya" || s == "Bhattacharyya") return DistanceMetric::Bhattacharyya;
  throw Error(ErrorCode::InvalidConfig, "unknown metric '" + std::string(s) + "'");
}

/// Lower clamp on the Bhattacharyya coefficient; disjoint supports map to -ln(1e-300) ~ 690.78.
inline constexpr double kBhattacharyyaFloor = 1e-300;

inline double distance(std::span<const double> p, std::span<const double> q, DistanceMetric m) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::BinCountMismatch,
                std::to_string(p.size()) + " vs " + std::to_string(q.size()) + " bins");
  }
  double acc = 0.0;
  switch (m) {
    case DistanceMetric::CityBlock:
      for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
      return acc;
    case DistanceMetric::Euclidean:
      for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(acc);
    case DistanceMetric::Bhattacharyya:
      for (std::size_t i = 0; i < p.size(); ++i) acc += std::sqrt(p[i] * q[i]);
      return -std::log(std::clamp(acc, kBhattacharyyaFloor, 1.0));
  }
  return acc;
}

inline double distance(const PitchDistribution& p, const PitchDistribution& q, DistanceMetric m) {
  return distance(std::span<const double>(p.values), std::span<const double>(q.values), m);
}

struct LabeledSample {
  std::string sample_id;
  std::string raga_label;
  double tonic_hz = 0.0;
  PitchDistribution pd;  ///< tonic-aligned: bin 0 is the sample's tonic
};

/// Instrumentation for cost assertions.
struct SearchStats {
  std::size_t distance_evaluations = 0;
};

struct ClassificationResult {
  std::string label;
  double score = 0.0;              ///< NN distance, or the winning posterior for Bayes
  std::string neighbor_id;         ///< NN only
  std::size_t neighbor_index = 0;  ///< NN only, position in the database
  std::vector<std::string> classes;  ///< Bayes only, class order of `posterior`
  std::vector<double> posterior;     ///< Bayes only
};

/// @brief 1-NN over `db`; ties go to the earliest entry.
inline ClassificationResult nn_classify(const PitchDistribution& query, std::span<const LabeledSample> db,
                                        DistanceMetric metric, SearchStats* stats = nullptr) {
  if (db.empty()) throw Error(ErrorCode::EmptyDatabase, "empty database");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double d = distance(query, db[i].pd, metric);
    if (stats) ++stats->distance_evaluations;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  ClassificationResult r;
  r.label = db[best].raga_label;
  r.score = best_d;
  r.neighbor_id = db[best].sample_id;
  r.neighbor_index = best;
  return r;
}

// ---------------------------------------------------------------------------
// Bayes classification
// ---------------------------------------------------------------------------

enum class DensityKind { MVG, GMM };
enum class PriorKind { Uniform, Empirical };

inline std::string_view to_string(DensityKind k) { return k == DensityKind::MVG ? "MVG" : "GMM"; }
inline std::string_view to_string(PriorKind k) { return k == PriorKind::Uniform ? "uniform" : "empirical"; }

struct BayesConfig {
  DensityKind kind = DensityKind::MVG;
  int gmm_components = 3;
  PriorKind priors = PriorKind::Uniform;
  int max_dimensions = 0;  ///< project onto this many principal components first; 0 keeps all bins
  std::uint64_t seed = 0;  ///< GMM initialization
  int max_iterations = 200;
  double tolerance = 1e-8;
};

/// One Gaussian with its Cholesky factor cached for evaluation.
struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd chol_lower;  ///< L with covariance = L L^T
  double log_det = 0.0;

  void factorize() {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance, "covariance not positive definite after ridge");
    }
    chol_lower = llt.matrixL();
    log_det = 2.0 * chol_lower.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) throw Error(ErrorCode::SingularCovariance, "non-finite log determinant");
  }

  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
    const double d = static_cast<double>(x.size());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
  }
};

struct ClassDensity {
  std::vector<GaussianComponent> components;

  double log_likelihood(const Eigen::VectorXd& x) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(components.size());
    for (const auto& c : components) {
      terms.push_back(std::log(c.weight) + c.log_density(x));
      mx = std::max(mx, terms.back());
    }
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
  }
};

struct BayesModel {
  DensityKind kind = DensityKind::MVG;
  int gmm_components = 1;
  std::size_t input_dimension = 0;
  std::vector<std::string> classes;
  std::vector<double> priors;
  std::vector<ClassDensity> densities;
  // Optional projection: x -> basis^T (x - center). Empty basis means identity.
  Eigen::VectorXd projection_center;
  Eigen::MatrixXd projection_basis;

  Eigen::VectorXd project(std::span<const double> values) const {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (projection_basis.size() == 0) return x;
    return projection_basis.transpose() * (x - projection_center);
  }
};

/// @brief Posterior via log-sum-exp; ties in the argmax go to the lower class index.
inline std::vector<double> posterior_from_log_joint(std::span<const double> log_joint) {
  std::vector<double> post(log_joint.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : log_joint) mx = std::max(mx, v);
  if (!std::isfinite(mx)) {
    // Every class has zero joint probability; fall back to uniform.
    for (double& p : post) p = 1.0 / static_cast<double>(post.size());
    return post;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < post.size(); ++i) {
    post[i] = std::exp(log_joint[i] - mx);
    s += post[i];
  }
  for (double& p : post) p /= s;
  return post;
}

namespace detail {

inline constexpr double kRidgeScale = 1e-6;
inline constexpr double kRidgeFloor = 1e-12;

/// Weighted ML mean and covariance (no ridge).
inline void weighted_moments(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& w,
                             Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const auto d = xs.front().size();
  double total = 0.0;
  mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mean += w[i] * xs[i];
    total += w[i];
  }
  mean /= total;
  cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Eigen::VectorXd c = xs[i] - mean;
    cov.noalias() += w[i] * c * c.transpose();
  }
  cov /= total;
}

/// Adds lambda I with lambda = 1e-6 * mean diagonal; a zero-scatter covariance borrows the pooled scale.
inline void add_ridge(Eigen::MatrixXd& cov, double pooled_mean_diag) {
  const double own = cov.diagonal().mean();
  double lambda = kRidgeScale * (own > 0.0 ? own : pooled_mean_diag);
  if (!(lambda > 0.0)) lambda = kRidgeFloor;
  cov.diagonal().array() += lambda;
}

inline GaussianComponent fit_gaussian(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& w,
                                      double pooled_mean_diag) {
  GaussianComponent g;
  weighted_moments(xs, w, g.mean, g.covariance);
  add_ridge(g.covariance, pooled_mean_diag);
  g.factorize();
  return g;
}

/// k-means++ seeding: first centre uniform, later ones proportional to squared distance.
inline std::vector<std::size_t> kmeanspp_seeds(const std::vector<Eigen::VectorXd>& xs, int k,
                                                std::mt19937_64& rng) {
  std::vector<std::size_t> seeds;
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  seeds.push_back(pick(rng));
  std::vector<double> d2(xs.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(seeds.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      d2[i] = std::min(d2[i], (xs[i] - xs[seeds.back()]).squaredNorm());
      total += d2[i];
    }
    std::size_t next = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (next = 0; next + 1 < xs.size(); ++next) {
        target -= d2[next];
        if (target <= 0.0 && d2[next] > 0.0) break;
      }
    } else {
      // All remaining points coincide with a centre; take the first unused index.
      while (std::find(seeds.begin(), seeds.end(), next) != seeds.end()) ++next;
    }
    seeds.push_back(next);
  }
  return seeds;
}

inline ClassDensity fit_gmm(const std::vector<Eigen::VectorXd>& xs, int m, double pooled_mean_diag,
                            const BayesConfig& cfg, std::mt19937_64& rng) {
  const std::size_t n = xs.size();
  ClassDensity density;

  // Hard assignment to the nearest k-means++ seed gives the initial responsibilities.
  const auto seeds = kmeanspp_seeds(xs, m, rng);
  std::vector<std::vector<double>> resp(static_cast<std::size_t>(m), std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < seeds.size(); ++c) {
      const double d = (xs[i] - xs[seeds[c]]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    resp[best][i] = 1.0;
  }

  auto m_step = [&](std::vector<GaussianComponent>& comps) {
    for (int c = 0; c < m; ++c) {
      double nk = 0.0;
      for (double r : resp[static_cast<std::size_t>(c)]) nk += r;
      if (nk < 1e-12) continue;  // empty component keeps its previous parameters
      auto g = fit_gaussian(xs, resp[static_cast<std::size_t>(c)], pooled_mean_diag);
      g.weight = nk / static_cast<double>(n);
      comps[static_cast<std::size_t>(c)] = std::move(g);
    }
  };

  density.components.resize(static_cast<std::size_t>(m));
  m_step(density.components);
  // Components empty from the start (duplicate seeds) borrow the whole-class fit with a tiny weight.
  for (auto& c : density.components) {
    if (c.mean.size() == 0) {
      c = fit_gaussian(xs, std::vector<double>(n, 1.0), pooled_mean_diag);
      c.weight = 1e-12;
    }
  }

  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(m));
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < m; ++c) {
        const auto& comp = density.components[static_cast<std::size_t>(c)];
        terms[static_cast<std::size_t>(c)] = std::log(comp.weight) + comp.log_density(xs[i]);
        mx = std::max(mx, terms[static_cast<std::size_t>(c)]);
      }
      double s = 0.0;
      for (int c = 0; c < m; ++c) s += std::exp(terms[static_cast<std::size_t>(c)] - mx);
      for (int c = 0; c < m; ++c) {
        resp[static_cast<std::size_t>(c)][i] = std::exp(terms[static_cast<std::size_t>(c)] - mx) / s;
      }
      loglik += mx + std::log(s);
    }
    m_step(density.components);
    if (std::abs(loglik - prev) < cfg.tolerance * std::max(1.0, std::abs(loglik))) break;
    prev = loglik;
  }
  return density;
}

}  // namespace detail

/// @brief Fits one density per raga (class order = first appearance in `db`).
inline BayesModel fit_bayes(std::span<const LabeledSample> db, const BayesConfig& cfg) {
  if (db.empty()) throw Error(ErrorCode::EmptyDatabase, "empty database");
  const std::size_t dim = db.front().pd.size();
  for (const auto& s : db) {
    if (s.pd.size() != dim) throw Error(ErrorCode::BinCountMismatch, "mixed bin counts in training set");
  }
  if (cfg.kind == DensityKind::GMM && cfg.gmm_components < 1) {
    throw Error(ErrorCode::InvalidConfig, "gmm_components must be >= 1");
  }

  BayesModel model;
  model.kind = cfg.kind;
  model.gmm_components = cfg.kind == DensityKind::GMM ? cfg.gmm_components : 1;
  model.input_dimension = dim;

  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < db.size(); ++i) {
    auto it = std::find(model.classes.begin(), model.classes.end(), db[i].raga_label);
    if (it == model.classes.end()) {
      model.classes.push_back(db[i].raga_label);
      members.emplace_back();
      it = model.classes.end() - 1;
    }
    members[static_cast<std::size_t>(it - model.classes.begin())].push_back(i);
  }

  const std::size_t needed = cfg.kind == DensityKind::MVG ? 2 : static_cast<std::size_t>(cfg.gmm_components);
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    if (members[c].size() < needed) {
      throw Error(ErrorCode::InsufficientClassSamples,
                  "class '" + model.classes[c] + "' has " + std::to_string(members[c].size()) +
                      " samples, needs " + std::to_string(needed));
    }
  }

  std::vector<Eigen::VectorXd> all;
  all.reserve(db.size());
  for (const auto& s : db) {
    all.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.pd.values.data(), static_cast<Eigen::Index>(dim)));
  }

  Eigen::VectorXd pooled_mean;
  Eigen::MatrixXd pooled_cov;
  detail::weighted_moments(all, std::vector<double>(all.size(), 1.0), pooled_mean, pooled_cov);

  if (cfg.max_dimensions > 0 && static_cast<std::size_t>(cfg.max_dimensions) < dim) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pooled_cov);
    const auto d = static_cast<Eigen::Index>(cfg.max_dimensions);
    // Eigenvalues ascend; keep the last d columns, largest first.
    model.projection_basis = eig.eigenvectors().rightCols(d).rowwise().reverse();
    model.projection_center = pooled_mean;
    for (auto& x : all) x = model.projection_basis.transpose() * (x - pooled_mean);
    detail::weighted_moments(all, std::vector<double>(all.size(), 1.0), pooled_mean, pooled_cov);
  }
  const double pooled_mean_diag = pooled_cov.diagonal().mean();

  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    // Per-class stream, so classes can be fit in any order.
    std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL * (c + 1));
    std::vector<Eigen::VectorXd> xs;
    for (std::size_t i : members[c]) xs.push_back(all[i]);
    if (cfg.kind == DensityKind::MVG) {
      ClassDensity density;
      density.components.push_back(detail::fit_gaussian(xs, std::vector<double>(xs.size(), 1.0), pooled_mean_diag));
      model.densities.push_back(std::move(density));
    } else {
      model.densities.push_back(detail::fit_gmm(xs, cfg.gmm_components, pooled_mean_diag, cfg, rng));
    }
    model.priors.push_back(cfg.priors == PriorKind::Uniform
                               ? 1.0 / static_cast<double>(model.classes.size())
                               : static_cast<double>(members[c].size()) / static_cast<double>(db.size()));
  }
  return model;
}

/// Per-class log P(x | raga) + log P(raga).
inline std::vector<double> log_joint(const BayesModel& model, std::span<const double> query) {
  if (query.size() != model.input_dimension) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(query.size()) + " bins vs model dimension " + std::to_string(model.input_dimension));
  }
  const Eigen::VectorXd x = model.project(query);
  std::vector<double> out(model.classes.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double lp = model.priors[c] > 0.0 ? std::log(model.priors[c]) : -std::numeric_limits<double>::infinity();
    out[c] = model.densities[c].log_likelihood(x) + lp;
  }
  return out;
}

inline ClassificationResult bayes_classify(const PitchDistribution& query, const BayesModel& model) {
  const auto joint = log_joint(model, query.values);
  ClassificationResult r;
  r.classes = model.classes;
  r.posterior = posterior_from_log_joint(joint);
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.posterior.size(); ++c) {
    if (r.posterior[c] > r.posterior[best]) best = c;
  }
  r.label = model.classes[best];
  r.score = r.posterior[best];
  return r;
}

}  // namespace ragaid
