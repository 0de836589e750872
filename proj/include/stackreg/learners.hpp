#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stackreg/dataset.hpp"

namespace stackreg {

enum class LearnerKind { CR, LR, QR, RBF };

inline const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::CR: return "CR";
    case LearnerKind::LR: return "LR";
    case LearnerKind::QR: return "QR";
    case LearnerKind::RBF: return "RBF";
  }
  return "?";
}

enum class FeatureMap { identity, quadratic };

/// Ridge least squares configuration. The intercept is never penalized.
/// An unset lambda means the scale-aware default 1e-6 * trace(PhiT Phi) / p.
struct RidgeConfig {
  FeatureMap feature_map = FeatureMap::identity;
  std::optional<double> lambda;
};

enum class RbfBasis { gaussian, multiquadric, inverse_multiquadric, thin_plate_spline, cubic, linear };

inline const char* to_string(RbfBasis b) {
  switch (b) {
    case RbfBasis::gaussian: return "gaussian";
    case RbfBasis::multiquadric: return "multiquadric";
    case RbfBasis::inverse_multiquadric: return "inverse_multiquadric";
    case RbfBasis::thin_plate_spline: return "thin_plate_spline";
    case RbfBasis::cubic: return "cubic";
    case RbfBasis::linear: return "linear";
  }
  return "?";
}

inline RbfBasis rbf_basis_from_string(const std::string& s) {
  for (RbfBasis b : {RbfBasis::gaussian, RbfBasis::multiquadric, RbfBasis::inverse_multiquadric,
                     RbfBasis::thin_plate_spline, RbfBasis::cubic, RbfBasis::linear}) {
    if (s == to_string(b)) return b;
  }
  throw std::invalid_argument("unknown RBF basis: '" + s + "'");
}

struct RbfConfig {
  RbfBasis basis = RbfBasis::gaussian;
  std::vector<int> center_grid = {2, 5, 10, 25, 50};
  double inner_split_fraction = 0.2;
  std::uint64_t seed = 0;
  double ridge_lambda = 1e-8;
};

struct TrainingSummary {
  Eigen::Index n = 0;
  double in_sample_mse = 0.0;
};

struct ConstantModel {
  double mean = 0.0;
};

struct RidgeModel {
  FeatureMap map = FeatureMap::identity;
  double intercept = 0.0;
  Eigen::VectorXd coef;
};

struct RbfModel {
  RbfBasis basis = RbfBasis::gaussian;
  Eigen::MatrixXd centers;  // in standardized feature space
  double sigma = 1.0;
  double intercept = 0.0;
  Eigen::VectorXd weights;
  Eigen::VectorXd feat_mean;
  Eigen::VectorXd feat_scale;
  double inner_validation_mse = 0.0;  // winning grid candidate's score
};

/// The non-constant quadratic terms of x: singles, then squares, then cross
/// terms (i<j) in lexicographic order. Length 2I + I(I-1)/2.
inline Eigen::VectorXd expand_quadratic(const Eigen::VectorXd& x) {
  const Eigen::Index i_dim = x.size();
  if (i_dim < 1) throw std::invalid_argument("expand_quadratic: empty input");
  Eigen::VectorXd out(2 * i_dim + i_dim * (i_dim - 1) / 2);
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < i_dim; ++i) out(pos++) = x(i);
  for (Eigen::Index i = 0; i < i_dim; ++i) out(pos++) = x(i) * x(i);
  for (Eigen::Index i = 0; i < i_dim; ++i) {
    for (Eigen::Index j = i + 1; j < i_dim; ++j) out(pos++) = x(i) * x(j);
  }
  return out;
}

inline Eigen::MatrixXd expand_quadratic_rows(const Eigen::MatrixXd& x) {
  const Eigen::Index i_dim = x.cols();
  Eigen::MatrixXd out(x.rows(), 2 * i_dim + i_dim * (i_dim - 1) / 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.row(r) = expand_quadratic(x.row(r).transpose()).transpose();
  }
  return out;
}

inline double rbf_basis(RbfBasis kind, double r, double sigma) {
  switch (kind) {
    case RbfBasis::gaussian: return std::exp(-(r * r) / (2.0 * sigma * sigma));
    case RbfBasis::multiquadric: return std::sqrt(r * r + sigma * sigma);
    case RbfBasis::inverse_multiquadric: return 1.0 / std::sqrt(r * r + sigma * sigma);
    case RbfBasis::thin_plate_spline: return r == 0.0 ? 0.0 : r * r * std::log(r);
    case RbfBasis::cubic: return r * r * r;
    case RbfBasis::linear: return r;
  }
  return 0.0;
}

/// A fitted level-0 learner; prediction is deterministic and the coefficient
/// record is immutable after the fit.
struct FittedModel {
  LearnerKind kind = LearnerKind::CR;
  std::variant<ConstantModel, RidgeModel, RbfModel> params;
  TrainingSummary summary;

  double predict(const Eigen::VectorXd& x) const {
    if (const auto* c = std::get_if<ConstantModel>(&params)) {
      return c->mean;
    }
    if (const auto* r = std::get_if<RidgeModel>(&params)) {
      const Eigen::VectorXd phi = r->map == FeatureMap::identity ? x : expand_quadratic(x);
      if (phi.size() != r->coef.size()) {
        throw std::invalid_argument("predict: feature dimension mismatch");
      }
      return r->intercept + r->coef.dot(phi);
    }
    const auto& m = std::get<RbfModel>(params);
    if (x.size() != m.feat_mean.size()) {
      throw std::invalid_argument("predict: feature dimension mismatch");
    }
    const Eigen::VectorXd z = (x - m.feat_mean).cwiseQuotient(m.feat_scale);
    double acc = m.intercept;
    for (Eigen::Index c = 0; c < m.centers.rows(); ++c) {
      const double r = (z - m.centers.row(c).transpose()).norm();
      acc += m.weights(c) * rbf_basis(m.basis, r, m.sigma);
    }
    return acc;
  }

  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict(x.row(i).transpose());
    return out;
  }
};

inline FittedModel fit_constant(const Dataset& train) {
  if (train.rows() < 1) throw std::invalid_argument("fit_constant: empty dataset");
  const double mean = train.target.mean();
  FittedModel m;
  m.kind = LearnerKind::CR;
  m.params = ConstantModel{mean};
  m.summary = {train.rows(), (train.target.array() - mean).square().mean()};
  return m;
}

namespace detail {

/// Least squares with unpenalized intercept: minimizes
/// |y - b0 - Phi w|^2 + lambda |w|^2 via the centering identity.
/// lambda == 0 falls back to a rank-checked QR solve of the full design.
struct RidgeSolution {
  double intercept;
  Eigen::VectorXd coef;
};

inline RidgeSolution ridge_solve(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index p = phi.cols();
  if (lambda < 0.0) throw std::invalid_argument("ridge lambda must be nonnegative");
  if (lambda == 0.0) {
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = phi;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p + 1) {
      throw std::runtime_error("ridge_solve: singular normal system at lambda=0");
    }
    const Eigen::VectorXd sol = qr.solve(y);
    return {sol(0), sol.tail(p)};
  }
  const Eigen::RowVectorXd phi_mean = phi.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd phi_c = phi.rowwise() - phi_mean;
  const Eigen::VectorXd y_c = y.array() - y_mean;
  Eigen::MatrixXd gram = phi_c.transpose() * phi_c;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd coef = gram.ldlt().solve(phi_c.transpose() * y_c);
  return {y_mean - phi_mean * coef, coef};
}

inline double effective_lambda(const RidgeConfig& cfg, const Eigen::MatrixXd& phi) {
  if (cfg.lambda) return *cfg.lambda;
  // Scale-aware near-unregularized default.
  return 1e-6 * phi.squaredNorm() / static_cast<double>(phi.cols());
}

}  // namespace detail

/// Ridge regression on the identity (LR) or quadratic (QR) feature map, with
/// a fixed regularization strength (no CV tuning of lambda).
inline FittedModel fit_ridge(const Dataset& train, const RidgeConfig& cfg) {
  if (train.rows() < 1) throw std::invalid_argument("fit_ridge: empty dataset");
  const Eigen::MatrixXd phi = cfg.feature_map == FeatureMap::identity
                                  ? train.features
                                  : expand_quadratic_rows(train.features);
  const double lambda = detail::effective_lambda(cfg, phi);
  const auto sol = detail::ridge_solve(phi, train.target, lambda);
  FittedModel m;
  m.kind = cfg.feature_map == FeatureMap::identity ? LearnerKind::LR : LearnerKind::QR;
  m.params = RidgeModel{cfg.feature_map, sol.intercept, sol.coef};
  const Eigen::VectorXd resid = train.target - (phi * sol.coef).array().matrix() -
                                Eigen::VectorXd::Constant(train.rows(), sol.intercept);
  m.summary = {train.rows(), resid.squaredNorm() / static_cast<double>(train.rows())};
  return m;
}

/// Lloyd's algorithm from a seeded sample of distinct rows; empty clusters are
/// re-seeded to the point farthest from its assigned center.
inline Eigen::MatrixXd kmeans(const Eigen::MatrixXd& points, int centers, std::uint64_t seed,
                              int max_iters = 100) {
  const auto n = static_cast<int>(points.rows());
  if (centers < 1 || centers > n) {
    throw std::invalid_argument("kmeans: need 1 <= centers <= n, got centers=" +
                                std::to_string(centers) + ", n=" + std::to_string(n));
  }
  const auto order = detail::shuffled_indices(n, seed);
  Eigen::MatrixXd c(centers, points.cols());
  for (int k = 0; k < centers; ++k) c.row(k) = points.row(order[static_cast<std::size_t>(k)]);

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - c.row(0)).squaredNorm();
      for (int k = 1; k < centers; ++k) {
        const double d = (points.row(i) - c.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(centers), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int k = 0; k < centers; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        c.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
      } else {
        // Re-seed to the farthest unclaimed point.
        int far = -1;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          if (taken[static_cast<std::size_t>(i)]) continue;
          const double d = (points.row(i) - c.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        c.row(k) = points.row(far);
        taken[static_cast<std::size_t>(far)] = true;
      }
    }
  }
  return c;
}

namespace detail {

inline double rbf_sigma(const Eigen::MatrixXd& centers) {
  double d_max = 0.0;
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < centers.rows(); ++j) {
      d_max = std::max(d_max, (centers.row(i) - centers.row(j)).norm());
    }
  }
  const double sigma = d_max / std::sqrt(2.0 * static_cast<double>(centers.rows()));
  return std::max(sigma, 1e-6);
}

inline Eigen::MatrixXd rbf_design(const Eigen::MatrixXd& z, const Eigen::MatrixXd& centers,
                                  RbfBasis basis, double sigma) {
  Eigen::MatrixXd phi(z.rows(), centers.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      phi(i, c) = rbf_basis(basis, (z.row(i) - centers.row(c)).norm(), sigma);
    }
  }
  return phi;
}

}  // namespace detail

/// Radial basis function network: standardized features, k-means centers, a
/// shared spread sigma = d_max / sqrt(2M), linear weights by ridge least
/// squares. The center count is picked on a seeded inner train/validation
/// split and the winner is refit on the full training set.
inline FittedModel fit_rbf(const Dataset& train, const RbfConfig& cfg) {
  const auto n = static_cast<int>(train.rows());
  if (n < 2) throw std::invalid_argument("fit_rbf: need at least 2 rows");
  if (!(cfg.inner_split_fraction > 0.0 && cfg.inner_split_fraction < 1.0)) {
    throw std::invalid_argument("fit_rbf: inner_split_fraction must be in (0, 1)");
  }

  Eigen::VectorXd mean = train.features.colwise().mean();
  Eigen::VectorXd scale(train.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double sd = std::sqrt((train.features.col(j).array() - mean(j)).square().mean());
    scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  Eigen::MatrixXd z = (train.features.rowwise() - mean.transpose()).array().rowwise() /
                      scale.transpose().array();

  // Inner split: validation takes the last ceil(frac*n) of a seeded shuffle.
  const auto order = detail::shuffled_indices(n, cfg.seed);
  int n_val = static_cast<int>(std::ceil(cfg.inner_split_fraction * n));
  n_val = std::min(std::max(n_val, 1), n - 1);
  const int n_fit = n - n_val;
  Eigen::MatrixXd z_fit(n_fit, z.cols()), z_val(n_val, z.cols());
  Eigen::VectorXd y_fit(n_fit), y_val(n_val);
  for (int i = 0; i < n_fit; ++i) {
    z_fit.row(i) = z.row(order[static_cast<std::size_t>(i)]);
    y_fit(i) = train.target(order[static_cast<std::size_t>(i)]);
  }
  for (int i = 0; i < n_val; ++i) {
    z_val.row(i) = z.row(order[static_cast<std::size_t>(n_fit + i)]);
    y_val(i) = train.target(order[static_cast<std::size_t>(n_fit + i)]);
  }

  std::vector<int> grid;
  for (int m : cfg.center_grid) {
    const int clipped = std::min(m, n_fit);
    if (clipped >= 1 && std::find(grid.begin(), grid.end(), clipped) == grid.end()) {
      grid.push_back(clipped);
    }
  }
  std::sort(grid.begin(), grid.end());
  if (grid.empty()) throw std::invalid_argument("fit_rbf: all center-count candidates infeasible");

  int best_m = -1;
  double best_val_mse = std::numeric_limits<double>::infinity();
  for (int m : grid) {
    const Eigen::MatrixXd centers = kmeans(z_fit, m, cfg.seed);
    const double sigma = detail::rbf_sigma(centers);
    const Eigen::MatrixXd phi = detail::rbf_design(z_fit, centers, cfg.basis, sigma);
    const auto sol = detail::ridge_solve(phi, y_fit, cfg.ridge_lambda);
    const Eigen::MatrixXd phi_val = detail::rbf_design(z_val, centers, cfg.basis, sigma);
    const Eigen::VectorXd pred = phi_val * sol.coef +
                                 Eigen::VectorXd::Constant(n_val, sol.intercept);
    const double val_mse = (y_val - pred).squaredNorm() / static_cast<double>(n_val);
    if (val_mse < best_val_mse) {
      best_val_mse = val_mse;
      best_m = m;
    }
  }

  // Refit the winning center count on the full training set.
  const Eigen::MatrixXd centers = kmeans(z, best_m, cfg.seed);
  const double sigma = detail::rbf_sigma(centers);
  const Eigen::MatrixXd phi = detail::rbf_design(z, centers, cfg.basis, sigma);
  const auto sol = detail::ridge_solve(phi, train.target, cfg.ridge_lambda);

  FittedModel m;
  m.kind = LearnerKind::RBF;
  RbfModel rm;
  rm.basis = cfg.basis;
  rm.centers = centers;
  rm.sigma = sigma;
  rm.intercept = sol.intercept;
  rm.weights = sol.coef;
  rm.feat_mean = mean;
  rm.feat_scale = scale;
  rm.inner_validation_mse = best_val_mse;
  m.params = std::move(rm);
  const Eigen::VectorXd resid =
      train.target - phi * sol.coef - Eigen::VectorXd::Constant(n, sol.intercept);
  m.summary = {train.rows(), resid.squaredNorm() / static_cast<double>(n)};
  return m;
}

/// Per-learner configuration bundle used by the stacking layers.
struct LearnerConfigs {
  RidgeConfig lr{FeatureMap::identity, std::nullopt};
  RidgeConfig qr{FeatureMap::quadratic, std::nullopt};
  RbfConfig rbf;
};

inline FittedModel fit_learner(LearnerKind kind, const Dataset& train, const LearnerConfigs& cfgs) {
  switch (kind) {
    case LearnerKind::CR: return fit_constant(train);
    case LearnerKind::LR: return fit_ridge(train, cfgs.lr);
    case LearnerKind::QR: return fit_ridge(train, cfgs.qr);
    case LearnerKind::RBF: return fit_rbf(train, cfgs.rbf);
  }
  throw std::logic_error("fit_learner: unknown learner kind");
}

}  // namespace stackreg
