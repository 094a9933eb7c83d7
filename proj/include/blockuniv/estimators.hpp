#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "designs.hpp"
#include "error.hpp"

namespace blockuniv {

/// Lasso: lambda * ||beta||_1 / sqrt(n).  Ridge: lambda * ||beta||_2^2 / 2.
enum class Penalty { Lasso, Ridge };

inline std::string_view to_string(Penalty p) { return p == Penalty::Lasso ? "lasso" : "ridge"; }

inline Penalty parse_penalty(std::string_view s) {
    if (s == "lasso") return Penalty::Lasso;
    if (s == "ridge") return Penalty::Ridge;
    throw InvalidSpec("unknown penalty '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Proximal maps
// ---------------------------------------------------------------------------

/// Soft thresholding. Returns 0 at |z| == t.
constexpr double eta1(double z, double t) noexcept {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

constexpr double eta1_prime(double z, double t) noexcept { return (z > t || z < -t) ? 1.0 : 0.0; }

/// Linear shrinkage z / (1 + t).
constexpr double eta2(double z, double t) noexcept { return z / (1.0 + t); }

constexpr double eta2_prime(double /*z*/, double t) noexcept { return 1.0 / (1.0 + t); }

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

inline double penalty_value(const VectorXd& beta, Index n, Penalty penalty) {
    if (penalty == Penalty::Lasso) return beta.lpNorm<1>() / std::sqrt(static_cast<double>(n));
    return 0.5 * beta.squaredNorm();
}

/// (1/2n) ||y - x beta||^2 + lambda * f(beta).
inline double empirical_risk(const VectorXd& beta, const MatrixXd& x, const VectorXd& y, double lambda,
                             Penalty penalty) {
    detail::require_same_size(x.cols(), beta.size(), "empirical_risk: cols(x) vs len(beta)");
    detail::require_same_size(x.rows(), y.size(), "empirical_risk: rows(x) vs len(y)");
    const auto n = x.rows();
    const double loss = (y - x * beta).squaredNorm() / (2.0 * static_cast<double>(n));
    return loss + lambda * penalty_value(beta, n, penalty);
}

inline double empirical_risk(const VectorXd& beta, const Dataset& data, double lambda, Penalty penalty) {
    return empirical_risk(beta, data.x, data.y, lambda, penalty);
}

/// ||beta_hat - beta0||^2.
inline double estimation_risk(const VectorXd& beta_hat, const VectorXd& beta0) {
    detail::require_same_size(beta_hat.size(), beta0.size(), "estimation_risk");
    return (beta_hat - beta0).squaredNorm();
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

struct FitConfig {
    double lambda = 1.0;
    double tol = 1e-10;
    long max_sweeps = 100000;
    std::optional<VectorXd> warm_start;

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidSpec("lambda must be positive and finite");
        if (!(tol > 0.0)) throw InvalidSpec("tol must be positive");
        if (max_sweeps <= 0) throw InvalidSpec("max_sweeps must be positive");
    }
};

struct FitResult {
    VectorXd beta_hat;
    double optimum = 0.0;
    long iterations = 0;
    double kkt_residual = 0.0;
    Index support_size = 0;
};

/// Sufficient statistics shared by every fit on the same (x, y): the Gram
/// matrix x^T x and x^T y. Building it once per dataset makes a lambda path
/// cost O(p^2) per coordinate sweep instead of O(np).
class GramCache {
public:
    GramCache(const MatrixXd& x, const VectorXd& y) : x_(&x), y_(&y), n_(x.rows()) {
        detail::require_same_size(x.rows(), y.size(), "GramCache: rows(x) vs len(y)");
        gram_ = MatrixXd(x.cols(), x.cols());
        gram_.setZero();
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
        gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
        xty_ = x.transpose() * y;
    }

    explicit GramCache(const Dataset& data) : GramCache(data.x, data.y) {}

    const MatrixXd& x() const noexcept { return *x_; }
    const VectorXd& y() const noexcept { return *y_; }
    const MatrixXd& gram() const noexcept { return gram_; }
    const VectorXd& xty() const noexcept { return xty_; }
    Index n() const noexcept { return n_; }
    Index p() const noexcept { return gram_.rows(); }

private:
    const MatrixXd* x_;
    const VectorXd* y_;
    Index n_;
    MatrixXd gram_;
    VectorXd xty_;
};

/// Solves (x^T x + n lambda I) beta = x^T y by Cholesky.
inline FitResult fit_ridge(const GramCache& cache, const FitConfig& config) {
    if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) {
        throw NumericError("fit_ridge: system is not positive definite for lambda <= 0");
    }
    const Index p = cache.p();
    const double n = static_cast<double>(cache.n());
    MatrixXd system = cache.gram();
    system.diagonal().array() += n * config.lambda;
    Eigen::LLT<MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) throw NumericError("fit_ridge: Cholesky factorization failed");
    FitResult result;
    result.beta_hat = llt.solve(cache.xty());
    // One step of iterative refinement keeps the residual at round-off level
    // for large lambda, where the system is dominated by the diagonal.
    VectorXd defect = cache.xty() - system * result.beta_hat;
    result.beta_hat += llt.solve(defect);
    defect = system * result.beta_hat - cache.xty();
    result.kkt_residual = p > 0 ? defect.lpNorm<Eigen::Infinity>() : 0.0;
    result.iterations = 1;
    result.support_size = (result.beta_hat.array() != 0.0).count();
    result.optimum = empirical_risk(result.beta_hat, cache.x(), cache.y(), config.lambda, Penalty::Ridge);
    return result;
}

inline FitResult fit_ridge(const Dataset& data, const FitConfig& config) {
    data.check();
    return fit_ridge(GramCache(data), config);
}

/// Tolerance the ridge residual is held to: 1e-8 * max(1, ||x^T y||_inf).
inline double ridge_kkt_tolerance(const GramCache& cache) {
    const double scale = cache.p() > 0 ? cache.xty().lpNorm<Eigen::Infinity>() : 0.0;
    return 1e-8 * std::max(1.0, scale);
}

/// Cyclic coordinate descent for
///   (1/2n) ||y - x beta||^2 + (lambda / sqrt n) ||beta||_1
/// on a precomputed Gram matrix. Keeps the correlation vector c = x^T (y - x beta)
/// up to date, so each coordinate update costs O(p).
class LassoCoordinateDescent {
public:
    LassoCoordinateDescent(const GramCache& cache, double lambda)
        : cache_(cache),
          beta_(VectorXd::Zero(cache.p())),
          corr_(cache.xty()),
          threshold_(lambda * std::sqrt(static_cast<double>(cache.n()))),
          lambda_(lambda) {}

    void set_lambda(double lambda) {
        lambda_ = lambda;
        threshold_ = lambda * std::sqrt(static_cast<double>(cache_.n()));
    }

    void set_beta(const VectorXd& beta) {
        detail::require_same_size(beta.size(), cache_.p(), "warm start");
        beta_ = beta;
        corr_ = cache_.xty() - cache_.gram() * beta_;
    }

    /// One pass over every coordinate (or only the nonzero ones). Returns the
    /// largest absolute coordinate change.
    double sweep(bool active_only = false) {
        const auto& gram = cache_.gram();
        double max_change = 0.0;
        for (Index j = 0; j < beta_.size(); ++j) {
            const double old = beta_[j];
            if (active_only && old == 0.0) continue;
            const double gjj = gram(j, j);
            double updated = 0.0;
            if (gjj > 0.0) updated = eta1(old * gjj + corr_[j], threshold_) / gjj;
            const double delta = updated - old;
            if (delta != 0.0) {
                beta_[j] = updated;
                corr_.noalias() -= delta * gram.col(j);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        return max_change;
    }

    const VectorXd& beta() const noexcept { return beta_; }
    const VectorXd& correlations() const noexcept { return corr_; }

    /// Largest violation of the stationarity conditions
    ///   |c_j / n| <= lambda / sqrt n            (beta_j == 0)
    ///   c_j / n == sign(beta_j) lambda / sqrt n (beta_j != 0)
    double kkt_residual() const {
        const double n = static_cast<double>(cache_.n());
        const double level = lambda_ / std::sqrt(n);
        double worst = 0.0;
        for (Index j = 0; j < beta_.size(); ++j) {
            const double g = corr_[j] / n;
            const double v = beta_[j] == 0.0 ? std::max(0.0, std::abs(g) - level)
                                             : std::abs(g - std::copysign(level, beta_[j]));
            worst = std::max(worst, v);
        }
        return worst;
    }

    /// Active-set strategy: converge on the nonzero coordinates, then confirm
    /// with a full sweep. Returns the number of sweeps performed.
    long run(double tol, long max_sweeps) {
        long sweeps = 0;
        double change = 0.0;
        while (sweeps < max_sweeps) {
            change = sweep(false);
            ++sweeps;
            if (change <= tol) {
                // Recompute c from scratch to shed accumulated drift before the final check.
                corr_ = cache_.xty() - cache_.gram() * beta_;
                return sweeps;
            }
            while (sweeps < max_sweeps) {
                change = sweep(true);
                ++sweeps;
                if (change <= tol) break;
            }
        }
        throw NonConvergence("fit_lasso: no convergence after " + std::to_string(max_sweeps) +
                                 " sweeps (last change " + std::to_string(change) + ")",
                             beta_, change);
    }

private:
    const GramCache& cache_;
    VectorXd beta_;
    VectorXd corr_;
    double threshold_;
    double lambda_;
};

inline FitResult fit_lasso(const GramCache& cache, const FitConfig& config) {
    config.validate();
    LassoCoordinateDescent solver(cache, config.lambda);
    if (config.warm_start) solver.set_beta(*config.warm_start);
    FitResult result;
    result.iterations = solver.run(config.tol, config.max_sweeps);
    result.beta_hat = solver.beta();
    result.kkt_residual = solver.kkt_residual();
    result.support_size = (result.beta_hat.array() != 0.0).count();
    result.optimum = empirical_risk(result.beta_hat, cache.x(), cache.y(), config.lambda, Penalty::Lasso);
    return result;
}

inline FitResult fit_lasso(const Dataset& data, const FitConfig& config) {
    data.check();
    return fit_lasso(GramCache(data), config);
}

inline FitResult fit(const GramCache& cache, Penalty penalty, const FitConfig& config) {
    return penalty == Penalty::Lasso ? fit_lasso(cache, config) : fit_ridge(cache, config);
}

/// Smallest lambda for which the Lasso solution is exactly zero:
/// sqrt(n) * ||x^T y||_inf / n.
inline double lasso_null_lambda(const GramCache& cache) {
    const double n = static_cast<double>(cache.n());
    return cache.p() > 0 ? std::sqrt(n) * cache.xty().lpNorm<Eigen::Infinity>() / n : 0.0;
}

/// Fits every lambda in `lambdas` (any order). Lasso fits run from the largest
/// lambda down with warm starts; results are returned in the input order.
inline std::vector<FitResult> fit_path(const GramCache& cache, Penalty penalty, const std::vector<double>& lambdas,
                                       FitConfig base = {}) {
    std::vector<std::size_t> order(lambdas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });
    std::vector<FitResult> out(lambdas.size());
    std::optional<VectorXd> warm = base.warm_start;
    for (std::size_t idx : order) {
        FitConfig cfg = base;
        cfg.lambda = lambdas[idx];
        if (penalty == Penalty::Lasso) cfg.warm_start = warm;
        out[idx] = fit(cache, penalty, cfg);
        warm = out[idx].beta_hat;
    }
    return out;
}

}  // namespace blockuniv
