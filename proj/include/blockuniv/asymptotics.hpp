#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "designs.hpp"
#include "error.hpp"
#include "estimators.hpp"

namespace blockuniv {

/// Empirical law of the pairs (mu0_i, omega_i) together with p/n and the noise
/// level. mu0_i = sqrt(n lambda_i) beta0_i, omega_i = lambda_i^{-1/2}.
struct SignalSpectrum {
    VectorXd mu0;
    VectorXd omega;
    double ratio = 0.0;  // p / n
    double sigma = 1.0;

    Index p() const noexcept { return mu0.size(); }

    /// n recovered from p / ratio. Only meaningful for ratio > 0.
    double n() const noexcept { return static_cast<double>(p()) / ratio; }
};

inline SignalSpectrum spectrum_from_model(const VectorXd& beta0, const VectorXd& lambda_diag, Index n, double sigma) {
    detail::require_same_size(beta0.size(), lambda_diag.size(), "spectrum_from_model");
    if (n <= 0) throw InvalidSpec("spectrum_from_model: n must be positive");
    if ((lambda_diag.array() <= 0.0).any()) throw InvalidSpec("spectrum_from_model: lambda_diag must be positive");
    SignalSpectrum s;
    const double nn = static_cast<double>(n);
    s.mu0 = (nn * lambda_diag.array()).sqrt() * beta0.array();
    s.omega = lambda_diag.array().rsqrt();
    s.ratio = static_cast<double>(beta0.size()) / nn;
    s.sigma = sigma;
    return s;
}

/// E_Z[(eta(m + gamma Z, t) - m)^2] and E_Z[eta'(m + gamma Z, t)], Z ~ N(0, 1).
struct Moments {
    double second_moment = 0.0;
    double avg_derivative = 0.0;
};

namespace detail {

inline double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }
inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Closed form for soft thresholding. With a = (t - m)/gamma and b = (-t - m)/gamma
/// the line splits into Z > a (estimate m + gamma Z - t), Z < b (m + gamma Z + t)
/// and the dead zone in between (estimate 0). Each piece is a truncated Gaussian
/// moment of a quadratic in Z.
inline Moments lasso_moments_exact(double m, double gamma, double t) {
    if (!(gamma > 0.0)) throw DomainError("lasso_moments: gamma must be positive");
    if (!(t >= 0.0)) throw DomainError("lasso_moments: t must be nonnegative");
    using detail::normal_cdf;
    using detail::normal_pdf;
    if (std::isinf(t)) return {m * m, 0.0};
    const double a = (t - m) / gamma;
    const double b = (-t - m) / gamma;
    const double upper_tail = normal_cdf(-a);  // P(Z > a)
    const double lower_tail = normal_cdf(b);   // P(Z < b)
    const double pa = normal_pdf(a);
    const double pb = normal_pdf(b);
    // Upper: (gamma Z - t)^2 over Z > a.
    //   E[Z^2; Z>a] = a phi(a) + Q(a),  E[Z; Z>a] = phi(a)
    const double upper = gamma * gamma * (a * pa + upper_tail) - 2.0 * gamma * t * pa + t * t * upper_tail;
    // Lower: (gamma Z + t)^2 over Z < b.
    //   E[Z^2; Z<b] = Phi(b) - b phi(b),  E[Z; Z<b] = -phi(b)
    const double lower = gamma * gamma * (lower_tail - b * pb) - 2.0 * gamma * t * pb + t * t * lower_tail;
    const double middle = m * m * std::max(0.0, 1.0 - upper_tail - lower_tail);
    return {upper + lower + middle, upper_tail + lower_tail};
}

/// Numerical integration of the same expectations: the integrand is split at
/// its two kinks and each smooth piece is integrated by 30-point Gauss-Legendre
/// panels of width <= 1 over |Z| <= 12.
inline Moments lasso_moments_quadrature(double m, double gamma, double t) {
    if (!(gamma > 0.0)) throw DomainError("lasso_moments: gamma must be positive");
    if (!(t >= 0.0)) throw DomainError("lasso_moments: t must be nonnegative");
    if (std::isinf(t)) return {m * m, 0.0};
    constexpr double kLimit = 12.0;
    using Rule = boost::math::quadrature::gauss<double, 30>;

    std::vector<double> cuts{-kLimit, kLimit};
    for (double c : {(t - m) / gamma, (-t - m) / gamma}) {
        if (c > -kLimit && c < kLimit) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());

    Moments out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k];
        const double hi = cuts[k + 1];
        if (hi <= lo) continue;
        const double mid = 0.5 * (lo + hi);
        const double zone = m + gamma * mid;
        const bool dead = std::abs(zone) <= t;
        const double shift = zone > t ? -t : t;
        const int panels = std::max(1, static_cast<int>(std::ceil(hi - lo)));
        const double width = (hi - lo) / panels;
        for (int j = 0; j < panels; ++j) {
            const double a = lo + j * width;
            const double b = a + width;
            out.second_moment += Rule::integrate(
                [&](double z) {
                    const double e = dead ? -m : gamma * z + shift;
                    return e * e * detail::normal_pdf(z);
                },
                a, b);
            if (!dead) out.avg_derivative += Rule::integrate([](double z) { return detail::normal_pdf(z); }, a, b);
        }
    }
    return out;
}

/// Tolerance for the two routes of lasso_moments to disagree before we treat
/// the result as untrustworthy.
inline constexpr double kMomentAgreementTol = 1e-6;

/// Quadrature value, checked against the closed form.
inline Moments lasso_moments(double m, double gamma, double t) {
    const Moments quad = lasso_moments_quadrature(m, gamma, t);
    const Moments exact = lasso_moments_exact(m, gamma, t);
    const double scale = std::max(1.0, m * m + gamma * gamma);
    if (std::abs(quad.second_moment - exact.second_moment) > kMomentAgreementTol * scale ||
        std::abs(quad.avg_derivative - exact.avg_derivative) > kMomentAgreementTol) {
        throw NumericError("lasso_moments: quadrature and closed form disagree at m=" + std::to_string(m) +
                           " gamma=" + std::to_string(gamma) + " t=" + std::to_string(t));
    }
    return quad;
}

/// eta2(m + gamma Z, t) - m = (gamma Z - t m) / (1 + t).
inline Moments ridge_moments(double m, double gamma, double t) {
    if (!(gamma > 0.0)) throw DomainError("ridge_moments: gamma must be positive");
    if (!(t >= 0.0)) throw DomainError("ridge_moments: t must be nonnegative");
    if (std::isinf(t)) return {m * m, 0.0};
    const double s = 1.0 + t;
    return {(gamma * gamma + t * t * m * m) / (s * s), 1.0 / s};
}

inline Moments penalty_moments(Penalty penalty, double m, double gamma, double t) {
    return penalty == Penalty::Lasso ? lasso_moments(m, gamma, t) : ridge_moments(m, gamma, t);
}

/// Per-coordinate threshold: gamma lambda omega^2 / beta for ridge,
/// gamma lambda omega / beta for the Lasso.
inline double coordinate_threshold(Penalty penalty, double beta, double gamma, double lambda, double omega) {
    const double w = penalty == Penalty::Ridge ? omega * omega : omega;
    return gamma * lambda * w / beta;
}

struct SePoint {
    double beta = 1.0;
    double gamma = 1.0;
};

namespace detail {

struct SpectrumAverages {
    double second_moment = 0.0;
    double avg_derivative = 0.0;
};

/// The distinct (mu0, omega) pairs of a spectrum with their multiplicities.
/// Averages over the empirical measure are exact weighted sums over these.
struct SpectrumAtoms {
    std::vector<double> mu0;
    std::vector<double> omega;
    std::vector<double> weight;  // count / p

    explicit SpectrumAtoms(const SignalSpectrum& s) {
        const Index p = s.p();
        std::vector<std::pair<double, double>> pairs(static_cast<std::size_t>(p));
        for (Index i = 0; i < p; ++i) pairs[static_cast<std::size_t>(i)] = {s.mu0[i], s.omega[i]};
        std::sort(pairs.begin(), pairs.end());
        for (std::size_t i = 0; i < pairs.size();) {
            std::size_t j = i;
            while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
            mu0.push_back(pairs[i].first);
            omega.push_back(pairs[i].second);
            weight.push_back(static_cast<double>(j - i) / static_cast<double>(p));
            i = j;
        }
    }

    /// Weighted averages with thresholds t_i = scale * omega_i^k (k = 2 ridge, 1 Lasso)
    /// and Gaussian scale gamma.
    SpectrumAverages averages(Penalty penalty, double threshold_scale, double gamma) const {
        SpectrumAverages acc;
        for (std::size_t i = 0; i < mu0.size(); ++i) {
            const double w = penalty == Penalty::Ridge ? omega[i] * omega[i] : omega[i];
            const Moments mo = penalty_moments(penalty, mu0[i], gamma, threshold_scale * w);
            acc.second_moment += weight[i] * mo.second_moment;
            acc.avg_derivative += weight[i] * mo.avg_derivative;
        }
        return acc;
    }
};

inline void check_spectrum(const SignalSpectrum& s) {
    detail::require_same_size(s.mu0.size(), s.omega.size(), "SignalSpectrum: mu0 vs omega");
    if (!(s.ratio >= 0.0) || !std::isfinite(s.ratio)) throw InvalidSpec("SignalSpectrum: ratio must be nonnegative");
    if (!(s.sigma >= 0.0)) throw InvalidSpec("SignalSpectrum: sigma must be nonnegative");
    if ((s.omega.array() <= 0.0).any()) throw InvalidSpec("SignalSpectrum: omega must be positive");
}

}  // namespace detail

/// One application of the state-evolution map:
///   gamma'^2 = sigma^2 + (p/n) mean_i E[(eta(mu_i + gamma Z, t_i) - mu_i)^2]
///   beta'    = gamma' (1 - (p/n) mean_i E[eta'(mu_i + gamma' Z, t_i)])
/// with t_i evaluated at the current (beta, gamma).
inline SePoint state_evolution_map(const SePoint& current, const detail::SpectrumAtoms& atoms, double ratio,
                                   double sigma, double lambda, Penalty penalty) {
    if (!(current.beta > 0.0) || !(current.gamma > 0.0)) {
        throw DomainError("state_evolution_map: beta and gamma must be positive");
    }
    const double scale = current.gamma * lambda / current.beta;
    SePoint next;
    next.gamma = std::sqrt(sigma * sigma + ratio * atoms.averages(penalty, scale, current.gamma).second_moment);
    if (!(next.gamma > 0.0)) throw Divergence("state_evolution_map: gamma collapsed to zero");
    next.beta = next.gamma * (1.0 - ratio * atoms.averages(penalty, scale, next.gamma).avg_derivative);
    if (!(next.beta > 0.0)) {
        throw Divergence("state_evolution_map: beta left the positive half-line (beta = " +
                         std::to_string(next.beta) + ")");
    }
    return next;
}

inline SePoint state_evolution_map(const SePoint& current, const SignalSpectrum& spectrum, double lambda,
                                   Penalty penalty) {
    detail::check_spectrum(spectrum);
    return state_evolution_map(current, detail::SpectrumAtoms(spectrum), spectrum.ratio, spectrum.sigma, lambda,
                               penalty);
}

/// Max-abs defect of the two fixed-point equations at (beta, gamma).
inline double fixed_point_residual(const SePoint& point, const SignalSpectrum& spectrum, double lambda,
                                   Penalty penalty) {
    detail::check_spectrum(spectrum);
    const detail::SpectrumAtoms atoms(spectrum);
    const double kappa = spectrum.ratio;
    const auto avg = atoms.averages(penalty, point.gamma * lambda / point.beta, point.gamma);
    const double eq1 = point.gamma * point.gamma - spectrum.sigma * spectrum.sigma - kappa * avg.second_moment;
    const double eq2 = point.beta - point.gamma * (1.0 - kappa * avg.avg_derivative);
    return std::max(std::abs(eq1), std::abs(eq2));
}

enum class FixedPointMethod { Closed, Picard, Calibrated };

struct FixedPoint {
    double beta_star = 0.0;
    double gamma_star = 0.0;
    double residual = 0.0;
    long iterations = 0;
    Penalty penalty = Penalty::Ridge;
    bool converged = false;
    FixedPointMethod method = FixedPointMethod::Picard;
};

struct FixedPointOptions {
    double tol = 1e-10;
    long max_iter = 50000;
    double damping = 0.5;
    std::optional<SePoint> initial;
    /// Fall back to the calibrated solver when Picard diverges or stalls.
    bool allow_fallback = true;
};

/// Default starting point: gamma0 = sqrt(sigma^2 + ratio * mean(mu0^2 + 1)), beta0 = gamma0 / 2.
inline SePoint default_initial_point(const SignalSpectrum& s) {
    const double mean_sq = s.p() > 0 ? (s.mu0.array().square() + 1.0).mean() : 0.0;
    const double g = std::sqrt(s.sigma * s.sigma + s.ratio * mean_sq);
    return {0.5 * g, g};
}

/// Damped Picard iteration on state_evolution_map. Throws Divergence or
/// NonConvergence; neither falls back.
inline FixedPoint solve_fixed_point_picard(const SignalSpectrum& spectrum, double lambda, Penalty penalty,
                                           const FixedPointOptions& options = {}) {
    detail::check_spectrum(spectrum);
    if (!(lambda > 0.0)) throw InvalidSpec("solve_fixed_point: lambda must be positive");
    if (!(options.damping > 0.0 && options.damping <= 1.0)) throw InvalidSpec("damping must lie in (0, 1]");
    FixedPoint fp;
    fp.penalty = penalty;
    if (spectrum.ratio == 0.0 || spectrum.p() == 0) {
        if (!(spectrum.sigma > 0.0)) throw Divergence("solve_fixed_point: sigma = 0 with no coordinates");
        fp.beta_star = fp.gamma_star = spectrum.sigma;
        fp.iterations = 1;
        fp.converged = true;
        fp.method = FixedPointMethod::Closed;
        return fp;
    }
    const detail::SpectrumAtoms atoms(spectrum);
    SePoint cur = options.initial.value_or(default_initial_point(spectrum));
    double change = 0.0;
    for (long it = 1; it <= options.max_iter; ++it) {
        SePoint next;
        try {
            next = state_evolution_map(cur, atoms, spectrum.ratio, spectrum.sigma, lambda, penalty);
        } catch (const Divergence& e) {
            throw Divergence(std::string(e.what()) + " at iteration " + std::to_string(it) +
                             " from (beta, gamma) = (" + std::to_string(cur.beta) + ", " +
                             std::to_string(cur.gamma) + ")");
        }
        change = std::max(std::abs(next.beta - cur.beta), std::abs(next.gamma - cur.gamma));
        const double a = options.damping;
        cur = {(1.0 - a) * cur.beta + a * next.beta, (1.0 - a) * cur.gamma + a * next.gamma};
        if (change <= options.tol) {
            fp.beta_star = cur.beta;
            fp.gamma_star = cur.gamma;
            fp.iterations = it;
            fp.residual = fixed_point_residual(cur, spectrum, lambda, penalty);
            fp.converged = true;
            fp.method = FixedPointMethod::Picard;
            return fp;
        }
    }
    VectorXd last(2);
    last << cur.beta, cur.gamma;
    throw NonConvergence("solve_fixed_point: no convergence after " + std::to_string(options.max_iter) +
                             " iterations (last step " + std::to_string(change) + ")",
                         last, change);
}

namespace detail {

/// Smallest root in gamma of sigma^2 + ratio * F(gamma) - gamma^2, where F is
/// the averaged second moment at fixed thresholds scale * omega^k. F is
/// nondecreasing in gamma, so the root is bracketed by scanning upward from
/// sigma and refined by bisection. Empty when no root exists below the cap.
inline std::optional<double> calibrated_gamma(const SpectrumAtoms& atoms, double ratio, double sigma, double scale,
                                              Penalty penalty) {
    const auto h = [&](double g) {
        return sigma * sigma + ratio * atoms.averages(penalty, scale, g).second_moment - g * g;
    };
    double lo = sigma;
    if (h(lo) <= 0.0) return lo;
    const double cap = 1e8 * std::max(1.0, sigma);
    double hi = lo * 1.25;
    while (h(hi) > 0.0) {
        lo = hi;
        hi *= 1.25;
        if (hi > cap) return std::nullopt;
    }
    for (int k = 0; k < 200 && hi - lo > 4e-16 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Fixed point by calibration. Writing alpha = gamma / beta, the thresholds are
/// alpha * lambda * omega^k. For each alpha the first equation is a scalar
/// root in gamma; alpha is then chosen by bisection so that the second equation
/// holds, i.e. alpha (1 - ratio * mean E[eta']) = 1. Requires sigma > 0.
inline FixedPoint solve_fixed_point_calibrated(const SignalSpectrum& spectrum, double lambda, Penalty penalty) {
    detail::check_spectrum(spectrum);
    if (!(lambda > 0.0)) throw InvalidSpec("solve_fixed_point: lambda must be positive");
    if (!(spectrum.sigma > 0.0)) throw InvalidSpec("calibrated fixed-point solver requires sigma > 0");
    FixedPoint fp;
    fp.penalty = penalty;
    fp.method = FixedPointMethod::Calibrated;
    const detail::SpectrumAtoms atoms(spectrum);
    const double kappa = spectrum.ratio;
    long evaluations = 0;
    // g(alpha) < 0 means alpha is too small; no admissible gamma also counts as too small.
    const auto g = [&](double alpha, double* gamma_out) {
        ++evaluations;
        const auto gamma = detail::calibrated_gamma(atoms, kappa, spectrum.sigma, alpha * lambda, penalty);
        if (!gamma) return -1.0;
        if (gamma_out) *gamma_out = *gamma;
        const double deriv = atoms.averages(penalty, alpha * lambda, *gamma).avg_derivative;
        return alpha * (1.0 - kappa * deriv) - 1.0;
    };
    double lo = 1.0;
    double hi = 2.0;
    if (g(lo, nullptr) >= 0.0) {
        hi = lo;
    } else {
        while (g(hi, nullptr) < 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e15) throw Divergence("solve_fixed_point: calibration failed to bracket alpha");
        }
        for (int k = 0; k < 200 && hi - lo > 4e-16 * hi; ++k) {
            const double mid = 0.5 * (lo + hi);
            (g(mid, nullptr) < 0.0 ? lo : hi) = mid;
        }
    }
    double gamma = 0.0;
    g(hi, &gamma);
    fp.gamma_star = gamma;
    fp.beta_star = gamma / hi;
    fp.iterations = evaluations;
    fp.residual = fixed_point_residual({fp.beta_star, fp.gamma_star}, spectrum, lambda, penalty);
    fp.converged = true;
    return fp;
}

/// Damped Picard iteration, falling back to calibration when Picard leaves
/// the region beta > 0 or stalls.
inline FixedPoint solve_fixed_point(const SignalSpectrum& spectrum, double lambda, Penalty penalty,
                                    const FixedPointOptions& options = {}) {
    try {
        return solve_fixed_point_picard(spectrum, lambda, penalty, options);
    } catch (const NumericError&) {
        if (!options.allow_fallback || !(spectrum.sigma > 0.0)) throw;
    }
    return solve_fixed_point_calibrated(spectrum, lambda, penalty);
}

struct RiskPrediction {
    double value = 0.0;
    VectorXd per_coordinate;
};

/// Predicted limit of ||beta_hat - beta0||^2:
///   (1/n) sum_i omega_i^2 E[(eta(mu_i + gamma* Z, t_i) - mu_i)^2].
inline RiskPrediction predicted_risk(const FixedPoint& fp, const SignalSpectrum& spectrum, double lambda) {
    if (!fp.converged) throw InvalidSpec("predicted_risk: fixed point did not converge");
    detail::check_spectrum(spectrum);
    RiskPrediction out;
    const Index p = spectrum.p();
    out.per_coordinate = VectorXd::Zero(p);
    if (spectrum.ratio == 0.0 || p == 0) return out;
    const double n = spectrum.n();
    for (Index i = 0; i < p; ++i) {
        const double w = spectrum.omega[i];
        const double t = coordinate_threshold(fp.penalty, fp.beta_star, fp.gamma_star, lambda, w);
        const Moments mo = penalty_moments(fp.penalty, spectrum.mu0[i], fp.gamma_star, t);
        out.per_coordinate[i] = w * w * mo.second_moment / n;
    }
    out.value = out.per_coordinate.sum();
    return out;
}

/// Convenience: solve and predict in one call.
inline RiskPrediction predict_risk(const SignalSpectrum& spectrum, double lambda, Penalty penalty,
                                   const FixedPointOptions& options = {}) {
    return predicted_risk(solve_fixed_point(spectrum, lambda, penalty, options), spectrum, lambda);
}

}  // namespace blockuniv
