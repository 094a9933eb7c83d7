#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"

namespace blockuniv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Block structure
// ---------------------------------------------------------------------------

/// Partition of {0, ..., p-1} into dependence blocks. Coordinates in distinct
/// blocks are independent; coordinates inside a block may be dependent.
class BlockStructure {
public:
    BlockStructure() = default;

    BlockStructure(std::vector<std::vector<Index>> blocks, Index d_max)
        : blocks_(std::move(blocks)), d_max_(d_max) {}

    /// Contiguous layout: block j owns {j*d, ..., (j+1)*d - 1}.
    static BlockStructure contiguous(Index num_blocks, Index d) {
        std::vector<std::vector<Index>> blocks(static_cast<std::size_t>(num_blocks));
        for (Index j = 0; j < num_blocks; ++j) {
            auto& b = blocks[static_cast<std::size_t>(j)];
            b.reserve(static_cast<std::size_t>(d));
            for (Index k = 0; k < d; ++k) b.push_back(j * d + k);
        }
        return BlockStructure(std::move(blocks), d);
    }

    const std::vector<std::vector<Index>>& blocks() const noexcept { return blocks_; }
    Index d_max() const noexcept { return d_max_; }
    Index num_blocks() const noexcept { return static_cast<Index>(blocks_.size()); }

    Index dimension() const noexcept {
        Index p = 0;
        for (const auto& b : blocks_) p += static_cast<Index>(b.size());
        return p;
    }

    /// Blocks are disjoint, cover {0..p-1} exactly, and each has size <= d_max.
    bool is_valid_partition(Index p) const {
        if (d_max_ <= 0) return false;
        std::vector<char> seen(static_cast<std::size_t>(p), 0);
        Index count = 0;
        for (const auto& b : blocks_) {
            if (static_cast<Index>(b.size()) > d_max_ || b.empty()) return false;
            for (Index i : b) {
                if (i < 0 || i >= p || seen[static_cast<std::size_t>(i)]) return false;
                seen[static_cast<std::size_t>(i)] = 1;
                ++count;
            }
        }
        return count == p;
    }

    /// Index of the block containing coordinate i, or -1.
    Index block_of(Index i) const {
        for (std::size_t j = 0; j < blocks_.size(); ++j) {
            for (Index k : blocks_[j]) {
                if (k == i) return static_cast<Index>(j);
            }
        }
        return -1;
    }

private:
    std::vector<std::vector<Index>> blocks_;
    Index d_max_ = 0;
};

// ---------------------------------------------------------------------------
// Design specification
// ---------------------------------------------------------------------------

enum class Family { GaussianControl, AdditiveTrig, FunctionalBlock, GwasTable };

inline std::string_view to_string(Family f) {
    switch (f) {
        case Family::GaussianControl: return "gaussian";
        case Family::AdditiveTrig: return "additive-trig";
        case Family::FunctionalBlock: return "functional";
        case Family::GwasTable: return "gwas";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    if (s == "gaussian") return Family::GaussianControl;
    if (s == "additive-trig") return Family::AdditiveTrig;
    if (s == "functional") return Family::FunctionalBlock;
    if (s == "gwas") return Family::GwasTable;
    throw InvalidSpec("unknown design family '" + std::string(s) + "'");
}

/// How the diagonal of Lambda is chosen.
///  - Identity: all ones.
///  - UniformSqrt: the first block's square-root entries are drawn from
///    Unif(1, 2) and every other block is a copy of the first.
enum class LambdaMode { Identity, UniformSqrt };

inline std::string_view to_string(LambdaMode m) {
    return m == LambdaMode::Identity ? "identity" : "unif-sqrt";
}

inline LambdaMode parse_lambda_mode(std::string_view s) {
    if (s == "identity") return LambdaMode::Identity;
    if (s == "unif-sqrt") return LambdaMode::UniformSqrt;
    throw InvalidSpec("unknown lambda mode '" + std::string(s) + "'");
}

/// Law of the common multiplier V in the functional-block design:
/// P(V = 0) = prob_zero, P(V = +magnitude) = P(V = -magnitude) = (1 - prob_zero) / 2.
/// The default has E[V^2] = 1 and E[V^4] = 2.
struct VLaw {
    double prob_zero = 0.5;
    double magnitude = std::numbers::sqrt2;

    double second_moment() const noexcept { return (1.0 - prob_zero) * magnitude * magnitude; }
    double fourth_moment() const noexcept {
        const double m2 = magnitude * magnitude;
        return (1.0 - prob_zero) * m2 * m2;
    }
};

struct DesignSpec {
    Family family = Family::GaussianControl;
    Index p0 = 1;
    Index d = 1;
    VectorXd lambda_diag;
    VLaw v_law{};

    Index dimension() const noexcept { return p0 * d; }
};

/// Builds the diagonal of Lambda for p0 blocks of size d. UniformSqrt draws
/// from `key`, so the same key reproduces the same Lambda.
inline VectorXd make_lambda_diag(LambdaMode mode, Index p0, Index d, StreamKey key) {
    VectorXd lambda = VectorXd::Ones(p0 * d);
    if (mode == LambdaMode::UniformSqrt) {
        KeyedStream rng(key);
        VectorXd first(d);
        for (Index k = 0; k < d; ++k) {
            const double root = 1.0 + rng.uniform();
            first[k] = root * root;
        }
        for (Index j = 0; j < p0; ++j) lambda.segment(j * d, d) = first;
    }
    return lambda;
}

/// Throws InvalidSpec when the spec violates a structural invariant.
inline void validate(const DesignSpec& spec) {
    if (spec.p0 <= 0) throw InvalidSpec("p0 must be positive");
    if (spec.d <= 0) throw InvalidSpec("d must be positive");
    if (spec.family == Family::AdditiveTrig && spec.d % 2 != 0) {
        throw InvalidSpec("additive-trig requires an even block size d");
    }
    if (spec.lambda_diag.size() != spec.dimension()) {
        throw InvalidSpec("lambda_diag has length " + std::to_string(spec.lambda_diag.size()) +
                          ", expected p0*d = " + std::to_string(spec.dimension()));
    }
    for (Index i = 0; i < spec.lambda_diag.size(); ++i) {
        const double v = spec.lambda_diag[i];
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSpec("lambda_diag entries must be positive and finite");
    }
    if (spec.family == Family::AdditiveTrig || spec.family == Family::GwasTable) {
        if ((spec.lambda_diag.array() != 1.0).any()) {
            throw InvalidSpec(std::string(to_string(spec.family)) + " design is isotropic; lambda_diag must be all ones");
        }
    }
    if (spec.family == Family::FunctionalBlock) {
        const auto& v = spec.v_law;
        if (!(v.prob_zero >= 0.0 && v.prob_zero < 1.0) || !(v.magnitude > 0.0)) {
            throw InvalidSpec("invalid V law for functional design");
        }
    }
}

// ---------------------------------------------------------------------------
// Block samplers
// ---------------------------------------------------------------------------

/// Trigonometric basis (phi_1(x), ..., phi_d(x)) with phi_{2k-1} = sqrt2 cos(2 pi k x)
/// and phi_{2k} = sqrt2 sin(2 pi k x). The constant function is left out.
inline VectorXd trig_row(double x, Index d) {
    if (d <= 0 || d % 2 != 0) throw InvalidSpec("trig_row: d must be a positive even integer");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("trig_row: x must lie in [0, 1]");
    VectorXd out(d);
    for (Index k = 1; k <= d / 2; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) * x;
        out[2 * k - 2] = std::numbers::sqrt2 * std::cos(angle);
        out[2 * k - 1] = std::numbers::sqrt2 * std::sin(angle);
    }
    return out;
}

/// GWAS table row for a given outcome j in {1, ..., 2d}: sqrt(d) * s * e_{ceil(j/2)}
/// with s = +1 for odd j and -1 for even j.
inline VectorXd gwas_outcome_row(Index d, Index outcome) {
    if (d <= 0) throw InvalidSpec("gwas_block_row: d must be positive");
    if (outcome < 1 || outcome > 2 * d) throw DomainError("gwas outcome must lie in {1, ..., 2d}");
    VectorXd out = VectorXd::Zero(d);
    const Index slot = (outcome + 1) / 2 - 1;
    out[slot] = (outcome % 2 == 1 ? 1.0 : -1.0) * std::sqrt(static_cast<double>(d));
    return out;
}

template <class Rng>
VectorXd gwas_block_row(Index d, Rng& rng) {
    if (d <= 0) throw InvalidSpec("gwas_block_row: d must be positive");
    const auto outcome = static_cast<Index>(rng.below(static_cast<std::uint64_t>(2 * d))) + 1;
    return gwas_outcome_row(d, outcome);
}

/// One V, d independent Rademacher signs: (U_1 V, ..., U_d V).
template <class Rng>
VectorXd functional_block_row(Index d, const VLaw& law, Rng& rng) {
    if (d <= 0) throw InvalidSpec("functional_block_row: d must be positive");
    const double u = rng.uniform();
    double v = 0.0;
    if (u >= law.prob_zero) {
        v = (u < law.prob_zero + 0.5 * (1.0 - law.prob_zero)) ? law.magnitude : -law.magnitude;
    }
    VectorXd out(d);
    for (Index k = 0; k < d; ++k) out[k] = rng.rademacher() * v;
    return out;
}

/// Fills one unscaled (isotropic) row of the design.
inline void fill_isotropic_row(const DesignSpec& spec, KeyedStream& rng, Eigen::Ref<VectorXd> row) {
    const Index d = spec.d;
    for (Index j = 0; j < spec.p0; ++j) {
        auto block = row.segment(j * d, d);
        switch (spec.family) {
            case Family::GaussianControl:
                for (Index k = 0; k < d; ++k) block[k] = rng.normal();
                break;
            case Family::AdditiveTrig:
                block = trig_row(rng.uniform(), d);
                break;
            case Family::FunctionalBlock:
                block = functional_block_row(d, spec.v_law, rng);
                break;
            case Family::GwasTable:
                block = gwas_block_row(d, rng);
                break;
        }
    }
}

/// One scaled row X_i Lambda^{1/2}, drawn from `key`.
inline VectorXd sample_row(const DesignSpec& spec, StreamKey key) {
    VectorXd row(spec.dimension());
    KeyedStream rng(key);
    fill_isotropic_row(spec, rng, row);
    return row.cwiseProduct(spec.lambda_diag.cwiseSqrt());
}

struct SampledDesign {
    MatrixXd x;
    BlockStructure structure;
};

/// n i.i.d. rows; row i is drawn from `key.child(i)`, so the result does not
/// depend on generation order.
inline SampledDesign sample_design(const DesignSpec& spec, Index n, StreamKey key) {
    validate(spec);
    if (n <= 0) throw InvalidSpec("sample_design: n must be positive");
    const Index p = spec.dimension();
    MatrixXd x(n, p);
    const VectorXd scale = spec.lambda_diag.cwiseSqrt();
    VectorXd row(p);
    for (Index i = 0; i < n; ++i) {
        KeyedStream rng(key.child(static_cast<std::uint64_t>(i)));
        fill_isotropic_row(spec, rng, row);
        x.row(i) = row.cwiseProduct(scale).transpose();
    }
    return {std::move(x), BlockStructure::contiguous(spec.p0, spec.d)};
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, Rademacher };

inline std::string_view to_string(NoiseKind k) { return k == NoiseKind::Gaussian ? "gaussian" : "rademacher"; }

inline NoiseKind parse_noise_kind(std::string_view s) {
    if (s == "gaussian") return NoiseKind::Gaussian;
    if (s == "rademacher") return NoiseKind::Rademacher;
    throw InvalidSpec("unknown noise kind '" + std::string(s) + "'");
}

/// n noise draws with standard deviation sigma.
inline VectorXd sample_noise(Index n, double sigma, NoiseKind kind, StreamKey key) {
    if (!(sigma >= 0.0)) throw InvalidSpec("noise sigma must be nonnegative");
    KeyedStream rng(key);
    VectorXd xi(n);
    for (Index i = 0; i < n; ++i) {
        xi[i] = sigma * (kind == NoiseKind::Gaussian ? rng.normal() : rng.rademacher());
    }
    return xi;
}

struct Responses {
    VectorXd y;
    VectorXd xi;
};

/// y = x * beta0 + xi with xi drawn from `key`. sigma = 0 is accepted and gives
/// noiseless responses.
inline Responses simulate_responses(const MatrixXd& x, const VectorXd& beta0, double sigma, StreamKey key,
                                    NoiseKind kind = NoiseKind::Gaussian) {
    detail::require_same_size(x.cols(), beta0.size(), "simulate_responses: cols(x) vs len(beta0)");
    VectorXd xi = sample_noise(x.rows(), sigma, kind, key);
    VectorXd y = x * beta0 + xi;
    return {std::move(y), std::move(xi)};
}

/// Same as above with a caller-supplied noise vector (used to pair noise
/// across design families).
inline Responses responses_with_noise(const MatrixXd& x, const VectorXd& beta0, VectorXd xi) {
    detail::require_same_size(x.cols(), beta0.size(), "responses_with_noise: cols(x) vs len(beta0)");
    detail::require_same_size(x.rows(), xi.size(), "responses_with_noise: rows(x) vs len(xi)");
    VectorXd y = x * beta0 + xi;
    return {std::move(y), std::move(xi)};
}

// ---------------------------------------------------------------------------
// Signal and dataset
// ---------------------------------------------------------------------------

enum class SignalKind { BernoulliScaled, Zero, Custom };

struct SignalSpec {
    SignalKind kind = SignalKind::BernoulliScaled;
    double bernoulli_prob = 0.5;
    VectorXd values;  // used when kind == Custom
};

/// beta0 of length p. BernoulliScaled gives entries in {0, n^{-1/2}}.
inline VectorXd make_signal(const SignalSpec& spec, Index p, Index n, StreamKey key) {
    switch (spec.kind) {
        case SignalKind::Zero:
            return VectorXd::Zero(p);
        case SignalKind::Custom:
            detail::require_same_size(spec.values.size(), p, "make_signal: custom values");
            return spec.values;
        case SignalKind::BernoulliScaled: {
            if (!(spec.bernoulli_prob >= 0.0 && spec.bernoulli_prob <= 1.0)) {
                throw InvalidSpec("bernoulli_prob must lie in [0, 1]");
            }
            KeyedStream rng(key);
            const double scale = 1.0 / std::sqrt(static_cast<double>(n));
            VectorXd beta(p);
            for (Index i = 0; i < p; ++i) beta[i] = rng.bernoulli(spec.bernoulli_prob) ? scale : 0.0;
            return beta;
        }
    }
    return VectorXd::Zero(p);
}

struct Dataset {
    MatrixXd x;
    VectorXd y;
    VectorXd beta0;
    VectorXd xi;
    VectorXd lambda_diag;
    BlockStructure structure;

    Index n() const noexcept { return x.rows(); }
    Index p() const noexcept { return x.cols(); }

    void check() const {
        detail::require_same_size(x.rows(), y.size(), "Dataset: rows(x) vs len(y)");
        if (xi.size() != 0) detail::require_same_size(x.rows(), xi.size(), "Dataset: rows(x) vs len(xi)");
        if (beta0.size() != 0) detail::require_same_size(x.cols(), beta0.size(), "Dataset: cols(x) vs len(beta0)");
        if (lambda_diag.size() != 0) {
            detail::require_same_size(x.cols(), lambda_diag.size(), "Dataset: cols(x) vs len(lambda_diag)");
        }
    }
};

/// Samples a design and its responses. Design rows come from key.child(0),
/// noise from key.child(1).
inline Dataset make_dataset(const DesignSpec& spec, Index n, const VectorXd& beta0, double sigma, StreamKey key,
                            NoiseKind noise = NoiseKind::Gaussian) {
    auto design = sample_design(spec, n, key.child(0));
    auto resp = simulate_responses(design.x, beta0, sigma, key.child(1), noise);
    return Dataset{std::move(design.x), std::move(resp.y), beta0, std::move(resp.xi), spec.lambda_diag,
                   std::move(design.structure)};
}

}  // namespace blockuniv
