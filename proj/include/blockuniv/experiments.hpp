#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "asymptotics.hpp"
#include "designs.hpp"
#include "estimators.hpp"
#include "io.hpp"
#include "rng.hpp"

namespace blockuniv {

/// Sub-stream tags under StreamKey(master_seed).
namespace streams {
inline constexpr std::uint64_t kLambda = 1;
inline constexpr std::uint64_t kSignal = 2;
inline constexpr std::uint64_t kReplicates = 3;
inline constexpr std::uint64_t kDiagnose = 4;

// Under a replicate key.
inline constexpr std::uint64_t kDependentDesign = 0;
inline constexpr std::uint64_t kGaussianDesign = 1;
inline constexpr std::uint64_t kDependentNoise = 2;
inline constexpr std::uint64_t kGaussianNoise = 3;

inline StreamKey replicate(std::uint64_t seed, std::uint64_t index) {
    return StreamKey(seed).child(kReplicates).child(index);
}
}  // namespace streams

// ---------------------------------------------------------------------------
// Design recipes (the flat key=value design description)
// ---------------------------------------------------------------------------

/// Everything needed to rebuild a DesignSpec: Lambda is regenerated from the seed.
struct DesignRecipe {
    Family family = Family::GaussianControl;
    Index p0 = 1;
    Index d = 1;
    std::uint64_t seed = 0;
    LambdaMode lambda_mode = LambdaMode::Identity;
    double sigma = 1.0;

    DesignSpec to_spec() const {
        DesignSpec spec;
        spec.family = family;
        spec.p0 = p0;
        spec.d = d;
        if (p0 <= 0 || d <= 0) throw InvalidSpec("p0 and d must be positive");
        spec.lambda_diag = make_lambda_diag(lambda_mode, p0, d, StreamKey(seed).child(streams::kLambda));
        validate(spec);
        return spec;
    }

    /// The Gaussian control with the same shape and Lambda.
    DesignSpec control_spec() const {
        DesignSpec spec = to_spec();
        spec.family = Family::GaussianControl;
        return spec;
    }
};

inline std::string format_recipe(const DesignRecipe& r) {
    return io::format_key_values({{"family", std::string(to_string(r.family))},
                                  {"p0", std::to_string(r.p0)},
                                  {"d", std::to_string(r.d)},
                                  {"seed", std::to_string(r.seed)},
                                  {"lambda_mode", std::string(to_string(r.lambda_mode))},
                                  {"sigma", io::format_double(r.sigma)}});
}

inline DesignRecipe parse_recipe(std::string_view text, std::string_view context = "design spec") {
    const auto kv = io::parse_key_values(text, context);
    DesignRecipe r;
    for (const auto& [key, value] : kv) {
        const std::string where = std::string(context) + ": " + key;
        if (key == "family") {
            r.family = parse_family(value);
        } else if (key == "p0") {
            r.p0 = io::parse_integer<Index>(value, where);
        } else if (key == "d") {
            r.d = io::parse_integer<Index>(value, where);
        } else if (key == "seed") {
            r.seed = io::parse_integer<std::uint64_t>(value, where);
        } else if (key == "lambda_mode") {
            r.lambda_mode = parse_lambda_mode(value);
        } else if (key == "sigma") {
            r.sigma = io::parse_double(value, where);
        } else {
            throw ParseError(std::string(context) + ": unknown key '" + key + "'");
        }
    }
    for (const char* required : {"family", "p0", "d"}) {
        if (!kv.count(required)) throw ParseError(std::string(context) + ": missing key '" + required + "'");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// n log-spaced points between lo and hi (inclusive), ascending.
inline std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InvalidSpec("log_grid: need 0 < lo <= hi and count >= 1");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

inline std::vector<double> default_lambda_grid() { return log_grid(0.05, 2.0, 10); }

struct ExperimentConfig {
    DesignRecipe design;
    Penalty penalty = Penalty::Lasso;
    Index n = 200;
    std::vector<double> lambda_grid = default_lambda_grid();
    int replicates = 50;
    double sigma = 1.0;
    SignalSpec signal{};
    bool paired_noise = true;
    NoiseKind noise = NoiseKind::Gaussian;
    double tol = 1e-10;
    long max_sweeps = 100000;

    std::uint64_t master_seed() const noexcept { return design.seed; }

    void validate() const {
        design.to_spec();
        if (n <= 0) throw InvalidSpec("n must be positive");
        if (replicates < 2) throw InvalidSpec("replicates must be at least 2");
        if (lambda_grid.empty()) throw InvalidSpec("lambda grid must be nonempty");
        for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
            if (!(lambda_grid[i] > 0.0)) throw InvalidSpec("lambda grid entries must be positive");
            if (i && !(lambda_grid[i] > lambda_grid[i - 1])) throw InvalidSpec("lambda grid must be ascending");
        }
        if (!(sigma >= 0.0)) throw InvalidSpec("sigma must be nonnegative");
    }
};

/// Canonical key=value rendering; parse_experiment_config(format_experiment_config(c)) == c.
inline std::string format_experiment_config(const ExperimentConfig& c) {
    std::string grid;
    for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) {
        if (i) grid += ',';
        grid += io::format_double(c.lambda_grid[i]);
    }
    std::vector<std::pair<std::string, std::string>> kv{
        {"family", std::string(to_string(c.design.family))},
        {"p0", std::to_string(c.design.p0)},
        {"d", std::to_string(c.design.d)},
        {"lambda_mode", std::string(to_string(c.design.lambda_mode))},
        {"n", std::to_string(c.n)},
        {"penalty", std::string(to_string(c.penalty))},
        {"lambdas", grid},
        {"replicates", std::to_string(c.replicates)},
        {"seed", std::to_string(c.design.seed)},
        {"sigma", io::format_double(c.sigma)},
        {"signal", c.signal.kind == SignalKind::Zero ? "zero" : "bernoulli"},
        {"signal_prob", io::format_double(c.signal.bernoulli_prob)},
        {"paired_noise", c.paired_noise ? "true" : "false"},
        {"noise", std::string(to_string(c.noise))},
        {"tol", io::format_double(c.tol)},
        {"max_sweeps", std::to_string(c.max_sweeps)},
    };
    return io::format_key_values(kv);
}

/// Parses the flat config format. Unknown keys are rejected. The grid is either
/// `lambdas=a,b,c` or `lambda_min`, `lambda_max`, `lambda_count` (log-spaced);
/// without either the default grid is used.
inline ExperimentConfig parse_experiment_config(std::string_view text, std::string_view context = "config") {
    const auto kv = io::parse_key_values(text, context);
    ExperimentConfig c;
    double lambda_min = 0.05;
    double lambda_max = 2.0;
    int lambda_count = 10;
    bool explicit_grid = false;
    for (const auto& [key, value] : kv) {
        const std::string where = std::string(context) + ": " + key;
        if (key == "family") c.design.family = parse_family(value);
        else if (key == "p0") c.design.p0 = io::parse_integer<Index>(value, where);
        else if (key == "d") c.design.d = io::parse_integer<Index>(value, where);
        else if (key == "lambda_mode") c.design.lambda_mode = parse_lambda_mode(value);
        else if (key == "n") c.n = io::parse_integer<Index>(value, where);
        else if (key == "penalty") c.penalty = parse_penalty(value);
        else if (key == "lambdas") {
            c.lambda_grid.clear();
            for (auto f : io::split(value, ',')) c.lambda_grid.push_back(io::parse_double(f, where));
            explicit_grid = true;
        } else if (key == "lambda_min") lambda_min = io::parse_double(value, where);
        else if (key == "lambda_max") lambda_max = io::parse_double(value, where);
        else if (key == "lambda_count") lambda_count = io::parse_integer<int>(value, where);
        else if (key == "replicates") c.replicates = io::parse_integer<int>(value, where);
        else if (key == "seed") c.design.seed = io::parse_integer<std::uint64_t>(value, where);
        else if (key == "sigma") c.sigma = io::parse_double(value, where);
        else if (key == "signal") {
            if (value == "bernoulli") c.signal.kind = SignalKind::BernoulliScaled;
            else if (value == "zero") c.signal.kind = SignalKind::Zero;
            else throw ParseError(where + ": expected bernoulli or zero");
        } else if (key == "signal_prob") c.signal.bernoulli_prob = io::parse_double(value, where);
        else if (key == "paired_noise") c.paired_noise = io::parse_bool(value, where);
        else if (key == "noise") c.noise = parse_noise_kind(value);
        else if (key == "tol") c.tol = io::parse_double(value, where);
        else if (key == "max_sweeps") c.max_sweeps = io::parse_integer<long>(value, where);
        else throw ParseError(std::string(context) + ": unknown key '" + key + "'");
    }
    const bool range_keys = kv.count("lambda_min") || kv.count("lambda_max") || kv.count("lambda_count");
    if (explicit_grid && range_keys) throw ParseError(std::string(context) + ": give either lambdas or a lambda range");
    if (range_keys) c.lambda_grid = log_grid(lambda_min, lambda_max, lambda_count);
    c.design.sigma = c.sigma;
    c.validate();
    return c;
}

/// FNV-1a of the canonical config text.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : format_experiment_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Replicates
// ---------------------------------------------------------------------------

/// Quantities fixed for the whole experiment: Lambda, beta0 and both design specs.
struct ExperimentSetup {
    DesignSpec dependent;
    DesignSpec gaussian;
    VectorXd beta0;
    SignalSpectrum spectrum;
};

inline ExperimentSetup make_setup(const ExperimentConfig& config) {
    config.validate();
    ExperimentSetup s;
    s.dependent = config.design.to_spec();
    s.gaussian = config.design.control_spec();
    const Index p = s.dependent.dimension();
    s.beta0 = make_signal(config.signal, p, config.n, StreamKey(config.master_seed()).child(streams::kSignal));
    s.spectrum = spectrum_from_model(s.beta0, s.dependent.lambda_diag, config.n, config.sigma);
    return s;
}

struct FitDiagnostics {
    Index support_size = 0;
    double kkt_residual = 0.0;
    double linf_error = 0.0;
    long iterations = 0;
};

struct CellResult {
    bool ok = false;
    double risk_dependent = std::numeric_limits<double>::quiet_NaN();
    double risk_gaussian = std::numeric_limits<double>::quiet_NaN();
    FitDiagnostics dependent;
    FitDiagnostics gaussian;
    std::string error;
};

/// Both datasets of one replicate. The Gaussian control has the dependent
/// design's shape and Lambda; with paired noise both share xi.
struct ReplicateData {
    Dataset dependent;
    Dataset gaussian;
};

inline ReplicateData make_replicate_data(const ExperimentConfig& config, const ExperimentSetup& setup,
                                         std::uint64_t replicate_index) {
    const StreamKey key = streams::replicate(config.master_seed(), replicate_index);
    auto dep = sample_design(setup.dependent, config.n, key.child(streams::kDependentDesign));
    auto gau = sample_design(setup.gaussian, config.n, key.child(streams::kGaussianDesign));
    VectorXd xi_dep = sample_noise(config.n, config.sigma, config.noise, key.child(streams::kDependentNoise));
    VectorXd xi_gau = config.paired_noise
                          ? xi_dep
                          : sample_noise(config.n, config.sigma, config.noise, key.child(streams::kGaussianNoise));
    auto rd = responses_with_noise(dep.x, setup.beta0, std::move(xi_dep));
    auto rg = responses_with_noise(gau.x, setup.beta0, std::move(xi_gau));
    return {Dataset{std::move(dep.x), std::move(rd.y), setup.beta0, std::move(rd.xi), setup.dependent.lambda_diag,
                    std::move(dep.structure)},
            Dataset{std::move(gau.x), std::move(rg.y), setup.beta0, std::move(rg.xi), setup.gaussian.lambda_diag,
                    std::move(gau.structure)}};
}

namespace detail {

inline FitDiagnostics diagnostics_of(const FitResult& fit, const VectorXd& beta0) {
    return {fit.support_size, fit.kkt_residual,
            beta0.size() ? (fit.beta_hat - beta0).lpNorm<Eigen::Infinity>() : 0.0, fit.iterations};
}

/// Fits the whole grid on one dataset; a failed lambda is reported and the
/// path continues from a cold start.
inline std::vector<std::pair<std::optional<FitResult>, std::string>> fit_grid(const Dataset& data, Penalty penalty,
                                                                              const std::vector<double>& grid,
                                                                              const ExperimentConfig& config) {
    const GramCache cache(data);
    std::vector<std::pair<std::optional<FitResult>, std::string>> out(grid.size());
    std::optional<VectorXd> warm;
    for (std::size_t k = grid.size(); k-- > 0;) {
        FitConfig cfg;
        cfg.lambda = grid[k];
        cfg.tol = config.tol;
        cfg.max_sweeps = config.max_sweeps;
        if (penalty == Penalty::Lasso) cfg.warm_start = warm;
        try {
            out[k].first = fit(cache, penalty, cfg);
            warm = out[k].first->beta_hat;
        } catch (const NumericError& e) {
            out[k].second = e.what();
            warm.reset();
        }
    }
    return out;
}

}  // namespace detail

/// Every lambda of the grid for one replicate. Lasso fits run down the grid
/// with warm starts on the same pair of datasets.
inline std::vector<CellResult> run_replicate_path(const ExperimentConfig& config, const ExperimentSetup& setup,
                                                  std::uint64_t replicate_index) {
    const auto data = make_replicate_data(config, setup, replicate_index);
    const auto dep = detail::fit_grid(data.dependent, config.penalty, config.lambda_grid, config);
    const auto gau = detail::fit_grid(data.gaussian, config.penalty, config.lambda_grid, config);
    std::vector<CellResult> cells(config.lambda_grid.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
        auto& c = cells[k];
        if (dep[k].first && gau[k].first) {
            c.ok = true;
            c.risk_dependent = estimation_risk(dep[k].first->beta_hat, setup.beta0);
            c.risk_gaussian = estimation_risk(gau[k].first->beta_hat, setup.beta0);
            c.dependent = detail::diagnostics_of(*dep[k].first, setup.beta0);
            c.gaussian = detail::diagnostics_of(*gau[k].first, setup.beta0);
        } else {
            c.error = "replicate " + std::to_string(replicate_index) + ", lambda " +
                      io::format_double(config.lambda_grid[k]) + ": " +
                      (dep[k].first ? gau[k].second : dep[k].second);
        }
    }
    return cells;
}

/// A single (replicate, lambda) cell, fitted from a cold start. Solver
/// failures propagate with the cell coordinates in the message.
inline CellResult run_replicate(const ExperimentConfig& config, std::uint64_t replicate_index, double lambda) {
    const auto setup = make_setup(config);
    const auto data = make_replicate_data(config, setup, replicate_index);
    FitConfig cfg;
    cfg.lambda = lambda;
    cfg.tol = config.tol;
    cfg.max_sweeps = config.max_sweeps;
    CellResult c;
    try {
        const auto fd = fit(GramCache(data.dependent), config.penalty, cfg);
        const auto fg = fit(GramCache(data.gaussian), config.penalty, cfg);
        c.ok = true;
        c.risk_dependent = estimation_risk(fd.beta_hat, setup.beta0);
        c.risk_gaussian = estimation_risk(fg.beta_hat, setup.beta0);
        c.dependent = detail::diagnostics_of(fd, setup.beta0);
        c.gaussian = detail::diagnostics_of(fg, setup.beta0);
    } catch (const NumericError& e) {
        throw NumericError("replicate " + std::to_string(replicate_index) + ", lambda " + io::format_double(lambda) +
                           ": " + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct SummaryRow {
    double lambda = 0.0;
    double mean_risk_dependent = 0.0;
    double se_dependent = 0.0;
    double mean_risk_gaussian = 0.0;
    double se_gaussian = 0.0;
    double predicted_risk = 0.0;
    double gap_zscore = 0.0;
};

struct ExperimentSummary {
    std::vector<SummaryRow> rows;
    std::uint64_t config_hash = 0;
    double wall_seconds = 0.0;
    std::size_t failed_cells = 0;
    std::size_t total_cells = 0;
    /// cells[replicate][lambda index]
    std::vector<std::vector<CellResult>> cells;
    std::vector<std::string> failures;
    SignalSpectrum spectrum;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and s.d. / sqrt(count). Summation is in the given order.
inline MeanSe mean_and_se(const std::vector<double>& values) {
    const auto m = static_cast<double>(values.size());
    if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / m;
    if (values.size() < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (m - 1.0)) / std::sqrt(m)};
}

inline double gap_zscore(const MeanSe& a, const MeanSe& b) {
    const double diff = std::abs(a.mean - b.mean);
    const double se = std::sqrt(a.se * a.se + b.se * b.se);
    if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / se;
}

/// Minimum fraction of successful cells for a summary to be produced.
inline constexpr double kMinSuccessFraction = 0.9;

/// Runs every replicate (each covering the full grid) on `threads` workers.
/// Results are reduced in fixed (replicate, lambda) order, so the summary does
/// not depend on scheduling.
inline ExperimentSummary run_experiment(const ExperimentConfig& config, int threads = 1) {
    const auto start = std::chrono::steady_clock::now();
    const auto setup = make_setup(config);
    const auto reps = static_cast<std::size_t>(config.replicates);
    const std::size_t grid = config.lambda_grid.size();

    ExperimentSummary summary;
    summary.cells.assign(reps, std::vector<CellResult>(grid));
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    const auto worker = [&] {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                summary.cells[r] = run_replicate_path(config, setup, r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(reps)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    summary.total_cells = reps * grid;
    for (const auto& rep : summary.cells) {
        for (const auto& c : rep) {
            if (!c.ok) {
                ++summary.failed_cells;
                summary.failures.push_back(c.error);
            }
        }
    }
    const double success =
        1.0 - static_cast<double>(summary.failed_cells) / static_cast<double>(std::max<std::size_t>(1, summary.total_cells));
    if (success < kMinSuccessFraction) {
        throw NumericError("run_experiment: only " + std::to_string(summary.total_cells - summary.failed_cells) +
                           " of " + std::to_string(summary.total_cells) + " cells succeeded; first failure: " +
                           (summary.failures.empty() ? std::string("?") : summary.failures.front()));
    }

    summary.spectrum = setup.spectrum;
    for (std::size_t k = 0; k < grid; ++k) {
        std::vector<double> dep;
        std::vector<double> gau;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& c = summary.cells[r][k];
            if (!c.ok) continue;
            dep.push_back(c.risk_dependent);
            gau.push_back(c.risk_gaussian);
        }
        SummaryRow row;
        row.lambda = config.lambda_grid[k];
        const auto md = mean_and_se(dep);
        const auto mg = mean_and_se(gau);
        row.mean_risk_dependent = md.mean;
        row.se_dependent = md.se;
        row.mean_risk_gaussian = mg.mean;
        row.se_gaussian = mg.se;
        row.gap_zscore = gap_zscore(md, mg);
        try {
            row.predicted_risk = predict_risk(setup.spectrum, row.lambda, config.penalty).value;
        } catch (const NumericError&) {
            row.predicted_risk = std::numeric_limits<double>::quiet_NaN();
        }
        summary.rows.push_back(row);
    }
    summary.config_hash = config_hash(config);
    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

// ---------------------------------------------------------------------------
// Summary CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSummaryHeader =
    "lambda,mean_risk_dependent,se_dependent,mean_risk_gaussian,se_gaussian,predicted_risk,gap_zscore";

inline std::string format_summary(const std::vector<SummaryRow>& rows) {
    std::string out(kSummaryHeader);
    out += '\n';
    for (const auto& r : rows) {
        for (double v : {r.lambda, r.mean_risk_dependent, r.se_dependent, r.mean_risk_gaussian, r.se_gaussian,
                         r.predicted_risk}) {
            out += io::format_double(v);
            out += ',';
        }
        out += io::format_double(r.gap_zscore);
        out += '\n';
    }
    return out;
}

inline std::string format_summary(const ExperimentSummary& s) { return format_summary(s.rows); }

inline void emit_summary(const ExperimentSummary& s, const std::string& path) { io::write_file(path, format_summary(s)); }

inline std::vector<SummaryRow> parse_summary(std::string_view text, std::string_view context = "summary") {
    const auto ls = io::lines(text);
    if (ls.empty() || io::trim(ls.front()) != kSummaryHeader) {
        throw ParseError(std::string(context) + ": missing or wrong header");
    }
    std::vector<SummaryRow> rows;
    for (std::size_t i = 1; i < ls.size(); ++i) {
        const auto f = io::split(ls[i], ',');
        const std::string where = std::string(context) + " line " + std::to_string(i + 1);
        if (f.size() != 7) throw ParseError(where + ": expected 7 columns");
        SummaryRow r;
        r.lambda = io::parse_double(f[0], where);
        r.mean_risk_dependent = io::parse_double(f[1], where);
        r.se_dependent = io::parse_double(f[2], where);
        r.mean_risk_gaussian = io::parse_double(f[3], where);
        r.se_gaussian = io::parse_double(f[4], where);
        r.predicted_risk = io::parse_double(f[5], where);
        r.gap_zscore = io::parse_double(f[6], where);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Normality diagnostic
// ---------------------------------------------------------------------------

/// Kolmogorov-Smirnov distance between the empirical law of `values` and N(0, 1).
inline double ks_statistic_normal(std::vector<double> values) {
    if (values.empty()) throw InvalidSpec("ks_statistic_normal: no samples");
    std::sort(values.begin(), values.end());
    const auto m = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = detail::normal_cdf(values[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return d;
}

/// Draws one design row from a stream key.
using RowSampler = std::function<VectorXd(StreamKey)>;

/// Unscaled (isotropic) rows of a design spec.
inline RowSampler isotropic_row_sampler(DesignSpec spec) {
    validate(spec);
    return [spec = std::move(spec)](StreamKey key) {
        VectorXd row(spec.dimension());
        KeyedStream rng(key);
        fill_isotropic_row(spec, rng, row);
        return row;
    };
}

/// KS distance of X_i^T theta / ||theta|| to N(0, 1) over `samples` fresh rows,
/// row i drawn from key.child(i).
inline double normality_diagnostic(const RowSampler& sampler, const VectorXd& theta, Index samples, StreamKey key) {
    const double norm = theta.norm();
    if (!(norm > 0.0)) throw InvalidSpec("normality_diagnostic: theta must be nonzero");
    if (samples <= 0) throw InvalidSpec("normality_diagnostic: samples must be positive");
    std::vector<double> values(static_cast<std::size_t>(samples));
    for (Index i = 0; i < samples; ++i) {
        const VectorXd row = sampler(key.child(static_cast<std::uint64_t>(i)));
        detail::require_same_size(row.size(), theta.size(), "normality_diagnostic: row vs theta");
        values[static_cast<std::size_t>(i)] = row.dot(theta) / norm;
    }
    return ks_statistic_normal(std::move(values));
}

}  // namespace blockuniv
