// blockuniv: sample block-dependent designs, fit Lasso/ridge, solve the
// state-evolution system and run universality experiments.
//
// Exit codes: 0 success, 2 usage or parse error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <blockuniv/blockuniv.hpp>

namespace {

using namespace blockuniv;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct SampleArgs {
    std::string family;
    Index p0 = 1;
    Index d = 1;
    Index n = 1;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::string lambda_mode = "identity";
    double sigma = 1.0;
    std::string out;
};

struct FitArgs {
    std::string penalty;
    double lambda = 0.0;
    std::string design;
    std::string y;
    std::string beta0;
    std::string out;
    double tol = 1e-10;
    long max_sweeps = 100000;
    std::uint64_t seed = 0;
};

struct StateEvolutionArgs {
    std::string penalty;
    double lambda = 0.0;
    std::string spectrum;
    double tol = 1e-10;
    std::string out;
    std::uint64_t seed = 0;
};

struct ExperimentArgs {
    std::string config;
    std::string out;
    std::string spectrum_out;
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

struct DiagnoseArgs {
    std::string design_spec;
    std::string theta;
    Index samples = 2000;
    std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
    DesignRecipe recipe;
    recipe.family = parse_family(a.family);
    recipe.p0 = a.p0;
    recipe.d = a.d;
    recipe.seed = a.seed;
    recipe.lambda_mode = parse_lambda_mode(a.lambda_mode);
    recipe.sigma = a.sigma;
    const auto spec = recipe.to_spec();
    const auto key = streams::replicate(a.seed, a.replicate).child(streams::kDependentDesign);
    const auto design = sample_design(spec, a.n, key);
    const auto text = io::format_matrix(design.x);
    if (a.out.empty()) {
        std::cout << text;
    } else {
        io::write_file(a.out, text);
        io::write_file(a.out + ".spec", format_recipe(recipe));
    }
    return 0;
}

int cmd_fit(const FitArgs& a) {
    const Penalty penalty = parse_penalty(a.penalty);
    Dataset data;
    data.x = io::read_matrix(a.design);
    data.y = io::read_vector(a.y);
    if (!a.beta0.empty()) data.beta0 = io::read_vector(a.beta0);
    data.check();
    FitConfig cfg;
    cfg.lambda = a.lambda;
    cfg.tol = a.tol;
    cfg.max_sweeps = a.max_sweeps;
    cfg.validate();
    const GramCache cache(data);
    const FitResult r = fit(cache, penalty, cfg);
    if (a.out.empty()) {
        std::cout << io::format_vector(r.beta_hat);
    } else {
        io::write_vector(a.out, r.beta_hat);
    }
    std::string metrics = "optimum=" + io::format_double(r.optimum) +
                          " kkt_residual=" + io::format_double(r.kkt_residual) +
                          " support_size=" + std::to_string(r.support_size) +
                          " iterations=" + std::to_string(r.iterations);
    if (data.beta0.size()) metrics += " estimation_risk=" + io::format_double(estimation_risk(r.beta_hat, data.beta0));
    (a.out.empty() ? std::cerr : std::cout) << metrics << '\n';
    return 0;
}

int cmd_state_evolution(const StateEvolutionArgs& a) {
    const Penalty penalty = parse_penalty(a.penalty);
    const auto spectrum = io::read_spectrum(a.spectrum);
    FixedPointOptions opts;
    opts.tol = a.tol;
    const auto fp = solve_fixed_point(spectrum, a.lambda, penalty, opts);
    const auto risk = predicted_risk(fp, spectrum, a.lambda);
    const std::string text = io::format_key_values({
        {"beta_star", io::format_double(fp.beta_star)},
        {"gamma_star", io::format_double(fp.gamma_star)},
        {"residual", io::format_double(fp.residual)},
        {"iterations", std::to_string(fp.iterations)},
        {"predicted_risk", io::format_double(risk.value)},
    });
    std::cout << text;
    if (!a.out.empty()) io::write_file(a.out, text);
    return 0;
}

int cmd_experiment(const ExperimentArgs& a) {
    auto config = parse_experiment_config(io::read_file(a.config), a.config);
    if (a.seed) config.design.seed = *a.seed;
    if (a.threads < 1) throw InvalidSpec("--threads must be at least 1");
    const auto summary = run_experiment(config, a.threads);
    if (a.out.empty()) {
        std::cout << format_summary(summary);
    } else {
        emit_summary(summary, a.out);
    }
    if (!a.spectrum_out.empty()) io::write_file(a.spectrum_out, io::format_spectrum(summary.spectrum));
    if (summary.failed_cells) {
        std::cerr << summary.failed_cells << " of " << summary.total_cells << " cells failed; first: "
                  << summary.failures.front() << '\n';
    }
    return 0;
}

/// A path to a vector file, or e<k> for the k-th unit vector (1-based).
VectorXd load_theta(const std::string& arg, Index p) {
    if (!std::filesystem::exists(arg) && arg.size() > 1 && arg[0] == 'e') {
        const auto k = io::parse_integer<Index>(std::string_view(arg).substr(1), "--theta");
        if (k < 1 || k > p) throw InvalidSpec("--theta: unit vector index out of range");
        VectorXd theta = VectorXd::Zero(p);
        theta[k - 1] = 1.0;
        return theta;
    }
    return io::read_vector(arg);
}

int cmd_diagnose(const DiagnoseArgs& a) {
    const auto recipe = parse_recipe(io::read_file(a.design_spec), a.design_spec);
    const auto spec = recipe.to_spec();
    const VectorXd theta = load_theta(a.theta, spec.dimension());
    detail::require_same_size(theta.size(), spec.dimension(), "--theta vs design dimension");
    const double ks =
        normality_diagnostic(isotropic_row_sampler(spec), theta, a.samples, StreamKey(a.seed).child(streams::kDiagnose));
    std::cout << io::format_double(ks) << '\n';
    return 0;
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        if (const auto* nc = dynamic_cast<const NonConvergence*>(&e)) {
            std::cerr << "last change: " << nc->last_change() << ", last iterate size " << nc->last_iterate().size()
                      << '\n';
        }
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Block-dependent designs, Lasso/ridge fits and state evolution"};
    app.require_subcommand(1);

    SampleArgs sample;
    auto* s = app.add_subcommand("sample", "Sample a design matrix as CSV");
    s->add_option("--family", sample.family, "gaussian | additive-trig | functional | gwas")->required();
    s->add_option("--p0", sample.p0, "Number of blocks")->required();
    s->add_option("--d", sample.d, "Block size")->required();
    s->add_option("--n", sample.n, "Number of rows")->required();
    s->add_option("--seed", sample.seed, "Master seed");
    s->add_option("--replicate", sample.replicate, "Replicate index (selects the row stream)");
    s->add_option("--lambda-mode", sample.lambda_mode, "identity | unif-sqrt");
    s->add_option("--sigma", sample.sigma, "Noise level recorded in the sidecar spec");
    s->add_option("--out", sample.out, "Output CSV (stdout if omitted); writes <out>.spec too");

    FitArgs fit_args;
    auto* f = app.add_subcommand("fit", "Fit a Lasso or ridge estimator");
    f->add_option("--penalty", fit_args.penalty, "lasso | ridge")->required();
    f->add_option("--lambda", fit_args.lambda, "Tuning parameter")->required();
    f->add_option("--design", fit_args.design, "Design CSV")->required();
    f->add_option("--y", fit_args.y, "Response vector file")->required();
    f->add_option("--beta0", fit_args.beta0, "True signal (enables estimation_risk)");
    f->add_option("--out", fit_args.out, "beta_hat output file");
    f->add_option("--tol", fit_args.tol, "Coordinate-descent tolerance");
    f->add_option("--max-sweeps", fit_args.max_sweeps, "Coordinate-descent sweep limit");
    f->add_option("--seed", fit_args.seed, "Accepted for uniformity; fits are deterministic");

    StateEvolutionArgs se;
    auto* e = app.add_subcommand("state-evolution", "Solve the fixed-point system and predict the risk");
    e->add_option("--penalty", se.penalty, "lasso | ridge")->required();
    e->add_option("--lambda", se.lambda, "Tuning parameter")->required();
    e->add_option("--spectrum", se.spectrum, "Spectrum file")->required();
    e->add_option("--tol", se.tol, "Fixed-point tolerance");
    e->add_option("--out", se.out, "Also write the results to this file");
    e->add_option("--seed", se.seed, "Accepted for uniformity; the solver is deterministic");

    ExperimentArgs ex;
    auto* x = app.add_subcommand("experiment", "Run a universality experiment");
    x->add_option("--config", ex.config, "Experiment config file")->required();
    x->add_option("--out", ex.out, "Summary CSV (stdout if omitted)");
    x->add_option("--threads", ex.threads, "Worker threads");
    x->add_option("--seed", ex.seed, "Override the config seed");
    x->add_option("--spectrum-out", ex.spectrum_out, "Write the experiment's spectrum file");

    DiagnoseArgs dg;
    auto* g = app.add_subcommand("diagnose", "KS distance of projected rows to N(0,1)");
    g->add_option("--design-spec", dg.design_spec, "Design spec (key=value)")->required();
    g->add_option("--theta", dg.theta, "Direction: vector file or e<k>")->required();
    g->add_option("--samples", dg.samples, "Number of rows");
    g->add_option("--seed", dg.seed, "Seed for the rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kExitUsage;
    }

    if (*s) return guarded([&] { return cmd_sample(sample); });
    if (*f) return guarded([&] { return cmd_fit(fit_args); });
    if (*e) return guarded([&] { return cmd_state_evolution(se); });
    if (*x) return guarded([&] { return cmd_experiment(ex); });
    if (*g) return guarded([&] { return cmd_diagnose(dg); });
    return kExitUsage;
}
