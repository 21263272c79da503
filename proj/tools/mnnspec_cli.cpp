// mnnspec: simulate signals, estimate line spectra, run the Monte Carlo
// experiments and check gradients from the command line.
//
// Exit codes: 0 ok, 1 other failure, 2 bad input (flags, files, unknown
// experiment), 3 training diverged (a partial report is still written).

#include "mnnspec/io.hpp"
#include "mnnspec/mnnspec.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace mnnspec;

namespace {

constexpr int kBadInput = 2;
constexpr int kDiverged = 3;

struct SimulateArgs {
    long n = 32;
    std::string components;
    double snr_db = 10.0;
    std::uint64_t seed = 1;
    std::string out;
};

struct EstimateArgs {
    std::string in;
    std::string report;
    std::string config;
    int l_factor = 4;
    double eps = 1e-5;
    double epsf = 1e-6;
    double epsa = 1e-6;
    double gamma_alpha = 0.0;
    double gamma_omega = 0.0;
    double lambda = 0.9;
    int max_iter = 20000;
};

struct ExperimentArgs {
    std::string name;
    int trials = 0; // 0: the experiment's own default
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::string config;
};

struct GradArgs {
    long n = 16;
    long m = 4;
    int trials = 100;
    std::uint64_t seed = 1;
    bool self_test = false;
};

// Sidecar written next to every simulated CSV: how to make it again.
std::string sidecar(const std::string& csv) { return csv + ".json"; }

int run_simulate(const SimulateArgs& a) {
    if (a.n < 2) throw Error(ErrorKind::Parse, "--n must be >= 2");
    const SinusoidSet comps = io::components_from_json(io::parse_json(io::read_text(a.components), a.components));
    if (comps.empty()) throw Error(ErrorKind::Parse, "component file is empty");
    const double sigma2 = noise_var_for_snr(clean_signal(comps, a.n), a.snr_db);
    const Signal y = synthesize(comps, a.n, {sigma2, a.seed});
    io::write_text(a.out, io::signal_to_csv(y));
    const io::json meta = {{"n", a.n}, {"snr_db", a.snr_db}, {"seed", a.seed}, {"sigma2", sigma2}, {"components", io::components_to_json(comps)}};
    io::write_text(sidecar(a.out), meta.dump(2) + "\n");
    std::cout << "sigma2 " << io::format_double(sigma2) << "\n";
    return 0;
}

int run_estimate(const EstimateArgs& a, const CLI::App& sub) {
    EstimatorConfig cfg;
    if (!a.config.empty()) cfg = io::config_from_json(io::parse_json(io::read_text(a.config), a.config));
    // explicit flags win over the config file
    if (sub.count("--l-factor")) cfg.init.l_factor = a.l_factor;
    if (sub.count("--eps")) cfg.train.eps_tol = a.eps;
    if (sub.count("--epsf")) cfg.order.epsilon_f = a.epsf;
    if (sub.count("--epsa")) cfg.order.epsilon_a = a.epsa;
    if (sub.count("--gamma-alpha")) cfg.train.gamma_alpha = a.gamma_alpha;
    if (sub.count("--gamma-omega")) cfg.train.gamma_omega = a.gamma_omega;
    if (sub.count("--lambda")) cfg.train.lambda = a.lambda;
    if (sub.count("--max-iter")) cfg.train.max_iter = a.max_iter;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Parse, e.what());
    }

    const Signal y = io::signal_from_csv(io::read_text(a.in));
    std::optional<std::uint64_t> seed;
    if (fs::exists(sidecar(a.in))) {
        const auto meta = io::parse_json(io::read_text(sidecar(a.in)), sidecar(a.in));
        if (meta.contains("seed")) seed = meta.at("seed").get<std::uint64_t>();
    }
    try {
        const RunReport r = estimate_spectrum(y, cfg);
        io::write_text(a.report, io::report_to_json(io::make_report(r, cfg, seed)).dump(2) + "\n");
        std::cout << "k_hat " << r.k_hat() << "\n";
        return 0;
    } catch (const EstimationDiverged& e) {
        io::write_text(a.report, io::report_to_json(io::make_report(e.partial(), cfg, seed)).dump(2) + "\n");
        std::cerr << "error: " << e.what() << " (partial report written)\n";
        return kDiverged;
    }
}

void emit(const SweepResult& r, const fs::path& dir, const std::string& stem) {
    io::write_text((dir / (stem + ".json")).string(), io::sweep_to_json(r).dump(2) + "\n");
    io::write_text((dir / (stem + ".csv")).string(), io::sweep_to_csv(r));
    std::cout << "wrote " << (dir / stem).string() << ".{json,csv}\n";
}

std::string snr_tag(double snr) { return "snr" + std::to_string(static_cast<int>(snr)); }

int run_experiment(const ExperimentArgs& a) {
    static const std::vector<std::string> known = {"mse", "roc-merge", "roc-prune", "order", "converge", "cluster"};
    if (std::find(known.begin(), known.end(), a.name) == known.end()) {
        std::cerr << "error: unknown experiment '" << a.name << "' (mse, roc-merge, roc-prune, order, converge, cluster)\n";
        return kBadInput;
    }
    EstimatorConfig cfg;
    if (!a.config.empty()) cfg = io::config_from_json(io::parse_json(io::read_text(a.config), a.config));
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);

    TrialSpec spec;
    spec.base_seed = a.seed;
    spec.estimator = cfg;
    auto trials = [&](int fallback) { return a.trials > 0 ? a.trials : fallback; };

    if (a.name == "mse") {
        spec.trials = trials(200);
        for (double f : {0.1, 0.22, 0.37}) spec.truth.push_back({cplx(1.0, 0.0), kTwoPi * f});
        emit(mc_mse(spec, {0.0, 10.0, 20.0, 30.0}), dir, "mse");
    } else if (a.name == "roc-merge") {
        spec.trials = trials(200);
        for (double snr : {5.0, 20.0}) {
            spec.snr_db = snr;
            emit(mc_roc_merge(spec, {1e-12, 1e-9, 1e-6, 1e-3, 0.05, 0.3, 0.7, 0.999}), dir, "roc-merge-" + snr_tag(snr));
        }
    } else if (a.name == "roc-prune") {
        spec.trials = trials(2000);
        const std::vector<double> grid = {1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 0.5, 0.9};
        for (double snr : {0.0, 10.0}) {
            spec.snr_db = snr;
            emit(mc_roc_prune(spec, grid, PruneScenario::OneNode), dir, "roc-prune-one-node-" + snr_tag(snr));
            emit(mc_roc_prune(spec, grid, PruneScenario::TwoNodeWeak), dir, "roc-prune-two-node-" + snr_tag(snr));
        }
    } else if (a.name == "order") {
        spec.trials = trials(200);
        emit(mc_order(spec), dir, "order");
    } else if (a.name == "converge") {
        spec.trials = trials(20);
        for (double f : {0.1, 0.22, 0.37}) spec.truth.push_back({cplx(1.0, 0.0), kTwoPi * f});
        const auto runs = convergence_trace(spec, {0.25, 0.5, 1.0}, {0.0, 0.5, 0.9});
        emit(summarize_convergence(spec, runs), dir, "converge");
        io::json traces = io::json::array();
        for (const auto& r : runs)
            traces.push_back({{"gamma_scale", r.gamma_scale}, {"lambda", r.lambda}, {"seed", r.seed}, {"converged", r.trace.converged},
                              {"iterations", r.trace.iterations_run}, {"safeguard_trips", r.trace.safeguard_trips},
                              {"mean_cost", r.trace.mean_cost}});
        io::write_text((dir / "converge-traces.json").string(), traces.dump() + "\n");
    } else {
        const EstimatorConfig cc = a.config.empty() ? cluster_config() : cfg;
        emit(cluster_sweep(trials(20), a.seed, cc), dir, "cluster");
        const ClusterOutcome o = cluster_case(a.seed, cc);
        io::json rep = io::report_to_json(io::make_report(o.report, cc, a.seed));
        rep["truth"] = io::components_to_json(o.truth);
        io::write_text((dir / "cluster-report.json").string(), rep.dump(2) + "\n");
    }
    return 0;
}

int run_gradcheck(const GradArgs& a) {
    if (a.n < 2 || a.m < 1 || a.trials < 1) throw Error(ErrorKind::Parse, "gradcheck needs --n >= 2, --m >= 1, --trials >= 1");
    const double perturb = a.self_test ? 1e-3 : 0.0;
    const auto r = gradient_check(a.n, a.m, a.trials, a.seed, perturb);
    const bool ok = r.max_rel_error < 1e-6;
    std::cout << "max relative error " << r.max_rel_error << " over " << r.instances << " instances"
              << (a.self_test ? " (gradients perturbed by 1e-3)" : "") << ": " << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Line spectral estimation with a sinusoid network"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "write a noisy multi-tone signal as CSV");
    s->add_option("--n", sim.n, "number of samples")->capture_default_str();
    s->add_option("--components", sim.components, "JSON array of {re, im, normalized_freq}")->required();
    s->add_option("--snr-db", sim.snr_db, "SNR relative to the clean signal's mean power")->capture_default_str();
    s->add_option("--seed", sim.seed, "noise seed")->capture_default_str();
    s->add_option("--out", sim.out, "output CSV")->required();

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "estimate the line spectrum of a CSV signal");
    e->add_option("--in", est.in, "input CSV (index,re,im)")->required();
    e->add_option("--report", est.report, "output JSON report")->required();
    e->add_option("--config", est.config, "estimator config JSON (flags override it)");
    e->add_option("--l-factor", est.l_factor, "zero-padding factor L/N")->capture_default_str();
    e->add_option("--eps", est.eps, "inner convergence tolerance")->capture_default_str();
    e->add_option("--epsf", est.epsf, "merge significance")->capture_default_str();
    e->add_option("--epsa", est.epsa, "prune false-alarm rate")->capture_default_str();
    e->add_option("--gamma-alpha", est.gamma_alpha, "amplitude learning rate (default 0.5/N)");
    e->add_option("--gamma-omega", est.gamma_omega, "frequency learning rate (default 0.5/sum n^2)");
    e->add_option("--lambda", est.lambda, "momentum factor")->capture_default_str();
    e->add_option("--max-iter", est.max_iter, "inner iteration cap")->capture_default_str();

    ExperimentArgs exa;
    auto* x = app.add_subcommand("experiment", "run a Monte Carlo experiment");
    x->add_option("name", exa.name, "mse | roc-merge | roc-prune | order | converge | cluster")->required();
    x->add_option("--trials", exa.trials, "trials per condition (default depends on the experiment)");
    x->add_option("--seed", exa.seed, "base seed")->capture_default_str();
    x->add_option("--out-dir", exa.out_dir, "output directory")->capture_default_str();
    x->add_option("--config", exa.config, "estimator config JSON");

    GradArgs ga;
    auto* g = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
    g->add_option("--n", ga.n)->capture_default_str();
    g->add_option("--m", ga.m)->capture_default_str();
    g->add_option("--trials", ga.trials)->capture_default_str();
    g->add_option("--seed", ga.seed)->capture_default_str();
    g->add_flag("--self-test", ga.self_test, "perturb the analytic gradients; must FAIL");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : kBadInput;
    }

    try {
        if (*s) return run_simulate(sim);
        if (*e) return run_estimate(est, *e);
        if (*x) return run_experiment(exa);
        return run_gradcheck(ga);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return err.kind() == ErrorKind::Parse || err.kind() == ErrorKind::DomainError ? kBadInput : 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
