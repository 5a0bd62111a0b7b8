// Command-line front end: parameter sweeps, reference cache, invariant checks.

#include "prc/checks.hpp"
#include "prc/experiment.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Options {
    std::string config;
    std::string out;
    std::string cache;
    int threads = 0;
};

prc::RunConfig load_config(const Options& o)
{
    prc::RunConfig cfg;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw prc::ConfigError("cannot read config file " + o.config);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = prc::parse_config(ss.str());
    }
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.cache.empty()) cfg.cache_dir = o.cache;
    prc::validate(cfg);
    return cfg;
}

void log_line(const std::string& m) { std::cerr << "[prc] " << m << std::endl; }

int cmd_run(const Options& o)
{
    const prc::RunConfig cfg = load_config(o);
    const auto rows = prc::run_example(cfg, prc::Exec::Parallel, log_line);
    std::cout << "wrote " << rows.size() << " rows to " << cfg.output_dir << "/results.csv and summary.md\n";
    return 0;
}

int cmd_reference(const Options& o)
{
    const prc::RunConfig cfg = load_config(o);
    const prc::ReferenceCache cache(cfg.cache_dir);
    const auto keys = prc::required_references(cfg);
    for (const auto& key : keys) {
        if (cache.contains(key)) {
            log_line("cached " + cache.file_for(key).string());
            continue;
        }
        log_line("computing " + key.name());
        prc::obtain_reference(cache, key, true, cfg.reference_tolerance);
    }
    std::cout << keys.size() << " reference(s) in " << cfg.cache_dir << '\n';
    return 0;
}

int cmd_check(const Options& o)
{
    const prc::RunConfig cfg = load_config(o);
    const std::vector<int> levels{10, 20, 40};
    std::vector<prc::CheckResult> results;
    auto run = [&](prc::CheckResult r) {
        std::cout << prc::format_result(r) << std::endl;
        results.push_back(std::move(r));
    };
    run(prc::check_gradient_force(levels));
    run(prc::check_forward_exact(levels));
    run(prc::check_eps_invariance(20, 1e-3, 1e-3));
    run(prc::check_eps_linearity(10, cfg.nu, cfg.alpha));
    run(prc::check_scheme_equivalence(10, 1e-3, 1e-3));
    run(prc::check_projector_suite(levels));
    run(prc::check_dual_norm(levels));
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pressure-robust Stokes optimal control: sweeps, references and checks"};
    app.footer("Exit codes: 0 success, 1 failed checks, 2 configuration or input error, 3 solver failure.\n\n" +
               prc::config_help());
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "config file (key = value lines)");
        sub->add_option("--out", o.out, "output directory (overrides output_dir)");
        sub->add_option("--cache", o.cache, "reference cache directory (overrides cache_dir)");
        sub->add_option("--threads", o.threads, "OpenMP threads (default: runtime default)")->check(CLI::NonNegativeNumber);
    };
    CLI::App* run = app.add_subcommand("run", "run the parameter sweep and write results.csv and summary.md");
    CLI::App* ref = app.add_subcommand("reference", "compute missing Example 1 references into the cache");
    CLI::App* check = app.add_subcommand("check", "run the invariant suite");
    for (CLI::App* sub : {run, ref, check}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (o.threads > 0) omp_set_num_threads(o.threads);

    try {
        if (*run) return cmd_run(o);
        if (*ref) return cmd_reference(o);
        return cmd_check(o);
    } catch (const prc::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const prc::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const prc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}
