// hamflow CLI: batch experiment runner and acceptance-suite driver.
//
//   hamflow run --config cfg.json [--out DIR] [--threads N]
//   hamflow acceptance [--filter NAME] [--tolerance-scale F]
//
// Exit codes: 0 pass, 1 criterion failure, 2 configuration error. Invalid
// configurations emit machine-readable JSON on stderr.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <thread>

#include "hamflow/experiments.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& outdir, int threads) {
    nlohmann::json cfg;
    try {
        std::ifstream in(config_path);
        if (!in) throw hamflow::ConfigError("cannot open config " + config_path);
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        nlohmann::json err{{"error", std::string("config is not valid JSON: ") + e.what()}};
        std::cerr << err.dump() << '\n';
        return 2;
    } catch (const hamflow::ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
        return 2;
    }

    std::vector<nlohmann::json> jobs;
    if (cfg.contains("experiments"))
        for (const auto& j : cfg.at("experiments")) jobs.push_back(j);
    else
        jobs.push_back(cfg);

    // validate everything up front so a batch fails fast as a config error
    try {
        for (const auto& j : jobs) hamflow::validate_config(j);
    } catch (const hamflow::ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
        return 2;
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex io;
    auto worker = [&]() {
        for (;;) {
            const size_t k = next.fetch_add(1);
            if (k >= jobs.size() || failed.load()) return;
            try {
                std::vector<std::string> files = hamflow::run_experiment(jobs[k], outdir);
                std::lock_guard<std::mutex> lock(io);
                for (const auto& f : files)
                    std::printf("%s: %s\n", jobs[k].at("experiment").get<std::string>().c_str(), f.c_str());
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io);
                std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return failed.load() ? 2 : 0;
}

int acceptance_command(const std::string& filter, double tol_scale) {
    int failures = 0;
    try {
        for (const auto& r : hamflow::run_acceptance(filter, tol_scale)) {
            std::puts(hamflow::format_criterion_line(r).c_str());
            if (!r.pass) {
                ++failures;
                for (const auto& c : r.checks)
                    if (!c.pass)
                        std::printf("      failed: %s, measured %.6e vs threshold %.6e\n", c.name.c_str(),
                                    c.value, c.threshold);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
        return 2;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char* argv[]) {
    CLI::App app{"hamflow: a numerical laboratory for curvature, Laplacians and flows of convex Hamiltonians"};
    app.require_subcommand(1);

    const char* env_out = std::getenv("HAMFLOW_OUT");
    std::string outdir = env_out ? env_out : ".";
    std::string config_path, filter;
    int threads = 1;
    double tol_scale = 1.0;

    CLI::App* run = app.add_subcommand("run", "run experiments from a JSON config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", outdir, "output directory (default $HAMFLOW_OUT or .)");
    run->add_option("--threads", threads, "parallel experiments in a batch");

    CLI::App* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
    acc->add_option("--filter", filter, "run only criteria whose name contains this");
    acc->add_option("--tolerance-scale", tol_scale, "multiply all thresholds");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return run_command(config_path, outdir, threads);
    return acceptance_command(filter, tol_scale);
}
