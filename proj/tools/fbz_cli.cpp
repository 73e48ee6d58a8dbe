// Command-line front end; talks to the solver library exclusively through
// the C API.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuzzybz.h"

namespace {

struct ConfigHandle {
    fbz_config* h = nullptr;
    ~ConfigHandle() { fbz_config_destroy(h); }
};

int fail(int status) {
    std::fprintf(stderr, "error (%d): %s\n", status, fbz_last_error());
    return status;
}

int load_config(const std::string& path, const std::vector<std::string>& overrides,
                const std::string& out_dir, int workers, long long seed, ConfigHandle& cfg) {
    int rc = path.empty() ? fbz_config_default(&cfg.h) : fbz_config_load(path.c_str(), &cfg.h);
    if (rc != FBZ_OK) return rc;
    for (const auto& kv : overrides) {
        rc = fbz_config_override_kv(cfg.h, kv.c_str());
        if (rc != FBZ_OK) return rc;
    }
    if (!out_dir.empty()) {
        rc = fbz_config_override(cfg.h, "output.dir", out_dir.c_str());
        if (rc != FBZ_OK) return rc;
    }
    if (workers > 0) {
        rc = fbz_config_override(cfg.h, "solver.workers", std::to_string(workers).c_str());
        if (rc != FBZ_OK) return rc;
    }
    if (seed >= 0) {
        rc = fbz_config_override(cfg.h, "scenario.seed", std::to_string(seed).c_str());
        if (rc != FBZ_OK) return rc;
    }
    return FBZ_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fuzzybz: structure-preserving kinetic solver and verification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    int workers = 0;
    long long seed = -1;
    app.add_option("--config", config_path, "configuration file");
    app.add_option("--override", overrides, "override section.key=value (repeatable)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "worker thread count");
    app.add_option("--seed", seed, "random seed for perturbation scenarios");

    auto* run = app.add_subcommand("run", "relaxation scenario with diagnostics");
    auto* audit = app.add_subcommand("audit", "variational audit of a solver trajectory");
    app.add_subcommand("structure-check", "operator structure checks");
    auto* plot = app.add_subcommand("plot-data", "convert a diagnostics stream to CSV tables");
    std::string diag_path;
    plot->add_option("diagnostics", diag_path, "diagnostics stream file")->required();
    auto* dvm = app.add_subcommand("dvm-table", "build and cache a DVM collision table");
    std::string table_out;
    dvm->add_option("path", table_out, "output table file")->required();

    CLI11_PARSE(app, argc, argv);

    if (plot->parsed()) {
        int rc = fbz_plot_data(diag_path.c_str(), out_dir.empty() ? "plot" : out_dir.c_str());
        return rc == FBZ_OK ? 0 : fail(rc);
    }

    ConfigHandle cfg;
    int rc = load_config(config_path, overrides, out_dir, workers, seed, cfg);
    if (rc != FBZ_OK) return fail(rc);

    if (dvm->parsed()) {
        rc = fbz_dvm_table_build(cfg.h, table_out.c_str());
        return rc == FBZ_OK ? 0 : fail(rc);
    }

    const char* name = run->parsed() ? "relax" : audit->parsed() ? "audit" : "structure-check";
    rc = fbz_config_override(cfg.h, "scenario.name", name);
    if (rc != FBZ_OK) return fail(rc);
    rc = fbz_scenario_run(cfg.h);
    if (rc != FBZ_OK) return fail(rc);
    std::printf("%s: ok\n", name);
    return 0;
}
