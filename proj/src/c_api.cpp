#include "fuzzybz.h"

#include <cstring>
#include <fstream>
#include <string>

#include "fbz/config.hpp"
#include "fbz/diagnostics.hpp"
#include "fbz/scenarios.hpp"

namespace {

thread_local std::string g_last_error;

int guard(int (*fn)(void*), void* arg) noexcept {
    try {
        return fn(arg);
    } catch (const fbz::ConfigError& e) {
        g_last_error = e.what();
        return FBZ_E_CONFIG;
    } catch (const fbz::IoError& e) {
        g_last_error = e.what();
        return FBZ_E_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FBZ_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return FBZ_E_INTERNAL;
    }
}

template <class F>
int guarded(F&& f) noexcept {
    struct Ctx {
        F* fn;
    } ctx{&f};
    return guard(
        [](void* p) -> int {
            auto* c = static_cast<Ctx*>(p);
            return (*c->fn)();
        },
        &ctx);
}

}  // namespace

struct fbz_config {
    fbz::RunConfig cfg;
};

extern "C" {

const char* fbz_version(void) { return "fuzzybz 1.0.0"; }

const char* fbz_last_error(void) { return g_last_error.c_str(); }

int fbz_config_default(fbz_config** out) {
    return guarded([&]() -> int {
        if (!out) throw fbz::ConfigError("fbz_config_default: null output pointer");
        *out = new fbz_config{fbz::RunConfig::defaults()};
        return FBZ_OK;
    });
}

int fbz_config_load(const char* path, fbz_config** out) {
    return guarded([&]() -> int {
        if (!path || !out) throw fbz::ConfigError("fbz_config_load: null argument");
        *out = new fbz_config{fbz::RunConfig::load(path)};
        return FBZ_OK;
    });
}

int fbz_config_override(fbz_config* cfg, const char* dotted_key, const char* value) {
    return guarded([&]() -> int {
        if (!cfg || !dotted_key || !value) throw fbz::ConfigError("fbz_config_override: null argument");
        cfg->cfg.override_kv(dotted_key, value);
        return FBZ_OK;
    });
}

int fbz_config_override_kv(fbz_config* cfg, const char* keyval) {
    return guarded([&]() -> int {
        if (!cfg || !keyval) throw fbz::ConfigError("fbz_config_override_kv: null argument");
        const char* eq = std::strchr(keyval, '=');
        if (!eq) throw fbz::ConfigError("override must look like section.key=value");
        cfg->cfg.override_kv(std::string(keyval, eq - keyval), std::string(eq + 1));
        return FBZ_OK;
    });
}

int fbz_config_dump(const fbz_config* cfg, const char* path) {
    return guarded([&]() -> int {
        if (!cfg || !path) throw fbz::ConfigError("fbz_config_dump: null argument");
        std::ofstream out(path);
        if (!out) throw fbz::IoError(std::string("cannot open ") + path);
        out << cfg->cfg.dump();
        if (!out) throw fbz::IoError(std::string("write failed for ") + path);
        return FBZ_OK;
    });
}

void fbz_config_destroy(fbz_config* cfg) { delete cfg; }

int fbz_scenario_run(const fbz_config* cfg) {
    return guarded([&]() -> int {
        if (!cfg) throw fbz::ConfigError("fbz_scenario_run: null configuration");
        int status = fbz::run_scenario(cfg->cfg);
        if (status != 0) g_last_error = "scenario assertion failed, status " + std::to_string(status);
        return status;
    });
}

int fbz_plot_data(const char* diagnostics_path, const char* out_dir) {
    return guarded([&]() -> int {
        if (!diagnostics_path || !out_dir) throw fbz::ConfigError("fbz_plot_data: null argument");
        fbz::emit_plot_data(diagnostics_path, out_dir);
        return FBZ_OK;
    });
}

int fbz_dvm_table_build(const fbz_config* cfg, const char* out_path) {
    return guarded([&]() -> int {
        if (!cfg || !out_path) throw fbz::ConfigError("fbz_dvm_table_build: null argument");
        fbz::DVMTable t = fbz::build_dvm_table(cfg->cfg.grid.lattice(),
                                               cfg->cfg.collision_kernel(),
                                               cfg->cfg.sphere_nodes);
        fbz::save_dvm_table(t, out_path);
        return FBZ_OK;
    });
}

}  // extern "C"
