#include "fbz/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbz/core.hpp"

namespace fbz {

namespace {
void put(std::string& out, const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %s=%.17g", key, v);
    out += buf;
}
void put_opt(std::string& out, const char* key, const std::optional<double>& v) {
    if (v) {
        put(out, key, *v);
    } else {
        out += " ";
        out += key;
        out += "=na";
    }
}
}  // namespace

std::string format_record(const DiagRecord& r) {
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "step=%d", r.step);
    out += buf;
    put(out, "t", r.t);
    put(out, "mass", r.mass);
    put(out, "mom_x", r.mom[0]);
    put(out, "mom_y", r.mom[1]);
    if (r.d > 2) put(out, "mom_z", r.mom[2]);
    put(out, "energy", r.energy);
    put(out, "H", r.H);
    put_opt(out, "D", r.D);
    put_opt(out, "Dpsi", r.d_psi_star);
    put_opt(out, "R", r.big_R);
    put(out, "E22", r.e22);
    put(out, "E0q", r.e0q);
    put_opt(out, "L_dS", r.norm_L_dS);
    put_opt(out, "M_dE", r.norm_M_dE);
    out += "\n";
    return out;
}

ParsedStream parse_diagnostics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("diagnostics: cannot open " + path);
    ParsedStream out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        std::vector<double> vals;
        while (ss >> tok) {
            std::size_t eq = tok.find('=');
            if (eq == std::string::npos)
                throw IoError(path + ":" + std::to_string(lineno) + ": malformed record token '" +
                              tok + "'");
            cols.push_back(tok.substr(0, eq));
            std::string v = tok.substr(eq + 1);
            if (v == "na") {
                vals.push_back(std::nan(""));
            } else {
                try {
                    std::size_t pos = 0;
                    vals.push_back(std::stod(v, &pos));
                    if (pos != v.size()) throw std::invalid_argument(v);
                } catch (...) {
                    throw IoError(path + ":" + std::to_string(lineno) + ": bad value '" + v + "'");
                }
            }
        }
        if (out.columns.empty()) {
            out.columns = cols;
        } else if (cols != out.columns) {
            throw IoError(path + ":" + std::to_string(lineno) + ": record schema changed");
        }
        out.rows.push_back(std::move(vals));
    }
    return out;
}

void emit_plot_data(const std::string& diagnostics_path, const std::string& out_dir) {
    ParsedStream s = parse_diagnostics(diagnostics_path);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    int tcol = -1;
    for (std::size_t c = 0; c < s.columns.size(); ++c)
        if (s.columns[c] == "t") tcol = int(c);
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        if (int(c) == tcol) continue;
        std::ofstream out(out_dir + "/" + s.columns[c] + ".csv");
        if (!out) throw IoError("emit_plot_data: cannot write in " + out_dir);
        out << "t," << s.columns[c] << "\n";
        char buf[80];
        for (const auto& row : s.rows) {
            if (std::isnan(row[c])) continue;
            double t = tcol >= 0 ? row[tcol] : 0.0;
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, row[c]);
            out << buf;
        }
    }
}

}  // namespace fbz
