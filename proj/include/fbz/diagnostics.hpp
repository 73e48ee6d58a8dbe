#ifndef FBZ_DIAGNOSTICS_HPP
#define FBZ_DIAGNOSTICS_HPP

#include <optional>
#include <string>
#include <vector>

namespace fbz {

// One self-describing key=value record per step, newline delimited.
// Missing quantities are written as "na" so the schema stays fixed.
struct DiagRecord {
    int step = 0;
    double t = 0.0;
    double mass = 0.0;
    double mom[3] = {0, 0, 0};
    double energy = 0.0;
    double H = 0.0;
    std::optional<double> D;
    std::optional<double> d_psi_star;
    std::optional<double> big_R;
    double e22 = 0.0;
    double e0q = 0.0;
    std::optional<double> norm_L_dS;
    std::optional<double> norm_M_dE;
    int d = 2;  // momentum component count
};

std::string format_record(const DiagRecord& r);

struct ParsedStream {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // NaN for "na"
};

// Parses a diagnostics stream; malformed lines raise IoError with the line
// number.
ParsedStream parse_diagnostics(const std::string& path);

// Writes one CSV table per column (time, value), skipping "na" entries.
void emit_plot_data(const std::string& diagnostics_path, const std::string& out_dir);

}  // namespace fbz

#endif
