#include "nfsim/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "nfsim/error.hpp"
#include "nfsim/scenario.hpp"
#include "nfsim/version.hpp"

namespace nfsim {

using nlohmann::json;

namespace {

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string csv_preamble(const SystemConfig& config) {
    return std::string("# nfsim ") + kVersion + " scenario=" + scenario_hash_hex(config) + "\n";
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string focus_reports_csv(const SystemConfig& config, const std::vector<FocusReport>& reports) {
    std::ostringstream os;
    os << csv_preamble(config);
    os << "r,coherence,gain_loss_db,fwhm_lat,fwhm_ax,dl_lat,dl_ax,retention_lat,retention_ax,wrms,"
          "delta_C,delta_a4,max_residual_phase,mode_density,model_lat_corr,model_ax_corr\n";
    for (const auto& f : reports) {
        const double cols[] = {f.r,           f.coherence,     f.gain_loss_db,  f.fwhm_lat,
                               f.fwhm_ax,     f.dl_lat,        f.dl_ax,         f.retention_lat,
                               f.retention_ax, f.wrms,         f.delta_C,       f.delta_a4,
                               f.max_residual_phase, f.mode_density, f.model_lat_corr, f.model_ax_corr};
        for (std::size_t i = 0; i < std::size(cols); ++i) os << (i ? "," : "") << format_double(cols[i]);
        os << '\n';
    }
    return os.str();
}

std::string psf_csv(const SystemConfig& config, const PsfCut& cut) {
    std::ostringstream os;
    os << csv_preamble(config);
    os << "coordinate,intensity\n";
    for (std::size_t i = 0; i < cut.coordinates.size(); ++i)
        os << format_double(cut.coordinates[i]) << ',' << format_double(cut.intensity[i]) << '\n';
    return os.str();
}

std::string trace_csv(const SystemConfig& config, const OptimizationTrace& trace) {
    std::ostringstream os;
    os << csv_preamble(config);
    os << "iteration,stage,coherence,gain_loss_db,wall_time\n";
    for (std::size_t i = 0; i < trace.coherence.size(); ++i)
        os << i << ',' << trace.stage[i] << ',' << format_double(trace.coherence[i]) << ','
           << format_double(trace.gain_loss_db[i]) << ',' << format_double(trace.wall_time[i]) << '\n';
    return os.str();
}

std::string summary_json(const SystemConfig& config, const std::vector<UnfdReport>& reports) {
    json doc;
    doc["version"] = kVersion;
    doc["scenario"] = scenario_hash_hex(config);
    json rows = json::array();
    for (const auto& u : reports) {
        rows.push_back({{"L", u.layer_count},
                        {"R_gain", number(u.R_gain)},
                        {"R_res", number(u.R_res)},
                        {"R_phi", number(u.R_phi)},
                        {"R_unfd", number(u.R_unfd)},
                        {"binding_criterion", to_string(u.binding_criterion)},
                        {"below_range", u.below_range},
                        {"R_ray", number(u.R_ray)}});
    }
    doc["layers"] = rows;
    return doc.dump(2) + "\n";
}

std::string focus_report_json(const FocusReport& f) {
    json doc = {{"L", f.layer_count},
                {"r", number(f.r)},
                {"coherence", number(f.coherence)},
                {"gain_loss_db", number(f.gain_loss_db)},
                {"fwhm_lat", number(f.fwhm_lat)},
                {"fwhm_ax", number(f.fwhm_ax)},
                {"dl_lat", number(f.dl_lat)},
                {"dl_ax", number(f.dl_ax)},
                {"retention_lat", number(f.retention_lat)},
                {"retention_ax", number(f.retention_ax)},
                {"wrms", number(f.wrms)},
                {"delta_C", number(f.delta_C)},
                {"delta_a4", number(f.delta_a4)},
                {"max_residual_phase", number(f.max_residual_phase)},
                {"mode_density", number(f.mode_density)},
                {"model_lat_corr", number(f.model_lat_corr)},
                {"model_ax_corr", number(f.model_ax_corr)},
                {"R_eq", number(f.R_eq)},
                {"ref_fwhm_lat", number(f.ref_fwhm_lat)},
                {"ref_fwhm_ax", number(f.ref_fwhm_ax)}};
    return doc.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw ConfigError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace nfsim
