#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nfsim/calibration.hpp"
#include "nfsim/error.hpp"
#include "nfsim/geometry.hpp"
#include "nfsim/metrics.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/parallel.hpp"
#include "nfsim/report_io.hpp"
#include "nfsim/scenario.hpp"
#include "nfsim/unfd.hpp"
#include "nfsim/version.hpp"
#include "validation.hpp"

namespace nfsim::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string scenario;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    int threads = -1;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (requested < 0) {
        if (const char* env = std::getenv("NEARFIELD_SIM_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end == env || *end != '\0' || v < 0) throw ConfigError("NEARFIELD_SIM_THREADS must be a non-negative integer");
            if (v > 0) return static_cast<int>(v);
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

SystemConfig load(const Common& c, bool allow_default) {
    SystemConfig config;
    if (c.scenario.empty()) {
        if (!allow_default) throw ConfigError("--scenario is required");
        config = default_config();
        if (!c.overrides.empty()) config = parse_scenario(scenario_to_json(config), c.overrides);
    } else {
        config = load_scenario(c.scenario, c.overrides);
    }
    if (c.seed_given) config.imperfections.rng_seed = c.seed;
    config.validate();
    set_default_threads(resolve_threads(c.threads));
    return config;
}

fs::path prepare_out(const Common& c) {
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + c.out_dir);
    return dir;
}

double focal_distance(const SystemConfig& config) {
    if (!config.sweep.focal_distance) throw ConfigError("sweep.focal_distance is required for this command");
    double r = *config.sweep.focal_distance;
    double R_ray = rayleigh_distance(config);
    if (!(r > 0) || r > R_ray)
        throw ConfigError("sweep.focal_distance = " + format_double(r) + " m lies outside (0, R_Ray = " +
                          format_double(R_ray) + " m]");
    return r;
}

struct Design {
    LayerStack stack;
    OptimizationTrace trace;
};

Design design(const SystemConfig& config, double r) {
    StackProblem pb = make_problem(config, r);
    OptimizationResult opt = optimize_phases(pb, config.optimizer, config.imperfections.rng_seed);
    return {inject_imperfections(opt.stack, config.imperfections), opt.trace};
}

std::string tag(int L) { return "L" + std::to_string(L); }

std::vector<double> parse_values(const std::string& key, const std::string& list) {
    std::vector<double> v;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        double x = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw ConfigError("--vary " + key + ": bad value '" + item + "'");
        v.push_back(x);
    }
    if (v.empty()) throw ConfigError("--vary " + key + " has no values");
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_run(const Common& c, bool export_stack, std::ostream& out) {
    SystemConfig config = load(c, false);
    double r = focal_distance(config);
    fs::path dir = prepare_out(c);
    Design d = design(config, r);
    ReferenceWidths ref;
    if (config.retention_baseline == RetentionBaseline::ideal_aperture) ref = ideal_reference(config, r);
    FocusReport rep = evaluate_stack(config, d.stack, r, ref);
    const std::string base = "run_" + tag(config.layer_count);
    write_text_file((dir / (base + ".csv")).string(), focus_reports_csv(config, {rep}));
    write_text_file((dir / (base + ".json")).string(), focus_report_json(rep));
    if (export_stack) {
        write_text_file((dir / ("stack_" + tag(config.layer_count) + ".json")).string(), stack_to_json(d.stack));
        write_text_file((dir / ("trace_" + tag(config.layer_count) + ".csv")).string(), trace_csv(config, d.trace));
    }
    out << "L=" << rep.layer_count << " r=" << format_double(rep.r) << " coherence=" << rep.coherence
        << " gain_loss_db=" << rep.gain_loss_db << " retention_lat=" << rep.retention_lat
        << " retention_ax=" << rep.retention_ax << "\n";
    return kOk;
}

int cmd_sweep(const Common& c, std::ostream& out) {
    SystemConfig config = load(c, false);
    fs::path dir = prepare_out(c);
    std::vector<int> layers = config.sweep.layer_counts;
    if (layers.empty()) layers = {config.layer_count};
    std::vector<UnfdReport> reports = unfd_for_layers(config, layers);
    for (const auto& u : reports)
        write_text_file((dir / ("unfd_" + tag(u.layer_count) + ".csv")).string(), focus_reports_csv(config, u.reports));
    write_text_file((dir / "unfd_summary.json").string(), summary_json(config, reports));

    out << std::left << std::setw(4) << "L" << std::setw(14) << "R_unfd[m]" << std::setw(14) << "R_gain[m]"
        << std::setw(14) << "R_res[m]" << std::setw(14) << "R_phi[m]" << "binding\n";
    for (const auto& u : reports) {
        out << std::setw(4) << u.layer_count << std::setw(14) << u.R_unfd << std::setw(14) << u.R_gain
            << std::setw(14) << u.R_res << std::setw(14) << u.R_phi << to_string(u.binding_criterion)
            << (u.below_range ? " (below range)" : "") << "\n";
    }
    out << "R_Ray = " << reports.front().R_ray << " m\n";
    return kOk;
}

int cmd_psf(const Common& c, std::ostream& out) {
    SystemConfig config = load(c, false);
    double r = focal_distance(config);
    fs::path dir = prepare_out(c);
    Design d = design(config, r);
    PsfCuts cuts = psf_cuts(d.stack, config, r);
    const std::string t = tag(config.layer_count);
    write_text_file((dir / ("psf_lateral_" + t + ".csv")).string(), psf_csv(config, cuts.lateral));
    write_text_file((dir / ("psf_axial_" + t + ".csv")).string(), psf_csv(config, cuts.axial));
    out << "wrote " << cuts.lateral.coordinates.size() << " lateral and " << cuts.axial.coordinates.size()
        << " axial samples\n";
    return kOk;
}

int cmd_calibrate(const Common& c, const std::string& fit_list, const std::vector<std::string>& vary,
                  const std::string& dataset_path, std::ostream& out) {
    SystemConfig config = load(c, false);
    fs::path dir = prepare_out(c);
    CalibrationDataset data;
    if (!dataset_path.empty()) {
        data = dataset_from_csv(read_text_file(dataset_path));
    } else {
        std::vector<CalibrationSetting> settings = {{config.imperfections.misalignment,
                                                     config.imperfections.transmission_efficiency,
                                                     config.imperfections.phase_bits,
                                                     config.imperfections.spacing_deviation}};
        for (const auto& v : vary) {
            auto eq = v.find('=');
            if (eq == std::string::npos) throw ConfigError("--vary expects KEY=v1,v2,...");
            std::string key = v.substr(0, eq);
            if (key.rfind("imperfections.", 0) == 0) key = key.substr(14);
            std::vector<double> values = parse_values(key, v.substr(eq + 1));
            std::vector<CalibrationSetting> next;
            for (const auto& s : settings)
                for (double x : values) {
                    CalibrationSetting t = s;
                    if (key == "misalignment") t.misalignment = x;
                    else if (key == "transmission_efficiency") t.transmission_efficiency = x;
                    else if (key == "phase_bits") t.phase_bits = static_cast<int>(x);
                    else if (key == "spacing_deviation") t.spacing_deviation = x;
                    else throw ConfigError("--vary: unknown imperfection key '" + key + "'");
                    next.push_back(t);
                }
            settings = std::move(next);
        }
        CalibrationGrid grid;
        grid.layer_counts = config.sweep.layer_counts.empty() ? std::vector<int>{config.layer_count}
                                                              : config.sweep.layer_counts;
        grid.distances = sweep_distances(config.sweep, rayleigh_distance(config));
        grid.settings = settings;
        data = generate_dataset(config, grid);
    }
    write_text_file((dir / "calibration_dataset.csv").string(), dataset_to_csv(data, csv_preamble(config)));

    CalibrationFit fit = fit_coefficients(data, split_list(fit_list), config.calibration);
    write_text_file((dir / "coefficients.json").string(), coefficients_to_json(fit.coefficients));
    std::ostringstream rep;
    rep << "{\n  \"rows_used\": " << fit.rows_used << ",\n  \"rms_lat\": " << format_double(fit.rms_lat)
        << ",\n  \"rms_ax\": " << format_double(fit.rms_ax) << ",\n  \"uncertainty\": {";
    bool first = true;
    for (const auto& [k, v] : fit.uncertainty) {
        rep << (first ? "\n" : ",\n") << "    \"" << k << "\": " << format_double(v);
        first = false;
    }
    rep << "\n  }\n}\n";
    write_text_file((dir / "calibration_fit.json").string(), rep.str());
    out << "fitted " << fit.uncertainty.size() << " coefficients on " << fit.rows_used
        << " measurements; rms_lat=" << fit.rms_lat << " rms_ax=" << fit.rms_ax << "\n";
    return kOk;
}

int cmd_validate(const Common& c, const ValidationOptions& opt, std::ostream& out) {
    SystemConfig config = load(c, true);
    if (!(opt.tolerance_scale >= 0)) throw ConfigError("--tolerance-scale must be >= 0");
    auto results = run_validation(config, opt);
    bool ok = true;
    for (const auto& r : results) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << " value=" << format_double(r.value)
            << " tol=" << format_double(r.tolerance);
        if (!r.note.empty()) out << " (" << r.note << ")";
        out << "\n";
        ok = ok && r.pass;
    }
    return ok ? kOk : kPropertyFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stacked-metasurface near-field focusing simulator", "nfsim"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", common.scenario, "Scenario JSON file");
        sub->add_option("--out", common.out_dir, "Output directory");
        sub->add_option("--override", common.overrides, "dotted.key=value applied to the scenario")->take_all();
        sub->add_option("--threads", common.threads, "Worker threads (0 = all cores; unset reads NEARFIELD_SIM_THREADS)");
        sub->add_option("--seed", common.seed, "Imperfection and initialization seed")
            ->each([&](const std::string&) { common.seed_given = true; });
    };

    bool export_stack = false;
    auto* run_cmd = app.add_subcommand("run", "Design and evaluate one (L, r) point");
    add_common(run_cmd);
    run_cmd->add_flag("--export-stack", export_stack, "Also write the designed stack and optimizer trace");

    auto* sweep_cmd = app.add_subcommand("sweep-unfd", "Distance sweep and UNFD per layer count");
    add_common(sweep_cmd);

    auto* psf_cmd = app.add_subcommand("psf", "Lateral and axial PSF cuts at the focal distance");
    add_common(psf_cmd);

    std::string fit_list = "xi_lat,beta";
    std::vector<std::string> vary;
    std::string dataset_path;
    auto* cal_cmd = app.add_subcommand("calibrate", "Generate a dataset and fit correction coefficients");
    add_common(cal_cmd);
    cal_cmd->add_option("--fit", fit_list, "Comma-separated coefficients to fit");
    cal_cmd->add_option("--vary", vary, "KEY=v1,v2 imperfection values to sweep")->take_all();
    cal_cmd->add_option("--dataset", dataset_path, "Fit an existing dataset CSV instead of simulating");

    ValidationOptions vopt;
    std::string check_dump, write_dump;
    auto* val_cmd = app.add_subcommand("validate", "Run the built-in property checks");
    add_common(val_cmd);
    val_cmd->add_option("--tolerance-scale", vopt.tolerance_scale, "Multiply every tolerance");
    val_cmd->add_option("--check-dump", check_dump, "Compare an operator dump with the scenario operator");
    val_cmd->add_option("--write-dump", write_dump, "Write the scenario reference operator dump");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion& e) {
        out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        if (*run_cmd) return cmd_run(common, export_stack, out);
        if (*sweep_cmd) return cmd_sweep(common, out);
        if (*psf_cmd) return cmd_psf(common, out);
        if (*cal_cmd) return cmd_calibrate(common, fit_list, vary, dataset_path, out);
        if (*val_cmd) {
            if (!check_dump.empty()) vopt.check_dump = check_dump;
            if (!write_dump.empty()) vopt.write_dump = write_dump;
            return cmd_validate(common, vopt, out);
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const GridMismatchError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const IdentifiabilityError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUnexpected;
    }
    return kUnexpected;
}

}  // namespace nfsim::cli
