#include "nfsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "nfsim/error.hpp"
#include "nfsim/metrics.hpp"
#include "nfsim/parallel.hpp"
#include "nfsim/unfd.hpp"

namespace nfsim {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double* field(CalibrationCoefficients& k, const std::string& name) {
    if (name == "xi_lat") return &k.xi_lat;
    if (name == "xi_ax") return &k.xi_ax;
    if (name == "chi_lat") return &k.chi_lat;
    if (name == "mu") return &k.mu;
    if (name == "nu") return &k.nu;
    if (name == "gamma_loss") return &k.gamma_loss;
    if (name == "gamma_quant") return &k.gamma_quant;
    if (name == "gamma_gap") return &k.gamma_gap;
    if (name == "beta") return &k.beta;
    if (name == "xi_ax2") return &k.xi_ax2;
    if (name == "xi_ax4") return &k.xi_ax4;
    if (name == "xi_ali_ax") return &k.xi_ali_ax;
    throw ConfigError("unknown calibration coefficient '" + name + "'");
}

bool is_exponent(const std::string& name) { return name == "mu" || name == "nu"; }

ImperfectionParams row_params(const CalibrationRow& row) {
    ImperfectionParams p;
    p.misalignment = row.misalignment;
    p.transmission_efficiency = row.transmission_efficiency;
    p.phase_bits = row.phase_bits;
    p.spacing_deviation = row.spacing_deviation;
    return p;
}

bool usable_lat(const CalibrationRow& r) {
    return std::isfinite(r.fwhm_lat) && r.fwhm_lat > 0 && r.weight_lat > 0 && std::isfinite(r.wrms);
}

bool usable_ax(const CalibrationRow& r) {
    return std::isfinite(r.fwhm_ax) && r.fwhm_ax > 0 && r.weight_ax > 0 && std::isfinite(r.wrms) &&
           std::isfinite(r.delta_C) && std::isfinite(r.delta_a4);
}

struct Problem {
    const std::vector<CalibrationRow>* rows;
    std::vector<std::size_t> lat;  // usable row indices
    std::vector<std::size_t> ax;

    std::size_t size() const { return lat.size() + ax.size(); }

    // Weighted residuals; non-finite predictions become +inf entries.
    Eigen::VectorXd residuals(const CalibrationCoefficients& k) const {
        Eigen::VectorXd res(static_cast<Eigen::Index>(size()));
        Eigen::Index i = 0;
        for (std::size_t n : lat) {
            const auto& row = (*rows)[n];
            res[i++] = (row.fwhm_lat - predict_lateral(row, k)) * row.weight_lat;
        }
        for (std::size_t n : ax) {
            const auto& row = (*rows)[n];
            res[i++] = (row.fwhm_ax - predict_axial(row, k)) * row.weight_ax;
        }
        for (Eigen::Index j = 0; j < res.size(); ++j)
            if (!std::isfinite(res[j])) res[j] = kInf;
        return res;
    }

    double loss(const CalibrationCoefficients& k) const { return residuals(k).squaredNorm(); }
};

Eigen::MatrixXd jacobian(const Problem& pb, const CalibrationCoefficients& k, const std::vector<std::string>& names) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(pb.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        CalibrationCoefficients kp = k, km = k;
        double& vp = *field(kp, names[j]);
        double& vm = *field(km, names[j]);
        const double h = 1e-6 * std::max(1.0, std::abs(vp));
        vp += h;
        vm -= h;
        J.col(static_cast<Eigen::Index>(j)) = (pb.residuals(kp) - pb.residuals(km)) / (2.0 * h);
    }
    return J;
}

struct InnerResult {
    CalibrationCoefficients k;
    double loss = kInf;
    int iterations = 0;
};

// Projected Gauss-Newton over the non-exponent coefficients.
InnerResult gauss_newton(const Problem& pb, CalibrationCoefficients k, const std::vector<std::string>& names) {
    InnerResult out;
    double loss = pb.loss(k);
    if (names.empty()) {
        out.k = k;
        out.loss = loss;
        return out;
    }
    const auto n = static_cast<Eigen::Index>(names.size());
    int it = 0;
    for (; it < 100; ++it) {
        Eigen::VectorXd res = pb.residuals(k);
        Eigen::MatrixXd J = jacobian(pb, k, names);
        Eigen::VectorXd step = J.colPivHouseholderQr().solve(-res);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool accepted = false;
        CalibrationCoefficients trial = k;
        double trial_loss = loss;
        for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
            trial = k;
            for (Eigen::Index j = 0; j < n; ++j) {
                double& v = *field(trial, names[static_cast<std::size_t>(j)]);
                v = std::max(0.0, v + t * step[j]);
            }
            trial_loss = pb.loss(trial);
            if (trial_loss < loss) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        double change = loss - trial_loss;
        k = trial;
        loss = trial_loss;
        if (loss < 1e-30 || change <= 1e-15 * loss) {
            ++it;
            break;
        }
    }
    out.k = k;
    out.loss = loss;
    out.iterations = it;
    return out;
}

InnerResult golden_section(const std::function<InnerResult(double)>& eval, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    InnerResult fc = eval(c), fd = eval(d);
    int total = fc.iterations + fd.iterations;
    while (b - a > 1e-7) {
        if (fc.loss <= fd.loss) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
            total += fc.iterations;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
            total += fd.iterations;
        }
    }
    InnerResult best = fc.loss <= fd.loss ? fc : fd;
    for (double edge : {lo, hi}) {
        InnerResult e = eval(edge);
        total += e.iterations;
        if (e.loss < best.loss) best = e;
    }
    best.iterations = total;
    return best;
}

void check_identifiable(const Problem& pb, const CalibrationCoefficients& start,
                        const std::vector<std::string>& which) {
    // Probe away from zero so multiplicative couplings do not hide a column.
    CalibrationCoefficients probe = start;
    for (const auto& name : which)
        if (!is_exponent(name)) *field(probe, name) = std::max(*field(probe, name), 0.1);
    bool has_mu = std::count(which.begin(), which.end(), "mu") != 0;
    bool has_nu = std::count(which.begin(), which.end(), "nu") != 0;
    if (has_mu && probe.chi_lat <= 0) probe.chi_lat = 0.1;
    if (has_nu && probe.xi_ali_ax <= 0) probe.xi_ali_ax = 0.1;

    Eigen::MatrixXd J = jacobian(pb, probe, which);
    if (!J.allFinite()) throw NumericalError("calibration Jacobian is not finite at the probe point");
    const double scale = std::sqrt(static_cast<double>(pb.size()));
    for (std::size_t j = 0; j < which.size(); ++j) {
        double nrm = J.col(static_cast<Eigen::Index>(j)).norm();
        if (!(nrm > 1e-9 * scale))
            throw IdentifiabilityError("coefficient '" + which[j] + "' is not identifiable: the dataset never varies "
                                       "the quantity it multiplies", which[j]);
        J.col(static_cast<Eigen::Index>(j)) /= nrm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    qr.setThreshold(1e-8);
    auto rank = static_cast<std::size_t>(qr.rank());
    if (rank < which.size()) {
        std::string name = which[static_cast<std::size_t>(qr.colsPermutation().indices()[static_cast<Eigen::Index>(rank)])];
        throw IdentifiabilityError("coefficient '" + name + "' is not identifiable: its effect is indistinguishable "
                                   "from other requested coefficients on this dataset", name);
    }
}

}  // namespace

double predict_lateral(const CalibrationRow& row, const CalibrationCoefficients& k) {
    CorrectionFactors f;
    try {
        f = correction_factors(row_params(row), k, row.L, row.spacing, row.pitch);
    } catch (const NumericalError&) {
        return kInf;
    }
    const double D_eff = row.D * k.eta_aper0_for(row.L);
    return k.c_lat * row.wavelength * row.r / D_eff * (1.0 + k.xi_lat * row.wrms) * f.F_lat;
}

double predict_axial(const CalibrationRow& row, const CalibrationCoefficients& k) {
    CorrectionFactors f;
    try {
        f = correction_factors(row_params(row), k, row.L, row.spacing, row.pitch);
    } catch (const NumericalError&) {
        return kInf;
    }
    const double D_eff = row.D * k.eta_aper0_for(row.L);
    const double R = std::isfinite(row.R_eq) && row.R_eq > 0 ? row.R_eq : row.r;
    const double k0 = 2.0 * std::numbers::pi / row.wavelength;
    const double c = row.delta_C * row.r;
    const double q = row.delta_a4 * row.r * row.r * row.r / k0;
    const double bracket = 1.0 + (k.beta + k.xi_ax2) * c * c + k.xi_ax * row.wrms * row.wrms + k.xi_ax4 * q * q;
    return k.c_ax * row.wavelength * R * R / (D_eff * D_eff) * bracket * f.F_ax;
}

CalibrationDataset synthesize_dataset(const CalibrationDataset& covariates, const CalibrationCoefficients& k) {
    CalibrationDataset out = covariates;
    for (auto& row : out.rows) {
        row.fwhm_lat = predict_lateral(row, k);
        row.fwhm_ax = predict_axial(row, k);
    }
    return out;
}

const std::vector<std::string>& fittable_coefficients() {
    static const std::vector<std::string> names = {"xi_lat",      "xi_ax",     "chi_lat", "mu",
                                                   "nu",          "gamma_loss", "gamma_quant", "gamma_gap",
                                                   "beta",        "xi_ax2",    "xi_ax4",  "xi_ali_ax"};
    return names;
}

CalibrationDataset generate_dataset(const SystemConfig& config, const CalibrationGrid& grid) {
    if (grid.layer_counts.empty() || grid.distances.empty() || grid.settings.empty())
        throw ConfigError("calibration grid is empty");
    const std::size_t nL = grid.layer_counts.size();
    const std::size_t nr = grid.distances.size();
    const std::size_t total = grid.settings.size() * nL * nr;
    CalibrationDataset data;
    data.rows.resize(total);
    parallel_for(total, [&](std::size_t idx) {
        const auto& s = grid.settings[idx / (nL * nr)];
        const int L = grid.layer_counts[(idx / nr) % nL];
        const double r = grid.distances[idx % nr];
        SystemConfig cfg = config;
        cfg.imperfections.misalignment = s.misalignment;
        cfg.imperfections.transmission_efficiency = s.transmission_efficiency;
        cfg.imperfections.phase_bits = s.phase_bits;
        cfg.imperfections.spacing_deviation = s.spacing_deviation;
        FocusReport f = evaluate_at(cfg, L, r);
        CalibrationRow& row = data.rows[idx];
        row.L = L;
        row.r = r;
        row.misalignment = s.misalignment;
        row.transmission_efficiency = s.transmission_efficiency;
        row.phase_bits = s.phase_bits;
        row.spacing_deviation = s.spacing_deviation;
        row.spacing = cfg.layer_spacings.empty() ? 5.0 * cfg.wavelength : cfg.layer_spacings.front();
        row.wavelength = cfg.wavelength;
        row.D = equivalent_diameter(*build_aperture(cfg));
        row.pitch = cfg.element_pitch;
        row.fwhm_lat = f.fwhm_lat;
        row.fwhm_ax = f.fwhm_ax;
        row.dl_lat = f.dl_lat;
        row.dl_ax = f.dl_ax;
        row.wrms = f.wrms;
        row.delta_C = f.delta_C;
        row.delta_a4 = f.delta_a4;
        row.R_eq = f.R_eq;
        row.weight_lat = 1.0 / f.dl_lat;
        row.weight_ax = 1.0 / f.dl_ax;
    });
    return data;
}

CalibrationFit fit_coefficients(const CalibrationDataset& data, const std::vector<std::string>& which,
                                const CalibrationCoefficients& start) {
    if (data.rows.empty()) throw ConfigError("calibration dataset is empty");
    if (which.empty()) throw ConfigError("no coefficients requested for fitting");
    std::set<std::string> seen;
    for (const auto& name : which) {
        CalibrationCoefficients tmp;
        field(tmp, name);
        if (!seen.insert(name).second) throw ConfigError("coefficient '" + name + "' requested twice");
    }

    Problem pb;
    pb.rows = &data.rows;
    for (std::size_t n = 0; n < data.rows.size(); ++n) {
        if (usable_lat(data.rows[n])) pb.lat.push_back(n);
        if (usable_ax(data.rows[n])) pb.ax.push_back(n);
    }
    if (pb.size() < 2 * which.size())
        throw ConfigError("calibration needs at least " + std::to_string(2 * which.size()) +
                          " usable measurements for " + std::to_string(which.size()) + " coefficients, found " +
                          std::to_string(pb.size()));

    check_identifiable(pb, start, which);

    std::vector<std::string> linear;
    std::vector<std::string> exponents;
    for (const auto& name : which) (is_exponent(name) ? exponents : linear).push_back(name);

    CalibrationCoefficients k = start;
    for (const auto& name : which)
        if (*field(k, name) < 0) *field(k, name) = 0.0;

    InnerResult best;
    if (exponents.empty()) {
        best = gauss_newton(pb, k, linear);
    } else {
        best = gauss_newton(pb, k, linear);
        int total = best.iterations;
        for (int round = 0; round < 8; ++round) {
            double before = best.loss;
            for (const auto& e : exponents) {
                CalibrationCoefficients base = best.k;
                InnerResult r = golden_section(
                    [&](double v) {
                        CalibrationCoefficients kk = base;
                        *field(kk, e) = v;
                        return gauss_newton(pb, kk, linear);
                    },
                    0.5, 3.0);
                total += r.iterations;
                if (r.loss <= best.loss) best = r;
            }
            if (!(best.loss < before * (1.0 - 1e-12)) || best.loss < 1e-30) break;
        }
        best.iterations = total;
    }

    CalibrationFit fit;
    fit.coefficients = best.k;
    fit.iterations = best.iterations;
    std::vector<std::size_t> used = pb.lat;
    used.insert(used.end(), pb.ax.begin(), pb.ax.end());
    std::sort(used.begin(), used.end());
    fit.rows_used = static_cast<std::size_t>(std::unique(used.begin(), used.end()) - used.begin());
    Eigen::VectorXd res = pb.residuals(best.k);
    auto nlat = static_cast<Eigen::Index>(pb.lat.size());
    auto nax = static_cast<Eigen::Index>(pb.ax.size());
    fit.rms_lat = nlat > 0 ? std::sqrt(res.head(nlat).squaredNorm() / static_cast<double>(nlat)) : 0.0;
    fit.rms_ax = nax > 0 ? std::sqrt(res.tail(nax).squaredNorm() / static_cast<double>(nax)) : 0.0;

    Eigen::MatrixXd J = jacobian(pb, best.k, which);
    const double dof = std::max<double>(1.0, static_cast<double>(pb.size()) - static_cast<double>(which.size()));
    const double sigma2 = res.squaredNorm() / dof;
    Eigen::MatrixXd cov = (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse() * sigma2;
    for (std::size_t j = 0; j < which.size(); ++j)
        fit.uncertainty[which[j]] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
    return fit;
}

namespace {

const std::vector<std::string>& dataset_columns() {
    static const std::vector<std::string> cols = {
        "L",        "r",       "misalignment", "transmission_efficiency", "phase_bits", "spacing_deviation",
        "spacing",  "wavelength", "D",         "pitch",                   "fwhm_lat",   "fwhm_ax",
        "dl_lat",   "dl_ax",   "wrms",         "delta_C",                 "delta_a4",   "R_eq",
        "weight_lat", "weight_ax"};
    return cols;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string dataset_to_csv(const CalibrationDataset& data, const std::string& preamble) {
    std::ostringstream os;
    os << preamble;
    const auto& cols = dataset_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : data.rows) {
        os << r.L << ',' << fmt(r.r) << ',' << fmt(r.misalignment) << ',' << fmt(r.transmission_efficiency) << ','
           << r.phase_bits << ',' << fmt(r.spacing_deviation) << ',' << fmt(r.spacing) << ',' << fmt(r.wavelength)
           << ',' << fmt(r.D) << ',' << fmt(r.pitch) << ',' << fmt(r.fwhm_lat) << ',' << fmt(r.fwhm_ax) << ','
           << fmt(r.dl_lat) << ',' << fmt(r.dl_ax) << ',' << fmt(r.wrms) << ',' << fmt(r.delta_C) << ','
           << fmt(r.delta_a4) << ',' << fmt(r.R_eq) << ',' << fmt(r.weight_lat) << ',' << fmt(r.weight_ax) << '\n';
    }
    return os.str();
}

CalibrationDataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    CalibrationDataset data;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            out.push_back(cell);
        }
        return out;
    };
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line);
        if (header.empty()) {
            header = cells;
            for (const auto& c : dataset_columns())
                if (std::find(header.begin(), header.end(), c) == header.end())
                    throw ConfigError("calibration dataset is missing column '" + c + "'");
            continue;
        }
        if (cells.size() != header.size())
            throw ConfigError("calibration dataset line " + std::to_string(lineno) + " has the wrong cell count");
        std::map<std::string, double> v;
        for (std::size_t i = 0; i < header.size(); ++i) {
            char* end = nullptr;
            double x = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str() || *end != '\0')
                throw ConfigError("calibration dataset line " + std::to_string(lineno) + ": bad number '" + cells[i] +
                                  "' in column " + header[i]);
            v[header[i]] = x;
        }
        CalibrationRow r;
        r.L = static_cast<int>(v["L"]);
        r.r = v["r"];
        r.misalignment = v["misalignment"];
        r.transmission_efficiency = v["transmission_efficiency"];
        r.phase_bits = static_cast<int>(v["phase_bits"]);
        r.spacing_deviation = v["spacing_deviation"];
        r.spacing = v["spacing"];
        r.wavelength = v["wavelength"];
        r.D = v["D"];
        r.pitch = v["pitch"];
        r.fwhm_lat = v["fwhm_lat"];
        r.fwhm_ax = v["fwhm_ax"];
        r.dl_lat = v["dl_lat"];
        r.dl_ax = v["dl_ax"];
        r.wrms = v["wrms"];
        r.delta_C = v["delta_C"];
        r.delta_a4 = v["delta_a4"];
        r.R_eq = v["R_eq"];
        r.weight_lat = v["weight_lat"];
        r.weight_ax = v["weight_ax"];
        if (!(r.weight_lat > 0) || !(r.weight_ax > 0))
            throw ConfigError("calibration dataset line " + std::to_string(lineno) + ": weights must be > 0");
        data.rows.push_back(r);
    }
    if (header.empty()) throw ConfigError("calibration dataset has no header row");
    return data;
}

std::string coefficients_to_json(const CalibrationCoefficients& k) {
    json doc = {{"xi_lat", k.xi_lat},         {"xi_ax", k.xi_ax},         {"chi_lat", k.chi_lat},
                {"mu", k.mu},                 {"nu", k.nu},               {"gamma_loss", k.gamma_loss},
                {"gamma_quant", k.gamma_quant}, {"gamma_gap", k.gamma_gap}, {"c_lat", k.c_lat},
                {"c_ax", k.c_ax},             {"beta", k.beta},           {"xi_ax2", k.xi_ax2},
                {"xi_ax4", k.xi_ax4},         {"xi_ali_ax", k.xi_ali_ax}, {"eta_aper0", k.eta_aper0}};
    return doc.dump(2) + "\n";
}

CalibrationCoefficients coefficients_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("coefficients file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("coefficients document must be an object");
    CalibrationCoefficients k;
    for (const auto& [key, value] : doc.items()) {
        if (key == "eta_aper0") {
            if (!value.is_array()) throw ConfigError("eta_aper0 must be an array");
            k.eta_aper0 = value.get<std::vector<double>>();
        } else if (key == "c_lat" || key == "c_ax") {
            if (!value.is_number()) throw ConfigError(key + " must be a number");
            (key == "c_lat" ? k.c_lat : k.c_ax) = value.get<double>();
        } else {
            if (!value.is_number()) throw ConfigError(key + " must be a number");
            *field(k, key) = value.get<double>();
        }
    }
    return k;
}

}  // namespace nfsim
