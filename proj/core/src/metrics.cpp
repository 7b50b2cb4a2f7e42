#include "nfsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfsim/error.hpp"

namespace nfsim {

double coherence(const Eigen::VectorXcd& g_sim, const Eigen::VectorXcd& g_target) {
    if (g_sim.size() != g_target.size()) throw GridMismatchError("coherence: length mismatch");
    double na = g_sim.norm();
    double nb = g_target.norm();
    if (!(na > 0) || !(nb > 0)) throw NumericalError("coherence of a zero-norm field");
    cd inner = g_sim.dot(g_target);  // sum conj(sim) * target
    return std::min(1.0, std::abs(inner) / (na * nb));
}

double coherence(const ComplexField& g_sim, const ComplexField& g_target) {
    if (!same_grid(g_sim.grid, g_target.grid)) throw GridMismatchError("coherence: fields on different grids");
    return coherence(g_sim.values, g_target.values);
}

double gain_loss_db(double coh) {
    if (!(coh >= 0) || coh > 1.0 + 1e-12) throw NumericalError("coherence outside [0, 1]");
    if (coh == 0.0) return std::numeric_limits<double>::infinity();
    return -20.0 * std::log10(std::min(coh, 1.0));
}

DiffractionLimits diffraction_limits(double D, double wavelength, double r, double c_lat, double c_ax) {
    if (!(D > 0) || !(wavelength > 0) || !(r > 0)) throw ConfigError("diffraction limits need positive inputs");
    DiffractionLimits d;
    d.dl_lat = c_lat * wavelength * r / D;
    d.dl_ax = c_ax * wavelength * r * r / (D * D);
    d.mode_density = 1.0 / d.dl_ax;
    return d;
}

ObservationGrid psf_window(double r, const DiffractionLimits& dl, double z0) {
    double lo = std::max(r - 4.0 * dl.dl_ax, 0.55 * r);
    return make_observation_grid(r, 4.0 * dl.dl_lat, dl.dl_lat / 16.0, lo, r + 4.0 * dl.dl_ax, dl.dl_ax / 16.0, z0);
}

PsfCuts psf_cuts_from_field(const ComplexField& aperture_field, const ObservationGrid& obs, double wavelength) {
    LinearPropagator identity =
        LinearPropagator::diagonal(aperture_field.grid, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(aperture_field.size())));
    LinearPropagator g = focusing_operator(identity, obs, wavelength);
    Eigen::VectorXcd u = g.apply(aperture_field.values);

    auto make = [&](PsfCut::Axis axis, std::size_t offset, std::size_t count, std::vector<double> coords) {
        PsfCut c;
        c.axis = axis;
        c.coordinates = std::move(coords);
        c.intensity.resize(count);
        double peak = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            c.intensity[i] = std::norm(u[static_cast<Eigen::Index>(offset + i)]);
            peak = std::max(peak, c.intensity[i]);
        }
        if (!(peak > 0)) throw MeasurementError("PSF cut has zero intensity");
        for (double& v : c.intensity) v /= peak;
        return c;
    };
    PsfCuts cuts;
    cuts.lateral = make(PsfCut::Axis::lateral, 0, obs.lateral_count, obs.lateral_coordinates());
    cuts.axial = make(PsfCut::Axis::axial, obs.lateral_count, obs.axial_count, obs.axial_coordinates());
    return cuts;
}

PsfCuts psf_cuts(const LayerStack& stack, const SystemConfig& config, double r) {
    const ApertureGrid& grid = *stack.grid;
    ComplexField feed = feed_field(config.feed, grid, config.wavelength, stack.planes.front());
    LinearPropagator t_sim = cascade(stack, interlayer_operators(stack, config.wavelength, config.engine));
    ComplexField out = apply(t_sim, feed);
    double D = equivalent_diameter(grid);
    auto dl = diffraction_limits(D, config.wavelength, r, config.calibration.c_lat, config.calibration.c_ax);
    return psf_cuts_from_field(out, psf_window(r, dl), config.wavelength);
}

double fwhm(const PsfCut& cut) {
    const auto& I = cut.intensity;
    const auto& x = cut.coordinates;
    if (I.size() < 3 || I.size() != x.size()) throw MeasurementError("PSF cut too short");
    std::size_t ip = static_cast<std::size_t>(std::max_element(I.begin(), I.end()) - I.begin());
    if (ip == 0 || ip + 1 == I.size()) throw MeasurementError("PSF peak is not interior to the window");
    const double half = 0.5 * I[ip];
    std::size_t j = ip;
    while (j > 0 && I[j - 1] >= half) --j;
    if (j == 0) throw MeasurementError("no half-maximum crossing before the peak");
    double left = x[j - 1] + (half - I[j - 1]) * (x[j] - x[j - 1]) / (I[j] - I[j - 1]);
    std::size_t k = ip;
    while (k + 1 < I.size() && I[k + 1] >= half) ++k;
    if (k + 1 == I.size()) throw MeasurementError("no half-maximum crossing after the peak");
    double right = x[k] + (I[k] - half) * (x[k + 1] - x[k]) / (I[k] - I[k + 1]);
    return right - left;
}

double retention(double measured, double ideal) {
    if (!(measured > 0) || !(ideal > 0)) throw NumericalError("retention needs positive widths");
    return ideal / measured;
}

CorrectionFactors correction_factors(const ImperfectionParams& params, const CalibrationCoefficients& k, int L,
                                     double d, double pitch) {
    if (L < 1) throw ConfigError("layer count must be >= 1");
    if (!(pitch > 0)) throw ConfigError("pitch must be > 0");
    CorrectionFactors f;
    const double Lm1 = L - 1;
    const double rel = params.misalignment / pitch;
    double shrink = k.chi_lat * Lm1 * (rel > 0 ? std::pow(rel, k.mu) : 0.0);
    if (shrink >= 1.0) throw NumericalError("misalignment collapses the effective aperture");
    f.eta_aper = k.eta_aper0_for(L) * (1.0 - shrink);
    f.F_ali_lat = 1.0 / (1.0 - shrink);
    f.F_ali_ax = 1.0 + k.xi_ali_ax * Lm1 * (rel > 0 ? std::pow(rel, k.nu) : 0.0);
    f.F_loss = std::pow(params.transmission_efficiency, -Lm1 / 2.0) * (1.0 + k.gamma_loss * Lm1);
    double dq = params.quantized() ? 2.0 * std::numbers::pi / std::ldexp(1.0, params.phase_bits) : 0.0;
    f.F_quant = 1.0 + k.gamma_quant * L * dq * dq;
    if (params.spacing_deviation != 0.0) {
        if (!(d > 0)) throw ConfigError("spacing factor needs a positive nominal spacing");
        f.F_gap = 1.0 + k.gamma_gap * L * std::abs(params.spacing_deviation / d);
    }
    f.F_lat = f.F_ali_lat * f.F_loss * f.F_quant * f.F_gap;
    f.F_ax = f.F_ali_ax * f.F_loss * f.F_quant * f.F_gap;
    return f;
}

ModelResolutions model_resolutions(double r, const PhasePolynomial& fit, double wrms_value,
                                   const CalibrationCoefficients& k, const CorrectionFactors& f, double D,
                                   double wavelength, int L) {
    CurvatureDiagnostics cd = curvature_diagnostics(fit, r, wavelength);
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    const double D_eff = D * k.eta_aper0_for(L);
    const double dC_r = cd.delta_C * r;
    const double quartic = cd.delta_a4 * r * r * r / k0;
    ModelResolutions m;
    m.model_lat = k.c_lat * wavelength * r / D_eff * (1.0 + k.xi_lat * wrms_value);
    m.model_ax = k.c_ax * wavelength * cd.R_eq * cd.R_eq / (D_eff * D_eff) * (1.0 + k.beta * dC_r * dC_r);
    m.model_lat_corr = m.model_lat * f.F_lat;
    m.model_ax_corr = m.model_ax * f.F_ax;
    const double ideal_ax = k.c_ax * wavelength * r * r / (D_eff * D_eff);
    m.model_ax_high = ideal_ax * (1.0 + k.xi_ax2 * dC_r * dC_r + k.xi_ax4 * quartic * quartic);
    m.model_ax_wrms = ideal_ax * (1.0 + k.xi_ax * wrms_value * wrms_value);
    return m;
}

}  // namespace nfsim
