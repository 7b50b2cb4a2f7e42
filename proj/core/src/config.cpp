#include "nfsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nfsim/error.hpp"

namespace nfsim {

double CalibrationCoefficients::eta_aper0_for(int layer_count) const {
    if (layer_count < 1 || eta_aper0.empty()) return 1.0;
    auto idx = static_cast<std::size_t>(layer_count - 1);
    return idx < eta_aper0.size() ? eta_aper0[idx] : eta_aper0.back();
}

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void SystemConfig::validate() const {
    require(std::isfinite(wavelength) && wavelength > 0, "physics.wavelength must be > 0");
    require(std::isfinite(aperture_diameter) && aperture_diameter > 0,
            "physics.aperture_diameter must be > 0");
    require(std::isfinite(element_pitch) && element_pitch > 0, "physics.element_pitch must be > 0");
    require(element_pitch <= wavelength * (1.0 + 1e-12),
            "physics.element_pitch must not exceed the wavelength");
    require(layer_count >= 1, "layers.count must be >= 1");
    require(layer_spacings.size() == static_cast<std::size_t>(layer_count - 1),
            "layers.spacings must have layers.count - 1 entries");
    for (double d : layer_spacings)
        require(std::isfinite(d) && d > 0, "layer spacings must be > 0");

    if (feed.kind == FeedKind::point_source)
        require(feed.feed_distance > 0, "feed.distance must be > 0 for a point source");
    require(feed.power > 0, "feed.power must be > 0");

    const auto& t = thresholds;
    require(t.gain_loss_db > 0 && t.residual_phase > 0 && t.trunc_phase > 0,
            "thresholds must be strictly positive");
    require(t.lateral_retention > 0 && t.lateral_retention <= 1,
            "thresholds.lateral_retention must lie in (0, 1]");
    require(t.axial_retention > 0 && t.axial_retention <= 1,
            "thresholds.axial_retention must lie in (0, 1]");

    const auto& im = imperfections;
    require(im.transmission_efficiency > 0 && im.transmission_efficiency <= 1,
            "imperfections.transmission_efficiency must lie in (0, 1]");
    require(im.misalignment >= 0, "imperfections.misalignment must be >= 0");
    require(im.phase_bits >= 0, "imperfections.phase_bits must be >= 1 or null");
    if (!layer_spacings.empty()) {
        double dmin = *std::min_element(layer_spacings.begin(), layer_spacings.end());
        require(std::abs(im.spacing_deviation) < dmin,
                "imperfections.spacing_deviation must be smaller than the minimum spacing");
    }

    const auto& c = calibration;
    for (double v : {c.xi_lat, c.xi_ax, c.chi_lat, c.mu, c.nu, c.gamma_loss, c.gamma_quant,
                     c.gamma_gap, c.c_lat, c.c_ax, c.beta, c.xi_ax2, c.xi_ax4, c.xi_ali_ax})
        require(std::isfinite(v) && v >= 0, "calibration coefficients must be nonnegative");
    for (double v : c.eta_aper0)
        require(v > 0 && v <= 1, "calibration.eta_aper0 entries must lie in (0, 1]");

    const auto& s = sweep;
    require(s.r_min_frac > 0 && s.r_min_frac < s.r_max_frac && s.r_max_frac <= 1,
            "sweep requires 0 < r_min_frac < r_max_frac <= 1");
    require(s.num_points >= 8, "sweep.num_points must be >= 8");
    for (int L : s.layer_counts) require(L >= 1, "sweep.layer_counts entries must be >= 1");
    if (s.focal_distance) require(*s.focal_distance > 0, "sweep.focal_distance must be > 0");

    require(optimizer.max_sweeps >= 1, "layers.optimizer.max_sweeps must be >= 1");
    require(optimizer.tol > 0, "layers.optimizer.tol must be > 0");
    require(optimizer.refine_steps >= 0, "layers.optimizer.refine_steps must be >= 0");
    require(optimizer.step_size > 0, "layers.optimizer.step_size must be > 0");
    require(optimizer.history >= 1, "layers.optimizer.history must be >= 1");
}

SystemConfig SystemConfig::with_layers(int layers) const {
    if (layers < 1) throw ConfigError("layer count must be >= 1");
    SystemConfig out = *this;
    out.layer_count = layers;
    double d = layer_spacings.empty() ? 5.0 * wavelength : layer_spacings.front();
    out.layer_spacings.assign(static_cast<std::size_t>(layers - 1), d);
    for (std::size_t i = 0; i < out.layer_spacings.size() && i < layer_spacings.size(); ++i)
        out.layer_spacings[i] = layer_spacings[i];
    return out;
}

SystemConfig default_config() {
    SystemConfig c;
    c.wavelength = kSpeedOfLight / 28e9;
    c.aperture_diameter = 0.12;
    c.element_pitch = c.wavelength / 2.0;
    c.layer_count = 3;
    c.layer_spacings.assign(2, 5.0 * c.wavelength);
    c.feed.kind = FeedKind::point_source;
    c.feed.feed_distance = 0.2 * c.aperture_diameter;
    c.sweep.r_min_frac = 0.05;
    c.sweep.r_max_frac = 0.2;
    c.sweep.num_points = 64;
    c.sweep.spacing = SweepSpacing::geometric;
    c.sweep.layer_counts = {1, 2, 3};
    return c;
}

std::vector<double> sweep_distances(const SweepPlan& plan, double rayleigh_distance) {
    const int n = plan.num_points;
    const double a = plan.r_min_frac * rayleigh_distance;
    const double b = plan.r_max_frac * rayleigh_distance;
    std::vector<double> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / (n - 1);
        r[static_cast<std::size_t>(i)] = plan.spacing == SweepSpacing::linear
                                             ? a + (b - a) * t
                                             : a * std::pow(b / a, t);
    }
    r.front() = a;
    r.back() = b;
    return r;
}

}  // namespace nfsim
