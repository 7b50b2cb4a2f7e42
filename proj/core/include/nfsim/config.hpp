#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace nfsim {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class FeedKind { point_source, uniform_plane };

struct FeedModel {
    FeedKind kind = FeedKind::point_source;
    double feed_distance = 0.0;  // m behind layer 1; 0 selects 0.2 * D at load time
    double power = 1.0;
};

struct Thresholds {
    double gain_loss_db = 3.0;
    double lateral_retention = 0.958;
    double axial_retention = 0.8;
    double residual_phase = std::numbers::pi / 4.0;
    double trunc_phase = std::numbers::pi / 8.0;
};

struct ImperfectionParams {
    double misalignment = 0.0;
    double transmission_efficiency = 1.0;
    int phase_bits = 0;  // 0 means unbounded resolution
    double spacing_deviation = 0.0;
    std::uint64_t rng_seed = 1;

    bool quantized() const { return phase_bits > 0; }
    bool ideal() const {
        return misalignment == 0.0 && transmission_efficiency == 1.0 && !quantized() &&
               spacing_deviation == 0.0;
    }
};

struct CalibrationCoefficients {
    double xi_lat = 0.0;
    double xi_ax = 0.0;
    double chi_lat = 0.0;
    double mu = 1.0;
    double nu = 1.0;
    double gamma_loss = 0.0;
    double gamma_quant = 0.0;
    double gamma_gap = 0.0;
    double c_lat = 0.886;
    double c_ax = 2.0;
    double beta = 0.0;
    double xi_ax2 = 0.0;
    double xi_ax4 = 0.0;
    // axial misalignment coefficient; shares its symbol with xi_ax in the literature
    double xi_ali_ax = 0.0;
    // per layer count, index L-1; missing entries default to 1
    std::vector<double> eta_aper0;

    double eta_aper0_for(int layer_count) const;
};

enum class SweepSpacing { linear, geometric };

struct SweepPlan {
    double r_min_frac = 0.05;
    double r_max_frac = 1.0;
    int num_points = 64;
    SweepSpacing spacing = SweepSpacing::linear;
    std::vector<int> layer_counts;        // empty: only SystemConfig::layer_count
    std::optional<double> focal_distance;  // single-point commands (run, psf)
};

enum class RetentionBaseline { ideal_aperture, closed_form };
enum class PropagationEngine { green, fresnel };

struct OptimizerSettings {
    int max_sweeps = 20;
    double tol = 1e-9;
    bool refine = true;
    int refine_steps = 1000;
    double step_size = 1.0;
    int history = 8;
    bool random_init = false;
};

struct SystemConfig {
    double wavelength = 0.0;
    double aperture_diameter = 0.0;
    double element_pitch = 0.0;
    int layer_count = 1;
    std::vector<double> layer_spacings;
    FeedModel feed;
    Thresholds thresholds;
    ImperfectionParams imperfections;
    CalibrationCoefficients calibration;
    SweepPlan sweep;
    OptimizerSettings optimizer;
    RetentionBaseline retention_baseline = RetentionBaseline::ideal_aperture;
    PropagationEngine engine = PropagationEngine::green;
    double rx_phase = 0.0;

    double k0() const { return 2.0 * std::numbers::pi / wavelength; }
    void validate() const;

    // Same physical system with L layers; spacing list rebuilt from the first spacing.
    SystemConfig with_layers(int layers) const;
};

// Desk-scale default: 28 GHz, D = 0.12 m, half-wavelength pitch, three layers 5 lambda apart.
SystemConfig default_config();

std::vector<double> sweep_distances(const SweepPlan& plan, double rayleigh_distance);

}  // namespace nfsim
