#pragma once

#include <string>
#include <vector>

#include "nfsim/config.hpp"
#include "nfsim/metrics.hpp"
#include "nfsim/stack.hpp"

namespace nfsim {

struct FocusReport {
    int layer_count = 1;
    double r = 0.0;
    double coherence = 0.0;
    double gain_loss_db = 0.0;
    double fwhm_lat = 0.0;  // +inf when the cut has no measurable main lobe
    double fwhm_ax = 0.0;
    double dl_lat = 0.0;
    double dl_ax = 0.0;
    double retention_lat = 0.0;
    double retention_ax = 0.0;
    double wrms = 0.0;
    double delta_C = 0.0;
    double delta_a4 = 0.0;
    double max_residual_phase = 0.0;
    double mode_density = 0.0;
    double model_lat = 0.0;
    double model_ax = 0.0;
    double model_lat_corr = 0.0;
    double model_ax_corr = 0.0;
    double model_ax_high = 0.0;
    double R_eq = 0.0;
    double ref_fwhm_lat = 0.0;  // ideal uniform conjugate-phase aperture on the same grid
    double ref_fwhm_ax = 0.0;
};

struct ReferenceWidths {
    double lateral = 0.0;
    double axial = 0.0;
};

// Widths of the uniform-amplitude, exact conjugate-phase aperture at distance r.
ReferenceWidths ideal_reference(const SystemConfig& config, double r);

double rayleigh_distance(const SystemConfig& config);

FocusReport evaluate_at(const SystemConfig& config, int L, double r);
FocusReport evaluate_at(const SystemConfig& config, int L, double r, const ReferenceWidths& reference);

// Evaluation from an already designed stack (imperfections applied by the caller).
FocusReport evaluate_stack(const SystemConfig& config, const LayerStack& stack, double r,
                           const ReferenceWidths& reference);

enum class Criterion { gain, lateral, axial, phase, none_violated };

std::string to_string(Criterion c);

struct Boundary {
    double r = 0.0;
    bool violated = false;     // some sample fails the predicate
    bool below_range = false;  // the first sample already fails
};

Boundary criterion_boundary(const std::vector<FocusReport>& reports, Criterion criterion,
                            const Thresholds& thresholds);

struct UnfdReport {
    int layer_count = 1;
    std::vector<FocusReport> reports;
    double R_gain = 0.0;
    double R_lat = 0.0;
    double R_ax = 0.0;
    double R_res = 0.0;
    double R_phi = 0.0;
    double R_unfd = 0.0;
    double R_ray = 0.0;
    Criterion binding_criterion = Criterion::none_violated;
    bool below_range = false;
};

UnfdReport summarize_sweep(int L, std::vector<FocusReport> reports, const Thresholds& thresholds, double R_ray);

std::vector<UnfdReport> unfd_for_layers(const SystemConfig& config, const std::vector<int>& layer_counts);

}  // namespace nfsim
