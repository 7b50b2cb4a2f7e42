#include "nfsim/unfd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfsim/error.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/parallel.hpp"
#include "nfsim/propagation.hpp"
#include "nfsim/wavefront.hpp"

namespace nfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double measured_width(const PsfCut& cut) {
    try {
        return fwhm(cut);
    } catch (const MeasurementError&) {
        return kInf;
    }
}

double retention_or_zero(double measured, double ideal) {
    if (!std::isfinite(measured) || !std::isfinite(ideal) || !(measured > 0) || !(ideal > 0)) return 0.0;
    return ideal / measured;
}

double nominal_spacing(const SystemConfig& config) {
    if (!config.layer_spacings.empty()) return config.layer_spacings.front();
    return 5.0 * config.wavelength;
}

void check_distance(const SystemConfig& config, double r) {
    if (!(r > 0)) throw ConfigError("focal distance must be > 0");
    double R_ray = rayleigh_distance(config);
    if (r > R_ray * (1.0 + 1e-12))
        throw ConfigError("focal distance exceeds the Rayleigh distance " + std::to_string(R_ray) + " m");
}

}  // namespace

double rayleigh_distance(const SystemConfig& config) {
    ApertureRef grid = build_aperture(config);
    double D = equivalent_diameter(*grid);
    return 2.0 * D * D / config.wavelength;
}

ReferenceWidths ideal_reference(const SystemConfig& config, double r) {
    ApertureRef grid = build_aperture(config);
    const double D = equivalent_diameter(*grid);
    GridRef plane = grid->plane(0.0, "reference");
    // The target wave is the conjugate of the ideal radiating field.
    ComplexField t = target_field(*grid, plane, r, config.wavelength);
    ComplexField e(plane, t.values.conjugate());
    auto dl = diffraction_limits(D, config.wavelength, r, config.calibration.c_lat, config.calibration.c_ax);
    PsfCuts cuts = psf_cuts_from_field(e, psf_window(r, dl), config.wavelength);
    return {measured_width(cuts.lateral), measured_width(cuts.axial)};
}

FocusReport evaluate_stack(const SystemConfig& config, const LayerStack& stack, double r,
                           const ReferenceWidths& reference) {
    const ApertureGrid& grid = *stack.grid;
    const double lambda = config.wavelength;
    const double D = equivalent_diameter(grid);
    const int L = static_cast<int>(stack.layer_count());

    ComplexField feed = feed_field(config.feed, grid, lambda, stack.planes.front());
    LinearPropagator t_sim = cascade(stack, interlayer_operators(stack, lambda, config.engine));
    ComplexField out = apply(t_sim, feed);
    ComplexField target = target_field(grid, stack.planes.back(), r, lambda);
    ComplexField phase_front(out.grid, out.values.conjugate());

    FocusReport rep;
    rep.layer_count = L;
    rep.r = r;
    rep.coherence = coherence(phase_front, target);
    rep.gain_loss_db = gain_loss_db(rep.coherence);

    auto dl = diffraction_limits(D, lambda, r, config.calibration.c_lat, config.calibration.c_ax);
    rep.dl_lat = dl.dl_lat;
    rep.dl_ax = dl.dl_ax;
    rep.mode_density = dl.mode_density;

    PsfCuts cuts = psf_cuts_from_field(out, psf_window(r, dl), lambda);
    rep.fwhm_lat = measured_width(cuts.lateral);
    rep.fwhm_ax = measured_width(cuts.axial);
    rep.ref_fwhm_lat = reference.lateral;
    rep.ref_fwhm_ax = reference.axial;
    if (config.retention_baseline == RetentionBaseline::closed_form) {
        rep.retention_lat = retention_or_zero(rep.fwhm_lat, dl.dl_lat);
        rep.retention_ax = retention_or_zero(rep.fwhm_ax, dl.dl_ax);
    } else {
        rep.retention_lat = retention_or_zero(rep.fwhm_lat, reference.lateral);
        rep.retention_ax = retention_or_zero(rep.fwhm_ax, reference.axial);
    }

    ResidualPhase res = residual_phase(phase_front, target);
    Eigen::VectorXd amp = out.values.cwiseAbs();
    rep.wrms = wrms(res.phase, amp, res.included);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    PhasePolynomial fit;
    CurvatureDiagnostics cdg;
    bool have_fit = true;
    try {
        fit = fit_phase_polynomial(phase_front, grid, 4);
        cdg = curvature_diagnostics(fit, r, lambda);
    } catch (const NumericalError&) {
        have_fit = false;
    }
    if (have_fit) {
        rep.delta_C = cdg.delta_C;
        rep.delta_a4 = cdg.delta_a4;
        rep.R_eq = cdg.R_eq;
        rep.max_residual_phase = max_residual_phase(cdg.delta_C, D, lambda);
        CorrectionFactors f =
            correction_factors(config.imperfections, config.calibration, L, nominal_spacing(config), grid.pitch());
        ModelResolutions m = model_resolutions(r, fit, rep.wrms, config.calibration, f, D, lambda, L);
        rep.model_lat = m.model_lat;
        rep.model_ax = m.model_ax;
        rep.model_lat_corr = m.model_lat_corr;
        rep.model_ax_corr = m.model_ax_corr;
        rep.model_ax_high = m.model_ax_high;
    } else {
        rep.delta_C = rep.delta_a4 = rep.R_eq = nan;
        rep.max_residual_phase = kInf;
        rep.model_lat = rep.model_ax = rep.model_lat_corr = rep.model_ax_corr = rep.model_ax_high = nan;
    }
    return rep;
}

FocusReport evaluate_at(const SystemConfig& config, int L, double r, const ReferenceWidths& reference) {
    SystemConfig cfg = config.with_layers(L);
    check_distance(cfg, r);
    StackProblem pb = make_problem(cfg, r);
    OptimizationResult opt = optimize_phases(pb, cfg.optimizer, cfg.imperfections.rng_seed);
    LayerStack stack = inject_imperfections(opt.stack, cfg.imperfections);
    return evaluate_stack(cfg, stack, r, reference);
}

FocusReport evaluate_at(const SystemConfig& config, int L, double r) {
    ReferenceWidths ref;
    if (config.retention_baseline == RetentionBaseline::ideal_aperture) ref = ideal_reference(config, r);
    return evaluate_at(config, L, r, ref);
}

std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::gain: return "gain";
        case Criterion::lateral: return "lateral";
        case Criterion::axial: return "axial";
        case Criterion::phase: return "phase";
        case Criterion::none_violated: return "none_violated";
    }
    return "unknown";
}

Boundary criterion_boundary(const std::vector<FocusReport>& reports, Criterion criterion,
                            const Thresholds& th) {
    if (reports.empty()) throw ConfigError("criterion boundary of an empty sweep");
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (!(reports[i].r > reports[i - 1].r)) throw ConfigError("sweep distances must increase strictly");

    // q(i) compared against the threshold; `upper` means the predicate is q <= threshold.
    double threshold = 0.0;
    bool upper = true;
    auto quantity = [&](const FocusReport& f) -> double {
        switch (criterion) {
            case Criterion::gain: return f.gain_loss_db;
            case Criterion::lateral: return f.retention_lat;
            case Criterion::axial: return f.retention_ax;
            case Criterion::phase: return f.max_residual_phase;
            case Criterion::none_violated: break;
        }
        throw ConfigError("no quantity for criterion none_violated");
    };
    switch (criterion) {
        case Criterion::gain: threshold = th.gain_loss_db; break;
        case Criterion::lateral: threshold = th.lateral_retention; upper = false; break;
        case Criterion::axial: threshold = th.axial_retention; upper = false; break;
        case Criterion::phase: threshold = th.residual_phase; break;
        case Criterion::none_violated: throw ConfigError("no boundary for criterion none_violated");
    }
    auto holds = [&](double q) { return upper ? q <= threshold : q >= threshold; };

    Boundary b;
    if (!holds(quantity(reports.front()))) {
        b.r = reports.front().r;
        b.violated = true;
        b.below_range = true;
        return b;
    }
    for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
        double q1 = quantity(reports[i + 1]);
        if (holds(q1)) continue;
        double q0 = quantity(reports[i]);
        double r0 = reports[i].r;
        double r1 = reports[i + 1].r;
        b.violated = true;
        if (!std::isfinite(q1) || q1 == q0) {
            b.r = r0;
        } else {
            double t = std::clamp((threshold - q0) / (q1 - q0), 0.0, 1.0);
            b.r = r0 + t * (r1 - r0);
        }
        return b;
    }
    b.r = reports.back().r;
    return b;
}

UnfdReport summarize_sweep(int L, std::vector<FocusReport> reports, const Thresholds& th, double R_ray) {
    UnfdReport u;
    u.layer_count = L;
    u.R_ray = R_ray;
    u.reports = std::move(reports);

    Boundary gain = criterion_boundary(u.reports, Criterion::gain, th);
    Boundary lat = criterion_boundary(u.reports, Criterion::lateral, th);
    Boundary ax = criterion_boundary(u.reports, Criterion::axial, th);
    Boundary phase = criterion_boundary(u.reports, Criterion::phase, th);
    u.R_gain = gain.r;
    u.R_lat = lat.r;
    u.R_ax = ax.r;
    u.R_res = std::min(lat.r, ax.r);
    u.R_phi = phase.r;

    const std::pair<Criterion, Boundary> ordered[] = {
        {Criterion::gain, gain}, {Criterion::lateral, lat}, {Criterion::axial, ax}, {Criterion::phase, phase}};
    u.R_unfd = u.reports.back().r;
    u.binding_criterion = Criterion::none_violated;
    for (const auto& [c, b] : ordered) {
        if (!b.violated) continue;
        if (u.binding_criterion == Criterion::none_violated || b.r < u.R_unfd) {
            u.R_unfd = b.r;
            u.binding_criterion = c;
            u.below_range = b.below_range;
        }
    }
    return u;
}

std::vector<UnfdReport> unfd_for_layers(const SystemConfig& config, const std::vector<int>& layer_counts) {
    config.validate();
    if (layer_counts.empty()) throw ConfigError("no layer counts to sweep");
    for (int L : layer_counts)
        if (L < 1) throw ConfigError("layer count must be >= 1");

    const double R_ray = rayleigh_distance(config);
    const std::vector<double> r = sweep_distances(config.sweep, R_ray);
    const std::size_t nr = r.size();

    std::vector<ReferenceWidths> refs(nr);
    if (config.retention_baseline == RetentionBaseline::ideal_aperture)
        parallel_for(nr, [&](std::size_t i) { refs[i] = ideal_reference(config, r[i]); });

    std::vector<FocusReport> flat(layer_counts.size() * nr);
    parallel_for(flat.size(), [&](std::size_t k) {
        std::size_t li = k / nr;
        std::size_t ri = k % nr;
        flat[k] = evaluate_at(config, layer_counts[li], r[ri], refs[ri]);
    });

    std::vector<UnfdReport> out;
    for (std::size_t li = 0; li < layer_counts.size(); ++li) {
        std::vector<FocusReport> rows(flat.begin() + static_cast<std::ptrdiff_t>(li * nr),
                                      flat.begin() + static_cast<std::ptrdiff_t>((li + 1) * nr));
        out.push_back(summarize_sweep(layer_counts[li], std::move(rows), config.thresholds, R_ray));
    }
    return out;
}

}  // namespace nfsim
