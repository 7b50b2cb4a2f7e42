#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nfsim/config.hpp"
#include "nfsim/propagation.hpp"
#include "nfsim/stack.hpp"
#include "nfsim/wavefront.hpp"

namespace nfsim {

double coherence(const Eigen::VectorXcd& g_sim, const Eigen::VectorXcd& g_target);
double coherence(const ComplexField& g_sim, const ComplexField& g_target);

// -20 log10(coh); +inf for coh = 0.
double gain_loss_db(double coh);

struct PsfCut {
    enum class Axis { lateral, axial };
    Axis axis = Axis::lateral;
    std::vector<double> coordinates;  // x for lateral, distance from the last layer for axial
    std::vector<double> intensity;    // peak-normalized |field|^2
};

struct PsfCuts {
    PsfCut lateral;
    PsfCut axial;
};

struct DiffractionLimits {
    double dl_lat = 0.0;
    double dl_ax = 0.0;
    double mode_density = 0.0;
};

DiffractionLimits diffraction_limits(double D, double wavelength, double r, double c_lat = 0.886,
                                     double c_ax = 2.0);

// Lateral +-4 dl_lat and axial [max(r - 4 dl_ax, 0.55 r), r + 4 dl_ax], both at dl / 16.
ObservationGrid psf_window(double r, const DiffractionLimits& dl, double z0 = 0.0);

// Intensity cuts radiated by a field on the last-layer plane.
PsfCuts psf_cuts_from_field(const ComplexField& aperture_field, const ObservationGrid& obs, double wavelength);

PsfCuts psf_cuts(const LayerStack& stack, const SystemConfig& config, double r);

// Separation of the linearly interpolated half-maximum crossings around the peak.
double fwhm(const PsfCut& cut);

double retention(double measured, double ideal);

struct CorrectionFactors {
    double F_ali_lat = 1.0;
    double F_ali_ax = 1.0;
    double F_loss = 1.0;
    double F_quant = 1.0;
    double F_gap = 1.0;
    double F_lat = 1.0;
    double F_ax = 1.0;
    double eta_aper = 1.0;
};

CorrectionFactors correction_factors(const ImperfectionParams& params, const CalibrationCoefficients& coeffs,
                                     int L, double d, double pitch);

struct ModelResolutions {
    double model_lat = 0.0;
    double model_ax = 0.0;
    double model_lat_corr = 0.0;
    double model_ax_corr = 0.0;
    double model_ax_high = 0.0;
    double model_ax_wrms = 0.0;  // WRMS^2 axial form, kept as a cross-check
};

ModelResolutions model_resolutions(double r, const PhasePolynomial& fit, double wrms_value,
                                   const CalibrationCoefficients& coeffs, const CorrectionFactors& factors,
                                   double D, double wavelength, int L);

}  // namespace nfsim
