#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/geometry.hpp"

namespace nfsim {

struct PhasePolynomial {
    std::map<int, double> coefficients;  // order 2m -> a_2m in rad / m^2m
    double fit_residual_rms = 0.0;
    double valid_radius = 0.0;

    double coefficient(int order) const;
    bool has(int order) const { return coefficients.count(order) != 0; }
};

// Unit-amplitude converging-wave phase -k0 (sqrt(rho^2 + r^2) - r), normalized to unit power.
ComplexField target_field(const ApertureGrid& grid, const GridRef& plane, double r, double wavelength);

PhasePolynomial ideal_phase_coefficients(double r, double wavelength, int max_order = 4);

struct ResidualPhase {
    Eigen::VectorXd phase;       // wrapped to (-pi, pi], piston removed
    std::vector<bool> included;  // false where either field vanishes
};

ResidualPhase residual_phase(const ComplexField& actual, const ComplexField& ideal);

// Radially unwrapped, amplitude^2-weighted least-squares fit over {1, rho^2, ..., rho^max_order}.
PhasePolynomial fit_phase_polynomial(const ComplexField& field, const ApertureGrid& grid, int max_order = 4);

struct CurvatureDiagnostics {
    double R_eq = 0.0;
    double delta_C = 0.0;
    double delta_a4 = 0.0;
};

CurvatureDiagnostics curvature_diagnostics(const PhasePolynomial& fit, double r, double wavelength);

double max_residual_phase(double delta_C, double D, double wavelength);

double wrms(const Eigen::VectorXd& residual, const Eigen::VectorXd& amplitude,
            const std::vector<bool>& included = {});

struct ClassicalDistances {
    double D = 0.0;
    double wavelength = 0.0;
    double phi = 0.0;
    double R_ray = 0.0;
    double R_low = 0.0;

    double delta_L_max(double r) const;
    double delta_Phi_max(double r) const;
    double delta_Phi_trunc(double r) const;
};

ClassicalDistances classical_distances(double D, double wavelength, double phi);

double effective_distance(double path_length, const std::vector<double>& layer_phases, double rx_phase,
                          double wavelength);

double wrap_phase(double phi);

}  // namespace nfsim
