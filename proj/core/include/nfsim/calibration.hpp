#pragma once

#include <map>
#include <string>
#include <vector>

#include "nfsim/config.hpp"

namespace nfsim {

struct CalibrationRow {
    int L = 1;
    double r = 0.0;
    double misalignment = 0.0;
    double transmission_efficiency = 1.0;
    int phase_bits = 0;
    double spacing_deviation = 0.0;
    double spacing = 0.0;  // nominal inter-layer gap
    double wavelength = 0.0;
    double D = 0.0;  // equivalent diameter
    double pitch = 0.0;
    double fwhm_lat = 0.0;
    double fwhm_ax = 0.0;
    double dl_lat = 0.0;
    double dl_ax = 0.0;
    double wrms = 0.0;
    double delta_C = 0.0;
    double delta_a4 = 0.0;
    double R_eq = 0.0;
    double weight_lat = 0.0;
    double weight_ax = 0.0;
};

struct CalibrationDataset {
    std::vector<CalibrationRow> rows;
};

// One imperfection setting of the calibration grid.
struct CalibrationSetting {
    double misalignment = 0.0;
    double transmission_efficiency = 1.0;
    int phase_bits = 0;
    double spacing_deviation = 0.0;
};

struct CalibrationGrid {
    std::vector<int> layer_counts;
    std::vector<double> distances;
    std::vector<CalibrationSetting> settings;
};

CalibrationDataset generate_dataset(const SystemConfig& config, const CalibrationGrid& grid);

// Model widths for one row; the axial bracket carries every axial inflation term.
double predict_lateral(const CalibrationRow& row, const CalibrationCoefficients& coeffs);
double predict_axial(const CalibrationRow& row, const CalibrationCoefficients& coeffs);

// Replaces the measured widths by the model prediction (round-trip fixtures).
CalibrationDataset synthesize_dataset(const CalibrationDataset& covariates, const CalibrationCoefficients& coeffs);

const std::vector<std::string>& fittable_coefficients();

struct CalibrationFit {
    CalibrationCoefficients coefficients;
    std::map<std::string, double> uncertainty;  // 1-sigma from the Gauss-Newton normal matrix
    double rms_lat = 0.0;                        // weighted residual RMS, lateral rows
    double rms_ax = 0.0;
    std::size_t rows_used = 0;
    int iterations = 0;
};

// Weighted least squares of (measured - predicted) / dl over the requested coefficients;
// everything not requested is held at the value in `start`.
CalibrationFit fit_coefficients(const CalibrationDataset& data, const std::vector<std::string>& which,
                                const CalibrationCoefficients& start = {});

std::string dataset_to_csv(const CalibrationDataset& data, const std::string& preamble = "");
CalibrationDataset dataset_from_csv(const std::string& text);

std::string coefficients_to_json(const CalibrationCoefficients& coeffs);
CalibrationCoefficients coefficients_from_json(const std::string& text);

}  // namespace nfsim
