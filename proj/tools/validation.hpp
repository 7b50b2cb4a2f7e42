#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/config.hpp"

namespace nfsim::cli {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct ValidationOptions {
    double tolerance_scale = 1.0;
    std::optional<std::string> check_dump;
    std::optional<std::string> write_dump;
};

// Operator the dump check compares against: Green's matrix across the first gap of the scenario.
Eigen::MatrixXcd reference_dump_operator(const SystemConfig& config);

std::vector<CheckResult> run_validation(const SystemConfig& config, const ValidationOptions& options);

}  // namespace nfsim::cli
