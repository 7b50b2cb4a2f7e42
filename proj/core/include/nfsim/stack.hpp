#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/geometry.hpp"

namespace nfsim {

// Per-layer complex transmission coefficients on one shared aperture lattice.
struct LayerStack {
    ApertureRef grid;
    std::vector<double> spacings;           // L - 1 gaps
    std::vector<Eigen::VectorXcd> layers;   // L coefficient vectors
    std::vector<GridRef> planes;            // L planes, last at z = 0
    std::vector<std::array<double, 2>> offsets;  // lateral displacement per layer; empty when aligned

    LayerStack() = default;
    LayerStack(ApertureRef grid, std::vector<double> spacings, std::vector<Eigen::VectorXcd> layers);

    static LayerStack phase_only(ApertureRef grid, std::vector<double> spacings,
                                 const std::vector<Eigen::VectorXd>& phases);

    std::size_t layer_count() const { return layers.size(); }
    Eigen::VectorXd phases(std::size_t l) const;
    Eigen::VectorXd amplitudes(std::size_t l) const;
    void rebuild_planes();
    void set_offsets(std::vector<std::array<double, 2>> xy);
};

}  // namespace nfsim
