#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/config.hpp"

namespace nfsim {

using cd = std::complex<double>;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// An ordered set of sample points; propagators and fields refer to these by shared pointer.
struct SampleSet {
    std::string label;
    std::vector<Vec3> points;
    std::size_t size() const { return points.size(); }
};

using GridRef = std::shared_ptr<const SampleSet>;

bool same_grid(const GridRef& a, const GridRef& b);
GridRef make_samples(std::vector<Vec3> points, std::string label);

class ApertureGrid {
public:
    ApertureGrid(double pitch, double diameter);

    double pitch() const { return pitch_; }
    double diameter() const { return diameter_; }
    int half_extent() const { return half_extent_; }
    std::size_t size() const { return positions_.size(); }

    const std::vector<std::array<double, 2>>& positions() const { return positions_; }
    const std::vector<std::array<int, 2>>& lattice_indices() const { return indices_; }
    // Over the full (2M+1)^2 lattice, row-major by y then x.
    const std::vector<bool>& active_mask() const { return mask_; }

    // Active element index of lattice point (ix, iy), or -1.
    long element_index(int ix, int iy) const;
    double radius(std::size_t n) const;

    GridRef plane(double z, std::string label = "plane") const;

private:
    double pitch_;
    double diameter_;
    int half_extent_;
    std::vector<std::array<double, 2>> positions_;
    std::vector<std::array<int, 2>> indices_;
    std::vector<bool> mask_;
    std::vector<long> lookup_;
};

using ApertureRef = std::shared_ptr<const ApertureGrid>;

ApertureRef build_aperture(const SystemConfig& config);
double equivalent_diameter(const ApertureGrid& grid);

struct ComplexField {
    GridRef grid;
    Eigen::VectorXcd values;

    ComplexField() = default;
    ComplexField(GridRef g, Eigen::VectorXcd v);
    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Layer planes: last layer at z = 0, earlier layers at negative z.
std::vector<GridRef> layer_planes(const ApertureGrid& grid, const std::vector<double>& spacings);

ComplexField feed_field(const FeedModel& feed, const ApertureGrid& grid, double wavelength,
                        GridRef plane = nullptr);

}  // namespace nfsim
