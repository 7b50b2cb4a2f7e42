#include "nfsim/geometry.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "nfsim/error.hpp"

namespace nfsim {

bool same_grid(const GridRef& a, const GridRef& b) {
    if (a == b) return true;
    if (!a || !b || a->size() != b->size()) return false;
    for (std::size_t i = 0; i < a->size(); ++i) {
        const Vec3& p = a->points[i];
        const Vec3& q = b->points[i];
        if (p.x != q.x || p.y != q.y || p.z != q.z) return false;
    }
    return true;
}

GridRef make_samples(std::vector<Vec3> points, std::string label) {
    auto s = std::make_shared<SampleSet>();
    s->label = std::move(label);
    s->points = std::move(points);
    return s;
}

ApertureGrid::ApertureGrid(double pitch, double diameter) : pitch_(pitch), diameter_(diameter) {
    if (!(pitch > 0) || !(diameter > 0))
        throw ConfigError("aperture requires positive pitch and diameter");
    const double radius = diameter / 2.0;
    half_extent_ = static_cast<int>(std::floor(radius / pitch + 1e-9));
    const int M = half_extent_;
    const int W = 2 * M + 1;
    mask_.assign(static_cast<std::size_t>(W) * W, false);
    lookup_.assign(mask_.size(), -1);
    const double r2 = radius * radius * (1.0 + 1e-12);
    for (int iy = -M; iy <= M; ++iy) {
        for (int ix = -M; ix <= M; ++ix) {
            double x = ix * pitch;
            double y = iy * pitch;
            if (x * x + y * y <= r2) {
                std::size_t cell = static_cast<std::size_t>((iy + M) * W + (ix + M));
                mask_[cell] = true;
                lookup_[cell] = static_cast<long>(positions_.size());
                positions_.push_back({x, y});
                indices_.push_back({ix, iy});
            }
        }
    }
    if (positions_.empty())
        throw ConfigError("aperture has no active elements (pitch exceeds diameter)");
}

long ApertureGrid::element_index(int ix, int iy) const {
    const int M = half_extent_;
    if (ix < -M || ix > M || iy < -M || iy > M) return -1;
    return lookup_[static_cast<std::size_t>((iy + M) * (2 * M + 1) + (ix + M))];
}

double ApertureGrid::radius(std::size_t n) const {
    return std::hypot(positions_[n][0], positions_[n][1]);
}

GridRef ApertureGrid::plane(double z, std::string label) const {
    std::vector<Vec3> pts;
    pts.reserve(positions_.size());
    for (const auto& p : positions_) pts.push_back({p[0], p[1], z});
    return make_samples(std::move(pts), std::move(label));
}

ApertureRef build_aperture(const SystemConfig& config) {
    if (config.element_pitch > config.aperture_diameter)
        throw ConfigError("element pitch exceeds aperture diameter: no active elements");
    return std::make_shared<const ApertureGrid>(config.element_pitch, config.aperture_diameter);
}

double equivalent_diameter(const ApertureGrid& grid) {
    const double n = static_cast<double>(grid.size());
    return 2.0 * std::sqrt(n * grid.pitch() * grid.pitch() / std::numbers::pi);
}

ComplexField::ComplexField(GridRef g, Eigen::VectorXcd v) : grid(std::move(g)), values(std::move(v)) {
    if (!grid) throw GridMismatchError("field without grid");
    if (static_cast<std::size_t>(values.size()) != grid->size())
        throw GridMismatchError("field length " + std::to_string(values.size()) +
                                " does not match grid '" + grid->label + "' of " +
                                std::to_string(grid->size()) + " samples");
    if (!values.allFinite()) throw NumericalError("non-finite field values on " + grid->label);
}

std::vector<GridRef> layer_planes(const ApertureGrid& grid, const std::vector<double>& spacings) {
    const std::size_t L = spacings.size() + 1;
    std::vector<double> z(L, 0.0);
    for (std::size_t l = L - 1; l-- > 0;) z[l] = z[l + 1] - spacings[l];
    std::vector<GridRef> planes;
    planes.reserve(L);
    for (std::size_t l = 0; l < L; ++l) planes.push_back(grid.plane(z[l], "layer" + std::to_string(l + 1)));
    return planes;
}

ComplexField feed_field(const FeedModel& feed, const ApertureGrid& grid, double wavelength,
                        GridRef plane) {
    if (!plane) plane = grid.plane(0.0, "layer1");
    if (plane->size() != grid.size()) throw GridMismatchError("feed plane does not match aperture");
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    Eigen::VectorXcd e(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t n = 0; n < grid.size(); ++n) {
        auto i = static_cast<Eigen::Index>(n);
        if (feed.kind == FeedKind::uniform_plane) {
            e[i] = cd(1.0, 0.0);
        } else {
            double rho = grid.radius(n);
            double R = std::sqrt(rho * rho + feed.feed_distance * feed.feed_distance);
            e[i] = std::polar(1.0 / R, -k0 * R);
        }
    }
    e *= std::sqrt(feed.power) / e.norm();
    return ComplexField(std::move(plane), std::move(e));
}

}  // namespace nfsim
