#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/config.hpp"
#include "nfsim/geometry.hpp"
#include "nfsim/stack.hpp"

namespace nfsim {

inline constexpr std::size_t kExplicitEntryLimit = std::size_t{1} << 22;

class LinearPropagator {
public:
    enum class Kind { explicit_matrix, matrix_free_green, fresnel_kernel, diagonal, composite };

    struct Impl {
        virtual ~Impl() = default;
        virtual Kind kind() const = 0;
        virtual Eigen::VectorXcd apply(const Eigen::VectorXcd& in) const = 0;
        virtual Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& in) const = 0;
        virtual Eigen::MatrixXcd dense() const = 0;
    };

    LinearPropagator(GridRef src, GridRef dst, std::shared_ptr<const Impl> impl);

    static LinearPropagator from_matrix(GridRef src, GridRef dst, Eigen::MatrixXcd matrix);
    static LinearPropagator diagonal(GridRef grid, Eigen::VectorXcd coefficients);
    // Applies ops in sequence: ops[0] first.
    static LinearPropagator compose(const std::vector<LinearPropagator>& ops);

    const GridRef& src() const { return src_; }
    const GridRef& dst() const { return dst_; }
    Kind kind() const { return impl_->kind(); }
    std::size_t rows() const { return dst_->size(); }
    std::size_t cols() const { return src_->size(); }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& in) const;
    Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& in) const;
    Eigen::VectorXcd apply_transpose(const Eigen::VectorXcd& in) const;
    Eigen::MatrixXcd dense() const;

    // Same operator between a different pair of grids of identical sizes.
    LinearPropagator rebind(GridRef src, GridRef dst) const;

private:
    GridRef src_;
    GridRef dst_;
    std::shared_ptr<const Impl> impl_;
};

ComplexField apply(const LinearPropagator& op, const ComplexField& field);

cd green_function(const Vec3& r, const Vec3& r_src, double k0);

enum class OperatorForm { automatic, explicit_matrix, matrix_free };

LinearPropagator green_matrix(const GridRef& src, const GridRef& dst, double wavelength,
                              OperatorForm form = OperatorForm::automatic);

// Discrete Fresnel integral between two parallel planes sharing the lattice pitch.
LinearPropagator fresnel_operator(const GridRef& src, const GridRef& dst, double distance,
                                  double wavelength, double pitch);

// Propagates a planar field by distance; the output grid is the source extent at z + distance.
ComplexField fresnel_propagate(const ComplexField& field, double distance, double wavelength,
                               double pitch);

cd fresnel_transfer(double fx, double fy, double distance, double wavelength);

// Gamma_L G_{L-1} ... G_1 Gamma_1; interlayer[l] maps plane l to plane l+1.
LinearPropagator cascade(const LayerStack& stack, const std::vector<LinearPropagator>& interlayer);

// One propagator per gap; gaps with bitwise-equal spacing share their kernel.
std::vector<LinearPropagator> interlayer_operators(const LayerStack& stack, double wavelength,
                                                   PropagationEngine engine = PropagationEngine::green);

struct ObservationGrid {
    GridRef samples;
    double r = 0.0;
    double z0 = 0.0;  // plane of the last layer
    std::size_t lateral_count = 0;
    std::size_t axial_count = 0;
    std::size_t lateral_focus = 0;  // index of x = 0 within the lateral cut
    std::size_t axial_focus = 0;    // index of z = r within the axial cut
    double lateral_step = 0.0;
    double lateral_half_width = 0.0;
    double axial_step = 0.0;
    double axial_lo = 0.0;
    double axial_hi = 0.0;

    std::vector<double> lateral_coordinates() const;  // x
    std::vector<double> axial_coordinates() const;    // z - z0
};

// Lateral cut {(x, 0, r)} then axial cut {(0, 0, z)}; both contain the focal point.
ObservationGrid make_observation_grid(double r, double lateral_half_width, double lateral_step,
                                      double axial_lo, double axial_hi, double axial_step,
                                      double z0 = 0.0);

LinearPropagator focusing_operator(const LinearPropagator& t_sim, const ObservationGrid& obs,
                                   double wavelength);

// Binary dump: u32 rows, u32 cols, u64 magic, then row-major interleaved re/im doubles.
inline constexpr std::uint64_t kMatrixDumpMagic = 0x53494D4F50455231ULL;
void write_matrix_dump(const std::filesystem::path& path, const Eigen::MatrixXcd& m);
Eigen::MatrixXcd read_matrix_dump(const std::filesystem::path& path);

}  // namespace nfsim
