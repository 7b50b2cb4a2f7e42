#include "nfsim/propagation.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "nfsim/error.hpp"
#include "nfsim/parallel.hpp"

namespace nfsim {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Kind = LinearPropagator::Kind;

namespace {

class ExplicitImpl final : public LinearPropagator::Impl {
public:
    explicit ExplicitImpl(std::shared_ptr<const MatrixXcd> m) : m_(std::move(m)) {}
    Kind kind() const override { return Kind::explicit_matrix; }
    VectorXcd apply(const VectorXcd& in) const override { return (*m_) * in; }
    VectorXcd apply_adjoint(const VectorXcd& in) const override { return m_->adjoint() * in; }
    MatrixXcd dense() const override { return *m_; }

private:
    std::shared_ptr<const MatrixXcd> m_;
};

class DiagonalImpl final : public LinearPropagator::Impl {
public:
    explicit DiagonalImpl(VectorXcd d) : d_(std::move(d)) {}
    Kind kind() const override { return Kind::diagonal; }
    VectorXcd apply(const VectorXcd& in) const override { return d_.cwiseProduct(in); }
    VectorXcd apply_adjoint(const VectorXcd& in) const override {
        return d_.conjugate().cwiseProduct(in);
    }
    MatrixXcd dense() const override { return d_.asDiagonal(); }

private:
    VectorXcd d_;
};

class CompositeImpl final : public LinearPropagator::Impl {
public:
    explicit CompositeImpl(std::vector<LinearPropagator> ops) : ops_(std::move(ops)) {}
    Kind kind() const override { return Kind::composite; }
    VectorXcd apply(const VectorXcd& in) const override {
        VectorXcd v = in;
        for (const auto& op : ops_) v = op.apply(v);
        return v;
    }
    VectorXcd apply_adjoint(const VectorXcd& in) const override {
        VectorXcd v = in;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) v = it->apply_adjoint(v);
        return v;
    }
    MatrixXcd dense() const override {
        MatrixXcd m = ops_.front().dense();
        for (std::size_t i = 1; i < ops_.size(); ++i) {
            if (ops_[i].kind() == Kind::diagonal) {
                VectorXcd d = ops_[i].apply(VectorXcd::Ones(static_cast<Eigen::Index>(ops_[i].cols())));
                m = d.asDiagonal() * m;
            } else {
                m = ops_[i].dense() * m;
            }
        }
        return m;
    }

private:
    std::vector<LinearPropagator> ops_;
};

// Row-wise kernel sums in fixed source order; rows are independent so the result does not
// depend on the worker count.
template <class Kernel>
class KernelImpl final : public LinearPropagator::Impl {
public:
    KernelImpl(Kind kind, GridRef src, GridRef dst, Kernel kernel)
        : kind_(kind), src_(std::move(src)), dst_(std::move(dst)), kernel_(std::move(kernel)) {}
    Kind kind() const override { return kind_; }
    VectorXcd apply(const VectorXcd& in) const override {
        VectorXcd out(static_cast<Eigen::Index>(dst_->size()));
        parallel_for(dst_->size(), [&](std::size_t q) {
            cd acc(0.0, 0.0);
            const Vec3& a = dst_->points[q];
            for (std::size_t n = 0; n < src_->size(); ++n)
                acc += kernel_(a, src_->points[n]) * in[static_cast<Eigen::Index>(n)];
            out[static_cast<Eigen::Index>(q)] = acc;
        });
        return out;
    }
    VectorXcd apply_adjoint(const VectorXcd& in) const override {
        VectorXcd out(static_cast<Eigen::Index>(src_->size()));
        parallel_for(src_->size(), [&](std::size_t n) {
            cd acc(0.0, 0.0);
            const Vec3& b = src_->points[n];
            for (std::size_t q = 0; q < dst_->size(); ++q)
                acc += std::conj(kernel_(dst_->points[q], b)) * in[static_cast<Eigen::Index>(q)];
            out[static_cast<Eigen::Index>(n)] = acc;
        });
        return out;
    }
    MatrixXcd dense() const override {
        MatrixXcd m(static_cast<Eigen::Index>(dst_->size()), static_cast<Eigen::Index>(src_->size()));
        for (std::size_t q = 0; q < dst_->size(); ++q)
            for (std::size_t n = 0; n < src_->size(); ++n)
                m(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n)) =
                    kernel_(dst_->points[q], src_->points[n]);
        return m;
    }

private:
    Kind kind_;
    GridRef src_;
    GridRef dst_;
    Kernel kernel_;
};

struct GreenKernel {
    double k0;
    cd operator()(const Vec3& a, const Vec3& b) const { return green_function(a, b, k0); }
};

struct FresnelKernel {
    cd scale;       // e^{-jkd} / (j lambda d) * p^2
    double chirp;   // k / (2 d)
    cd operator()(const Vec3& a, const Vec3& b) const {
        double dx = a.x - b.x;
        double dy = a.y - b.y;
        return scale * std::polar(1.0, -chirp * (dx * dx + dy * dy));
    }
};

void check_coincident(const GridRef& src, const GridRef& dst) {
    for (std::size_t q = 0; q < dst->size(); ++q) {
        const Vec3& a = dst->points[q];
        for (std::size_t n = 0; n < src->size(); ++n) {
            const Vec3& b = src->points[n];
            if (a.x == b.x && a.y == b.y && a.z == b.z)
                throw SingularityError("coincident points: " + dst->label + "[" + std::to_string(q) +
                                           "] and " + src->label + "[" + std::to_string(n) + "]",
                                       q, n);
        }
    }
}

void require_grid(const GridRef& expected, const GridRef& got, const char* what) {
    if (!same_grid(expected, got))
        throw GridMismatchError(std::string(what) + ": expected grid '" +
                                (expected ? expected->label : "?") + "', got '" +
                                (got ? got->label : "?") + "'");
}

}  // namespace

LinearPropagator::LinearPropagator(GridRef src, GridRef dst, std::shared_ptr<const Impl> impl)
    : src_(std::move(src)), dst_(std::move(dst)), impl_(std::move(impl)) {
    if (!src_ || !dst_ || !impl_) throw GridMismatchError("propagator needs source, target and kernel");
}

LinearPropagator LinearPropagator::from_matrix(GridRef src, GridRef dst, MatrixXcd matrix) {
    if (static_cast<std::size_t>(matrix.rows()) != dst->size() ||
        static_cast<std::size_t>(matrix.cols()) != src->size())
        throw GridMismatchError("matrix shape does not match grids");
    auto m = std::make_shared<const MatrixXcd>(std::move(matrix));
    return LinearPropagator(std::move(src), std::move(dst), std::make_shared<ExplicitImpl>(std::move(m)));
}

LinearPropagator LinearPropagator::diagonal(GridRef grid, VectorXcd coefficients) {
    if (static_cast<std::size_t>(coefficients.size()) != grid->size())
        throw GridMismatchError("diagonal length does not match grid");
    auto impl = std::make_shared<DiagonalImpl>(std::move(coefficients));
    return LinearPropagator(grid, grid, std::move(impl));
}

LinearPropagator LinearPropagator::compose(const std::vector<LinearPropagator>& ops) {
    if (ops.empty()) throw GridMismatchError("empty operator chain");
    if (ops.size() == 1) return ops.front();
    for (std::size_t i = 1; i < ops.size(); ++i)
        require_grid(ops[i].src(), ops[i - 1].dst(), "operator chain");
    return LinearPropagator(ops.front().src(), ops.back().dst(), std::make_shared<CompositeImpl>(ops));
}

VectorXcd LinearPropagator::apply(const VectorXcd& in) const {
    if (static_cast<std::size_t>(in.size()) != cols())
        throw GridMismatchError("input length does not match source grid '" + src_->label + "'");
    return impl_->apply(in);
}

VectorXcd LinearPropagator::apply_adjoint(const VectorXcd& in) const {
    if (static_cast<std::size_t>(in.size()) != rows())
        throw GridMismatchError("input length does not match target grid '" + dst_->label + "'");
    return impl_->apply_adjoint(in);
}

VectorXcd LinearPropagator::apply_transpose(const VectorXcd& in) const {
    return apply_adjoint(in.conjugate()).conjugate();
}

MatrixXcd LinearPropagator::dense() const { return impl_->dense(); }

LinearPropagator LinearPropagator::rebind(GridRef src, GridRef dst) const {
    if (src->size() != cols() || dst->size() != rows())
        throw GridMismatchError("rebind requires grids of identical sizes");
    if (kind() == Kind::matrix_free_green || kind() == Kind::fresnel_kernel)
        throw GridMismatchError("matrix-free kernels are bound to their geometry");
    return LinearPropagator(std::move(src), std::move(dst), impl_);
}

ComplexField apply(const LinearPropagator& op, const ComplexField& field) {
    require_grid(op.src(), field.grid, "apply");
    return ComplexField(op.dst(), op.apply(field.values));
}

cd green_function(const Vec3& r, const Vec3& r_src, double k0) {
    double dx = r.x - r_src.x;
    double dy = r.y - r_src.y;
    double dz = r.z - r_src.z;
    double R = std::sqrt(dx * dx + dy * dy + dz * dz);
    return std::polar(1.0 / (4.0 * std::numbers::pi * R), -k0 * R);
}

LinearPropagator green_matrix(const GridRef& src, const GridRef& dst, double wavelength, OperatorForm form) {
    check_coincident(src, dst);
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    bool explicit_form = form == OperatorForm::explicit_matrix ||
                         (form == OperatorForm::automatic && src->size() * dst->size() <= kExplicitEntryLimit);
    if (explicit_form) {
        MatrixXcd m(static_cast<Eigen::Index>(dst->size()), static_cast<Eigen::Index>(src->size()));
        parallel_for(dst->size(), [&](std::size_t q) {
            for (std::size_t n = 0; n < src->size(); ++n)
                m(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n)) =
                    green_function(dst->points[q], src->points[n], k0);
        });
        return LinearPropagator::from_matrix(src, dst, std::move(m));
    }
    auto impl = std::make_shared<KernelImpl<GreenKernel>>(Kind::matrix_free_green, src, dst, GreenKernel{k0});
    return LinearPropagator(src, dst, std::move(impl));
}

LinearPropagator fresnel_operator(const GridRef& src, const GridRef& dst, double distance,
                                  double wavelength, double pitch) {
    if (!(distance > 0)) throw ConfigError("Fresnel propagation distance must be > 0");
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    cd pref = std::polar(1.0, -k0 * distance) / (cd(0.0, 1.0) * wavelength * distance);
    FresnelKernel kernel{pref * pitch * pitch, k0 / (2.0 * distance)};
    auto impl = std::make_shared<KernelImpl<FresnelKernel>>(Kind::fresnel_kernel, src, dst, kernel);
    return LinearPropagator(src, dst, std::move(impl));
}

ComplexField fresnel_propagate(const ComplexField& field, double distance, double wavelength, double pitch) {
    if (!(distance > 0)) throw ConfigError("Fresnel propagation distance must be > 0");
    std::vector<Vec3> pts = field.grid->points;
    for (auto& p : pts) p.z += distance;
    GridRef dst = make_samples(std::move(pts), field.grid->label + "+fresnel");
    return apply(fresnel_operator(field.grid, dst, distance, wavelength, pitch), field);
}

cd fresnel_transfer(double fx, double fy, double distance, double wavelength) {
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    double phase = -k0 * distance - std::numbers::pi * wavelength * distance * (fx * fx + fy * fy);
    return std::polar(1.0, phase);
}

LinearPropagator cascade(const LayerStack& stack, const std::vector<LinearPropagator>& interlayer) {
    const std::size_t L = stack.layer_count();
    if (L == 0) throw GridMismatchError("cascade of an empty stack");
    if (interlayer.size() + 1 != L)
        throw GridMismatchError("cascade needs L - 1 interlayer operators (got " +
                                std::to_string(interlayer.size()) + " for L = " + std::to_string(L) + ")");
    if (stack.planes.size() != L) throw GridMismatchError("stack planes do not match its layers");
    std::vector<LinearPropagator> ops;
    ops.reserve(2 * L - 1);
    for (std::size_t l = 0; l < L; ++l) {
        ops.push_back(LinearPropagator::diagonal(stack.planes[l], stack.layers[l]));
        if (l + 1 < L) {
            require_grid(stack.planes[l], interlayer[l].src(), "cascade interlayer source");
            require_grid(stack.planes[l + 1], interlayer[l].dst(), "cascade interlayer target");
            ops.push_back(interlayer[l]);
        }
    }
    return LinearPropagator::compose(ops);
}

std::vector<LinearPropagator> interlayer_operators(const LayerStack& stack, double wavelength,
                                                   PropagationEngine engine) {
    std::vector<LinearPropagator> ops;
    std::map<std::array<double, 3>, std::size_t> by_spacing;
    for (std::size_t l = 0; l + 1 < stack.layer_count(); ++l) {
        const GridRef& a = stack.planes[l];
        const GridRef& b = stack.planes[l + 1];
        double d = stack.spacings[l];
        std::array<double, 3> key = {d, 0.0, 0.0};
        if (!stack.offsets.empty())
            key = {d, stack.offsets[l + 1][0] - stack.offsets[l][0], stack.offsets[l + 1][1] - stack.offsets[l][1]};
        auto it = by_spacing.find(key);
        if (it != by_spacing.end() && ops[it->second].kind() == Kind::explicit_matrix) {
            ops.push_back(ops[it->second].rebind(a, b));
            continue;
        }
        if (engine == PropagationEngine::green)
            ops.push_back(green_matrix(a, b, wavelength));
        else
            ops.push_back(fresnel_operator(a, b, d, wavelength, stack.grid->pitch()));
        by_spacing.emplace(key, ops.size() - 1);
    }
    return ops;
}

std::vector<double> ObservationGrid::lateral_coordinates() const {
    std::vector<double> x(lateral_count);
    for (std::size_t i = 0; i < lateral_count; ++i) x[i] = samples->points[i].x;
    return x;
}

std::vector<double> ObservationGrid::axial_coordinates() const {
    std::vector<double> z(axial_count);
    for (std::size_t i = 0; i < axial_count; ++i) z[i] = samples->points[lateral_count + i].z - z0;
    return z;
}

ObservationGrid make_observation_grid(double r, double lateral_half_width, double lateral_step,
                                      double axial_lo, double axial_hi, double axial_step, double z0) {
    if (!(r > 0) || !(lateral_step > 0) || !(axial_step > 0) || !(axial_lo <= r) || !(axial_hi >= r))
        throw ConfigError("invalid observation window");
    ObservationGrid g;
    g.r = r;
    g.z0 = z0;
    g.lateral_step = lateral_step;
    g.axial_step = axial_step;
    auto M = static_cast<long>(std::floor(lateral_half_width / lateral_step + 1e-9));
    auto jlo = static_cast<long>(std::floor((r - axial_lo) / axial_step + 1e-9));
    auto jhi = static_cast<long>(std::floor((axial_hi - r) / axial_step + 1e-9));
    g.lateral_half_width = static_cast<double>(M) * lateral_step;
    g.axial_lo = r - static_cast<double>(jlo) * axial_step;
    g.axial_hi = r + static_cast<double>(jhi) * axial_step;
    std::vector<Vec3> pts;
    for (long i = -M; i <= M; ++i) pts.push_back({static_cast<double>(i) * lateral_step, 0.0, z0 + r});
    g.lateral_count = pts.size();
    g.lateral_focus = static_cast<std::size_t>(M);
    for (long j = -jlo; j <= jhi; ++j) pts.push_back({0.0, 0.0, z0 + r + static_cast<double>(j) * axial_step});
    g.axial_count = pts.size() - g.lateral_count;
    g.axial_focus = static_cast<std::size_t>(jlo);
    g.samples = make_samples(std::move(pts), "observation");
    return g;
}

LinearPropagator focusing_operator(const LinearPropagator& t_sim, const ObservationGrid& obs, double wavelength) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (const auto& p : t_sim.dst()->points) zmax = std::max(zmax, p.z);
    for (const auto& p : obs.samples->points)
        if (!(p.z > zmax)) throw ConfigError("observation samples must lie beyond the last layer plane");
    LinearPropagator h = green_matrix(t_sim.dst(), obs.samples, wavelength);
    return LinearPropagator::compose({t_sim, h});
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw NumericalError("operator dump truncated");
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_matrix_dump(const std::filesystem::path& path, const MatrixXcd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write operator dump '" + path.string() + "'");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    put_le<std::uint64_t>(out, kMatrixDumpMagic);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            put_le<double>(out, m(i, j).real());
            put_le<double>(out, m(i, j).imag());
        }
}

MatrixXcd read_matrix_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read operator dump '" + path.string() + "'");
    auto rows = get_le<std::uint32_t>(in);
    auto cols = get_le<std::uint32_t>(in);
    auto magic = get_le<std::uint64_t>(in);
    if (magic != kMatrixDumpMagic) throw NumericalError("operator dump has a bad magic number");
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    std::uint64_t expected = 16 + std::uint64_t{rows} * cols * 16;
    if (ec || size != expected) throw NumericalError("operator dump size does not match its header");
    MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double re = get_le<double>(in);
            double im = get_le<double>(in);
            m(i, j) = cd(re, im);
        }
    return m;
}

}  // namespace nfsim
