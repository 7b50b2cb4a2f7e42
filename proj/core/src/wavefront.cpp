#include "nfsim/wavefront.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "nfsim/error.hpp"

namespace nfsim {

namespace {
constexpr double kPi = std::numbers::pi;
}

double wrap_phase(double phi) {
    double w = std::remainder(phi, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

double PhasePolynomial::coefficient(int order) const {
    auto it = coefficients.find(order);
    return it == coefficients.end() ? 0.0 : it->second;
}

ComplexField target_field(const ApertureGrid& grid, const GridRef& plane, double r, double wavelength) {
    if (!(r > 0)) throw ConfigError("target distance must be > 0");
    const double k0 = 2.0 * kPi / wavelength;
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXcd t(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const bool placed = plane && plane->size() == grid.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double rho = placed ? std::hypot(plane->points[u].x, plane->points[u].y) : grid.radius(u);
        t[i] = std::polar(scale, -k0 * (std::sqrt(rho * rho + r * r) - r));
    }
    return ComplexField(plane ? plane : grid.plane(0.0, "layer"), std::move(t));
}

PhasePolynomial ideal_phase_coefficients(double r, double wavelength, int max_order) {
    if (!(r > 0)) throw ConfigError("focal distance must be > 0");
    if (max_order != 2 && max_order != 4 && max_order != 6)
        throw ConfigError("max_order must be 2, 4 or 6");
    const double k0 = 2.0 * kPi / wavelength;
    PhasePolynomial p;
    p.coefficients[2] = -k0 / (2.0 * r);
    if (max_order >= 4) p.coefficients[4] = k0 / (8.0 * r * r * r);
    if (max_order >= 6) p.coefficients[6] = -k0 / (16.0 * std::pow(r, 5));
    return p;
}

ResidualPhase residual_phase(const ComplexField& actual, const ComplexField& ideal) {
    if (!same_grid(actual.grid, ideal.grid)) throw GridMismatchError("residual_phase: fields on different grids");
    const auto n = actual.values.size();
    ResidualPhase out;
    out.phase = Eigen::VectorXd::Zero(n);
    out.included.assign(static_cast<std::size_t>(n), false);
    cd acc(0.0, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        cd a = actual.values[i];
        cd b = ideal.values[i];
        if (std::abs(a) > 0 && std::abs(b) > 0) {
            out.included[static_cast<std::size_t>(i)] = true;
            acc += a * std::conj(b);
        }
    }
    double piston = std::arg(acc);
    for (Eigen::Index i = 0; i < n; ++i)
        if (out.included[static_cast<std::size_t>(i)])
            out.phase[i] = wrap_phase(std::arg(actual.values[i] * std::conj(ideal.values[i])) - piston);
    return out;
}

PhasePolynomial fit_phase_polynomial(const ComplexField& field, const ApertureGrid& grid, int max_order) {
    if (max_order < 2 || max_order % 2 != 0) throw ConfigError("max_order must be a positive even number");
    if (field.size() != grid.size()) throw GridMismatchError("fit_phase_polynomial: field does not match grid");
    const std::size_t N = grid.size();
    const int terms = max_order / 2;

    // fit in the field's own sample coordinates so a displaced plane is measured about the axis
    const bool placed = field.grid && field.grid->size() == N;
    std::vector<double> px(N), py(N), rad(N);
    for (std::size_t n = 0; n < N; ++n) {
        px[n] = placed ? field.grid->points[n].x : grid.positions()[n][0];
        py[n] = placed ? field.grid->points[n].y : grid.positions()[n][1];
        rad[n] = std::hypot(px[n], py[n]);
    }

    double amax = field.values.cwiseAbs().maxCoeff();
    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < N; ++n)
        if (std::abs(field.values[static_cast<Eigen::Index>(n)]) > 1e-12 * amax) active.push_back(n);

    std::set<double> radii;
    for (auto n : active) radii.insert(std::round(rad[n] / grid.pitch() * 1e6));
    if (radii.size() < static_cast<std::size_t>(terms + 1))
        throw NumericalError("phase fit is rank deficient: too few distinct radii");

    // radial unwrap within azimuthal wedges, starting from the innermost element
    auto center = *std::min_element(active.begin(), active.end(), [&](auto a, auto b) {
        return rad[a] < rad[b];
    });
    const double ref = std::arg(field.values[static_cast<Eigen::Index>(center)]);
    const int wedges = std::clamp(static_cast<int>(active.size() / 24), 1, 16);
    std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(wedges));
    for (auto n : active) {
        if (n == center) continue;
        double theta = std::atan2(py[n], px[n]) + kPi;
        int b = std::min(wedges - 1, static_cast<int>(theta / (2.0 * kPi) * wedges));
        bins[static_cast<std::size_t>(b)].push_back(n);
    }
    std::vector<double> unwrapped(N, 0.0);
    unwrapped[center] = ref;
    for (auto& bin : bins) {
        std::stable_sort(bin.begin(), bin.end(), [&](auto a, auto b) { return rad[a] < rad[b]; });
        double prev = ref;
        for (auto n : bin) {
            double psi = std::arg(field.values[static_cast<Eigen::Index>(n)]);
            prev += wrap_phase(psi - prev);
            unwrapped[n] = prev;
        }
    }

    double rmax = 0.0;
    for (auto n : active) rmax = std::max(rmax, rad[n]);
    const double scale = rmax > 0 ? rmax : 1.0;
    const auto rows = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd X(rows, terms + 1);
    Eigen::VectorXd y(rows);
    Eigen::VectorXd w(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        std::size_t n = active[static_cast<std::size_t>(i)];
        double u = rad[n] / scale;
        double a = std::abs(field.values[static_cast<Eigen::Index>(n)]);
        w[i] = a * a;
        double s = std::sqrt(w[i]);
        double up = 1.0;
        for (int m = 0; m <= terms; ++m) {
            X(i, m) = s * up;
            up *= u * u;
        }
        y[i] = s * unwrapped[n];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < terms + 1) throw NumericalError("phase fit is rank deficient");
    Eigen::VectorXd c = qr.solve(y);

    PhasePolynomial p;
    for (int m = 1; m <= terms; ++m) p.coefficients[2 * m] = c[m] / std::pow(scale, 2 * m);
    Eigen::VectorXd res = X * c - y;
    p.fit_residual_rms = std::sqrt(res.squaredNorm() / w.sum());
    p.valid_radius = rmax;
    return p;
}

CurvatureDiagnostics curvature_diagnostics(const PhasePolynomial& fit, double r, double wavelength) {
    if (!fit.has(2)) throw NumericalError("curvature diagnostics need an order-2 coefficient");
    double a2 = fit.coefficient(2);
    if (!(a2 < 0)) throw NumericalError("fitted wavefront is not converging (a2 >= 0)");
    const double k0 = 2.0 * kPi / wavelength;
    CurvatureDiagnostics d;
    d.R_eq = -k0 / (2.0 * a2);
    d.delta_C = 1.0 / d.R_eq - 1.0 / r;
    d.delta_a4 = std::abs(fit.coefficient(4) - k0 / (8.0 * r * r * r));
    return d;
}

double max_residual_phase(double delta_C, double D, double wavelength) {
    return kPi * D * D / (4.0 * wavelength) * std::abs(delta_C);
}

double wrms(const Eigen::VectorXd& residual, const Eigen::VectorXd& amplitude, const std::vector<bool>& included) {
    if (residual.size() != amplitude.size()) throw GridMismatchError("wrms: length mismatch");
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        if (!included.empty() && !included[static_cast<std::size_t>(i)]) continue;
        double a2 = amplitude[i] * amplitude[i];
        num += a2 * residual[i] * residual[i];
        den += a2;
    }
    if (!(den > 0)) throw NumericalError("wrms: no included element with nonzero amplitude");
    return std::sqrt(num / den);
}

double ClassicalDistances::delta_L_max(double r) const { return D * D / (8.0 * r); }

double ClassicalDistances::delta_Phi_max(double r) const { return kPi * D * D / (4.0 * wavelength * r); }

double ClassicalDistances::delta_Phi_trunc(double r) const {
    return kPi * std::pow(D, 4) / (64.0 * wavelength * r * r * r);
}

ClassicalDistances classical_distances(double D, double wavelength, double phi) {
    if (!(D > 0) || !(wavelength > 0) || !(phi > 0))
        throw ConfigError("classical distances need positive D, wavelength and phi");
    ClassicalDistances c;
    c.D = D;
    c.wavelength = wavelength;
    c.phi = phi;
    c.R_ray = 2.0 * D * D / wavelength;
    c.R_low = std::cbrt(kPi * std::pow(D, 4) / (64.0 * wavelength * phi));
    return c;
}

double effective_distance(double path_length, const std::vector<double>& layer_phases, double rx_phase,
                          double wavelength) {
    if (!(path_length > 0)) throw ConfigError("path length must be > 0");
    const double k0 = 2.0 * kPi / wavelength;
    double total = std::accumulate(layer_phases.begin(), layer_phases.end(), 0.0) + rx_phase;
    return path_length + total / k0;
}

}  // namespace nfsim
