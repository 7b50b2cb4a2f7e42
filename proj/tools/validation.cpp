#include "validation.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nfsim/error.hpp"
#include "nfsim/geometry.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/propagation.hpp"
#include "nfsim/wavefront.hpp"

namespace nfsim::cli {

namespace {

constexpr double kPi = std::numbers::pi;

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

CheckResult check(std::string name, double value, double tol, double scale, std::string note = "") {
    CheckResult c;
    c.name = std::move(name);
    c.value = value;
    c.tolerance = tol * scale;
    c.pass = std::isfinite(value) && value <= c.tolerance;
    c.note = std::move(note);
    return c;
}

GridRef random_points(std::size_t n, double z, double extent, std::mt19937_64& gen, const std::string& label) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {extent * (uniform01(gen) - 0.5), extent * (uniform01(gen) - 0.5), z};
    return make_samples(std::move(pts), label);
}

double rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).norm() / b.norm(); }

Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& gen) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cd(uniform01(gen) - 0.5, uniform01(gen) - 0.5);
    return v;
}

}  // namespace

Eigen::MatrixXcd reference_dump_operator(const SystemConfig& config) {
    ApertureRef grid = build_aperture(config);
    double d = config.layer_spacings.empty() ? 5.0 * config.wavelength : config.layer_spacings.front();
    auto planes = layer_planes(*grid, {d});
    return green_matrix(planes[0], planes[1], config.wavelength, OperatorForm::explicit_matrix).dense();
}

std::vector<CheckResult> run_validation(const SystemConfig& config, const ValidationOptions& opt) {
    const double s = opt.tolerance_scale;
    const double lambda = config.wavelength;
    std::vector<CheckResult> out;
    std::mt19937_64 gen(20240611);

    {
        ClassicalDistances c = classical_distances(0.3, 0.010714, kPi / 8.0);
        out.push_back(check("rayleigh_edge_phase", std::abs(c.delta_Phi_max(c.R_ray) - kPi / 8.0), 1e-15, s));
        out.push_back(check("rayleigh_distance_d03", std::abs(c.R_ray - 16.800448011946985), 1e-12, s));
        ClassicalDistances c28 = classical_distances(0.3, kSpeedOfLight / 28e9, kPi / 8.0);
        out.push_back(check("r_low_pi_over_8_28ghz", std::abs(c28.R_low - 0.4556), 1e-4, s));
        out.push_back(check("truncation_at_r_low", std::abs(c.delta_Phi_trunc(c.R_low) - kPi / 8.0), 1e-14, s));
    }

    {
        GridRef a = random_points(64, 0.0, 0.1, gen, "a");
        GridRef b = random_points(48, 0.07, 0.1, gen, "b");
        Eigen::MatrixXcd ab = green_matrix(a, b, lambda).dense();
        Eigen::MatrixXcd ba = green_matrix(b, a, lambda).dense();
        out.push_back(check("green_reciprocity", (ab - ba.transpose()).cwiseAbs().maxCoeff(), 0.0, s));
        Eigen::MatrixXcd mf = green_matrix(a, b, lambda, OperatorForm::matrix_free).dense();
        out.push_back(check("green_explicit_vs_matrix_free", rel(mf, ab), 1e-12, s));
    }

    {
        auto grid = std::make_shared<const ApertureGrid>(lambda / 2.0, 4.0 * lambda);
        std::vector<double> gaps = {3.0 * lambda, 4.0 * lambda, 3.0 * lambda};
        std::vector<Eigen::VectorXcd> layers;
        for (int l = 0; l < 4; ++l) {
            Eigen::VectorXcd g(static_cast<Eigen::Index>(grid->size()));
            for (Eigen::Index n = 0; n < g.size(); ++n) g[n] = std::polar(uniform01(gen), 2.0 * kPi * uniform01(gen));
            layers.push_back(g);
        }
        LayerStack stack(grid, gaps, layers);
        auto ops = interlayer_operators(stack, lambda);
        Eigen::MatrixXcd dense = layers[0].asDiagonal();
        for (std::size_t l = 0; l < 3; ++l) {
            Eigen::MatrixXcd g = green_matrix(stack.planes[l], stack.planes[l + 1], lambda).dense();
            dense = layers[l + 1].asDiagonal() * (g * dense);
        }
        Eigen::VectorXcd x = random_vector(static_cast<Eigen::Index>(grid->size()), gen);
        Eigen::VectorXcd y = cascade(stack, ops).apply(x);
        Eigen::VectorXcd y_ref = dense * x;
        out.push_back(check("cascade_vs_dense_product", (y - y_ref).norm() / y_ref.norm(), 1e-12, s));
    }

    {
        const double p = lambda / 2.0;
        const double k0 = 2.0 * kPi / lambda;
        double worst = 0.0;
        for (double d : {0.25, 0.5, 1.0}) {
            std::vector<Vec3> dst;
            const int M = static_cast<int>(std::floor(0.2 * d / p));
            for (int i = -M; i <= M; ++i) dst.push_back({i * p, 0.5 * i * p, d});
            GridRef src = make_samples({{0.0, 0.0, 0.0}}, "impulse");
            GridRef obs = make_samples(dst, "obs");
            Eigen::VectorXcd u = fresnel_operator(src, obs, d, lambda, p).apply(Eigen::VectorXcd::Ones(1));
            for (std::size_t q = 0; q < dst.size(); ++q) {
                double rho2 = dst[q].x * dst[q].x + dst[q].y * dst[q].y;
                cd ref = std::polar(1.0, -k0 * d) / (cd(0.0, 1.0) * lambda * d) * std::polar(1.0, -k0 * rho2 / (2.0 * d)) * p * p;
                worst = std::max(worst, std::abs(u[static_cast<Eigen::Index>(q)] - ref) / std::abs(ref));
            }
        }
        out.push_back(check("fresnel_impulse_closed_form", worst, 1e-9, s));
    }

    {
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            double fx = 400.0 * (uniform01(gen) - 0.5), fy = 400.0 * (uniform01(gen) - 0.5);
            worst = std::max(worst, std::abs(std::abs(fresnel_transfer(fx, fy, 0.7, lambda)) - 1.0));
        }
        out.push_back(check("fresnel_transfer_unit_modulus", worst, 4e-16, s));
    }

    {
        // With lambda d = N p^2 the sampled chirp is N-periodic and its DFT is an exact Gauss sum.
        const int N = 128;
        const double p = lambda / 2.0;
        const double d = N * p * p / lambda;
        std::vector<Vec3> pts;
        for (int iy = 0; iy < N; ++iy)
            for (int ix = 0; ix < N; ++ix) pts.push_back({(ix - N / 2) * p, (iy - N / 2) * p, d});
        GridRef src = make_samples({{0.0, 0.0, 0.0}}, "impulse");
        GridRef obs = make_samples(pts, "kernel");
        Eigen::VectorXcd h = fresnel_operator(src, obs, d, lambda, p).apply(Eigen::VectorXcd::Ones(1));
        Eigen::MatrixXcd K(N, N);
        for (int iy = 0; iy < N; ++iy)
            for (int ix = 0; ix < N; ++ix) K(iy, ix) = h[iy * N + ix];
        Eigen::MatrixXcd W(N, N);
        for (int m = 0; m < N; ++m)
            for (int n = 0; n < N; ++n)
                W(m, n) = std::polar(1.0, -2.0 * kPi * static_cast<double>((m - N / 2) * (n - N / 2)) / N);
        Eigen::MatrixXcd H = W * K * W.transpose();
        double worst = 0.0;
        for (int my = -N / 4; my < N / 4; ++my)
            for (int mx = -N / 4; mx < N / 4; ++mx) {
                double fx = mx / (N * p), fy = my / (N * p);
                cd ref = -std::polar(1.0, -2.0 * kPi / lambda * d + kPi * lambda * d * (fx * fx + fy * fy));
                worst = std::max(worst, std::abs(H(my + N / 2, mx + N / 2) - ref));
            }
        out.push_back(check("fresnel_kernel_dft_conjugate_chirp", worst, 1e-9, s,
                            "spectrum of the e^{-jkR} kernel is -e^{-jkd} e^{+j pi lambda d f^2}"));
    }

    {
        double worst = 0.0;
        for (int b = 1; b <= 4; ++b) {
            const double step = 2.0 * kPi / std::ldexp(1.0, b);
            double acc = 0.0;
            const int n = 4096;
            for (int i = 0; i < n; ++i) {
                double phi = 2.0 * kPi * uniform01(gen);
                double e = wrap_phase(quantize_phase(phi, b) - phi);
                acc += e * e;
            }
            worst = std::max(worst, std::abs(std::sqrt(acc / n) / (step / std::sqrt(12.0)) - 1.0));
        }
        out.push_back(check("quantization_rms_step_over_sqrt12", worst, 0.15, s));
    }

    {
        SystemConfig c = config.with_layers(1);
        c.aperture_diameter = 10.0 * c.wavelength;
        c.element_pitch = c.wavelength / 2.0;
        c.feed.kind = FeedKind::uniform_plane;
        c.imperfections = ImperfectionParams{};
        const double D = c.aperture_diameter;
        const double r = 0.2 * 2.0 * D * D / c.wavelength;
        StackProblem pb = make_problem(c, r);
        OptimizationResult res = optimize_phases(pb, c.optimizer);
        Eigen::VectorXd phi = res.stack.phases(0);
        Eigen::VectorXcd conj_target = pb.target.conjugate();
        cd acc = 0.0;
        for (Eigen::Index n = 0; n < phi.size(); ++n) acc += std::polar(1.0, phi[n] - std::arg(conj_target[n]));
        double piston = std::arg(acc);
        double worst = 0.0;
        for (Eigen::Index n = 0; n < phi.size(); ++n)
            worst = std::max(worst, std::abs(wrap_phase(phi[n] - std::arg(conj_target[n]) - piston)));
        out.push_back(check("single_layer_conjugate_phase", worst, 1e-6, s));
    }

    if (opt.write_dump) write_matrix_dump(*opt.write_dump, reference_dump_operator(config));

    if (opt.check_dump) {
        try {
            Eigen::MatrixXcd dumped = read_matrix_dump(*opt.check_dump);
            Eigen::MatrixXcd ref = reference_dump_operator(config);
            if (dumped.rows() != ref.rows() || dumped.cols() != ref.cols()) {
                out.push_back(check("operator_dump", std::numeric_limits<double>::infinity(), 1e-12, s,
                                    "dump shape differs from the scenario operator"));
            } else {
                out.push_back(check("operator_dump", rel(dumped, ref), 1e-12, s));
            }
        } catch (const std::exception& e) {
            out.push_back(check("operator_dump", std::numeric_limits<double>::infinity(), 1e-12, s, e.what()));
        }
    }
    return out;
}

}  // namespace nfsim::cli
