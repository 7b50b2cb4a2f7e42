#include "nfsim/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include "nfsim/error.hpp"
#include "nfsim/metrics.hpp"
#include "nfsim/wavefront.hpp"

namespace nfsim {

using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

VectorXcd phasor(const VectorXd& phi) {
    VectorXcd out(phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) out[i] = std::polar(1.0, phi[i]);
    return out;
}

// Focal objective J = |t^T E|^2 / (|t|^2 |E|^2) for a phase-only stack and its adjoint gradient.
class Objective {
public:
    explicit Objective(const StackProblem& pb) : pb_(pb), L_(pb.layer_count()) {
        T_ = pb.target.squaredNorm();
    }

    std::size_t layers() const { return L_; }
    Eigen::Index elements() const { return pb_.feed.values.size(); }

    // Inputs x[l] incident on every layer and the output field E.
    void forward(const std::vector<VectorXd>& phi, std::vector<VectorXcd>& x, VectorXcd& E) const {
        x.resize(L_);
        x[0] = pb_.feed.values;
        for (std::size_t l = 0; l < L_; ++l) {
            VectorXcd y = phasor(phi[l]).cwiseProduct(x[l]);
            if (l + 1 < L_)
                x[l + 1] = pb_.interlayer[l].apply(y);
            else
                E = std::move(y);
        }
    }

    double value_of(const VectorXcd& E) const {
        double P = E.squaredNorm();
        if (!(P > 0)) return 0.0;
        cd s = pb_.target.transpose() * E;
        return std::norm(s) / (T_ * P);
    }

    double value(const std::vector<VectorXd>& phi) const {
        std::vector<VectorXcd> x;
        VectorXcd E;
        forward(phi, x, E);
        return value_of(E);
    }

    // Row vector b with s = b^T y_l for layer l, given the current later layers.
    VectorXcd backward_row(const std::vector<VectorXd>& phi, std::size_t layer) const {
        VectorXcd b = pb_.target;
        for (std::size_t l = L_ - 1; l > layer; --l) {
            VectorXcd v = phasor(phi[l]).cwiseProduct(b);
            b = pb_.interlayer[l - 1].apply_transpose(v);
        }
        return b;
    }

    double gradient(const std::vector<VectorXd>& phi, std::vector<VectorXd>& grad) const {
        std::vector<VectorXcd> x;
        VectorXcd E;
        forward(phi, x, E);
        const double P = E.squaredNorm();
        const cd s = pb_.target.transpose() * E;
        const double s2 = std::norm(s);
        VectorXcd b = pb_.target;
        VectorXcd w = E;
        grad.assign(L_, VectorXd());
        for (std::size_t l = L_; l-- > 0;) {
            VectorXcd e = phasor(phi[l]);
            VectorXcd y = e.cwiseProduct(x[l]);
            VectorXd g(y.size());
            for (Eigen::Index n = 0; n < y.size(); ++n) {
                cd jy = cd(0.0, 1.0) * y[n];
                double ds = 2.0 * std::real(std::conj(s) * b[n] * jy);
                double dP = 2.0 * std::real(std::conj(jy) * w[n]);
                g[n] = (ds * P - s2 * dP) / (T_ * P * P);
            }
            grad[l] = std::move(g);
            if (l > 0) {
                b = pb_.interlayer[l - 1].apply_transpose(e.cwiseProduct(b));
                w = pb_.interlayer[l - 1].apply_adjoint(e.conjugate().cwiseProduct(w));
            }
        }
        return s2 / (T_ * P);
    }

private:
    const StackProblem& pb_;
    std::size_t L_;
    double T_ = 1.0;
};

VectorXd flatten(const std::vector<VectorXd>& phi) {
    Eigen::Index n = 0;
    for (const auto& p : phi) n += p.size();
    VectorXd z(n);
    Eigen::Index o = 0;
    for (const auto& p : phi) {
        z.segment(o, p.size()) = p;
        o += p.size();
    }
    return z;
}

void unflatten(const VectorXd& z, std::vector<VectorXd>& phi) {
    Eigen::Index o = 0;
    for (auto& p : phi) {
        p = z.segment(o, p.size());
        o += p.size();
    }
}

void check_finite(double J, const char* stage, std::size_t layer, int iteration) {
    if (!std::isfinite(J))
        throw NumericalError(std::string("non-finite objective during ") + stage + " (layer " +
                             std::to_string(layer + 1) + ", iteration " + std::to_string(iteration) + ")");
}

}  // namespace

StackProblem make_problem(const SystemConfig& config, double r) {
    config.validate();
    if (!(r > 0)) throw ConfigError("focal distance must be > 0");
    StackProblem pb;
    pb.grid = build_aperture(config);
    pb.spacings = config.layer_spacings;
    pb.planes = layer_planes(*pb.grid, pb.spacings);
    pb.feed = feed_field(config.feed, *pb.grid, config.wavelength, pb.planes.front());
    LayerStack shell(pb.grid, pb.spacings,
                     std::vector<VectorXcd>(pb.planes.size(), VectorXcd::Ones(static_cast<Eigen::Index>(pb.grid->size()))));
    shell.planes = pb.planes;
    pb.interlayer = interlayer_operators(shell, config.wavelength, config.engine);
    pb.target = target_field(*pb.grid, pb.planes.back(), r, config.wavelength).values;
    return pb;
}

VectorXcd output_field(const LayerStack& stack, const StackProblem& pb) {
    if (stack.layer_count() != pb.layer_count())
        throw GridMismatchError("stack and problem disagree on the layer count");
    VectorXcd x = pb.feed.values;
    for (std::size_t l = 0; l < stack.layer_count(); ++l) {
        x = stack.layers[l].cwiseProduct(x);
        if (l + 1 < stack.layer_count()) x = pb.interlayer[l].apply(x);
    }
    return x;
}

double focal_coherence(const LayerStack& stack, const StackProblem& pb) {
    VectorXcd E = output_field(stack, pb);
    return coherence(E.conjugate(), pb.target);
}

OptimizationResult optimize_phases(const StackProblem& pb, const OptimizerSettings& settings, std::uint64_t seed) {
    if (settings.max_sweeps < 1 || !(settings.tol > 0)) throw ConfigError("invalid optimizer settings");
    const auto t0 = std::chrono::steady_clock::now();
    Objective obj(pb);
    const std::size_t L = obj.layers();
    const Eigen::Index N = obj.elements();

    std::vector<VectorXd> phi(L, VectorXd::Zero(N));
    if (settings.random_init) {
        std::mt19937_64 gen(seed);
        for (auto& p : phi)
            for (Eigen::Index n = 0; n < N; ++n) p[n] = 2.0 * kPi * unit_uniform(gen) - kPi;
    }

    OptimizationTrace trace;
    auto record = [&](double J, const char* stage) {
        double coh = std::sqrt(std::max(0.0, J));
        trace.coherence.push_back(coh);
        trace.gain_loss_db.push_back(coh > 0 ? gain_loss_db(std::min(1.0, coh))
                                             : std::numeric_limits<double>::infinity());
        trace.wall_time.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        trace.stage.emplace_back(stage);
    };

    double J = obj.value(phi);
    check_finite(J, "initialization", 0, 0);
    record(J, "init");

    // alternating per-layer alignment of forward and backward fields
    trace.termination = "max_sweeps";
    for (int sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
        const double J_start = J;
        for (std::size_t l = 0; l < L; ++l) {
            std::vector<VectorXcd> x;
            VectorXcd E;
            obj.forward(phi, x, E);
            VectorXcd b = obj.backward_row(phi, l);
            VectorXd aligned = phi[l];
            for (Eigen::Index n = 0; n < N; ++n) {
                cd v = b[n] * x[l][n];
                if (std::abs(v) > 0) aligned[n] = -std::arg(v);
            }
            const VectorXd old = phi[l];
            VectorXd step(N);
            for (Eigen::Index n = 0; n < N; ++n) step[n] = wrap_phase(aligned[n] - old[n]);
            double alpha = 1.0;
            bool accepted = false;
            for (int tries = 0; tries < 12 && !accepted; ++tries, alpha *= 0.5) {
                phi[l] = old + alpha * step;
                double Jt = obj.value(phi);
                check_finite(Jt, "alignment sweep", l, sweep);
                if (Jt >= J) {
                    J = Jt;
                    accepted = true;
                }
            }
            if (!accepted) phi[l] = old;
        }
        trace.sweeps = sweep;
        record(J, "sweep");
        if (J - J_start < settings.tol * std::max(J_start, 1e-300)) {
            trace.termination = "converged";
            break;
        }
    }

    // L-BFGS ascent on J over all phases
    if (settings.refine && L > 1 && settings.refine_steps > 0) {
        VectorXd z = flatten(phi);
        std::vector<VectorXd> g_parts;
        double Jz = obj.gradient(phi, g_parts);
        VectorXd g = -flatten(g_parts);
        std::deque<std::pair<VectorXd, VectorXd>> hist;
        int stall = 0;
        std::string reason = "refine_steps";
        for (int it = 1; it <= settings.refine_steps; ++it) {
            if (g.lpNorm<Eigen::Infinity>() < 1e-14) {
                reason = "stationary";
                break;
            }
            VectorXd q = g;
            std::vector<double> a(hist.size());
            for (std::size_t i = hist.size(); i-- > 0;) {
                const auto& [s, y] = hist[i];
                a[i] = s.dot(q) / y.dot(s);
                q -= a[i] * y;
            }
            if (!hist.empty()) {
                const auto& [s, y] = hist.back();
                q *= s.dot(y) / y.dot(y);
            } else {
                q *= 0.1 * settings.step_size / g.lpNorm<Eigen::Infinity>();
            }
            for (std::size_t i = 0; i < hist.size(); ++i) {
                const auto& [s, y] = hist[i];
                double beta = y.dot(q) / y.dot(s);
                q += (a[i] - beta) * s;
            }
            VectorXd d = -q;
            double slope = g.dot(d);
            if (!(slope < 0)) {
                hist.clear();
                d = -g * (0.1 * settings.step_size / g.lpNorm<Eigen::Infinity>());
                slope = g.dot(d);
            }
            double t = 1.0;
            bool moved = false;
            VectorXd z_new;
            double J_new = Jz;
            for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
                z_new = z + t * d;
                unflatten(z_new, phi);
                J_new = obj.value(phi);
                check_finite(J_new, "refinement", 0, it);
                if (-J_new <= -Jz + 1e-4 * t * slope) {
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                unflatten(z, phi);
                reason = "line_search";
                break;
            }
            std::vector<VectorXd> gp;
            obj.gradient(phi, gp);
            VectorXd g_new = -flatten(gp);
            VectorXd s = z_new - z;
            VectorXd y = g_new - g;
            if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
                hist.emplace_back(s, y);
                if (static_cast<int>(hist.size()) > settings.history) hist.pop_front();
            }
            double gain = J_new - Jz;
            z = std::move(z_new);
            g = std::move(g_new);
            Jz = J_new;
            trace.refine_iterations = it;
            record(Jz, "refine");
            stall = gain < settings.tol * Jz ? stall + 1 : 0;
            if (stall >= 3) {
                reason = "converged";
                break;
            }
        }
        unflatten(z, phi);
        J = Jz;
        trace.termination = reason;

        // the last layer has a closed-form optimum given the others
        std::vector<VectorXcd> x;
        VectorXcd E;
        obj.forward(phi, x, E);
        VectorXd last = phi[L - 1];
        for (Eigen::Index n = 0; n < N; ++n) {
            cd v = pb.target[n] * x[L - 1][n];
            if (std::abs(v) > 0) phi[L - 1][n] = -std::arg(v);
        }
        double J_last = obj.value(phi);
        if (J_last >= J) {
            J = J_last;
            record(J, "align");
        } else {
            phi[L - 1] = last;
        }
    }

    OptimizationResult result;
    for (auto& p : phi)
        for (Eigen::Index n = 0; n < N; ++n) p[n] = wrap_phase(p[n]);
    result.stack = LayerStack::phase_only(pb.grid, pb.spacings, phi);
    result.stack.planes = pb.planes;
    result.trace = std::move(trace);
    return result;
}

OptimizationResult optimize_stack(const SystemConfig& config, double r, const OptimizerSettings& settings) {
    StackProblem pb = make_problem(config, r);
    return optimize_phases(pb, settings, config.imperfections.rng_seed);
}

double quantize_phase(double phi, int bits) {
    if (bits < 1) throw ConfigError("phase quantization needs at least one bit");
    if (bits > 52) return phi;
    const long long levels = 1LL << bits;
    const double step = 2.0 * kPi / static_cast<double>(levels);
    auto m = static_cast<long long>(std::floor(phi / step + 0.5));
    m = ((m % levels) + levels) % levels;
    return step * static_cast<double>(m);
}

LayerStack quantize_phases(const LayerStack& stack, int bits) {
    LayerStack out = stack;
    for (auto& layer : out.layers)
        for (Eigen::Index n = 0; n < layer.size(); ++n)
            layer[n] = std::polar(std::abs(layer[n]), quantize_phase(std::arg(layer[n]), bits));
    return out;
}

std::vector<std::array<double, 2>> misalignment_offsets(std::size_t layers, double magnitude, std::uint64_t seed) {
    std::vector<std::array<double, 2>> off(layers, {0.0, 0.0});
    std::mt19937_64 gen(seed);
    for (std::size_t l = 1; l < layers; ++l) {
        double theta = 2.0 * kPi * unit_uniform(gen);
        off[l] = {magnitude * std::cos(theta), magnitude * std::sin(theta)};
    }
    return off;
}

LayerStack inject_imperfections(const LayerStack& stack, const ImperfectionParams& params) {
    if (!(params.transmission_efficiency > 0 && params.transmission_efficiency <= 1))
        throw ConfigError("transmission efficiency must lie in (0, 1]");
    if (params.misalignment < 0) throw ConfigError("misalignment must be >= 0");
    LayerStack out = stack;
    const std::size_t L = stack.layer_count();

    if (params.misalignment > 0) out.set_offsets(misalignment_offsets(L, params.misalignment, params.rng_seed));

    const double a = std::sqrt(params.transmission_efficiency);
    for (auto& layer : out.layers) layer *= a;

    if (params.spacing_deviation != 0.0) {
        for (double& d : out.spacings) {
            d += params.spacing_deviation;
            if (!(d > 0)) throw ConfigError("spacing deviation produces a non-positive gap");
        }
        out.rebuild_planes();
    }

    if (params.quantized()) out = quantize_phases(out, params.phase_bits);
    return out;
}

double operator_mismatch(const LinearPropagator& g_sim, const LinearPropagator& g_target) {
    if (g_sim.rows() != g_target.rows() || g_sim.cols() != g_target.cols())
        throw GridMismatchError("operator_mismatch: operator shapes differ");
    Eigen::MatrixXcd a = g_sim.dense();
    Eigen::MatrixXcd b = g_target.dense();
    double nb = b.norm();
    if (!(nb > 0)) throw NumericalError("operator_mismatch: target operator is zero");
    return (a - b).norm() / nb;
}

}  // namespace nfsim
