#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "nfsim/error.hpp"
#include "nfsim/propagation.hpp"

using namespace nfsim;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLambda = 0.010714;

double u01(std::mt19937_64& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }

GridRef random_plane(std::size_t n, double z, std::mt19937_64& g) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {0.2 * (u01(g) - 0.5), 0.2 * (u01(g) - 0.5), z};
    return make_samples(std::move(pts), "random");
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& g) {
    Eigen::VectorXcd v(n);
    for (auto& x : v) x = cd(u01(g) - 0.5, u01(g) - 0.5);
    return v;
}

// direct evaluation of e^{-jkR} / (4 pi R), independent of the library kernel
Eigen::MatrixXcd green_oracle(const GridRef& src, const GridRef& dst, double lambda) {
    const double k = 2.0 * kPi / lambda;
    Eigen::MatrixXcd m(dst->size(), src->size());
    for (std::size_t q = 0; q < dst->size(); ++q)
        for (std::size_t n = 0; n < src->size(); ++n) {
            const Vec3& a = dst->points[q];
            const Vec3& b = src->points[n];
            double R = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
            m(q, n) = cd(std::cos(k * R), -std::sin(k * R)) / (4.0 * kPi * R);
        }
    return m;
}

LayerStack random_stack(int L, std::mt19937_64& g) {
    auto grid = std::make_shared<const ApertureGrid>(kLambda / 2.0, 4.5 * kLambda / 2.0);
    std::vector<Eigen::VectorXcd> layers;
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXcd v(static_cast<Eigen::Index>(grid->size()));
        for (auto& x : v) x = std::polar(0.5 + 0.5 * u01(g), 2.0 * kPi * u01(g));
        layers.push_back(v);
    }
    std::vector<double> gaps;
    for (int l = 0; l + 1 < L; ++l) gaps.push_back((2.0 + 3.0 * u01(g)) * kLambda);
    return LayerStack(grid, gaps, layers);
}

}  // namespace

TEST(Green, UnitMagnitudeAtInverseFourPi) {
    cd g = green_function({0, 0, 1.0 / (4.0 * kPi)}, {0, 0, 0}, 2.0 * kPi / kLambda);
    EXPECT_NEAR(std::abs(g), 1.0, 1e-14);
}

TEST(Green, OneWavelengthSeparation) {
    cd g = green_function({kLambda, 0, 0}, {0, 0, 0}, 2.0 * kPi / kLambda);
    EXPECT_NEAR(std::abs(g), 7.427428742388246, 1e-12);
    EXPECT_NEAR(std::abs(std::arg(g)), 0.0, 1e-12);
}

TEST(Green, ExplicitAndMatrixFreeAgreeWithDirectSum) {
    std::mt19937_64 g(11);
    GridRef a = random_plane(64, 0.0, g);
    GridRef b = random_plane(64, 0.09, g);
    Eigen::MatrixXcd oracle = green_oracle(a, b, kLambda);
    Eigen::MatrixXcd ex = green_matrix(a, b, kLambda, OperatorForm::explicit_matrix).dense();
    LinearPropagator mf = green_matrix(a, b, kLambda, OperatorForm::matrix_free);
    EXPECT_LT((ex - oracle).norm() / oracle.norm(), 1e-12);
    Eigen::VectorXcd x = random_vector(64, g);
    Eigen::VectorXcd y = oracle * x;
    EXPECT_LT((mf.apply(x) - y).norm() / y.norm(), 1e-12);
    EXPECT_LT((green_matrix(a, b, kLambda, OperatorForm::explicit_matrix).apply(x) - y).norm() / y.norm(), 1e-12);
    Eigen::VectorXcd w = random_vector(64, g);
    Eigen::VectorXcd ya = oracle.adjoint() * w;
    EXPECT_LT((mf.apply_adjoint(w) - ya).norm() / ya.norm(), 1e-12);
}

TEST(Green, Reciprocity) {
    std::mt19937_64 g(5);
    GridRef a = random_plane(20, 0.0, g);
    GridRef b = random_plane(30, 0.05, g);
    Eigen::MatrixXcd ab = green_matrix(a, b, kLambda).dense();
    Eigen::MatrixXcd ba = green_matrix(b, a, kLambda).dense();
    EXPECT_EQ((ab - ba.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Green, CoincidentPointsAreSingular) {
    GridRef a = make_samples({{0, 0, 0}, {1e-3, 0, 0}}, "a");
    GridRef b = make_samples({{1e-3, 0, 0}}, "b");
    EXPECT_THROW(green_matrix(a, b, kLambda), SingularityError);
}

TEST(Fresnel, ImpulseMatchesClosedForm) {
    const double p = kLambda / 2.0;
    const double k = 2.0 * kPi / kLambda;
    for (double d : {0.25, 0.5, 1.0}) {
        std::vector<Vec3> dst;
        const int M = static_cast<int>(std::floor(0.2 * d / p / std::sqrt(2.0)));
        for (int i = -M; i <= M; i += 3)
            for (int j = -M; j <= M; j += 5) dst.push_back({i * p, j * p, d});
        GridRef src = make_samples({{0, 0, 0}}, "impulse");
        GridRef obs = make_samples(dst, "obs");
        Eigen::VectorXcd u = fresnel_operator(src, obs, d, kLambda, p).apply(Eigen::VectorXcd::Ones(1));
        for (std::size_t q = 0; q < dst.size(); ++q) {
            double rho2 = dst[q].x * dst[q].x + dst[q].y * dst[q].y;
            cd ref = std::exp(cd(0, -k * d)) / (cd(0, 1) * kLambda * d) * std::exp(cd(0, -k * rho2 / (2 * d))) * p * p;
            EXPECT_LT(std::abs(u[static_cast<Eigen::Index>(q)] - ref) / std::abs(ref), 1e-9);
        }
    }
}

TEST(Fresnel, OnAxisImpulseMagnitude) {
    const double p = kLambda / 2.0;
    GridRef src = make_samples({{0, 0, 0}}, "impulse");
    GridRef obs = make_samples({{0, 0, 0.5}}, "obs");
    cd u = fresnel_operator(src, obs, 0.5, kLambda, p).apply(Eigen::VectorXcd::Ones(1))[0];
    EXPECT_NEAR(std::abs(u), p * p * 186.67164457718873, 1e-12 * p * p * 186.67);
}

TEST(Fresnel, TransferDcAndIdentity) {
    const double k = 2.0 * kPi / kLambda;
    cd h = fresnel_transfer(0.0, 0.0, 0.37, kLambda);
    EXPECT_NEAR(std::abs(h - std::exp(cd(0, -k * 0.37))), 0.0, 1e-12);
    for (double f : {0.0, 3.0, 40.0}) EXPECT_NEAR(std::abs(fresnel_transfer(f, -f, 0.0, kLambda) - 1.0), 0.0, 1e-15);
}

TEST(Fresnel, KernelSpectrumIsConjugateChirp) {
    // lambda d = N p^2 makes the sampled chirp periodic, so its DFT is an exact Gauss sum
    const int N = 128;
    const double p = kLambda / 2.0;
    const double d = N * p * p / kLambda;
    std::vector<Vec3> pts;
    for (int iy = 0; iy < N; ++iy)
        for (int ix = 0; ix < N; ++ix) pts.push_back({(ix - N / 2) * p, (iy - N / 2) * p, d});
    Eigen::VectorXcd h = fresnel_operator(make_samples({{0, 0, 0}}, "i"), make_samples(pts, "k"), d, kLambda, p)
                             .apply(Eigen::VectorXcd::Ones(1));
    const double k = 2.0 * kPi / kLambda;
    double worst = 0.0;
    for (int my = -N / 4; my < N / 4; my += 7)
        for (int mx = -N / 4; mx < N / 4; mx += 5) {
            cd acc = 0.0;
            for (int iy = 0; iy < N; ++iy)
                for (int ix = 0; ix < N; ++ix) {
                    double e = -2.0 * kPi * (double(mx) * (ix - N / 2) + double(my) * (iy - N / 2)) / N;
                    acc += h[iy * N + ix] * cd(std::cos(e), std::sin(e));
                }
            double f2 = (mx * mx + my * my) / (N * p * N * p);
            cd ref = -std::exp(cd(0, -k * d + kPi * kLambda * d * f2));
            worst = std::max(worst, std::abs(acc - ref));
        }
    EXPECT_LT(worst, 1e-9);
}

TEST(Cascade, SingleLayerIsDiagonal) {
    std::mt19937_64 g(3);
    LayerStack s = random_stack(1, g);
    auto ops = interlayer_operators(s, kLambda);
    EXPECT_TRUE(ops.empty());
    Eigen::MatrixXcd t = cascade(s, ops).dense();
    Eigen::MatrixXcd ref = s.layers[0].asDiagonal();
    EXPECT_LT((t - ref).norm(), 1e-15);
}

TEST(Cascade, TransparentTwoLayersIsGreenMatrix) {
    std::mt19937_64 g(4);
    LayerStack s = random_stack(2, g);
    for (auto& l : s.layers) l.setOnes();
    Eigen::MatrixXcd t = cascade(s, interlayer_operators(s, kLambda)).dense();
    Eigen::MatrixXcd ref = green_oracle(s.planes[0], s.planes[1], kLambda);
    EXPECT_LT((t - ref).norm() / ref.norm(), 1e-12);
}

TEST(Cascade, MatchesDenseProductsOverSeeds) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 g(seed);
        int L = 2 + static_cast<int>(seed % 3);
        LayerStack s = random_stack(L, g);
        Eigen::MatrixXcd ref = s.layers[0].asDiagonal();
        for (int l = 1; l < L; ++l)
            ref = s.layers[l].asDiagonal() * (green_oracle(s.planes[l - 1], s.planes[l], kLambda) * ref);
        LinearPropagator t = cascade(s, interlayer_operators(s, kLambda));
        EXPECT_LT((t.dense() - ref).norm() / ref.norm(), 1e-12) << "seed " << seed;
        Eigen::VectorXcd x = random_vector(ref.cols(), g);
        Eigen::VectorXcd y = ref * x;
        EXPECT_LT((t.apply(x) - y).norm() / y.norm(), 1e-12) << "seed " << seed;
    }
}

TEST(Cascade, AppendedTransparentLayerPropagatesPreviousOutput) {
    std::mt19937_64 g(9);
    LayerStack full = random_stack(3, g);
    full.layers[2].setOnes();
    LayerStack head(full.grid, {full.spacings[0]}, {full.layers[0], full.layers[1]});
    Eigen::VectorXcd x = random_vector(static_cast<Eigen::Index>(full.grid->size()), g);
    Eigen::VectorXcd y_head = cascade(head, interlayer_operators(head, kLambda)).apply(x);
    Eigen::VectorXcd y_ref = green_oracle(full.planes[1], full.planes[2], kLambda) * y_head;
    Eigen::VectorXcd y = cascade(full, interlayer_operators(full, kLambda)).apply(x);
    EXPECT_LT((y - y_ref).norm() / y_ref.norm(), 1e-12);
}

TEST(Cascade, EqualGapsShareKernel) {
    std::mt19937_64 g(2);
    LayerStack s = random_stack(4, g);
    s.spacings = {0.03, 0.03, 0.03};
    s.rebuild_planes();
    auto ops = interlayer_operators(s, kLambda);
    ASSERT_EQ(ops.size(), 3u);
    EXPECT_EQ((ops[0].dense() - ops[2].dense()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(same_grid(ops[1].src(), s.planes[1]));
    EXPECT_TRUE(same_grid(ops[1].dst(), s.planes[2]));
}

TEST(Focusing, SinglePointIsDirectSum) {
    auto grid = std::make_shared<const ApertureGrid>(kLambda / 2.0, 4 * kLambda);
    std::vector<Eigen::VectorXcd> layers = {Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(grid->size()))};
    LayerStack s(grid, {}, layers);
    LinearPropagator t = cascade(s, {});
    ObservationGrid obs = make_observation_grid(0.2, 0.0, 1.0, 0.2, 0.2, 1.0);
    ASSERT_EQ(obs.samples->size(), 2u);
    LinearPropagator h = focusing_operator(t, obs, kLambda);
    Eigen::VectorXcd E = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(grid->size()));
    cd acc = 0.0;
    const double k = 2.0 * kPi / kLambda;
    for (std::size_t n = 0; n < grid->size(); ++n) acc += green_function({0, 0, 0.2}, s.planes[0]->points[n], k);
    Eigen::VectorXcd out = h.apply(E);
    EXPECT_NEAR(std::abs(out[0] - acc) / std::abs(acc), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(out[1] - acc) / std::abs(acc), 0.0, 1e-12);
}

TEST(Focusing, DegenerateSizes) {
    GridRef src = make_samples({{0, 0, 0}}, "one");
    LinearPropagator gamma = LinearPropagator::diagonal(src, Eigen::VectorXcd::Constant(1, cd(0.0, 2.0)));
    ObservationGrid obs = make_observation_grid(0.1, 0.0, 1.0, 0.1, 0.1, 1.0);
    cd y = focusing_operator(gamma, obs, kLambda).apply(Eigen::VectorXcd::Ones(1))[0];
    cd ref = green_function({0, 0, 0.1}, {0, 0, 0}, 2.0 * kPi / kLambda) * cd(0.0, 2.0);
    EXPECT_NEAR(std::abs(y - ref), 0.0, 1e-13);
}

TEST(Focusing, ObservationBehindLastLayerRejected) {
    GridRef src = make_samples({{0, 0, 0}}, "one");
    LinearPropagator gamma = LinearPropagator::diagonal(src, Eigen::VectorXcd::Ones(1));
    ObservationGrid obs = make_observation_grid(0.1, 0.0, 1.0, 0.1, 0.1, 1.0, 0.2);
    obs.samples = make_samples({{0, 0, -0.1}}, "behind");
    EXPECT_THROW(focusing_operator(gamma, obs, kLambda), ConfigError);
}

TEST(Apply, IdentityZeroAndDense) {
    std::mt19937_64 g(21);
    GridRef a = random_plane(32, 0.0, g);
    GridRef b = random_plane(32, 0.04, g);
    Eigen::VectorXcd x = random_vector(32, g);
    LinearPropagator id = LinearPropagator::diagonal(a, Eigen::VectorXcd::Ones(32));
    EXPECT_EQ((apply(id, ComplexField(a, x)).values - x).cwiseAbs().maxCoeff(), 0.0);
    LinearPropagator G = green_matrix(a, b, kLambda);
    EXPECT_EQ(apply(G, ComplexField(a, Eigen::VectorXcd::Zero(32))).values.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXcd y = green_oracle(a, b, kLambda) * x;
    EXPECT_LT((apply(G, ComplexField(a, x)).values - y).norm() / y.norm(), 1e-12);
    EXPECT_THROW(apply(G, ComplexField(b, x)), GridMismatchError);
}

TEST(Apply, ComposeMatchesDenseProduct) {
    std::mt19937_64 g(8);
    GridRef a = random_plane(12, 0.0, g);
    GridRef b = random_plane(10, 0.03, g);
    GridRef c = random_plane(8, 0.07, g);
    LinearPropagator ab = green_matrix(a, b, kLambda);
    LinearPropagator bc = green_matrix(b, c, kLambda);
    Eigen::MatrixXcd ref = green_oracle(b, c, kLambda) * green_oracle(a, b, kLambda);
    LinearPropagator t = LinearPropagator::compose({ab, bc});
    EXPECT_LT((t.dense() - ref).norm() / ref.norm(), 1e-12);
    Eigen::VectorXcd w = random_vector(8, g);
    Eigen::VectorXcd yt = ref.transpose() * w;
    EXPECT_LT((t.apply_transpose(w) - yt).norm() / yt.norm(), 1e-12);
    EXPECT_THROW(LinearPropagator::compose({bc, ab}), GridMismatchError);
}

TEST(Dump, RoundTripAndCorruption) {
    std::mt19937_64 g(1);
    Eigen::MatrixXcd m(3, 4);
    for (auto& x : m.reshaped()) x = cd(u01(g), u01(g));
    auto path = std::filesystem::temp_directory_path() / "nfsim_dump_test.bin";
    write_matrix_dump(path, m);
    EXPECT_EQ((read_matrix_dump(path) - m).cwiseAbs().maxCoeff(), 0.0);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    EXPECT_THROW(read_matrix_dump(path), NumericalError);
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage garbage garbage";
    }
    EXPECT_ANY_THROW(read_matrix_dump(path));
    std::filesystem::remove(path);
}
