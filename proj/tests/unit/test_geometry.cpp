#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nfsim/error.hpp"
#include "nfsim/geometry.hpp"

using namespace nfsim;

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t brute_force_count(double pitch, double diameter) {
    const double R = diameter / 2.0;
    const int M = static_cast<int>(std::ceil(R / pitch)) + 2;
    std::size_t n = 0;
    for (int iy = -M; iy <= M; ++iy)
        for (int ix = -M; ix <= M; ++ix)
            if (std::hypot(ix * pitch, iy * pitch) <= R + 1e-12 * R) ++n;
    return n;
}

SystemConfig small_config(double D, double p) {
    SystemConfig c;
    c.wavelength = 0.010714;
    c.aperture_diameter = D;
    c.element_pitch = p;
    return c;
}

}  // namespace

TEST(Aperture, ThreePitchDiameterMatchesEnumeration) {
    const double p = 1e-3;
    ApertureRef g = build_aperture(small_config(3 * p, p));
    EXPECT_EQ(g->size(), brute_force_count(p, 3 * p));
    EXPECT_EQ(g->size(), 9u);
    for (std::size_t n = 0; n < g->size(); ++n) EXPECT_LE(g->radius(n), 1.5 * p + 1e-15);
}

TEST(Aperture, HalfWavelengthPitchAtThirtyCentimeters) {
    const double p = 0.010714 / 2.0;
    ApertureRef g = build_aperture(small_config(0.3, p));
    EXPECT_EQ(g->size(), brute_force_count(p, 0.3));
}

TEST(Aperture, DiameterBelowPitchIsConfigError) {
    EXPECT_THROW(build_aperture(small_config(0.5e-3, 1e-3)), ConfigError);
}

TEST(Aperture, LatticeLookupIsConsistent) {
    ApertureGrid g(1e-3, 9e-3);
    for (std::size_t n = 0; n < g.size(); ++n) {
        auto [ix, iy] = g.lattice_indices()[n];
        EXPECT_EQ(g.element_index(ix, iy), static_cast<long>(n));
        EXPECT_DOUBLE_EQ(g.positions()[n][0], ix * 1e-3);
        EXPECT_DOUBLE_EQ(g.positions()[n][1], iy * 1e-3);
    }
    EXPECT_EQ(g.element_index(100, 0), -1);
    std::size_t active = 0;
    for (bool b : g.active_mask()) active += b;
    EXPECT_EQ(active, g.size());
}

TEST(EquivalentDiameter, SingleElement) {
    ApertureGrid g(1e-3, 1.5e-3);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_NEAR(equivalent_diameter(g), 2.0 * std::sqrt(1e-6 / kPi), 1e-15);
    EXPECT_NEAR(equivalent_diameter(g), 1.1284e-3, 1e-7);
}

TEST(EquivalentDiameter, ThirtyCentimeterGridWithinTwoPercent) {
    ApertureGrid g(0.010714 / 2.0, 0.3);
    EXPECT_NEAR(equivalent_diameter(g), 0.3, 0.02 * 0.3);
}

TEST(EquivalentDiameter, InvertsAreaDefinition) {
    ApertureGrid g(2e-3, 0.05);
    const double N = static_cast<double>(g.size());
    const double D = 2.0 * g.pitch() * std::sqrt(N / kPi);
    EXPECT_NEAR(equivalent_diameter(g), D, 1e-15);
}

TEST(EquivalentDiameter, ConvergesAsPitchShrinks) {
    const double D = 0.1;
    double e20 = std::abs(equivalent_diameter(ApertureGrid(D / 20, D)) - D);
    double e40 = std::abs(equivalent_diameter(ApertureGrid(D / 40, D)) - D);
    EXPECT_LE(e40, 0.5 * e20 + 1e-15);
    EXPECT_LT(e20 / D, 0.05);
}

TEST(LayerPlanes, LastLayerAtOrigin) {
    ApertureGrid g(1e-3, 5e-3);
    auto planes = layer_planes(g, {0.01, 0.02});
    ASSERT_EQ(planes.size(), 3u);
    EXPECT_DOUBLE_EQ(planes[2]->points[0].z, 0.0);
    EXPECT_DOUBLE_EQ(planes[1]->points[0].z, -0.02);
    EXPECT_DOUBLE_EQ(planes[0]->points[0].z, -0.03);
}

TEST(Feed, UniformPlaneEqualAmplitudes) {
    ApertureGrid g(1e-3, 3e-3);
    FeedModel f;
    f.kind = FeedKind::uniform_plane;
    ComplexField e = feed_field(f, g, 0.01);
    const double a = 1.0 / std::sqrt(static_cast<double>(g.size()));
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
        EXPECT_NEAR(std::abs(e.values[i]), a, 1e-15);
        EXPECT_NEAR(std::arg(e.values[i]), 0.0, 1e-15);
    }
    EXPECT_NEAR(e.values.squaredNorm(), 1.0, 1e-14);
}

TEST(Feed, PowerScalesNorm) {
    ApertureGrid g(1e-3, 9e-3);
    FeedModel f;
    f.kind = FeedKind::point_source;
    f.feed_distance = 0.02;
    f.power = 2.5;
    EXPECT_NEAR(feed_field(f, g, 0.01).values.squaredNorm(), 2.5, 1e-13);
}

TEST(Feed, PointSourcePhaseAtKnownRadius) {
    const double lambda = 0.010714;
    ApertureGrid g(0.05, 0.11);
    FeedModel f;
    f.kind = FeedKind::point_source;
    f.feed_distance = 0.1;
    ComplexField e = feed_field(f, g, lambda);
    const double k0 = 2.0 * kPi / lambda;
    const double expected = -k0 * std::sqrt(0.0125);
    EXPECT_NEAR(expected, -65.567, 1e-3);
    long n = g.element_index(1, 0);
    ASSERT_GE(n, 0);
    cd ref = std::polar(1.0, expected);
    EXPECT_NEAR(std::abs(e.values[n] / std::abs(e.values[n]) - ref), 0.0, 1e-12);
    // 1/R amplitude taper
    long c = g.element_index(0, 0);
    EXPECT_NEAR(std::abs(e.values[n]) / std::abs(e.values[c]), 0.1 / std::sqrt(0.0125), 1e-12);
}

TEST(Feed, DistantPointSourceApproachesPlaneWave) {
    ApertureGrid g(1e-3, 0.02);
    FeedModel f;
    f.kind = FeedKind::point_source;
    f.feed_distance = 1e7;
    ComplexField e = feed_field(f, g, 0.01);
    cd ref = e.values[0];
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        EXPECT_LT(std::abs(std::arg(e.values[i] / ref)), 1e-6);
}

TEST(Field, LengthMismatchIsGridError) {
    ApertureGrid g(1e-3, 3e-3);
    EXPECT_THROW(ComplexField(g.plane(0.0), Eigen::VectorXcd::Zero(3)), GridMismatchError);
}
