#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nfsim/error.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/report_io.hpp"
#include "nfsim/unfd.hpp"

using namespace nfsim;

namespace {

std::vector<FocusReport> rows(const std::vector<double>& r) {
    std::vector<FocusReport> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        out[i].r = r[i];
        out[i].retention_lat = 1.0;
        out[i].retention_ax = 1.0;
    }
    return out;
}

SystemConfig small_plane_feed(int L) {
    SystemConfig c;
    c.wavelength = 0.010714;
    c.aperture_diameter = 8.0 * c.wavelength;
    c.element_pitch = c.wavelength / 2.0;
    c.layer_count = L;
    c.layer_spacings.assign(static_cast<std::size_t>(L - 1), 5.0 * c.wavelength);
    c.feed.kind = FeedKind::uniform_plane;
    return c;
}

}  // namespace

TEST(Boundary, GainLossInterpolated) {
    const double a = 0.1, b = 0.2, c = 0.4;
    auto rep = rows({a, b, c});
    rep[0].gain_loss_db = 1;
    rep[1].gain_loss_db = 2;
    rep[2].gain_loss_db = 4;
    Boundary bd = criterion_boundary(rep, Criterion::gain, Thresholds{});
    EXPECT_TRUE(bd.violated);
    EXPECT_FALSE(bd.below_range);
    EXPECT_NEAR(bd.r, b + (c - b) * (3.0 - 2.0) / (4.0 - 2.0), 1e-15);
}

TEST(Boundary, AllSatisfyingReturnsLastDistance) {
    auto rep = rows({0.1, 0.2, 0.3});
    for (Criterion k : {Criterion::gain, Criterion::lateral, Criterion::axial, Criterion::phase}) {
        Boundary bd = criterion_boundary(rep, k, Thresholds{});
        EXPECT_FALSE(bd.violated);
        EXPECT_EQ(bd.r, 0.3);
    }
}

TEST(Boundary, AxialRetentionCrossing) {
    auto rep = rows({0.5, 0.6});
    rep[0].retention_ax = 0.9;
    rep[1].retention_ax = 0.79;
    Boundary bd = criterion_boundary(rep, Criterion::axial, Thresholds{});
    EXPECT_GT(bd.r, 0.5);
    EXPECT_LT(bd.r, 0.6);
    EXPECT_NEAR(bd.r, 0.5 + 0.1 * (0.8 - 0.9) / (0.79 - 0.9), 1e-15);
}

TEST(Boundary, PrefixRuleAndEdgeCases) {
    auto rep = rows({0.1, 0.2, 0.3, 0.4});
    rep[1].retention_lat = 0.5;
    rep[2].retention_lat = 1.0;
    rep[3].retention_lat = 1.0;
    Boundary bd = criterion_boundary(rep, Criterion::lateral, Thresholds{});
    EXPECT_LT(bd.r, 0.2);
    rep[0].retention_lat = 0.2;
    bd = criterion_boundary(rep, Criterion::lateral, Thresholds{});
    EXPECT_TRUE(bd.below_range);
    EXPECT_EQ(bd.r, 0.1);
    auto inf = rows({0.1, 0.2});
    inf[1].gain_loss_db = std::numeric_limits<double>::infinity();
    EXPECT_EQ(criterion_boundary(inf, Criterion::gain, Thresholds{}).r, 0.1);
    EXPECT_THROW(criterion_boundary(rows({0.2, 0.1}), Criterion::gain, Thresholds{}), ConfigError);
    EXPECT_THROW(criterion_boundary({}, Criterion::gain, Thresholds{}), ConfigError);
}

TEST(Summary, BindingCriterionIsSmallestBoundary) {
    auto rep = rows({0.1, 0.2, 0.3, 0.4});
    rep[3].retention_ax = 0.7;
    rep[2].retention_lat = 0.9;
    UnfdReport u = summarize_sweep(2, rep, Thresholds{}, 5.0);
    EXPECT_EQ(u.binding_criterion, Criterion::lateral);
    EXPECT_LT(u.R_lat, u.R_ax);
    EXPECT_EQ(u.R_res, u.R_lat);
    EXPECT_EQ(u.R_unfd, std::min({u.R_gain, u.R_res, u.R_phi}));
    EXPECT_EQ(u.R_gain, 0.4);
    EXPECT_EQ(to_string(u.binding_criterion), "lateral");
    UnfdReport ok = summarize_sweep(1, rows({0.1, 0.2}), Thresholds{}, 5.0);
    EXPECT_EQ(ok.binding_criterion, Criterion::none_violated);
    EXPECT_EQ(ok.R_unfd, 0.2);
}

TEST(Evaluate, IdealSingleLayerSmallDistance) {
    // the axial focus of an 8-wavelength aperture is only defined at Fresnel numbers above about one
    SystemConfig c = small_plane_feed(1);
    const double R = rayleigh_distance(c);
    FocusReport f = evaluate_at(c, 1, 0.06 * R);
    EXPECT_LT(f.gain_loss_db, 0.1);
    EXPECT_NEAR(f.retention_lat, 1.0, 0.02);
    EXPECT_NEAR(f.retention_ax, 1.0, 0.05);
    EXPECT_LT(f.max_residual_phase, 0.1);
    EXPECT_EQ(f.layer_count, 1);
}

TEST(Evaluate, UnoptimizedStackIsFlagged) {
    SystemConfig c = small_plane_feed(1);
    const double r = 0.15 * rayleigh_distance(c);
    ApertureRef g = build_aperture(c);
    LayerStack s = LayerStack::phase_only(g, {}, {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->size()))});
    FocusReport f = evaluate_stack(c, s, r, ideal_reference(c, r));
    EXPECT_LT(f.coherence, 0.8);
    bool flagged = false;
    for (Criterion k : {Criterion::gain, Criterion::lateral, Criterion::axial, Criterion::phase})
        flagged = flagged || criterion_boundary({f}, k, c.thresholds).violated;
    EXPECT_TRUE(flagged);
}

TEST(Evaluate, BeyondRayleighIsConfigError) {
    SystemConfig c = small_plane_feed(1);
    EXPECT_THROW(evaluate_at(c, 1, 1.01 * rayleigh_distance(c)), ConfigError);
    EXPECT_THROW(evaluate_at(c, 1, 0.0), ConfigError);
}

TEST(Evaluate, DeterministicRows) {
    SystemConfig c = small_plane_feed(2);
    c.imperfections.misalignment = 0.3 * c.element_pitch;
    c.imperfections.phase_bits = 3;
    c.imperfections.rng_seed = 9;
    const double r = 0.1 * rayleigh_distance(c);
    std::string a = focus_reports_csv(c, {evaluate_at(c, 2, r)});
    std::string b = focus_reports_csv(c, {evaluate_at(c, 2, r)});
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.rfind("# nfsim ", 0), 0u);
}

TEST(Sweep, SmallSweepSummaries) {
    SystemConfig c = small_plane_feed(2);
    c.sweep.num_points = 8;
    c.sweep.r_min_frac = 0.1;
    c.sweep.r_max_frac = 0.4;
    auto reps = unfd_for_layers(c, {1, 2});
    ASSERT_EQ(reps.size(), 2u);
    for (const auto& u : reps) {
        ASSERT_EQ(u.reports.size(), 8u);
        EXPECT_LE(u.R_unfd, u.R_ray);
        EXPECT_GT(u.R_unfd, 0.0);
        for (std::size_t i = 1; i < 8; ++i) EXPECT_GT(u.reports[i].r, u.reports[i - 1].r);
    }
    std::string js = summary_json(c, reps);
    EXPECT_NE(js.find("\"binding_criterion\""), std::string::npos);
}
