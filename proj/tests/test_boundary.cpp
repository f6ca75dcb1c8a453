#include <gtest/gtest.h>

#include <sstream>

#include "hhmap/boundary.hpp"

using namespace hhmap;

namespace {

const ModelSpace H2 = make_space(Model::halfplane2);
const Point I{0.0, 1.0, 0.0};

// z -> (c z + s) / (-s z + c), c = cos(phi/2), s = sin(phi/2): rotation by phi about (0,1)
Point rotate_about_i(const Point& x, double phi) {
    const double c = std::cos(phi / 2), s = std::sin(phi / 2);
    const std::complex<double> z{x[0], x[1]};
    const std::complex<double> den = -s * z + c;
    const double q = std::norm(den);
    return {((c * z + s) * std::conj(den)).real() / q, x[1] / q, 0.0};
}

MapSpec rotation_map(double phi) {
    return {"analytic", "rotation", {{"phi", phi}}, H2, H2, [phi](const Point& x) { return rotate_about_i(x, phi); }};
}

// bounded displacement of the identity, commuting with dilations and fixing (0,1)
MapSpec bounded_perturbation() {
    return {"analytic", "perturbed_identity", {}, H2, H2, [](const Point& x) {
                const double q = x[0] / x[1];
                return Point{x[0] + 0.2 * x[1] * std::sin(q), x[1] * std::exp(0.1 * (1 - std::cos(q))), 0.0};
            }};
}

// isometric on every circle about (0,1) but twisted by 0.5 log(1 + d)
MapSpec twisting_map() {
    return {"analytic", "twist", {}, H2, H2,
            [](const Point& x) { return rotate_about_i(x, 0.5 * std::log1p(dist(H2, I, x))); }};
}

double angle_gap(double s, double t) { return std::abs(std::remainder(s - t, 2 * pi)); }

const CoarseEmbedding& spiral() {
    static const CoarseEmbedding e = [] {
        Phi1Table tab = phi1_from_function([](double t) { return std::min(t, 0.05); }, 2.0, 64);
        return build_coarse_embedding(tab);
    }();
    return e;
}

}  // namespace

TEST(Boundary, ProbeIdentityAndConstant) {
    const auto id = probe_ray(identity_map(H2), I, 0.7, 64, 1, 0.99);
    EXPECT_NEAR(id.speed_hat, 1.0, 1e-9);
    EXPECT_FALSE(id.in_A);
    ASSERT_EQ(id.samples.size(), 64u);
    for (const auto& s : id.samples) EXPECT_NEAR(s.dist, s.n, 1e-9);
    for (double alpha : {0.0, 0.1, 0.9}) {
        const auto cst = probe_ray(constant_map(H2, H2, {3.0, 2.0, 0.0}), I, 1.3, 32, 4, alpha);
        EXPECT_EQ(cst.speed_hat, 0.0);
        EXPECT_TRUE(cst.in_A);
    }
    EXPECT_THROW(probe_ray(identity_map(H2), I, 0.0, 8, 9), usage_error);
}

TEST(Boundary, ProbeFailureNamesRayParameter) {
    const MapSpec bad{"analytic", "bad", {}, H2, H2, [](const Point& x) {
                          return Point{x[0], x[1] < 1e-3 ? -1.0 : x[1], 0.0};
                      }};
    try {
        probe_ray(bad, I, 0.0, 64);
        FAIL() << "expected numeric_error";
    } catch (const numeric_error& e) {
        EXPECT_NE(std::string(e.what()).find("ray parameter"), std::string::npos);
    }
}

TEST(Boundary, SpiralDirectionIsExceptional) {
    const MapSpec& f = spiral().map;
    for (double t : {pi / 2, 3 * pi / 2}) EXPECT_LT(probe_ray(f, I, t, 64, 8).speed_hat, 0.05) << t;
    const auto scan = scan_directions(f, I, 1 << 10, 64);
    int fast = 0;
    for (int i = 0; i < scan.size(); ++i) fast += scan_speed_hat(scan, i, 8) > 0.5;
    EXPECT_GE(fast, 0.95 * scan.size());
}

TEST(Boundary, BoundaryPointOfIsometries) {
    for (double t : {0.0, 0.7, 2.5, 4.0}) {
        auto p = probe_ray(identity_map(H2), I, t, 64, 8, 0.5);
        const auto bp = boundary_point(p, 1.0, 1.0);
        ASSERT_TRUE(bp) << bp.diagnostics;
        EXPECT_LT(angle_gap(bp.point->angle, t), 1e-9);
        EXPECT_TRUE(p.boundary_found);
        for (double phi : {0.4, -1.9}) {
            auto q = probe_ray(rotation_map(phi), I, t, 64, 8, 0.5);
            const auto bq = boundary_point(q, 1.0, 1.0);
            ASSERT_TRUE(bq);
            EXPECT_LT(angle_gap(bq.point->angle, t + phi), 1e-9);
        }
    }
}

TEST(Boundary, BoundedPerturbationSharesBoundaryPoint) {
    const double a = 1.0, c = 1.5, alpha = 0.5;
    const int n0 = 8;
    for (double t : {0.3, 1.2, 2.0, 3.3, 5.0}) {
        auto p = probe_ray(identity_map(H2), I, t, 64, n0, alpha);
        auto q = probe_ray(bounded_perturbation(), I, t, 64, n0, alpha);
        const auto bp = boundary_point(p, a, c), bq = boundary_point(q, a, c);
        ASSERT_TRUE(bp && bq) << bq.diagnostics;
        EXPECT_LE(angle_gap(bp.point->angle, bq.point->angle), angle_tail_bound(a, c, alpha, n0));
    }
}

TEST(Boundary, TwistedRaysFailTheCauchyCheck) {
    auto p = probe_ray(twisting_map(), I, 0.4, 64, 8, 0.9);
    ASSERT_GE(p.speed_hat, 0.9);
    const auto bp = boundary_point(p, 1.0, 1.0);
    EXPECT_FALSE(bp);
    EXPECT_NE(bp.diagnostics.find("horizon 64"), std::string::npos);
    EXPECT_FALSE(p.boundary_found);
    auto slow = probe_ray(constant_map(H2, H2, I), I, 0.4, 16, 4, 0.5);
    EXPECT_THROW(boundary_point(slow, 1.0, 1.0), usage_error);
}

TEST(Boundary, MinimalArcCover) {
    EXPECT_EQ(min_arc_cover({}, 0.1), 0);
    for (double d : {0.05, 0.1, 0.3, 1.0, 4.0}) EXPECT_EQ(min_arc_cover({{0.0, 2 * pi}}, d), std::ceil(pi / d));
    EXPECT_EQ(min_arc_cover({{0.0, 1.0}}, 0.25), 2);
    EXPECT_EQ(min_arc_cover({{0.0, 1.0}}, 0.24), 3);
    EXPECT_EQ(min_arc_cover({{2 * pi - 0.1, 2 * pi}, {0.0, 0.1}}, 0.1), 1);
    EXPECT_EQ(min_arc_cover({{0.0, 0.1}, {0.15, 0.2}, {3.0, 3.05}}, 0.1), 2);
    EXPECT_EQ(min_arc_cover({{0.0, 0.5}, {0.9, 1.1}, {1.3, 1.8}}, 0.25), 3);
    // components meeting across 0 form one arc of length 1
    EXPECT_EQ(min_arc_cover({{2 * pi - 0.4, 2 * pi}, {0.0, 0.6}}, 0.25), 2);
    EXPECT_THROW(min_arc_cover({{0.0, 1.0}}, 0.0), usage_error);
}

TEST(Boundary, PropertyCCoverCountOracles) {
    const MapSpec id = identity_map(H2);
    for (double delta : {0.05, 0.2})
        EXPECT_EQ(property_c_cover_count(id, I, I, 10.0, 2.0, delta, 1 << 10), std::ceil(pi / delta));
    EXPECT_EQ(property_c_cover_count(id, I, I, 0.5, 2.0, 0.05, 1 << 10), 0);
    EXPECT_THROW(property_c_cover_count(id, I, I, 0.5, 2.0, 0.01, 1 << 10), usage_error);
}

TEST(Boundary, PropertyCFitIdentity) {
    const CurvatureData K{1.0, 1.0, 2};
    const auto fit = fit_property_c(identity_map(H2), I, 1.01, K, {2, 3, 4}, {5, 6}, 1.0, 1 << 14);
    EXPECT_GT(fit.C1, 0.0);
    EXPECT_TRUE(fit.test_pass()) << fit.worst_test_ratio;
    for (std::size_t i = 0; i < fit.r.size(); ++i) {
        EXPECT_EQ(fit.counts[i], std::ceil(pi / (fit.C2 * std::exp(-fit.r[i]))));
        EXPECT_LE(fit.counts[i], fit.bounds[i] * (1 + 1e-12));
    }
}

TEST(Boundary, ConstantsArithmetic) {
    EXPECT_NEAR(beta_alpha(0.25, 1.0), 1.0 / 24, 1e-15);
    EXPECT_NEAR(nu_alpha({1.0, 1.0, 2}, 0.25), 0.5, 1e-15);
    EXPECT_NEAR(c3_constant(1, 1, 1.0, 0.5, 1.0), 2.5414940825367984, 1e-12);
    EXPECT_EQ(fiber_n0(1.0, 1.0, beta_alpha(0.9, 1.0)), 118);
    EXPECT_EQ(fiber_n0(1.0, 1.0, 1.0), 47);
    EXPECT_THROW(c3_constant(1, 1, 0.5, 0.5, 1.0), usage_error);
}

TEST(Boundary, IdentityHasNoExceptionalDirections) {
    const CurvatureData K{1.0, 1.0, 2};
    const auto row = exceptional_set_content(identity_map(H2), I, 0.25, 2, 1.0, K, 1.0, 1.0, 1 << 10, 32);
    EXPECT_EQ(row.content, 0.0);
    EXPECT_LE(row.content, row.bound);
    EXPECT_THROW(exceptional_set_content(identity_map(H2), I, 0.25, 2, 0.5, K, 1.0, 1.0, 1 << 10, 32), usage_error);
}

TEST(Boundary, SpiralContentDecaysAndTransfers) {
    const MapSpec& f = spiral().map;
    const CurvatureData K{1.0, 1.0, 3};
    const double alpha = 1.0 / 6, nu = 1.0, na = nu_alpha(K, alpha);
    const auto fit = fit_property_c(f, I, alpha, K, {2, 3, 4}, {5, 6}, nu, 1 << 14);
    EXPECT_TRUE(fit.test_pass()) << fit.worst_test_ratio;
    const auto scan = scan_directions(f, I, 1 << 12, 64);
    std::vector<ContentRow> rows;
    HarmonicMeasureEstimate uniform;
    uniform.exact_uniform = true;
    for (int n0 = 2; n0 <= 10; ++n0) {
        rows.push_back(exceptional_set_content(scan, alpha, n0, nu, K, fit.C1, fit.C2));
        if (rows.size() > 1) {
            EXPECT_LE(rows.back().content, rows[rows.size() - 2].content * (1 + 1e-12));
        }
        const auto tr = frostman_transfer(exceptional_arcs(scan, alpha, n0), uniform, 2 * pi,
                                          c3_constant(fit.C1, fit.C2, nu, na, K.a), nu, na, K.a, n0);
        EXPECT_TRUE(tr.pass()) << n0 << ' ' << tr.sigma << ' ' << tr.bound;
    }
    EXPECT_GT(rows.back().content, 0.0);
    EXPECT_LE(log_linear_slope(rows), -K.a * (nu - na) + 0.1);
    std::ostringstream os;
    write_content_csv(os, rows);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "n0,nu,content,paper_bound");
}

TEST(Boundary, ExceptionalSetsAreMonotone) {
    const auto scan = scan_directions(spiral().map, I, 1 << 10, 48);
    for (double alpha : {0.1, 0.3, 0.6})
        for (int n0 = 1; n0 < 12; ++n0) {
            const auto A = grid_membership(scan, alpha, n0), B = grid_membership(scan, alpha, n0 + 1);
            const auto C = grid_membership(scan, alpha * 1.5, n0);
            for (int i = 0; i < scan.size(); ++i) {
                EXPECT_LE(B[i], A[i]);
                EXPECT_LE(A[i], C[i]);
            }
        }
}

TEST(Boundary, FiberPairsOfTheIdentity) {
    const CurvatureData K{1.0, 1.0, 2};
    const double alpha = 0.9, c = 1.0;
    const int n0 = fiber_n0(K.a, c, beta_alpha(alpha, c));
    const MapSpec id = identity_map(H2);
    const auto xi = probe_ray(id, I, 0.3, 600, n0, alpha);
    const auto same = classify_fiber_pair(xi, xi, alpha, n0, K, c);
    EXPECT_TRUE(same.in_B);
    EXPECT_EQ(same.violations, 0);
    for (double t : {0.3 + pi, 1.0, 5.5}) {
        const auto eta = probe_ray(id, I, t, 600, n0, alpha);
        const auto r = classify_fiber_pair(xi, eta, alpha, n0, K, c);
        EXPECT_FALSE(r.in_B);
        EXPECT_GT(r.pairs_checked, 0);
        EXPECT_EQ(r.violations, 0);
        EXPECT_NEAR(r.min_angle, angle_gap(t, 0.3), 1e-9);
        EXPECT_GE(r.min_angle, r.floor);
    }
    EXPECT_THROW(classify_fiber_pair(xi, xi, alpha, n0 - 1, K, c), usage_error);
}

TEST(Boundary, AngleLemmaOnSyntheticSequences) {
    const CurvatureData K{1.0, 1.0, 2};
    const double c = 1.2, alpha = 1.0, beta = 1.0;
    Rng rng(derive_seed(7, 0));
    int held = 0;
    for (int k = 0; k < 12; ++k) {
        // base point off the axis: the rays to infinity and to 0 meet at an angle in (0, pi]
        const Point y0{uniform(rng, -3.0, 3.0), uniform(rng, 0.5, 2.0), 0.0};
        const auto ys = wobbly_ray(y0, false, 1.05, 0.05, 350, rng);
        const auto zs = wobbly_ray(y0, true, 1.05, 0.05, 350, rng);
        const double gap = vec_angle({0.0, 1.0, 0.0}, log_map(H2, y0, {0.0, 1e-12, 0.0}));
        const auto r = check_angle_lemma(H2, ys, zs, K, c, alpha, beta);
        EXPECT_EQ(r.n0, 70);
        ASSERT_TRUE(r.hypotheses_hold) << r.failed_hypothesis << " gap " << gap;
        held += r.hypotheses_hold;
        EXPECT_EQ(r.violations, 0);
        EXPECT_GE(r.min_angle, r.floor);
        EXPECT_NEAR(r.min_angle, gap, 1e-6);
    }
    EXPECT_EQ(held, 12);
    // a sequence paired with itself breaks the separation hypothesis
    const auto ys = wobbly_ray(I, false, 1.05, 0.05, 350, rng);
    const auto r = check_angle_lemma(H2, ys, ys, K, c, alpha, beta);
    EXPECT_FALSE(r.hypotheses_hold);
    EXPECT_NE(r.failed_hypothesis.find("beta"), std::string::npos);
}

TEST(Boundary, ProbeCsv) {
    std::vector<ProbeRow> rows;
    for (double t : {0.0, pi / 2}) {
        auto p = probe_ray(spiral().map, I, t, 32, 8, 0.5);
        rows.push_back(probe_row(p, 1.0, 1.0));
    }
    EXPECT_FALSE(std::isnan(rows[0].boundary_angle));
    EXPECT_TRUE(rows[1].in_A);
    EXPECT_TRUE(std::isnan(rows[1].boundary_angle));
    std::ostringstream os;
    write_probe_csv(os, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "angle,speed_hat,inA,boundary_angle");
    int n = 0;
    while (std::getline(is, line)) ++n;
    EXPECT_EQ(n, 2);
}
