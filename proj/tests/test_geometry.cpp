#include <gtest/gtest.h>

#include "hhmap/geometry.hpp"

using namespace hhmap;

namespace {

const ModelSpace H2 = make_space(Model::halfplane2);
const ModelSpace D2 = make_space(Model::disk2);
const ModelSpace H3 = make_space(Model::halfspace3);

// Composite Simpson rule.
template <class F>
double simpson(F f, double lo, double hi, int n = 2000) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST(Geometry, DistVerticalAndZero) {
    EXPECT_NEAR(dist(H2, {0, 1, 0}, {0, std::exp(1.0), 0}), 1.0, 1e-14);
    EXPECT_EQ(dist(H2, {0.3, 2, 0}, {0.3, 2, 0}), 0.0);
}

TEST(Geometry, DistMatchesMetricIntegration) {
    // geodesic from (0,1) to (1,1): arc of the circle centred (1/2,0), radius sqrt(5/4)
    const double r = std::sqrt(1.25);
    const double t0 = std::atan2(1.0, 0.5), t1 = std::atan2(1.0, -0.5);
    const double oracle = simpson([&](double t) { return r / (r * std::sin(t)); }, t0, t1);
    const double d = dist(H2, {0, 1, 0}, {1, 1, 0});
    EXPECT_NEAR(d, oracle, 1e-10);
    EXPECT_NEAR(d, 0.9624236501192069, 1e-12);
}

TEST(Geometry, CurvatureScalesDistance) {
    const ModelSpace H2a = make_space(Model::halfplane2, 2.0);
    EXPECT_NEAR(dist(H2a, {0, 1, 0}, {1, 1, 0}), 0.5 * 0.9624236501192069, 1e-12);
    EXPECT_THROW(make_space(Model::disk2, -1.0), usage_error);
}

TEST(Geometry, DiskAndHalfPlaneAgreeThroughCayley) {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const Point p = random_point(H2, rng, 5.0), q = random_point(H2, rng, 5.0);
        EXPECT_NEAR(dist(D2, halfplane_to_disk(p), halfplane_to_disk(q)), dist(H2, p, q), 1e-8);
    }
    EXPECT_NEAR(norm(halfplane_to_disk({0, 1, 0})), 0.0, 1e-15);
}

TEST(Geometry, ExpLogBasics) {
    const Point o{0, 1, 0};
    EXPECT_EQ(exp_map(H2, o, {0.4, -0.2, 0}, 0.0), o);
    const Point up = exp_map(H2, o, {0, 1, 0}, 1.0);
    EXPECT_NEAR(up[0], 0.0, 1e-15);
    EXPECT_NEAR(up[1], std::exp(1.0), 1e-13);
    EXPECT_EQ(log_map(H2, o, o), (Tangent{0, 0, 0}));
}

TEST(Geometry, ExpLogRoundTripAllModels) {
    Rng rng(11);
    for (const ModelSpace& X : {H2, D2, H3, make_space(Model::halfplane2, 0.7)}) {
        double worst = 0.0, worst_len = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const Point p = random_point(X, rng, 6.0), q = random_point(X, rng, 6.0);
            const Tangent v = log_map(X, p, q);
            const Point q2 = exp_map(X, p, v);
            worst = std::max(worst, dist(X, q, q2));
            worst_len = std::max(worst_len, std::abs(metric_norm(X, p, v) - dist(X, p, q)));
        }
        EXPECT_LT(worst, 1e-10) << model_name(X.model);
        EXPECT_LT(worst_len, 1e-10) << model_name(X.model);
    }
}

TEST(Geometry, GeodesicAdditivity) {
    Rng rng(3);
    for (const ModelSpace& X : {H2, D2, H3}) {
        for (int i = 0; i < 300; ++i) {
            const Point p = random_point(X, rng, 4.0);
            const Tangent v = random_unit(X, p, rng);
            const double s = uniform(rng, 0.1, 3.0), t = uniform(rng, 0.1, 3.0);
            const Point q = exp_map(X, p, v, s);
            const Point direct = exp_map(X, p, v, s + t);
            const Point stitched = exp_map(X, q, -1.0 * log_map(X, q, p), t / s);
            EXPECT_LT(dist(X, direct, stitched), 1e-9);
        }
    }
}

TEST(Geometry, GromovProduct) {
    const Point x0{0.2, 1.5, 0};
    EXPECT_NEAR(gromov_product(H2, x0, x0, {1, 1, 0}), 0.0, 1e-15);
    EXPECT_NEAR(gromov_product(H2, {0, 1, 0}, {0, std::exp(-2.0), 0}, {0, std::exp(2.0), 0}), 0.0, 1e-12);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Point a = random_point(H2, rng, 5), b = random_point(H2, rng, 5), c = random_point(H2, rng, 5);
        const double g = gromov_product(H2, a, b, c);
        EXPECT_NEAR(g, 0.5 * (dist(H2, a, b) + dist(H2, a, c) - dist(H2, b, c)), 1e-12);
        EXPECT_LE(g, std::min(dist(H2, a, b), dist(H2, a, c)) + 1e-12);
    }
}

TEST(Geometry, AngleAt) {
    const Point x0{0, 1, 0};
    EXPECT_NEAR(angle_at(H2, x0, {1, 2, 0}, {1, 2, 0}), 0.0, 1e-15);
    EXPECT_NEAR(angle_at(H2, x0, {0, 3, 0}, {0, 0.25, 0}), pi, 1e-14);
    EXPECT_EQ(angle_at(H2, x0, x0, {0, 2, 0}), 0.0);
}

TEST(Geometry, LawOfCosines) {
    Rng rng(9);
    for (const ModelSpace& X : {H2, D2, H3, make_space(Model::halfspace3, 1.6)}) {
        const double a = X.a;
        for (int i = 0; i < 1000; ++i) {
            const Point p = random_point(X, rng, 4), q = random_point(X, rng, 4), r = random_point(X, rng, 4);
            const double b1 = dist(X, p, q), b2 = dist(X, p, r), th = angle_at(X, p, q, r);
            const double c = std::acosh(std::cosh(a * b1) * std::cosh(a * b2) -
                                        std::sinh(a * b1) * std::sinh(a * b2) * std::cos(th)) /
                             a;
            EXPECT_NEAR(c, dist(X, q, r), 1e-9 * std::max(1.0, c));
        }
    }
}

TEST(Geometry, ComparisonLemmaProperties) {
    Rng rng(21);
    int checked_c = 0;
    for (const ModelSpace& X : {H2, D2, H3}) {
        const double a = X.a, b = X.a;
        for (int i = 0; i < 3000; ++i) {
            const Point x0 = random_point(X, rng, 6), x1 = random_point(X, rng, 6), x2 = random_point(X, rng, 6);
            const double th = angle_at(X, x0, x1, x2);
            EXPECT_GE(gromov_product(X, x1, x0, x2) + 1e-9, dist(X, x0, x1) * sqr(std::sin(th / 2)));
            const double g = gromov_product(X, x0, x1, x2);
            EXPECT_LE(th, 4.0 * std::exp(-a * g) + 1e-9);
            if (std::min(gromov_product(X, x2, x0, x1), gromov_product(X, x1, x0, x2)) >= 1.0 / b) {
                ++checked_c;
                EXPECT_GE(th + 1e-9, std::exp(-b * g));
            }
        }
    }
    EXPECT_GT(checked_c, 100);
}

TEST(Geometry, MedianInequality) {
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        const Point y = random_point(H2, rng, 5), y1 = random_point(H2, rng, 5), y2 = random_point(H2, rng, 5);
        const Point y3 = geodesic_midpoint(H2, y1, y2);
        EXPECT_LE(0.5 * sqr(dist(H2, y1, y2)),
                  sqr(dist(H2, y, y1)) + sqr(dist(H2, y, y2)) - 2 * sqr(dist(H2, y, y3)) + 1e-9);
    }
}

TEST(Geometry, HessianRadialOrthogonalAsymptote) {
    const Point x0{0, 1, 0};
    const Point z{0, std::exp(1.0), 0};  // d = 1 straight up
    const Mat3 H = hessian_dist(H2, x0, z);
    const Tangent radial{0, z[1], 0};       // unit at z
    const Tangent transverse{z[1], 0, 0};   // unit, orthogonal
    EXPECT_NEAR(bilinear(H, radial, radial), 0.0, 1e-12);
    // oracle: second difference of the distance along the transverse geodesic
    EXPECT_NEAR(hessian_dist_fd(H2, x0, z, transverse), 1.3130352854993315, 1e-6);
    EXPECT_NEAR(bilinear(H, transverse, transverse), 1.3130352854993315, 1e-12);
    const Point far{0, std::exp(20.0), 0};
    EXPECT_NEAR(bilinear(hessian_dist(H2, x0, far), {far[1], 0, 0}, {far[1], 0, 0}), 1.0, 1e-12);
    EXPECT_THROW(hessian_dist(H2, x0, x0), usage_error);
}

TEST(Geometry, HessianMatchesFiniteDifferences) {
    Rng rng(17);
    for (const ModelSpace& X : {H2, D2, H3, make_space(Model::halfplane2, 1.5)}) {
        for (int i = 0; i < 200; ++i) {
            const Point x0 = random_point(X, rng, 3), z = random_point(X, rng, 3);
            if (dist(X, x0, z) < 0.2) continue;
            const Tangent v = random_unit(X, z, rng);
            EXPECT_NEAR(hessian_dist_fd(X, x0, z, v), bilinear(hessian_dist(X, x0, z), v, v), 1e-3);
        }
    }
}

TEST(Geometry, LaplacianOfDistanceAndG) {
    EXPECT_NEAR(laplace_beltrami_fd(H2, [](const Point&) { return 3.0; }, {0.1, 0.7, 0}), 0.0, 1e-12);
    Rng rng(19);
    for (const ModelSpace& X : {H2, D2, H3}) {
        const Point x0 = origin(X);
        for (int i = 0; i < 100; ++i) {
            const Point p = random_point(X, rng, 3.0);
            const double d = dist(X, x0, p);
            if (d < 0.1) continue;
            const double lap = laplace_beltrami_fd(X, [&](const Point& q) { return dist(X, x0, q); }, p);
            EXPECT_GE(lap, X.a - 1e-3);
            EXPECT_NEAR(lap, (X.dim() - 1) * X.a / std::tanh(X.a * d), 1e-3);
        }
    }
    for (int i = 0; i < 100; ++i) {
        const Point p = random_point(H2, rng, 3.0);
        const double lap = laplace_beltrami_fd(
            H2, [](const Point& q) { return 2.0 * std::log(std::cosh(dist(H2, {0, 1, 0}, q) / 2.0)); }, p);
        EXPECT_NEAR(lap, 1.0, 1e-3);
    }
}

TEST(Geometry, BallVolume) {
    EXPECT_NEAR(ball_volume(H2, 1e-3) / (pi * 1e-6), 1.0, 1e-6);
    const double oracle = simpson([](double r) { return 2 * pi * std::sinh(r); }, 0.0, 1.0);
    EXPECT_NEAR(ball_volume(H2, 1.0), oracle, 1e-10);
    EXPECT_NEAR(ball_volume(H2, 1.0), 3.412276265284902, 1e-12);
    const double oracle3 = simpson([](double r) { return 4 * pi * sqr(std::sinh(r)); }, 0.0, 2.0);
    EXPECT_NEAR(ball_volume(H3, 2.0), oracle3, 1e-8);
    const double v10 = ball_volume(H2, 10) / (2 * pi), v20 = ball_volume(H2, 20) / (2 * pi);
    EXPECT_NEAR(std::log(v20) / std::log(v10), 2.0, 0.1);
    EXPECT_THROW(ball_volume(H2, 0.0), usage_error);
}

TEST(Geometry, ProjectionOntoGeodesic) {
    const Geodesic g = make_geodesic(H2, {0, 1, 0}, {0, 1, 0});  // the imaginary axis
    const Point on = {0, 3, 0};
    const Projection pr = project_to_geodesic(H2, on, g);
    EXPECT_LT(dist(H2, pr.foot, on), 1e-12);
    EXPECT_NEAR(pr.t, std::log(3.0), 1e-12);
    EXPECT_NEAR(projection_contraction_fd(H2, on, g), 1.0, 1e-6);

    // point at distance 1 from the axis, foot at (0,1)
    const Point y = exp_map(H2, {0, 1, 0}, {1, 0, 0}, 1.0);
    const Projection py = project_to_geodesic(H2, y, g);
    EXPECT_NEAR(py.distance, 1.0, 1e-12);
    EXPECT_NEAR(projection_contraction_fd(H2, y, g), 0.6480542736638855, 1e-6);

    Rng rng(23);
    for (const ModelSpace& X : {H2, D2, H3}) {
        for (int i = 0; i < 200; ++i) {
            const Point base = random_point(X, rng, 2);
            const Geodesic gi = make_geodesic(X, base, random_unit(X, base, rng));
            const Point q = random_point(X, rng, 3);
            const Projection p = project_to_geodesic(X, q, gi);
            for (double dt : {-1e-3, 1e-3})
                EXPECT_LE(p.distance, dist(X, q, geodesic_point(X, gi, p.t + dt)) + 1e-12);
            EXPECT_NEAR(dist(X, q, p.foot), p.distance, 1e-9);
            const double contraction = projection_contraction_fd(X, q, gi);
            EXPECT_NEAR(contraction, 1.0 / std::cosh(X.a * p.distance), 1e-5);
            EXPECT_LE(contraction, 2.0 * std::exp(-X.a * p.distance) + 1e-6);
        }
    }
}

TEST(Geometry, AngleComparisonFloor) {
    EXPECT_NEAR(angle_comparison_floor(1.0, 0.0), pi / 4, 1e-15);
    EXPECT_NEAR(angle_comparison_floor(1.0, 1.0), 0.5750061825784119, 1e-14);
    EXPECT_GE(angle_comparison_floor(1.0, 3.0), 0.5 * std::exp(-3.0));
    for (double b : {0.3, 1.0, 2.0, 5.0})
        for (double R = 0.0; R < 20; R += 0.37) EXPECT_GE(angle_comparison_floor(b, R), 0.5 * std::exp(-b * R));
}
