#include <gtest/gtest.h>

#include <sstream>

#include "hhmap/solver.hpp"

using namespace hhmap;

namespace {
const ModelSpace H2 = make_space(Model::halfplane2);

double max_node_error(const DiscreteMap& h, const MapSpec& f) { return sup_distance(h, f).rho; }

// h1(x) = exp_{h0(x)} of a unit vector turning with x
DiscreteMap unit_offset(const DiscreteMap& h0) {
    DiscreteMap h1 = h0;
    for (int i = 0; i < h0.mesh->size(); ++i) {
        const Point& x = h0.mesh->nodes[i];
        const double phi = 0.7 * x[0] + 0.4 * std::log(x[1]) + 0.3;
        const Point& y = h0.values[i];
        const Tangent v = Tangent{std::cos(phi), std::sin(phi), 0.0} / conformal_factor(h0.target, y);
        h1.values[i] = exp_map(h0.target, y, v);
    }
    return h1;
}
}  // namespace

TEST(Solver, FornbergWeights) {
    const auto w = fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 2);
    const double d1[5] = {1, -8, 0, 8, -1}, d2[5] = {-1, 16, -30, 16, -1};
    for (int o = 0; o < 5; ++o) {
        EXPECT_NEAR(w[1][o], d1[o] / 12, 1e-14);
        EXPECT_NEAR(w[2][o], d2[o] / 12, 1e-14);
    }
    // one-sided stencil differentiates quartics exactly
    const std::vector<double> xs{-4, -3, -2, -1, 0, 1};
    const auto v = fornberg_weights(0.0, xs, 2);
    double acc = 0.0;
    for (int o = 0; o < 6; ++o) acc += v[2][o] * std::pow(xs[o] + 0.5, 4);
    EXPECT_NEAR(acc, 12 * 0.25, 1e-11);
}

TEST(Solver, MeshCountsAndBoundary) {
    const auto m = build_polar_mesh(H2, 1.0, 8, 16);
    EXPECT_EQ(m->size(), 129);
    double err = 0.0;
    for (int i = 0; i < m->size(); ++i)
        if (m->boundary[i]) err = std::max(err, std::abs(dist(H2, m->centre, m->nodes[i]) - 1.0));
    EXPECT_LT(err, 1e-10);
    for (double a : {1.0, 0.5}) {
        const ModelSpace D = make_space(Model::disk2, a);
        const auto md = build_polar_mesh(D, 3.0, 8, 16);
        for (int i = 0; i < md->size(); ++i)
            if (md->boundary[i]) {
                EXPECT_NEAR(std::hypot(md->nodes[i][0], md->nodes[i][1]), std::tanh(a * 3.0 / 2), 1e-12);
            }
    }
    EXPECT_THROW(build_polar_mesh(H2, 1.0, 7, 16), usage_error);
    EXPECT_THROW(build_polar_mesh(H2, 1.0, 8, 15), usage_error);
    EXPECT_THROW(build_polar_mesh(H2, 0.0, 8, 16), usage_error);
    EXPECT_THROW(build_polar_mesh(make_space(Model::halfspace3), 1.0, 8, 16), usage_error);
}

TEST(Solver, GradedMesh) {
    const auto m = build_polar_mesh(H2, 6.0, 24, 32, 0.5);
    for (int i = 1; i <= m->n_r; ++i) {
        const int c = m->ring_count[i];
        EXPECT_EQ(c % 32, 0);
        EXPECT_EQ((c / 32) & (c / 32 - 1), 0);  // power of two
        if (i > 2) {
            EXPECT_LE(2 * pi * std::sinh(i * m->ds) / c, 0.5 + 1e-12);
        }
        if (i > 1) {
            EXPECT_GE(c, m->ring_count[i - 1]);
        }
    }
    EXPECT_EQ(m->ring_count[1], 32);
    EXPECT_EQ(m->ring_count[2], 32);
    double err = 0.0;
    for (int i = 0; i < m->size(); ++i)
        if (m->boundary[i]) err = std::max(err, std::abs(dist(H2, m->centre, m->nodes[i]) - 6.0));
    EXPECT_LT(err, 1e-10);
}

TEST(Solver, QuadratureWeightsMatchBallVolume) {
    for (double R : {1.0, 3.0}) {
        const auto m = build_polar_mesh(H2, R, 64, 128);
        double area = 0.0;
        for (double w : m->weight) area += w;
        EXPECT_NEAR(area / ball_volume(H2, R), 1.0, 1e-3) << R;
    }
}

TEST(Solver, LaplacianConvergesOnConformalOracle) {
    // u = |z|^2 in disk coordinates: Lap u = lambda^-2 * 4 = (1 - |z|^2)^2
    const ModelSpace D = make_space(Model::disk2);
    std::vector<double> errs;
    for (int n : {16, 32}) {
        const auto m = build_polar_mesh(D, 2.0, n, 2 * n);
        std::vector<double> u(m->size());
        for (int i = 0; i < m->size(); ++i) u[i] = sqr(m->nodes[i][0]) + sqr(m->nodes[i][1]);
        const auto L = mesh_laplacian(*m, u);
        double e = 0.0;
        for (int i = 0; i < m->size(); ++i)
            if (!m->boundary[i]) e = std::max(e, std::abs(L[i] - sqr(1 - u[i])));
        errs.push_back(e);
    }
    EXPECT_GE(errs[0] / errs[1], 4.0);
    // Euclidean-linear functions are harmonic
    const auto m = build_polar_mesh(D, 2.0, 32, 64);
    std::vector<double> x(m->size());
    for (int i = 0; i < m->size(); ++i) x[i] = 0.3 * m->nodes[i][0] - 1.1 * m->nodes[i][1];
    const auto L = mesh_laplacian(*m, x);
    for (int i = 0; i < m->size(); ++i)
        if (!m->boundary[i]) {
            EXPECT_NEAR(L[i], 0.0, 1e-4);
        }
}

TEST(Solver, TensionOfConstantMapIsZero) {
    const auto m = build_polar_mesh(H2, 2.0, 16, 32);
    const auto h = sample_map(constant_map(H2, H2, {0.4, 2.0, 0}), m);
    const auto t = tension_data(h);
    for (int i = 0; i < m->size(); ++i) {
        EXPECT_EQ(t.norm[i], 0.0);
        EXPECT_EQ(t.energy_density[i], 0.0);
    }
    EXPECT_THROW(tension_field(h, m->size() - 1), usage_error);
    EXPECT_THROW(tension_field(h, -1), usage_error);
    EXPECT_NO_THROW(tension_field(h, 0));
}

TEST(Solver, TensionResidualConvergesForHarmonicMaps) {
    for (const MapSpec& f : {identity_map(H2), sinh_family_map(1.0)}) {
        std::vector<double> r;
        for (int n : {16, 32, 64}) r.push_back(tension_residual_sup(sample_map(f, build_polar_mesh(H2, 1.0, n, 2 * n))));
        EXPECT_GE(r[0] / r[1], 3.5) << f.name;
        EXPECT_GE(r[1] / r[2], 3.5) << f.name;
    }
    // a non-harmonic map keeps a residual bounded away from zero
    const double rp = tension_residual_sup(sample_map(parabolic_sq_map(), build_polar_mesh(H2, 1.0, 64, 128)));
    EXPECT_GT(rp, 0.1);
}

TEST(Solver, DirichletRecoversClosedForms) {
    const MapSpec ha = sinh_family_map(1.0);
    for (int n : {16, 32, 64}) {
        const auto m = build_polar_mesh(H2, 1.0, n, 2 * n);
        const double h = m->ds;
        const SolveResult r = solve_dirichlet(ha, m);
        ASSERT_TRUE(r.converged);
        EXPECT_LT(r.tension_residual_sup, 1e-8);
        EXPECT_LE(max_node_error(r.map, ha), 5 * h * h) << n;
        const SolveResult id = solve_dirichlet(identity_map(H2), m);
        ASSERT_TRUE(id.converged);
        EXPECT_LE(max_node_error(id.map, identity_map(H2)), 5 * h * h) << n;
    }
}

TEST(Solver, UniquenessUnderInitialisation) {
    const MapSpec f = scale_map(2.0, 1.0);
    const auto m = build_polar_mesh(H2, 4.0, 16, 32, 0.5);
    SolveOptions opt;
    const SolveResult a = solve_dirichlet(f, m, opt, InitKind::boundary_map);
    const SolveResult b = solve_dirichlet(f, m, opt, InitKind::constant);
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    const auto d = distance_field(a.map, b.map);
    EXPECT_LT(*std::max_element(d.begin(), d.end()), 10 * opt.tol);
}

TEST(Solver, CounterexampleDistanceGrows) {
    const MapSpec f = parabolic_sq_map();
    double prev = 0.0;
    for (double R : {2.0, 3.0, 4.0, 5.0}) {
        const auto m = build_polar_mesh(H2, R, static_cast<int>(4 * R), 32, 0.5);
        const SolveResult r = solve_dirichlet(f, m);
        ASSERT_TRUE(r.converged) << R;
        const double rho = sup_distance(r.map, f).rho;
        EXPECT_GT(rho, prev) << R;
        prev = rho;
    }
    // the QI stretch plateaus
    std::vector<double> rho;
    for (double R : {4.0, 5.0}) {
        const auto m = build_polar_mesh(H2, R, static_cast<int>(4 * R), 32, 0.5);
        rho.push_back(sup_distance(solve_dirichlet(scale_map(2.0, 1.0), m).map, scale_map(2.0, 1.0)).rho);
    }
    EXPECT_NEAR(rho[1] / rho[0], 1.0, 0.02);
}

TEST(Solver, SupDistanceBasics) {
    const auto m = build_polar_mesh(H2, 1.0, 8, 16);
    const MapSpec f = parabolic_sq_map();
    EXPECT_EQ(sup_distance(sample_map(f, m), f).rho, 0.0);
    DiscreteMap h = sample_map(f, m);
    h.values[37] = exp_map(H2, h.values[37], Tangent{0, h.values[37][1], 0}, 0.25);
    const SupDistance s = sup_distance(h, f);
    EXPECT_EQ(s.node, 37);
    EXPECT_NEAR(s.rho, 0.25, 1e-12);
}

TEST(Solver, SubharmonicityOfDistanceFields) {
    const auto m = build_polar_mesh(H2, 1.0, 32, 64);
    const SolveResult ha = solve_dirichlet(sinh_family_map(1.0), m);
    const SolveResult pq = solve_dirichlet(parabolic_sq_map(), m);
    for (const Point& y0 : {Point{0.3, 1.4, 0}, Point{-2.0, 0.5, 0}, Point{0.0, 1.0, 0}}) {
        for (const SolveResult* r : {&ha, &pq}) {
            std::vector<double> rho(m->size());
            for (int i = 0; i < m->size(); ++i) rho[i] = dist(H2, y0, r->map.values[i]);
            EXPECT_TRUE(check_subharmonic(*m, rho, 1e-6).pass());
        }
    }
    EXPECT_TRUE(check_subharmonic(*m, distance_field(ha.map, pq.map), 1e-6).pass());
    // concave bump
    std::vector<double> bump(m->size());
    for (int i = 0; i < m->size(); ++i) bump[i] = -sqr(m->s[i]);
    const auto rep = check_subharmonic(*m, bump, 1e-6);
    EXPECT_FALSE(rep.pass());
    EXPECT_EQ(rep.negative_nodes.size(), static_cast<size_t>(m->size() - m->ring_count[m->n_r]));
    EXPECT_LT(rep.min_laplacian, -1.0);
    EXPECT_THROW(check_subharmonic(*m, {1.0, 2.0}, 1e-6), usage_error);
}

TEST(Solver, MaximumPrincipleForScalarDirichlet) {
    const auto m = build_polar_mesh(H2, 2.0, 32, 64);
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> b(m->size(), 0.0);
        double lo = 1e300, hi = -1e300;
        const double c1 = normal01(rng), c3 = normal01(rng), s2 = normal01(rng);
        for (int i = 0; i < m->size(); ++i)
            if (m->boundary[i]) {
                const double t = m->theta[i];
                b[i] = c1 * std::cos(t) + c3 * std::cos(3 * t) + s2 * std::sin(2 * t) + (t < 1.0 ? 1.0 : 0.0);
                lo = std::min(lo, b[i]);
                hi = std::max(hi, b[i]);
            }
        const auto u = solve_scalar_dirichlet(*m, b);
        for (int i = 0; i < m->size(); ++i) {
            EXPECT_GE(u[i], lo - 1e-12);
            EXPECT_LE(u[i], hi + 1e-12);
        }
    }
}

TEST(Solver, EnergyDecreasesAlongFlow) {
    const MapSpec f = scale_map(2.0, 1.0);
    const auto m = build_polar_mesh(H2, 2.0, 16, 32);
    DiscreteMap start = sample_map(f, m);
    for (int i = 0; i < m->size(); ++i)
        if (!m->boundary[i]) {
            const Point y = start.values[i];
            start.values[i] = exp_map(H2, y, Tangent{std::cos(m->theta[i]), std::sin(m->theta[i]), 0} * y[1],
                                      0.5 * std::sin(pi * m->s[i] / 2));
        }
    SolveOptions opt;
    opt.dt0 = opt.dt_max = 1e-3;
    opt.max_iter = 200;
    const SolveResult r = detail::heat_flow(f, start, opt);
    ASSERT_GE(r.energy_history.size(), 100u);
    for (size_t i = 1; i < r.energy_history.size(); ++i) EXPECT_LT(r.energy_history[i], r.energy_history[i - 1]) << i;
    EXPECT_LT(r.energy_history.back(), 0.9 * r.energy_history.front());
}

TEST(Solver, SolverErrors) {
    const auto m = build_polar_mesh(H2, 1.0, 8, 16);
    EXPECT_THROW(solve_dirichlet(identity_map(make_space(Model::disk2)), m), usage_error);
    EXPECT_THROW(solve_dirichlet(identity_map(make_space(Model::halfplane2, 2.0)), m), usage_error);
    SolveOptions bad;
    bad.tol = 0;
    EXPECT_THROW(solve_dirichlet(identity_map(H2), m, bad), usage_error);
    // iteration cap: flagged, not thrown
    SolveOptions capped;
    capped.max_iter = 1;
    const SolveResult r = solve_dirichlet(parabolic_sq_map(), m, capped);
    EXPECT_FALSE(r.converged);
    EXPECT_GE(r.tension_residual_sup, capped.tol);
    // the height floor is enforced with an error, never clamped
    SolveOptions floor;
    floor.min_height = 1.5;
    try {
        solve_dirichlet(parabolic_sq_map(), m, floor);
        ADD_FAILURE() << "expected numeric_error";
    } catch (const numeric_error& e) {
        EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
    }
}

TEST(Solver, GeodesicInterpolation) {
    const auto m = build_polar_mesh(H2, 1.0, 16, 32);
    const DiscreteMap h0 = sample_map(identity_map(H2), m);
    const DiscreteMap h1 = sample_map(parabolic_sq_map(), m);
    EXPECT_EQ(geodesic_interpolate(h0, h1, 0.0).values, h0.values);
    EXPECT_EQ(geodesic_interpolate(h0, h1, 1.0).values, h1.values);
    for (double t : {0.2, 0.5, 0.9}) {
        const auto a = geodesic_interpolate(h0, h1, t), b = geodesic_interpolate(h1, h0, 1 - t);
        for (int i = 0; i < m->size(); ++i) {
            EXPECT_LT(dist(H2, a.values[i], b.values[i]), 1e-10);
            const double d = dist(H2, h0.values[i], h1.values[i]);
            EXPECT_NEAR(dist(H2, h0.values[i], a.values[i]), t * d, 1e-10);
        }
    }
    // coincident points
    const auto same = geodesic_interpolate(h0, h0, 0.3);
    for (int i = 0; i < m->size(); ++i) EXPECT_LT(dist(H2, same.values[i], h0.values[i]), 1e-14);
    const auto other = build_polar_mesh(H2, 1.0, 16, 32);
    EXPECT_THROW(geodesic_interpolate(h0, sample_map(identity_map(H2), other), 0.5), usage_error);
}

TEST(Solver, JacobiNormIsConvexAlongInterpolation) {
    const auto m = build_polar_mesh(H2, 1.0, 16, 32);
    const SolveResult a = solve_dirichlet(sinh_family_map(1.0), m);
    const SolveResult b = solve_dirichlet(scale_map(2.0, 1.0), m);
    for (const auto& [h0, h1] : {std::pair{a.map, b.map}, std::pair{a.map, unit_offset(a.map)}}) {
        // chord lengths between geodesics: exactly convex in the target
        int chord_violations = 0;
        for (const auto& [x, xp] : mesh_edges(*m)) {
            double phi[9];
            for (int j = 0; j < 9; ++j) phi[j] = jacobi_along_edge(h0, h1, x, xp, j / 8.0).phi;
            for (int j = 1; j < 8; ++j)
                if (phi[j - 1] - 2 * phi[j] + phi[j + 1] < -1e-12) ++chord_violations;
        }
        EXPECT_EQ(chord_violations, 0);
        int violations = 0;
        for (int node = 0; node < m->size(); ++node) {
            if (m->boundary[node]) continue;
            for (int e = 0; e < 2; ++e) {
                double phi[9];
                for (int j = 0; j < 9; ++j) phi[j] = jacobi_field(h0, h1, node, e, j / 8.0).phi;
                for (int j = 1; j < 8; ++j)
                    if (phi[j - 1] - 2 * phi[j] + phi[j + 1] < -1e-2) ++violations;
            }
        }
        EXPECT_EQ(violations, 0);
    }
}

TEST(Solver, TransverseJacobiSinhBound) {
    const auto m = build_polar_mesh(H2, 1.0, 64, 128);
    const SolveResult r = solve_dirichlet(sinh_family_map(1.0), m);
    const DiscreteMap h0 = r.map, h1 = unit_offset(h0);
    for (int i = 0; i < m->size(); ++i) EXPECT_NEAR(dist(H2, h0.values[i], h1.values[i]), 1.0, 1e-12);
    int violations = 0;
    double worst = -1e300, alpha_drift = 0.0;
    for (int node = 0; node < m->size(); ++node) {
        if (m->boundary[node]) continue;
        for (int e = 0; e < 2; ++e) {
            const JacobiSample s0 = jacobi_field(h0, h1, node, e, 0.0), s1 = jacobi_field(h0, h1, node, e, 1.0);
            for (int j = 1; j < 8; ++j) {
                const double t = j / 8.0;
                const JacobiSample st = jacobi_field(h0, h1, node, e, t);
                alpha_drift = std::max(alpha_drift, std::abs(st.alpha - s0.alpha));
                const double excess = st.psi - sinh_convex_bound(1.0, s0.psi, s1.psi, t);
                worst = std::max(worst, excess);
                if (excess > 1e-2) ++violations;
            }
        }
    }
    EXPECT_LT(alpha_drift, 1e-2);  // tangential part is constant
    EXPECT_EQ(violations, 0) << "worst excess " << worst;
}

TEST(Solver, InterpolationInequalityOnConvexPolynomials) {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        // sum of squares of affine pieces plus an even quartic: convex and nonnegative
        std::vector<std::array<double, 2>> lines(3);
        for (auto& l : lines) l = {normal01(rng), normal01(rng)};
        const double q = uniform01(rng), c = uniform(rng, 0, 1), t0 = uniform(rng, -1, 2);
        const auto Phi = [&](double t) {
            double v = c + q * std::pow(t - t0, 4);
            for (const auto& l : lines) v += sqr(l[0] + l[1] * t);
            return v;
        };
        for (int j = 0; j <= 20; ++j) EXPECT_GE(interpolation_slack(Phi, j / 40.0), -1e-12);
    }
    // equality for affine functions
    EXPECT_NEAR(interpolation_slack([](double t) { return 2 + 3 * t; }, 0.3), 0.0, 1e-14);
}

TEST(Solver, SampledMapSpecAndSnapshot) {
    const auto m = build_polar_mesh(H2, 2.0, 32, 64, 0.25);
    const MapSpec f = scale_map(2.0, 1.0);
    const DiscreteMap h = sample_map(f, m);
    const MapSpec g = as_map_spec(h);
    EXPECT_EQ(g.kind, "sampled");
    for (int i = 0; i < m->size(); i += 97) EXPECT_LT(dist(H2, eval_map(g, m->nodes[i]), h.values[i]), 1e-9);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Point x = random_point(H2, rng, 1.9);
        EXPECT_LT(dist(H2, eval_map(g, x), eval_map(f, x)), 0.02);
    }
    EXPECT_THROW(eval_map(g, exp_map(H2, m->centre, Tangent{1, 0, 0}, 2.5)), range_error);

    const auto small = build_polar_mesh(H2, 1.0, 8, 16);
    std::ostringstream os;
    write_snapshot_csv(os, sample_map(f, small));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "node_id,src_0,src_1,tgt_0,tgt_1");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 129);
}
