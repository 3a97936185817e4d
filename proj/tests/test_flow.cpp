// Flow engine: integration, limits, invariant frames, unstable spheres.

#include <gtest/gtest.h>

#include <random>

#include "eqmorse/builtins.hpp"
#include "eqmorse/morse.hpp"

using namespace eqmorse;

namespace {

Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<long>(xs.size()));
    long i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

CriticalPoint make_cp(const Scenario& sc, const std::string& id, const Vec& p) {
    CriticalPoint cp;
    cp.id = id;
    cp.location = p;
    cp.value = sc.f.value(p);
    cp.frames = local_invariant_frames(sc, p, &cp.hessian_spectrum);
    cp.index = static_cast<int>(cp.frames.stable.cols());
    return cp;
}

double min_delta_f(const Trajectory& t) {
    double m = 0.0;
    for (std::size_t i = 1; i < t.f.size(); ++i) m = std::min(m, t.f[i] - t.f[i - 1]);
    return m;
}

double max_drift(const Scenario& sc, const Trajectory& t) {
    double d = 0.0;
    for (const auto& p : t.p) d = std::max(d, sc.manifold.constraint(p).norm());
    return d;
}

}  // namespace

TEST(Integrate, CircleAscendsToMax) {
    auto sc = builtin("circle-w1").scenario;
    auto tr = integrate(sc, v({std::cos(2.0), std::sin(2.0)}), 50.0);
    EXPECT_EQ(tr.termination, Termination::converged);
    EXPECT_LT((tr.end() - v({1, 0})).norm(), 1e-9);
    std::vector<CriticalPoint> crits = {make_cp(sc, "min", v({-1, 0})), make_cp(sc, "max", v({1, 0}))};
    EXPECT_EQ(classify_limit(sc, tr, crits), std::optional<std::string>("max"));
}

TEST(Integrate, SphereEquatorToNorthPole) {
    auto sc = builtin("sphere-rot").scenario;
    auto tr = integrate(sc, v({std::cos(0.4), std::sin(0.4), 0.0}), 50.0);
    EXPECT_LT((tr.end() - v({0, 0, 1})).norm(), 1e-9);
}

TEST(Integrate, CriticalStartIsConstant) {
    auto sc = builtin("sphere-rot").scenario;
    auto cp = make_cp(sc, "s", v({0, 0, -1}));
    auto tr = integrate(sc, cp.location, 50.0);
    EXPECT_EQ(tr.termination, Termination::converged);
    for (const auto& p : tr.p) EXPECT_EQ(p, cp.location);
    EXPECT_EQ(classify_limit(sc, tr, {cp}), std::optional<std::string>("s"));
}

TEST(Integrate, LevelStopHitsLevel) {
    auto sc = builtin("sphere-rot").scenario;
    FlowRequest req;
    req.level = 0.25;
    auto end = integrate_field(sc, gradient_field(sc), retract(sc, v({1, 0.2, -0.3})), req, FlowOptions::from(sc.tol));
    EXPECT_EQ(end.termination, Termination::level);
    EXPECT_NEAR(sc.f.value(end.p), 0.25, 1e-13);
}

TEST(Integrate, CheckpointsMatchSeparateRuns) {
    auto sc = builtin("torus-rot").scenario;
    Vec p0 = retract(sc, v({0.3, 2.2, 0.8}));
    FlowRequest req;
    req.checkpoints = {0.0, 0.5, 1.7, 4.0};
    req.horizon = 4.0;
    auto end = integrate_field(sc, gradient_field(sc), p0, req, FlowOptions::from(sc.tol));
    ASSERT_EQ(end.checkpoints.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        FlowRequest single;
        single.horizon = req.checkpoints[i];
        auto e = integrate_field(sc, gradient_field(sc), p0, single, FlowOptions::from(sc.tol));
        EXPECT_LT((e.p - end.checkpoints[i]).norm(), 1e-8);
    }
}

TEST(Classify, TimedOutAwayFromCriticalPoints) {
    auto sc = builtin("circle-w1").scenario;
    std::vector<CriticalPoint> crits = {make_cp(sc, "min", v({-1, 0})), make_cp(sc, "max", v({1, 0}))};
    auto tr = integrate(sc, v({std::cos(2.0), std::sin(2.0)}), 0.5);
    EXPECT_EQ(tr.termination, Termination::horizon);
    EXPECT_FALSE(classify_limit(sc, tr, crits).has_value());
}

TEST(Classify, AmbiguousCapture) {
    auto sc = builtin("circle-w1").scenario;
    CriticalPoint a = make_cp(sc, "a", v({1, 0}));
    CriticalPoint b = a;
    b.id = "b";
    b.location = retract(sc, v({1, 5e-5}));
    EXPECT_THROW(classify_point(sc, v({1, 0}), {a, b}), AmbiguousCapture);
}

TEST(Classify, TorusGenericSeedReachesTop) {
    auto sc = builtin("torus-rot").scenario;
    auto crits = find_critical_points(sc);
    // The slowest contraction rate at the top is 1/3, so allow the extended horizon.
    auto tr = integrate(sc, retract(sc, v({-0.4, 2.5, 0.7})), 200.0);
    auto lim = classify_limit(sc, tr, crits);
    ASSERT_TRUE(lim.has_value());
    EXPECT_EQ(find_crit(crits, *lim).index, 2);
}

TEST(Frames, Examples) {
    auto sc = builtin("sphere-rot").scenario;
    auto north = local_invariant_frames(sc, v({0, 0, 1}));
    EXPECT_EQ(north.stable.cols(), 2);
    EXPECT_EQ(north.unstable.cols(), 0);
    auto south = local_invariant_frames(sc, v({0, 0, -1}));
    EXPECT_EQ(south.unstable.cols(), 2);
    EXPECT_EQ(south.stable.cols(), 0);
    auto torus = builtin("torus-rot").scenario;
    for (const auto& c : find_critical_points(torus))
        if (c.index == 1) {
            EXPECT_EQ(c.frames.unstable.cols(), 1);
            EXPECT_EQ(c.frames.stable.cols(), 1);
        }
}

TEST(Frames, DegenerateRaises) {
    // f = z on a torus of revolution about z has circles of critical points.
    auto sc = builtin("torus-rot").scenario;
    sc.f = ScalarField::from_polynomial(Polynomial::coordinate(3, 2));
    EXPECT_THROW(local_invariant_frames(sc, v({2, 0, 1})), DegenerateCriticalPoint);
}

TEST(UnstableSphere, Examples) {
    auto sc = builtin("circle-w1").scenario;
    auto max = make_cp(sc, "max", v({1, 0}));
    EXPECT_TRUE(sample_unstable_sphere(sc, max, 1e-3, 16).empty());
    auto min = make_cp(sc, "min", v({-1, 0}));
    auto seeds = sample_unstable_sphere(sc, min, 1e-3, 16);
    ASSERT_EQ(seeds.size(), 2u);
    std::vector<double> angles;
    for (const auto& s : seeds) angles.push_back(std::atan2(s[1], s[0]));
    std::sort(angles.begin(), angles.end());
    EXPECT_NEAR(angles[0], -std::numbers::pi + 1e-3, 1e-9);
    EXPECT_NEAR(angles[1], std::numbers::pi - 1e-3, 1e-9);

    auto torus = builtin("torus-rot").scenario;
    for (const auto& c : find_critical_points(torus))
        if (c.index == 1) EXPECT_EQ(sample_unstable_sphere(torus, c, 1e-3, 16).size(), 2u);
}

TEST(UnstableSphere, SeedsFlowBackToCriticalPoint) {
    for (const char* id : {"torus-rot", "sphere-rot", "s3-hopf", "circle-w2"}) {
        auto sc = builtin(id).scenario;
        auto crits = find_critical_points(sc);
        for (const auto& c : crits)
            for (const auto& seed : sample_unstable_sphere(sc, c, 1e-3, 12)) {
                auto tr = integrate_backward(sc, seed, 200.0, FlowOptions::from(sc.tol));
                if (c.frames.stable.cols() == 0) {
                    EXPECT_EQ(classify_limit(sc, tr, crits), std::optional<std::string>(c.id)) << id << " " << c.id;
                } else {
                    // Seeds sit on the tangent space, O(r^2) off the unstable manifold, so the
                    // backward orbit of a saddle seed passes cp and leaves along the stable side.
                    double closest = 1e300;
                    for (const auto& p : tr.p) closest = std::min(closest, (p - c.location).norm());
                    EXPECT_LT(closest, sc.tol.capture_radius) << id << " " << c.id;
                }
            }
    }
}

TEST(FlowProperty, MonotoneAndFeasibleOnBuiltins) {
    for (const auto& b : builtin_scenarios()) {
        const auto& sc = b.scenario;
        for (const auto& p : sample_feasible_points(sc, 25, 21)) {
            auto tr = integrate(sc, p, 50.0);
            EXPECT_GE(min_delta_f(tr), -1e-9) << b.id;
            EXPECT_LT(max_drift(sc, tr), 1e-8) << b.id;
        }
    }
}

TEST(FlowProperty, RefinementStability) {
    for (const auto& b : builtin_scenarios()) {
        const auto& sc = b.scenario;
        auto crits = find_critical_points(sc);
        FlowOptions coarse = FlowOptions::from(sc.tol), fine = coarse;
        fine.rtol *= 0.5;
        fine.atol *= 0.5;
        int flips = 0;
        auto pts = sample_feasible_points(sc, 200, 77);
        ASSERT_EQ(pts.size(), 200u);
        for (const auto& p : pts) {
            Trajectory a, c;
            FlowRequest req;
            integrate_field(sc, gradient_field(sc), p, req, coarse, &a);
            integrate_field(sc, gradient_field(sc), p, req, fine, &c);
            if (classify_point(sc, a.end(), crits) != classify_point(sc, c.end(), crits)) ++flips;
        }
        EXPECT_EQ(flips, 0) << b.id;
    }
}

TEST(FlowProperty, EquivarianceForInvariantFunction) {
    // f = z is invariant under rotation about z on the torus of revolution.
    auto sc = builtin("torus-rot").scenario;
    sc.f = ScalarField::from_polynomial(Polynomial::coordinate(3, 2));
    FlowRequest req;
    req.horizon = 1.5;
    req.stop_on_arrival = false;
    FlowOptions fo = FlowOptions::from(sc.tol);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ang(0, kTwoPi);
    for (const auto& p : sample_feasible_points(sc, 20, 4)) {
        double s = ang(rng);
        Vec a = act(sc, s, integrate_field(sc, gradient_field(sc), p, req, fo).p);
        Vec b = integrate_field(sc, gradient_field(sc), act(sc, s, p), req, fo).p;
        EXPECT_LT((a - b).norm(), 1e-8);
    }
}

TEST(TrajectoryCsv, Columns) {
    auto sc = builtin("circle-w1").scenario;
    auto tr = integrate(sc, v({std::cos(2.0), std::sin(2.0)}), 1.0);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::string first = os.str().substr(0, os.str().find('\n'));
    EXPECT_EQ(std::count(first.begin(), first.end(), ','), 4);
}
