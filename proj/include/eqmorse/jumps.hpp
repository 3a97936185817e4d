/*
   Copyright 2026 The eqmorse Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

/**
 * @file jumps.hpp
 * @brief k-jump flow lines: shooting residual, root enumeration, mod-2 counts.
 *
 * A k-jump flow line from x to y leaves x along W^u(x), is displaced k times
 * along S^1-orbits with k - 1 interior flow durations, and ends on W^s(y).
 * The unknowns are packed into one parameter vector
 *
 *     [sphere angles (u - 1 of them when u >= 2), tau (u >= 1), s_1..s_k, T_1..T_{k-1}]
 *
 * with u = n - mu(x). For u = 1 the sign of the seed direction is a discrete
 * branch. The residual lives in the unstable frame of y, dimension n - mu(y).
 */

#include <algorithm>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "morse.hpp"

namespace eqmorse {

struct JumpOptions {
    int s_resolution = 64;
    int polar_resolution = 12;
    double seed_radius = 1e-3;
    double tau_min = -3.0;
    double duration_max = 50.0;
    double grid_step = 0.25;
    double grid_uniform_end = 12.0;
    double grid_growth = 1.15;
    std::size_t max_grid = 4000000;
    std::size_t max_candidates = 200;
    int gn_iterations = 100;
    double fd_step = 1e-6;
    double certificate_fd_step = 1e-5;
    double residual_tol = 1e-8;
    double sigma_min = 1e-4;
    double isolation = 1e-3;
    double basin_max = 0.5;
    double basin_min = 1e-6;
    int basin_probes = 8;
    double dedup = 1e-3;
    double landing_radius = 1e-2;
    double landing_accept = 0.05;
    double invariance_tol = 1e-12;
    int smooth_resolution = 256;
    double limit_duration = 15.0;
    double break_radius = 1e-2;
    int continuation_steps = 600;
    FlowOptions flow;

    static JumpOptions from(const Tolerances& tol) {
        JumpOptions o;
        o.flow = FlowOptions::from(tol);
        return o;
    }
};

/// mu(y) - mu(x) + 2k - 1.
inline int moduli_dimension(int mu_x, int mu_y, int k) {
    if (k < 1) throw StructuralError("jump order k must be at least 1");
    return mu_y - mu_x + 2 * k - 1;
}

inline int moduli_dimension(const CriticalPoint& x, const CriticalPoint& y, int k) { return moduli_dimension(x.index, y.index, k); }

struct JumpConfiguration {
    std::string x, y;
    int k = 1;
    /// Sign of the seed direction when the unstable sphere is two points.
    int branch = 0;
    Vec angles;
    /// Time along the first segment; absent when the first segment is constant at x.
    std::optional<double> tau;
    std::vector<double> s;
    std::vector<double> T;

    bool constant_at_x() const { return !tau.has_value(); }
};

struct SolutionCertificate {
    double residual = 0.0;
    double sigma_min = 0.0;
    /// Half the distance to the nearest distinct root on the same branch.
    double isolation = std::numeric_limits<double>::infinity();
    /// Largest probed radius from which re-polishing returns to the root.
    double basin = 0.0;

    bool passes(const JumpOptions& o) const {
        return residual < o.residual_tol && sigma_min > o.sigma_min && isolation > o.isolation;
    }
};

struct JumpSolution {
    JumpConfiguration config;
    Vec theta;
    SolutionCertificate certificate;
};

struct FamilyReport {
    JumpConfiguration config;
    Vec theta;
    int dimension = 0;
    bool along_s = false;
    double sigma_min = 0.0;
};

struct JumpEvaluation {
    Vec residual;
    Vec landing;
    double landing_time = 0.0;
    double landing_distance = 0.0;
};

/// Endpoint of the landing flow into y: the point itself when mu(y) = 0, else
/// the forward flow stopped on the level f(y) - eta, eta = |lambda_s|min r^2 / 2.
struct Landing {
    Vec point;
    double time = 0.0;
};

inline Landing land(const Scenario& sc, const CriticalPoint& y, const Vec& q, double radius, double horizon, const FlowOptions& fo) {
    if (y.index == 0) return {q, 0.0};
    double lam = y.frames.stable_eigenvalues.cwiseAbs().minCoeff();
    double level = y.value - 0.5 * lam * radius * radius;
    if (sc.f.value(q) >= level) return {q, 0.0};
    FlowRequest req;
    req.horizon = horizon;
    req.level = level;
    auto end = integrate_field(sc, gradient_field(sc, 1.0), q, req, fo);
    return {end.p, end.t};
}

/// Flows for |t| time units, backward when t < 0.
inline Vec flow_for(const Scenario& sc, const Vec& p, double t, const FlowOptions& fo) {
    if (t == 0.0) return p;
    FlowRequest req;
    req.horizon = std::fabs(t);
    return integrate_field(sc, gradient_field(sc, t > 0 ? 1.0 : -1.0), p, req, fo).p;
}

class JumpProblem {
   public:
    JumpProblem(const Scenario& sc, const std::vector<CriticalPoint>& crits, const CriticalPoint& x, const CriticalPoint& y, int k,
                JumpOptions opt)
        : sc_(&sc), crits_(&crits), x_(x), y_(y), k_(k), opt_(std::move(opt)) {
        if (k < 1) throw StructuralError("jump order k must be at least 1");
        u_ = sc.dim() - x.index;
        n_angles_ = u_ >= 2 ? u_ - 1 : 0;
        base_ = n_angles_ + (u_ >= 1 ? 1 : 0);
    }

    JumpProblem(const Scenario& sc, const std::vector<CriticalPoint>& crits, const CriticalPoint& x, const CriticalPoint& y, int k)
        : JumpProblem(sc, crits, x, y, k, JumpOptions::from(sc.tol)) {}

    const Scenario& scenario() const { return *sc_; }
    const std::vector<CriticalPoint>& crits() const { return *crits_; }
    const CriticalPoint& x() const { return x_; }
    const CriticalPoint& y() const { return y_; }
    const JumpOptions& options() const { return opt_; }
    int k() const { return k_; }
    int unstable_dim() const { return u_; }
    int branches() const { return u_ == 1 ? 2 : 1; }
    int angle_count() const { return n_angles_; }
    int tau_index() const { return u_ >= 1 ? n_angles_ : -1; }
    int s_index(int j) const { return base_ + j; }
    int T_index(int j) const { return base_ + k_ + j; }
    int parameter_count() const { return base_ + 2 * k_ - 1; }
    int residual_dim() const { return scenario().dim() - y_.index; }
    int moduli_dim() const { return moduli_dimension(x_, y_, k_); }

    /// Parameters that live on a circle.
    bool is_angular(int i) const {
        if (i >= base_ && i < base_ + k_) return true;
        return u_ >= 2 && i == n_angles_ - 1;
    }

    double distance(const Vec& a, const Vec& b) const {
        double acc = 0.0;
        for (int i = 0; i < a.size(); ++i) {
            double d = is_angular(i) ? angle_distance(a[i], b[i]) : std::fabs(a[i] - b[i]);
            acc += d * d;
        }
        return std::sqrt(acc);
    }

    Vec seed(const Vec& theta, int branch) const {
        const Mat& U = x_.frames.unstable;
        Vec d = u_ == 1 ? Vec((branch == 0 ? 1.0 : -1.0) * U.col(0)) : Vec(U * sphere_direction(theta.head(n_angles_), u_));
        return retract(*sc_, x_.location + opt_.seed_radius * d);
    }

    Vec first_point(const Vec& theta, int branch) const {
        if (u_ == 0) return x_.location;
        return flow_for(*sc_, seed(theta, branch), theta[tau_index()], opt_.flow);
    }

    /// Point after the last jump.
    Vec last_jump_point(const Vec& theta, int branch) const {
        Vec p = first_point(theta, branch);
        for (int j = 0; j < k_; ++j) {
            p = act(*sc_, theta[s_index(j)], p);
            if (j + 1 < k_) p = flow_for(*sc_, p, theta[T_index(j)], opt_.flow);
        }
        return p;
    }

    JumpEvaluation finish(const Vec& q) const {
        JumpEvaluation ev;
        auto l = land(*sc_, y_, q, opt_.landing_radius, opt_.duration_max, opt_.flow);
        ev.landing = l.point;
        ev.landing_time = l.time;
        ev.landing_distance = (l.point - y_.location).norm();
        ev.residual = y_.frames.unstable.transpose() * (l.point - y_.location);
        return ev;
    }

    JumpEvaluation evaluate(const Vec& theta, int branch) const { return finish(last_jump_point(theta, branch)); }

    Vec residual(const Vec& theta, int branch) const { return evaluate(theta, branch).residual; }

    Mat jacobian(const Vec& theta, int branch, double h, bool central) const {
        const int P = parameter_count();
        Mat J(residual_dim(), P);
        Vec r0 = central ? Vec() : residual(theta, branch);
        for (int i = 0; i < P; ++i) {
            Vec tp = theta;
            tp[i] += h;
            if (central) {
                Vec tm = theta;
                tm[i] -= h;
                J.col(i) = (residual(tp, branch) - residual(tm, branch)) / (2 * h);
            } else {
                J.col(i) = (residual(tp, branch) - r0) / h;
            }
        }
        return J;
    }

    JumpConfiguration decode(const Vec& theta, int branch) const {
        JumpConfiguration c;
        c.x = x_.id;
        c.y = y_.id;
        c.k = k_;
        c.branch = branch;
        c.angles = theta.head(n_angles_);
        for (int i = 0; i < n_angles_; ++i)
            if (is_angular(i)) c.angles[i] = wrap_angle(c.angles[i]);
        if (u_ >= 1) c.tau = theta[tau_index()];
        for (int j = 0; j < k_; ++j) c.s.push_back(wrap_angle(theta[s_index(j)]));
        for (int j = 0; j + 1 < k_; ++j) c.T.push_back(theta[T_index(j)]);
        return c;
    }

    Vec encode(const JumpConfiguration& c) const {
        Vec theta(parameter_count());
        for (int i = 0; i < n_angles_; ++i) theta[i] = c.angles[i];
        if (u_ >= 1) theta[tau_index()] = c.tau.value_or(0.0);
        for (int j = 0; j < k_; ++j) theta[s_index(j)] = c.s[static_cast<std::size_t>(j)];
        for (int j = 0; j + 1 < k_; ++j) theta[T_index(j)] = c.T[static_cast<std::size_t>(j)];
        return theta;
    }

    /// Keeps durations and tau inside their domains.
    void clamp(Vec& theta) const {
        if (u_ >= 1) theta[tau_index()] = std::clamp(theta[tau_index()], opt_.tau_min, opt_.duration_max);
        for (int j = 0; j + 1 < k_; ++j) theta[T_index(j)] = std::clamp(theta[T_index(j)], 0.0, opt_.duration_max);
    }

    /// Upper duration bounds and tau bounds are rejected; T = 0 is admissible.
    bool interior(const Vec& theta) const {
        const double eps = 1e-6;
        if (u_ >= 1) {
            double t = theta[tau_index()];
            if (t <= opt_.tau_min + eps || t >= opt_.duration_max - eps) return false;
        }
        for (int j = 0; j + 1 < k_; ++j)
            if (theta[T_index(j)] >= opt_.duration_max - eps) return false;
        return true;
    }

   private:
    const Scenario* sc_;
    const std::vector<CriticalPoint>* crits_;
    CriticalPoint x_, y_;
    int k_;
    JumpOptions opt_;
    int u_ = 0, n_angles_ = 0, base_ = 0;
};

/// Residual of a configuration, reconstructed through its problem.
inline Vec shooting_residual(const JumpProblem& prob, const JumpConfiguration& c) { return prob.residual(prob.encode(c), c.branch); }

// ---------------------------------------------------------------------------
// Grid screening and polishing
// ---------------------------------------------------------------------------

/// Uniform steps up to the end of the fine range, then geometric growth to the maximum.
inline std::vector<double> duration_grid(const JumpOptions& o) {
    std::vector<double> g;
    for (double t = 0.0; t <= o.grid_uniform_end + 1e-12; t += o.grid_step) g.push_back(t);
    double t = g.back();
    while (t * o.grid_growth < o.duration_max) {
        t *= o.grid_growth;
        g.push_back(t);
    }
    g.push_back(o.duration_max);
    return g;
}

inline std::vector<double> tau_grid(const JumpOptions& o) {
    std::vector<double> g;
    for (double t = o.tau_min; t < -1e-12; t += o.grid_step) g.push_back(t);
    for (double t : duration_grid(o)) g.push_back(t);
    return g;
}

struct RootCandidate {
    Vec theta;
    int branch = 0;
    double residual = 0.0;
    double landing_distance = 0.0;
};

namespace detail {

struct GridDim {
    std::vector<double> values;
    bool wrap = false;
    int param = 0;
};

/// Integrates from p and reports the state at each grid time (negative times backward).
inline std::vector<Vec> flow_checkpoints(const Scenario& sc, const Vec& p, const std::vector<double>& times, const FlowOptions& fo) {
    std::vector<Vec> out(times.size());
    std::vector<double> fwd, bwd;
    std::vector<std::size_t> fi, bi;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= 0) {
            fwd.push_back(times[i]);
            fi.push_back(i);
        } else {
            bwd.push_back(-times[i]);
            bi.push_back(i);
        }
    }
    if (!fwd.empty()) {
        FlowRequest req;
        req.horizon = fwd.back();
        req.checkpoints = fwd;
        auto end = integrate_field(sc, gradient_field(sc, 1.0), p, req, fo);
        for (std::size_t j = 0; j < fwd.size(); ++j) out[fi[j]] = end.checkpoints[j];
    }
    if (!bwd.empty()) {
        std::vector<std::size_t> order(bwd.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bwd[a] < bwd[b]; });
        FlowRequest req;
        for (std::size_t j : order) req.checkpoints.push_back(bwd[j]);
        req.horizon = req.checkpoints.back();
        auto end = integrate_field(sc, gradient_field(sc, -1.0), p, req, fo);
        for (std::size_t j = 0; j < order.size(); ++j) out[bi[order[j]]] = end.checkpoints[j];
    }
    return out;
}

/// Screens the parameter grid of one branch and returns the local minima of the screening metric.
inline std::vector<RootCandidate> screen_branch(const JumpProblem& prob, int branch) {
    const Scenario& sc = prob.scenario();
    const JumpOptions& o = prob.options();
    const int u = prob.unstable_dim();
    const int k = prob.k();

    std::vector<GridDim> dims;
    for (int a = 0; a < prob.angle_count(); ++a) {
        GridDim d;
        d.param = a;
        if (a + 1 < prob.angle_count()) {
            for (int i = 0; i < o.polar_resolution; ++i) d.values.push_back((i + 0.5) * std::numbers::pi / o.polar_resolution);
        } else {
            d.wrap = true;
            for (int i = 0; i < o.s_resolution; ++i) d.values.push_back(kTwoPi * i / o.s_resolution);
        }
        dims.push_back(d);
    }
    const auto taus = tau_grid(o);
    const auto durations = duration_grid(o);
    std::vector<double> svals;
    for (int i = 0; i < o.s_resolution; ++i) svals.push_back(kTwoPi * i / o.s_resolution);
    if (u >= 1) dims.push_back({taus, false, prob.tau_index()});
    for (int j = 0; j < k; ++j) {
        dims.push_back({svals, true, prob.s_index(j)});
        if (j + 1 < k) dims.push_back({durations, false, prob.T_index(j)});
    }
    std::size_t total = 1;
    for (const auto& d : dims) total *= d.values.size();
    if (total > o.max_grid)
        throw ResolutionExhausted("jump grid for " + prob.x().id + " -> " + prob.y().id + " has " + std::to_string(total) +
                                  " points");

    // First segment: one integration per sphere direction, checkpointed on the tau grid.
    std::vector<Vec> level;
    {
        std::size_t n_dirs = 1;
        for (int a = 0; a < prob.angle_count(); ++a) n_dirs *= dims[static_cast<std::size_t>(a)].values.size();
        if (u == 0) {
            level.push_back(prob.x().location);
        } else {
            std::vector<std::vector<Vec>> per(n_dirs);
            parallel_for(n_dirs, [&](std::size_t di) {
                Vec theta = Vec::Zero(prob.parameter_count());
                std::size_t rem = di;
                for (int a = prob.angle_count() - 1; a >= 0; --a) {
                    const auto& vals = dims[static_cast<std::size_t>(a)].values;
                    theta[a] = vals[rem % vals.size()];
                    rem /= vals.size();
                }
                per[di] = flow_checkpoints(sc, prob.seed(theta, branch), taus, o.flow);
            });
            for (auto& v : per)
                for (auto& p : v) level.push_back(std::move(p));
        }
    }

    std::vector<Mat> rot;
    for (double s : svals) rot.push_back(sc.action.matrix(s));
    for (int j = 0; j < k; ++j) {
        const bool last = j + 1 == k;
        const std::size_t width = last ? svals.size() : svals.size() * durations.size();
        std::vector<Vec> next(level.size() * width);
        parallel_for(level.size() * svals.size(), [&](std::size_t idx) {
            std::size_t i = idx / svals.size(), a = idx % svals.size();
            Vec q = act_with(sc, rot[a], level[i]);
            if (last) {
                next[i * width + a] = std::move(q);
                return;
            }
            auto pts = flow_checkpoints(sc, q, durations, o.flow);
            for (std::size_t c = 0; c < durations.size(); ++c) next[i * width + a * durations.size() + c] = std::move(pts[c]);
        });
        level.swap(next);
    }

    std::vector<double> metric(level.size());
    std::vector<double> landing(level.size());
    std::vector<Vec> residual(level.size());
    parallel_for(level.size(), [&](std::size_t i) {
        try {
            auto ev = prob.finish(level[i]);
            metric[i] = ev.residual.norm() + std::max(0.0, ev.landing_distance - o.landing_accept);
            landing[i] = ev.landing_distance;
            residual[i] = std::move(ev.residual);
        } catch (const Error&) {
            metric[i] = std::numeric_limits<double>::infinity();
        }
    });

    const std::size_t D = dims.size();
    std::vector<std::size_t> extent(D), stride(D);
    {
        std::size_t st = 1;
        for (std::size_t d = D; d-- > 0;) {
            extent[d] = dims[d].values.size();
            stride[d] = st;
            st *= extent[d];
        }
    }
    std::size_t n_offsets = 1;
    for (std::size_t d = 0; d < D; ++d) n_offsets *= 3;

    std::vector<std::size_t> minima;
    std::vector<long> idx(D);
    for (std::size_t flat = 0; flat < level.size(); ++flat) {
        double m = metric[flat];
        if (!std::isfinite(m)) continue;
        std::size_t rem = flat;
        for (std::size_t d = 0; d < D; ++d) {
            idx[d] = static_cast<long>(rem / stride[d]);
            rem %= stride[d];
        }
        bool is_min = true;
        for (std::size_t off = 0; off < n_offsets && is_min; ++off) {
            std::size_t code = off, nb = 0;
            bool self = true, skip = false;
            for (std::size_t d = D; d-- > 0;) {
                long delta = static_cast<long>(code % 3) - 1;
                code /= 3;
                if (delta != 0) self = false;
                long v = idx[d] + delta;
                long ext = static_cast<long>(extent[d]);
                if (v < 0 || v >= ext) {
                    if (!dims[d].wrap) {
                        skip = true;
                        break;
                    }
                    v = (v + ext) % ext;
                }
                nb += static_cast<std::size_t>(v) * stride[d];
            }
            if (self || skip || nb == flat) continue;
            double mn = metric[nb];
            if (mn < m || (mn == m && nb < flat)) is_min = false;
        }
        if (is_min) minima.push_back(flat);
    }
    std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) {
        return metric[a] != metric[b] ? metric[a] < metric[b] : a < b;
    });
    if (minima.size() > o.max_candidates) minima.resize(o.max_candidates);

    std::vector<RootCandidate> out;
    for (std::size_t flat : minima) {
        RootCandidate c;
        c.branch = branch;
        c.theta = Vec::Zero(prob.parameter_count());
        std::size_t rem = flat;
        for (std::size_t d = 0; d < D; ++d) {
            c.theta[dims[d].param] = dims[d].values[rem / stride[d]];
            rem %= stride[d];
        }
        c.residual = metric[flat];
        c.landing_distance = landing[flat];
        out.push_back(std::move(c));
    }

    // Cells whose corners bracket zero in every residual component.
    const std::size_t n_corners = std::size_t{1} << D;
    const double near = 4.0 * o.landing_accept;
    std::vector<std::pair<double, std::size_t>> cells;
    for (std::size_t flat = 0; flat < level.size(); ++flat) {
        std::size_t rem = flat;
        bool edge = false;
        for (std::size_t d = 0; d < D; ++d) {
            idx[d] = static_cast<long>(rem / stride[d]);
            rem %= stride[d];
            if (!dims[d].wrap && idx[d] + 1 >= static_cast<long>(extent[d])) edge = true;
        }
        if (edge || !std::isfinite(metric[flat]) || landing[flat] > near) continue;
        const long rdim = residual[flat].size();
        Vec lo = residual[flat], hi = residual[flat];
        double best = metric[flat];
        bool ok = true;
        for (std::size_t c = 1; c < n_corners && ok; ++c) {
            std::size_t nb = 0;
            for (std::size_t d = 0; d < D; ++d) {
                long v = idx[d] + static_cast<long>((c >> d) & 1U);
                nb += static_cast<std::size_t>(v % static_cast<long>(extent[d])) * stride[d];
            }
            if (!std::isfinite(metric[nb]) || landing[nb] > near) {
                ok = false;
                break;
            }
            lo = lo.cwiseMin(residual[nb]);
            hi = hi.cwiseMax(residual[nb]);
            best = std::min(best, metric[nb]);
        }
        if (!ok) continue;
        for (long r = 0; r < rdim && ok; ++r) ok = lo[r] <= 0.0 && hi[r] >= 0.0;
        if (ok) cells.emplace_back(best, flat);
    }
    std::sort(cells.begin(), cells.end());
    if (cells.size() > o.max_candidates) cells.resize(o.max_candidates);
    for (const auto& [m, flat] : cells) {
        RootCandidate c;
        c.branch = branch;
        c.theta = Vec::Zero(prob.parameter_count());
        std::size_t rem = flat;
        for (std::size_t d = 0; d < D; ++d) {
            const auto& vals = dims[d].values;
            std::size_t i = rem / stride[d];
            rem %= stride[d];
            double a = vals[i];
            double b = i + 1 < vals.size() ? vals[i + 1] : vals[0] + kTwoPi;
            c.theta[dims[d].param] = 0.5 * (a + b);
        }
        c.residual = m;
        c.landing_distance = landing[flat];
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace detail

/// Gauss-Newton with a minimum-norm step and Armijo backtracking; durations stay in their domain.
inline RootCandidate gauss_newton(const JumpProblem& prob, Vec theta, int branch) {
    const JumpOptions& o = prob.options();
    RootCandidate out;
    out.branch = branch;
    out.residual = std::numeric_limits<double>::infinity();
    prob.clamp(theta);
    JumpEvaluation ev;
    try {
        ev = prob.evaluate(theta, branch);
    } catch (const Error&) {
        out.theta = theta;
        return out;
    }
    double rn = ev.residual.norm();
    int stalled = 0;
    double h = o.fd_step;
    for (int it = 0; it < o.gn_iterations && rn > 1e-12; ++it) {
        double before = rn;
        Mat J;
        try {
            J = prob.jacobian(theta, branch, h, h < o.fd_step);
        } catch (const Error&) {
            break;
        }
        Vec step = -J.completeOrthogonalDecomposition().solve(ev.residual);
        if (!std::isfinite(step.norm())) break;
        if (step.norm() > 2.0) step *= 2.0 / step.norm();
        bool improved = false;
        for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
            Vec trial = theta + alpha * step;
            prob.clamp(trial);
            try {
                auto tev = prob.evaluate(trial, branch);
                double tn = tev.residual.norm();
                if (tn <= (1.0 - 0.1 * alpha) * rn) {
                    theta = trial;
                    ev = std::move(tev);
                    rn = tn;
                    improved = true;
                    break;
                }
            } catch (const Error&) {
            }
        }
        if (!improved && h > 1e-3 * o.fd_step) {
            h *= 0.1;
            continue;
        }
        if (!improved || step.norm() < 1e-14) break;
        stalled = rn > 0.9 * before ? stalled + 1 : 0;
        if (stalled >= 5) break;
    }
    out.theta = theta;
    out.residual = rn;
    out.landing_distance = ev.landing_distance;
    return out;
}

/// Converged, deduplicated roots of the shooting residual inside the admissible domain.
inline std::vector<RootCandidate> search_roots(const JumpProblem& prob) {
    const JumpOptions& o = prob.options();
    std::vector<RootCandidate> cands;
    for (int b = 0; b < prob.branches(); ++b)
        for (auto& c : detail::screen_branch(prob, b)) cands.push_back(std::move(c));
    std::vector<RootCandidate> polished(cands.size());
    parallel_for(cands.size(), [&](std::size_t i) { polished[i] = gauss_newton(prob, cands[i].theta, cands[i].branch); });

    std::vector<RootCandidate> roots;
    for (auto& r : polished) {
        if (!(r.residual < o.residual_tol) || r.landing_distance >= o.landing_accept || !prob.interior(r.theta)) continue;
        bool dup = false;
        for (const auto& e : roots)
            if (e.branch == r.branch && prob.distance(e.theta, r.theta) < o.dedup) {
                dup = true;
                break;
            }
        if (!dup) roots.push_back(std::move(r));
    }
    return roots;
}

namespace detail {

/// Largest r in basin_max * 2^-j (and at most `cap`) from which re-polishing
/// coordinate and seeded random probes at distance r all return to the root.
inline double basin_radius(const JumpProblem& prob, const RootCandidate& root, double cap) {
    const JumpOptions& o = prob.options();
    const long P = root.theta.size();
    std::vector<Vec> dirs;
    for (long c = 0; c < P; ++c)
        for (double sg : {1.0, -1.0}) {
            Vec e = Vec::Zero(P);
            e[c] = sg;
            dirs.push_back(e);
        }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    for (int i = 0; i < o.basin_probes; ++i) {
        Vec e(P);
        for (long c = 0; c < P; ++c) e[c] = normal(rng);
        dirs.push_back(e.normalized());
    }
    double r = std::min(o.basin_max, cap);
    while (r >= o.basin_min) {
        std::vector<char> ok(dirs.size(), 0);
        parallel_for(dirs.size(), [&](std::size_t i) {
            auto back = gauss_newton(prob, root.theta + r * dirs[i], root.branch);
            ok[i] = back.residual < o.residual_tol && prob.distance(back.theta, root.theta) < 1e-6;
        });
        if (std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; })) return r;
        r *= 0.5;
    }
    return 0.0;
}

}  // namespace detail

struct JumpEnumeration {
    std::vector<JumpSolution> solutions;
    std::vector<FamilyReport> families;
};

/// Certified isolated roots; roots failing the certificate are reported as families.
inline JumpEnumeration enumerate_k_jump_flow_lines(const JumpProblem& prob) {
    if (prob.moduli_dim() != 0)
        throw StructuralError("enumeration requires a zero-dimensional moduli space, got dimension " +
                              std::to_string(prob.moduli_dim()));
    const JumpOptions& o = prob.options();
    auto roots = search_roots(prob);
    JumpEnumeration out;
    std::vector<Mat> jac(roots.size());
    parallel_for(roots.size(), [&](std::size_t i) {
        jac[i] = prob.jacobian(roots[i].theta, roots[i].branch, o.certificate_fd_step, true);
    });
    for (std::size_t i = 0; i < roots.size(); ++i) {
        Eigen::JacobiSVD<Mat> svd(jac[i], Eigen::ComputeFullV);
        const Vec& sv = svd.singularValues();
        SolutionCertificate cert;
        cert.residual = roots[i].residual;
        cert.sigma_min = sv.size() ? sv.minCoeff() : 0.0;
        double neighbour = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < roots.size(); ++j)
            if (j != i && roots[j].branch == roots[i].branch)
                neighbour = std::min(neighbour, 0.5 * prob.distance(roots[i].theta, roots[j].theta));
        cert.isolation = neighbour;
        if (cert.sigma_min > o.sigma_min) cert.basin = detail::basin_radius(prob, roots[i], neighbour);
        auto cfg = prob.decode(roots[i].theta, roots[i].branch);
        if (cert.passes(o)) {
            out.solutions.push_back({std::move(cfg), roots[i].theta, cert});
            continue;
        }
        FamilyReport fam;
        fam.config = std::move(cfg);
        fam.theta = roots[i].theta;
        fam.sigma_min = cert.sigma_min;
        const Mat& V = svd.matrixV();
        for (long c = 0; c < sv.size(); ++c) {
            if (sv[c] > o.sigma_min) continue;
            ++fam.dimension;
            double s_weight = 0.0;
            for (int j = 0; j < prob.k(); ++j) s_weight += V(prob.s_index(j), c) * V(prob.s_index(j), c);
            if (s_weight > 0.5) fam.along_s = true;
        }
        if (fam.dimension == 0) fam.dimension = 1;
        out.families.push_back(std::move(fam));
    }
    return out;
}

/// True when the residual does not change under shifts of the jump angles.
inline bool s_invariant(const JumpProblem& prob) {
    const JumpOptions& o = prob.options();
    const int P = prob.parameter_count();
    const double base_s[] = {0.3, 1.7, 4.1};
    const double shifts[] = {0.9, 2.6};
    for (double b : base_s) {
        Vec theta = Vec::Constant(P, 1.0);
        for (int a = 0; a < prob.angle_count(); ++a) theta[a] = 0.4 + 0.3 * a;
        for (int j = 0; j < prob.k(); ++j) theta[prob.s_index(j)] = b + 0.5 * j;
        Vec r0;
        try {
            r0 = prob.residual(theta, 0);
        } catch (const Error&) {
            return false;
        }
        for (double sh : shifts) {
            Vec t = theta;
            for (int j = 0; j < prob.k(); ++j) t[prob.s_index(j)] += sh * (j + 1);
            try {
                if ((prob.residual(t, 0) - r0).cwiseAbs().maxCoeff() > o.invariance_tol) return false;
            } catch (const Error&) {
                return false;
            }
        }
    }
    return true;
}

struct JumpCount {
    std::string x, y;
    int k = 1;
    bool parity = false;
    std::string method;
    std::vector<JumpSolution> solutions;
};

/// n_k(x, y) mod 2. Exact s-invariant systems contribute 0; an uncertified
/// root that is not an exact s-family refuses the count.
inline JumpCount count_k_jump_mod2(const JumpProblem& prob) {
    const int n = prob.scenario().dim();
    if (2 * prob.k() - 1 > n)
        throw StructuralError("R_" + std::to_string(2 * prob.k() - 1) + " vanishes beyond dimension " + std::to_string(n));
    JumpCount out;
    out.x = prob.x().id;
    out.y = prob.y().id;
    out.k = prob.k();
    if (prob.moduli_dim() != 0)
        throw StructuralError("count requires a zero-dimensional moduli space, got dimension " + std::to_string(prob.moduli_dim()));
    if (s_invariant(prob)) {
        out.method = "s-invariant";
        return out;
    }
    auto en = enumerate_k_jump_flow_lines(prob);
    if (!en.families.empty()) {
        int dim = 0;
        for (const auto& f : en.families) dim = std::max(dim, f.dimension);
        std::ostringstream os;
        os << "non-transversal configuration for " << out.x << " -> " << out.y << ", k = " << out.k << ": "
           << en.families.size() << " uncertified root(s), family dimension estimate " << dim << " (sigma_min "
           << en.families.front().sigma_min << ")";
        throw NonTransversal(os.str());
    }
    out.method = "certified-roots";
    out.solutions = std::move(en.solutions);
    out.parity = out.solutions.size() % 2 == 1;
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction and export
// ---------------------------------------------------------------------------

struct JumpRecord {
    int after_segment = 0;
    double s = 0.0;
    Vec from, to;
};

struct JumpPath {
    std::vector<Trajectory> segments;
    std::vector<JumpRecord> jumps;
};

inline JumpPath reconstruct(const JumpProblem& prob, const Vec& theta, int branch) {
    const Scenario& sc = prob.scenario();
    const FlowOptions& fo = prob.options().flow;
    JumpPath path;
    auto run = [&](const Vec& p0, double t, bool stop) {
        Trajectory tr;
        FlowRequest req;
        req.horizon = std::fabs(t);
        req.stop_on_arrival = stop;
        integrate_field(sc, gradient_field(sc, t >= 0 ? 1.0 : -1.0), p0, req, fo, &tr);
        if (t < 0) {
            std::reverse(tr.p.begin(), tr.p.end());
            std::reverse(tr.f.begin(), tr.f.end());
            std::reverse(tr.grad_norm.begin(), tr.grad_norm.end());
            double T = tr.t.back();
            std::reverse(tr.t.begin(), tr.t.end());
            for (auto& v : tr.t) v = T - v;
        }
        return tr;
    };
    Vec p;
    if (prob.unstable_dim() == 0) {
        p = prob.x().location;
        Trajectory tr;
        tr.t = {0.0};
        tr.p = {p};
        tr.f = {sc.f.value(p)};
        tr.grad_norm = {riemannian_gradient(sc, p).norm()};
        path.segments.push_back(std::move(tr));
    } else {
        double tau = theta[prob.tau_index()];
        path.segments.push_back(run(prob.seed(theta, branch), tau, false));
        p = tau >= 0 ? path.segments.back().p.back() : path.segments.back().p.front();
    }
    for (int j = 0; j < prob.k(); ++j) {
        JumpRecord rec;
        rec.after_segment = j;
        rec.s = wrap_angle(theta[prob.s_index(j)]);
        rec.from = p;
        p = act(sc, theta[prob.s_index(j)], p);
        rec.to = p;
        path.jumps.push_back(rec);
        if (j + 1 < prob.k()) {
            path.segments.push_back(run(p, theta[prob.T_index(j)], false));
            p = path.segments.back().p.back();
        }
    }
    Trajectory tail;
    FlowRequest req;
    req.horizon = prob.options().duration_max;
    integrate_field(sc, gradient_field(sc, 1.0), p, req, fo, &tail);
    path.segments.push_back(std::move(tail));
    return path;
}

inline void write_jump_path_csv(std::ostream& os, const JumpPath& path) {
    os << "segment,t";
    long N = path.segments.front().p.front().size();
    for (long i = 0; i < N; ++i) os << ",x" << i;
    os << ",f,grad_norm\n";
    for (std::size_t i = 0; i < path.segments.size(); ++i) write_trajectory_csv(os, path.segments[i], static_cast<int>(i));
}

inline void write_jump_records_csv(std::ostream& os, const JumpPath& path) {
    os.precision(17);
    os << "after_segment,s";
    long N = path.jumps.empty() ? 0 : path.jumps.front().from.size();
    for (long i = 0; i < N; ++i) os << ",from" << i;
    for (long i = 0; i < N; ++i) os << ",to" << i;
    os << '\n';
    for (const auto& j : path.jumps) {
        os << j.after_segment << ',' << j.s;
        for (long i = 0; i < N; ++i) os << ',' << j.from[i];
        for (long i = 0; i < N; ++i) os << ',' << j.to[i];
        os << '\n';
    }
}

inline nlohmann::json to_json(const JumpConfiguration& c) {
    nlohmann::json j;
    j["x"] = c.x;
    j["y"] = c.y;
    j["k"] = c.k;
    j["branch"] = c.branch;
    j["angles"] = std::vector<double>(c.angles.data(), c.angles.data() + c.angles.size());
    if (c.tau)
        j["tau"] = *c.tau;
    else
        j["seed"] = "constant-at-x";
    j["s"] = c.s;
    j["T"] = c.T;
    return j;
}

inline nlohmann::json to_json(const SolutionCertificate& c) {
    nlohmann::json j;
    j["residual"] = c.residual;
    j["sigma_min"] = c.sigma_min;
    if (std::isfinite(c.isolation))
        j["isolation"] = c.isolation;
    else
        j["isolation"] = "unbounded";
    j["basin"] = c.basin;
    return j;
}

inline nlohmann::json to_json(const JumpSolution& s) {
    nlohmann::json j = to_json(s.config);
    j["certificate"] = to_json(s.certificate);
    return j;
}

// ---------------------------------------------------------------------------
// Smooth-picture cross-check (k = 1)
// ---------------------------------------------------------------------------

struct SmoothCrossCheck {
    std::string x, y;
    double rho = 0.0;
    bool parity = false;
    std::vector<double> roots;
    int sign_changes = 0;
};

/// Smooth cutoff equal to 1 for t <= -rho and 0 for t >= rho.
inline double cutoff(double t, double rho) {
    auto psi = [](double v) { return v > 0 ? std::exp(-1.0 / v) : 0.0; };
    double a = psi((rho - t) / rho), b = psi((t + rho) / rho);
    return a / (a + b);
}

/// Half of min d(s.x, s.y) over distinct critical points and s, capped at 0.1.
/// The action is isometric, so the minimum is the smallest pairwise distance.
inline double homotopy_radius(const std::vector<CriticalPoint>& crits) {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < crits.size(); ++a)
        for (std::size_t b = a + 1; b < crits.size(); ++b) bound = std::min(bound, (crits[a].location - crits[b].location).norm());
    if (!(bound > 1e-12)) throw OrbitCollision("critical points coincide; no admissible homotopy radius");
    return std::min(0.1, 0.5 * bound);
}

namespace detail {

class SmoothResidual {
   public:
    SmoothResidual(const JumpProblem& prob, double rho) : prob_(prob), rho_(rho) {}

    /// Flows V_rho from p over [-rho, rho], applies sigma_s and lands.
    JumpEvaluation from_point(const Vec& p, double s) const { return from_point(p, s, prob_.options().flow); }

    JumpEvaluation from_point(const Vec& p, double s, const FlowOptions& fo) const {
        const Scenario& sc = prob_.scenario();
        Mat R = sc.action.matrix(s);
        Mat Rt = R.transpose();
        double rho = rho_;
        auto field = [&](double t, const Vec& q) -> Vec {
            double phi = cutoff(t - rho, rho);
            Vec g = phi * sc.f.gradient(q) + (1.0 - phi) * (Rt * sc.f.gradient(R * q));
            return sc.manifold.tangent_project(q, g);
        };
        FlowRequest req;
        req.horizon = 2 * rho;
        req.stop_on_arrival = false;
        Vec u = integrate_field(sc, field, p, req, fo).p;
        return prob_.finish(act_with(sc, R, u));
    }

    Vec theta_of(const Vec& first) const {
        Vec th = Vec::Zero(prob_.parameter_count());
        th.head(first.size()) = first;
        return th;
    }

    /// First-segment point with known parameters; nearby points with the same
    /// sphere angles are reached by a short flow from it.
    struct Anchor {
        Vec first;
        Vec point;
    };

    Anchor anchor(const Vec& first, int branch) const {
        if (first.size() == 0) return {first, prob_.x().location};
        return {first, prob_.first_point(theta_of(first), branch)};
    }

    Vec start(const Vec& first, int branch, const Anchor& a) const {
        if (first.size() == 0) return a.point;
        const int na = prob_.angle_count();
        if (first.head(na) == a.first.head(na))
            return flow_for(prob_.scenario(), a.point, first[first.size() - 1] - a.first[first.size() - 1], prob_.options().flow);
        return prob_.first_point(theta_of(first), branch);
    }

    JumpEvaluation eval(const Vec& first, int branch, double s, const Anchor& a) const {
        return from_point(start(first, branch, a), s);
    }

    Mat jac(const Vec& first, int branch, double s, double h, const Anchor& a, const Vec& r0) const {
        Mat J(r0.size(), first.size());
        for (long i = 0; i < first.size(); ++i) {
            Vec t = first;
            t[i] += h;
            J.col(i) = (eval(t, branch, s, a).residual - r0) / h;
        }
        return J;
    }

    /// Least-squares first-segment parameters at fixed s.
    Vec polish(Vec first, int branch, double s, int iterations, Anchor& a) const {
        const JumpOptions& o = prob_.options();
        Vec r = eval(first, branch, s, a).residual;
        double rn = r.norm();
        for (int it = 0; it < iterations && rn > 1e-13; ++it) {
            Mat J = jac(first, branch, s, o.fd_step, a, r);
            Vec step = -J.completeOrthogonalDecomposition().solve(r);
            if (!std::isfinite(step.norm())) break;
            if (step.norm() > 1.0) step *= 1.0 / step.norm();
            bool improved = false;
            for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
                Vec trial = first + alpha * step;
                if (prob_.unstable_dim() >= 1) {
                    double& t = trial[first.size() - 1];
                    t = std::clamp(t, o.tau_min, o.duration_max);
                }
                Vec tr = eval(trial, branch, s, a).residual;
                if (tr.norm() < rn) {
                    first = trial;
                    r = tr;
                    rn = tr.norm();
                    improved = true;
                    break;
                }
            }
            if (!improved || step.norm() < 1e-10) break;
        }
        a = {first, start(first, branch, a)};
        return first;
    }

    /// Signed residual: sign(det[J_theta | r]) |r| at the least-squares theta.
    double signed_residual(const Vec& first, int branch, double s, const Anchor& a, double* norm, double* landing) const {
        auto ev = eval(first, branch, s, a);
        if (norm) *norm = ev.residual.norm();
        if (landing) *landing = ev.landing_distance;
        if (first.size() == 0) return ev.residual[0];
        Mat M(ev.residual.size(), first.size() + 1);
        M.leftCols(first.size()) = jac(first, branch, s, prob_.options().fd_step, a, ev.residual);
        M.col(first.size()) = ev.residual;
        double det = M.determinant();
        return (det >= 0 ? 1.0 : -1.0) * ev.residual.norm();
    }

   private:
    const JumpProblem& prob_;
    double rho_;
};

}  // namespace detail

/**
 * Parity of k = 1 connections for the smooth homotopy F_rho from f to f o sigma_s.
 * For each s on a grid the first-segment parameters are fitted by least squares;
 * sign changes of the signed residual are bisected and kept when they close on y.
 */
inline SmoothCrossCheck smooth_continuation_crosscheck(const Scenario& sc, const std::vector<CriticalPoint>& crits,
                                                       const CriticalPoint& x, const CriticalPoint& y,
                                                       JumpOptions opt) {
    if (y.index != x.index - 1) throw StructuralError("smooth cross-check requires mu(y) = mu(x) - 1");
    SmoothCrossCheck out;
    out.x = x.id;
    out.y = y.id;
    out.rho = homotopy_radius(crits);
    JumpProblem prob(sc, crits, x, y, 1, opt);
    detail::SmoothResidual sr(prob, out.rho);
    const int u = prob.unstable_dim();
    const int nf = prob.parameter_count() - 1;
    const int R = opt.smooth_resolution;
    const double phase = 0.3819660112501051;
    std::vector<double> svals(static_cast<std::size_t>(R));
    for (int i = 0; i < R; ++i) svals[static_cast<std::size_t>(i)] = kTwoPi * (i + phase) / R;

    // First-segment grid, independent of s.
    std::vector<Vec> grid_params;
    std::vector<std::vector<Vec>> grid_points(static_cast<std::size_t>(prob.branches()));
    if (u >= 1) {
        const auto taus = tau_grid(opt);
        std::vector<std::vector<double>> axes;
        for (int a = 0; a < prob.angle_count(); ++a) {
            std::vector<double> v;
            if (a + 1 < prob.angle_count())
                for (int i = 0; i < opt.polar_resolution; ++i) v.push_back((i + 0.5) * std::numbers::pi / opt.polar_resolution);
            else
                for (int i = 0; i < opt.s_resolution; ++i) v.push_back(kTwoPi * i / opt.s_resolution);
            axes.push_back(v);
        }
        std::size_t n_dirs = 1;
        for (const auto& a : axes) n_dirs *= a.size();
        for (int b = 0; b < prob.branches(); ++b) {
            for (std::size_t di = 0; di < n_dirs; ++di) {
                Vec ang(prob.angle_count());
                std::size_t rem = di;
                for (int a = prob.angle_count() - 1; a >= 0; --a) {
                    const auto& v = axes[static_cast<std::size_t>(a)];
                    ang[a] = v[rem % v.size()];
                    rem /= v.size();
                }
                Vec th = Vec::Zero(prob.parameter_count());
                th.head(ang.size()) = ang;
                auto pts = detail::flow_checkpoints(sc, prob.seed(th, b), taus, opt.flow);
                for (std::size_t t = 0; t < taus.size(); ++t) {
                    if (b == 0) {
                        Vec f(nf);
                        f.head(ang.size()) = ang;
                        f[nf - 1] = taus[t];
                        grid_params.push_back(f);
                    }
                    grid_points[static_cast<std::size_t>(b)].push_back(pts[t]);
                }
            }
        }
    }

    for (int b = 0; b < prob.branches(); ++b) {
        std::vector<Vec> best(svals.size());
        std::vector<detail::SmoothResidual::Anchor> anchors(svals.size());
        std::vector<double> g(svals.size());
        FlowOptions coarse = opt.flow;
        coarse.rtol = std::max(coarse.rtol, 1e-6);
        coarse.atol = std::max(coarse.atol, 1e-8);
        parallel_for(svals.size(), [&](std::size_t i) {
            double s = svals[i];
            Vec first(nf);
            auto& a = anchors[i];
            if (u >= 1) {
                double bn = std::numeric_limits<double>::infinity();
                std::size_t bi = 0;
                const auto& pts = grid_points[static_cast<std::size_t>(b)];
                for (std::size_t j = 0; j < pts.size(); ++j) {
                    double v;
                    try {
                        v = sr.from_point(pts[j], s, coarse).residual.norm();
                    } catch (const Error&) {
                        continue;
                    }
                    if (v < bn) {
                        bn = v;
                        bi = j;
                    }
                }
                a = {grid_params[bi], pts[bi]};
                try {
                    first = sr.polish(grid_params[bi], b, s, 4, a);
                } catch (const Error&) {
                    first = grid_params[bi];
                }
            } else {
                a = sr.anchor(first, b);
            }
            best[i] = first;
            try {
                g[i] = sr.signed_residual(first, b, s, a, nullptr, nullptr);
            } catch (const Error&) {
                g[i] = std::numeric_limits<double>::quiet_NaN();
            }
        });
        for (std::size_t i = 0; i < svals.size(); ++i) {
            std::size_t j = (i + 1) % svals.size();
            if (!std::isfinite(g[i]) || !std::isfinite(g[j]) || (g[i] > 0) == (g[j] > 0)) continue;
            ++out.sign_changes;
            double lo = svals[i], hi = j == 0 ? svals[j] + kTwoPi : svals[j];
            double glo = g[i];
            Vec first = best[i];
            auto a = anchors[i];
            double rn = 0.0, ld = 0.0;
            try {
                for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
                    if (hi - lo < 1e-4 && ld > 10 * opt.landing_accept) break;
                    double mid = 0.5 * (lo + hi);
                    if (u >= 1) first = sr.polish(first, b, mid, 30, a);
                    double gm = sr.signed_residual(first, b, mid, a, &rn, &ld);
                    if ((gm > 0) == (glo > 0)) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                double s = 0.5 * (lo + hi);
                if (u >= 1) first = sr.polish(first, b, s, 30, a);
                sr.signed_residual(first, b, s, a, &rn, &ld);
                bool inside = u == 0 || (first[nf - 1] > opt.tau_min + 1e-6 && first[nf - 1] < opt.duration_max - 1e-6);
                if (rn < 1e-7 && ld < opt.landing_accept && inside) out.roots.push_back(wrap_angle(s));
            } catch (const Error&) {
            }
        }
    }
    out.parity = out.roots.size() % 2 == 1;
    return out;
}

inline SmoothCrossCheck smooth_continuation_crosscheck(const Scenario& sc, const std::vector<CriticalPoint>& crits,
                                                       const CriticalPoint& x, const CriticalPoint& y) {
    return smooth_continuation_crosscheck(sc, crits, x, y, JumpOptions::from(sc.tol));
}

// ---------------------------------------------------------------------------
// Broken limits of one-dimensional families
// ---------------------------------------------------------------------------

struct BrokenLimit {
    int m = 2;
    std::vector<int> gamma;
    std::string via;
    std::string parameter;
    double approach = 0.0;
    bool index_balanced = false;
    JumpConfiguration config;

    int jump_sum() const {
        int s = 0;
        for (int g : gamma) s += g;
        return s;
    }
};

struct LimitReport {
    std::vector<BrokenLimit> limits;
    std::vector<std::string> other_ends;
    int steps = 0;
};

namespace detail {

/// Central differences with the step shrunk per column until the change stays in the linear regime.
inline Mat stiff_jacobian(const JumpProblem& prob, const Vec& theta, int branch, double h0) {
    const double cap = 1e-4;
    const int P = prob.parameter_count();
    Mat J(prob.residual_dim(), P);
    for (int i = 0; i < P; ++i) {
        double h = h0;
        for (int pass = 0; pass < 6; ++pass) {
            Vec tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            J.col(i) = (prob.residual(tp, branch) - prob.residual(tm, branch)) / (2 * h);
            const double change = J.col(i).norm() * h;
            if (change <= cap || h <= 1e-12) break;
            h = std::max(1e-12, 0.5 * cap / J.col(i).norm());
        }
    }
    return J;
}

struct Approach {
    std::string via;
    double distance = std::numeric_limits<double>::infinity();
};

/// Closest approach of the points to a critical point other than the excluded ones.
inline Approach closest_crit(const JumpProblem& prob, const std::vector<Vec>& pts, const std::string& exclude_a,
                             const std::string& exclude_b) {
    Approach a;
    for (const auto& c : prob.crits()) {
        if (c.id == exclude_a || c.id == exclude_b) continue;
        for (const auto& p : pts) {
            double d = (p - c.location).norm();
            if (d < a.distance) {
                a.distance = d;
                a.via = c.id;
            }
        }
    }
    return a;
}

/// Closest approach per piece: 0 = first segment, 1..k-1 = interior segments, k = arrival tail.
inline std::vector<Approach> piece_approaches(const JumpProblem& prob, const Vec& theta, int branch) {
    JumpPath path = reconstruct(prob, theta, branch);
    const int k = prob.k();
    std::vector<Approach> out;
    for (int i = 0; i < k; ++i) {
        if (i == 0 && prob.unstable_dim() == 0) {
            out.push_back({});
            continue;
        }
        out.push_back(closest_crit(prob, path.segments[static_cast<std::size_t>(i)].p, i == 0 ? prob.x().id : "", ""));
    }
    Approach tail;
    if (prob.y().index > 0) {
        const double t_land = prob.evaluate(theta, branch).landing_time;
        const Trajectory& tr = path.segments.back();
        std::vector<Vec> pts;
        for (std::size_t i = 0; i < tr.p.size() && tr.t[i] <= t_land; ++i) pts.push_back(tr.p[i]);
        tail = closest_crit(prob, pts, prob.y().id, "");
    }
    out.push_back(tail);
    return out;
}

}  // namespace detail

/**
 * Follows the one-dimensional family through theta0 in both directions by
 * pseudo-arclength continuation until one piece of the configuration closes
 * in on an intermediate critical point z, or a duration exceeds
 * limit_duration. Piece i (0 = first segment, k = arrival) breaking at z
 * gives type (2; (i, k - i)). Integration accuracy bounds how close the
 * family can be followed to the break, hence the shrinking-approach test.
 */
inline LimitReport broken_limit_diagnostics(const JumpProblem& prob, const Vec& theta0, int branch) {
    if (prob.moduli_dim() != 1)
        throw StructuralError("broken-limit diagnostics need a one-dimensional family, got dimension " +
                              std::to_string(prob.moduli_dim()));
    const JumpOptions& o = prob.options();
    const int P = prob.parameter_count();
    const int k = prob.k();
    LimitReport rep;

    auto jac = [&](const Vec& th) { return detail::stiff_jacobian(prob, th, branch, o.fd_step); };
    auto tangent = [&](const Mat& J) {
        Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
        return Vec(svd.matrixV().col(P - 1));
    };

    auto names = [&](int i) -> std::string {
        if (i == 0) return "tau";
        if (i == k) return "landing";
        return "T" + std::to_string(i);
    };

    // A piece breaks at z when its closest approach to z is below break_radius and has
    // shrunk over the last three accepted steps, or when its duration blows up.
    auto classify = [&](const Vec& th, const JumpEvaluation& ev,
                        std::vector<std::vector<detail::Approach>>& history) -> std::optional<BrokenLimit> {
        history.push_back(detail::piece_approaches(prob, th, branch));
        const auto& pieces = history.back();
        int hit = -1;
        for (int i = 0; i <= k && hit < 0; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!(pieces[idx].distance < o.break_radius) || history.size() < 4) continue;
            bool shrinking = true;
            for (std::size_t back = 1; back <= 3; ++back) {
                const auto& newer = history[history.size() - back][idx];
                const auto& older = history[history.size() - back - 1][idx];
                if (newer.via != pieces[idx].via || older.via != pieces[idx].via || !(newer.distance < older.distance))
                    shrinking = false;
            }
            if (shrinking) hit = i;
        }
        if (hit < 0) {
            if (prob.unstable_dim() >= 1 && th[prob.tau_index()] >= o.limit_duration) hit = 0;
            for (int j = 0; j + 1 < k && hit < 0; ++j)
                if (th[prob.T_index(j)] >= o.limit_duration) hit = j + 1;
            if (hit < 0 && ev.landing_time >= o.limit_duration) hit = k;
            if (hit < 0) return std::nullopt;
            if (pieces[static_cast<std::size_t>(hit)].distance > 0.05)
                throw LimitUnresolved("parameter blow-up in " + names(hit) + " without a critical point at the break");
        }
        BrokenLimit bl;
        bl.config = prob.decode(th, branch);
        bl.parameter = names(hit);
        bl.gamma = {hit, k - hit};
        bl.via = pieces[static_cast<std::size_t>(hit)].via;
        bl.approach = pieces[static_cast<std::size_t>(hit)].distance;
        const int mz = find_crit(prob.crits(), bl.via).index;
        auto piece_dim = [](int from, int to, int jumps) { return jumps == 0 ? to - from - 1 : to - from + 2 * jumps - 1; };
        bl.index_balanced = piece_dim(prob.x().index, mz, hit) == 0 && piece_dim(mz, prob.y().index, k - hit) == 0;
        return bl;
    };

    auto correct = [&](Vec th, const Vec& t, const Vec& pred) -> std::optional<Vec> {
        for (int it = 0; it < 15; ++it) {
            Vec r = prob.residual(th, branch);
            Vec ra(P);
            ra.head(P - 1) = r;
            ra[P - 1] = t.dot(th - pred);
            if (ra.norm() < 1e-9) return th;
            Mat J(P, P);
            J.topRows(P - 1) = jac(th);
            J.row(P - 1) = t.transpose();
            Vec step = -J.colPivHouseholderQr().solve(ra);
            if (!std::isfinite(step.norm()) || step.norm() > 1.0) return std::nullopt;
            th += step;
            if (step.norm() < 1e-13) break;
        }
        if (prob.residual(th, branch).norm() < o.residual_tol) return th;
        return std::nullopt;
    };

    const Vec t0 = tangent(jac(theta0));
    for (int dir : {1, -1}) {
        Vec th = theta0;
        Vec t = dir * t0;
        double h = 0.05;
        bool done = false;
        std::vector<std::vector<detail::Approach>> history;
        for (int step = 0; step < o.continuation_steps && !done; ++step) {
            ++rep.steps;
            Vec pred = th + h * t;
            std::optional<Vec> next;
            try {
                next = correct(pred, t, pred);
            } catch (const Error&) {
            }
            if (!next) {
                h *= 0.5;
                if (h < 1e-9) {
                    rep.other_ends.push_back("continuation stalled");
                    done = true;
                }
                continue;
            }
            Vec nt = tangent(jac(*next));
            if (nt.dot(t) < 0) nt = -nt;
            th = *next;
            t = nt;
            h = std::min(1.0, h * 1.5);
            for (int j = 0; j + 1 < k; ++j)
                if (th[prob.T_index(j)] < 0) {
                    rep.other_ends.push_back("T" + std::to_string(j + 1) + " reached 0");
                    done = true;
                }
            if (prob.unstable_dim() >= 1 && th[prob.tau_index()] < o.tau_min) {
                rep.other_ends.push_back("tau reached the seed sphere");
                done = true;
            }
            if (done) break;
            auto bl = classify(th, prob.evaluate(th, branch), history);
            if (bl) {
                rep.limits.push_back(std::move(*bl));
                done = true;
            }
            if (step > 10 && prob.distance(th, theta0) < 0.5 * h) {
                rep.other_ends.push_back("closed loop");
                done = true;
            }
        }
        if (!done) rep.other_ends.push_back("step budget exhausted");
    }
    if (rep.limits.empty()) {
        std::string ends;
        for (const auto& e : rep.other_ends) ends += (ends.empty() ? "" : "; ") + e;
        throw LimitUnresolved("no broken limit reached along the family (ends: " + ends + ")");
    }
    return rep;
}

}  // namespace eqmorse
