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
 * @file flow.hpp
 * @brief Ascending gradient flow on embedded manifolds.
 *
 * Dormand-Prince 5(4) on the tangent-projected field, followed by a
 * retraction after every accepted step. Trajectories stop on arrival at a
 * critical point (gradient below threshold for a dwell interval), on
 * reaching a prescribed level of f, or at the horizon.
 */

#include <array>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace eqmorse {

struct InvariantFrames {
    Mat unstable;  ///< N x (n - mu), ambient coordinates, orthonormal
    Mat stable;    ///< N x mu
    Vec unstable_eigenvalues;
    Vec stable_eigenvalues;
};

struct CriticalPoint {
    std::string id;
    Vec location;
    double value = 0.0;
    int index = 0;
    std::vector<double> hessian_spectrum;
    InvariantFrames frames;
};

struct FlowOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 1e-2;
    double h_max = 1.0;
    double h_min = 1e-14;
    double grad_converged = 1e-10;
    double dwell = 1.0;
    bool record = true;

    static FlowOptions from(const Tolerances& tol) {
        FlowOptions o;
        o.rtol = tol.rtol;
        o.atol = tol.atol;
        o.grad_converged = tol.grad_converged;
        o.dwell = tol.dwell;
        return o;
    }
};

enum class Termination { converged, horizon, level };

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> p;
    std::vector<double> f;
    std::vector<double> grad_norm;
    Termination termination = Termination::horizon;
    std::optional<std::string> limit;

    const Vec& end() const { return p.back(); }
    double duration() const { return t.back() - t.front(); }
};

/// End state of a flow run that does not keep samples.
struct FlowEnd {
    Vec p;
    double t = 0.0;
    Termination termination = Termination::horizon;
    std::vector<Vec> checkpoints;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                        e7 = -1.0 / 40;

struct StepResult {
    Vec y;
    Vec k7;
    double err = 0.0;
};

template <class Field>
StepResult dopri_step(Field& field, double t, const Vec& y, const Vec& k1, double h, double rtol, double atol) {
    Vec k2 = field(t + c2 * h, y + h * a21 * k1);
    Vec k3 = field(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Vec k4 = field(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec k5 = field(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec k6 = field(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    StepResult r;
    r.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    r.k7 = field(t + h, r.y);
    Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.k7);
    double acc = 0.0;
    for (long i = 0; i < y.size(); ++i) {
        double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(r.y[i]));
        acc += (e[i] / sc) * (e[i] / sc);
    }
    r.err = std::sqrt(acc / static_cast<double>(y.size()));
    return r;
}

}  // namespace detail

/// Ascending (direction +1) or descending (-1) projected gradient field.
inline auto gradient_field(const Scenario& sc, double direction = 1.0) {
    return [&sc, direction](double, const Vec& p) -> Vec { return direction * riemannian_gradient(sc, p); };
}

struct FlowRequest {
    double horizon = 50.0;
    /// Stop when f reaches this level (ascending flows only).
    std::optional<double> level;
    /// Times at which the state is reported; sorted ascending, within [0, horizon].
    std::vector<double> checkpoints;
    /// Dwell-based arrival detection.
    bool stop_on_arrival = true;
};

/**
 * Integrates a tangent field from p0 for request.horizon time units.
 * `field(t, p)` must return a tangent vector at p. Samples are appended to
 * `traj` when provided.
 */
template <class Field>
FlowEnd integrate_field(const Scenario& sc, Field field, const Vec& p0, const FlowRequest& request, const FlowOptions& opts,
                        Trajectory* traj = nullptr) {
    FlowEnd out;
    Vec y = p0;
    double t = 0.0;
    double h = opts.h_init;
    double dwell_start = -1.0;
    std::size_t next_cp = 0;
    auto fval = [&](const Vec& p) { return sc.f.value(p); };

    auto record = [&](double tt, const Vec& p, const Vec& k) {
        if (!traj) return;
        traj->t.push_back(tt);
        traj->p.push_back(p);
        traj->f.push_back(fval(p));
        traj->grad_norm.push_back(k.norm());
    };
    auto emit_checkpoints_until = [&](double tt, const Vec& p) {
        while (next_cp < request.checkpoints.size() && request.checkpoints[next_cp] <= tt + 1e-14) {
            out.checkpoints.push_back(p);
            ++next_cp;
        }
    };
    auto finish = [&](Termination term) {
        out.p = y;
        out.t = t;
        out.termination = term;
        while (next_cp < request.checkpoints.size()) {
            out.checkpoints.push_back(y);
            ++next_cp;
        }
        return out;
    };

    Vec k1 = field(t, y);
    record(t, y, k1);
    emit_checkpoints_until(t, y);
    if (request.level && fval(y) >= *request.level) return finish(Termination::level);

    while (t < request.horizon) {
        double kn = k1.norm();
        if (request.stop_on_arrival) {
            if (kn < opts.grad_converged) {
                if (dwell_start < 0) dwell_start = t;
                if (t - dwell_start >= opts.dwell) return finish(Termination::converged);
            } else {
                dwell_start = -1.0;
            }
        }
        double target = request.horizon;
        if (next_cp < request.checkpoints.size()) target = std::min(target, request.checkpoints[next_cp]);
        bool clipped = false;
        double hs = h;
        if (t + hs >= target) {
            hs = target - t;
            clipped = true;
        }
        if (hs <= 0.0) {
            t = target;
            emit_checkpoints_until(t, y);
            continue;
        }
        auto step = detail::dopri_step(field, t, y, k1, hs, opts.rtol, opts.atol);
        if (!std::isfinite(step.err)) step.err = 1e10;
        if (step.err > 1.0) {
            h = hs * std::max(0.1, 0.9 * std::pow(step.err, -0.2));
            if (h < opts.h_min) {
                std::ostringstream os;
                os << "step size underflow at t = " << t << ", p = (" << y.transpose() << ")";
                throw StiffRegion(os.str());
            }
            continue;
        }
        Vec ynew = sc.manifold.retract(step.y, sc.tol);
        double tnew = clipped ? target : t + hs;

        if (request.level && fval(ynew) >= *request.level) {
            // secant refinement of the step length onto the level set
            double ha = 0.0, hb = tnew - t;
            double ga = fval(y) - *request.level, gb = fval(ynew) - *request.level;
            Vec ystar = ynew;
            double hstar = hb;
            for (int it = 0; it < 40 && std::fabs(gb) > 1e-14; ++it) {
                double hc = (gb - ga) != 0.0 ? hb - gb * (hb - ha) / (gb - ga) : 0.5 * (ha + hb);
                if (!(hc > ha && hc < hb)) hc = 0.5 * (ha + hb);
                auto sub = detail::dopri_step(field, t, y, k1, hc, opts.rtol, opts.atol);
                Vec yc = sc.manifold.retract(sub.y, sc.tol);
                double gc = fval(yc) - *request.level;
                ystar = yc;
                hstar = hc;
                if (std::fabs(gc) <= 1e-14) break;
                if (gc < 0) {
                    ha = hc;
                    ga = gc;
                } else {
                    hb = hc;
                    gb = gc;
                }
                if (hb - ha < 1e-15) break;
            }
            y = ystar;
            t += hstar;
            k1 = field(t, y);
            record(t, y, k1);
            emit_checkpoints_until(t, y);
            return finish(Termination::level);
        }

        y = std::move(ynew);
        t = tnew;
        k1 = field(t, y);
        record(t, y, k1);
        emit_checkpoints_until(t, y);
        double fac = step.err > 0 ? 0.9 * std::pow(step.err, -0.2) : 5.0;
        if (!clipped)
            h = hs * std::clamp(fac, 0.2, 5.0);
        else if (fac < 1.0)
            h = std::min(h, hs * fac);
        h = std::min(h, opts.h_max);
    }
    return finish(Termination::horizon);
}

/// Ascending gradient flow from p0 with full sample recording.
inline Trajectory integrate(const Scenario& sc, const Vec& p0, double horizon, const FlowOptions& opts) {
    Trajectory traj;
    FlowRequest req;
    req.horizon = horizon;
    auto end = integrate_field(sc, gradient_field(sc, 1.0), p0, req, opts, &traj);
    traj.termination = end.termination;
    return traj;
}

inline Trajectory integrate(const Scenario& sc, const Vec& p0, double horizon) {
    return integrate(sc, p0, horizon, FlowOptions::from(sc.tol));
}

/// Descending flow (negated field); f decreases along the samples.
inline Trajectory integrate_backward(const Scenario& sc, const Vec& p0, double horizon, const FlowOptions& opts) {
    Trajectory traj;
    FlowRequest req;
    req.horizon = horizon;
    auto end = integrate_field(sc, gradient_field(sc, -1.0), p0, req, opts, &traj);
    traj.termination = end.termination;
    return traj;
}

/// Nearest critical point within the capture radius when the endpoint is
/// (nearly) stationary; nullopt for a timed-out trajectory away from Crit(f).
inline std::optional<std::string> classify_point(const Scenario& sc, const Vec& p, const std::vector<CriticalPoint>& crits) {
    const CriticalPoint* hit = nullptr;
    for (const auto& c : crits) {
        if ((c.location - p).norm() < sc.tol.capture_radius) {
            if (hit) throw AmbiguousCapture("critical points " + hit->id + " and " + c.id + " share one capture radius");
            hit = &c;
        }
    }
    if (!hit) return std::nullopt;
    if (riemannian_gradient(sc, p).norm() >= sc.tol.capture_grad) return std::nullopt;
    return hit->id;
}

inline std::optional<std::string> classify_limit(const Scenario& sc, Trajectory& traj, const std::vector<CriticalPoint>& crits) {
    traj.limit = classify_point(sc, traj.end(), crits);
    return traj.limit;
}

/// Eigen-decomposition of the tangent Hessian at a critical point.
inline InvariantFrames local_invariant_frames(const Scenario& sc, const Vec& p, std::vector<double>* spectrum = nullptr) {
    Mat E = sc.manifold.tangent_basis(p);
    Mat H = riemannian_hessian(sc, p, E);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (H + H.transpose()));
    const Vec& lam = eig.eigenvalues();
    const Mat& V = eig.eigenvectors();
    for (long i = 0; i < lam.size(); ++i)
        if (std::fabs(lam[i]) < sc.tol.degeneracy) {
            std::ostringstream os;
            os << "degenerate critical point at (" << p.transpose() << "), eigenvalue " << lam[i];
            throw DegenerateCriticalPoint(os.str());
        }
    InvariantFrames fr;
    std::vector<long> pos, neg;
    for (long i = 0; i < lam.size(); ++i) (lam[i] > 0 ? pos : neg).push_back(i);
    fr.unstable.resize(p.size(), static_cast<long>(pos.size()));
    fr.unstable_eigenvalues.resize(static_cast<long>(pos.size()));
    fr.stable.resize(p.size(), static_cast<long>(neg.size()));
    fr.stable_eigenvalues.resize(static_cast<long>(neg.size()));
    for (std::size_t j = 0; j < pos.size(); ++j) {
        fr.unstable.col(static_cast<long>(j)) = E * V.col(pos[j]);
        fr.unstable_eigenvalues[static_cast<long>(j)] = lam[pos[j]];
    }
    for (std::size_t j = 0; j < neg.size(); ++j) {
        fr.stable.col(static_cast<long>(j)) = E * V.col(neg[j]);
        fr.stable_eigenvalues[static_cast<long>(j)] = lam[neg[j]];
    }
    if (spectrum) spectrum->assign(lam.data(), lam.data() + lam.size());
    return fr;
}

inline InvariantFrames local_invariant_frames(const Scenario& sc, const CriticalPoint& cp) {
    return local_invariant_frames(sc, cp.location);
}

/// Unit vector in R^u from u - 1 hyperspherical angles.
inline Vec sphere_direction(const Vec& angles, int u) {
    Vec d(u);
    if (u == 1) {
        d[0] = 1.0;
        return d;
    }
    double prod = 1.0;
    for (int i = 0; i < u - 1; ++i) {
        d[i] = prod * std::cos(angles[i]);
        prod *= std::sin(angles[i]);
    }
    d[u - 1] = prod;
    return d;
}

/// Unit directions sampling S^{u-1}: the two points for u = 1, equally
/// spaced angles for u = 2, a Fibonacci lattice for u = 3, and seeded
/// normalized Gaussians above.
inline std::vector<Vec> unit_sphere_directions(int u, int resolution) {
    std::vector<Vec> dirs;
    if (u <= 0) return dirs;
    if (u == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
        return dirs;
    }
    if (u == 2) {
        for (int i = 0; i < resolution; ++i) {
            double a = kTwoPi * i / resolution;
            Vec d(2);
            d << std::cos(a), std::sin(a);
            dirs.push_back(d);
        }
        return dirs;
    }
    if (u == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < resolution; ++i) {
            double z = 1.0 - 2.0 * (i + 0.5) / resolution;
            double r = std::sqrt(1.0 - z * z);
            Vec d(3);
            d << r * std::cos(golden * i), r * std::sin(golden * i), z;
            dirs.push_back(d);
        }
        return dirs;
    }
    std::mt19937_64 rng(static_cast<std::uint64_t>(u) * 1000003u + static_cast<std::uint64_t>(resolution));
    std::normal_distribution<double> g;
    for (int i = 0; i < resolution; ++i) {
        Vec d(u);
        for (int j = 0; j < u; ++j) d[j] = g(rng);
        dirs.push_back(d.normalized());
    }
    return dirs;
}

inline std::vector<Vec> sample_unstable_sphere(const Scenario& sc, const CriticalPoint& cp, double radius, int resolution) {
    std::vector<Vec> seeds;
    const Mat& U = cp.frames.unstable;
    for (const auto& d : unit_sphere_directions(static_cast<int>(U.cols()), resolution))
        seeds.push_back(retract(sc, cp.location + radius * (U * d)));
    return seeds;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int segment = -1) {
    os.precision(17);
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        if (segment >= 0) os << segment << ',';
        os << traj.t[i];
        for (long j = 0; j < traj.p[i].size(); ++j) os << ',' << traj.p[i][j];
        os << ',' << traj.f[i] << ',' << traj.grad_norm[i] << '\n';
    }
}

}  // namespace eqmorse
