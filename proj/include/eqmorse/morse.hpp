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
 * @file morse.hpp
 * @brief Critical points, ordinary flow-line counts and the Morse complex over Z2.
 */

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "flow.hpp"
#include "z2t.hpp"

namespace eqmorse {

struct MorseOptions {
    int lattice_per_axis = 30;
    double thinning_spacing = 0.25;
    int newton_iterations = 100;
    /// Seeds per circle when the unstable sphere is one-dimensional.
    int sphere_resolution = 256;
    double seed_radius = 1e-3;
    double horizon = 50.0;
    int horizon_extensions = 2;
    double separatrix_tolerance = 1e-3;
};

// ---------------------------------------------------------------------------
// Critical points
// ---------------------------------------------------------------------------

namespace detail {

struct CellHash {
    std::size_t operator()(const std::vector<long>& k) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
        return h;
    }
};

/// Riemannian Newton iteration on the projected gradient; nullopt if it fails.
inline std::optional<Vec> newton_critical(const Scenario& sc, Vec p, int iterations) {
    const double max_step = 0.5;
    for (int it = 0; it < iterations; ++it) {
        Vec g = riemannian_gradient(sc, p);
        if (!std::isfinite(g.norm())) return std::nullopt;
        if (g.norm() < 1e-13) return p;
        Mat E = sc.manifold.tangent_basis(p);
        Mat H = riemannian_hessian(sc, p, E);
        Vec ge = E.transpose() * g;
        Vec v = -H.completeOrthogonalDecomposition().solve(ge);
        if (!std::isfinite(v.norm())) return std::nullopt;
        if (v.norm() > max_step) v *= max_step / v.norm();
        try {
            p = retract(sc, p + E * v);
        } catch (const RetractionDivergence&) {
            return std::nullopt;
        }
        if (p.cwiseAbs().maxCoeff() > 4 * sc.manifold.bound()) return std::nullopt;
    }
    if (riemannian_gradient(sc, p).norm() < sc.tol.grad_converged) return p;
    return std::nullopt;
}

}  // namespace detail

/// Retracted, thinned starting points for the critical-point search.
inline std::vector<Vec> critical_search_seeds(const Scenario& sc, const MorseOptions& opt) {
    const int N = sc.ambient_dim();
    const double bound = sc.manifold.bound();
    const double spacing = 2 * bound / opt.lattice_per_axis;
    std::vector<Vec> seeds;
    std::unordered_set<std::vector<long>, detail::CellHash> cells;
    for (const Vec& q : ambient_lattice(N, bound, opt.lattice_per_axis)) {
        Vec c = sc.manifold.constraint(q);
        Mat J = sc.manifold.jacobian(q);
        double gn = J.norm();
        if (gn == 0.0 || c.norm() / gn > 1.5 * spacing) continue;
        Vec p;
        try {
            p = retract(sc, q);
        } catch (const RetractionDivergence&) {
            continue;
        }
        std::vector<long> key(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) key[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(p[i] / opt.thinning_spacing));
        if (cells.insert(key).second) seeds.push_back(p);
    }
    return seeds;
}

/**
 * Multi-start Newton search. Critical points are sorted by (index, value) and
 * named c<index>_<ordinal>. Throws NotMorse when a degenerate one is found.
 */
inline std::vector<CriticalPoint> find_critical_points(const Scenario& sc, const MorseOptions& opt = {}) {
    auto seeds = critical_search_seeds(sc, opt);
    std::vector<std::optional<Vec>> found(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) { found[i] = detail::newton_critical(sc, seeds[i], opt.newton_iterations); });

    std::vector<Vec> unique;
    for (const auto& f : found) {
        if (!f) continue;
        bool dup = false;
        for (const auto& u : unique)
            if ((u - *f).norm() < sc.tol.dedup_radius) {
                dup = true;
                break;
            }
        if (!dup) unique.push_back(*f);
    }

    std::vector<CriticalPoint> crits;
    for (const auto& p : unique) {
        CriticalPoint cp;
        cp.location = p;
        cp.value = sc.f.value(p);
        try {
            cp.frames = local_invariant_frames(sc, p, &cp.hessian_spectrum);
        } catch (const DegenerateCriticalPoint& e) {
            throw NotMorse(std::string("not Morse: ") + e.what() + "; perturb f");
        }
        cp.index = static_cast<int>(cp.frames.stable.cols());
        crits.push_back(std::move(cp));
    }
    std::sort(crits.begin(), crits.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.index != b.index) return a.index < b.index;
        if (a.value != b.value) return a.value < b.value;
        return std::lexicographical_compare(a.location.data(), a.location.data() + a.location.size(), b.location.data(),
                                            b.location.data() + b.location.size());
    });
    std::map<int, int> ordinal;
    for (auto& cp : crits) cp.id = "c" + std::to_string(cp.index) + "_" + std::to_string(ordinal[cp.index]++);
    return crits;
}

inline const CriticalPoint& find_crit(const std::vector<CriticalPoint>& crits, const std::string& id) {
    for (const auto& c : crits)
        if (c.id == id) return c;
    throw StructuralError("unknown critical point '" + id + "'");
}

// ---------------------------------------------------------------------------
// Ordinary flow lines
// ---------------------------------------------------------------------------

struct FlowLineCount {
    std::string x, y;
    int count = 0;
    bool parity = false;
    std::string method;
    std::vector<Trajectory> lines;
};

namespace detail {

struct ShotResult {
    Trajectory traj;
    std::optional<std::string> limit;
};

inline ShotResult shoot(const Scenario& sc, const Vec& seed, double direction, const std::vector<CriticalPoint>& crits,
                        const MorseOptions& opt, const FlowOptions& fo) {
    double horizon = opt.horizon;
    for (int attempt = 0; attempt <= opt.horizon_extensions; ++attempt, horizon *= 4) {
        ShotResult r;
        FlowRequest req;
        req.horizon = horizon;
        integrate_field(sc, gradient_field(sc, direction), seed, req, fo, &r.traj);
        r.limit = classify_point(sc, r.traj.end(), crits);
        if (r.limit) return r;
    }
    std::ostringstream os;
    os << "trajectory from (" << seed.transpose() << ") did not settle within " << horizon / 4
       << " time units; slow passage near a saddle";
    throw NotMorseSmale(os.str());
}

}  // namespace detail

/**
 * Parity of isolated ascending flow lines from x to y, mu(y) = mu(x) + 1.
 * One-dimensional unstable sphere of x: both seeds are shot forward.
 * One-dimensional stable sphere of y: both seeds are shot backward.
 * Two-dimensional unstable sphere: seeds on a circle are classified by
 * their limits and every boundary between arcs is bisected; each boundary
 * is a separatrix, i.e. a flow line into an index mu(x)+1 point.
 */
inline FlowLineCount count_flow_lines(const Scenario& sc, const std::vector<CriticalPoint>& crits, const CriticalPoint& x,
                                      const CriticalPoint& y, const MorseOptions& opt = {}) {
    if (y.index != x.index + 1) throw StructuralError("count_flow_lines requires mu(y) = mu(x) + 1");
    FlowOptions fo = FlowOptions::from(sc.tol);
    FlowLineCount out;
    out.x = x.id;
    out.y = y.id;
    const int n = sc.dim();
    const int ux = n - x.index;

    auto saddle_connection = [&](const std::string& from, const std::string& to) {
        throw NotMorseSmale("flow line from " + from + " reaches " + to + " of non-increasing index (saddle connection)");
    };

    if (ux == 1 || y.index == 1) {
        const bool forward = (ux == 1);
        const CriticalPoint& base = forward ? x : y;
        Vec dir = forward ? Vec(base.frames.unstable.col(0)) : Vec(base.frames.stable.col(0));
        out.method = forward ? "forward-seeds" : "backward-seeds";
        std::vector<detail::ShotResult> shots(2);
        parallel_for(2, [&](std::size_t i) {
            double sign = i == 0 ? 1.0 : -1.0;
            Vec seed = retract(sc, base.location + sign * opt.seed_radius * dir);
            shots[i] = detail::shoot(sc, seed, forward ? 1.0 : -1.0, crits, opt, fo);
        });
        for (auto& s : shots) {
            const CriticalPoint& lim = find_crit(crits, *s.limit);
            if (forward && lim.index <= x.index) saddle_connection(x.id, lim.id);
            if (!forward && lim.index >= y.index) saddle_connection(lim.id, y.id);
            if (*s.limit == (forward ? y.id : x.id)) {
                ++out.count;
                out.lines.push_back(std::move(s.traj));
            }
        }
        out.parity = out.count % 2 == 1;
        return out;
    }

    if (ux == 2) {
        out.method = "circle-separatrices";
        const Mat& U = x.frames.unstable;
        auto seed_at = [&](double a) {
            return retract(sc, x.location + opt.seed_radius * (std::cos(a) * U.col(0) + std::sin(a) * U.col(1)));
        };
        const int R = opt.sphere_resolution;
        // grid phase keeps symmetric separatrices off the seed grid
        const double phase = 0.3819660112501051;
        std::vector<std::string> lim(static_cast<std::size_t>(R));
        parallel_for(static_cast<std::size_t>(R), [&](std::size_t i) {
            auto s = detail::shoot(sc, seed_at(kTwoPi * (static_cast<double>(i) + phase) / R), 1.0, crits, opt, fo);
            lim[i] = *s.limit;
        });
        for (const auto& id : lim)
            if (find_crit(crits, id).index <= x.index + 1) {
                if (id == y.id || find_crit(crits, id).index == x.index + 1)
                    throw ResolutionExhausted("a grid seed of " + x.id + " landed on separatrix target " + id);
                saddle_connection(x.id, id);
            }
        for (int i = 0; i < R; ++i) {
            const std::string& a = lim[static_cast<std::size_t>(i)];
            const std::string& b = lim[static_cast<std::size_t>((i + 1) % R)];
            if (a == b) continue;
            double lo = kTwoPi * (i + phase) / R, hi = kTwoPi * (i + 1 + phase) / R;
            for (int it = 0; it < 45 && hi - lo > 1e-13; ++it) {
                double mid = 0.5 * (lo + hi);
                auto s = detail::shoot(sc, seed_at(mid), 1.0, crits, opt, fo);
                if (*s.limit == a)
                    lo = mid;
                else if (*s.limit == b)
                    hi = mid;
                else
                    throw ResolutionExhausted("three-way boundary on the unstable circle of " + x.id);
            }
            Trajectory tr;
            FlowRequest req;
            req.horizon = opt.horizon;
            req.stop_on_arrival = false;
            integrate_field(sc, gradient_field(sc, 1.0), seed_at(0.5 * (lo + hi)), req, fo, &tr);
            const CriticalPoint* best = nullptr;
            double best_d = 1e300;
            for (const auto& c : crits) {
                if (c.index != x.index + 1) continue;
                for (const auto& p : tr.p) {
                    double d = (p - c.location).norm();
                    if (d < best_d) {
                        best_d = d;
                        best = &c;
                    }
                }
            }
            if (!best || best_d > opt.separatrix_tolerance)
                throw ResolutionExhausted("separatrix between " + a + " and " + b + " on the unstable circle of " + x.id +
                                          " not resolved");
            if (best->id == y.id) {
                ++out.count;
                out.lines.push_back(std::move(tr));
            }
        }
        out.parity = out.count % 2 == 1;
        return out;
    }
    throw ResolutionExhausted("no counting scheme for unstable dimension " + std::to_string(ux) + " into index " +
                              std::to_string(y.index));
}

// ---------------------------------------------------------------------------
// Morse complex
// ---------------------------------------------------------------------------

struct MorseDifferential {
    std::vector<CriticalPoint> crits;
    std::vector<FlowLineCount> counts;

    bool bit(const std::string& x, const std::string& y) const {
        for (const auto& c : counts)
            if (c.x == x && c.y == y) return c.parity;
        return false;
    }

    /// Z2 matrix d(row = target, col = source) over all critical points.
    z2t::BitMatrix matrix() const {
        z2t::BitMatrix d(crits.size(), crits.size());
        for (std::size_t i = 0; i < crits.size(); ++i)
            for (std::size_t j = 0; j < crits.size(); ++j)
                if (bit(crits[j].id, crits[i].id)) d.set(i, j, true);
        return d;
    }

    std::vector<int> critical_counts(int n) const {
        std::vector<int> c(static_cast<std::size_t>(n + 1), 0);
        for (const auto& cp : crits) ++c[static_cast<std::size_t>(cp.index)];
        return c;
    }

    /// Z2 Betti numbers of (CM*, d).
    std::vector<int> homology(int n) const {
        std::vector<int> b(static_cast<std::size_t>(n + 1), 0);
        std::vector<std::size_t> rank(static_cast<std::size_t>(n + 2), 0);
        for (int l = 0; l < n; ++l) {
            std::vector<std::size_t> src, dst;
            for (std::size_t i = 0; i < crits.size(); ++i) {
                if (crits[i].index == l) src.push_back(i);
                if (crits[i].index == l + 1) dst.push_back(i);
            }
            z2t::BitMatrix m(dst.size(), src.size());
            for (std::size_t r = 0; r < dst.size(); ++r)
                for (std::size_t c = 0; c < src.size(); ++c)
                    if (bit(crits[src[c]].id, crits[dst[r]].id)) m.set(r, c, true);
            rank[static_cast<std::size_t>(l)] = m.rank();
        }
        auto c = critical_counts(n);
        for (int l = 0; l <= n; ++l) {
            std::size_t below = l > 0 ? rank[static_cast<std::size_t>(l - 1)] : 0;
            b[static_cast<std::size_t>(l)] = c[static_cast<std::size_t>(l)] - static_cast<int>(rank[static_cast<std::size_t>(l)]) -
                                             static_cast<int>(below);
        }
        return b;
    }
};

/// Counts all consecutive-index pairs and checks d o d = 0 over Z2.
inline MorseDifferential morse_differential(const Scenario& sc, std::vector<CriticalPoint> crits, const MorseOptions& opt = {}) {
    MorseDifferential md;
    md.crits = std::move(crits);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < md.crits.size(); ++i)
        for (std::size_t j = 0; j < md.crits.size(); ++j)
            if (md.crits[j].index == md.crits[i].index + 1) pairs.push_back({i, j});
    md.counts.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k)
        md.counts[k] = count_flow_lines(sc, md.crits, md.crits[pairs[k].first], md.crits[pairs[k].second], opt);

    z2t::BitMatrix d = md.matrix();
    z2t::BitMatrix dd = d * d;
    for (std::size_t i = 0; i < md.crits.size(); ++i)
        for (std::size_t j = 0; j < md.crits.size(); ++j)
            if (dd.get(i, j))
                throw CountInconsistency("d^2 != 0 between " + md.crits[j].id + " and " + md.crits[i].id +
                                         " (transversality or resolution failure)");
    return md;
}

struct InequalityReport {
    std::vector<std::string> failures;
    int euler_crit = 0;
    int euler_betti = 0;
    bool passed() const { return failures.empty(); }
};

/// Strong Morse inequalities and equality of Euler characteristics.
inline InequalityReport check_morse_inequalities(const std::vector<int>& c, const std::vector<int>& b) {
    InequalityReport rep;
    std::size_t len = std::max(c.size(), b.size());
    auto at = [](const std::vector<int>& v, std::size_t i) { return i < v.size() ? v[i] : 0; };
    for (std::size_t k = 0; k < len; ++k) {
        int sc = 0, sb = 0;
        for (std::size_t i = 0; i <= k; ++i) {
            int sign = ((k - i) % 2 == 0) ? 1 : -1;
            sc += sign * at(c, i);
            sb += sign * at(b, i);
        }
        if (sc < sb) rep.failures.push_back("partial sum at degree " + std::to_string(k) + ": " + std::to_string(sc) + " < " +
                                            std::to_string(sb));
    }
    for (std::size_t i = 0; i < len; ++i) {
        int sign = i % 2 == 0 ? 1 : -1;
        rep.euler_crit += sign * at(c, i);
        rep.euler_betti += sign * at(b, i);
    }
    if (rep.euler_crit != rep.euler_betti)
        rep.failures.push_back("Euler characteristic " + std::to_string(rep.euler_crit) + " != " + std::to_string(rep.euler_betti));
    return rep;
}

}  // namespace eqmorse
