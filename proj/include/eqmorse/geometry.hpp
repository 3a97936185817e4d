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
 * @file geometry.hpp
 * @brief Embedded closed manifolds, orthogonal circle actions, scalar fields.
 *
 * A manifold is the zero set of N - n polynomial constraints in R^N and
 * carries the induced metric. The circle acts through exp(sA) for a real
 * N x N generator A.
 */

#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "common.hpp"
#include "polynomial.hpp"

namespace eqmorse {

struct Tolerances {
    double feasibility = 1e-9;
    double retraction = 1e-12;
    int retraction_iterations = 50;
    double retraction_basin = 2.0;
    double fd_step = 1e-5;
    double rtol = 1e-10;
    double atol = 1e-12;
    double grad_converged = 1e-10;
    double dwell = 1.0;
    double horizon = 50.0;
    double capture_radius = 1e-4;
    double capture_grad = 1e-8;
    double degeneracy = 1e-8;
    double dedup_radius = 1e-6;
    double unstable_radius = 1e-3;
};

// ---------------------------------------------------------------------------
// Scalar fields
// ---------------------------------------------------------------------------

class ScalarField {
   public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    ScalarField() = default;

    static ScalarField from_polynomial(Polynomial p) {
        auto shared = std::make_shared<const Polynomial>(std::move(p));
        ScalarField f;
        f.poly_ = shared;
        f.value_ = [shared](const Vec& x) { return shared->value(x); };
        f.grad_ = [shared](const Vec& x) { return shared->gradient(x); };
        f.hess_ = [shared](const Vec& x) { return shared->hessian(x); };
        return f;
    }

    /// Value-only field; derivatives by central differences with step h.
    static ScalarField from_value(ValueFn value, double h = 1e-5) {
        ScalarField f;
        f.value_ = std::move(value);
        f.h_ = h;
        return f;
    }

    bool analytic() const noexcept { return static_cast<bool>(grad_); }
    const Polynomial* polynomial() const noexcept { return poly_.get(); }

    double value(const Vec& x) const { return value_(x); }

    Vec gradient(const Vec& x) const {
        if (grad_) return grad_(x);
        return fd_gradient(x, h_);
    }

    Mat hessian(const Vec& x) const {
        if (hess_) return hess_(x);
        const long n = x.size();
        Mat h(n, n);
        Vec xp = x, xm = x;
        for (long i = 0; i < n; ++i) {
            xp[i] += h_;
            xm[i] -= h_;
            h.col(i) = (gradient(xp) - gradient(xm)) / (2 * h_);
            xp[i] = xm[i] = x[i];
        }
        return 0.5 * (h + h.transpose());
    }

    Vec fd_gradient(const Vec& x, double h) const {
        Vec g(x.size());
        Vec xp = x, xm = x;
        for (long i = 0; i < x.size(); ++i) {
            xp[i] += h;
            xm[i] -= h;
            g[i] = (value_(xp) - value_(xm)) / (2 * h);
            xp[i] = xm[i] = x[i];
        }
        return g;
    }

    /// f + eps * q, keeping analytic derivatives when both parts have them.
    ScalarField plus(const Polynomial& q, double eps) const {
        if (poly_) return from_polynomial(*poly_ + eps * q);
        ScalarField base = *this;
        auto shared = std::make_shared<const Polynomial>(eps * q);
        return from_value([base, shared](const Vec& x) { return base.value(x) + shared->value(x); }, h_);
    }

   private:
    std::shared_ptr<const Polynomial> poly_;
    ValueFn value_;
    GradFn grad_;
    HessFn hess_;
    double h_ = 1e-5;
};

// ---------------------------------------------------------------------------
// Embedded manifolds
// ---------------------------------------------------------------------------

class EmbeddedManifold {
   public:
    EmbeddedManifold() = default;
    EmbeddedManifold(int ambient_dim, std::vector<Polynomial> constraints, std::string description, double bound = 3.0)
        : N_(ambient_dim),
          n_(ambient_dim - static_cast<int>(constraints.size())),
          constraints_(std::move(constraints)),
          description_(std::move(description)),
          bound_(bound) {
        if (n_ <= 0) throw StructuralError("manifold must have positive dimension");
        for (const auto& c : constraints_)
            if (c.dim() != N_) throw StructuralError("constraint dimension does not match ambient dimension");
    }

    int ambient_dim() const noexcept { return N_; }
    int dim() const noexcept { return n_; }
    int codim() const noexcept { return N_ - n_; }
    const std::string& description() const noexcept { return description_; }
    const std::vector<Polynomial>& constraints() const noexcept { return constraints_; }
    /// Half-width of an ambient box containing the manifold.
    double bound() const noexcept { return bound_; }

    Vec constraint(const Vec& p) const {
        Vec c(codim());
        for (int i = 0; i < codim(); ++i) c[i] = constraints_[i].value(p);
        return c;
    }

    /// (N - n) x N Jacobian of the constraint map.
    Mat jacobian(const Vec& p) const {
        Mat J(codim(), N_);
        for (int i = 0; i < codim(); ++i) J.row(i) = constraints_[i].gradient(p).transpose();
        return J;
    }

    std::vector<Mat> constraint_hessians(const Vec& p) const {
        std::vector<Mat> h;
        for (const auto& c : constraints_) h.push_back(c.hessian(p));
        return h;
    }

    /// Newton projection q <- q - J^T (J J^T)^{-1} c(q).
    Vec retract(const Vec& q, const Tolerances& tol = {}) const {
        Vec p = q;
        for (int it = 0; it <= tol.retraction_iterations; ++it) {
            Vec c = constraint(p);
            double err = c.norm();
            if (!std::isfinite(err)) break;
            if (err < tol.retraction) return p;
            if (it == 0 && err > tol.retraction_basin) break;
            if (it == tol.retraction_iterations) break;
            if (codim() == 1) {
                Vec g = constraints_[0].gradient(p);
                double gg = g.squaredNorm();
                if (gg == 0.0) break;
                p -= (c[0] / gg) * g;
            } else {
                Mat J = jacobian(p);
                p -= J.transpose() * (J * J.transpose()).ldlt().solve(c);
            }
        }
        std::ostringstream os;
        os << "retraction diverged from q = (" << q.transpose() << ")";
        throw RetractionDivergence(os.str());
    }

    /// Orthogonal projection of v onto the tangent space at p.
    Vec tangent_project(const Vec& p, const Vec& v) const {
        if (codim() == 1) {
            Vec g = constraints_[0].gradient(p);
            return v - (g.dot(v) / g.squaredNorm()) * g;
        }
        Mat J = jacobian(p);
        return v - J.transpose() * (J * J.transpose()).ldlt().solve(J * v);
    }

    /// Orthonormal N x n basis of the tangent space at p.
    Mat tangent_basis(const Vec& p) const {
        Mat Jt = jacobian(p).transpose();
        Eigen::HouseholderQR<Mat> qr(Jt);
        Mat Q = qr.householderQ() * Mat::Identity(N_, N_);
        return Q.rightCols(n_);
    }

    /// Lagrange multipliers of the ambient vector g against the constraints.
    Vec multipliers(const Vec& p, const Vec& g) const {
        Mat J = jacobian(p);
        return (J * J.transpose()).ldlt().solve(J * g);
    }

   private:
    int N_ = 0;
    int n_ = 0;
    std::vector<Polynomial> constraints_;
    std::string description_;
    double bound_ = 3.0;
};

// ---------------------------------------------------------------------------
// Circle actions
// ---------------------------------------------------------------------------

class CircleAction {
   public:
    CircleAction() = default;
    CircleAction(Mat generator, int weight = 0) : A_(std::move(generator)), weight_(weight) {
        if (A_.rows() != A_.cols()) throw StructuralError("action generator must be square");
        trivial_ = A_.isZero(0.0);
    }

    static CircleAction trivial(int N) { return CircleAction(Mat::Zero(N, N), 0); }

    const Mat& generator() const noexcept { return A_; }
    int weight() const noexcept { return weight_; }
    bool is_trivial() const noexcept { return trivial_; }

    /// exp(sA).
    Mat matrix(double s) const {
        if (trivial_) return Mat::Identity(A_.rows(), A_.cols());
        Mat sA = s * A_;
        return sA.exp();
    }

   private:
    Mat A_;
    int weight_ = 0;
    bool trivial_ = true;
};

// ---------------------------------------------------------------------------
// Scenario and geometric operations
// ---------------------------------------------------------------------------

struct Scenario {
    std::string id;
    EmbeddedManifold manifold;
    CircleAction action;
    ScalarField f;
    Tolerances tol;

    int dim() const noexcept { return manifold.dim(); }
    int ambient_dim() const noexcept { return manifold.ambient_dim(); }
};

inline Vec retract(const Scenario& sc, const Vec& q) { return sc.manifold.retract(q, sc.tol); }

inline Vec tangent_project(const Scenario& sc, const Vec& p, const Vec& v) { return sc.manifold.tangent_project(p, v); }

inline Vec riemannian_gradient(const Scenario& sc, const Vec& p) {
    return sc.manifold.tangent_project(p, sc.f.gradient(p));
}

/// Tangent Hessian E^T (Hess f - sum lambda_i Hess c_i) E in the tangent basis E at p.
inline Mat riemannian_hessian(const Scenario& sc, const Vec& p, const Mat& E) {
    Vec g = sc.f.gradient(p);
    Vec lambda = sc.manifold.multipliers(p, g);
    Mat H = sc.f.hessian(p);
    auto hc = sc.manifold.constraint_hessians(p);
    for (std::size_t i = 0; i < hc.size(); ++i) H -= lambda[static_cast<long>(i)] * hc[i];
    return E.transpose() * H * E;
}

inline Vec act(const Scenario& sc, double s, const Vec& p) {
    if (sc.action.is_trivial()) return p;
    return sc.manifold.retract(sc.action.matrix(s) * p, sc.tol);
}

inline Vec act_with(const Scenario& sc, const Mat& rotation, const Vec& p) {
    if (sc.action.is_trivial()) return p;
    return sc.manifold.retract(rotation * p, sc.tol);
}

/// Deterministic quasi-uniform ambient points in [-bound, bound]^N.
inline std::vector<Vec> ambient_lattice(int N, double bound, int per_axis) {
    std::vector<Vec> pts;
    if (N <= 4) {
        long total = 1;
        for (int i = 0; i < N; ++i) total *= per_axis;
        pts.reserve(static_cast<std::size_t>(total));
        for (long idx = 0; idx < total; ++idx) {
            Vec p(N);
            long r = idx;
            for (int i = 0; i < N; ++i) {
                int k = static_cast<int>(r % per_axis);
                r /= per_axis;
                p[i] = -bound + (k + 0.5) * (2 * bound / per_axis);
            }
            pts.push_back(p);
        }
        return pts;
    }
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (N > 16) throw StructuralError("ambient dimension above 16 is not supported by the seed lattice");
    long total = 1;
    for (int i = 0; i < 4; ++i) total *= per_axis;
    for (long idx = 1; idx <= total; ++idx) {
        Vec p(N);
        for (int i = 0; i < N; ++i) {
            double h = 0.0, f = 1.0;
            long r = idx;
            while (r > 0) {
                f /= primes[i];
                h += f * static_cast<double>(r % primes[i]);
                r /= primes[i];
            }
            p[i] = -bound + 2 * bound * h;
        }
        pts.push_back(p);
    }
    return pts;
}

/// Feasible points obtained by retracting a coarse lattice, for sampling checks.
inline std::vector<Vec> sample_feasible_points(const Scenario& sc, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-sc.manifold.bound(), sc.manifold.bound());
    std::vector<Vec> out;
    const int N = sc.ambient_dim();
    for (int attempt = 0; attempt < 200000 && out.size() < count; ++attempt) {
        Vec q(N);
        for (int i = 0; i < N; ++i) q[i] = u(rng);
        Tolerances relaxed = sc.tol;
        relaxed.retraction_basin = 1e300;
        try {
            Vec p = sc.manifold.retract(q, relaxed);
            if (p.cwiseAbs().maxCoeff() <= 2 * sc.manifold.bound()) out.push_back(p);
        } catch (const RetractionDivergence&) {
        }
    }
    return out;
}

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
    }
    const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline ValidationReport validate_scenario(const Scenario& sc, std::size_t samples = 40, std::uint64_t seed = 1) {
    ValidationReport report;
    auto pts = sample_feasible_points(sc, samples, seed);
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(3);
        os << std::scientific << v;
        return os.str();
    };
    if (pts.empty()) {
        report.checks.push_back({"sampling", false, "no feasible sample points found"});
        return report;
    }

    double min_sv = 1e300;
    for (const auto& p : pts) {
        Eigen::JacobiSVD<Mat> svd(sc.manifold.jacobian(p));
        min_sv = std::min(min_sv, svd.singularValues().minCoeff());
    }
    report.checks.push_back({"constraint-rank", min_sv > 1e-6, "min singular value " + fmt(min_sv)});

    double fixed = 0.0;
    for (const auto& p : pts) fixed = std::max(fixed, (sc.manifold.retract(p, sc.tol) - p).norm());
    report.checks.push_back({"retraction-fixed-point", fixed < 1e-10, "max displacement " + fmt(fixed)});

    const double s_values[] = {0.3, 1.1, 2.5, 4.0, 5.9};
    double feas = 0.0;
    for (const auto& p : pts)
        for (double s : s_values) feas = std::max(feas, sc.manifold.constraint(sc.action.matrix(s) * p).norm());
    report.checks.push_back({"action-feasibility", feas < 1e-8, "max |c(exp(sA)p)| " + fmt(feas)});

    double group = (sc.action.matrix(0.0) - Mat::Identity(sc.ambient_dim(), sc.ambient_dim())).norm();
    for (double s : s_values)
        for (double t : s_values)
            group = std::max(group, (sc.action.matrix(s + t) - sc.action.matrix(s) * sc.action.matrix(t)).norm());
    group = std::max(group, (sc.action.matrix(kTwoPi) - Mat::Identity(sc.ambient_dim(), sc.ambient_dim())).norm());
    report.checks.push_back({"group-law", group < 1e-9, "max defect " + fmt(group)});

    double iso = 0.0;
    for (double s : s_values) {
        Mat E = sc.action.matrix(s);
        iso = std::max(iso, (E.transpose() * E - Mat::Identity(E.rows(), E.cols())).norm());
    }
    report.checks.push_back({"isometry", iso < 1e-10, "max |E^T E - I| " + fmt(iso)});

    double grad = 0.0;
    for (const auto& p : pts) {
        Vec g = sc.f.gradient(p);
        Vec fd = sc.f.fd_gradient(p, sc.tol.fd_step);
        grad = std::max(grad, (g - fd).norm() / std::max(1.0, g.norm()));
    }
    report.checks.push_back({"gradient-consistency", grad < 1e-6, "max relative defect " + fmt(grad)});
    return report;
}

}  // namespace eqmorse
