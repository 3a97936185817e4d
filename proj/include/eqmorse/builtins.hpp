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

#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace eqmorse {

struct BuiltinScenario {
    std::string id;
    std::string description;
    Scenario scenario;
    int m_max = 8;
    std::optional<std::vector<int>> expected_dims;
    int perturbation_retries = 3;
};

namespace detail {

inline Polynomial unit_sphere_constraint(int N) {
    Polynomial c = Polynomial::constant(N, -0.5);
    for (int i = 0; i < N; ++i) {
        std::vector<int> pw(N, 0);
        pw[i] = 2;
        c.add_term(0.5, pw);
    }
    return c;
}

/// Torus of revolution about the z-axis with radii R > r.
inline Polynomial torus_constraint(double R, double r) {
    Polynomial sq(3), planar(3);
    for (int i = 0; i < 3; ++i) {
        std::vector<int> pw(3, 0);
        pw[i] = 2;
        sq.add_term(1.0, pw);
        if (i < 2) planar.add_term(1.0, pw);
    }
    Polynomial s = sq + Polynomial::constant(3, R * R - r * r);
    return (1.0 / (4 * R * R)) * (s * s + (-4 * R * R) * planar);
}

inline Mat planar_rotation_generator(int N, int i, int j, double w) {
    Mat A = Mat::Zero(N, N);
    A(i, j) = -w;
    A(j, i) = w;
    return A;
}

inline Scenario make(std::string id, EmbeddedManifold m, Mat A, int weight, Polynomial f) {
    Scenario sc;
    sc.id = std::move(id);
    sc.manifold = std::move(m);
    sc.action = CircleAction(std::move(A), weight);
    sc.f = ScalarField::from_polynomial(std::move(f));
    return sc;
}

inline std::vector<int> tensor_with_t(const std::vector<int>& betti, int m_max) {
    std::vector<int> dims(m_max + 1, 0);
    for (int m = 0; m <= m_max; ++m)
        for (int l = m; l >= 0; l -= 2)
            if (l < static_cast<int>(betti.size())) dims[m] += betti[l];
    return dims;
}

}  // namespace detail

inline EmbeddedManifold circle_manifold() { return {2, {detail::unit_sphere_constraint(2)}, "unit circle in R^2", 1.5}; }
inline EmbeddedManifold sphere_manifold() { return {3, {detail::unit_sphere_constraint(3)}, "unit sphere in R^3", 1.5}; }
inline EmbeddedManifold torus_manifold() {
    return {3, {detail::torus_constraint(2.0, 1.0)}, "torus of revolution about z, R=2, r=1", 3.5};
}
inline EmbeddedManifold s3_manifold() { return {4, {detail::unit_sphere_constraint(4)}, "unit sphere in R^4 = C^2", 1.5}; }

/// Height function tilted so that the critical orbits of the rotation are distinct.
inline Polynomial torus_height() { return Polynomial::coordinate(3, 0) + Polynomial::coordinate(3, 2, 0.1); }

inline Polynomial hopf_function(double b = 0.3) {
    Polynomial f = Polynomial::coordinate(4, 0);
    f.add_term(b, {1, 0, 1, 0});
    return f;
}

inline Mat hopf_generator() {
    Mat A = Mat::Zero(4, 4);
    A(0, 1) = -1;
    A(1, 0) = 1;
    A(2, 3) = -1;
    A(3, 2) = 1;
    return A;
}

inline std::vector<BuiltinScenario> builtin_scenarios() {
    using detail::make;
    using detail::planar_rotation_generator;
    using detail::tensor_with_t;
    std::vector<BuiltinScenario> out;

    for (int w : {1, 2, 3}) {
        std::string id = "circle-w" + std::to_string(w);
        std::vector<int> dims(9, w % 2 == 1 ? 0 : 1);
        dims[0] = 1;
        out.push_back({id, "circle, f = x, rotation of weight " + std::to_string(w),
                       make(id, circle_manifold(), planar_rotation_generator(2, 0, 1, w), w, Polynomial::coordinate(2, 0)), 8, dims});
    }
    out.push_back({"sphere-rot", "2-sphere, f = z, rotation about the z-axis",
                   make("sphere-rot", sphere_manifold(), planar_rotation_generator(3, 0, 1, 1), 1, Polynomial::coordinate(3, 2)), 8,
                   tensor_with_t({1, 0, 1}, 8)});
    out.push_back({"torus-rot", "torus of revolution, f = x + z/10, rotation about the z-axis",
                   make("torus-rot", torus_manifold(), planar_rotation_generator(3, 0, 1, 1), 1, torus_height()), 5,
                   std::vector<int>{1, 1, 0, 0, 0, 0}});
    out.push_back({"s3-hopf", "3-sphere, f = x1 + 0.3 x1 x3, Hopf action",
                   make("s3-hopf", s3_manifold(), hopf_generator(), 1, hopf_function()), 5, std::vector<int>{1, 0, 1, 0, 0, 0}});
    out.push_back({"s3-hopf-symmetric", "3-sphere, f = x1, Hopf action (degenerate jump family)",
                   make("s3-hopf-symmetric", s3_manifold(), hopf_generator(), 1, Polynomial::coordinate(4, 0)), 5,
                   std::vector<int>{1, 0, 1, 0, 0, 0}, 0});

    out.push_back({"circle-trivial", "circle, f = x, trivial action",
                   make("circle-trivial", circle_manifold(), Mat::Zero(2, 2), 0, Polynomial::coordinate(2, 0)), 8,
                   tensor_with_t({1, 1}, 8)});
    out.push_back({"sphere-trivial", "2-sphere, f = z, trivial action",
                   make("sphere-trivial", sphere_manifold(), Mat::Zero(3, 3), 0, Polynomial::coordinate(3, 2)), 8,
                   tensor_with_t({1, 0, 1}, 8)});
    out.push_back({"torus-trivial", "torus of revolution, f = x + z/10, trivial action",
                   make("torus-trivial", torus_manifold(), Mat::Zero(3, 3), 0, torus_height()), 5, tensor_with_t({1, 2, 1}, 5)});
    out.push_back({"s3-trivial", "3-sphere, f = x1 + 0.3 x1 x3, trivial action",
                   make("s3-trivial", s3_manifold(), Mat::Zero(4, 4), 0, hopf_function()), 5, tensor_with_t({1, 0, 0, 1}, 5)});
    return out;
}

inline BuiltinScenario builtin(const std::string& id) {
    for (auto& b : builtin_scenarios())
        if (b.id == id) return b;
    throw StructuralError("unknown built-in scenario '" + id + "'");
}

}  // namespace eqmorse
