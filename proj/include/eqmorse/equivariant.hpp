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
 * @file equivariant.hpp
 * @brief The equivariant complex CM* (x) Z2[T] with d_S1 = d + sum_k R_{2k-1} T^k.
 *
 * d raises the Morse index by one; R_{2k-1} lowers it by 2k - 1, so every
 * entry of d_S1 raises the total degree mu + 2j by exactly one.
 */

#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "jumps.hpp"
#include "morse.hpp"
#include "z2t.hpp"

namespace eqmorse {

inline int total_degree(int index, int power) { return index + 2 * power; }
inline int total_degree(const CriticalPoint& x, int power) { return total_degree(x.index, power); }

inline int max_jump_order(int n) { return (n + 1) / 2; }

// ---------------------------------------------------------------------------
// Jump counts
// ---------------------------------------------------------------------------

struct JumpPairOutcome {
    std::string x, y;
    int k = 1;
    std::optional<JumpCount> count;
    std::string failure_kind;
    std::string failure;
};

struct JumpTable {
    std::vector<JumpPairOutcome> pairs;

    const JumpPairOutcome* first_missing() const {
        for (const auto& p : pairs)
            if (!p.count) return &p;
        return nullptr;
    }
    bool complete() const { return first_missing() == nullptr; }
};

/// Every pair with mu(y) = mu(x) + 1 - 2k, 1 <= k <= k_max. Failures are recorded, not thrown.
inline JumpTable compute_jump_table(const Scenario& sc, const std::vector<CriticalPoint>& crits, int k_max,
                                    const JumpOptions& opt) {
    if (k_max > max_jump_order(sc.dim()))
        throw StructuralError("k_max " + std::to_string(k_max) + " exceeds floor((n+1)/2) = " + std::to_string(max_jump_order(sc.dim())));
    JumpTable table;
    for (int k = 1; k <= k_max; ++k)
        for (const auto& x : crits)
            for (const auto& y : crits) {
                if (y.index != x.index + 1 - 2 * k) continue;
                JumpPairOutcome out;
                out.x = x.id;
                out.y = y.id;
                out.k = k;
                try {
                    JumpProblem prob(sc, crits, x, y, k, opt);
                    out.count = count_k_jump_mod2(prob);
                } catch (const Error& e) {
                    out.failure_kind = e.kind();
                    out.failure = e.what();
                }
                table.pairs.push_back(std::move(out));
            }
    return table;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct EquivariantDifferential {
    int dimension = 0;
    int k_max = 0;
    std::vector<z2t::Generator> generators;
    z2t::BitMatrix d;
    std::map<int, z2t::BitMatrix> jumps;
    z2t::GradedComplex complex;

    int find(const std::string& id) const {
        for (std::size_t i = 0; i < generators.size(); ++i)
            if (generators[i].id == id) return static_cast<int>(i);
        throw StructuralError("unknown generator '" + id + "'");
    }

    /// R_{2k-1} as a matrix (row = target, col = source); zero when absent.
    z2t::BitMatrix R(int k) const {
        auto it = jumps.find(k);
        if (it != jumps.end()) return it->second;
        return z2t::BitMatrix(generators.size(), generators.size());
    }

    bool jump_bit(int k, const std::string& x, const std::string& y) const { return R(k).get(find(y), find(x)); }
};

/// Builds the complex from a base differential and jump bits. Rebuilds `complex`
/// from `d` and `jumps`, so callers may edit bits and reassemble.
inline void rebuild_complex(EquivariantDifferential& e, int m_max) {
    z2t::GradedComplex c;
    c.dimension = e.dimension;
    c.m_max = m_max;
    c.generators = e.generators;
    const std::size_t g = e.generators.size();
    for (std::size_t r = 0; r < g; ++r)
        for (std::size_t col = 0; col < g; ++col) {
            z2t::Z2Poly p;
            if (e.d.get(r, col)) p += z2t::Z2Poly::monomial(0);
            for (const auto& [k, m] : e.jumps)
                if (m.get(r, col)) p += z2t::Z2Poly::monomial(k);
            c.set_entry(static_cast<int>(r), static_cast<int>(col), std::move(p));
        }
    c.check_homogeneous();
    e.complex = std::move(c);
}

inline EquivariantDifferential assemble_d_s1(const MorseDifferential& md, const JumpTable& jt, int dimension, int m_max) {
    if (const auto* miss = jt.first_missing())
        throw AssemblyRefused("missing jump count " + miss->x + " -> " + miss->y + " (k = " + std::to_string(miss->k) +
                              "): " + miss->failure);
    EquivariantDifferential e;
    e.dimension = dimension;
    e.k_max = max_jump_order(dimension);
    for (const auto& cp : md.crits) e.generators.push_back({cp.id, cp.index});
    e.d = md.matrix();
    for (const auto& p : jt.pairs) {
        if (2 * p.k - 1 > dimension) throw StructuralError("jump order beyond dimension for " + p.x + " -> " + p.y);
        auto it = e.jumps.try_emplace(p.k, e.generators.size(), e.generators.size()).first;
        if (p.count->parity) it->second.set(e.find(p.y), e.find(p.x), true);
    }
    rebuild_complex(e, m_max);
    return e;
}

struct AssemblyInputs {
    std::vector<CriticalPoint> crits;
    MorseDifferential morse;
    JumpTable jumps;
};

inline AssemblyInputs compute_assembly_inputs(const Scenario& sc, int k_max, const MorseOptions& mo, const JumpOptions& jo) {
    AssemblyInputs in;
    in.crits = find_critical_points(sc, mo);
    in.morse = morse_differential(sc, in.crits, mo);
    in.jumps = compute_jump_table(sc, in.crits, k_max, jo);
    return in;
}

inline EquivariantDifferential assemble_d_s1(const Scenario& sc, int k_max, int m_max = 8) {
    auto in = compute_assembly_inputs(sc, k_max, MorseOptions{}, JumpOptions::from(sc.tol));
    return assemble_d_s1(in.morse, in.jumps, sc.dim(), m_max);
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct SquareEntry {
    std::string x, y;
    int power = 0;
    friend bool operator==(const SquareEntry&, const SquareEntry&) = default;
};

struct DSquaredReport {
    std::vector<SquareEntry> nonzero;
    bool zero() const { return nonzero.empty(); }
};

inline DSquaredReport verify_d_squared(const EquivariantDifferential& e) {
    const z2t::PolyMatrix D = e.complex.matrix();
    const z2t::PolyMatrix D2 = D * D;
    DSquaredReport rep;
    for (std::size_t r = 0; r < D2.rows(); ++r)
        for (std::size_t c = 0; c < D2.cols(); ++c) {
            const z2t::Z2Poly& p = D2(r, c);
            for (int j = 0; j <= p.degree(); ++j)
                if (p.coeff(j)) rep.nonzero.push_back({e.generators[c].id, e.generators[r].id, j});
        }
    return rep;
}

/// T^k coefficient of d_S1^2: d R_{2k-1} + R_{2k-1} d + sum_{i+j=k} R_{2i-1} R_{2j-1}; k = 0 gives d^2.
inline z2t::BitMatrix per_k_composite(const EquivariantDifferential& e, int k) {
    const std::size_t g = e.generators.size();
    z2t::BitMatrix acc(g, g);
    auto add = [&](const z2t::BitMatrix& m) {
        for (std::size_t r = 0; r < g; ++r)
            for (std::size_t c = 0; c < g; ++c)
                if (m.get(r, c)) acc.set(r, c, !acc.get(r, c));
    };
    if (k == 0) {
        add(e.d * e.d);
        return acc;
    }
    const z2t::BitMatrix Rk = e.R(k);
    add(e.d * Rk);
    add(Rk * e.d);
    for (int i = 1; i < k; ++i) add(e.R(i) * e.R(k - i));
    return acc;
}

inline bool per_k_identity(const EquivariantDifferential& e, int k) { return per_k_composite(e, k).is_zero(); }

/// Identities for k = 0..2 k_max, the full range of T-powers in d_S1^2.
inline std::vector<bool> per_k_identities(const EquivariantDifferential& e) {
    std::vector<bool> out;
    for (int k = 0; k <= 2 * e.k_max; ++k) out.push_back(per_k_identity(e, k));
    return out;
}

// ---------------------------------------------------------------------------
// Cohomology
// ---------------------------------------------------------------------------

struct EquivariantHomology {
    z2t::HomologyTable table;
    std::vector<int> extended_dims;
    bool truncation_stable = false;
};

inline EquivariantHomology equivariant_homology(const EquivariantDifferential& e, int m_max) {
    auto rep = verify_d_squared(e);
    if (!rep.zero()) {
        const auto& f = rep.nonzero.front();
        throw NotAComplex("d_S1^2 != 0: entry " + f.x + " -> " + f.y + " at T^" + std::to_string(f.power));
    }
    EquivariantHomology out;
    out.table.dims = z2t::homology_dimensions(z2t::truncate_at(e.complex, m_max));
    out.extended_dims = z2t::homology_dimensions(z2t::truncate_at(e.complex, m_max + 2));
    out.truncation_stable = true;
    for (int m = 0; m < m_max; ++m)
        if (out.table.dims[m] != out.extended_dims[m]) out.truncation_stable = false;
    out.table.module = z2t::module_decomposition(e.complex);
    return out;
}

/// R_1 coefficients on a complex with critical counts (1, 2, 1) and d = 0:
/// R_1(p1) = a p0, R_1(q1) = b p0, R_1(p2) = c p1 + d q1.
struct R1Pattern {
    int a = 0, b = 0, c = 0, d = 0;
    bool holds() const { return (a || b) && (c || d) && ((a * c + b * d) % 2 == 0); }
};

inline R1Pattern r1_pattern(const EquivariantDifferential& e) {
    std::vector<int> by_index[3];
    for (std::size_t i = 0; i < e.generators.size(); ++i) {
        int l = e.generators[i].index;
        if (l < 0 || l > 2) throw StructuralError("R_1 pattern needs a surface");
        by_index[l].push_back(static_cast<int>(i));
    }
    if (by_index[0].size() != 1 || by_index[1].size() != 2 || by_index[2].size() != 1)
        throw StructuralError("R_1 pattern needs critical counts (1, 2, 1)");
    if (!e.d.is_zero()) throw StructuralError("R_1 pattern needs d = 0");
    const z2t::BitMatrix R1 = e.R(1);
    R1Pattern p;
    p.a = R1.get(by_index[0][0], by_index[1][0]);
    p.b = R1.get(by_index[0][0], by_index[1][1]);
    p.c = R1.get(by_index[1][0], by_index[2][0]);
    p.d = R1.get(by_index[1][1], by_index[2][0]);
    return p;
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

inline Scenario perturbed(const Scenario& sc, double amplitude, std::mt19937_64& rng) {
    Scenario out = sc;
    out.f = sc.f.plus(Polynomial::random_quadratic(sc.ambient_dim(), rng), amplitude);
    return out;
}

}  // namespace eqmorse
