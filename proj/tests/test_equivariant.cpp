// Equivariant complex: assembly, d_S1^2 = 0, per-k identities, cohomology.

#include <gtest/gtest.h>

#include "eqmorse/builtins.hpp"
#include "eqmorse/equivariant.hpp"

using namespace eqmorse;

namespace {

// Two-generator circle complex with d = 0 and R_1(max) = bit * min.
EquivariantDifferential circle_complex(bool bit, int m_max = 8) {
    EquivariantDifferential e;
    e.dimension = 1;
    e.k_max = 1;
    e.generators = {{"min", 0}, {"max", 1}};
    e.d = z2t::BitMatrix(2, 2);
    e.jumps.emplace(1, z2t::BitMatrix(2, 2));
    if (bit) e.jumps.at(1).set(0, 1, true);
    rebuild_complex(e, m_max);
    return e;
}

struct Assembled {
    AssemblyInputs inputs;
    EquivariantDifferential e;
};

Assembled assemble(const std::string& id) {
    auto b = builtin(id);
    Assembled a;
    a.inputs = compute_assembly_inputs(b.scenario, max_jump_order(b.scenario.dim()), MorseOptions{},
                                       JumpOptions::from(b.scenario.tol));
    a.e = assemble_d_s1(a.inputs.morse, a.inputs.jumps, b.scenario.dim(), b.m_max);
    return a;
}

const Assembled& cached(const std::string& id) {
    static std::map<std::string, Assembled> cache;
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, assemble(id)).first;
    return it->second;
}

std::vector<int> head(const std::vector<int>& v, std::size_t n) { return {v.begin(), v.begin() + static_cast<long>(n)}; }

}  // namespace

TEST(TotalDegree, Examples) {
    EXPECT_EQ(total_degree(1, 1), 3);
    EXPECT_EQ(total_degree(0, 0), 0);
    EXPECT_EQ(total_degree(2, 3), 8);
    EXPECT_EQ(max_jump_order(1), 1);
    EXPECT_EQ(max_jump_order(2), 1);
    EXPECT_EQ(max_jump_order(3), 2);
}

TEST(HandComplex, CircleWeightOne) {
    auto e = circle_complex(true);
    EXPECT_EQ(e.complex.entry(0, 1), z2t::Z2Poly::monomial(1));
    EXPECT_TRUE(verify_d_squared(e).zero());
    for (int k = 0; k <= 2; ++k) EXPECT_TRUE(per_k_identity(e, k));
    auto h = equivariant_homology(e, 8);
    EXPECT_EQ(h.table.dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
    EXPECT_TRUE(h.truncation_stable);
    ASSERT_EQ(h.table.module.torsion.size(), 1u);
    EXPECT_EQ(h.table.module.torsion[0], (z2t::TorsionSummand{0, 1}));
    EXPECT_EQ(h.table.module.free_rank, 0);
}

TEST(HandComplex, CircleWeightTwo) {
    auto e = circle_complex(false);
    auto h = equivariant_homology(e, 8);
    EXPECT_EQ(h.table.dims, std::vector<int>(9, 1));
    EXPECT_EQ(h.table.module.free_rank, 2);
    EXPECT_EQ(h.table.module.free_degrees, (std::vector<int>{0, 1}));
}

TEST(HandComplex, FlippedParityIsLocated) {
    // R_1(p2) = p1 alone is a complex; adding d(p1) = p2 makes d R_1 + R_1 d nonzero on p1 and p2.
    EquivariantDifferential e;
    e.dimension = 2;
    e.k_max = 1;
    e.generators = {{"p0", 0}, {"p1", 1}, {"p2", 2}};
    e.d = z2t::BitMatrix(3, 3);
    e.jumps.emplace(1, z2t::BitMatrix(3, 3));
    e.jumps.at(1).set(1, 2, true);
    rebuild_complex(e, 4);
    EXPECT_TRUE(verify_d_squared(e).zero());

    e.d.set(2, 1, true);
    rebuild_complex(e, 4);
    auto rep = verify_d_squared(e);
    ASSERT_FALSE(rep.zero());
    EXPECT_EQ(rep.nonzero.size(), 2u);
    EXPECT_EQ(rep.nonzero[0], (SquareEntry{"p1", "p1", 1}));
    EXPECT_EQ(rep.nonzero[1], (SquareEntry{"p2", "p2", 1}));
    EXPECT_TRUE(per_k_identity(e, 0));
    EXPECT_FALSE(per_k_identity(e, 1));
    EXPECT_THROW(equivariant_homology(e, 4), NotAComplex);
}

TEST(HandComplex, AllJumpsZeroSatisfiesEveryIdentity) {
    auto e = circle_complex(false);
    for (int k = 0; k <= 4; ++k) EXPECT_TRUE(per_k_identity(e, k));
}

TEST(Assembly, RefusesWithBlockingPair) {
    MorseDifferential md;
    CriticalPoint a, b;
    a.id = "c0_0";
    a.index = 0;
    b.id = "c1_0";
    b.index = 1;
    md.crits = {a, b};
    JumpTable jt;
    JumpPairOutcome p;
    p.x = "c1_0";
    p.y = "c0_0";
    p.failure_kind = "non-transversal";
    p.failure = "family";
    jt.pairs.push_back(p);
    try {
        assemble_d_s1(md, jt, 1, 4);
        FAIL() << "assembly accepted a missing count";
    } catch (const AssemblyRefused& e) {
        EXPECT_NE(std::string(e.what()).find("c1_0 -> c0_0"), std::string::npos);
    }
}

TEST(Assembly, CircleWeightOneFromJumps) {
    const auto& a = cached("circle-w1");
    EXPECT_TRUE(a.e.d.is_zero());
    EXPECT_TRUE(a.e.jump_bit(1, "c1_0", "c0_0"));
    EXPECT_EQ(a.e.complex.entry(a.e.find("c0_0"), a.e.find("c1_0")), z2t::Z2Poly::monomial(1));
}

TEST(Assembly, SphereRotationHasZeroDifferential) {
    const auto& a = cached("sphere-rot");
    EXPECT_TRUE(a.e.complex.entries.empty());
    EXPECT_TRUE(a.inputs.jumps.pairs.empty());
}

TEST(Assembly, TrivialTorusHasZeroDifferential) {
    const auto& a = cached("torus-trivial");
    EXPECT_TRUE(a.e.complex.entries.empty());
    for (const auto& p : a.inputs.jumps.pairs) EXPECT_EQ(p.count->method, "s-invariant");
}

TEST(Assembly, HomogeneousOnBuiltins) {
    for (const char* id : {"circle-w1", "circle-w2", "circle-w3", "sphere-rot", "torus-rot", "s3-hopf"}) {
        const auto& a = cached(id);
        EXPECT_NO_THROW(a.e.complex.check_homogeneous()) << id;
        for (const auto& [key, poly] : a.e.complex.entries) {
            const auto& y = a.e.generators[key.first];
            const auto& x = a.e.generators[key.second];
            EXPECT_EQ(total_degree(y.index, poly.degree()), total_degree(x.index, 0) + 1) << id;
        }
    }
}

TEST(Verification, BuiltinsSquareToZeroAndIdentitiesAgree) {
    for (const char* id : {"circle-w1", "circle-w2", "circle-w3", "sphere-rot", "torus-rot", "s3-hopf", "circle-trivial",
                           "sphere-trivial", "torus-trivial", "s3-trivial"}) {
        const auto& a = cached(id);
        bool zero = verify_d_squared(a.e).zero();
        EXPECT_TRUE(zero) << id;
        bool all = true;
        for (bool b : per_k_identities(a.e)) all = all && b;
        EXPECT_EQ(all, zero) << id;
    }
}

TEST(Verification, PerKEquivalenceOnFlippedBuiltins) {
    for (const char* id : {"circle-w1", "torus-rot"}) {
        auto e = cached(id).e;
        for (const auto& [k, unused] : cached(id).e.jumps)
            for (std::size_t r = 0; r < e.generators.size(); ++r)
                for (std::size_t c = 0; c < e.generators.size(); ++c) {
                    if (e.generators[r].index != e.generators[c].index + 1 - 2 * k) continue;
                    auto f = e;
                    f.jumps.at(k).set(r, c, !f.jumps.at(k).get(r, c));
                    rebuild_complex(f, f.complex.m_max);
                    bool zero = verify_d_squared(f).zero();
                    bool all = true;
                    for (bool b : per_k_identities(f)) all = all && b;
                    EXPECT_EQ(all, zero) << id;
                }
    }
}

TEST(Homology, CircleWeights) {
    EXPECT_EQ(equivariant_homology(cached("circle-w1").e, 8).table.dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
    EXPECT_EQ(equivariant_homology(cached("circle-w2").e, 8).table.dims, std::vector<int>(9, 1));
    EXPECT_EQ(equivariant_homology(cached("circle-w3").e, 8).table.dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(Homology, TrivialActionsExpandMorseHomology) {
    for (const char* id : {"circle-trivial", "sphere-trivial", "torus-trivial", "s3-trivial"}) {
        const auto& a = cached(id);
        const int n = builtin(id).scenario.dim();
        const int m_max = builtin(id).m_max;
        auto betti = a.inputs.morse.homology(n);
        auto h = equivariant_homology(a.e, m_max);
        EXPECT_TRUE(h.truncation_stable) << id;
        for (int m = 0; m < m_max; ++m) {
            int expect = 0;
            for (int l = m; l >= 0; l -= 2)
                if (l <= n) expect += betti[static_cast<std::size_t>(l)];
            EXPECT_EQ(h.table.dims[m], expect) << id << " degree " << m;
        }
    }
}

TEST(Homology, TorusTrivialDims) {
    auto h = equivariant_homology(cached("torus-trivial").e, 5);
    EXPECT_EQ(h.table.dims, (std::vector<int>{1, 2, 2, 2, 2, 2}));
}

TEST(Homology, FreeActionsVanishAboveQuotientDimension) {
    for (auto [id, q] : {std::pair{"circle-w1", 0}, std::pair{"torus-rot", 1}, std::pair{"s3-hopf", 2}}) {
        const int m_max = builtin(id).m_max;
        auto h = equivariant_homology(cached(id).e, m_max);
        for (int m = q + 1; m < m_max; ++m) EXPECT_EQ(h.table.dims[m], 0) << id << " degree " << m;
    }
}

TEST(Homology, ModuleMatchesTruncatedDims) {
    for (const char* id : {"circle-w1", "circle-w2", "sphere-rot", "torus-rot", "torus-trivial", "s3-hopf"}) {
        const int m_max = builtin(id).m_max;
        auto h = equivariant_homology(cached(id).e, m_max);
        EXPECT_EQ(head(h.table.module.expand(m_max), m_max), head(h.table.dims, m_max)) << id;
    }
}

TEST(Homology, SphereRotationIsFree) {
    auto h = equivariant_homology(cached("sphere-rot").e, 8);
    EXPECT_EQ(h.table.dims, (std::vector<int>{1, 0, 2, 0, 2, 0, 2, 0, 2}));
    EXPECT_EQ(h.table.module.free_rank, 2);
    EXPECT_TRUE(h.table.module.torsion.empty());
}

TEST(TorusRotation, R1Pattern) {
    auto p = r1_pattern(cached("torus-rot").e);
    EXPECT_EQ(p.a, 0);
    EXPECT_EQ(p.b, 1);
    EXPECT_EQ(p.c, 1);
    EXPECT_EQ(p.d, 0);
    EXPECT_TRUE(p.holds());
    EXPECT_EQ(head(equivariant_homology(cached("torus-rot").e, 5).table.dims, 6), (std::vector<int>{1, 1, 0, 0, 0, 0}));
}

TEST(TorusRotation, PatternRejectsBadParities) {
    EXPECT_FALSE((R1Pattern{0, 0, 1, 0}.holds()));
    EXPECT_FALSE((R1Pattern{1, 0, 0, 0}.holds()));
    EXPECT_FALSE((R1Pattern{1, 1, 1, 0}.holds()));
    EXPECT_TRUE((R1Pattern{1, 1, 1, 1}.holds()));
}

TEST(Hopf, MaxToMinDoubleJump) {
    const auto& a = cached("s3-hopf");
    const auto& crits = a.inputs.crits;
    ASSERT_EQ(crits.size(), 2u);
    EXPECT_TRUE(a.e.jump_bit(2, "c3_0", "c0_0"));
    EXPECT_EQ(equivariant_homology(a.e, 5).table.dims, (std::vector<int>{1, 0, 1, 0, 0, 0}));
}

TEST(Hopf, SymmetricFamilyBlocksAssembly) {
    auto b = builtin("s3-hopf-symmetric");
    auto in = compute_assembly_inputs(b.scenario, 2, MorseOptions{}, JumpOptions::from(b.scenario.tol));
    const auto* miss = in.jumps.first_missing();
    ASSERT_NE(miss, nullptr);
    EXPECT_EQ(miss->failure_kind, "non-transversal");
    EXPECT_EQ(miss->k, 2);
    EXPECT_THROW(assemble_d_s1(in.morse, in.jumps, 3, 5), AssemblyRefused);
}

TEST(Perturbation, DeterministicPerSeed) {
    auto sc = builtin("circle-w1").scenario;
    std::mt19937_64 r1(7), r2(7), r3(8);
    auto a = perturbed(sc, 1e-3, r1), b = perturbed(sc, 1e-3, r2), c = perturbed(sc, 1e-3, r3);
    Vec p(2);
    p << 0.6, 0.8;
    EXPECT_EQ(a.f.value(p), b.f.value(p));
    EXPECT_NE(a.f.value(p), c.f.value(p));
    EXPECT_LT(std::fabs(a.f.value(p) - sc.f.value(p)), 1e-2);
}

TEST(Perturbation, CircleSweepSquaresToZero) {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 5; ++i) {
        auto sc = perturbed(builtin("circle-w1").scenario, 1e-3, rng);
        auto in = compute_assembly_inputs(sc, 1, MorseOptions{}, JumpOptions::from(sc.tol));
        auto e = assemble_d_s1(in.morse, in.jumps, 1, 8);
        EXPECT_TRUE(verify_d_squared(e).zero());
        EXPECT_EQ(equivariant_homology(e, 8).table.dims, (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
    }
}
