// Unit and property tests for the Z2[T] algebra layer.

#include <gtest/gtest.h>

#include <random>

#include "eqmorse/z2t.hpp"

using namespace eqmorse;
using namespace eqmorse::z2t;

namespace {

Z2Poly P(std::string_view bits) { return Z2Poly::from_bits(bits); }

// Schoolbook convolution of coefficient vectors mod 2, written independently
// of the word-packed implementation.
std::vector<int> convolve_mod2(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> c(a.size() + b.size() - 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] = (c[i + j] + a[i] * b[j]) % 2;
    return c;
}

Z2Poly random_poly(std::mt19937_64& rng, int max_degree) {
    Z2Poly p;
    for (int j = 0; j <= max_degree; ++j)
        if (rng() & 1u) p.set(j, true);
    return p;
}

GradedComplex circle_complex(bool jump) {
    GradedComplex c;
    c.dimension = 1;
    c.m_max = 8;
    c.generators = {{"min", 0}, {"max", 1}};
    if (jump) c.set_entry(0, 1, Z2Poly::monomial(1));
    return c;
}

// Rank over Z2 of a dense 0/1 matrix by plain elimination on ints.
int naive_rank(std::vector<std::vector<int>> m) {
    int rank = 0;
    int rows = static_cast<int>(m.size());
    int cols = rows ? static_cast<int>(m[0].size()) : 0;
    for (int c = 0; c < cols && rank < rows; ++c) {
        int p = rank;
        while (p < rows && !m[p][c]) ++p;
        if (p == rows) continue;
        std::swap(m[p], m[rank]);
        for (int r = 0; r < rows; ++r)
            if (r != rank && m[r][c])
                for (int k = 0; k < cols; ++k) m[r][k] ^= m[rank][k];
        ++rank;
    }
    return rank;
}

}  // namespace

TEST(Z2Poly, AdditionIsCharacteristicTwo) {
    EXPECT_TRUE((P("11") + P("11")).is_zero());
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        Z2Poly p = random_poly(rng, 150);
        EXPECT_TRUE((p + p).is_zero());
    }
}

TEST(Z2Poly, FreshmansDream) { EXPECT_EQ(P("11") * P("11"), P("101")); }

TEST(Z2Poly, ProductMatchesConvolution) {
    EXPECT_EQ(P("01") * P("011"), P("0011"));
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        int da = static_cast<int>(rng() % 90), db = static_cast<int>(rng() % 90);
        std::vector<int> a(da + 1), b(db + 1);
        for (auto& v : a) v = static_cast<int>(rng() & 1u);
        for (auto& v : b) v = static_cast<int>(rng() & 1u);
        a.back() = b.back() = 1;
        std::string sa, sb;
        for (int v : a) sa.push_back(v ? '1' : '0');
        for (int v : b) sb.push_back(v ? '1' : '0');
        Z2Poly prod = P(sa) * P(sb);
        auto ref = convolve_mod2(a, b);
        ASSERT_EQ(prod.degree(), da + db);
        for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_EQ(prod.coeff(static_cast<int>(j)), ref[j] == 1);
    }
}

TEST(Z2Poly, DivisionIdentity) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Z2Poly a = random_poly(rng, 80), b = random_poly(rng, 20);
        if (b.is_zero()) continue;
        auto [q, r] = divmod(a, b);
        EXPECT_EQ(q * b + r, a);
        EXPECT_LT(r.degree(), b.degree());
    }
}

TEST(Z2Poly, BitStringRoundTrip) {
    EXPECT_EQ(P("0110").to_bits(), "011");
    EXPECT_EQ(Z2Poly{}.degree(), -1);
    EXPECT_EQ(P("0001").degree(), 3);
    EXPECT_THROW(P("012"), StructuralError);
}

TEST(BitMatrix, RankMatchesNaiveElimination) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t rows = 1 + rng() % 70, cols = 1 + rng() % 140;
        BitMatrix m(rows, cols);
        std::vector<std::vector<int>> ref(rows, std::vector<int>(cols));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                if (rng() % 3 == 0) {
                    m.set(i, j, true);
                    ref[i][j] = 1;
                }
        EXPECT_EQ(static_cast<int>(m.rank()), naive_rank(ref));
    }
}

TEST(Truncate, ZeroDifferentialSphereSizes) {
    GradedComplex c;
    c.dimension = 2;
    c.generators = {{"s", 0}, {"n", 2}};
    auto t = truncate_at(c, 4);
    EXPECT_EQ(t.basis_sizes(), (std::vector<std::size_t>{1, 0, 2, 0, 2}));
    for (const auto& m : t.maps) EXPECT_TRUE(m.is_zero());
}

TEST(Truncate, CircleJumpEntry) {
    auto t = truncate_at(circle_complex(true), 4);
    // degree 1 holds {max}, degree 2 holds {min*T}
    ASSERT_EQ(t.bases[1].size(), 1u);
    ASSERT_EQ(t.bases[2].size(), 1u);
    EXPECT_EQ(t.bases[2][0], (BasisElement{0, 1}));
    EXPECT_TRUE(t.maps[1].get(0, 0));
    EXPECT_TRUE(t.maps[0].is_zero());
}

TEST(Truncate, TorusTrivialSizes) {
    GradedComplex c;
    c.dimension = 2;
    c.generators = {{"a", 0}, {"b", 1}, {"c", 1}, {"d", 2}};
    EXPECT_EQ(truncate_at(c, 3).basis_sizes(), (std::vector<std::size_t>{1, 2, 2, 2}));
}

TEST(Truncate, InhomogeneousEntryIsNamed) {
    GradedComplex c = circle_complex(false);
    c.set_entry(0, 1, P("11"));
    try {
        truncate_at(c, 4);
        FAIL();
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find("max -> min"), std::string::npos);
    }
    c.set_entry(0, 1, Z2Poly::monomial(2));
    EXPECT_THROW(truncate_at(c, 4), StructuralError);
}

TEST(Truncate, JumpBeyondDimensionRejected) {
    GradedComplex c;
    c.dimension = 2;
    c.generators = {{"a", 0}, {"b", 3}};
    c.set_entry(0, 1, Z2Poly::monomial(2));
    EXPECT_THROW(c.check_homogeneous(), StructuralError);
}

TEST(Homology, ZeroMatrices) {
    GradedComplex c;
    c.dimension = 2;
    c.generators = {{"s", 0}, {"n", 2}};
    EXPECT_EQ(homology_dimensions(truncate_at(c, 2)), (std::vector<int>{1, 0, 2}));
}

TEST(Homology, CircleWeights) {
    EXPECT_EQ(homology_dimensions(truncate_at(circle_complex(true), 8)), (std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0}));
    EXPECT_EQ(homology_dimensions(truncate_at(circle_complex(false), 8)), (std::vector<int>(9, 1)));
}

TEST(Homology, NotAComplexNamesDegree) {
    GradedComplex c;
    c.dimension = 2;
    c.generators = {{"a", 0}, {"b", 1}, {"c", 2}};
    c.set_entry(1, 0, Z2Poly::one());
    c.set_entry(2, 1, Z2Poly::one());
    try {
        homology_dimensions(truncate_at(c, 3));
        FAIL();
    } catch (const NotAComplex& e) {
        EXPECT_NE(std::string(e.what()).find("degree 0"), std::string::npos);
    }
}

TEST(Smith, Examples) {
    PolyMatrix a(1, 1);
    a(0, 0) = Z2Poly::monomial(1);
    auto s = snf_over_z2t(a);
    EXPECT_EQ(s.diagonal, (std::vector<Z2Poly>{Z2Poly::monomial(1)}));

    PolyMatrix b(2, 2);
    b(0, 0) = Z2Poly::one();
    b(0, 1) = Z2Poly::monomial(1);
    b(1, 0) = Z2Poly::monomial(1);
    b(1, 1) = Z2Poly::monomial(2);
    s = snf_over_z2t(b);
    EXPECT_EQ(s.diagonal, (std::vector<Z2Poly>{Z2Poly::one()}));
    EXPECT_TRUE(s.D(1, 1).is_zero());
    EXPECT_EQ(s.U * s.D * s.V, b);

    s = snf_over_z2t(PolyMatrix::identity(3));
    EXPECT_EQ(s.D, PolyMatrix::identity(3));
}

// Over a field-valued determinant: det of a Z2[T] matrix computed by
// cofactor expansion, used to confirm U and V are unimodular.
Z2Poly det(const PolyMatrix& m) {
    std::size_t n = m.rows();
    if (n == 0) return Z2Poly::one();
    if (n == 1) return m(0, 0);
    Z2Poly out;
    for (std::size_t c = 0; c < n; ++c) {
        if (m(0, c).is_zero()) continue;
        PolyMatrix minor(n - 1, n - 1);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t j = 0, jj = 0; j < n; ++j)
                if (j != c) minor(i - 1, jj++) = m(i, j);
        out += m(0, c) * det(minor);
    }
    return out;
}

TEST(SmithProperty, FiftyRandomMatrices) {
    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t rows = 1 + rng() % 8, cols = 1 + rng() % 8;
        PolyMatrix a(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                if (rng() % 4 != 0) a(i, j) = random_poly(rng, 5);
        auto s = snf_over_z2t(a);
        ASSERT_EQ(s.U * s.D * s.V, a) << "trial " << trial;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                if (i != j) EXPECT_TRUE(s.D(i, j).is_zero());
        for (std::size_t t = 0; t + 1 < s.diagonal.size(); ++t) EXPECT_TRUE(divides(s.diagonal[t], s.diagonal[t + 1]));
        for (std::size_t t = s.diagonal.size(); t < std::min(rows, cols); ++t) EXPECT_TRUE(s.D(t, t).is_zero());
        if (rows <= 6) EXPECT_TRUE(det(s.U).is_one());
        if (cols <= 6) EXPECT_TRUE(det(s.V).is_one());
    }
}

TEST(Module, Examples) {
    GradedComplex sphere;
    sphere.dimension = 2;
    sphere.generators = {{"s", 0}, {"n", 2}};
    auto m = module_decomposition(sphere);
    EXPECT_EQ(m.free_rank, 2);
    EXPECT_TRUE(m.torsion.empty());

    m = module_decomposition(circle_complex(true));
    EXPECT_EQ(m.free_rank, 0);
    ASSERT_EQ(m.torsion.size(), 1u);
    EXPECT_EQ(m.torsion[0], (TorsionSummand{0, 1}));

    m = module_decomposition(circle_complex(false));
    EXPECT_EQ(m.free_rank, 2);
    EXPECT_EQ(m.free_degrees, (std::vector<int>{0, 1}));
}

namespace {

// Random homogeneous complex with d^2 = 0 built as a direct sum of
// elementary pieces (free generators and pairs x -> T^a y) conjugated by
// random homogeneous change of basis g: d' = g d g^{-1}.
GradedComplex random_complex(std::mt19937_64& rng, int n) {
    GradedComplex c;
    c.dimension = n;
    int pieces = 2 + static_cast<int>(rng() % 5);
    for (int p = 0; p < pieces; ++p) {
        int id = static_cast<int>(c.generators.size());
        if (rng() % 3 == 0) {
            c.generators.push_back({"g" + std::to_string(id), static_cast<int>(rng() % (n + 1))});
        } else {
            int a = static_cast<int>(rng() % ((n + 1) / 2 + 1));
            // x of index l_x, y of index l_y = l_x + 1 - 2a, both in [0, n]
            int lo = std::max(0, 2 * a - 1), hi = n;
            if (lo > hi) a = 0, lo = 0;
            int lx = lo + static_cast<int>(rng() % (hi - lo + 1));
            int ly = lx + 1 - 2 * a;
            if (ly < 0 || ly > n) {
                c.generators.push_back({"g" + std::to_string(id), lx});
                continue;
            }
            c.generators.push_back({"g" + std::to_string(id), lx});
            c.generators.push_back({"g" + std::to_string(id + 1), ly});
            c.set_entry(id + 1, id, Z2Poly::monomial(a));
        }
    }
    PolyMatrix d = c.matrix();
    std::size_t sz = c.size();
    // Homogeneous elementary ops: e_i <- e_i + T^k e_j with l_i = l_j + 2k.
    PolyMatrix g = PolyMatrix::identity(sz), ginv = PolyMatrix::identity(sz);
    for (int op = 0; op < 12; ++op) {
        std::size_t i = rng() % sz, j = rng() % sz;
        if (i == j) continue;
        int diff = c.generators[i].index - c.generators[j].index;
        if (diff < 0 || diff % 2 != 0) continue;
        Z2Poly q = Z2Poly::monomial(diff / 2);
        if (diff / 2 >= 1 && 2 * (diff / 2) - 1 > n) continue;
        PolyMatrix e = PolyMatrix::identity(sz);
        e(j, i) = q;  // column i gains q * column j
        g = g * e;
        ginv = e * ginv;
    }
    PolyMatrix dp = ginv * d * g;
    GradedComplex out = c;
    out.entries.clear();
    for (std::size_t r = 0; r < sz; ++r)
        for (std::size_t col = 0; col < sz; ++col)
            if (!dp(r, col).is_zero()) out.set_entry(static_cast<int>(r), static_cast<int>(col), dp(r, col));
    return out;
}

}  // namespace

TEST(ModuleProperty, TruncationAgreesWithDecomposition) {
    std::mt19937_64 rng(99);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng() % 4);
        GradedComplex c = random_complex(rng, n);
        ASSERT_NO_THROW(c.check_homogeneous()) << trial;
        ASSERT_TRUE((c.matrix() * c.matrix()).is_zero());
        int m_max = 10;
        auto dims = homology_dimensions(truncate_at(c, m_max));
        auto expanded = module_decomposition(c).expand(m_max);
        for (int m = 0; m <= m_max - 1; ++m) EXPECT_EQ(dims[m], expanded[m]) << "trial " << trial << " degree " << m;
        ++checked;
    }
    EXPECT_EQ(checked, 200);
}

TEST(ModuleProperty, TruncationStability) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        GradedComplex c = random_complex(rng, 3);
        auto a = homology_dimensions(truncate_at(c, 6));
        auto b = homology_dimensions(truncate_at(c, 8));
        for (int m = 0; m <= 5; ++m) EXPECT_EQ(a[m], b[m]);
    }
}

TEST(Serialization, BitExactRoundTrip) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        GradedComplex c = random_complex(rng, 3);
        c.m_max = 7;
        std::string text = to_json(c).dump();
        GradedComplex back = complex_from_json(nlohmann::json::parse(text));
        EXPECT_EQ(back, c);
        EXPECT_EQ(to_json(back).dump(), text);
    }
}
