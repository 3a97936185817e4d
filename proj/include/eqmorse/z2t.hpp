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
 * @file z2t.hpp
 * @brief Exact algebra over Z2 and Z2[T] (deg T = 2).
 *
 * Polynomials are dense bit sequences, matrices over Z2 are packed into
 * 64-bit words. Graded complexes carry the cochain generators together with
 * the differential as a matrix of polynomials; truncation expands them into
 * one Z2 matrix per total degree, and the Smith normal form presents the
 * cohomology as a Z2[T]-module.
 */

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace eqmorse::z2t {

// ---------------------------------------------------------------------------
// Z2Poly
// ---------------------------------------------------------------------------

class Z2Poly {
   public:
    Z2Poly() = default;

    static Z2Poly one() { return monomial(0); }
    static Z2Poly monomial(int power) {
        Z2Poly p;
        p.set(power, true);
        return p;
    }
    /// Parses a little-endian bit string: "011" is T + T^2.
    static Z2Poly from_bits(std::string_view bits) {
        Z2Poly p;
        for (std::size_t j = 0; j < bits.size(); ++j) {
            if (bits[j] == '1')
                p.set(static_cast<int>(j), true);
            else if (bits[j] != '0')
                throw StructuralError("invalid coefficient bit string '" + std::string(bits) + "'");
        }
        return p;
    }

    bool is_zero() const noexcept { return words_.empty(); }
    bool is_one() const noexcept { return words_.size() == 1 && words_[0] == 1u; }

    /// Degree in T; -1 for the zero polynomial.
    int degree() const noexcept {
        if (words_.empty()) return -1;
        return static_cast<int>(64 * (words_.size() - 1)) + 63 - std::countl_zero(words_.back());
    }

    bool coeff(int j) const noexcept {
        if (j < 0) return false;
        std::size_t w = static_cast<std::size_t>(j) / 64;
        if (w >= words_.size()) return false;
        return (words_[w] >> (j % 64)) & 1u;
    }

    void set(int j, bool value) {
        std::size_t w = static_cast<std::size_t>(j) / 64;
        if (w >= words_.size()) {
            if (!value) return;
            words_.resize(w + 1, 0);
        }
        std::uint64_t mask = std::uint64_t{1} << (j % 64);
        if (value)
            words_[w] |= mask;
        else
            words_[w] &= ~mask;
        normalize();
    }

    /// True iff the polynomial is c * T^j for a single j (homogeneous, deg T = 2).
    bool is_monomial() const noexcept {
        int ones = 0;
        for (auto w : words_) ones += std::popcount(w);
        return ones == 1;
    }

    std::string to_bits() const {
        std::string s;
        for (int j = 0; j <= degree(); ++j) s.push_back(coeff(j) ? '1' : '0');
        return s;
    }

    Z2Poly& operator+=(const Z2Poly& o) {
        if (o.words_.size() > words_.size()) words_.resize(o.words_.size(), 0);
        for (std::size_t i = 0; i < o.words_.size(); ++i) words_[i] ^= o.words_[i];
        normalize();
        return *this;
    }
    friend Z2Poly operator+(Z2Poly a, const Z2Poly& b) { return a += b; }

    friend Z2Poly operator*(const Z2Poly& a, const Z2Poly& b) {
        Z2Poly r;
        if (a.is_zero() || b.is_zero()) return r;
        int db = b.degree();
        for (int j = 0; j <= db; ++j)
            if (b.coeff(j)) r += a.shifted(j);
        return r;
    }

    /// Multiplication by T^k.
    Z2Poly shifted(int k) const {
        if (is_zero() || k == 0) return *this;
        Z2Poly r;
        std::size_t ws = static_cast<std::size_t>(k) / 64;
        int bs = k % 64;
        r.words_.assign(words_.size() + ws + 1, 0);
        for (std::size_t i = 0; i < words_.size(); ++i) {
            r.words_[i + ws] ^= words_[i] << bs;
            if (bs != 0) r.words_[i + ws + 1] ^= words_[i] >> (64 - bs);
        }
        r.normalize();
        return r;
    }

    /// Euclidean division a = q*b + r with deg r < deg b.
    friend std::pair<Z2Poly, Z2Poly> divmod(const Z2Poly& a, const Z2Poly& b) {
        if (b.is_zero()) throw std::domain_error("Z2Poly division by zero");
        Z2Poly q, r = a;
        int db = b.degree();
        while (!r.is_zero() && r.degree() >= db) {
            int shift = r.degree() - db;
            q.set(shift, true);
            r += b.shifted(shift);
        }
        return {q, r};
    }

    friend bool divides(const Z2Poly& b, const Z2Poly& a) {
        if (b.is_zero()) return a.is_zero();
        return divmod(a, b).second.is_zero();
    }

    friend bool operator==(const Z2Poly& a, const Z2Poly& b) = default;

    friend std::ostream& operator<<(std::ostream& os, const Z2Poly& p) {
        if (p.is_zero()) return os << "0";
        bool first = true;
        for (int j = p.degree(); j >= 0; --j) {
            if (!p.coeff(j)) continue;
            if (!first) os << " + ";
            first = false;
            if (j == 0)
                os << "1";
            else if (j == 1)
                os << "T";
            else
                os << "T^" << j;
        }
        return os;
    }

   private:
    void normalize() {
        while (!words_.empty() && words_.back() == 0) words_.pop_back();
    }

    std::vector<std::uint64_t> words_;
};

// ---------------------------------------------------------------------------
// BitMatrix: dense matrices over Z2
// ---------------------------------------------------------------------------

class BitMatrix {
   public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), stride_((cols + 63) / 64), data_(rows * stride_, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    bool get(std::size_t r, std::size_t c) const noexcept {
        return (data_[r * stride_ + c / 64] >> (c % 64)) & 1u;
    }
    void set(std::size_t r, std::size_t c, bool v) noexcept {
        std::uint64_t mask = std::uint64_t{1} << (c % 64);
        auto& w = data_[r * stride_ + c / 64];
        w = v ? (w | mask) : (w & ~mask);
    }
    void flip(std::size_t r, std::size_t c) noexcept { data_[r * stride_ + c / 64] ^= std::uint64_t{1} << (c % 64); }

    bool is_zero() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](std::uint64_t w) { return w == 0; });
    }

    /// Rank by bit-parallel Gaussian elimination on a copy.
    std::size_t rank() const {
        std::vector<std::uint64_t> m = data_;
        std::size_t rank = 0;
        for (std::size_t c = 0; c < cols_ && rank < rows_; ++c) {
            std::size_t w = c / 64;
            std::uint64_t mask = std::uint64_t{1} << (c % 64);
            std::size_t pivot = rank;
            while (pivot < rows_ && !(m[pivot * stride_ + w] & mask)) ++pivot;
            if (pivot == rows_) continue;
            if (pivot != rank)
                for (std::size_t k = 0; k < stride_; ++k) std::swap(m[pivot * stride_ + k], m[rank * stride_ + k]);
            for (std::size_t r = 0; r < rows_; ++r) {
                if (r != rank && (m[r * stride_ + w] & mask))
                    for (std::size_t k = 0; k < stride_; ++k) m[r * stride_ + k] ^= m[rank * stride_ + k];
            }
            ++rank;
        }
        return rank;
    }

    friend BitMatrix operator*(const BitMatrix& a, const BitMatrix& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("BitMatrix product: shape mismatch");
        BitMatrix r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k)
                if (a.get(i, k))
                    for (std::size_t w = 0; w < b.stride_; ++w) r.data_[i * r.stride_ + w] ^= b.data_[k * b.stride_ + w];
        return r;
    }

    friend bool operator==(const BitMatrix& a, const BitMatrix& b) = default;

   private:
    std::size_t rows_ = 0, cols_ = 0, stride_ = 0;
    std::vector<std::uint64_t> data_;
};

// ---------------------------------------------------------------------------
// PolyMatrix: dense matrices over Z2[T]
// ---------------------------------------------------------------------------

class PolyMatrix {
   public:
    PolyMatrix() = default;
    PolyMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static PolyMatrix identity(std::size_t n) {
        PolyMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = Z2Poly::one();
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Z2Poly& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Z2Poly& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool is_zero() const {
        return std::all_of(data_.begin(), data_.end(), [](const Z2Poly& p) { return p.is_zero(); });
    }

    friend PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("PolyMatrix product: shape mismatch");
        PolyMatrix r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Z2Poly& aik = a(i, k);
                if (aik.is_zero()) continue;
                for (std::size_t j = 0; j < b.cols_; ++j)
                    if (!b(k, j).is_zero()) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend PolyMatrix operator+(PolyMatrix a, const PolyMatrix& b) {
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] += b.data_[i];
        return a;
    }

    friend bool operator==(const PolyMatrix& a, const PolyMatrix& b) = default;

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
    }
    void swap_cols(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t r = 0; r < rows_; ++r) std::swap((*this)(r, a), (*this)(r, b));
    }
    /// row[dst] += q * row[src]
    void add_row_multiple(std::size_t dst, std::size_t src, const Z2Poly& q) {
        for (std::size_t c = 0; c < cols_; ++c)
            if (!(*this)(src, c).is_zero()) (*this)(dst, c) += q * (*this)(src, c);
    }
    /// col[dst] += q * col[src]
    void add_col_multiple(std::size_t dst, std::size_t src, const Z2Poly& q) {
        for (std::size_t r = 0; r < rows_; ++r)
            if (!(*this)(r, src).is_zero()) (*this)(r, dst) += q * (*this)(r, src);
    }

   private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<Z2Poly> data_;
};

// ---------------------------------------------------------------------------
// Smith normal form over the Euclidean domain Z2[T]
// ---------------------------------------------------------------------------

struct SmithForm {
    PolyMatrix U;  ///< rows x rows, invertible
    PolyMatrix D;  ///< rows x cols, diagonal
    PolyMatrix V;  ///< cols x cols, invertible
    std::vector<Z2Poly> diagonal;  ///< nonzero diagonal entries, divisibility chain
    /// Degree labels of the reordered row/column bases (graded inputs only).
    std::vector<int> row_labels, col_labels;
};

/**
 * Smith normal form with U * D * V = A. Pivot is the nonzero entry of minimal
 * degree in the active submatrix, ties broken by lowest (row, col). Row
 * operations on D are mirrored as inverse column operations on U, column
 * operations as inverse row operations on V; over characteristic 2 every
 * elementary transvection is its own inverse.
 *
 * Optional labels are permuted alongside rows/columns; for homogeneous input
 * every transvection stays homogeneous so the labels remain the degrees of
 * the new basis vectors.
 */
inline SmithForm snf_over_z2t(const PolyMatrix& A, std::vector<int> row_labels = {}, std::vector<int> col_labels = {}) {
    const std::size_t rows = A.rows(), cols = A.cols();
    SmithForm out{PolyMatrix::identity(rows), A, PolyMatrix::identity(cols), {}, std::move(row_labels), std::move(col_labels)};
    PolyMatrix& D = out.D;
    PolyMatrix& U = out.U;
    PolyMatrix& V = out.V;
    const bool track_rows = out.row_labels.size() == rows;
    const bool track_cols = out.col_labels.size() == cols;

    auto row_swap = [&](std::size_t a, std::size_t b) {
        D.swap_rows(a, b);
        U.swap_cols(a, b);
        if (track_rows) std::swap(out.row_labels[a], out.row_labels[b]);
    };
    auto col_swap = [&](std::size_t a, std::size_t b) {
        D.swap_cols(a, b);
        V.swap_rows(a, b);
        if (track_cols) std::swap(out.col_labels[a], out.col_labels[b]);
    };
    // D <- E D with E = I + q e_{dst,src}; U <- U E.
    auto row_add = [&](std::size_t dst, std::size_t src, const Z2Poly& q) {
        D.add_row_multiple(dst, src, q);
        U.add_col_multiple(src, dst, q);
    };
    // D <- D F with F = I + q e_{src,dst}; V <- F V.
    auto col_add = [&](std::size_t dst, std::size_t src, const Z2Poly& q) {
        D.add_col_multiple(dst, src, q);
        V.add_row_multiple(src, dst, q);
    };

    const std::size_t steps = std::min(rows, cols);
    for (std::size_t t = 0; t < steps; ++t) {
        bool done = false;
        while (true) {
            // minimal-degree pivot in the active block
            int best = -1;
            std::size_t pr = 0, pc = 0;
            for (std::size_t i = t; i < rows; ++i)
                for (std::size_t j = t; j < cols; ++j) {
                    int d = D(i, j).degree();
                    if (d >= 0 && (best < 0 || d < best)) {
                        best = d;
                        pr = i;
                        pc = j;
                    }
                }
            if (best < 0) {
                done = true;
                break;
            }
            row_swap(t, pr);
            col_swap(t, pc);
            const Z2Poly pivot = D(t, t);

            bool residue = false;
            for (std::size_t i = t + 1; i < rows; ++i) {
                if (D(i, t).is_zero()) continue;
                auto [q, r] = divmod(D(i, t), pivot);
                row_add(i, t, q);
                residue |= !r.is_zero();
            }
            for (std::size_t j = t + 1; j < cols; ++j) {
                if (D(t, j).is_zero()) continue;
                auto [q, r] = divmod(D(t, j), pivot);
                col_add(j, t, q);
                residue |= !r.is_zero();
            }
            if (residue) continue;

            // divisibility of the remaining block by the pivot
            std::optional<std::size_t> offender;
            for (std::size_t i = t + 1; i < rows && !offender; ++i)
                for (std::size_t j = t + 1; j < cols; ++j)
                    if (!divides(pivot, D(i, j))) {
                        offender = i;
                        break;
                    }
            if (offender) {
                row_add(t, *offender, Z2Poly::one());
                continue;
            }
            break;
        }
        if (done) break;
        out.diagonal.push_back(D(t, t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Graded complexes over Z2[T]
// ---------------------------------------------------------------------------

struct Generator {
    std::string id;
    int index = 0;  ///< base degree l (Morse index)
    friend bool operator==(const Generator&, const Generator&) = default;
};

/**
 * Free Z2[T]-module on critical-point generators with differential
 * entries(row = target y, col = source x): d(x) = sum_y entry(y, x) * y.
 * A nonzero entry is a single monomial T^j with l_y + 2j = l_x + 1.
 */
struct GradedComplex {
    int dimension = 0;  ///< manifold dimension n, bounds the jump orders
    int m_max = 0;
    std::vector<Generator> generators;
    std::map<std::pair<int, int>, Z2Poly> entries;

    std::size_t size() const noexcept { return generators.size(); }

    void set_entry(int row, int col, Z2Poly value) {
        if (value.is_zero())
            entries.erase({row, col});
        else
            entries[{row, col}] = std::move(value);
    }

    Z2Poly entry(int row, int col) const {
        auto it = entries.find({row, col});
        return it == entries.end() ? Z2Poly{} : it->second;
    }

    /// Throws StructuralError naming the first entry that breaks degree +1
    /// homogeneity or carries a jump order beyond the manifold dimension.
    void check_homogeneous() const {
        for (const auto& [key, poly] : entries) {
            const auto [row, col] = key;
            if (row < 0 || col < 0 || static_cast<std::size_t>(row) >= size() || static_cast<std::size_t>(col) >= size())
                throw StructuralError("entry (" + std::to_string(row) + "," + std::to_string(col) + ") references a missing generator");
            const auto& y = generators[row];
            const auto& x = generators[col];
            std::ostringstream where;
            where << "entry " << x.id << " -> " << y.id << " = " << poly;
            if (!poly.is_monomial()) throw StructuralError("inhomogeneous " + where.str());
            int j = poly.degree();
            if (y.index + 2 * j != x.index + 1)
                throw StructuralError("degree mismatch in " + where.str() + " (index " + std::to_string(x.index) + " -> " +
                                      std::to_string(y.index) + " with T^" + std::to_string(j) + ")");
            if (j >= 1 && 2 * j - 1 > dimension)
                throw StructuralError("jump order beyond manifold dimension in " + where.str());
        }
    }

    PolyMatrix matrix() const {
        PolyMatrix m(size(), size());
        for (const auto& [key, poly] : entries) m(key.first, key.second) = poly;
        return m;
    }

    friend bool operator==(const GradedComplex&, const GradedComplex&) = default;
};

/// Basis element x * T^j of the truncated complex.
struct BasisElement {
    int generator = 0;
    int power = 0;
    friend bool operator==(const BasisElement&, const BasisElement&) = default;
};

/// Per-degree expansion of a graded complex: bases[m] for m = 0..m_max+1 and
/// maps[m] : degree m -> degree m+1 for m = 0..m_max.
struct TruncatedComplex {
    int m_max = 0;
    std::vector<std::vector<BasisElement>> bases;
    std::vector<BitMatrix> maps;

    std::vector<std::size_t> basis_sizes() const {
        std::vector<std::size_t> s;
        for (int m = 0; m <= m_max; ++m) s.push_back(bases[m].size());
        return s;
    }
};

inline TruncatedComplex truncate_at(const GradedComplex& c, int m_max) {
    c.check_homogeneous();
    if (m_max < 0) throw std::invalid_argument("truncate_at: negative m_max");
    TruncatedComplex t;
    t.m_max = m_max;
    t.bases.resize(m_max + 2);
    for (int m = 0; m <= m_max + 1; ++m)
        for (std::size_t g = 0; g < c.size(); ++g) {
            int l = c.generators[g].index;
            if (m >= l && (m - l) % 2 == 0) t.bases[m].push_back({static_cast<int>(g), (m - l) / 2});
        }
    for (int m = 0; m <= m_max; ++m) {
        const auto& src = t.bases[m];
        const auto& dst = t.bases[m + 1];
        BitMatrix d(dst.size(), src.size());
        for (std::size_t col = 0; col < src.size(); ++col) {
            for (std::size_t row = 0; row < dst.size(); ++row) {
                const Z2Poly e = c.entry(dst[row].generator, src[col].generator);
                int j = dst[row].power - src[col].power;
                if (j >= 0 && e.coeff(j)) d.set(row, col, true);
            }
        }
        t.maps.push_back(std::move(d));
    }
    return t;
}

/// dim H^m = |basis_m| - rank d_m - rank d_{m-1}, for m = 0..m_max.
inline std::vector<int> homology_dimensions(const TruncatedComplex& t) {
    for (int m = 1; m <= t.m_max; ++m)
        if (!(t.maps[m] * t.maps[m - 1]).is_zero())
            throw NotAComplex("not a complex: d o d != 0 starting at degree " + std::to_string(m - 1));
    std::vector<int> dims;
    std::size_t prev_rank = 0;
    for (int m = 0; m <= t.m_max; ++m) {
        std::size_t r = t.maps[m].rank();
        dims.push_back(static_cast<int>(t.bases[m].size() - r - prev_rank));
        prev_rank = r;
    }
    return dims;
}

struct TorsionSummand {
    int degree = 0;    ///< degree of the cyclic generator
    int exponent = 0;  ///< Z2[T]/(T^exponent)
    friend bool operator==(const TorsionSummand&, const TorsionSummand&) = default;
    friend auto operator<=>(const TorsionSummand&, const TorsionSummand&) = default;
};

struct ModuleSummands {
    int free_rank = 0;
    std::vector<int> free_degrees;
    std::vector<TorsionSummand> torsion;

    /// Degree-by-degree Z2 dimensions of the module, m = 0..m_max.
    std::vector<int> expand(int m_max) const {
        std::vector<int> dims(m_max + 1, 0);
        for (int m = 0; m <= m_max; ++m) {
            for (int d : free_degrees)
                if (m >= d && (m - d) % 2 == 0) ++dims[m];
            for (const auto& t : torsion)
                if (m >= t.degree && (m - t.degree) % 2 == 0 && (m - t.degree) / 2 < t.exponent) ++dims[m];
        }
        return dims;
    }
};

/**
 * Presents H = ker d / im d as a graded Z2[T]-module. With r the rank of d
 * and T^{a_i} its non-unit invariant factors,
 *   H = Z2[T]^{n - 2r} + sum_i Z2[T]/(T^{a_i}).
 * Free generator degrees are the generator degrees minus the degrees of the
 * r domain complements and the r saturated image generators.
 */
inline ModuleSummands module_decomposition(const GradedComplex& c) {
    c.check_homogeneous();
    const PolyMatrix d = c.matrix();
    if (!(d * d).is_zero()) throw NotAComplex("not a complex: d_S1^2 != 0");
    std::vector<int> row_deg, col_deg;
    for (const auto& g : c.generators) {
        row_deg.push_back(g.index);
        col_deg.push_back(g.index + 1);
    }
    SmithForm s = snf_over_z2t(d, row_deg, col_deg);
    ModuleSummands out;
    std::multiset<int> free(row_deg.begin(), row_deg.end());
    for (std::size_t t = 0; t < s.diagonal.size(); ++t) {
        const Z2Poly& sigma = s.diagonal[t];
        if (!sigma.is_monomial()) throw StructuralError("invariant factor is not a power of T");
        if (sigma.degree() > 0) out.torsion.push_back({s.row_labels[t], sigma.degree()});
        free.erase(free.find(s.row_labels[t]));
        free.erase(free.find(s.col_labels[t] - 1));
    }
    out.free_degrees.assign(free.begin(), free.end());
    out.free_rank = static_cast<int>(out.free_degrees.size());
    std::sort(out.torsion.begin(), out.torsion.end());
    return out;
}

struct HomologyTable {
    std::vector<int> dims;
    ModuleSummands module;
};

// ---------------------------------------------------------------------------
// Structured-text serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const GradedComplex& c) {
    nlohmann::json j;
    j["dimension"] = c.dimension;
    j["m_max"] = c.m_max;
    j["generators"] = nlohmann::json::array();
    for (const auto& g : c.generators) j["generators"].push_back({{"id", g.id}, {"index", g.index}});
    j["entries"] = nlohmann::json::array();
    for (const auto& [key, poly] : c.entries)
        j["entries"].push_back({{"row", key.first}, {"col", key.second}, {"coeff", poly.to_bits()}});
    return j;
}

inline GradedComplex complex_from_json(const nlohmann::json& j) {
    GradedComplex c;
    c.dimension = j.at("dimension").get<int>();
    c.m_max = j.at("m_max").get<int>();
    for (const auto& g : j.at("generators")) c.generators.push_back({g.at("id").get<std::string>(), g.at("index").get<int>()});
    for (const auto& e : j.at("entries"))
        c.set_entry(e.at("row").get<int>(), e.at("col").get<int>(), Z2Poly::from_bits(e.at("coeff").get<std::string>()));
    return c;
}

}  // namespace eqmorse::z2t
