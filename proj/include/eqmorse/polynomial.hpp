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

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace eqmorse {

struct Monomial {
    double coeff = 0.0;
    std::vector<int> powers;
    friend bool operator==(const Monomial&, const Monomial&) = default;
};

/// Real polynomial on R^N with analytic first and second derivatives.
class Polynomial {
   public:
    Polynomial() = default;
    explicit Polynomial(int dim) : dim_(dim) {}
    Polynomial(int dim, std::vector<Monomial> terms) : dim_(dim) {
        for (auto& t : terms) add_term(t.coeff, std::move(t.powers));
    }

    static Polynomial constant(int dim, double c) {
        Polynomial p(dim);
        p.add_term(c, std::vector<int>(dim, 0));
        return p;
    }
    static Polynomial coordinate(int dim, int i, double c = 1.0) {
        std::vector<int> pw(dim, 0);
        pw[i] = 1;
        Polynomial p(dim);
        p.add_term(c, pw);
        return p;
    }

    /// Random polynomial of degree <= 2 with standard normal coefficients.
    static Polynomial random_quadratic(int dim, std::mt19937_64& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Polynomial p(dim);
        for (int i = 0; i < dim; ++i) {
            std::vector<int> pw(dim, 0);
            pw[i] = 1;
            p.add_term(normal(rng), pw);
        }
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) {
                std::vector<int> pw(dim, 0);
                pw[i] += 1;
                pw[j] += 1;
                p.add_term(normal(rng), pw);
            }
        return p;
    }

    int dim() const noexcept { return dim_; }
    const std::vector<Monomial>& terms() const noexcept { return terms_; }
    int degree() const noexcept {
        int d = 0;
        for (const auto& t : terms_) {
            int s = 0;
            for (int e : t.powers) s += e;
            d = std::max(d, s);
        }
        return d;
    }

    void add_term(double coeff, std::vector<int> powers) {
        if (static_cast<int>(powers.size()) != dim_)
            throw StructuralError("monomial has " + std::to_string(powers.size()) + " exponents, expected " + std::to_string(dim_));
        for (int e : powers)
            if (e < 0) throw StructuralError("negative exponent in monomial");
        for (auto& t : terms_)
            if (t.powers == powers) {
                t.coeff += coeff;
                return;
            }
        terms_.push_back({coeff, std::move(powers)});
        max_power_ = std::max(max_power_, *std::max_element(terms_.back().powers.begin(), terms_.back().powers.end()));
    }

    Polynomial& operator+=(const Polynomial& o) {
        for (const auto& t : o.terms_) add_term(t.coeff, t.powers);
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator*(double c, Polynomial p) {
        for (auto& t : p.terms_) t.coeff *= c;
        return p;
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial r(a.dim_);
        for (const auto& s : a.terms_)
            for (const auto& t : b.terms_) {
                std::vector<int> pw(a.dim_);
                for (int i = 0; i < a.dim_; ++i) pw[i] = s.powers[i] + t.powers[i];
                r.add_term(s.coeff * t.coeff, pw);
            }
        return r;
    }

    double value(const Vec& x) const {
        thread_local std::vector<double> table;
        fill_powers(x, table);
        double v = 0.0;
        for (const auto& t : terms_) v += t.coeff * monomial(table, t.powers, -1);
        return v;
    }

    Vec gradient(const Vec& x) const {
        thread_local std::vector<double> table;
        fill_powers(x, table);
        Vec g = Vec::Zero(dim_);
        for (const auto& t : terms_)
            for (int i = 0; i < dim_; ++i) {
                int e = t.powers[i];
                if (e == 0) continue;
                g[i] += t.coeff * e * power(table, i, e - 1) * monomial(table, t.powers, i);
            }
        return g;
    }

    Mat hessian(const Vec& x) const {
        Mat h = Mat::Zero(dim_, dim_);
        for (const auto& t : terms_) {
            for (int i = 0; i < dim_; ++i) {
                for (int j = i; j < dim_; ++j) {
                    std::vector<int> pw = t.powers;
                    double c = t.coeff;
                    c *= pw[i];
                    if (pw[i] == 0) continue;
                    --pw[i];
                    c *= pw[j];
                    if (pw[j] == 0) continue;
                    --pw[j];
                    double m = c;
                    for (int a = 0; a < dim_; ++a) m *= std::pow(x[a], pw[a]);
                    h(i, j) += m;
                    if (i != j) h(j, i) += m;
                }
            }
        }
        return h;
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

   private:
    void fill_powers(const Vec& x, std::vector<double>& table) const {
        const int stride = max_power_ + 1;
        table.resize(static_cast<std::size_t>(dim_ * stride));
        for (int i = 0; i < dim_; ++i) {
            double* row = table.data() + i * stride;
            row[0] = 1.0;
            for (int e = 1; e < stride; ++e) row[e] = row[e - 1] * x[i];
        }
    }
    double power(const std::vector<double>& table, int i, int e) const { return table[i * (max_power_ + 1) + e]; }
    double monomial(const std::vector<double>& table, const std::vector<int>& pw, int skip) const {
        double m = 1.0;
        for (int i = 0; i < dim_; ++i)
            if (i != skip) m *= power(table, i, pw[i]);
        return m;
    }

    int dim_ = 0;
    int max_power_ = 0;
    std::vector<Monomial> terms_;
};

inline nlohmann::json to_json(const Polynomial& p) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : p.terms()) terms.push_back({{"coeff", t.coeff}, {"powers", t.powers}});
    return terms;
}

inline Polynomial polynomial_from_json(int dim, const nlohmann::json& terms) {
    if (!terms.is_array()) throw StructuralError("polynomial must be a list of terms");
    Polynomial p(dim);
    for (const auto& t : terms) {
        for (const auto& [key, _] : t.items())
            if (key != "coeff" && key != "powers") throw StructuralError("unknown key '" + key + "' in polynomial term");
        p.add_term(t.at("coeff").get<double>(), t.at("powers").get<std::vector<int>>());
    }
    return p;
}

}  // namespace eqmorse
