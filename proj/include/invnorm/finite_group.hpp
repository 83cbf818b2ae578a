#pragma once

// Finite abelian groups Z/m_1 ⊕ ... ⊕ Z/m_k with dense element indices,
// homomorphisms given by generator images, and quotients by subgroups in
// invariant-factor form (Smith normal form of the relation matrix).

#include "invnorm/rational.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace invnorm {

class FiniteGroup {
public:
    using Coords = std::vector<long>;

    FiniteGroup() = default;

    /// Cyclic factors Z/m_i, each m_i >= 1. Factors equal to 1 are kept (they
    /// contribute nothing); invariant_form() gives the canonical form.
    explicit FiniteGroup(std::vector<long> factors) : factors_(std::move(factors)) {
        size_ = 1;
        for (long m : factors_) {
            if (m < 1)
                throw std::invalid_argument("cyclic factors must be positive");
            size_ *= static_cast<std::size_t>(m);
            if (size_ > (1u << 24))
                throw std::invalid_argument("finite group too large");
        }
    }

    static FiniteGroup trivial() { return FiniteGroup(std::vector<long>{}); }

    const std::vector<long>& factors() const { return factors_; }
    std::size_t rank() const { return factors_.size(); }
    std::size_t size() const { return size_; }

    /// Canonical form: every factor >= 2 and each divides the next.
    bool is_invariant_form() const {
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (factors_[i] < 2)
                return false;
            if (i + 1 < factors_.size() && factors_[i + 1] % factors_[i] != 0)
                return false;
        }
        return true;
    }

    std::size_t index(const Coords& c) const {
        if (c.size() != factors_.size())
            throw std::invalid_argument("element has the wrong number of coordinates");
        std::size_t out = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            long v = c[i] % factors_[i];
            if (v < 0)
                v += factors_[i];
            out = out * static_cast<std::size_t>(factors_[i]) + static_cast<std::size_t>(v);
        }
        return out;
    }

    Coords coords(std::size_t idx) const {
        Coords c(factors_.size());
        for (std::size_t i = factors_.size(); i-- > 0;) {
            c[i] = static_cast<long>(idx % static_cast<std::size_t>(factors_[i]));
            idx /= static_cast<std::size_t>(factors_[i]);
        }
        return c;
    }

    std::size_t add(std::size_t a, std::size_t b) const {
        Coords x = coords(a), y = coords(b);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += y[i];
        return index(x);
    }

    std::size_t neg(std::size_t a) const {
        Coords x = coords(a);
        for (auto& v : x)
            v = -v;
        return index(x);
    }

    std::size_t sub(std::size_t a, std::size_t b) const { return add(a, neg(b)); }

    std::size_t mul(long n, std::size_t a) const {
        Coords x = coords(a);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = static_cast<long>((static_cast<long long>(x[i]) * (n % factors_[i])) % factors_[i]);
        return index(x);
    }

    std::size_t generator(std::size_t i) const {
        Coords c(factors_.size(), 0);
        c.at(i) = 1;
        return index(c);
    }

    long order(std::size_t a) const {
        long out = 1;
        const Coords c = coords(a);
        for (std::size_t i = 0; i < c.size(); ++i)
            out = std::lcm(out, factors_[i] / std::gcd(factors_[i], c[i]));
        return out;
    }

    /// Smallest subgroup containing `gens`, as a sorted index list.
    std::vector<std::size_t> span(const std::vector<std::size_t>& gens) const {
        std::vector<char> in(size_, 0);
        std::vector<std::size_t> out{0}, frontier{0};
        in[0] = 1;
        while (!frontier.empty()) {
            std::vector<std::size_t> next;
            for (std::size_t x : frontier)
                for (std::size_t g : gens) {
                    const std::size_t y = add(x, g);
                    if (!in[y]) {
                        in[y] = 1;
                        out.push_back(y);
                        next.push_back(y);
                    }
                }
            frontier = std::move(next);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    bool is_subgroup(const std::vector<std::size_t>& h) const {
        std::vector<char> in(size_, 0);
        for (std::size_t x : h) {
            if (x >= size_)
                return false;
            in[x] = 1;
        }
        if (!in[0])
            return false;
        for (std::size_t x : h)
            for (std::size_t y : h)
                if (!in[sub(x, y)])
                    return false;
        return true;
    }

    std::string to_string() const {
        if (factors_.empty())
            return "0";
        std::string out;
        for (std::size_t i = 0; i < factors_.size(); ++i)
            out += (i ? " + Z/" : "Z/") + std::to_string(factors_[i]);
        return out;
    }

    nlohmann::json coords_json(std::size_t idx) const { return coords(idx); }

    friend bool operator==(const FiniteGroup& a, const FiniteGroup& b) { return a.factors_ == b.factors_; }

private:
    std::vector<long> factors_;
    std::size_t size_ = 1;
};

/// A homomorphism between finite groups, given by the images of the source's
/// generators; valid when m_i · image_i = 0 for every factor Z/m_i.
struct FiniteHom {
    FiniteGroup source;
    FiniteGroup target;
    std::vector<std::size_t> images;

    bool well_defined() const {
        if (images.size() != source.rank())
            return false;
        for (std::size_t i = 0; i < images.size(); ++i)
            if (images[i] >= target.size() || target.mul(source.factors()[i], images[i]) != 0)
                return false;
        return true;
    }

    std::size_t apply(std::size_t x) const {
        const auto c = source.coords(x);
        std::size_t out = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
            out = target.add(out, target.mul(c[i], images[i]));
        return out;
    }

    /// Images of every source element, by index.
    std::vector<std::size_t> table() const {
        std::vector<std::size_t> out(source.size());
        for (std::size_t x = 0; x < source.size(); ++x)
            out[x] = apply(x);
        return out;
    }

    bool injective() const {
        for (std::size_t x = 1; x < source.size(); ++x)
            if (apply(x) == 0)
                return false;
        return true;
    }

    /// this then g (source -> g.target).
    FiniteHom then(const FiniteHom& g) const {
        FiniteHom out{source, g.target, {}};
        for (std::size_t i : images)
            out.images.push_back(g.apply(i));
        return out;
    }

    static FiniteHom identity(const FiniteGroup& g) {
        FiniteHom out{g, g, {}};
        for (std::size_t i = 0; i < g.rank(); ++i)
            out.images.push_back(g.generator(i));
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json im = nlohmann::json::array();
        for (std::size_t i : images)
            im.push_back(target.coords(i));
        return {{"source", source.factors()}, {"target", target.factors()}, {"images", std::move(im)}};
    }

    static FiniteHom from_json(const nlohmann::json& j) {
        for (const char* key : {"source", "target", "images"})
            if (!j.contains(key))
                throw ParseError(std::string("homomorphism missing '") + key + "'");
        FiniteHom f{FiniteGroup(j.at("source").get<std::vector<long>>()),
                    FiniteGroup(j.at("target").get<std::vector<long>>()), {}};
        for (const auto& c : j.at("images"))
            f.images.push_back(f.target.index(c.get<std::vector<long>>()));
        if (f.images.size() != f.source.rank())
            throw ParseError("one image per source generator is required");
        return f;
    }
};

namespace detail {

/// Smith normal form of an integer matrix (rows = relations). Returns the
/// diagonal and the unimodular column transform V with U·R·V = D.
struct SmithForm {
    std::vector<Integer> diag;              // length = number of columns
    std::vector<std::vector<Integer>> v;    // cols x cols
};

inline SmithForm smith_form(std::vector<std::vector<Integer>> r, std::size_t cols) {
    const std::size_t rows = r.size();
    std::vector<std::vector<Integer>> v(cols, std::vector<Integer>(cols, Integer(0)));
    for (std::size_t i = 0; i < cols; ++i)
        v[i][i] = 1;
    auto col_op = [&](std::size_t dst, std::size_t src, const Integer& q) { // col dst -= q col src
        for (auto& row : r)
            row[dst] -= q * row[src];
        for (auto& row : v)
            row[dst] -= q * row[src];
    };
    auto col_swap = [&](std::size_t a, std::size_t b) {
        for (auto& row : r)
            std::swap(row[a], row[b]);
        for (auto& row : v)
            std::swap(row[a], row[b]);
    };
    auto row_op = [&](std::size_t dst, std::size_t src, const Integer& q) {
        for (std::size_t j = 0; j < cols; ++j)
            r[dst][j] -= q * r[src][j];
    };
    std::size_t t = 0;
    for (; t < std::min(rows, cols); ++t) {
        // Pivot: smallest nonzero |entry| in the remaining block.
        for (;;) {
            std::optional<std::pair<std::size_t, std::size_t>> piv;
            for (std::size_t i = t; i < rows; ++i)
                for (std::size_t j = t; j < cols; ++j)
                    if (r[i][j] != 0 && (!piv || abs(r[i][j]) < abs(r[piv->first][piv->second])))
                        piv = {i, j};
            if (!piv)
                goto done;
            std::swap(r[t], r[piv->first]);
            col_swap(t, piv->second);
            bool clean = true;
            for (std::size_t i = t + 1; i < rows; ++i) {
                Integer q;
                mpz_fdiv_q(q.get_mpz_t(), r[i][t].get_mpz_t(), r[t][t].get_mpz_t());
                row_op(i, t, q);
                clean = clean && r[i][t] == 0;
            }
            for (std::size_t j = t + 1; j < cols; ++j) {
                Integer q;
                mpz_fdiv_q(q.get_mpz_t(), r[t][j].get_mpz_t(), r[t][t].get_mpz_t());
                col_op(j, t, q);
                clean = clean && r[t][j] == 0;
            }
            if (!clean)
                continue;
            // Divisibility: the pivot must divide every remaining entry.
            std::optional<std::size_t> bad;
            for (std::size_t i = t + 1; i < rows && !bad; ++i)
                for (std::size_t j = t + 1; j < cols; ++j)
                    if (r[i][j] % r[t][t] != 0) {
                        bad = i;
                        break;
                    }
            if (!bad)
                break;
            row_op(t, *bad, Integer(-1));
        }
    }
done:
    SmithForm out;
    out.diag.assign(cols, Integer(0));
    for (std::size_t i = 0; i < std::min(rows, cols); ++i)
        out.diag[i] = abs(r[i][i]);
    out.v = std::move(v);
    return out;
}

} // namespace detail

/// G / H in invariant-factor form with the projection, where H is the
/// subgroup generated by `h_gens`.
struct FiniteQuotient {
    FiniteGroup group;
    std::vector<std::size_t> projection; // by element index of G
    FiniteHom hom;                       // G -> G/H
};

inline FiniteQuotient finite_quotient(const FiniteGroup& g, const std::vector<std::size_t>& h_gens) {
    const std::size_t k = g.rank();
    std::vector<std::vector<Integer>> rel;
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<Integer> row(k, Integer(0));
        row[i] = g.factors()[i];
        rel.push_back(std::move(row));
    }
    for (std::size_t h : h_gens) {
        std::vector<Integer> row;
        for (long c : g.coords(h))
            row.emplace_back(c);
        rel.push_back(std::move(row));
    }
    const detail::SmithForm sf = detail::smith_form(rel, k);
    // y = x·V; keep coordinates with d_i >= 2, ordered by divisibility.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < k; ++i) {
        if (sf.diag[i] == 0)
            throw std::logic_error("quotient of a finite group cannot be infinite");
        if (sf.diag[i] != 1)
            keep.push_back(i);
    }
    std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return sf.diag[a] < sf.diag[b]; });
    std::vector<long> factors;
    for (std::size_t i : keep)
        factors.push_back(sf.diag[i].get_si());
    FiniteQuotient out{FiniteGroup(factors), {}, {}};
    out.hom = FiniteHom{g, out.group, {}};
    for (std::size_t i = 0; i < k; ++i) {
        FiniteGroup::Coords y;
        for (std::size_t j : keep) {
            Integer m = sf.v[i][j] % sf.diag[j];
            y.push_back(m.get_si());
        }
        out.hom.images.push_back(out.group.index(y));
    }
    out.projection = out.hom.table();
    return out;
}

/// The same group in invariant-factor form, with the isomorphism.
inline FiniteQuotient invariant_form(const FiniteGroup& g) { return finite_quotient(g, {}); }

/// Direct sum with the two inclusions.
struct FiniteSum {
    FiniteGroup group;
    FiniteHom in1, in2;
};

inline FiniteSum direct_sum(const FiniteGroup& a, const FiniteGroup& b) {
    std::vector<long> f = a.factors();
    f.insert(f.end(), b.factors().begin(), b.factors().end());
    FiniteSum out{FiniteGroup(f), {}, {}};
    out.in1 = FiniteHom{a, out.group, {}};
    out.in2 = FiniteHom{b, out.group, {}};
    for (std::size_t i = 0; i < a.rank(); ++i)
        out.in1.images.push_back(out.group.generator(i));
    for (std::size_t i = 0; i < b.rank(); ++i)
        out.in2.images.push_back(out.group.generator(a.rank() + i));
    return out;
}

} // namespace invnorm
