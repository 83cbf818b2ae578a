#pragma once

// Subgroup membership and relation lattices.
//
// A finite family a_1..a_k of elements is restricted to the union of the
// supports involved. Each coordinate becomes one integer row: Z rows as they
// are, Z/m rows with modulus m, Q/Z rows scaled by the lcm L of the
// denominators present and taken modulo L. Membership of t in <a_1..a_k> is
// then the integer system  M x + diag(moduli) y = t, solved by column
// echelon reduction with a unimodular transform.

#include "invnorm/group.hpp"
#include "invnorm/symset.hpp"

#include <map>
#include <optional>
#include <vector>

namespace invnorm {

namespace detail {

using IntMatrix = std::vector<std::vector<Integer>>; // row-major

struct LinearSystem {
    IntMatrix m;                // rows x (k + number of modular rows)
    std::vector<Integer> rhs;   // per row
    std::size_t k = 0;          // number of family columns
};

inline LinearSystem build_system(const GroupScheme& s, const std::vector<GroupElement>& family,
                                 const GroupElement& target) {
    std::map<std::size_t, Integer> denom_lcm;
    auto visit = [&](const GroupElement& e) {
        for (const auto& [c, v] : e.entries()) {
            auto [it, _] = denom_lcm.try_emplace(c, Integer(1));
            mpz_lcm(it->second.get_mpz_t(), it->second.get_mpz_t(), v.get_den_mpz_t());
        }
    };
    for (const auto& a : family)
        visit(a);
    visit(target);

    LinearSystem sys;
    sys.k = family.size();
    std::vector<Integer> moduli;
    for (const auto& [c, l] : denom_lcm) {
        const CoordKind kind = s.kind(c);
        Integer scale = 1, modulus = 0;
        if (kind.type == CoordType::Cyclic)
            modulus = kind.modulus;
        else if (kind.type == CoordType::RationalModOne)
            scale = modulus = l;
        std::vector<Integer> row;
        row.reserve(family.size());
        for (const auto& a : family) {
            const Rational v(a.at(c) * scale);
            row.push_back(v.get_num());
        }
        sys.m.push_back(std::move(row));
        sys.rhs.push_back(Rational(target.at(c) * scale).get_num());
        moduli.push_back(modulus);
    }
    const std::size_t rows = sys.m.size();
    for (std::size_t r = 0; r < rows; ++r)
        if (moduli[r] != 0)
            for (std::size_t q = 0; q < rows; ++q)
                sys.m[q].push_back(q == r ? moduli[r] : Integer(0));
    return sys;
}

/// Column echelon form H = N U with U unimodular. pivots[i] is the pivot
/// column of row i, or npos.
struct Echelon {
    IntMatrix h;
    IntMatrix u; // n x n
    std::vector<std::size_t> pivots;
    std::size_t rank = 0;
};

constexpr std::size_t npos = static_cast<std::size_t>(-1);

inline Echelon column_echelon(IntMatrix n) {
    const std::size_t rows = n.size();
    const std::size_t cols = rows ? n[0].size() : 0;
    Echelon e;
    e.u.assign(cols, std::vector<Integer>(cols, Integer(0)));
    for (std::size_t i = 0; i < cols; ++i)
        e.u[i][i] = 1;
    auto col_axpy = [&](std::size_t dst, std::size_t src, const Integer& q) { // col dst -= q * col src
        for (std::size_t r = 0; r < rows; ++r)
            n[r][dst] -= q * n[r][src];
        for (std::size_t r = 0; r < cols; ++r)
            e.u[r][dst] -= q * e.u[r][src];
    };
    auto col_swap = [&](std::size_t a, std::size_t b) {
        for (std::size_t r = 0; r < rows; ++r)
            std::swap(n[r][a], n[r][b]);
        for (std::size_t r = 0; r < cols; ++r)
            std::swap(e.u[r][a], e.u[r][b]);
    };
    auto col_negate = [&](std::size_t a) {
        for (std::size_t r = 0; r < rows; ++r)
            n[r][a] = -n[r][a];
        for (std::size_t r = 0; r < cols; ++r)
            e.u[r][a] = -e.u[r][a];
    };
    std::size_t p = 0;
    e.pivots.assign(rows, npos);
    for (std::size_t i = 0; i < rows && p < cols; ++i) {
        for (;;) {
            std::size_t best = npos;
            for (std::size_t j = p; j < cols; ++j)
                if (n[i][j] != 0 && (best == npos || mpz_cmpabs(n[i][j].get_mpz_t(), n[i][best].get_mpz_t()) < 0))
                    best = j;
            if (best == npos)
                break;
            col_swap(p, best);
            bool done = true;
            for (std::size_t j = p + 1; j < cols; ++j) {
                if (n[i][j] == 0)
                    continue;
                Integer q;
                mpz_fdiv_q(q.get_mpz_t(), n[i][j].get_mpz_t(), n[i][p].get_mpz_t());
                col_axpy(j, p, q);
                if (n[i][j] != 0)
                    done = false;
            }
            if (done)
                break;
        }
        if (n[i][p] != 0) {
            if (n[i][p] < 0)
                col_negate(p);
            e.pivots[i] = p;
            ++p;
        }
    }
    e.rank = p;
    e.h = std::move(n);
    return e;
}

/// An integer solution z of N z = rhs, or nullopt.
inline std::optional<std::vector<Integer>> solve_integer(const Echelon& e, const std::vector<Integer>& rhs) {
    const std::size_t cols = e.u.size();
    std::vector<Integer> w(cols, Integer(0));
    for (std::size_t i = 0; i < e.h.size(); ++i) {
        Integer residual = rhs[i];
        const std::size_t limit = e.pivots[i] == npos ? e.rank : e.pivots[i];
        for (std::size_t j = 0; j < limit; ++j)
            residual -= e.h[i][j] * w[j];
        if (e.pivots[i] == npos) {
            if (residual != 0)
                return std::nullopt;
            continue;
        }
        const Integer& d = e.h[i][e.pivots[i]];
        if (!mpz_divisible_p(residual.get_mpz_t(), d.get_mpz_t()))
            return std::nullopt;
        mpz_divexact(w[e.pivots[i]].get_mpz_t(), residual.get_mpz_t(), d.get_mpz_t());
    }
    std::vector<Integer> z(cols, Integer(0));
    for (std::size_t r = 0; r < cols; ++r)
        for (std::size_t j = 0; j < e.rank; ++j)
            if (w[j] != 0)
                z[r] += e.u[r][j] * w[j];
    return z;
}

} // namespace detail

/// Integer coefficients c with sum c_i * family_i = target, or nullopt when
/// target is outside the generated subgroup.
inline std::optional<std::vector<Integer>> represent_in(const GroupScheme& s, const GroupElement& target,
                                                       const std::vector<GroupElement>& family) {
    if (target.is_zero())
        return std::vector<Integer>(family.size(), Integer(0));
    auto sys = detail::build_system(s, family, target);
    auto ech = detail::column_echelon(sys.m);
    auto z = detail::solve_integer(ech, sys.rhs);
    if (!z)
        return std::nullopt;
    z->resize(sys.k);
    return z;
}

/// Coefficients indexed like A.elements().
inline std::optional<std::vector<Integer>> represent_in(const GroupScheme& s, const GroupElement& target,
                                                       const SymSet& a) {
    return represent_in(s, target, a.elements());
}

inline GroupElement combine(const GroupScheme& s, const std::vector<Integer>& coeffs,
                            const std::vector<GroupElement>& family) {
    GroupElement acc;
    for (std::size_t i = 0; i < family.size(); ++i)
        if (coeffs[i] != 0)
            acc = add(s, acc, scalar_mul(s, coeffs[i], family[i]));
    return acc;
}

/// A basis of the lattice of integer relations {c : sum c_i * family_i = 0}.
inline std::vector<std::vector<Integer>> relation_basis(const GroupScheme& s,
                                                        const std::vector<GroupElement>& family) {
    auto sys = detail::build_system(s, family, GroupElement());
    const std::size_t cols = sys.m.empty() ? family.size() : sys.m[0].size();
    std::vector<std::vector<Integer>> basis;
    if (sys.m.empty()) {
        for (std::size_t i = 0; i < family.size(); ++i) {
            std::vector<Integer> v(family.size(), Integer(0));
            v[i] = 1;
            basis.push_back(std::move(v));
        }
        return basis;
    }
    auto ech = detail::column_echelon(sys.m);
    for (std::size_t j = ech.rank; j < cols; ++j) {
        std::vector<Integer> v(sys.k);
        bool nonzero = false;
        for (std::size_t r = 0; r < sys.k; ++r) {
            v[r] = ech.u[r][j];
            nonzero = nonzero || v[r] != 0;
        }
        if (nonzero)
            basis.push_back(std::move(v));
    }
    return basis;
}

/// Does family_i -> image_i extend to a group isomorphism
/// <family> -> <image>? (Same relation lattices.)
inline bool same_relations(const GroupScheme& s, const std::vector<GroupElement>& family,
                           const std::vector<GroupElement>& image) {
    if (family.size() != image.size())
        return false;
    for (const auto& rel : relation_basis(s, family))
        if (!combine(s, rel, image).is_zero())
            return false;
    for (const auto& rel : relation_basis(s, image))
        if (!combine(s, rel, family).is_zero())
            return false;
    return true;
}

namespace detail {

// Constraint set for positive m: either m fixed, or m = a (mod n).
struct Congruence {
    bool fixed = false;
    Integer value = 0; // fixed value or residue
    Integer mod = 1;
};

inline bool intersect(Congruence& acc, const Congruence& c) {
    if (c.fixed) {
        if (acc.fixed)
            return acc.value == c.value;
        Integer r;
        mpz_fdiv_r(r.get_mpz_t(), Integer(c.value - acc.value).get_mpz_t(), acc.mod.get_mpz_t());
        if (r != 0)
            return false;
        acc = c;
        return true;
    }
    if (acc.fixed) {
        Integer r;
        mpz_fdiv_r(r.get_mpz_t(), Integer(acc.value - c.value).get_mpz_t(), c.mod.get_mpz_t());
        return r == 0;
    }
    // m = a1 (mod n1), m = a2 (mod n2).
    Integer g, s, t;
    mpz_gcdext(g.get_mpz_t(), s.get_mpz_t(), t.get_mpz_t(), acc.mod.get_mpz_t(), c.mod.get_mpz_t());
    Integer diff = c.value - acc.value;
    if (!mpz_divisible_p(diff.get_mpz_t(), g.get_mpz_t()))
        return false;
    Integer l = acc.mod / g * c.mod;
    Integer x = acc.value + acc.mod * ((diff / g) * s);
    mpz_fdiv_r(x.get_mpz_t(), x.get_mpz_t(), l.get_mpz_t());
    acc.value = x;
    acc.mod = l;
    return true;
}

// Solutions m of m*a = b (mod n), n >= 1.
inline std::optional<Congruence> linear_congruence(const Integer& a, const Integer& b, const Integer& n) {
    Integer g;
    mpz_gcd(g.get_mpz_t(), a.get_mpz_t(), n.get_mpz_t());
    if (!mpz_divisible_p(b.get_mpz_t(), g.get_mpz_t()))
        return std::nullopt;
    Integer n2 = n / g, a2 = a / g, b2 = b / g;
    Congruence c;
    c.mod = n2;
    if (n2 == 1) {
        c.value = 0;
        return c;
    }
    Integer inv;
    Integer a2r;
    mpz_fdiv_r(a2r.get_mpz_t(), a2.get_mpz_t(), n2.get_mpz_t());
    mpz_invert(inv.get_mpz_t(), a2r.get_mpz_t(), n2.get_mpz_t());
    Integer x = inv * b2;
    mpz_fdiv_r(x.get_mpz_t(), x.get_mpz_t(), n2.get_mpz_t());
    c.value = x;
    return c;
}

} // namespace detail

/// Least m >= 1 with m*g = f, or nullopt.
inline std::optional<Integer> solve_multiple(const GroupScheme& s, const GroupElement& g, const GroupElement& f) {
    detail::Congruence acc;
    std::vector<std::size_t> coords;
    for (const auto& [c, v] : g.entries())
        coords.push_back(c);
    for (const auto& [c, v] : f.entries())
        coords.push_back(c);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    for (std::size_t c : coords) {
        const Rational gv = g.at(c), fv = f.at(c);
        const CoordKind k = s.kind(c);
        detail::Congruence con;
        if (k.type == CoordType::Integer) {
            if (gv == 0)
                return std::nullopt; // fv != 0 here
            const Rational q = fv / gv;
            if (q.get_den() != 1 || q <= 0)
                return std::nullopt;
            con.fixed = true;
            con.value = q.get_num();
        } else {
            Integer n = k.modulus, a = gv.get_num(), b = fv.get_num();
            if (k.type == CoordType::RationalModOne) {
                mpz_lcm(n.get_mpz_t(), gv.get_den_mpz_t(), fv.get_den_mpz_t());
                a = Rational(gv * n).get_num();
                b = Rational(fv * n).get_num();
            }
            auto lc = detail::linear_congruence(a, b, n);
            if (!lc)
                return std::nullopt;
            con = *lc;
        }
        if (!detail::intersect(acc, con))
            return std::nullopt;
    }
    if (acc.fixed)
        return acc.value >= 1 ? std::optional<Integer>(acc.value) : std::nullopt;
    Integer m = acc.value;
    if (m <= 0)
        m += acc.mod;
    return m;
}

} // namespace invnorm
