#pragma once

// Random finite normed groups and embedding pairs for the amalgamation
// suites. Norm values are drawn from [1, 2), so every table is a norm.

#include "invnorm/shkarin.hpp"

#include <random>
#include <vector>

namespace gen {

using namespace invnorm;

/// Invariant-factor forms of all abelian groups of order <= 12.
inline std::vector<std::vector<long>> small_groups() {
    return {{},     {2},    {3},     {4},  {2, 2}, {5},  {6},  {7},     {8},
            {2, 4}, {2, 2, 2}, {9}, {3, 3}, {10}, {11}, {12}, {2, 6}};
}

inline Rational unit_interval_value(std::mt19937_64& rng, long den) {
    std::uniform_int_distribution<long> d(den, 2 * den - 1);
    return frac(d(rng), den);
}

/// Random norm on g with values in [1, 2); entries in `fixed` are kept.
inline FiniteNormedGroup random_finite_norm(const FiniteGroup& g, std::mt19937_64& rng, long den = 8,
                                            const std::vector<std::pair<std::size_t, Rational>>& fixed = {}) {
    std::vector<std::optional<Rational>> v(g.size());
    v[0] = Rational(0);
    for (const auto& [x, r] : fixed) {
        v[x] = r;
        v[g.neg(x)] = r;
    }
    for (std::size_t x = 1; x < g.size(); ++x)
        if (!v[x]) {
            const Rational r = unit_interval_value(rng, den);
            v[x] = r;
            v[g.neg(x)] = r;
        }
    FiniteNormedGroup out{g, {}};
    for (auto& r : v)
        out.norm.push_back(*r);
    return out;
}

inline std::vector<std::size_t> elements_of_order(const FiniteGroup& g, long k) {
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < g.size(); ++x)
        if (g.order(x) == k)
            out.push_back(x);
    return out;
}

/// Two isometric embeddings of a cyclic (possibly trivial) G0 into groups of
/// order <= 12.
inline std::pair<FiniteEmbedding, FiniteEmbedding> random_amalgam_instance(std::mt19937_64& rng) {
    const auto groups = small_groups();
    for (;;) {
        const FiniteGroup g1(groups[1 + rng() % (groups.size() - 1)]);
        const FiniteGroup g2(groups[1 + rng() % (groups.size() - 1)]);
        // Orders present in both.
        std::vector<long> common;
        for (long k = 1; k <= 12; ++k)
            if (!elements_of_order(g1, k).empty() && !elements_of_order(g2, k).empty())
                common.push_back(k);
        const long k = common[rng() % common.size()];
        const FiniteGroup g0 = k == 1 ? FiniteGroup::trivial() : FiniteGroup({k});
        const auto o1 = elements_of_order(g1, k), o2 = elements_of_order(g2, k);
        FiniteHom m1{g0, g1, {}}, m2{g0, g2, {}};
        if (k > 1) {
            m1.images.push_back(o1[rng() % o1.size()]);
            m2.images.push_back(o2[rng() % o2.size()]);
        }
        const FiniteNormedGroup n1 = random_finite_norm(g1, rng);
        FiniteNormedGroup n0{g0, {}};
        std::vector<std::pair<std::size_t, Rational>> fixed;
        for (std::size_t x = 0; x < g0.size(); ++x) {
            n0.norm.push_back(n1.norm[m1.apply(x)]);
            fixed.emplace_back(m2.apply(x), n0.norm.back());
        }
        const FiniteNormedGroup n2 = random_finite_norm(g2, rng, 8, fixed);
        return {FiniteEmbedding{n0, n1, m1}, FiniteEmbedding{n0, n2, m2}};
    }
}

} // namespace gen
