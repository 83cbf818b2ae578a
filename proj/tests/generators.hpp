#pragma once

// Random instance generators shared by the unit suites and the acceptance
// binary. Valid partial norms are produced without calling the code under
// test: values drawn from [1, 2) satisfy subadditivity automatically, since
// any decomposition into two or more nonzero terms costs at least 2.

#include "invnorm/norm.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace gen {

using namespace invnorm;

inline Rational random_rational(std::mt19937_64& rng, long lo_num, long hi_num, long den) {
    std::uniform_int_distribution<long> d(lo_num, hi_num);
    return frac(d(rng), den);
}

/// Random nonzero element of a small fragment of the scheme.
inline GroupElement random_element(const GroupScheme& s, std::mt19937_64& rng, std::size_t coords, long span) {
    std::uniform_int_distribution<long> v(-span, span);
    std::uniform_int_distribution<long> den(2, 6);
    if (auto nc = s.num_coords())
        coords = std::min(coords, *nc);
    for (;;) {
        std::vector<GroupElement::Entry> raw;
        for (std::size_t c = 0; c < coords; ++c) {
            const CoordKind k = s.kind(c);
            Rational x = k.type == CoordType::RationalModOne ? frac(v(rng), den(rng)) : Rational(v(rng));
            raw.emplace_back(c, x);
        }
        GroupElement g = canonical_element(s, std::move(raw));
        if (!g.is_zero())
            return g;
    }
}

/// Symmetric domain of at most 1 + 2·`pairs` elements (fewer if the group is too small)
/// and values in [1, 2) with denominator `den`.
inline PartialNorm random_valid_norm(const GroupScheme& s, std::mt19937_64& rng, std::size_t coords, long span,
                                     std::size_t pairs, long den = 8) {
    PartialNorm p(s);
    for (std::size_t tries = 0; p.size() < 1 + 2 * pairs && tries < 200; ++tries) {
        GroupElement g = random_element(s, rng, coords, span);
        if (p.contains(g) || p.size() + (g == neg(s, g) ? 1 : 2) > 1 + 2 * pairs)
            continue;
        p.assign_pm(g, random_rational(rng, den, 2 * den - 1, den));
    }
    return p;
}

/// The three fragment families used for oracle comparisons.
inline std::vector<std::pair<GroupScheme, std::size_t>> oracle_schemes() {
    return {{GroupScheme::parse("Z^2"), 2}, {GroupScheme::parse("Z/12"), 1}, {GroupScheme::parse("sum QmodZ"), 2}};
}

inline std::vector<std::pair<GroupElement, Rational>> table_pairs(const PartialNorm& p) {
    return {p.table().begin(), p.table().end()};
}

} // namespace gen
