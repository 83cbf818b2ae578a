#pragma once

// Oriented Cayley distance between an element g and a symmetric set A, with
// generators {g} ∪ A, measured along paths starting at g and ending in A.
//
// A path g -> a of length l with k edges labelled g gives
//   (k+1)·g = a - (sum of l-k elements of A),
// so (k+1)·g lies in <A> and, on every integer coordinate c,
//   (k+1)·|g_c| <= (l-k+1)·max_A |a_c|.
// Exceedance of a radius R is certified from these facts before any search:
//   box:      |g_c| > (R+1)·max_A |a_c| for some integer coordinate c;
//   subgroup: n·g is outside <A> for every n = 1..R+1.
// Otherwise a breadth-first search of depth R decides the query.

#include "invnorm/enumerate.hpp"
#include "invnorm/lattice.hpp"
#include "invnorm/symset.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <set>
#include <vector>

namespace invnorm {

class UnsupportedGroup : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SearchBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DistDirection {
    FromG, ///< paths from g into A (default)
    Both   ///< minimum over g -> A and A -> g paths
};

enum class DistMethod { Search, BoxCertificate, SubgroupCertificate };

struct DistEdge {
    GroupElement from;
    GroupElement generator;
    GroupElement to;
};

struct DistResult {
    std::optional<std::size_t> dist; ///< set iff dist <= R
    std::size_t radius = 0;
    DistMethod method = DistMethod::Search;
    std::vector<DistEdge> path; ///< witness when dist is set

    bool exceeds() const { return !dist.has_value(); }
};

struct DistOptions {
    DistDirection direction = DistDirection::FromG;
    bool use_certificates = true;
    std::size_t state_budget = 4'000'000;
};

namespace detail {

inline Integer max_abs_on(const std::vector<GroupElement>& a, std::size_t c) {
    Integer out = 0;
    for (const auto& x : a) {
        const Integer n = abs(x.at(c).get_num());
        if (n > out)
            out = n;
    }
    return out;
}

inline bool box_certificate(const GroupScheme& s, const GroupElement& g, const std::vector<GroupElement>& a,
                            std::size_t radius) {
    for (const auto& [c, v] : g.entries()) {
        if (s.kind(c).type != CoordType::Integer)
            continue;
        const Integer m = max_abs_on(a, c);
        if (abs(v.get_num()) > m * static_cast<unsigned long>(radius + 1))
            return true;
    }
    return false;
}

inline bool disjoint_support(const GroupElement& g, const std::vector<GroupElement>& a) {
    for (const auto& [c, v] : g.entries())
        for (const auto& x : a)
            if (x.at(c) != 0)
                return false;
    return true;
}

inline bool subgroup_certificate(const GroupScheme& s, const GroupElement& g, const std::vector<GroupElement>& a,
                                 std::size_t radius) {
    if (disjoint_support(g, a)) {
        // n·g in <A> forces n·g = 0 on g's coordinates.
        const auto o = order(s, g);
        return !o || *o > static_cast<unsigned long>(radius + 1);
    }
    // A torsion coordinate where g's order is coprime to that of <A>'s
    // projection: n·g in <A> forces that order to divide n.
    const Integer need = static_cast<unsigned long>(radius + 1);
    for (const auto& [c, v] : g.entries()) {
        const auto o = coord_order(s, c, v);
        if (!o || !(*o > need))
            continue;
        const Integer l = projection_order(s, c, a);
        Integer gg;
        mpz_gcd(gg.get_mpz_t(), o->get_mpz_t(), l.get_mpz_t());
        if (gg == 1)
            return true;
    }
    for (std::size_t n = 1; n <= radius + 1; ++n)
        if (represent_in(s, scalar_mul(s, static_cast<long>(n), g), a))
            return false;
    return true;
}

// Multi-source BFS over edges u -> u + gen, stopping at the first state in
// `targets`. Returns the witness path or nullopt past depth `radius`.
inline std::optional<std::vector<DistEdge>> bfs(const GroupScheme& s, const std::vector<GroupElement>& sources,
                                                const std::vector<GroupElement>& gens,
                                                const std::function<bool(const GroupElement&)>& is_target,
                                                std::size_t radius, std::size_t budget) {
    struct Node {
        GroupElement elem;
        std::size_t parent;
        std::size_t gen;
        std::size_t depth;
    };
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<Node> nodes;
    std::unordered_set<GroupElement, ElementHash> seen;
    auto path_to = [&](std::size_t id) {
        std::vector<DistEdge> path;
        for (; nodes[id].parent != none; id = nodes[id].parent)
            path.push_back({nodes[nodes[id].parent].elem, gens[nodes[id].gen], nodes[id].elem});
        std::reverse(path.begin(), path.end());
        return path;
    };
    for (const auto& src : sources) {
        if (!seen.insert(src).second)
            continue;
        nodes.push_back({src, none, none, 0});
        if (is_target(src))
            return std::vector<DistEdge>{};
    }
    for (std::size_t head = 0; head < nodes.size(); ++head) {
        if (nodes[head].depth == radius)
            continue;
        for (std::size_t k = 0; k < gens.size(); ++k) {
            GroupElement next = add(s, nodes[head].elem, gens[k]);
            if (!seen.insert(next).second)
                continue;
            if (nodes.size() >= budget)
                throw SearchBudgetExceeded("oriented distance search exceeded " + std::to_string(budget) + " states");
            nodes.push_back({std::move(next), head, k, nodes[head].depth + 1});
            if (is_target(nodes.back().elem))
                return path_to(nodes.size() - 1);
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Distance from g into A if at most R, otherwise a certified exceedance.
inline DistResult oriented_dist_bounded(const GroupScheme& s, const GroupElement& g, const SymSet& a, std::size_t radius,
                                        const DistOptions& opt = {}) {
    if (radius < 1)
        throw std::invalid_argument("search radius must be >= 1");
    if (a.contains(g))
        throw std::domain_error("oriented distance undefined: " + format_element(s, g) + " lies in A");
    const std::vector<GroupElement>& elems = a.elements();
    DistResult r;
    r.radius = radius;
    if (opt.use_certificates && opt.direction == DistDirection::FromG) {
        if (detail::box_certificate(s, g, elems, radius)) {
            r.method = DistMethod::BoxCertificate;
            return r;
        }
        if (detail::subgroup_certificate(s, g, elems, radius)) {
            r.method = DistMethod::SubgroupCertificate;
            return r;
        }
    }
    std::vector<GroupElement> gens{g};
    for (const auto& x : elems)
        if (!x.is_zero())
            gens.push_back(x);
    auto in_a = [&](const GroupElement& u) { return a.contains(u); };
    auto forward = detail::bfs(s, {g}, gens, in_a, radius, opt.state_budget);
    if (opt.direction == DistDirection::Both) {
        auto is_g = [&](const GroupElement& u) { return u == g; };
        auto backward = detail::bfs(s, elems, gens, is_g, radius, opt.state_budget);
        if (backward && (!forward || backward->size() < forward->size()))
            forward = backward;
    }
    if (forward) {
        r.dist = forward->size();
        r.path = std::move(*forward);
    }
    return r;
}

/// Replays a witness path: consecutive, generator-labelled, g to A.
inline bool check_dist_path(const GroupScheme& s, const GroupElement& g, const SymSet& a,
                            const std::vector<DistEdge>& path) {
    if (path.empty())
        return a.contains(g);
    GroupElement cur = g;
    for (const auto& e : path) {
        if (!(e.from == cur) || !(e.to == add(s, e.from, e.generator)))
            return false;
        if (!(e.generator == g) && !a.contains(e.generator))
            return false;
        cur = e.to;
    }
    return a.contains(cur);
}

inline nlohmann::json dist_result_to_json(const GroupScheme& s, const GroupElement& g, const DistResult& r) {
    nlohmann::json j;
    j["g"] = format_element(s, g);
    j["radius"] = r.radius;
    if (r.dist) {
        j["dist"] = *r.dist;
        j["exceeds"] = false;
    } else {
        j["exceeds"] = true;
    }
    switch (r.method) {
    case DistMethod::Search:
        j["method"] = "bfs";
        break;
    case DistMethod::BoxCertificate:
        j["method"] = "box-certificate";
        break;
    case DistMethod::SubgroupCertificate:
        j["method"] = "subgroup-certificate";
        break;
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : r.path)
        edges.push_back({{"from", format_element(s, e.from)},
                         {"gen", format_element(s, e.generator)},
                         {"to", format_element(s, e.to)}});
    j["path"] = std::move(edges);
    return j;
}

/// All sums of at most k elements of A (A symmetric with 0, so this is the
/// set of sums of exactly k elements).
inline std::unordered_set<GroupElement, ElementHash> bounded_sums(const GroupScheme& s, const SymSet& a, std::size_t k,
                                                                  std::size_t budget = 4'000'000) {
    std::unordered_set<GroupElement, ElementHash> all{GroupElement()};
    std::vector<GroupElement> frontier{GroupElement()};
    for (std::size_t step = 0; step < k && !frontier.empty(); ++step) {
        std::vector<GroupElement> next;
        for (const auto& u : frontier)
            for (const auto& x : a) {
                GroupElement v = add(s, u, x);
                if (all.insert(v).second) {
                    if (all.size() > budget)
                        throw SearchBudgetExceeded("bounded sum set exceeded " + std::to_string(budget) + " elements");
                    next.push_back(std::move(v));
                }
            }
        frontier = std::move(next);
    }
    return all;
}

/// An element g with dist(g, A) > R, re-verified before return.
///
namespace detail {

/// An element on the least coordinate outside A's support whose order
/// exceeds radius + 1: 1 on Z or Z/n (n > radius + 1), 1/(radius + 2) on Q/Z.
inline std::optional<GroupElement> fresh_coordinate_element(const GroupScheme& s,
                                                            const std::vector<GroupElement>& a, std::size_t radius) {
    std::size_t top = 0;
    for (const auto& x : a)
        for (const auto& [c, v] : x.entries())
            top = std::max(top, c + 1);
    const Integer need = static_cast<unsigned long>(radius + 1);
    for (std::size_t c = top; c < top + 4096 && s.has_coord(c); ++c) {
        const CoordKind k = s.kind(c);
        Rational v(1);
        if (k.type == CoordType::Cyclic && k.modulus <= need)
            continue;
        if (k.type == CoordType::RationalModOne)
            v = frac(1, need + 1);
        return GroupElement::from_canonical({{c, v}});
    }
    return std::nullopt;
}

inline bool is_prime(unsigned long p) {
    if (p < 2)
        return false;
    for (unsigned long d = 2; d * d <= p; ++d)
        if (p % d == 0)
            return false;
    return true;
}

/// On a torsion coordinate of A's support, an element whose order exceeds
/// radius + 1 and is coprime to the order of <A>'s projection there.
inline std::optional<GroupElement> coprime_torsion_element(const GroupScheme& s, const std::vector<GroupElement>& a,
                                                           std::size_t radius) {
    std::set<std::size_t> coords;
    for (const auto& x : a)
        for (const auto& [c, v] : x.entries())
            coords.insert(c);
    const Integer need = static_cast<unsigned long>(radius + 1);
    for (const std::size_t c : coords) {
        const CoordKind k = s.kind(c);
        if (k.type == CoordType::Integer)
            continue;
        const Integer l = projection_order(s, c, a);
        if (k.type == CoordType::RationalModOne) {
            unsigned long p = radius + 2;
            while (!is_prime(p) || mpz_divisible_ui_p(l.get_mpz_t(), p))
                ++p;
            return GroupElement::from_canonical({{c, frac(1, p)}});
        }
        // Largest divisor of the modulus coprime to l.
        Integer o = k.modulus, gg;
        for (mpz_gcd(gg.get_mpz_t(), o.get_mpz_t(), l.get_mpz_t()); gg != 1;
             mpz_gcd(gg.get_mpz_t(), o.get_mpz_t(), gg.get_mpz_t()))
            o /= gg;
        if (o > need)
            return GroupElement::from_canonical({{c, Rational(k.modulus / o)}});
    }
    return std::nullopt;
}

} // namespace detail

/// When A holds an element b of infinite order, g = N·b with N the least
/// value satisfying the box certificate. Otherwise, when some coordinate past
/// A's support carries elements of order > R+1, g is such an element there.
/// Otherwise, on a torsion coordinate where some order > R+1 is coprime to
/// the order of <A>'s projection, g is an element of that order.
/// Otherwise the enumeration of G is scanned for the first g with n·g
/// outside S_{R+1} = (R+1)-fold sums of A for every 1 <= n <= R+1; that
/// range is what a path of length <= R needs.
inline GroupElement find_far_element(const GroupScheme& s, const SymSet& a, std::size_t radius) {
    if (!s.is_unbounded())
        throw UnsupportedGroup("group " + s.to_string() +
                               " is bounded: far elements need an element of infinite order or elements of "
                               "arbitrarily high finite order");
    if (radius < 1)
        throw std::invalid_argument("search radius must be >= 1");
    const auto& elems = a.elements();
    for (const auto& b : elems) {
        if (b.is_zero() || order(s, b) || b < neg(s, b))
            continue;
        std::optional<Integer> best;
        for (const auto& [c, v] : b.entries()) {
            if (s.kind(c).type != CoordType::Integer)
                continue;
            const Integer m = detail::max_abs_on(elems, c);
            const Integer bc = abs(v.get_num());
            Integer n = (m * static_cast<unsigned long>(radius + 1)) / bc + 1;
            if (!best || n < *best)
                best = n;
        }
        GroupElement g = scalar_mul(s, *best, b);
        if (oriented_dist_bounded(s, g, a, radius).exceeds())
            return g;
        throw std::logic_error("box certificate failed for a multiple of an infinite-order element");
    }
    if (auto g = detail::fresh_coordinate_element(s, elems, radius))
        return *g;
    if (auto g = detail::coprime_torsion_element(s, elems, radius))
        return *g;
    const auto sums = bounded_sums(s, a, radius + 1);
    GroupEnumerator en(s);
    for (std::size_t n = 1;; ++n) {
        auto g = en.at(n);
        if (!g)
            throw UnsupportedGroup("enumeration ended without a far element");
        bool ok = true;
        GroupElement mult = *g;
        for (std::size_t k = 1; k <= radius + 1 && ok; ++k) {
            if (sums.count(mult))
                ok = false;
            mult = add(s, mult, *g);
        }
        if (ok && oriented_dist_bounded(s, *g, a, radius).exceeds())
            return *g;
    }
}

} // namespace invnorm
