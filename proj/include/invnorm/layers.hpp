#pragma once

// Point tables: partial norms whose domain is exactly P - P for a finite
// point set P containing 0, read as the metric d(a, b) = λ(a - b) on P.
//
// A point h is peelable when, with P_0 = P \ {h}, D_0 = P_0 - P_0, M and m
// the largest and least nonzero values on P - P and R = ⌈2M/m⌉, h passes a
// distance certificate dist(h, D_0) > R: a box certificate on an integer
// coordinate, or a torsion coordinate where h has order > R+1 coprime to the
// order of P_0's projection (in particular, one on which P_0 vanishes).
// If d is a metric on P then d(h, ·) is Katětov on P_0, and the realization
// proposition makes the table valid as soon as its restriction to D_0 is.
// Peeling repeats until no point qualifies; the remaining core is checked by
// exhaustive search. The same layering gives exact least costs: inside a
// layer's reach every short decomposition carries a fixed net number of h
// terms, and opposite pairs collapse into D_0 terms without extra cost.

#include "invnorm/norm.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace invnorm {

struct PeelLayer {
    GroupElement point;
    std::size_t coord = 0;
    bool fresh = false;           ///< every other remaining point vanishes at coord
    Integer spread = 0;           ///< integer coordinate: max - min over the other points
    std::optional<Integer> order; ///< torsion coordinate: order of the point's value
    Integer others_order = 1;     ///< torsion coordinate: order of the other points' projection, coprime to order
    Rational m = 0;
    Rational M = 0;
    std::size_t radius = 0;       ///< ⌈2M/m⌉
    std::optional<Integer> reach; ///< decompositions of at most this many terms have a fixed net count; nullopt = any
};

struct PointTableLayers {
    std::vector<GroupElement> core;  ///< sorted
    std::vector<PeelLayer> layers;   ///< innermost first; the last entry was peeled first
};

namespace detail {

/// Certificate for peeling h from `others` at the given radius, choosing the
/// coordinate with the longest reach.
inline std::optional<PeelLayer> peel_certificate(const GroupScheme& s, const GroupElement& h,
                                                 const std::vector<GroupElement>& others, std::size_t radius) {
    std::optional<PeelLayer> best;
    auto better = [&](const PeelLayer& c) {
        if (!best)
            return true;
        if (!c.reach)
            return best->reach.has_value();
        return best->reach && *c.reach > *best->reach;
    };
    const Integer need = static_cast<unsigned long>(radius + 1);
    for (const auto& [c, v] : h.entries()) {
        const CoordKind k = s.kind(c);
        PeelLayer cand;
        cand.point = h;
        cand.coord = c;
        cand.radius = radius;
        if (k.type == CoordType::Integer) {
            std::optional<Integer> lo, hi;
            for (const auto& a : others) {
                const Integer x = a.at(c).get_num();
                if (!lo || x < *lo)
                    lo = x;
                if (!hi || x > *hi)
                    hi = x;
            }
            cand.spread = lo ? Integer(*hi - *lo) : Integer(0);
            cand.fresh = cand.spread == 0 && (!lo || *lo == 0);
            const Integer hc = abs(v.get_num());
            if (cand.fresh) {
                cand.reach = std::nullopt;
            } else {
                if (!(hc > need * cand.spread))
                    continue;
                // |x_c - k h_c| <= l·spread < |h_c| / 2
                cand.reach = cand.spread == 0 ? Integer(hc) : Integer((hc - 1) / (2 * cand.spread));
            }
        } else {
            const Integer o = *coord_order(s, c, v);
            const Integer l = projection_order(s, c, others);
            Integer gg;
            mpz_gcd(gg.get_mpz_t(), o.get_mpz_t(), l.get_mpz_t());
            if (gg != 1 || !(o > need))
                continue;
            cand.fresh = l == 1;
            cand.order = o;
            cand.others_order = l;
            cand.reach = Integer((o - 1) / 2);
        }
        if (better(cand))
            best = std::move(cand);
    }
    return best;
}

} // namespace detail

/// Peels points greedily (largest first in canonical order) while some
/// remaining point carries a certificate at the scale of the remaining set.
/// The table must be a point table for `points`.
inline PointTableLayers peel_point_table(const PartialNorm& table, std::vector<GroupElement> points) {
    const GroupScheme& s = table.scheme();
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    const std::size_t n = points.size();
    std::vector<std::vector<Rational>> d(n, std::vector<Rational>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d[i][j] = table.at(sub(s, points[i], points[j]));
    std::vector<bool> alive(n, true);
    std::size_t left = n;
    std::vector<PeelLayer> peeled;
    while (left > 1) {
        std::optional<Rational> m;
        Rational big = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (alive[i] && alive[j]) {
                    if (!m || d[i][j] < *m)
                        m = d[i][j];
                    big = std::max(big, d[i][j]);
                }
        const std::size_t radius = ceil(Rational(2 * big / *m)).get_ui();
        bool done = false;
        for (std::size_t t = n; t-- > 0 && !done;) {
            if (!alive[t] || points[t].is_zero())
                continue;
            std::vector<GroupElement> others;
            for (std::size_t i = 0; i < n; ++i)
                if (alive[i] && i != t)
                    others.push_back(points[i]);
            if (auto layer = detail::peel_certificate(s, points[t], others, radius)) {
                layer->m = *m;
                layer->M = big;
                peeled.push_back(std::move(*layer));
                alive[t] = false;
                --left;
                done = true;
            }
        }
        if (!done)
            break;
    }
    PointTableLayers out;
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i])
            out.core.push_back(points[i]);
    out.layers.assign(peeled.rbegin(), peeled.rend());
    return out;
}

/// Domain equals P - P exactly and 0 is a point; otherwise a description.
inline std::optional<std::string> point_table_shape(const PartialNorm& table, const std::vector<GroupElement>& points) {
    const GroupScheme& s = table.scheme();
    if (std::find(points.begin(), points.end(), GroupElement()) == points.end())
        return "0 is not a point";
    std::vector<GroupElement> diffs;
    diffs.reserve(points.size() * points.size());
    for (const auto& a : points)
        for (const auto& b : points)
            diffs.push_back(sub(s, a, b));
    std::sort(diffs.begin(), diffs.end());
    diffs.erase(std::unique(diffs.begin(), diffs.end()), diffs.end());
    if (diffs.size() != table.size())
        return "domain has " + std::to_string(table.size()) + " elements but P - P has " +
               std::to_string(diffs.size());
    for (const auto& x : diffs)
        if (!table.contains(x))
            return "P - P element " + format_element(s, x) + " missing from the domain";
    return std::nullopt;
}

struct PointTableCheck {
    std::optional<NormViolation> violation;
    std::optional<std::string> shape_problem;
    PointTableLayers layers;
    std::size_t core_states = 0;

    bool ok() const { return !violation && !shape_problem; }
};

/// Exact validity decision for a point table: pointwise axioms, the triangle
/// inequality on P, the peeling certificates, and exhaustive subadditivity on
/// the core table.
inline PointTableCheck validate_point_table(const PartialNorm& table, const std::vector<GroupElement>& points) {
    using Kind = NormViolation::Kind;
    const GroupScheme& s = table.scheme();
    PointTableCheck out;
    if ((out.violation = check_pointwise_axioms(table)))
        return out;
    if ((out.shape_problem = point_table_shape(table, points)))
        return out;
    std::vector<GroupElement> pts = points;
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    std::vector<std::vector<const Rational*>> d(n, std::vector<const Rational*>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d[i][j] = &table.at(sub(s, pts[i], pts[j]));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k)
                continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || j == k)
                    continue;
                const Rational via = *d[i][j] + *d[j][k];
                if (via < *d[i][k]) {
                    out.violation = NormViolation{Kind::Subadditivity, sub(s, pts[i], pts[k]), *d[i][k], via,
                                                  {sub(s, pts[i], pts[j]), sub(s, pts[j], pts[k])}};
                    return out;
                }
            }
        }
    out.layers = peel_point_table(table, pts);
    std::vector<GroupElement> core_diffs;
    for (const auto& a : out.layers.core)
        for (const auto& b : out.layers.core)
            core_diffs.push_back(sub(s, a, b));
    const PartialNorm core = table.restricted(core_diffs);
    if (auto bad = validate_partial_norm(core))
        out.violation = bad;
    out.core_states = core.size();
    return out;
}

class CostUncertified : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact least decomposition costs over a valid point table, through its
/// peeling layers. cost() throws CostUncertified when a value falls beyond a
/// layer's reach.
class LayeredCost {
public:
    LayeredCost(const PartialNorm& table, const std::vector<GroupElement>& points)
        : scheme_(table.scheme()), layers_(peel_point_table(table, points)) {
        std::vector<GroupElement> inner = layers_.core;
        for (const auto& l : layers_.layers) {
            Layer L{l, {}, std::nullopt};
            for (const auto& a : inner)
                L.base.emplace_back(a, table.at(sub(scheme_, l.point, a)));
            if (l.reach)
                L.threshold = l.m * Rational(*l.reach + 1);
            stack_.push_back(std::move(L));
            inner.push_back(l.point);
        }
        std::vector<GroupElement> core_diffs;
        for (const auto& a : layers_.core)
            for (const auto& b : layers_.core)
                core_diffs.push_back(sub(scheme_, a, b));
        core_ = std::make_unique<CostOracle>(table.restricted(core_diffs));
    }

    const PointTableLayers& layers() const { return layers_; }

    /// Exact least cost, nullopt when target is outside the generated subgroup.
    std::optional<Rational> cost(const GroupElement& target) { return sp(stack_.size(), target, std::nullopt); }

private:
    struct Layer {
        PeelLayer info;
        std::vector<std::pair<GroupElement, Rational>> base;
        std::optional<Rational> threshold;
    };

    static std::optional<Rational> min_bound(const std::optional<Rational>& a, const std::optional<Rational>& b) {
        if (!a)
            return b;
        if (!b)
            return a;
        return std::min(*a, *b);
    }

    // Net count of layer terms in x, or nullopt when x cannot lie in the
    // layer's subgroup.
    std::optional<Integer> net_count(const Layer& L, const GroupElement& x) const {
        Rational hc = L.info.point.at(L.info.coord);
        Rational xc = x.at(L.info.coord);
        if (!L.info.order) {
            const Rational q = xc / hc;
            if (L.info.fresh)
                return q.get_den() == 1 ? std::optional<Integer>(q.get_num()) : std::nullopt;
            return floor(Rational(q + Rational(1, 2)));
        }
        // k·hc = xc modulo the projection of the inner subgroup, of order l
        // coprime to o: multiplying by l kills that projection.
        const Integer& o = *L.info.order;
        const Integer& l = L.info.others_order;
        const CoordKind kind = scheme_.kind(L.info.coord);
        Integer a, b;
        if (kind.type == CoordType::RationalModOne) {
            Rational hl = hc * Rational(l), xl = xc * Rational(l);
            hl -= Rational(floor(hl));
            xl -= Rational(floor(xl));
            hc = hl;
            xc = xl;
        } else {
            Integer hl = Integer(hc.get_num() * l) % kind.modulus, xl = Integer(xc.get_num() * l) % kind.modulus;
            if (hl < 0)
                hl += kind.modulus;
            if (xl < 0)
                xl += kind.modulus;
            hc = Rational(hl);
            xc = Rational(xl);
        }
        if (kind.type == CoordType::RationalModOne) {
            // hc = p/o; xc must be t/o.
            const Rational t = xc * Rational(o);
            if (t.get_den() != 1)
                return std::nullopt;
            a = Rational(hc * Rational(o)).get_num();
            b = t.get_num();
        } else {
            const Integer step = kind.modulus / o; // hc = step·u with u a unit mod o
            if (xc.get_num() % step != 0)
                return std::nullopt;
            a = hc.get_num() / step;
            b = xc.get_num() / step;
        }
        Integer inv;
        if (!mpz_invert(inv.get_mpz_t(), a.get_mpz_t(), o.get_mpz_t()))
            throw std::logic_error("layer coordinate value is not a unit modulo its order");
        Integer k = (b * inv) % o;
        if (k < 0)
            k += o;
        if (2 * k > o)
            k -= o;
        return k;
    }

    std::optional<Rational> sp(std::size_t i, const GroupElement& x, const std::optional<Rational>& bound) {
        if (bound && *bound <= 0)
            return std::nullopt;
        if (i == 0)
            return bound ? core_->cost_below(x, *bound) : core_->cost(x);
        const auto key = std::make_pair(i, x);
        if (unreachable_.count(key))
            return std::nullopt;
        if (auto it = exact_.find(key); it != exact_.end()) {
            if (bound && !(it->second < *bound))
                return std::nullopt;
            return it->second;
        }
        if (auto it = lower_.find(key); it != lower_.end() && bound && it->second >= *bound)
            return std::nullopt;
        const Layer& L = stack_[i - 1];
        const std::optional<Rational> eff = min_bound(bound, L.threshold);
        const auto k = net_count(L, x);
        if (!k) {
            unreachable_.insert(key);
            return std::nullopt;
        }
        std::optional<Rational> best;
        if (*k == 0) {
            best = sp(i - 1, x, eff);
        } else {
            const bool up = *k > 0;
            for (const auto& [a, fa] : L.base) {
                const std::optional<Rational> rest_bound =
                    eff ? std::optional<Rational>(Rational(*eff - fa)) : std::nullopt;
                if (rest_bound && *rest_bound <= 0)
                    continue;
                const GroupElement term = sub(scheme_, L.info.point, a);
                const GroupElement y = up ? sub(scheme_, x, term) : add(scheme_, x, term);
                const std::optional<Rational> cap =
                    best ? min_bound(rest_bound, Rational(*best - fa)) : rest_bound;
                if (auto r = sp(i, y, cap)) {
                    const Rational total = fa + *r;
                    if (!best || total < *best)
                        best = total;
                }
            }
        }
        if (best) {
            exact_[key] = *best;
            if (bound && !(*best < *bound))
                return std::nullopt;
            return best;
        }
        if (!eff) {
            unreachable_.insert(key);
            return std::nullopt;
        }
        // sp >= eff. Certified only when eff is the caller's bound.
        if (bound && *eff == *bound) {
            auto& lb = lower_[key];
            lb = std::max(lb, *eff);
            return std::nullopt;
        }
        throw CostUncertified("least cost of " + format_element(scheme_, x) + " lies beyond the reach of layer " +
                              format_element(scheme_, L.info.point));
    }

    GroupScheme scheme_;
    PointTableLayers layers_;
    std::vector<Layer> stack_;
    std::unique_ptr<CostOracle> core_;
    std::map<std::pair<std::size_t, GroupElement>, Rational> exact_;
    std::map<std::pair<std::size_t, GroupElement>, Rational> lower_;
    std::set<std::pair<std::size_t, GroupElement>> unreachable_;
};

} // namespace invnorm
