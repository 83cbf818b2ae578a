#pragma once

// Katětov functions over induced metrics and their realization by far
// group elements.

#include "invnorm/cayley.hpp"
#include "invnorm/norm.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace invnorm {

/// Values of a one-point extension profile, keyed by base point.
using KatetovFn = std::map<GroupElement, Rational>;

struct KatetovViolation {
    enum class Kind { Missing, NonPositive, Lipschitz, Triangle };
    Kind kind;
    GroupElement x;
    GroupElement y;

    std::string describe(const GroupScheme& s, const KatetovFn& f, const InducedMetric& d) const {
        const std::string xs = format_element(s, x);
        const std::string ys = format_element(s, y);
        switch (kind) {
        case Kind::Missing:
            return "f undefined at " + xs;
        case Kind::NonPositive:
            return "f(" + xs + ") = " + to_string(f.at(x)) + " is not positive";
        case Kind::Lipschitz:
            return "|f(" + xs + ") - f(" + ys + ")| = " + to_string(abs(f.at(x) - f.at(y))) + " > d = " +
                   to_string(d.dist(x, y));
        case Kind::Triangle:
            return "f(" + xs + ") + f(" + ys + ") = " + to_string(f.at(x) + f.at(y)) + " < d = " +
                   to_string(d.dist(x, y));
        }
        return {};
    }
};

/// |f(x) - f(y)| <= d(x,y) <= f(x) + f(y) on all pairs, f > 0.
inline std::optional<KatetovViolation> validate_katetov(const KatetovFn& f, const InducedMetric& d) {
    using Kind = KatetovViolation::Kind;
    for (const auto& p : d.points) {
        auto it = f.find(p);
        if (it == f.end())
            return KatetovViolation{Kind::Missing, p, p};
        if (it->second <= 0)
            return KatetovViolation{Kind::NonPositive, p, p};
    }
    const std::size_t n = d.points.size();
    std::vector<const Rational*> fv(n);
    for (std::size_t i = 0; i < n; ++i)
        fv[i] = &f.at(d.points[i]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (abs(*fv[i] - *fv[j]) > d.d[i][j])
                return KatetovViolation{Kind::Lipschitz, d.points[i], d.points[j]};
            if (d.d[i][j] > *fv[i] + *fv[j])
                return KatetovViolation{Kind::Triangle, d.points[i], d.points[j]};
        }
    return std::nullopt;
}

class InvalidKatetov : public std::invalid_argument {
public:
    InvalidKatetov(const KatetovViolation& v, const std::string& text)
        : std::invalid_argument("not a Katetov function: " + text), violation(v) {}
    KatetovViolation violation;
};

/// f(x) = min over b in B of f(b) + d(b, x), for every point x of `d`.
/// f must be Katětov on B with the restricted metric.
inline KatetovFn katetov_min_extension(const KatetovFn& f, const InducedMetric& d) {
    std::vector<GroupElement> base;
    for (const auto& [b, v] : f)
        base.push_back(b);
    const InducedMetric on_base = d.restricted(base);
    if (auto bad = validate_katetov(f, on_base))
        throw InvalidKatetov(*bad, bad->describe(d.scheme, f, on_base));
    KatetovFn out;
    for (const auto& x : d.points) {
        std::optional<Rational> best;
        for (const auto& [b, v] : f) {
            Rational c = v + d.dist(b, x);
            if (!best || c < *best)
                best = std::move(c);
        }
        if (!best)
            throw std::invalid_argument("katetov_min_extension: empty base");
        out.emplace(x, *best);
    }
    for (const auto& [b, v] : f)
        if (out.at(b) != v)
            throw std::logic_error("katetov_min_extension changed a base value: base metric not restricted from F");
    if (auto bad = validate_katetov(out, d))
        throw std::logic_error("katetov_min_extension produced an invalid function: " +
                               bad->describe(d.scheme, out, d));
    return out;
}

class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The quantities of the realization hypothesis.
struct RealizationBounds {
    Rational m;
    Rational M;
    std::size_t radius; ///< ⌈2M/m⌉
};

/// m = min(least nonzero table value, least f value), M = max(largest table
/// value, largest f value), over a table already holding Ā.
inline RealizationBounds realization_bounds(const PartialNorm& closed, const KatetovFn& f) {
    std::optional<Rational> m = closed.min_positive();
    Rational big = closed.max_value();
    for (const auto& [a, v] : f) {
        if (!m || v < *m)
            m = v;
        big = std::max(big, v);
    }
    if (!m)
        throw std::invalid_argument("realization bounds: empty data");
    const Integer r = ceil(Rational(2 * big / *m));
    return {*m, big, static_cast<std::size_t>(r.get_ui())};
}

/// Core of the realization step over a table `closed` whose domain is
/// exactly Ā = {a - b : a, b in base}. Adds ±(g - a) -> f(a) for a in base.
/// The distance hypothesis is certified against Ā = {a - b : a, b in base};
/// the result is validated unless `validate` is false.
inline PartialNorm realize_over_closed(const PartialNorm& closed, const std::vector<GroupElement>& base,
                                       const KatetovFn& f, const GroupElement& g, bool validate = true) {
    const GroupScheme& s = closed.scheme();
    std::vector<GroupElement> diffs;
    for (const auto& a : base)
        for (const auto& b : base)
            diffs.push_back(sub(s, a, b));
    const SymSet abar = SymSet::closure_of(s, diffs);
    if (closed.size() != abar.size() || !std::all_of(abar.begin(), abar.end(), [&](const GroupElement& x) {
            return closed.contains(x);
        }))
        throw std::invalid_argument("realization table must have domain exactly A-bar");
    const RealizationBounds rb = realization_bounds(closed, f);
    if (abar.contains(g))
        throw PreconditionError("realization needs g outside A-bar; " + format_element(s, g) + " lies in it");
    const DistResult dr = oriented_dist_bounded(s, g, abar, rb.radius);
    if (!dr.exceeds())
        throw PreconditionError("distance precondition fails: dist(" + format_element(s, g) + ", A-bar) = " +
                                std::to_string(*dr.dist) + " <= " + std::to_string(rb.radius) + " = ceil(2M/m)");
    PartialNorm out = closed;
    for (const auto& a : base) {
        const GroupElement x = sub(s, g, a);
        const Rational& v = f.at(a);
        if (auto old = out.value(x); old && *old != v)
            throw std::logic_error("realization target " + format_element(s, x) + " already in the table");
        out.assign_pm(x, v);
    }
    if (validate) {
        if (auto bad = validate_partial_norm(out))
            throw std::logic_error("realized table fails validation (contradicts the realization proposition): " +
                                   bad->describe(s));
    }
    return out;
}

/// λ on A, f Katětov over d_A, g far from Ā: the partial norm on
/// Ā ∪ {±(g - a)} with λ̄ on Ā and λ(g - a) = f(a).
inline PartialNorm katetov_realize(const PartialNorm& lambda, const KatetovFn& f, const GroupElement& g) {
    const GroupScheme& s = lambda.scheme();
    const SymSet a = lambda.domain();
    const PartialNorm closed = greatest_extension(lambda, diff_closure(s, a));
    const InducedMetric d = metric_from_table(closed, a.elements());
    if (auto bad = validate_katetov(f, d))
        throw InvalidKatetov(*bad, bad->describe(s, f, d));
    return realize_over_closed(closed, a.elements(), f, g);
}

/// Scans candidate elements (in the given order, at most `search_bound` of
/// them) for g with |f(a) - λ(g - a)| < ε on every a in f's base; ε = 0
/// asks for exact equality. Candidates whose differences leave the table are
/// skipped. nullopt means "not found within the bound".
inline std::optional<GroupElement> check_one_point_extension(const PartialNorm& table, const KatetovFn& f,
                                                             const Rational& eps, std::size_t search_bound,
                                                             const std::vector<GroupElement>& candidates) {
    const GroupScheme& s = table.scheme();
    std::size_t seen = 0;
    for (const auto& g : candidates) {
        if (seen++ >= search_bound)
            break;
        bool ok = true;
        for (const auto& [a, v] : f) {
            auto val = table.value(sub(s, g, a));
            if (!val) {
                ok = false;
                break;
            }
            const Rational gap = abs(v - *val);
            if (eps == 0 ? gap != 0 : gap >= eps) {
                ok = false;
                break;
            }
        }
        if (ok)
            return g;
    }
    return std::nullopt;
}

/// Same, with the table's own domain as candidate set.
inline std::optional<GroupElement> check_one_point_extension(const PartialNorm& table, const KatetovFn& f,
                                                             const Rational& eps, std::size_t search_bound) {
    return check_one_point_extension(table, f, eps, search_bound, table.elements());
}

// JSON: {"scheme": s, "base_metric": label, "values": [[element, "p/q"], ...]}

inline nlohmann::json katetov_to_json(const GroupScheme& s, const KatetovFn& f, const std::string& base_metric) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& [a, v] : f)
        vals.push_back(nlohmann::json::array({element_to_json(a), to_string(v)}));
    return {{"scheme", s.to_string()}, {"base_metric", base_metric}, {"values", std::move(vals)}};
}

inline KatetovFn katetov_from_json(const GroupScheme& s, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("values") || !j.at("values").is_array())
        throw ParseError("Katetov JSON needs a 'values' array");
    KatetovFn f;
    for (const auto& e : j.at("values")) {
        if (!e.is_array() || e.size() != 2 || !e[1].is_string())
            throw ParseError("each Katetov entry must be [element, \"p/q\"]");
        f[element_from_json(s, e[0])] = parse_rational(e[1].get<std::string>());
    }
    return f;
}

} // namespace invnorm
