#pragma once

// Partial norms on finite symmetric sets and their greatest extensions.
//
// The greatest extension of a table λ on D evaluates an element b as the
// least total weight of a path 0 -> b in the Cayley graph of <D> whose edges
// +a carry weight λ(a). CostOracle runs one incremental Dijkstra search per
// table, so repeated queries share the explored ball.

#include "invnorm/lattice.hpp"
#include "invnorm/symset.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace invnorm {

class PartialNorm {
public:
    using Table = std::map<GroupElement, Rational>;

    PartialNorm() = default;
    explicit PartialNorm(GroupScheme scheme) : scheme_(std::move(scheme)) { table_.emplace(GroupElement(), Rational(0)); }

    /// Table from (element, value) pairs; each value is also assigned to the
    /// negated element. Conflicting values throw.
    static PartialNorm symmetric(GroupScheme scheme, const std::vector<std::pair<GroupElement, Rational>>& pairs) {
        PartialNorm p(std::move(scheme));
        for (const auto& [g, v] : pairs)
            p.assign_pm(g, v);
        return p;
    }

    /// Table taken verbatim (may violate any axiom); validate reports problems.
    static PartialNorm raw(GroupScheme scheme, Table table) {
        PartialNorm p;
        p.scheme_ = std::move(scheme);
        p.table_ = std::move(table);
        return p;
    }

    const GroupScheme& scheme() const { return scheme_; }
    const Table& table() const { return table_; }
    std::size_t size() const { return table_.size(); }

    std::optional<Rational> value(const GroupElement& g) const {
        auto it = table_.find(g);
        if (it == table_.end())
            return std::nullopt;
        return it->second;
    }

    bool contains(const GroupElement& g) const { return table_.count(g) != 0; }

    /// Value at a domain element; throws std::out_of_range otherwise.
    const Rational& at(const GroupElement& g) const {
        auto it = table_.find(g);
        if (it == table_.end())
            throw std::out_of_range("element " + format_element(scheme_, g) + " not in norm domain");
        return it->second;
    }

    void set(const GroupElement& g, const Rational& v) { table_[g] = v; }

    /// Sets g and -g to v; throws if either already holds a different value.
    void assign_pm(const GroupElement& g, const Rational& v) {
        for (const GroupElement& e : {g, neg(scheme_, g)}) {
            auto [it, inserted] = table_.try_emplace(e, v);
            if (!inserted && it->second != v)
                throw std::invalid_argument("conflicting values for " + format_element(scheme_, e) + ": " +
                                            to_string(it->second) + " vs " + to_string(v));
        }
    }

    std::vector<GroupElement> elements() const {
        std::vector<GroupElement> out;
        out.reserve(table_.size());
        for (const auto& [g, v] : table_)
            out.push_back(g);
        return out;
    }

    /// Domain as a SymSet; throws if the table is not symmetric with 0.
    SymSet domain() const { return SymSet::checked(scheme_, elements()); }

    /// Least positive value (nullopt on {0}).
    std::optional<Rational> min_positive() const {
        std::optional<Rational> best;
        for (const auto& [g, v] : table_)
            if (v > 0 && (!best || v < *best))
                best = v;
        return best;
    }

    Rational max_value() const {
        Rational best = 0;
        for (const auto& [g, v] : table_)
            best = std::max(best, v);
        return best;
    }

    /// Restriction to the elements of `keep` that lie in the domain.
    PartialNorm restricted(const std::vector<GroupElement>& keep) const {
        Table t;
        for (const auto& g : keep)
            if (auto it = table_.find(g); it != table_.end())
                t.emplace(g, it->second);
        return raw(scheme_, std::move(t));
    }

    friend bool operator==(const PartialNorm& a, const PartialNorm& b) {
        return a.scheme_ == b.scheme_ && a.table_ == b.table_;
    }

private:
    GroupScheme scheme_;
    Table table_;
};

// ---------------------------------------------------------------------------

/// Incremental Dijkstra on the weighted Cayley graph of a table.
class CostOracle {
public:
    explicit CostOracle(const PartialNorm& lambda) : scheme_(lambda.scheme()) {
        for (const auto& [g, v] : lambda.table())
            if (!g.is_zero()) {
                gens_.push_back(g);
                weights_.push_back(v);
            }
        add_state(GroupElement(), Rational(0), npos_, npos_);
    }

    const std::vector<GroupElement>& generators() const { return gens_; }

    /// Exact least cost of a decomposition of `target`, or nullopt when
    /// target is outside the generated subgroup.
    std::optional<Rational> cost(const GroupElement& target) {
        if (auto id = settled_id(target))
            return dist_[*id];
        if (!reachable(target))
            return std::nullopt;
        expand([&] { return settled_id(target).has_value(); }, std::nullopt);
        return dist_[*settled_id(target)];
    }

    /// Least cost if it is strictly below `bound`, otherwise nullopt. Only
    /// the ball of radius < bound is explored.
    std::optional<Rational> cost_below(const GroupElement& target, const Rational& bound) {
        if (auto id = settled_id(target))
            return dist_[*id] < bound ? std::optional<Rational>(dist_[*id]) : std::nullopt;
        expand([&] { return settled_id(target).has_value(); }, bound);
        if (auto id = settled_id(target); id && dist_[*id] < bound)
            return dist_[*id];
        return std::nullopt;
    }

    /// Generators along a least-cost path to a settled target, in path order.
    std::vector<GroupElement> witness(const GroupElement& target) const {
        auto id = settled_id(target);
        if (!id)
            throw std::logic_error("witness requested for an unsettled element");
        std::vector<GroupElement> path;
        for (std::size_t s = *id; parent_[s] != npos_; s = parent_[s])
            path.push_back(gens_[via_[s]]);
        std::reverse(path.begin(), path.end());
        return path;
    }

    std::size_t explored() const { return elems_.size(); }

private:
    static constexpr std::size_t npos_ = static_cast<std::size_t>(-1);

    struct QueueItem {
        Rational cost;
        std::size_t id;
        bool operator>(const QueueItem& o) const {
            const int c = cmp(cost, o.cost);
            return c > 0 || (c == 0 && id > o.id);
        }
    };

    bool reachable(const GroupElement& target) {
        auto it = reach_cache_.find(target);
        if (it != reach_cache_.end())
            return it->second;
        const bool r = represent_in(scheme_, target, gens_).has_value();
        reach_cache_.emplace(target, r);
        return r;
    }

    std::optional<std::size_t> settled_id(const GroupElement& g) const {
        auto it = index_.find(g);
        if (it == index_.end() || !settled_[it->second])
            return std::nullopt;
        return it->second;
    }

    std::size_t add_state(GroupElement g, Rational d, std::size_t parent, std::size_t via) {
        const std::size_t id = elems_.size();
        index_.emplace(g, id);
        elems_.push_back(std::move(g));
        dist_.push_back(d);
        parent_.push_back(parent);
        via_.push_back(via);
        settled_.push_back(false);
        queue_.push({std::move(d), id});
        return id;
    }

    // Settles states in cost order until `done()` holds, the queue empties, or
    // the next cost reaches `bound`.
    void expand(const std::function<bool()>& done, const std::optional<Rational>& bound) {
        while (!done()) {
            if (queue_.empty())
                return;
            const QueueItem top = queue_.top();
            if (bound && top.cost >= *bound)
                return;
            queue_.pop();
            if (settled_[top.id] || top.cost != dist_[top.id])
                continue;
            settled_[top.id] = true;
            for (std::size_t k = 0; k < gens_.size(); ++k) {
                GroupElement next = add(scheme_, elems_[top.id], gens_[k]);
                Rational nd = dist_[top.id] + weights_[k];
                auto it = index_.find(next);
                if (it == index_.end()) {
                    add_state(std::move(next), std::move(nd), top.id, k);
                } else if (!settled_[it->second] && nd < dist_[it->second]) {
                    dist_[it->second] = nd;
                    parent_[it->second] = top.id;
                    via_[it->second] = k;
                    queue_.push({std::move(nd), it->second});
                }
            }
        }
    }

    GroupScheme scheme_;
    std::vector<GroupElement> gens_;
    std::vector<Rational> weights_;
    std::unordered_map<GroupElement, std::size_t, ElementHash> index_;
    std::unordered_map<GroupElement, bool, ElementHash> reach_cache_;
    std::vector<GroupElement> elems_;
    std::vector<Rational> dist_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> via_;
    std::vector<bool> settled_;
    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<QueueItem>> queue_;
};

/// Least decomposition cost of target over the table's nonzero elements;
/// nullopt stands for infinity (target outside the generated subgroup).
inline std::optional<Rational> decomposition_cost(const PartialNorm& lambda, const GroupElement& target) {
    CostOracle oracle(lambda);
    return oracle.cost(target);
}

// ---------------------------------------------------------------------------

struct NormViolation {
    enum class Kind { MissingZero, NonzeroAtZero, NonPositive, NotSymmetric, AsymmetricValue, Subadditivity };
    Kind kind;
    GroupElement element;
    Rational value = 0;                 // table value at element
    Rational witness_cost = 0;          // Subadditivity: cost of the witness
    std::vector<GroupElement> witness;  // Subadditivity: decomposition of element

    std::string describe(const GroupScheme& s) const {
        std::ostringstream os;
        const std::string e = format_element(s, element);
        switch (kind) {
        case Kind::MissingZero:
            os << "domain does not contain 0";
            break;
        case Kind::NonzeroAtZero:
            os << "value at 0 is " << to_string(value) << ", expected 0";
            break;
        case Kind::NonPositive:
            os << "value at " << e << " is " << to_string(value) << " (must be positive off 0)";
            break;
        case Kind::NotSymmetric:
            os << "domain contains " << e << " but not its negation";
            break;
        case Kind::AsymmetricValue:
            os << "symmetry: value at " << e << " is " << to_string(value) << " but value at its negation is "
               << to_string(witness_cost);
            break;
        case Kind::Subadditivity: {
            os << "subadditivity: " << e << " = ";
            for (std::size_t i = 0; i < witness.size(); ++i)
                os << (i ? " + " : "") << format_element(s, witness[i]);
            os << " costs " << to_string(witness_cost) << " < " << to_string(value);
            break;
        }
        }
        return os.str();
    }
};

/// Axioms 1-2: 0 -> 0, positive off 0, symmetric domain and values.
inline std::optional<NormViolation> check_pointwise_axioms(const PartialNorm& lambda) {
    using Kind = NormViolation::Kind;
    const GroupScheme& s = lambda.scheme();
    auto zero = lambda.value(GroupElement());
    if (!zero)
        return NormViolation{Kind::MissingZero, GroupElement(), 0, 0, {}};
    if (*zero != 0)
        return NormViolation{Kind::NonzeroAtZero, GroupElement(), *zero, 0, {}};
    for (const auto& [g, v] : lambda.table()) {
        if (g.is_zero())
            continue;
        if (v <= 0)
            return NormViolation{Kind::NonPositive, g, v, 0, {}};
        auto nv = lambda.value(neg(s, g));
        if (!nv)
            return NormViolation{Kind::NotSymmetric, g, v, 0, {}};
        if (*nv != v)
            return NormViolation{Kind::AsymmetricValue, g, v, *nv, {}};
    }
    return std::nullopt;
}

/// nullopt when all three axioms hold; otherwise the first violation found
/// (axioms 1-2 before 3; subadditivity failures for smaller values first).
inline std::optional<NormViolation> validate_partial_norm(const PartialNorm& lambda) {
    using Kind = NormViolation::Kind;
    if (auto bad = check_pointwise_axioms(lambda))
        return bad;
    std::vector<std::pair<Rational, GroupElement>> order;
    for (const auto& [g, v] : lambda.table())
        if (!g.is_zero())
            order.emplace_back(v, g);
    std::sort(order.begin(), order.end());
    CostOracle oracle(lambda);
    for (const auto& [v, g] : order) {
        if (auto c = oracle.cost_below(g, v))
            return NormViolation{Kind::Subadditivity, g, v, *c, oracle.witness(g)};
    }
    return std::nullopt;
}

class InvalidNorm : public std::runtime_error {
public:
    InvalidNorm(const NormViolation& v, const GroupScheme& s)
        : std::runtime_error("invalid partial norm: " + v.describe(s)), violation(v) {}
    NormViolation violation;
};

class OutsideSubgroup : public std::runtime_error {
public:
    OutsideSubgroup(const GroupElement& g, const GroupScheme& s)
        : std::runtime_error("infinite cost: " + format_element(s, g) + " is outside the subgroup generated by the domain"),
          element(g) {}
    GroupElement element;
};

/// Least-cost closure of an arbitrary positive symmetric table onto `targets`
/// (the table's own domain is always included). No validity requirement: on
/// its domain the result is the largest partial norm below the table.
inline PartialNorm cost_closure(const PartialNorm& table, const std::vector<GroupElement>& targets) {
    CostOracle oracle(table);
    PartialNorm out(table.scheme());
    auto put = [&](const GroupElement& b) {
        if (out.contains(b))
            return;
        auto c = oracle.cost(b);
        if (!c)
            throw OutsideSubgroup(b, table.scheme());
        out.set(b, *c);
    };
    for (const auto& [g, v] : table.table())
        put(g);
    for (const auto& b : targets)
        put(b);
    return out;
}

/// The greatest extension of a valid λ onto λ's domain ∪ B. Rejects invalid
/// input with the violation, and targets outside <domain> with the element.
inline PartialNorm greatest_extension(const PartialNorm& lambda, const std::vector<GroupElement>& b) {
    if (auto v = validate_partial_norm(lambda))
        throw InvalidNorm(*v, lambda.scheme());
    return cost_closure(lambda, b);
}

inline PartialNorm greatest_extension(const PartialNorm& lambda, const SymSet& b) {
    return greatest_extension(lambda, b.elements());
}

/// Greatest extension restricted to exactly the set B.
inline PartialNorm greatest_extension_on(const PartialNorm& lambda, const SymSet& b) {
    return greatest_extension(lambda, b).restricted(b.elements());
}

/// {a - b : a, b in A}.
inline SymSet diff_closure(const GroupScheme& s, const SymSet& a) {
    std::vector<GroupElement> out;
    out.reserve(a.size() * a.size());
    for (const auto& x : a)
        for (const auto& y : a)
            out.push_back(sub(s, x, y));
    return SymSet::closure_of(s, out);
}

// ---------------------------------------------------------------------------

struct InducedMetric {
    GroupScheme scheme;
    std::vector<GroupElement> points;
    std::vector<std::vector<Rational>> d;

    std::size_t index_of(const GroupElement& g) const {
        auto it = std::lower_bound(points.begin(), points.end(), g);
        if (it == points.end() || !(*it == g))
            throw std::out_of_range("point " + format_element(scheme, g) + " not in metric");
        return static_cast<std::size_t>(it - points.begin());
    }
    const Rational& dist(const GroupElement& a, const GroupElement& b) const { return d[index_of(a)][index_of(b)]; }

    InducedMetric restricted(std::vector<GroupElement> keep) const {
        std::sort(keep.begin(), keep.end());
        keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
        InducedMetric m{scheme, keep, {}};
        m.d.assign(keep.size(), std::vector<Rational>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i)
            for (std::size_t j = 0; j < keep.size(); ++j)
                m.d[i][j] = dist(keep[i], keep[j]);
        return m;
    }

    /// First failing metric axiom as text, or nullopt.
    std::optional<std::string> check_axioms() const {
        const std::size_t n = points.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if ((d[i][j] == 0) != (i == j))
                    return "zero pattern fails at (" + format_element(scheme, points[i]) + ", " +
                           format_element(scheme, points[j]) + ")";
                if (d[i][j] != d[j][i])
                    return "asymmetric at (" + format_element(scheme, points[i]) + ", " +
                           format_element(scheme, points[j]) + ")";
            }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (d[i][k] > d[i][j] + d[j][k])
                        return "triangle inequality fails for (" + format_element(scheme, points[i]) + ", " +
                               format_element(scheme, points[j]) + ", " + format_element(scheme, points[k]) + ")";
        return std::nullopt;
    }

    /// Header row of element serializations, entries exact rationals.
    std::string to_csv() const {
        std::ostringstream os;
        os << "point";
        for (const auto& p : points)
            os << ',' << format_element(scheme, p);
        os << '\n';
        for (std::size_t i = 0; i < points.size(); ++i) {
            os << format_element(scheme, points[i]);
            for (std::size_t j = 0; j < points.size(); ++j)
                os << ',' << to_string(d[i][j]);
            os << '\n';
        }
        return os.str();
    }
};

/// Metric d(a,b) = λ(a - b) on `points`, read from a table that already holds
/// every difference.
inline InducedMetric metric_from_table(const PartialNorm& table, std::vector<GroupElement> points) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    InducedMetric m{table.scheme(), points, {}};
    m.d.assign(points.size(), std::vector<Rational>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < points.size(); ++j)
            m.d[i][j] = table.at(sub(table.scheme(), points[i], points[j]));
    return m;
}

/// d_A(a,b) = greatest extension of λ evaluated at a - b, over A = domain(λ).
inline InducedMetric induced_metric(const PartialNorm& lambda) {
    const SymSet dom = lambda.domain();
    const PartialNorm ext = greatest_extension(lambda, diff_closure(lambda.scheme(), dom));
    InducedMetric m = metric_from_table(ext, dom.elements());
    if (auto bad = m.check_axioms())
        throw std::logic_error("induced metric: " + *bad);
    return m;
}

// ---------------------------------------------------------------------------

/// Rational perturbation ρ_R of a valid rational table with
/// 0 <= ρ_R - ρ < ε. Distinct nonzero values v_1 > ... > v_K are shifted by
/// s_k in the open interval ((k-1)δ/K, kδ/K), δ = min(ε, least gap between
/// distinct values); s_k is the simplest rational there, so its denominator
/// is at most ⌊K/δ⌋ + 1.
inline PartialNorm rationalize(const PartialNorm& rho, const Rational& eps) {
    if (eps <= 0)
        throw std::invalid_argument("rationalize: epsilon must be positive");
    std::vector<Rational> vals;
    for (const auto& [g, v] : rho.table())
        if (v != 0)
            vals.push_back(v);
    std::sort(vals.begin(), vals.end(), std::greater<>());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.empty())
        return rho;
    Rational delta = eps;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i)
        delta = std::min(delta, Rational(vals[i] - vals[i + 1]));
    const Rational k_total(static_cast<unsigned long>(vals.size()));
    std::map<Rational, Rational> shifted;
    for (std::size_t k = 1; k <= vals.size(); ++k) {
        const Rational lo = delta * Rational(static_cast<unsigned long>(k - 1)) / k_total;
        const Rational hi = delta * Rational(static_cast<unsigned long>(k)) / k_total;
        shifted.emplace(vals[k - 1], vals[k - 1] + simplest_between(lo, hi));
    }
    PartialNorm::Table t;
    for (const auto& [g, v] : rho.table())
        t.emplace(g, v == 0 ? Rational(0) : shifted.at(v));
    return PartialNorm::raw(rho.scheme(), std::move(t));
}

// ---------------------------------------------------------------------------
// JSON: {"scheme": s, "domain": [elements], "values": [[element, "p/q"], ...]}
// with one representative per ± pair (the smaller in element order).

inline nlohmann::json norm_to_json(const PartialNorm& lambda) {
    nlohmann::json j;
    j["scheme"] = lambda.scheme().to_string();
    nlohmann::json dom = nlohmann::json::array();
    nlohmann::json vals = nlohmann::json::array();
    const GroupScheme& s = lambda.scheme();
    for (const auto& [g, v] : lambda.table()) {
        dom.push_back(element_to_json(g));
        const GroupElement ng = neg(s, g);
        if (g.is_zero() || !(ng < g) || !lambda.contains(ng) || lambda.at(ng) != v)
            vals.push_back(nlohmann::json::array({element_to_json(g), to_string(v)}));
    }
    j["domain"] = std::move(dom);
    j["values"] = std::move(vals);
    return j;
}

/// Parses the JSON form. `scheme_override` is used when the document carries
/// no scheme. Values are assigned to both signs unless that would conflict
/// with an explicit entry (the raw table is kept for validation to judge).
inline PartialNorm norm_from_json(const nlohmann::json& j, const std::optional<GroupScheme>& scheme_override = {}) {
    if (!j.is_object() || !j.contains("values"))
        throw ParseError("partial norm JSON needs a 'values' array");
    GroupScheme s;
    if (scheme_override)
        s = *scheme_override;
    else if (j.contains("scheme"))
        s = GroupScheme::parse(j.at("scheme").get<std::string>());
    else
        throw ParseError("partial norm JSON has no 'scheme'");
    PartialNorm::Table explicit_vals;
    for (const auto& entry : j.at("values")) {
        if (!entry.is_array() || entry.size() != 2 || !entry[1].is_string())
            throw ParseError("each 'values' entry must be [element, \"p/q\"]");
        explicit_vals[element_from_json(s, entry[0])] = parse_rational(entry[1].get<std::string>());
    }
    PartialNorm::Table t = explicit_vals;
    for (const auto& [g, v] : explicit_vals)
        t.try_emplace(neg(s, g), v);
    if (j.contains("domain")) {
        for (const auto& e : j.at("domain")) {
            GroupElement g = element_from_json(s, e);
            if (!t.count(g)) {
                if (g.is_zero())
                    t.emplace(g, Rational(0));
                else
                    throw ParseError("domain element " + format_element(s, g) + " has no value");
            }
        }
    }
    t.try_emplace(GroupElement(), Rational(0));
    return PartialNorm::raw(s, std::move(t));
}

} // namespace invnorm
