#pragma once

// Finite stages of the inductive construction of a norm under which an
// unbounded countable abelian group is isometric to the rational Urysohn
// space.
//
// A stage keeps a list P of points (0, absorbed enumeration elements and
// realized elements) and a partial norm on D = P - P, so the metric
// d(a, b) = λ(a - b) on P is read directly from the table. Even steps absorb
// the next enumerated element as a point; odd steps realize the scheduled
// type over every isometric copy inside P.

#include "invnorm/enumerate.hpp"
#include "invnorm/katetov.hpp"
#include "invnorm/layers.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace invnorm {

inline constexpr int kSchemaVersion = 1;

/// Realized elements of infinite order are taken at distance
/// > kFarMargin·⌈2M/m⌉ so that later, larger stages can still peel them.
inline constexpr std::size_t kFarMargin = 1024;

/// A finite rational metric space A (distance matrix on 0..k-1) together with
/// a rational Katětov function f on it.
struct MetricType {
    std::vector<std::vector<Rational>> d;
    std::vector<Rational> f;

    std::size_t size() const { return f.size(); }

    std::optional<std::string> check() const {
        const std::size_t k = f.size();
        if (d.size() != k)
            return "distance matrix size differs from f";
        for (const auto& row : d)
            if (row.size() != k)
                return "distance matrix is not square";
        for (std::size_t i = 0; i < k; ++i) {
            if (f[i] <= 0)
                return "f must be positive";
            for (std::size_t j = 0; j < k; ++j) {
                if ((d[i][j] == 0) != (i == j) || d[i][j] < 0)
                    return "distance zero pattern";
                if (d[i][j] != d[j][i])
                    return "distance not symmetric";
                for (std::size_t l = 0; l < k; ++l)
                    if (d[i][l] > d[i][j] + d[j][l])
                        return "triangle inequality";
                if (abs(f[i] - f[j]) > d[i][j] || d[i][j] > f[i] + f[j])
                    return "Katetov condition";
            }
        }
        return std::nullopt;
    }

    /// max(points, largest denominator, ⌈largest distance⌉, ⌈largest f⌉).
    unsigned long height() const {
        Integer h = static_cast<unsigned long>(f.size());
        auto see = [&](const Rational& v) {
            h = std::max(h, Integer(v.get_den()));
            h = std::max(h, ceil(v));
        };
        for (const auto& v : f)
            see(v);
        for (const auto& row : d)
            for (const auto& v : row)
                see(v);
        return h.get_ui();
    }

    std::string label() const {
        std::string out = "A[";
        for (std::size_t i = 0; i < d.size(); ++i) {
            out += i ? ";" : "";
            for (std::size_t j = 0; j < d.size(); ++j)
                out += (j ? "," : "") + to_string(d[i][j]);
        }
        out += "] f[";
        for (std::size_t i = 0; i < f.size(); ++i)
            out += (i ? "," : "") + to_string(f[i]);
        return out + "]";
    }

    nlohmann::json to_json() const {
        nlohmann::json dj = nlohmann::json::array();
        for (const auto& row : d) {
            nlohmann::json r = nlohmann::json::array();
            for (const auto& v : row)
                r.push_back(to_string(v));
            dj.push_back(std::move(r));
        }
        nlohmann::json fj = nlohmann::json::array();
        for (const auto& v : f)
            fj.push_back(to_string(v));
        return {{"d", std::move(dj)}, {"f", std::move(fj)}};
    }

    static MetricType from_json(const nlohmann::json& j) {
        MetricType t;
        if (!j.is_object() || !j.contains("f") || !j.contains("d"))
            throw ParseError("metric type needs 'd' and 'f'");
        for (const auto& v : j.at("f"))
            t.f.push_back(parse_rational(v.is_string() ? v.get<std::string>() : v.dump()));
        for (const auto& row : j.at("d")) {
            std::vector<Rational> r;
            for (const auto& v : row)
                r.push_back(parse_rational(v.is_string() ? v.get<std::string>() : v.dump()));
            t.d.push_back(std::move(r));
        }
        if (auto bad = t.check())
            throw ParseError("invalid metric type " + t.label() + ": " + *bad);
        return t;
    }

    friend bool operator==(const MetricType& a, const MetricType& b) { return a.d == b.d && a.f == b.f; }
};

// ---------------------------------------------------------------------------
// Schedules

class TypeSchedule {
public:
    virtual ~TypeSchedule() = default;
    virtual MetricType at(std::size_t pos) = 0;
    virtual nlohmann::json describe() const = 0;
};

/// A user-supplied finite list, repeated cyclically.
class ExplicitSchedule : public TypeSchedule {
public:
    explicit ExplicitSchedule(std::vector<MetricType> types) : types_(std::move(types)) {
        if (types_.empty())
            throw std::invalid_argument("explicit schedule is empty");
        for (const auto& t : types_)
            if (auto bad = t.check())
                throw std::invalid_argument("schedule type " + t.label() + ": " + *bad);
    }
    MetricType at(std::size_t pos) override { return types_[pos % types_.size()]; }
    nlohmann::json describe() const override {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& t : types_)
            list.push_back(t.to_json());
        return {{"name", "explicit"}, {"types", std::move(list)}};
    }

private:
    std::vector<MetricType> types_;
};

namespace detail {

/// {p/q : 1 <= q <= h, 0 < p/q <= h}, ascending.
inline std::vector<Rational> height_values(unsigned long h) {
    std::vector<Rational> v;
    for (unsigned long q = 1; q <= h; ++q)
        for (unsigned long p = 1; p <= h * q; ++p)
            if (std::gcd(p, q) == 1)
                v.push_back(frac(p, q));
    std::sort(v.begin(), v.end());
    return v;
}

/// Lazily lists the types of height exactly h, up to isometry: more points
/// first; for each point count, distance tuples (pairs i<j in order) then f
/// tuples ascending in the value list; one labelling per type is kept, the
/// one with the least key (see canonical()).
class HeightLister {
public:
    explicit HeightLister(unsigned long h) : h_(h), vals_(height_values(h)), k_(h + 1) {}

    std::optional<MetricType> get(std::size_t idx) {
        while (cache_.size() <= idx && !done_)
            advance();
        if (idx < cache_.size())
            return cache_[idx];
        return std::nullopt;
    }

    std::optional<std::size_t> size_if_known() const { return done_ ? std::optional(cache_.size()) : std::nullopt; }

private:
    void advance() {
        for (;;) {
            if (!started_k_) {
                if (k_ == 1) {
                    done_ = true;
                    return;
                }
                --k_;
                pairs_ = k_ * (k_ - 1) / 2;
                di_.assign(pairs_, 0);
                fi_.assign(k_, 0);
                started_k_ = true;
                d_valid_ = false;
                first_ = true;
            }
            if (!step())
                continue;
            MetricType t = build();
            if (t.check() || t.height() != h_ || !canonical(t))
                continue;
            cache_.push_back(std::move(t));
            return;
        }
    }

    // Advances the (distance, f) odometer; false when point count k is done.
    bool step() {
        if (first_) {
            first_ = false;
            return true;
        }
        if (bump(fi_, vals_.size()))
            return true;
        fi_.assign(k_, 0);
        if (pairs_ > 0 && bump(di_, vals_.size()))
            return true;
        started_k_ = false;
        return false;
    }

    static bool bump(std::vector<std::size_t>& v, std::size_t base) {
        for (std::size_t i = v.size(); i > 0; --i) {
            if (++v[i - 1] < base)
                return true;
            v[i - 1] = 0;
        }
        return false;
    }

    MetricType build() const {
        MetricType t;
        t.d.assign(k_, std::vector<Rational>(k_, Rational(0)));
        std::size_t p = 0;
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = i + 1; j < k_; ++j, ++p)
                t.d[i][j] = t.d[j][i] = vals_[di_[p]];
        for (std::size_t i = 0; i < k_; ++i)
            t.f.push_back(vals_[fi_[i]]);
        return t;
    }

    // Labelling key: for each position j, the distances to positions 0..j-1
    // and then f. A type is kept when no relabelling gives a smaller key.
    // Backtracking compares prefixes; twins (same f, same distances to every
    // other point) are interchangeable, so one of each class is tried.
    static bool canonical(const MetricType& t) {
        const std::size_t k = t.size();
        std::vector<std::size_t> twin_of(k);
        for (std::size_t x = 0; x < k; ++x) {
            twin_of[x] = x;
            for (std::size_t y = 0; y < x && twin_of[x] == x; ++y) {
                bool same = t.f[x] == t.f[y] && t.d[x][y] > 0;
                for (std::size_t z = 0; z < k && same; ++z)
                    if (z != x && z != y)
                        same = t.d[x][z] == t.d[y][z];
                if (same)
                    twin_of[x] = twin_of[y];
            }
        }
        std::vector<std::size_t> perm;
        std::vector<bool> used(k, false);
        // -1: a smaller key exists; 0: only equal keys below this prefix.
        std::function<int()> rec = [&]() -> int {
            const std::size_t j = perm.size();
            if (j == k)
                return 0;
            std::vector<std::size_t> tried;
            for (std::size_t x = 0; x < k; ++x) {
                if (used[x] || std::find(tried.begin(), tried.end(), twin_of[x]) != tried.end())
                    continue;
                tried.push_back(twin_of[x]);
                int cmp = 0;
                for (std::size_t i = 0; i < j && cmp == 0; ++i) {
                    const Rational& a = t.d[perm[i]][x];
                    const Rational& b = t.d[i][j];
                    cmp = a < b ? -1 : (b < a ? 1 : 0);
                }
                if (cmp == 0)
                    cmp = t.f[x] < t.f[j] ? -1 : (t.f[j] < t.f[x] ? 1 : 0);
                if (cmp < 0)
                    return -1;
                if (cmp > 0)
                    continue;
                used[x] = true;
                perm.push_back(x);
                const int r = rec();
                perm.pop_back();
                used[x] = false;
                if (r < 0)
                    return -1;
            }
            return 0;
        };
        return rec() == 0;
    }

    unsigned long h_;
    std::vector<Rational> vals_;
    std::size_t k_;
    std::size_t pairs_ = 0;
    bool started_k_ = false;
    bool first_ = true;
    bool d_valid_ = false;
    bool done_ = false;
    std::vector<std::size_t> di_;
    std::vector<std::size_t> fi_;
    std::vector<MetricType> cache_;
};

} // namespace detail

/// The builtin stream. E_k lists the types of height exactly k: at most k
/// points, denominators at most k, distances and f values at most k, and not
/// of height k-1. Positions run along diagonals s = 1, 2, ...; diagonal s
/// visits rows k = s, s-1, ..., 1 and takes E_k[(s-k) mod |E_k|]. Every row is
/// visited once per diagonal and cycles through its list, so every type
/// recurs infinitely often.
class DefaultSchedule : public TypeSchedule {
public:
    MetricType at(std::size_t pos) override {
        std::size_t s = 1;
        while (pos >= s) {
            pos -= s;
            ++s;
        }
        const unsigned long k = static_cast<unsigned long>(s - pos);
        const std::size_t j = s - k;
        auto& lister = lister_for(k);
        if (auto t = lister.get(j))
            return *t;
        return *lister.get(j % *lister.size_if_known());
    }
    nlohmann::json describe() const override { return {{"name", "default"}}; }

private:
    detail::HeightLister& lister_for(unsigned long h) {
        while (listers_.size() < h)
            listers_.push_back(std::make_unique<detail::HeightLister>(listers_.size() + 1));
        return *listers_[h - 1];
    }
    std::vector<std::unique_ptr<detail::HeightLister>> listers_;
};

inline std::unique_ptr<TypeSchedule> schedule_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.value("name", "") == "default")
        return std::make_unique<DefaultSchedule>();
    const nlohmann::json& list = j.is_array() ? j : j.at("types");
    std::vector<MetricType> types;
    for (const auto& t : list)
        types.push_back(MetricType::from_json(t));
    return std::make_unique<ExplicitSchedule>(std::move(types));
}

// ---------------------------------------------------------------------------
// Stage state

struct LedgerEntry {
    std::size_t step = 0;
    std::string kind; // absorb-present | absorb-point | absorb-new | no-copy | realized
    std::optional<std::size_t> schedule_pos;
    std::optional<MetricType> type;
    std::vector<GroupElement> copy;      // image of type point i, in order
    std::optional<GroupElement> element; // absorbed / realized / realizing element
    std::optional<Rational> value;       // absorb-new: the assigned λ(±g)
    std::optional<std::string> rule;     // absorb-new: extension | multiple | one
    Rational m = 0;
    Rational M = 0;
    std::size_t radius = 0;
    std::size_t far_radius = 0;
    std::string certificate;

    nlohmann::json to_json(const GroupScheme& s) const {
        nlohmann::json j{{"step", step}, {"kind", kind}};
        if (schedule_pos)
            j["schedule_pos"] = *schedule_pos;
        if (type)
            j["type"] = type->to_json();
        if (!copy.empty()) {
            nlohmann::json c = nlohmann::json::array();
            for (const auto& x : copy)
                c.push_back(element_to_json(x));
            j["copy"] = std::move(c);
        }
        if (element) {
            j["element"] = element_to_json(*element);
            j["element_text"] = format_element(s, *element);
        }
        if (value)
            j["value"] = to_string(*value);
        if (rule)
            j["rule"] = *rule;
        if (kind == "realized") {
            j["m"] = to_string(m);
            j["M"] = to_string(M);
            j["radius"] = radius;
            j["far_radius"] = far_radius;
            j["certificate"] = certificate;
        }
        return j;
    }

    static LedgerEntry from_json(const GroupScheme& s, const nlohmann::json& j) {
        LedgerEntry e;
        e.step = j.at("step").get<std::size_t>();
        e.kind = j.at("kind").get<std::string>();
        if (j.contains("schedule_pos"))
            e.schedule_pos = j.at("schedule_pos").get<std::size_t>();
        if (j.contains("type"))
            e.type = MetricType::from_json(j.at("type"));
        if (j.contains("copy"))
            for (const auto& x : j.at("copy"))
                e.copy.push_back(element_from_json(s, x));
        if (j.contains("element"))
            e.element = element_from_json(s, j.at("element"));
        if (j.contains("value"))
            e.value = parse_rational(j.at("value").get<std::string>());
        if (j.contains("rule"))
            e.rule = j.at("rule").get<std::string>();
        if (j.contains("m"))
            e.m = parse_rational(j.at("m").get<std::string>());
        if (j.contains("M"))
            e.M = parse_rational(j.at("M").get<std::string>());
        if (j.contains("radius"))
            e.radius = j.at("radius").get<std::size_t>();
        if (j.contains("far_radius"))
            e.far_radius = j.at("far_radius").get<std::size_t>();
        if (j.contains("certificate"))
            e.certificate = j.at("certificate").get<std::string>();
        return e;
    }
};

struct StageState {
    GroupScheme scheme;
    std::size_t step = 0;
    std::size_t schedule_pos = 0;
    std::vector<GroupElement> points;
    PartialNorm table;
    std::vector<LedgerEntry> ledger;
    nlohmann::json schedule = {{"name", "default"}};

    static StageState initial(const GroupScheme& s) {
        StageState st;
        st.scheme = s;
        st.points = {GroupElement()};
        st.table = PartialNorm(s);
        return st;
    }

    bool is_point(const GroupElement& g) const { return std::find(points.begin(), points.end(), g) != points.end(); }

    SymSet domain() const { return SymSet::checked(scheme, table.elements()); }

    /// d(a, b) = λ(a - b) on the points.
    InducedMetric metric() const { return metric_from_table(table, points); }
};

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural and axiom checks on a stage: D = P - P exactly, λ valid (by
/// the layered decision procedure), the point metric satisfies the metric
/// axioms. Returns failures as text.
inline std::vector<std::string> check_stage(const StageState& st) {
    std::vector<std::string> out;
    const PointTableCheck c = validate_point_table(st.table, st.points);
    if (c.shape_problem)
        out.push_back("table shape: " + *c.shape_problem);
    if (c.violation)
        out.push_back("partial norm: " + c.violation->describe(st.scheme));
    if (out.empty()) {
        if (auto bad = st.metric().check_axioms())
            out.push_back("point metric: " + *bad);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Steps

namespace detail {

/// Least costs of `targets` over a point table: through the peeling layers,
/// or by plain search when a value falls outside a layer's reach.
inline std::vector<std::optional<Rational>> point_table_costs(const PartialNorm& table,
                                                              const std::vector<GroupElement>& points,
                                                              const std::vector<GroupElement>& targets) {
    std::vector<std::optional<Rational>> out;
    try {
        LayeredCost lc(table, points);
        for (const auto& x : targets)
            out.push_back(lc.cost(x));
        return out;
    } catch (const CostUncertified&) {
        out.clear();
    }
    CostOracle oracle(table);
    for (const auto& x : targets)
        out.push_back(oracle.cost(x));
    return out;
}

/// Adds g as a point: λ(±(g - p)) for every point p is the least
/// decomposition cost over the table, which already holds g.
inline void absorb_point(StageState& st, const GroupElement& g) {
    const GroupScheme& s = st.scheme;
    std::vector<GroupElement> targets;
    for (const auto& p : st.points) {
        const GroupElement x = sub(s, g, p);
        if (!st.table.contains(x))
            targets.push_back(x);
    }
    const auto vals = point_table_costs(st.table, st.points, targets);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!vals[i])
            throw ConstructionError("absorbed element difference " + format_element(s, targets[i]) +
                                    " outside <D>");
        st.table.assign_pm(targets[i], *vals[i]);
    }
    st.points.push_back(g);
}

/// Adds g, outside <D>, as a point with λ(±g) = v. A decomposition of
/// g - p with net k copies of g costs at least |k|·v plus the least cost of
/// the rest, which lies in <D>; k runs over 1 + qZ for q the order of g
/// modulo <D>.
inline void absorb_outside_point(StageState& st, const GroupElement& g, const Rational& v) {
    const GroupScheme& s = st.scheme;
    const std::vector<GroupElement> dom = st.table.elements();
    std::vector<std::pair<GroupElement, Rational>> base;
    Rational worst = 0;
    for (const auto& p : st.points) {
        base.emplace_back(p, v + st.table.at(p));
        worst = std::max(worst, base.back().second);
    }
    // Multiples n·g in <D> with n·v below the largest candidate.
    std::optional<Integer> q;
    for (Integer n = 2; Rational(n - 1) * v < worst; ++n) {
        if (represent_in(s, scalar_mul(s, n, g), dom)) {
            q = n;
            break;
        }
    }
    std::vector<std::pair<GroupElement, Rational>> out;
    std::optional<LayeredCost> lc;
    std::optional<CostOracle> oracle;
    for (auto& [p, best] : base) {
        const GroupElement x = sub(s, g, p);
        if (!q) {
            out.emplace_back(x, best);
            continue;
        }
        for (Integer t = 1;; ++t) {
            bool any = false;
            for (const Integer& k : {Integer(1 - t * *q), Integer(1 + t * *q)}) {
                const Rational lead = Rational(abs(k)) * v;
                if (!(lead < best))
                    continue;
                any = true;
                const GroupElement rest = sub(s, x, scalar_mul(s, k, g));
                std::optional<Rational> c;
                try {
                    if (!lc && !oracle)
                        lc.emplace(st.table, st.points);
                    if (lc)
                        c = lc->cost(rest);
                } catch (const CostUncertified&) {
                    lc.reset();
                }
                if (!lc) {
                    if (!oracle)
                        oracle.emplace(st.table);
                    c = oracle->cost(rest);
                }
                if (c && lead + *c < best)
                    best = lead + *c;
            }
            if (!any)
                break;
        }
        out.emplace_back(x, best);
    }
    st.table.assign_pm(g, v);
    for (const auto& [x, c] : out)
        if (!st.table.contains(x))
            st.table.assign_pm(x, c);
    st.points.push_back(g);
}

inline void validate_or_throw(const StageState& st, const std::string& what) {
    const PointTableCheck c = validate_point_table(st.table, st.points);
    if (c.shape_problem)
        throw ConstructionError(what + " at step " + std::to_string(st.step) + " broke the table shape: " +
                                *c.shape_problem);
    if (c.violation)
        throw ConstructionError(what + " at step " + std::to_string(st.step) +
                                " produced an invalid norm: " + c.violation->describe(st.scheme));
}

/// Radius handed to find_far_element: the margin applies when the element
/// will have infinite order (a box multiple or a fresh integer coordinate).
/// Torsion far elements keep the plain radius, since a larger order makes
/// later absorbed elements expensive.
inline std::size_t far_radius(const GroupScheme& s, const SymSet& dom, std::size_t radius) {
    const std::size_t wide = radius * kFarMargin;
    for (const auto& b : dom)
        if (!b.is_zero() && !order(s, b))
            return wide;
    if (auto g = fresh_coordinate_element(s, dom.elements(), wide); g && !order(s, *g))
        return wide;
    return radius;
}

} // namespace detail

struct BuildOptions {
    bool validate_each_step = true;
    std::function<void(const StageState&)> on_checkpoint; ///< called for every state, including the start
};

/// Absorbs g into the stage: already a point, a domain element made a point,
/// or a new element whose value comes from the greatest extension (g in
/// <D>), from its least multiple in D, or is 1. Returns the ledger entry.
inline LedgerEntry absorb_element(StageState& st, const GroupElement& g) {
    const GroupScheme& s = st.scheme;
    LedgerEntry e;
    e.step = st.step;
    e.element = g;
    if (st.is_point(g)) {
        e.kind = "absorb-present";
        return e;
    }
    if (st.table.contains(g)) {
        e.kind = "absorb-point";
        detail::absorb_point(st, g);
        return e;
    }
    e.kind = "absorb-new";
    const std::vector<GroupElement> dom = st.table.elements();
    if (represent_in(s, g, dom)) {
        e.value = *detail::point_table_costs(st.table, st.points, {g}).front();
        e.rule = "extension";
        st.table.assign_pm(g, *e.value);
        detail::absorb_point(st, g);
        return e;
    }
    // Least m >= 1 with m·g = f in D; ties by λ(f)/m, then f.
    std::optional<Integer> best_m;
    std::optional<GroupElement> best_f;
    Rational best_val;
    for (const auto& [f, lf] : st.table.table()) {
        auto mm = solve_multiple(s, g, f);
        if (!mm)
            continue;
        const Rational cand = lf / Rational(*mm);
        if (!best_m || *mm < *best_m || (*mm == *best_m && cand < best_val)) {
            best_m = *mm;
            best_f = f;
            best_val = cand;
        }
    }
    if (!best_m || best_f->is_zero()) {
        e.value = Rational(1);
        e.rule = "one";
    } else {
        e.value = best_val;
        e.rule = "multiple";
    }
    detail::absorb_outside_point(st, g, *e.value);
    return e;
}

/// Even step: absorb g = g_{n/2+1} of the enumeration.
inline void even_step(StageState& st, GroupEnumerator& en, const BuildOptions& opt = {}) {
    if (st.step % 2 != 0)
        throw std::logic_error("even_step on odd step");
    auto gopt = en.at(st.step / 2 + 1);
    LedgerEntry e;
    if (!gopt) {
        e.step = st.step;
        e.kind = "absorb-present";
    } else {
        e = absorb_element(st, *gopt);
        if (e.kind != "absorb-present" && opt.validate_each_step)
            detail::validate_or_throw(st, "even step");
    }
    st.ledger.push_back(std::move(e));
    ++st.step;
}

/// Every injective map of the type's points into `points` preserving all
/// distances, in lexicographic order of the image tuples.
inline std::vector<std::vector<GroupElement>> find_isometric_copies(const MetricType& type,
                                                                    const std::vector<GroupElement>& points,
                                                                    const InducedMetric& d) {
    std::vector<GroupElement> pts = points;
    std::sort(pts.begin(), pts.end());
    const std::size_t k = type.size();
    std::vector<std::vector<GroupElement>> out;
    std::vector<std::size_t> idx;
    std::vector<bool> used(pts.size(), false);
    std::vector<std::size_t> pos(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        pos[i] = d.index_of(pts[i]);
    std::function<void()> rec = [&] {
        const std::size_t i = idx.size();
        if (i == k) {
            std::vector<GroupElement> img;
            for (std::size_t t : idx)
                img.push_back(pts[t]);
            out.push_back(std::move(img));
            return;
        }
        for (std::size_t c = 0; c < pts.size(); ++c) {
            if (used[c])
                continue;
            bool ok = true;
            for (std::size_t j = 0; j < i && ok; ++j)
                ok = d.d[pos[idx[j]]][pos[c]] == type.d[j][i];
            if (!ok)
                continue;
            used[c] = true;
            idx.push_back(c);
            rec();
            idx.pop_back();
            used[c] = false;
        }
    };
    if (k > 0)
        rec();
    return out;
}

/// Odd step: realize the scheduled type over each isometric copy in P.
inline void odd_step(StageState& st, TypeSchedule& schedule, const BuildOptions& opt = {}) {
    if (st.step % 2 != 1)
        throw std::logic_error("odd_step on even step");
    if (!st.scheme.is_unbounded())
        throw UnsupportedGroup("group " + st.scheme.to_string() + " is bounded; far elements do not exist");
    const GroupScheme& s = st.scheme;
    const std::size_t pos = st.schedule_pos++;
    const MetricType type = schedule.at(pos);
    const auto copies = find_isometric_copies(type, st.points, st.metric());
    if (copies.empty()) {
        LedgerEntry e;
        e.step = st.step;
        e.kind = "no-copy";
        e.schedule_pos = pos;
        e.type = type;
        st.ledger.push_back(std::move(e));
    }
    bool grew = false;
    for (const auto& copy : copies) {
        LedgerEntry e;
        e.step = st.step;
        e.schedule_pos = pos;
        e.type = type;
        e.copy = copy;
        const InducedMetric d = st.metric();
        KatetovFn fb;
        for (std::size_t i = 0; i < copy.size(); ++i)
            fb[copy[i]] = type.f[i];
        const KatetovFn f = katetov_min_extension(fb, d);
        const RealizationBounds rb = realization_bounds(st.table, f);
        const SymSet dom = st.domain();
        const std::size_t wide = detail::far_radius(s, dom, rb.radius);
        const GroupElement g = find_far_element(s, dom, wide);
        const DistResult cert = oriented_dist_bounded(s, g, dom, rb.radius);
        st.table = realize_over_closed(st.table, st.points, f, g, false);
        st.points.push_back(g);
        grew = true;
        e.kind = "realized";
        e.element = g;
        e.m = rb.m;
        e.M = rb.M;
        e.radius = rb.radius;
        e.far_radius = wide;
        e.certificate = cert.method == DistMethod::BoxCertificate        ? "box"
                        : cert.method == DistMethod::SubgroupCertificate ? "subgroup"
                                                                         : "bfs";
        st.ledger.push_back(std::move(e));
    }
    if (grew && opt.validate_each_step)
        detail::validate_or_throw(st, "odd step");
    ++st.step;
}

/// Stage from a seed: ρ_R = rationalize(ρ, ε) on F, then points P = F and
/// the table closed to F - F by greatest extension.
inline StageState seeded_stage(const PartialNorm& seed, const Rational& eps) {
    if (auto bad = validate_partial_norm(seed))
        throw InvalidNorm(*bad, seed.scheme());
    const PartialNorm rho = rationalize(seed, eps);
    StageState st;
    st.scheme = seed.scheme();
    st.points = rho.elements();
    st.table = greatest_extension(rho, diff_closure(st.scheme, rho.domain()));
    return st;
}

/// Runs steps until st.step == target_step. Deterministic given the inputs.
inline StageState build_stages(StageState st, TypeSchedule& schedule, std::size_t target_step,
                               const BuildOptions& opt = {}) {
    if (!st.scheme.is_unbounded())
        throw UnsupportedGroup("group " + st.scheme.to_string() +
                               " is bounded (no element of infinite order and no elements of arbitrarily high "
                               "finite order); the far-element lemma does not apply");
    st.schedule = schedule.describe();
    GroupEnumerator en(st.scheme);
    if (opt.on_checkpoint)
        opt.on_checkpoint(st);
    while (st.step < target_step) {
        if (st.step % 2 == 0)
            even_step(st, en, opt);
        else
            odd_step(st, schedule, opt);
        if (opt.on_checkpoint)
            opt.on_checkpoint(st);
    }
    return st;
}

inline StageState build_stages(const GroupScheme& s, TypeSchedule& schedule, std::size_t n_steps,
                               const std::optional<std::pair<PartialNorm, Rational>>& seed = {},
                               const BuildOptions& opt = {}) {
    StageState st = seed ? seeded_stage(seed->first, seed->second) : StageState::initial(s);
    return build_stages(std::move(st), schedule, n_steps, opt);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json stage_to_json(const StageState& st) {
    nlohmann::json elems = nlohmann::json::array();
    for (const auto& [g, v] : st.table.table())
        elems.push_back(element_to_json(g));
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : st.points)
        pts.push_back(element_to_json(p));
    nlohmann::json ledger = nlohmann::json::array();
    for (const auto& e : st.ledger)
        ledger.push_back(e.to_json(st.scheme));
    return {{"schema_version", kSchemaVersion},
            {"scheme", st.scheme.to_string()},
            {"step", st.step},
            {"elements", std::move(elems)},
            {"points", std::move(pts)},
            {"norm_table", norm_to_json(st.table)["values"]},
            {"schedule", st.schedule},
            {"schedule_pos", st.schedule_pos},
            {"ledger", std::move(ledger)}};
}

inline StageState stage_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ParseError("checkpoint must be a JSON object");
    for (const char* key : {"schema_version", "scheme", "step", "elements", "points", "norm_table", "schedule_pos",
                            "ledger"})
        if (!j.contains(key))
            throw ParseError(std::string("checkpoint missing '") + key + "'");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ParseError("unsupported schema_version " + j.at("schema_version").dump());
    StageState st;
    st.scheme = GroupScheme::parse(j.at("scheme").get<std::string>());
    st.step = j.at("step").get<std::size_t>();
    st.schedule_pos = j.at("schedule_pos").get<std::size_t>();
    if (j.contains("schedule"))
        st.schedule = j.at("schedule");
    for (const auto& p : j.at("points"))
        st.points.push_back(element_from_json(st.scheme, p));
    nlohmann::json nj{{"domain", j.at("elements")}, {"values", j.at("norm_table")}};
    st.table = norm_from_json(nj, st.scheme);
    for (const auto& e : j.at("ledger"))
        st.ledger.push_back(LedgerEntry::from_json(st.scheme, e));
    return st;
}

/// Ledger re-verification against a stage: every realized entry's element is
/// a point with λ(g - copy_i) = f_i exactly and the copy isometric to the
/// type; every absorb entry's element is in the domain.
inline std::vector<std::string> verify_ledger(const StageState& st) {
    std::vector<std::string> out;
    const GroupScheme& s = st.scheme;
    for (const auto& e : st.ledger) {
        const std::string where = "ledger step " + std::to_string(e.step) + " (" + e.kind + ")";
        if (e.kind.rfind("absorb", 0) == 0) {
            if (e.element && !st.is_point(*e.element))
                out.push_back(where + ": absorbed element is not a point");
            continue;
        }
        if (e.kind == "no-copy")
            continue;
        if (!e.type || !e.element || e.copy.size() != e.type->size()) {
            out.push_back(where + ": incomplete entry");
            continue;
        }
        for (std::size_t i = 0; i < e.copy.size(); ++i) {
            for (std::size_t j = 0; j < e.copy.size(); ++j) {
                auto v = st.table.value(sub(s, e.copy[i], e.copy[j]));
                if (!v || *v != e.type->d[i][j])
                    out.push_back(where + ": copy is not isometric to the type");
            }
            auto v = st.table.value(sub(s, *e.element, e.copy[i]));
            if (!v || *v != e.type->f[i])
                out.push_back(where + ": value at " + format_element(s, sub(s, *e.element, e.copy[i])) +
                              " is not f = " + to_string(e.type->f[i]));
        }
        if (!st.is_point(*e.element))
            out.push_back(where + ": realizing element is not a point");
    }
    return out;
}

} // namespace invnorm
