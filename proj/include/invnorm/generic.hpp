#pragma once

// Genericity machinery on infinitely-summed groups: index sets of the
// enumerated generators d_1, d_2, ..., the subgroups F_A they generate, word
// lengths, the comparisons δ_φ and ≡_{φ,ε} (checked on bounded word balls),
// the witness search for the G_δ condition, and the finite-stage density
// construction.
//
// A generic stage is a stack of levels over an index set C:
//   seed           a valid table generating F_C for the seed indices;
//   block          a copy of a triple's norm on fresh coordinates, joined to
//                  the older levels by bridges d_c - d_{φ(c)} of value h_c;
//   housekeeping   one new generator with a single value.
// The stage norm is the least-cost closure of all level tables. It is
// evaluated level by level: a block only touches its own coordinates and
// the bridges, so the cost of x splits into an older-level cost, a block cost
// and a bridge cost, minimized over the bridged part.

#include "invnorm/cayley.hpp"
#include "invnorm/lattice.hpp"
#include "invnorm/norm.hpp"
#include "invnorm/urysohn.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace invnorm {

/// Sorted, duplicate-free set of generator indices (indices start at 1).
using IndexSet = std::vector<std::size_t>;

class OutsideStage : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConstructionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline IndexSet make_index_set(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t i : v)
        if (i == 0)
            throw std::invalid_argument("generator indices start at 1");
    return v;
}

inline GroupElement gen_element(const GroupScheme& s, std::size_t i) {
    auto g = generator(s, i);
    if (!g)
        throw std::invalid_argument("scheme " + s.to_string() + " has no generator d_" + std::to_string(i));
    return *g;
}

inline std::vector<GroupElement> generator_family(const GroupScheme& s, const std::vector<std::size_t>& idx) {
    std::vector<GroupElement> out;
    out.reserve(idx.size());
    for (std::size_t i : idx)
        out.push_back(gen_element(s, i));
    return out;
}

inline bool in_span(const GroupScheme& s, const GroupElement& f, const IndexSet& a) {
    return represent_in(s, f, generator_family(s, a)).has_value();
}

/// A norm given as a function; throws when the argument is outside its domain.
using NormFn = std::function<Rational(const GroupElement&)>;

/// The closure of a finite table (its greatest extension to the generated
/// subgroup), evaluated lazily with one shared Dijkstra.
inline NormFn closure_fn(const PartialNorm& table) {
    auto oracle = std::make_shared<CostOracle>(table);
    GroupScheme s = table.scheme();
    return [oracle, s](const GroupElement& g) {
        auto c = oracle->cost(g);
        if (!c)
            throw OutsideSubgroup(g, s);
        return *c;
    };
}

inline bool lt_eps(const Rational& diff, const Rational& eps, std::size_t len) {
    // |diff| < eps·len, with eps = 0 read as exact equality.
    if (eps == 0)
        return diff == 0;
    return abs(diff) < eps * Rational(static_cast<unsigned long>(len));
}

// ---------------------------------------------------------------------------
// Word lengths.

struct WordBall {
    std::vector<GroupElement> elements; // BFS order, 0 first
    std::vector<std::size_t> length;
};

/// All f in F_A with |f|_A <= L, with their lengths.
inline WordBall word_ball(const GroupScheme& s, const IndexSet& a, std::size_t L) {
    std::vector<GroupElement> steps;
    for (const auto& g : generator_family(s, a)) {
        steps.push_back(g);
        steps.push_back(neg(s, g));
    }
    WordBall out;
    std::unordered_map<GroupElement, std::size_t, ElementHash> seen;
    out.elements.push_back(GroupElement());
    out.length.push_back(0);
    seen.emplace(GroupElement(), 0);
    std::size_t begin = 0;
    for (std::size_t len = 1; len <= L; ++len) {
        const std::size_t end = out.elements.size();
        for (std::size_t i = begin; i < end; ++i)
            for (const auto& st : steps) {
                GroupElement next = add(s, out.elements[i], st);
                if (seen.emplace(next, len).second) {
                    out.elements.push_back(std::move(next));
                    out.length.push_back(len);
                }
            }
        if (out.elements.size() == end)
            break;
        begin = end;
    }
    return out;
}

/// |f|_A: the least number of generators ±d_a (a ∈ A) summing to f;
/// nullopt when f is outside F_A.
inline std::optional<std::size_t> word_length(const GroupScheme& s, const GroupElement& f, const IndexSet& a) {
    if (f.is_zero())
        return 0;
    const auto fam = generator_family(s, a);
    auto coeffs = represent_in(s, f, fam);
    if (!coeffs)
        return std::nullopt;
    if (relation_basis(s, fam).empty()) {
        // Free generators: the representation is unique.
        std::size_t len = 0;
        for (const auto& c : *coeffs)
            len += static_cast<std::size_t>(Integer(abs(c)).get_ui());
        return len;
    }
    std::unordered_map<GroupElement, std::size_t, ElementHash> seen{{GroupElement(), 0}};
    std::vector<GroupElement> layer{GroupElement()};
    for (std::size_t len = 1;; ++len) {
        std::vector<GroupElement> next;
        for (const auto& x : layer)
            for (const auto& g : fam)
                for (const auto& y : {add(s, x, g), sub(s, x, g)}) {
                    if (y == f)
                        return len;
                    if (seen.emplace(y, len).second)
                        next.push_back(y);
                }
        layer = std::move(next);
    }
}

// ---------------------------------------------------------------------------
// Index maps.

/// A bijection φ: A -> A' between index sets; image[i] = φ(domain[i]).
struct IndexMap {
    IndexSet domain;
    std::vector<std::size_t> image;

    static IndexMap identity(const IndexSet& a) { return IndexMap{a, a}; }

    std::size_t at(std::size_t a) const {
        for (std::size_t i = 0; i < domain.size(); ++i)
            if (domain[i] == a)
                return image[i];
        throw std::out_of_range("index " + std::to_string(a) + " outside the map's domain");
    }

    IndexSet image_set() const { return make_index_set(image); }

    bool injective() const { return image_set().size() == image.size(); }

    /// d_a -> d_{φ(a)} extends to an isomorphism F_A -> F_{A'}.
    bool is_isomorphism(const GroupScheme& s) const {
        return domain.size() == image.size() && injective() &&
               same_relations(s, generator_family(s, domain), generator_family(s, image));
    }

    /// φ̄(f) for f in F_A.
    GroupElement apply(const GroupScheme& s, const GroupElement& f) const {
        auto coeffs = represent_in(s, f, generator_family(s, domain));
        if (!coeffs)
            throw OutsideStage(format_element(s, f) + " is outside F_A");
        return combine(s, *coeffs, generator_family(s, image));
    }

    IndexMap inverse() const {
        std::vector<std::pair<std::size_t, std::size_t>> p;
        for (std::size_t i = 0; i < domain.size(); ++i)
            p.emplace_back(image[i], domain[i]);
        std::sort(p.begin(), p.end());
        IndexMap out;
        for (const auto& [a, b] : p) {
            out.domain.push_back(a);
            out.image.push_back(b);
        }
        return out;
    }

    IndexMap restricted(const IndexSet& sub) const {
        IndexMap out;
        for (std::size_t a : sub) {
            out.domain.push_back(a);
            out.image.push_back(at(a));
        }
        return out;
    }

    /// ψ∘this (this first).
    IndexMap then(const IndexMap& psi) const {
        IndexMap out = *this;
        for (auto& i : out.image)
            i = psi.at(i);
        return out;
    }

    friend bool operator==(const IndexMap&, const IndexMap&) = default;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (std::size_t i = 0; i < domain.size(); ++i)
            j.push_back(nlohmann::json::array({domain[i], image[i]}));
        return j;
    }

    static IndexMap from_json(const nlohmann::json& j) {
        std::vector<std::pair<std::size_t, std::size_t>> p;
        for (const auto& e : j) {
            if (!e.is_array() || e.size() != 2)
                throw ParseError("index map entries are [a, phi(a)] pairs");
            p.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
        }
        std::sort(p.begin(), p.end());
        IndexMap out;
        for (const auto& [a, b] : p) {
            out.domain.push_back(a);
            out.image.push_back(b);
        }
        if (make_index_set(out.domain).size() != out.domain.size())
            throw ParseError("index map has a repeated domain index");
        return out;
    }
};

// ---------------------------------------------------------------------------
// Comparisons.

struct DeltaResult {
    bool holds = true;
    Rational max{0};
    std::optional<std::size_t> worst; // index attaining the max
};

/// δ_φ(A, φ[A]) < ε: every λ(d_a - d_{φ(a)}) < ε. Reports the max.
inline DeltaResult delta_phi(const GroupScheme& s, const NormFn& lambda, const IndexMap& phi, const Rational& eps) {
    DeltaResult r;
    for (std::size_t i = 0; i < phi.domain.size(); ++i) {
        const GroupElement x = sub(s, gen_element(s, phi.domain[i]), gen_element(s, phi.image[i]));
        const Rational v = lambda(x);
        if (!r.worst || v > r.max) {
            r.max = v;
            r.worst = phi.domain[i];
        }
    }
    r.holds = r.max < eps;
    return r;
}

struct EquivResult {
    bool holds = true;
    std::size_t bound = 0;
    std::size_t checked = 0;
    std::optional<GroupElement> violation; // f in F_A
    std::size_t violation_length = 0;
    Rational lhs{0}, rhs{0};               // ρ(f), ρ'(φ̄ f)
};

/// (A, ρ) ≡_{φ,ε} (A', ρ') on the ball |f|_A <= L, f ≠ 0 (at f = 0 both
/// sides vanish and the strict inequality degenerates). ε = 0 means equality.
inline EquivResult equiv_eps_bounded(const GroupScheme& s, const NormFn& rho, const NormFn& rho2, const IndexMap& phi,
                                     const Rational& eps, std::size_t L) {
    if (L == 0)
        throw std::invalid_argument("length bound must be at least 1");
    EquivResult r;
    r.bound = L;
    const WordBall ball = word_ball(s, phi.domain, L);
    const auto dom = generator_family(s, phi.domain);
    const auto img = generator_family(s, phi.image);
    for (std::size_t i = 1; i < ball.elements.size(); ++i) {
        const GroupElement& f = ball.elements[i];
        auto coeffs = represent_in(s, f, dom);
        const GroupElement g = combine(s, *coeffs, img);
        const Rational a = rho(f);
        const Rational b = rho2(g);
        ++r.checked;
        if (!lt_eps(a - b, eps, ball.length[i])) {
            r.holds = false;
            r.violation = f;
            r.violation_length = ball.length[i];
            r.lhs = a;
            r.rhs = b;
            return r;
        }
    }
    return r;
}

struct DeterminationSet {
    std::vector<GroupElement> elements;
    bool certified = false;
    std::size_t ball_size = 0;
    std::size_t bound = 0;
};

/// A set C ⊆ F_A such that |ρ(c) - ρ'(φ̄c)| < ε on C gives the ≡_{φ,ε}
/// inequality on the whole length-<=L ball, for every pair of norms.
///
/// Certification propagates intervals for δ(f) = ρ(f) - ρ'(φ̄ f) over the
/// ball: members of C carry (-ε, ε); δ(0) = 0 and δ(-f) = δ(f) are the only
/// identities valid for all pairs of norms, since subadditivity bounds only
/// one side of each value. Every nonzero f must land in (-ε|f|, ε|f|).
/// Minimization keeps one element per ± pair; if certification fails the
/// whole ball is returned uncertified.
inline DeterminationSet determination_set_bounded(const GroupScheme& s, const IndexMap& phi, const Rational& eps,
                                                  std::size_t L) {
    if (eps <= 0)
        throw std::invalid_argument("ε must be positive");
    if (!phi.is_isomorphism(s))
        throw std::invalid_argument("index map does not induce an isomorphism");
    const WordBall ball = word_ball(s, phi.domain, L);
    DeterminationSet out;
    out.ball_size = ball.elements.size();
    out.bound = L;
    std::set<GroupElement> kept;
    for (std::size_t i = 1; i < ball.elements.size(); ++i) {
        const GroupElement& f = ball.elements[i];
        if (!kept.count(neg(s, f))) {
            kept.insert(f);
            out.elements.push_back(f);
        }
    }
    // Interval check: half-width in units of ε for each ball element.
    bool ok = true;
    for (std::size_t i = 1; i < ball.elements.size(); ++i) {
        const GroupElement& f = ball.elements[i];
        const bool pinned = kept.count(f) || kept.count(neg(s, f));
        ok = ok && pinned && ball.length[i] >= 1;
    }
    if (ok) {
        out.certified = true;
        return out;
    }
    out.elements.assign(ball.elements.begin() + 1, ball.elements.end());
    return out;
}

// ---------------------------------------------------------------------------
// Triples and stage levels.

/// T = (B, A, ρ): B ⊆ A and ρ the closure of a finite valid table generating
/// F_A.
struct GenericTriple {
    IndexSet b;
    IndexSet a;
    PartialNorm rho;

    /// Problems with the triple, empty when well formed.
    std::vector<std::string> check() const {
        std::vector<std::string> out;
        const GroupScheme& s = rho.scheme();
        if (!std::includes(a.begin(), a.end(), b.begin(), b.end()))
            out.push_back("B is not a subset of A");
        for (const auto& g : rho.elements())
            if (!in_span(s, g, a))
                out.push_back("table element " + format_element(s, g) + " is outside F_A");
        const auto gens = rho.elements();
        for (std::size_t i : a)
            if (!represent_in(s, gen_element(s, i), gens))
                out.push_back("d_" + std::to_string(i) + " is not generated by the table");
        if (auto v = validate_partial_norm(rho))
            out.push_back("table is not a valid partial norm: " + v->describe(s));
        return out;
    }

    nlohmann::json to_json() const {
        return {{"B", b}, {"A", a}, {"rho", norm_to_json(rho)["values"]}};
    }

    static GenericTriple from_json(const GroupScheme& s, const nlohmann::json& j) {
        nlohmann::json bj, aj, rj;
        if (j.is_array() && j.size() == 3) {
            bj = j[0];
            aj = j[1];
            rj = j[2];
        } else if (j.is_object()) {
            for (const char* key : {"B", "A", "rho"})
                if (!j.contains(key))
                    throw ParseError(std::string("triple missing '") + key + "'");
            bj = j.at("B");
            aj = j.at("A");
            rj = j.at("rho");
        } else {
            throw ParseError("a triple is {\"B\", \"A\", \"rho\"} or [B, A, rho]");
        }
        GenericTriple t{make_index_set(bj.get<std::vector<std::size_t>>()),
                        make_index_set(aj.get<std::vector<std::size_t>>()),
                        norm_from_json(rj.is_object() ? rj : nlohmann::json{{"values", rj}}, s)};
        return t;
    }
};

/// Closure of the values on the generators ±d_a (a ∈ A), plus explicit extra
/// entries, restricted to the table domain. Always a valid table.
inline PartialNorm generator_norm(const GroupScheme& s, const IndexSet& a, const std::vector<Rational>& values,
                                  const std::vector<std::pair<GroupElement, Rational>>& extra = {}) {
    if (values.size() != a.size())
        throw std::invalid_argument("one value per generator");
    PartialNorm raw(s);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const GroupElement g = gen_element(s, a[i]);
        raw.set(g, values[i]);
        raw.set(neg(s, g), values[i]);
    }
    for (const auto& [g, v] : extra) {
        raw.set(g, v);
        raw.set(neg(s, g), v);
    }
    return cost_closure(raw, {});
}

struct Bridge {
    std::size_t from = 0; // index in the older stage
    std::size_t to = 0;   // index in the block
    Rational h;
};

struct StageLevel {
    enum class Kind { Seed, Block, Housekeeping };
    Kind kind = Kind::Seed;
    std::size_t step = 0;
    IndexSet added;
    PartialNorm table;
    std::vector<std::size_t> coords; // block: coordinates owned by the block
    std::vector<Bridge> bridges;     // block
    std::size_t index = 0;           // housekeeping generator index
    Rational value;                  // housekeeping value
    std::optional<Integer> order;    // housekeeping: order modulo the older F_C

    static const char* kind_name(Kind k) {
        switch (k) {
        case Kind::Seed:
            return "seed";
        case Kind::Block:
            return "block";
        case Kind::Housekeeping:
            return "housekeeping";
        }
        return "?";
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"kind", kind_name(kind)}, {"step", step}, {"added", added},
                         {"table", norm_to_json(table)["values"]}};
        if (kind == Kind::Block) {
            j["coords"] = coords;
            nlohmann::json br = nlohmann::json::array();
            for (const auto& b : bridges)
                br.push_back({{"from", b.from}, {"to", b.to}, {"h", to_string(b.h)}});
            j["bridges"] = std::move(br);
        }
        if (kind == Kind::Housekeeping) {
            j["index"] = index;
            j["value"] = to_string(value);
            j["order"] = order ? nlohmann::json(to_string(*order)) : nlohmann::json(nullptr);
        }
        return j;
    }

    static StageLevel from_json(const GroupScheme& s, const nlohmann::json& j) {
        StageLevel l;
        const std::string k = j.at("kind").get<std::string>();
        if (k == "seed")
            l.kind = Kind::Seed;
        else if (k == "block")
            l.kind = Kind::Block;
        else if (k == "housekeeping")
            l.kind = Kind::Housekeeping;
        else
            throw ParseError("unknown level kind '" + k + "'");
        l.step = j.at("step").get<std::size_t>();
        l.added = make_index_set(j.at("added").get<std::vector<std::size_t>>());
        l.table = norm_from_json(nlohmann::json{{"values", j.at("table")}}, s);
        if (l.kind == Kind::Block) {
            l.coords = j.at("coords").get<std::vector<std::size_t>>();
            for (const auto& b : j.at("bridges"))
                l.bridges.push_back(Bridge{b.at("from").get<std::size_t>(), b.at("to").get<std::size_t>(),
                                           parse_rational(b.at("h").get<std::string>())});
        }
        if (l.kind == Kind::Housekeeping) {
            l.index = j.at("index").get<std::size_t>();
            l.value = parse_rational(j.at("value").get<std::string>());
            if (!j.at("order").is_null())
                l.order = Integer(j.at("order").get<std::string>());
        }
        return l;
    }
};

// ---------------------------------------------------------------------------
// Level-by-level evaluation of the stage norm.

class StageNorm {
public:
    explicit StageNorm(GroupScheme s) : s_(std::move(s)) {}

    std::size_t size() const { return levels_.size(); }

    void push(const StageLevel& l) {
        Cache c;
        c.level = l;
        c.family = levels_.empty() ? std::vector<GroupElement>{} : levels_.back().family;
        for (std::size_t i : l.added)
            c.family.push_back(gen_element(s_, i));
        if (l.kind != StageLevel::Kind::Housekeeping)
            c.oracle = std::make_shared<CostOracle>(l.table);
        if (l.kind == StageLevel::Kind::Block) {
            c.owned = std::set<std::size_t>(l.coords.begin(), l.coords.end());
            for (const auto& b : l.bridges) {
                BridgeInfo bi{b.h, gen_element(s_, b.from), gen_element(s_, b.to), std::nullopt, Rational(0),
                              Rational(0)};
                const std::size_t coord = bi.to.entries().front().first;
                if (s_.kind(coord).type == CoordType::Integer) {
                    // Linear lower bound ρ'(y) >= t·|y_c| on the bridged coordinate.
                    bi.int_coord = coord;
                    bi.unit = bi.to.at(coord);
                    std::optional<Rational> t;
                    for (const auto& [g, v] : l.table.table()) {
                        const Rational e = abs(g.at(coord));
                        if (e != 0 && (!t || v / e < *t))
                            t = v / e;
                    }
                    if (!t)
                        throw ConstructionFailure("block table does not reach a bridged coordinate");
                    bi.slope = *t;
                }
                c.bridges.push_back(std::move(bi));
            }
        }
        if (l.kind == StageLevel::Kind::Housekeeping)
            c.hk = gen_element(s_, l.index);
        levels_.push_back(std::move(c));
    }

    /// λ at level k (0-based) of x; throws OutsideStage when x ∉ F_{C_k}.
    Rational value(const GroupElement& x, std::size_t k) {
        if (k >= levels_.size())
            throw std::out_of_range("no such level");
        if (!represent_in(s_, x, levels_[k].family))
            throw OutsideStage(format_element(s_, x) + " is outside the stage subgroup F_C");
        return eval(k, x);
    }

    Rational value(const GroupElement& x) { return value(x, levels_.size() - 1); }

    NormFn fn(std::size_t k) {
        return [this, k](const GroupElement& x) { return value(x, k); };
    }

    NormFn fn() { return fn(levels_.size() - 1); }

    const std::vector<GroupElement>& family(std::size_t k) const { return levels_[k].family; }

private:
    struct BridgeInfo {
        Rational h;
        GroupElement from, to;
        std::optional<std::size_t> int_coord; // integer coordinate of `to`
        Rational unit;                        // to's entry there
        Rational slope;
    };

    struct Cache {
        StageLevel level;
        std::vector<GroupElement> family; // generators of F_C up to this level
        std::shared_ptr<CostOracle> oracle;
        std::set<std::size_t> owned;
        std::vector<BridgeInfo> bridges;
        GroupElement hk;
        std::unordered_map<GroupElement, Rational, ElementHash> memo;
    };

    Rational eval(std::size_t k, const GroupElement& x) {
        if (x.is_zero())
            return Rational(0);
        Cache& c = levels_[k];
        if (auto it = c.memo.find(x); it != c.memo.end())
            return it->second;
        Rational v;
        switch (c.level.kind) {
        case StageLevel::Kind::Seed: {
            auto cost = c.oracle->cost(x);
            if (!cost)
                throw OutsideStage(format_element(s_, x) + " is outside the seed subgroup");
            v = *cost;
            break;
        }
        case StageLevel::Kind::Block:
            v = eval_block(k, x);
            break;
        case StageLevel::Kind::Housekeeping:
            v = eval_housekeeping(k, x);
            break;
        }
        c.memo.emplace(x, v);
        return v;
    }

    std::pair<GroupElement, GroupElement> split(const Cache& c, const GroupElement& x) const {
        std::vector<GroupElement::Entry> q, p;
        for (const auto& e : x.entries())
            (c.owned.count(e.first) ? q : p).push_back(e);
        return {GroupElement::from_canonical(std::move(q)), GroupElement::from_canonical(std::move(p))};
    }

    Rational eval_block(std::size_t k, const GroupElement& x) {
        Cache& c = levels_[k];
        auto [xq, xp] = split(c, x);
        auto block_cost = [&](const GroupElement& y, const std::optional<Rational>& below) -> std::optional<Rational> {
            if (below)
                return c.oracle->cost_below(y, *below);
            auto r = c.oracle->cost(y);
            if (!r)
                throw OutsideStage(format_element(s_, y) + " is outside the block subgroup");
            return r;
        };
        const Rational lp = eval(k - 1, xp);
        Rational best = lp + *block_cost(xq, std::nullopt);
        if (c.level.bridges.empty())
            return best;

        // Bridge multiplicities w: the block part is y = xq + Σ w_i d_{to_i},
        // the older part xp - Σ w_i d_{from_i}, the bridge cost Σ |w_i| h_i.
        std::vector<std::vector<Integer>> choices;
        std::vector<Rational> from_value;
        for (const auto& bi : c.bridges) {
            std::vector<Integer> opts{Integer(0)};
            Integer lo, hi;
            if (bi.int_coord) {
                // |x_c + w·unit|·slope < best.
                const Rational r = best / bi.slope, xc = xq.at(*bi.int_coord);
                const Rational a = (-r - xc) / bi.unit, b = (r - xc) / bi.unit;
                lo = floor(std::min(a, b));
                hi = ceil(std::max(a, b));
            } else {
                // A torsion multiplicity matters modulo the order of d_to (equal
                // to the order of d_from); the least |w| per class is cheapest.
                const Integer lim = std::min(Integer(floor(best / bi.h)), Integer(*order(s_, bi.to) / 2));
                lo = -lim;
                hi = lim;
            }
            for (Integer w = lo; w <= hi; ++w) {
                if (w == 0 || Rational(abs(w)) * bi.h >= best)
                    continue;
                if (bi.int_coord && abs(xq.at(*bi.int_coord) + Rational(w) * bi.unit) * bi.slope >= best)
                    continue;
                opts.push_back(w);
            }
            choices.push_back(std::move(opts));
            from_value.push_back(eval(k - 1, bi.from));
        }

        struct Cand {
            Rational partial;
            GroupElement u;
        };
        std::vector<Cand> cands;
        std::vector<Integer> w(c.bridges.size());
        std::function<void(std::size_t, const Rational&)> rec = [&](std::size_t i, const Rational& beta) {
            if (beta >= best)
                return;
            if (i == c.bridges.size()) {
                GroupElement y = xq, u;
                bool any = false;
                for (std::size_t j = 0; j < w.size(); ++j)
                    if (w[j] != 0) {
                        any = true;
                        y = add(s_, y, scalar_mul(s_, w[j], c.bridges[j].to));
                        u = add(s_, u, scalar_mul(s_, w[j], c.bridges[j].from));
                    }
                if (!any)
                    return;
                // λ(xp - u) >= λ(xp) - Σ |w_i| λ(d_from_i).
                Rational reach(0);
                for (std::size_t j = 0; j < w.size(); ++j)
                    reach += Rational(abs(w[j])) * from_value[j];
                const Rational older_lb = lp > reach ? Rational(lp - reach) : Rational(0);
                if (beta + older_lb >= best)
                    return;
                auto cy = block_cost(y, Rational(best - beta - older_lb));
                if (cy && beta + *cy + older_lb < best)
                    cands.push_back({beta + *cy, std::move(u)});
                return;
            }
            for (const auto& wi : choices[i]) {
                w[i] = wi;
                rec(i + 1, beta + Rational(abs(wi)) * c.bridges[i].h);
            }
            w[i] = 0;
        };
        rec(0, Rational(0));
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            const int r = cmp(a.partial, b.partial);
            return r < 0 || (r == 0 && a.u < b.u);
        });
        for (const auto& cd : cands) {
            if (cd.partial >= best)
                break;
            const Rational lu = eval(k - 1, cd.u);
            if (lp > lu && cd.partial + (lp - lu) >= best)
                continue;
            const Rational full = cd.partial + eval(k - 1, sub(s_, xp, cd.u));
            if (full < best)
                best = full;
        }
        return best;
    }

    Rational eval_housekeeping(std::size_t k, const GroupElement& x) {
        Cache& c = levels_[k];
        std::vector<GroupElement> fam = levels_[k - 1].family;
        fam.push_back(c.hk);
        auto coeffs = represent_in(s_, x, fam);
        Integer k0 = coeffs->back();
        const Rational& v = c.level.value;
        if (!c.level.order)
            return eval(k - 1, sub(s_, x, scalar_mul(s_, k0, c.hk))) + abs(Rational(k0)) * v;
        const Integer q = *c.level.order;
        Integer r = k0 % q;
        if (r < 0)
            r += q;
        // Net counts r + jq, in order of |count|.
        std::optional<Rational> best;
        for (Integer lo = r - q, hi = r;;) {
            const bool take_hi = abs(hi) <= abs(lo);
            const Integer cnt = take_hi ? hi : lo;
            const Rational step_cost = abs(Rational(cnt)) * v;
            if (best && step_cost >= *best)
                break;
            const Rational total = step_cost + eval(k - 1, sub(s_, x, scalar_mul(s_, cnt, c.hk)));
            if (!best || total < *best)
                best = total;
            if (take_hi)
                hi += q;
            else
                lo -= q;
        }
        return *best;
    }

    GroupScheme s_;
    std::vector<Cache> levels_;
};

// ---------------------------------------------------------------------------
// Stage and ledger.

struct CopyRecord {
    IndexMap sigma;        // B -> B' ⊆ C_n (the inverse of the proof's φ')
    IndexMap phi;          // A -> A' (fresh block)
    std::size_t level = 0; // level index of the block
    std::vector<Bridge> bridges;
    std::vector<Rational> bridge_values; // λ_{n+1}(d_c - d_{φ(c)})
    bool equiv_ok = false;
    bool bridge_ok = false;
    bool preservation_ok = false;
    std::optional<std::string> problem;

    nlohmann::json to_json() const {
        nlohmann::json br = nlohmann::json::array();
        for (std::size_t i = 0; i < bridges.size(); ++i)
            br.push_back({{"from", bridges[i].from},
                          {"to", bridges[i].to},
                          {"h", to_string(bridges[i].h)},
                          {"value", to_string(bridge_values.at(i))}});
        nlohmann::json j{{"sigma", sigma.to_json()},   {"phi", phi.to_json()},
                         {"level", level},             {"bridges", std::move(br)},
                         {"equiv_ok", equiv_ok},       {"bridge_ok", bridge_ok},
                         {"preservation_ok", preservation_ok}};
        if (problem)
            j["problem"] = *problem;
        return j;
    }

    static CopyRecord from_json(const nlohmann::json& j) {
        CopyRecord c;
        c.sigma = IndexMap::from_json(j.at("sigma"));
        c.phi = IndexMap::from_json(j.at("phi"));
        c.level = j.at("level").get<std::size_t>();
        for (const auto& b : j.at("bridges")) {
            c.bridges.push_back(Bridge{b.at("from").get<std::size_t>(), b.at("to").get<std::size_t>(),
                                       parse_rational(b.at("h").get<std::string>())});
            c.bridge_values.push_back(parse_rational(b.at("value").get<std::string>()));
        }
        c.equiv_ok = j.at("equiv_ok").get<bool>();
        c.bridge_ok = j.at("bridge_ok").get<bool>();
        c.preservation_ok = j.at("preservation_ok").get<bool>();
        if (j.contains("problem"))
            c.problem = j.at("problem").get<std::string>();
        return c;
    }
};

struct TripleRecord {
    std::size_t step = 0; // n
    std::size_t schedule_pos = 0;
    GenericTriple triple;
    Rational eps;         // 1/2^n
    std::size_t bound = 0;
    std::size_t levels_before = 0;
    std::size_t levels_after = 0;
    std::vector<CopyRecord> copies;
    std::string housekeeping; // "present" or "new"
    std::size_t housekeeping_index = 0;

    std::string status() const { return copies.empty() ? "no-copy" : "processed"; }

    nlohmann::json to_json() const {
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& c : copies)
            cj.push_back(c.to_json());
        return {{"step", step},
                {"schedule_pos", schedule_pos},
                {"triple", triple.to_json()},
                {"eps", to_string(eps)},
                {"bound", bound},
                {"levels_before", levels_before},
                {"levels_after", levels_after},
                {"status", status()},
                {"copies", std::move(cj)},
                {"housekeeping", {{"index", housekeeping_index}, {"kind", housekeeping}}}};
    }

    static TripleRecord from_json(const GroupScheme& s, const nlohmann::json& j) {
        TripleRecord r;
        r.step = j.at("step").get<std::size_t>();
        r.schedule_pos = j.at("schedule_pos").get<std::size_t>();
        r.triple = GenericTriple::from_json(s, j.at("triple"));
        r.eps = parse_rational(j.at("eps").get<std::string>());
        r.bound = j.at("bound").get<std::size_t>();
        r.levels_before = j.at("levels_before").get<std::size_t>();
        r.levels_after = j.at("levels_after").get<std::size_t>();
        for (const auto& c : j.at("copies"))
            r.copies.push_back(CopyRecord::from_json(c));
        r.housekeeping_index = j.at("housekeeping").at("index").get<std::size_t>();
        r.housekeeping = j.at("housekeeping").at("kind").get<std::string>();
        return r;
    }
};

struct GenericSeed {
    IndexSet c;
    PartialNorm table;
};

inline GenericSeed default_generic_seed(const GroupScheme& s) {
    return GenericSeed{{1}, generator_norm(s, {1}, {Rational(1)})};
}

/// A finite stage (C_n, λ_n). `table` holds the closure values on every level
/// table entry and bridge, the stage's finite generating table.
struct GenericStage {
    GroupScheme scheme;
    std::size_t step = 0;
    IndexSet indices;
    std::vector<StageLevel> levels;
    PartialNorm table;
    std::vector<TripleRecord> triples;
    nlohmann::json schedule;
    std::size_t schedule_pos = 0;
    std::size_t bound = 4;

    GenericStage() = default;
    GenericStage(const GenericStage& o)
        : scheme(o.scheme), step(o.step), indices(o.indices), levels(o.levels), table(o.table), triples(o.triples),
          schedule(o.schedule), schedule_pos(o.schedule_pos), bound(o.bound) {}
    GenericStage& operator=(const GenericStage& o) {
        if (this != &o) {
            GenericStage tmp(o);
            *this = std::move(tmp);
        }
        return *this;
    }
    GenericStage(GenericStage&&) = default;
    GenericStage& operator=(GenericStage&&) = default;

    /// The level evaluator, built lazily and kept in step with `levels`.
    StageNorm& norm() const {
        if (!norm_ || norm_->size() > levels.size())
            norm_ = std::make_shared<StageNorm>(scheme);
        while (norm_->size() < levels.size())
            norm_->push(levels[norm_->size()]);
        return *norm_;
    }

    Rational value(const GroupElement& x) const { return norm().value(x, levels.size() - 1); }

    NormFn fn() const { return norm().fn(levels.size() - 1); }

    bool contains_index(std::size_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }

    std::size_t next_free_coord() const {
        std::size_t out = 0;
        for (std::size_t i : indices)
            out = std::max(out, gen_element(scheme, i).entries().front().first + 1);
        for (const auto& l : levels)
            for (std::size_t c : l.coords)
                out = std::max(out, c + 1);
        return out;
    }

    /// Every element whose value is recorded: level entries and bridges.
    std::vector<GroupElement> generating_elements() const {
        std::set<GroupElement> out;
        for (const auto& l : levels) {
            for (const auto& [g, v] : l.table.table())
                out.insert(g);
            for (const auto& b : l.bridges) {
                const GroupElement e = sub(scheme, gen_element(scheme, b.from), gen_element(scheme, b.to));
                out.insert(e);
                out.insert(neg(scheme, e));
            }
        }
        return {out.begin(), out.end()};
    }

private:
    mutable std::shared_ptr<StageNorm> norm_;
};

// ---------------------------------------------------------------------------
// Schedules of triples.

class TripleSchedule {
public:
    virtual ~TripleSchedule() = default;
    virtual GenericTriple at(std::size_t pos) const = 0;
    virtual nlohmann::json describe() const = 0;
};

/// A fixed list repeated forever.
class ExplicitTripleSchedule : public TripleSchedule {
public:
    explicit ExplicitTripleSchedule(std::vector<GenericTriple> t) : t_(std::move(t)) {
        if (t_.empty())
            throw std::invalid_argument("empty triple schedule");
    }
    GenericTriple at(std::size_t pos) const override { return t_[pos % t_.size()]; }
    nlohmann::json describe() const override {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& t : t_)
            list.push_back(t.to_json());
        return {{"kind", "explicit"}, {"triples", std::move(list)}};
    }
    const std::vector<GenericTriple>& triples() const { return t_; }

private:
    std::vector<GenericTriple> t_;
};

/// Five triples over the first generators, repeated. Two have B ≠ ∅: the
/// third matches the seed value 1 (giving h = 1/8 at n = 3), the fourth the
/// value 7/4 placed by the first. The other values are pairwise distinct so
/// blocks of one triple are not copies for another.
inline std::vector<GenericTriple> default_triples(const GroupScheme& s) {
    const auto q = [](long a, long b) { return frac(a, b); };
    const GroupElement d1 = gen_element(s, 1), d3 = gen_element(s, 3);
    return {
        GenericTriple{{}, {1, 2}, generator_norm(s, {1, 2}, {q(7, 4), q(5, 2)})},
        GenericTriple{{}, {2}, generator_norm(s, {2}, {q(13, 4)})},
        GenericTriple{{1}, {1, 2}, generator_norm(s, {1, 2}, {Rational(1), q(3, 2)})},
        GenericTriple{{1}, {1, 3}, generator_norm(s, {1, 3}, {q(7, 4), q(9, 4)}, {{add(s, d1, d3), Rational(3)}})},
        GenericTriple{{}, {1, 2, 4}, generator_norm(s, {1, 2, 4}, {q(9, 4), q(11, 4), q(15, 4)})},
    };
}

inline std::unique_ptr<TripleSchedule> triple_schedule_from_json(const GroupScheme& s, const nlohmann::json& j) {
    if (j.is_object() && j.value("kind", "") == "default")
        return std::make_unique<ExplicitTripleSchedule>(default_triples(s));
    const nlohmann::json& list = j.is_array() ? j : j.at("triples");
    std::vector<GenericTriple> t;
    for (const auto& e : list)
        t.push_back(GenericTriple::from_json(s, e));
    return std::make_unique<ExplicitTripleSchedule>(std::move(t));
}

// ---------------------------------------------------------------------------
// Construction.

namespace detail {

inline void require_infinitely_summed(const GroupScheme& s) {
    if (!s.is_infinitely_summed())
        throw UnsupportedGroup("group " + s.to_string() +
                               " is not infinitely summed; fresh generator blocks are unavailable");
}

inline PartialNorm closure_table(const GenericStage& st) {
    PartialNorm out(st.scheme);
    StageNorm& nm = st.norm();
    for (const auto& g : st.generating_elements())
        out.set(g, nm.value(g));
    return out;
}

inline void add_level(GenericStage& st, StageLevel l) {
    st.indices = make_index_set([&] {
        auto v = st.indices;
        v.insert(v.end(), l.added.begin(), l.added.end());
        return v;
    }());
    st.levels.push_back(std::move(l));
}

/// The fresh block for A: coordinates of the generators d_a relabelled onto
/// the first unused coordinates of the same kind past the stage.
inline IndexMap fresh_block(const GenericStage& st, const IndexSet& a) {
    const GroupScheme& s = st.scheme;
    std::set<std::size_t> coords;
    for (std::size_t i : a)
        coords.insert(s.generator_position(i)->first);
    std::map<std::size_t, std::size_t> relabel;
    std::size_t cursor = st.next_free_coord();
    for (std::size_t c : coords) {
        while (!(s.kind(cursor) == s.kind(c)))
            ++cursor;
        relabel[c] = cursor++;
    }
    IndexMap phi;
    for (std::size_t i : a) {
        const auto [c, lvl] = *s.generator_position(i);
        phi.domain.push_back(i);
        phi.image.push_back(s.generator_index(relabel.at(c), lvl));
    }
    if (!phi.is_isomorphism(s))
        throw ConstructionFailure("fresh block map is not an isomorphism");
    return phi;
}

/// Injective maps σ: B -> C (in lexicographic order of the image tuple) with
/// σ an isomorphism and (B, ρ) ≡_{σ,ε} (σB, λ) on the L-ball.
inline std::vector<IndexMap> find_copies(const GenericStage& st, const GenericTriple& t, const NormFn& rho,
                                         const Rational& eps, std::size_t L) {
    const GroupScheme& s = st.scheme;
    NormFn lambda = st.fn();
    std::vector<std::vector<std::size_t>> options;
    for (std::size_t b : t.b) {
        const Rational rb = rho(gen_element(s, b));
        std::vector<std::size_t> opt;
        for (std::size_t c : st.indices)
            if (lt_eps(lambda(gen_element(s, c)) - rb, eps, 1))
                opt.push_back(c);
        options.push_back(std::move(opt));
    }
    std::vector<IndexMap> out;
    IndexMap cur{t.b, {}};
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == t.b.size()) {
            if (!cur.is_isomorphism(s))
                return;
            if (equiv_eps_bounded(s, rho, lambda, cur, eps, L).holds)
                out.push_back(cur);
            return;
        }
        for (std::size_t c : options[i]) {
            if (std::find(cur.image.begin(), cur.image.end(), c) != cur.image.end())
                continue;
            cur.image.push_back(c);
            rec(i + 1);
            cur.image.pop_back();
        }
    };
    rec(0);
    return out;
}

/// Value for a new housekeeping generator g: 1, or λ(q·g)/q when larger,
/// where q is the order of g modulo F_C. Any value ≥ λ(q·g)/q keeps λ on F_C.
inline std::pair<Rational, std::optional<Integer>> housekeeping_value(GenericStage& st, const GroupElement& g) {
    const GroupScheme& s = st.scheme;
    auto fam = st.norm().family(st.levels.size() - 1);
    fam.push_back(g);
    Integer q = 0;
    for (const auto& rel : relation_basis(s, fam))
        q = gcd(q, rel.back());
    q = abs(q);
    if (q == 0)
        return {Rational(1), std::nullopt};
    const Rational v = st.value(scalar_mul(s, q, g)) / Rational(q);
    return {std::max(Rational(1), v), q};
}

} // namespace detail

/// Stage C_1 = C with λ_1 the closure of the seed table.
inline GenericStage initial_generic_stage(const GroupScheme& s, const std::optional<GenericSeed>& seed = {},
                                          std::size_t L = 4) {
    detail::require_infinitely_summed(s);
    GenericSeed sd = seed ? *seed : default_generic_seed(s);
    sd.c = make_index_set(sd.c);
    for (const auto& g : sd.table.elements())
        if (!in_span(s, g, sd.c))
            throw PreconditionFailure("seed element " + format_element(s, g) + " is outside F_C");
    const auto gens = sd.table.elements();
    for (std::size_t i : sd.c)
        if (!represent_in(s, gen_element(s, i), gens))
            throw PreconditionFailure("seed table does not generate d_" + std::to_string(i));
    if (auto v = validate_partial_norm(sd.table))
        throw InvalidNorm(*v, s);
    GenericStage st;
    st.scheme = s;
    st.bound = L;
    StageLevel l;
    l.kind = StageLevel::Kind::Seed;
    l.added = sd.c;
    l.table = sd.table;
    detail::add_level(st, std::move(l));
    st.table = detail::closure_table(st);
    return st;
}

/// One density step on triple T at step n (ε = 1/2^n): a fresh block and
/// bridges for every copy B' of B inside C_n, then the housekeeping index n.
/// The step's obligations are asserted; a failure throws ConstructionFailure
/// with the record attached in the message.
inline TripleRecord density_step(GenericStage& st, const GenericTriple& t, std::size_t n, std::size_t schedule_pos = 0) {
    detail::require_infinitely_summed(st.scheme);
    const GroupScheme& s = st.scheme;
    if (auto p = t.check(); !p.empty())
        throw PreconditionFailure("triple: " + p.front());
    const std::size_t L = st.bound;
    TripleRecord rec;
    rec.step = n;
    rec.schedule_pos = schedule_pos;
    rec.triple = t;
    rec.eps = Rational(1);
    for (std::size_t i = 0; i < n; ++i)
        rec.eps /= 2;
    rec.bound = L;
    rec.levels_before = st.levels.size();
    const NormFn rho = closure_fn(t.rho);
    const std::size_t top_before = st.levels.size() - 1;

    const auto copies = detail::find_copies(st, t, rho, rec.eps, L);
    for (const auto& sigma : copies) {
        const IndexMap phi = detail::fresh_block(st, t.a);
        CopyRecord cr;
        cr.sigma = sigma;
        cr.phi = phi;
        StageLevel l;
        l.kind = StageLevel::Kind::Block;
        l.step = n;
        l.added = phi.image_set();
        PartialNorm img(s);
        for (const auto& [g, v] : t.rho.table())
            img.set(phi.apply(s, g), v);
        l.table = img;
        std::set<std::size_t> coords;
        for (std::size_t i : phi.image)
            coords.insert(s.generator_position(i)->first);
        l.coords.assign(coords.begin(), coords.end());
        for (std::size_t b : t.b) {
            const std::size_t c = sigma.at(b);
            const Rational h = std::min(rec.eps, Rational(st.value(gen_element(s, c)) + rho(gen_element(s, b))));
            l.bridges.push_back(Bridge{c, phi.at(b), h});
        }
        cr.bridges = l.bridges;
        cr.level = st.levels.size();
        detail::add_level(st, std::move(l));
        rec.copies.push_back(std::move(cr));
    }
    // Housekeeping: index n joins C.
    rec.housekeeping_index = n;
    const GroupElement dn = gen_element(s, n);
    if (st.contains_index(n)) {
        rec.housekeeping = "present";
    } else if (represent_in(s, dn, st.norm().family(st.levels.size() - 1))) {
        rec.housekeeping = "present";
        st.indices = make_index_set([&] {
            auto v = st.indices;
            v.push_back(n);
            return v;
        }());
    } else {
        rec.housekeeping = "new";
        auto [v, q] = detail::housekeeping_value(st, dn);
        StageLevel l;
        l.kind = StageLevel::Kind::Housekeeping;
        l.step = n;
        l.added = {n};
        l.index = n;
        l.value = v;
        l.order = q;
        l.table = PartialNorm(s);
        l.table.set(dn, v);
        l.table.set(neg(s, dn), v);
        detail::add_level(st, std::move(l));
    }
    if (st.contains_index(n) == false)
        throw ConstructionFailure("housekeeping index was not added");
    rec.levels_after = st.levels.size();

    // Obligations.
    StageNorm& nm = st.norm();
    const std::size_t top = st.levels.size() - 1;
    const NormFn after = nm.fn(top);
    const NormFn before = nm.fn(top_before);
    std::vector<GroupElement> old_elems = st.table.elements();
    for (auto& cr : rec.copies) {
        const auto eq = equiv_eps_bounded(s, rho, after, cr.phi, Rational(0), L);
        cr.equiv_ok = eq.holds;
        if (!eq.holds)
            cr.problem = "rho(" + format_element(s, *eq.violation) + ") = " + to_string(eq.lhs) +
                         " but the block copy has value " + to_string(eq.rhs);
        cr.bridge_ok = true;
        for (const auto& b : cr.bridges) {
            const Rational v = after(sub(s, gen_element(s, b.from), gen_element(s, b.to)));
            cr.bridge_values.push_back(v);
            cr.bridge_ok = cr.bridge_ok && v <= rec.eps;
        }
        cr.preservation_ok = true;
        std::vector<GroupElement> probe = old_elems;
        const WordBall ball = word_ball(s, cr.sigma.image_set(), L);
        probe.insert(probe.end(), ball.elements.begin(), ball.elements.end());
        for (const auto& x : probe)
            if (before(x) != after(x)) {
                cr.preservation_ok = false;
                cr.problem = "old value of " + format_element(s, x) + " changed from " + to_string(before(x)) +
                             " to " + to_string(after(x));
                break;
            }
    }
    for (const auto& x : old_elems)
        if (before(x) != after(x))
            throw ConstructionFailure("step " + std::to_string(n) + ": old value of " + format_element(s, x) +
                                      " changed; record " + rec.to_json().dump());
    for (const auto& cr : rec.copies)
        if (!cr.equiv_ok || !cr.bridge_ok || !cr.preservation_ok)
            throw ConstructionFailure("step " + std::to_string(n) + ": " + cr.problem.value_or("bridge bound") +
                                      "; record " + rec.to_json().dump());
    st.table = detail::closure_table(st);
    st.step = n;
    st.triples.push_back(rec);
    return rec;
}

struct GenericBuildOptions {
    std::function<void(const GenericStage&)> on_checkpoint;
};

/// Runs density steps until `n_steps` triples have been processed.
inline GenericStage build_generic_stages(GenericStage st, const TripleSchedule& sched, std::size_t n_steps,
                                         const GenericBuildOptions& opt = {}) {
    st.schedule = sched.describe();
    if (opt.on_checkpoint && st.step == 0)
        opt.on_checkpoint(st);
    while (st.step < n_steps) {
        const std::size_t n = st.step + 1;
        density_step(st, sched.at(st.schedule_pos), n, st.schedule_pos);
        ++st.schedule_pos;
        if (opt.on_checkpoint)
            opt.on_checkpoint(st);
    }
    return st;
}

inline GenericStage build_generic_stages(const GroupScheme& s, const TripleSchedule& sched, std::size_t n_steps,
                                         const std::optional<GenericSeed>& seed = {}, std::size_t L = 4,
                                         const GenericBuildOptions& opt = {}) {
    return build_generic_stages(initial_generic_stage(s, seed, L), sched, n_steps, opt);
}

// ---------------------------------------------------------------------------
// Witness search for the G_δ condition.

struct WitnessResult {
    std::optional<IndexMap> phi;
    std::size_t candidates = 0;
    std::size_t bound = 0;
};

/// Searches index maps φ: A -> C_n, in lexicographic order of the image tuple,
/// with (A, ρ) ≡_{φ,ε'} (φA, λ) on the L-ball and δ_φ(A_0, φA_0) < ε. The
/// hypothesis (A_0, ρ) ≡_{id,ε} (A_0, λ) is checked first. A `first`
/// candidate (such as a logged block map) is tried before the search.
inline WitnessResult gdelta_witness(const GenericStage& st, const IndexSet& a0, const IndexSet& a,
                                    const PartialNorm& rho_table, const Rational& eps, const Rational& eps_prime,
                                    std::size_t L, const std::optional<IndexMap>& first = {}) {
    const GroupScheme& s = st.scheme;
    if (!(eps > eps_prime) || eps_prime < 0)
        throw std::invalid_argument("need ε > ε' >= 0");
    if (!std::includes(a.begin(), a.end(), a0.begin(), a0.end()))
        throw std::invalid_argument("A_0 is not a subset of A");
    const NormFn rho = closure_fn(rho_table);
    const NormFn lambda = st.fn();
    if (!a0.empty()) {
        for (std::size_t i : a0)
            if (!in_span(s, gen_element(s, i), st.indices))
                throw PreconditionFailure("d_" + std::to_string(i) + " is outside the stage");
        const auto pre = equiv_eps_bounded(s, rho, lambda, IndexMap::identity(a0), eps, L);
        if (!pre.holds)
            throw PreconditionFailure("hypothesis fails at " + format_element(s, *pre.violation) + ": rho = " +
                                      to_string(pre.lhs) + ", lambda = " + to_string(pre.rhs));
    }
    WitnessResult out;
    out.bound = L;
    std::vector<std::vector<std::size_t>> options;
    for (std::size_t x : a) {
        const GroupElement dx = gen_element(s, x);
        const Rational rx = rho(dx);
        const bool anchored = std::binary_search(a0.begin(), a0.end(), x);
        std::vector<std::size_t> opt;
        for (std::size_t c : st.indices) {
            const GroupElement dc = gen_element(s, c);
            if (!lt_eps(lambda(dc) - rx, eps_prime, 1))
                continue;
            if (anchored && !(lambda(sub(s, dx, dc)) < eps))
                continue;
            opt.push_back(c);
        }
        options.push_back(std::move(opt));
    }
    IndexMap cur{a, {}};
    std::function<bool(std::size_t)> rec = [&](std::size_t i) {
        if (i == a.size()) {
            ++out.candidates;
            if (!cur.is_isomorphism(s))
                return false;
            if (!equiv_eps_bounded(s, rho, lambda, cur, eps_prime, L).holds)
                return false;
            if (!delta_phi(s, lambda, cur.restricted(a0), eps).holds)
                return false;
            out.phi = cur;
            return true;
        }
        for (std::size_t c : options[i]) {
            if (std::find(cur.image.begin(), cur.image.end(), c) != cur.image.end())
                continue;
            cur.image.push_back(c);
            if (rec(i + 1))
                return true;
            cur.image.pop_back();
        }
        return false;
    };
    if (a.empty()) {
        out.phi = IndexMap{};
        return out;
    }
    if (first && first->domain == a) {
        cur = *first;
        if (rec(a.size()))
            return out;
        cur.image.clear();
    }
    rec(0);
    return out;
}

// ---------------------------------------------------------------------------
// Validation and serialization.

/// Problems with the stage's own data; empty when consistent.
inline std::vector<std::string> check_generic_stage(const GenericStage& st) {
    std::vector<std::string> out;
    const GroupScheme& s = st.scheme;
    if (st.levels.empty() || st.levels.front().kind != StageLevel::Kind::Seed)
        return {"stage has no seed level"};
    if (auto v = check_pointwise_axioms(st.table))
        out.push_back("stored table: " + v->describe(s));
    std::vector<std::size_t> all;
    for (const auto& l : st.levels) {
        all.insert(all.end(), l.added.begin(), l.added.end());
        if (l.kind != StageLevel::Kind::Housekeeping)
            if (auto v = validate_partial_norm(l.table))
                out.push_back(std::string(StageLevel::kind_name(l.kind)) + " table at step " +
                              std::to_string(l.step) + ": " + v->describe(s));
    }
    for (std::size_t i : st.indices)
        if (!std::count(all.begin(), all.end(), i) && !in_span(s, gen_element(s, i), make_index_set(all)))
            out.push_back("index " + std::to_string(i) + " is outside F_C");
    try {
        StageNorm& nm = st.norm();
        const auto gens = st.generating_elements();
        for (const auto& g : gens) {
            const Rational v = nm.value(g);
            if (!st.table.contains(g) || st.table.at(g) != v)
                out.push_back("stored value of " + format_element(s, g) + " differs from the closure " +
                              to_string(v));
        }
        if (st.table.size() != gens.size())
            out.push_back("stored table has entries outside the generating set");
        for (const auto& l : st.levels) {
            for (const auto& [g, v] : l.table.table())
                if (nm.value(g) != v)
                    out.push_back(std::string(StageLevel::kind_name(l.kind)) + " entry " + format_element(s, g) +
                                  " is not kept by the stage norm");
            for (const auto& b : l.bridges)
                if (nm.value(sub(s, gen_element(s, b.from), gen_element(s, b.to))) > b.h)
                    out.push_back("bridge above h");
        }
    } catch (const std::exception& e) {
        out.push_back(std::string("evaluation failed: ") + e.what());
    }
    return out;
}

/// Re-checks every logged triple against the levels: ≡_{φ,0} on the L-ball
/// of each block, bridge bounds, preservation of the older stage (its level
/// entries and the L-ball of each copy B'), and the witness maps.
inline std::vector<std::string> verify_generic_ledger(const GenericStage& st) {
    std::vector<std::string> out;
    const GroupScheme& s = st.scheme;
    StageNorm& nm = st.norm();
    for (const auto& r : st.triples) {
        const std::string tag = "step " + std::to_string(r.step) + ": ";
        if (r.levels_before == 0 || r.levels_after > st.levels.size() || r.levels_after < r.levels_before) {
            out.push_back(tag + "level range out of bounds");
            continue;
        }
        Rational eps(1);
        for (std::size_t i = 0; i < r.step; ++i)
            eps /= 2;
        if (r.eps != eps)
            out.push_back(tag + "ε is not 1/2^n");
        const NormFn rho = closure_fn(r.triple.rho);
        const NormFn before = nm.fn(r.levels_before - 1);
        const NormFn after = nm.fn(r.levels_after - 1);
        std::vector<GroupElement> old;
        for (std::size_t k = 0; k < r.levels_before; ++k)
            for (const auto& [g, v] : st.levels[k].table.table())
                old.push_back(g);
        for (const auto& c : r.copies) {
            if (!c.phi.is_isomorphism(s) || !c.sigma.is_isomorphism(s))
                out.push_back(tag + "index map is not an isomorphism");
            if (c.level < r.levels_before || c.level >= r.levels_after)
                out.push_back(tag + "copy level outside the step");
            const auto eq = equiv_eps_bounded(s, rho, after, c.phi, Rational(0), r.bound);
            if (!eq.holds)
                out.push_back(tag + "block differs from rho at " + format_element(s, *eq.violation));
            if (!equiv_eps_bounded(s, rho, before, c.sigma, r.eps, r.bound).holds)
                out.push_back(tag + "copy B' is not 1/2^n-close to B");
            // δ over B' for the composite map B' -> A'.
            const IndexMap bridge_map = c.sigma.inverse().then(c.phi);
            const auto d = delta_phi(s, after, bridge_map, r.eps);
            if (d.max > r.eps)
                out.push_back(tag + "bridge value above 1/2^n");
            for (std::size_t i = 0; i < c.bridges.size(); ++i) {
                const Rational v = after(sub(s, gen_element(s, c.bridges[i].from), gen_element(s, c.bridges[i].to)));
                if (i >= c.bridge_values.size() || v != c.bridge_values[i])
                    out.push_back(tag + "logged bridge value differs");
            }
            std::vector<GroupElement> probe = old;
            const WordBall ball = word_ball(s, c.sigma.image_set(), r.bound);
            probe.insert(probe.end(), ball.elements.begin(), ball.elements.end());
            for (const auto& x : probe)
                if (before(x) != after(x)) {
                    out.push_back(tag + "older value of " + format_element(s, x) + " changed");
                    break;
                }
            if (!c.equiv_ok || !c.bridge_ok || !c.preservation_ok)
                out.push_back(tag + "logged check failed");
        }
    }
    return out;
}

inline nlohmann::json generic_stage_to_json(const GenericStage& st) {
    nlohmann::json elems = nlohmann::json::array();
    for (const auto& [g, v] : st.table.table())
        elems.push_back(element_to_json(g));
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : st.levels)
        levels.push_back(l.to_json());
    nlohmann::json triples = nlohmann::json::array();
    for (const auto& r : st.triples)
        triples.push_back(r.to_json());
    return {{"schema_version", kSchemaVersion},
            {"kind", "generic"},
            {"scheme", st.scheme.to_string()},
            {"step", st.step},
            {"elements", std::move(elems)},
            {"points", nlohmann::json::array()},
            {"norm_table", norm_to_json(st.table)["values"]},
            {"schedule", st.schedule},
            {"schedule_pos", st.schedule_pos},
            {"ledger", nlohmann::json::array()},
            {"indices", st.indices},
            {"bound", st.bound},
            {"levels", std::move(levels)},
            {"triples", std::move(triples)}};
}

inline bool is_generic_checkpoint(const nlohmann::json& j) {
    return j.is_object() && j.contains("kind") && j.at("kind") == "generic";
}

inline GenericStage generic_stage_from_json(const nlohmann::json& j) {
    if (!is_generic_checkpoint(j))
        throw ParseError("not a generic checkpoint");
    for (const char* key : {"schema_version", "scheme", "step", "elements", "norm_table", "schedule_pos", "indices",
                            "bound", "levels", "triples"})
        if (!j.contains(key))
            throw ParseError(std::string("checkpoint missing '") + key + "'");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ParseError("unsupported schema_version " + j.at("schema_version").dump());
    GenericStage st;
    st.scheme = GroupScheme::parse(j.at("scheme").get<std::string>());
    st.step = j.at("step").get<std::size_t>();
    st.schedule_pos = j.at("schedule_pos").get<std::size_t>();
    if (j.contains("schedule"))
        st.schedule = j.at("schedule");
    st.indices = make_index_set(j.at("indices").get<std::vector<std::size_t>>());
    st.bound = j.at("bound").get<std::size_t>();
    for (const auto& l : j.at("levels"))
        st.levels.push_back(StageLevel::from_json(st.scheme, l));
    nlohmann::json nj{{"domain", j.at("elements")}, {"values", j.at("norm_table")}};
    st.table = norm_from_json(nj, st.scheme);
    for (const auto& r : j.at("triples"))
        st.triples.push_back(TripleRecord::from_json(st.scheme, r));
    return st;
}

} // namespace invnorm
