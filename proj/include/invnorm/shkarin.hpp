#pragma once

// Finite groups with rational norms: quotient seminorms, amalgamation over a
// common subgroup with audit certificates, iterated amalgamation stages and
// the bounded extension-property check.

#include "invnorm/finite_group.hpp"
#include "invnorm/generic.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace invnorm {

struct FiniteNormedGroup {
    FiniteGroup group;
    std::vector<Rational> norm; // by element index

    /// First violated axiom, or nullopt for a norm. The table is total, so
    /// subadditivity on pairs covers every decomposition.
    std::optional<std::string> check() const {
        const std::size_t n = group.size();
        if (norm.size() != n)
            return "norm table has " + std::to_string(norm.size()) + " entries for " + std::to_string(n) + " elements";
        if (norm[0] != 0)
            return "value at 0 is not 0";
        for (std::size_t x = 1; x < n; ++x) {
            if (norm[x] <= 0)
                return "value at " + describe(x) + " is not positive";
            if (norm[group.neg(x)] != norm[x])
                return "value at " + describe(x) + " differs from its negative";
        }
        for (std::size_t x = 1; x < n; ++x)
            for (std::size_t y = x; y < n; ++y)
                if (norm[group.add(x, y)] > norm[x] + norm[y])
                    return "subadditivity fails at " + describe(x) + " + " + describe(y);
        return std::nullopt;
    }

    std::string describe(std::size_t x) const {
        std::string out = "(";
        const auto c = group.coords(x);
        for (std::size_t i = 0; i < c.size(); ++i)
            out += (i ? "," : "") + std::to_string(c[i]);
        return out + ")";
    }

    nlohmann::json to_json() const {
        nlohmann::json vals = nlohmann::json::array();
        for (std::size_t x = 0; x < group.size(); ++x)
            vals.push_back(nlohmann::json::array({group.coords(x), to_string(norm[x])}));
        return {{"factors", group.factors()}, {"norm", std::move(vals)}};
    }

    static FiniteNormedGroup from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("factors") || !j.contains("norm"))
            throw ParseError("finite normed group needs 'factors' and 'norm'");
        FiniteNormedGroup g{FiniteGroup(j.at("factors").get<std::vector<long>>()), {}};
        std::vector<std::optional<Rational>> vals(g.group.size());
        vals[0] = Rational(0);
        for (const auto& e : j.at("norm")) {
            if (!e.is_array() || e.size() != 2 || !e[1].is_string())
                throw ParseError("norm entries are [coords, \"p/q\"]");
            const std::size_t x = g.group.index(e[0].get<std::vector<long>>());
            const Rational v = parse_rational(e[1].get<std::string>());
            vals[x] = v;
            if (!vals[g.group.neg(x)])
                vals[g.group.neg(x)] = v;
        }
        for (std::size_t x = 0; x < vals.size(); ++x) {
            if (!vals[x])
                throw ParseError("norm table has no value at " + g.describe(x));
            g.norm.push_back(*vals[x]);
        }
        return g;
    }
};

/// Closure of a positive symmetric table on a finite group: the largest
/// seminorm below it (least-cost decomposition, Dijkstra over all elements).
inline std::vector<Rational> finite_closure(const FiniteGroup& g, const std::vector<Rational>& chi) {
    const std::size_t n = g.size();
    std::vector<std::optional<Rational>> dist(n);
    std::vector<char> done(n, 0);
    using Item = std::pair<Rational, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[0] = Rational(0);
    pq.emplace(Rational(0), 0);
    while (!pq.empty()) {
        auto [d, x] = pq.top();
        pq.pop();
        if (done[x])
            continue;
        done[x] = 1;
        for (std::size_t e = 1; e < n; ++e) {
            const std::size_t y = g.add(x, e);
            const Rational nd = d + chi[e];
            if (!dist[y] || nd < *dist[y]) {
                dist[y] = nd;
                pq.emplace(nd, y);
            }
        }
    }
    std::vector<Rational> out;
    for (auto& v : dist)
        out.push_back(*v);
    return out;
}

struct QuotientSeminorm {
    FiniteQuotient quotient;
    std::vector<Rational> value; // by quotient element index
    bool is_norm = true;         // min is 0 only on H
};

/// Coset minimum: value(x + H) = min_{h ∈ H} λ(x + h).
inline QuotientSeminorm quotient_seminorm(const FiniteNormedGroup& g, const std::vector<std::size_t>& h_gens) {
    QuotientSeminorm out{finite_quotient(g.group, h_gens), {}, true};
    const std::size_t m = out.quotient.group.size();
    std::vector<std::optional<Rational>> best(m);
    for (std::size_t x = 0; x < g.group.size(); ++x) {
        auto& b = best[out.quotient.projection[x]];
        if (!b || g.norm[x] < *b)
            b = g.norm[x];
    }
    for (std::size_t c = 0; c < m; ++c) {
        out.value.push_back(*best[c]);
        if (c != 0 && *best[c] == 0)
            out.is_norm = false;
    }
    const FiniteGroup& q = out.quotient.group;
    for (std::size_t x = 0; x < m; ++x) {
        if (out.value[q.neg(x)] != out.value[x])
            throw std::logic_error("quotient seminorm is not symmetric");
        for (std::size_t y = 0; y < m; ++y)
            if (out.value[q.add(x, y)] > out.value[x] + out.value[y])
                throw std::logic_error("quotient seminorm is not subadditive");
    }
    return out;
}

/// An embedding of normed finite groups: an injective homomorphism,
/// isometric where claimed.
struct FiniteEmbedding {
    FiniteNormedGroup source;
    FiniteNormedGroup target;
    FiniteHom map;

    std::vector<std::string> problems(bool require_isometry = true) const {
        std::vector<std::string> out;
        if (!(map.source == source.group) || !(map.target == target.group))
            out.push_back("map groups do not match the normed groups");
        else if (!map.well_defined())
            out.push_back("generator images violate the relations");
        else {
            if (!map.injective())
                out.push_back("map is not injective");
            if (require_isometry)
                for (std::size_t x = 0; x < source.group.size(); ++x)
                    if (target.norm[map.apply(x)] != source.norm[x]) {
                        out.push_back("not isometric at " + source.describe(x));
                        break;
                    }
        }
        return out;
    }
};

/// JSON form {"g0": group, "g": group, "images": [coords of each G0
/// generator's image]}.
inline nlohmann::json embedding_to_json(const FiniteEmbedding& e) {
    nlohmann::json im = nlohmann::json::array();
    for (std::size_t i : e.map.images)
        im.push_back(e.target.group.coords(i));
    return {{"g0", e.source.to_json()}, {"g", e.target.to_json()}, {"images", std::move(im)}};
}

inline FiniteEmbedding embedding_from_json(const nlohmann::json& j) {
    for (const char* key : {"g0", "g", "images"})
        if (!j.contains(key))
            throw ParseError(std::string("embedding missing '") + key + "'");
    FiniteEmbedding e{FiniteNormedGroup::from_json(j.at("g0")), FiniteNormedGroup::from_json(j.at("g")), {}};
    e.map = FiniteHom{e.source.group, e.target.group, {}};
    for (const auto& c : j.at("images"))
        e.map.images.push_back(e.target.group.index(c.get<std::vector<long>>()));
    if (e.map.images.size() != e.source.group.rank())
        throw ParseError("one image per generator of G0 is required");
    return e;
}

class AmalgamCounterexample : public std::runtime_error {
public:
    AmalgamCounterexample(const std::string& what, nlohmann::json cert)
        : std::runtime_error(what), certificate(std::move(cert)) {}
    nlohmann::json certificate;
};

struct Amalgam {
    FiniteNormedGroup group;
    FiniteHom j1, j2;
    nlohmann::json certificate;
};

/// Pushout of e1: G0 -> G1 and e2: G0 -> G2. The carrier is
/// (G1 ⊕ G2) / {(e1 g, -e2 g)}, the norm the coset minimum of the closure of
/// χ(x1, x2) = λ1(x1) + λ2(x2). Isometry of j1, j2, commutation and the norm
/// axioms are checked; a failure throws AmalgamCounterexample.
inline Amalgam amalgamate(const FiniteEmbedding& e1, const FiniteEmbedding& e2) {
    if (!(e1.source.group == e2.source.group) || e1.source.norm != e2.source.norm)
        throw std::invalid_argument("embeddings have different sources");
    for (const FiniteEmbedding* e : {&e1, &e2})
        if (auto p = e->problems(); !p.empty())
            throw std::invalid_argument("embedding: " + p.front());
    const FiniteGroup& g0 = e1.source.group;
    const FiniteSum sum = direct_sum(e1.target.group, e2.target.group);
    const FiniteGroup& p = sum.group;
    std::vector<Rational> chi(p.size());
    for (std::size_t a = 0; a < e1.target.group.size(); ++a)
        for (std::size_t b = 0; b < e2.target.group.size(); ++b)
            chi[p.add(sum.in1.apply(a), sum.in2.apply(b))] = e1.target.norm[a] + e2.target.norm[b];
    FiniteNormedGroup pre{p, finite_closure(p, chi)};
    std::vector<std::size_t> k_gens;
    for (std::size_t i = 0; i < g0.rank(); ++i) {
        const std::size_t g = g0.generator(i);
        k_gens.push_back(p.sub(sum.in1.apply(e1.map.apply(g)), sum.in2.apply(e2.map.apply(g))));
    }
    const QuotientSeminorm qs = quotient_seminorm(pre, k_gens);
    Amalgam out;
    out.group = FiniteNormedGroup{qs.quotient.group, qs.value};
    out.j1 = sum.in1.then(qs.quotient.hom);
    out.j2 = sum.in2.then(qs.quotient.hom);

    nlohmann::json checks;
    const FiniteEmbedding j1{e1.target, out.group, out.j1};
    const FiniteEmbedding j2{e2.target, out.group, out.j2};
    const auto p1 = j1.problems(), p2 = j2.problems();
    bool commutes = true;
    for (std::size_t g = 0; g < g0.size(); ++g)
        commutes = commutes && out.j1.apply(e1.map.apply(g)) == out.j2.apply(e2.map.apply(g));
    const auto norm_problem = out.group.check();
    checks["j1_isometric_embedding"] = p1.empty();
    checks["j2_isometric_embedding"] = p2.empty();
    checks["commutes"] = commutes;
    checks["norm"] = !norm_problem.has_value();
    checks["kernel_only_zero"] = qs.is_norm;
    out.certificate = {{"g0", e1.source.to_json()},
                       {"g1", e1.target.to_json()},
                       {"g2", e2.target.to_json()},
                       {"e1", e1.map.to_json()},
                       {"e2", e2.map.to_json()},
                       {"g3", out.group.to_json()},
                       {"j1", out.j1.to_json()},
                       {"j2", out.j2.to_json()},
                       {"checks", checks}};
    std::string why;
    if (!p1.empty())
        why = "j1: " + p1.front();
    else if (!p2.empty())
        why = "j2: " + p2.front();
    else if (!commutes)
        why = "diagram does not commute";
    else if (norm_problem)
        why = "amalgam norm: " + *norm_problem;
    else if (!qs.is_norm)
        why = "amalgam seminorm vanishes off the identification";
    if (!why.empty())
        throw AmalgamCounterexample("amalgam check failed: " + why, out.certificate);
    return out;
}

/// Isomorphism onto the stage from G1, extending a given map on G0, with
/// |λ(φ g) - ρ(g)| < ε (equality when ε = 0).
struct ExtWitness {
    FiniteHom phi;
    Rational max_deviation;
};

struct ExtResult {
    std::optional<ExtWitness> witness;
    std::size_t candidates = 0;
};

/// Condition (3) on a finite fragment: given G0 embedded in the stage by
/// `e0` and in G1 by `i0`, and a norm ρ on G1, search subgroups G1' ≤ stage
/// containing e0[G0] with an isomorphism φ: G1 -> G1' fixing G0 and
/// ρ ≡_ε λ∘φ. The hypothesis |ρ(i0 g) - λ(e0 g)| < ε on G0 is checked.
inline ExtResult check_ext_property3(const FiniteNormedGroup& stage, const FiniteHom& e0, const FiniteHom& i0,
                                     const FiniteNormedGroup& g1, const Rational& eps) {
    if (!(e0.target == stage.group) || !e0.well_defined() || !e0.injective())
        throw std::invalid_argument("G0 is not embedded in the stage");
    if (!(i0.target == g1.group) || !(i0.source == e0.source) || !i0.well_defined() || !i0.injective())
        throw std::invalid_argument("G0 is not embedded in G1");
    if (eps < 0)
        throw std::invalid_argument("ε must be non-negative");
    if (auto p = g1.check())
        throw std::invalid_argument("ρ: " + *p);
    auto close = [&](const Rational& a, const Rational& b) { return eps == 0 ? a == b : abs(a - b) < eps; };
    const FiniteGroup& g0 = e0.source;
    for (std::size_t g = 0; g < g0.size(); ++g)
        if (!close(g1.norm[i0.apply(g)], stage.norm[e0.apply(g)]))
            throw PreconditionFailure("hypothesis fails on G0 at element " + std::to_string(g));

    const FiniteGroup& s = stage.group;
    const std::size_t k = g1.group.rank();
    std::vector<std::vector<std::size_t>> options(k);
    for (std::size_t j = 0; j < k; ++j) {
        const long m = g1.group.factors()[j];
        const Rational r = g1.norm[g1.group.generator(j)];
        for (std::size_t x = 0; x < s.size(); ++x)
            if (s.order(x) == m && close(stage.norm[x], r))
                options[j].push_back(x);
    }
    ExtResult out;
    FiniteHom phi{g1.group, s, {}};
    std::function<bool(std::size_t)> rec = [&](std::size_t j) {
        if (j == k) {
            ++out.candidates;
            if (!phi.injective())
                return false;
            for (std::size_t g = 0; g < g0.size(); ++g)
                if (phi.apply(i0.apply(g)) != e0.apply(g))
                    return false;
            Rational dev(0);
            for (std::size_t x = 0; x < g1.group.size(); ++x) {
                const Rational a = stage.norm[phi.apply(x)], b = g1.norm[x];
                if (!close(a, b))
                    return false;
                dev = std::max(dev, Rational(abs(a - b)));
            }
            out.witness = ExtWitness{phi, dev};
            return true;
        }
        for (std::size_t x : options[j]) {
            phi.images.push_back(x);
            if (rec(j + 1))
                return true;
            phi.images.pop_back();
        }
        return false;
    };
    rec(0);
    return out;
}

/// A pair G0 ≤ G1 with norms: G0 = i0's source, norm the restriction.
struct ExtPair {
    FiniteNormedGroup g0;
    FiniteNormedGroup g1;
    FiniteHom i0;
};

inline FiniteNormedGroup restrict_norm(const FiniteNormedGroup& g1, const FiniteHom& i0) {
    FiniteNormedGroup out{i0.source, {}};
    for (std::size_t x = 0; x < i0.source.size(); ++x)
        out.norm.push_back(g1.norm[i0.apply(x)]);
    return out;
}

/// First isometric embedding of g0 into the stage (generator images in
/// index order), or nullopt.
inline std::optional<FiniteHom> find_isometric_embedding(const FiniteNormedGroup& g0,
                                                         const FiniteNormedGroup& stage) {
    const FiniteGroup& s = stage.group;
    FiniteHom f{g0.group, s, {}};
    std::function<bool(std::size_t)> rec = [&](std::size_t j) {
        if (j == g0.group.rank()) {
            if (!f.injective())
                return false;
            for (std::size_t x = 0; x < g0.group.size(); ++x)
                if (stage.norm[f.apply(x)] != g0.norm[x])
                    return false;
            return true;
        }
        const long m = g0.group.factors()[j];
        for (std::size_t x = 0; x < s.size(); ++x) {
            if (s.order(x) != m || stage.norm[x] != g0.norm[g0.group.generator(j)])
                continue;
            f.images.push_back(x);
            if (rec(j + 1))
                return true;
            f.images.pop_back();
        }
        return false;
    };
    if (rec(0))
        return f;
    return std::nullopt;
}

struct AmalgamStage {
    FiniteNormedGroup group;
    std::vector<nlohmann::json> certificates;
    std::vector<std::size_t> processed; // pair positions amalgamated in
    std::vector<FiniteHom> anchors;     // G0 of each processed pair -> current stage
};

/// Iterated amalgamation: for each pair (G0 ≤ G1, ρ) in order, G0 is located
/// in the stage by an isometric embedding and G1 amalgamated in over it.
/// Pairs whose G0 has no isometric copy, or whose amalgam would exceed
/// `max_size`, are skipped.
inline AmalgamStage amalgamation_stage(const std::vector<ExtPair>& pairs, std::size_t max_size) {
    AmalgamStage st{FiniteNormedGroup{FiniteGroup::trivial(), {Rational(0)}}, {}, {}, {}};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const ExtPair& p = pairs[i];
        if (st.group.group.size() * (p.g1.group.size() / p.g0.group.size()) > max_size)
            continue;
        auto e0 = find_isometric_embedding(p.g0, st.group);
        if (!e0)
            continue;
        const Amalgam a = amalgamate(FiniteEmbedding{p.g0, st.group, *e0}, FiniteEmbedding{p.g0, p.g1, p.i0});
        for (auto& h : st.anchors)
            h = h.then(a.j1);
        st.anchors.push_back(e0->then(a.j1));
        st.group = a.group;
        st.certificates.push_back(a.certificate);
        st.processed.push_back(i);
    }
    return st;
}

} // namespace invnorm
