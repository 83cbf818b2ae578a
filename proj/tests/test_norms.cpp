#include "invnorm/norm.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace invnorm;

namespace {

const GroupScheme Zs = GroupScheme::parse("Z");

GroupElement z(long v) { return parse_element(Zs, std::to_string(v)); }
Rational q(const char* t) { return parse_rational(t); }

PartialNorm zn(std::initializer_list<std::pair<long, const char*>> vals) {
    std::vector<std::pair<GroupElement, Rational>> pairs;
    for (auto [g, v] : vals)
        pairs.emplace_back(z(g), q(v));
    return PartialNorm::symmetric(Zs, pairs);
}

SymSet zset(std::initializer_list<long> vals) {
    std::vector<GroupElement> e;
    for (long v : vals)
        e.push_back(z(v));
    return SymSet::closure_of(Zs, e);
}

} // namespace

TEST(DiffClosure, SpecExamples) {
    EXPECT_EQ(diff_closure(Zs, zset({0, 1, -1})), zset({0, 1, -1, 2, -2}));
    EXPECT_EQ(diff_closure(Zs, zset({0})), zset({0}));
    auto z3 = GroupScheme::parse("Z/3");
    auto a = SymSet::closure_of(z3, {parse_element(z3, "1")});
    EXPECT_EQ(diff_closure(z3, a).size(), 3u);
}

TEST(DecompositionCost, SpecExamples) {
    EXPECT_EQ(decomposition_cost(zn({{1, "1"}}), z(5)), Rational(5));
    EXPECT_EQ(decomposition_cost(zn({{2, "1"}, {3, "1"}}), z(1)), Rational(2));
    EXPECT_EQ(decomposition_cost(zn({{4, "1"}}), z(1)), std::nullopt);
    EXPECT_EQ(decomposition_cost(zn({{4, "1"}}), z(0)), Rational(0));
}

TEST(DecompositionCost, WitnessSumsToTarget) {
    CostOracle o(zn({{2, "1"}, {3, "6/5"}}));
    ASSERT_EQ(o.cost(z(1)), q("11/5"));
    auto w = o.witness(z(1));
    GroupElement sum;
    Rational cost = 0;
    for (const auto& t : w) {
        sum = add(Zs, sum, t);
        cost += zn({{2, "1"}, {3, "6/5"}}).at(t);
    }
    EXPECT_EQ(sum, z(1));
    EXPECT_EQ(cost, q("11/5"));
}

TEST(Validate, SpecExamples) {
    auto bad = validate_partial_norm(zn({{1, "1"}, {2, "3"}}));
    ASSERT_TRUE(bad.has_value());
    EXPECT_EQ(bad->kind, NormViolation::Kind::Subadditivity);
    EXPECT_EQ(bad->element.at(0).get_num() * bad->element.at(0).get_num(), 4);
    EXPECT_EQ(bad->witness_cost, Rational(2));
    EXPECT_EQ(bad->witness.size(), 2u);

    EXPECT_FALSE(validate_partial_norm(zn({{1, "1"}, {2, "2"}})).has_value());

    PartialNorm::Table t{{z(0), 0}, {z(1), 1}, {z(-1), 2}};
    auto asym = validate_partial_norm(PartialNorm::raw(Zs, t));
    ASSERT_TRUE(asym.has_value());
    EXPECT_EQ(asym->kind, NormViolation::Kind::AsymmetricValue);
}

TEST(Validate, OtherAxioms) {
    PartialNorm::Table nozero{{z(1), 1}, {z(-1), 1}};
    EXPECT_EQ(validate_partial_norm(PartialNorm::raw(Zs, nozero))->kind, NormViolation::Kind::MissingZero);
    PartialNorm::Table onesided{{z(0), 0}, {z(1), 1}};
    EXPECT_EQ(validate_partial_norm(PartialNorm::raw(Zs, onesided))->kind, NormViolation::Kind::NotSymmetric);
    PartialNorm::Table zeroval{{z(0), 0}, {z(1), 0}, {z(-1), 0}};
    EXPECT_EQ(validate_partial_norm(PartialNorm::raw(Zs, zeroval))->kind, NormViolation::Kind::NonPositive);
}

TEST(Validate, AgreesWithBruteForceOnSmallTables) {
    // λ(1)=1, λ(2)=2 valid; brute-force decompositions up to length 6 agree.
    auto p = zn({{1, "1"}, {2, "2"}});
    for (long x : {1, 2, -1, -2}) {
        auto b = oracle::min_decomposition(Zs, gen::table_pairs(p), z(x), 6);
        ASSERT_TRUE(b);
        EXPECT_EQ(b->cost, p.at(z(x)));
    }
}

TEST(GreatestExtension, SpecExamples) {
    auto ext = greatest_extension(zn({{1, "1"}}), zset({0, 1, 2, 3, 4, 5}));
    for (long n = -5; n <= 5; ++n)
        EXPECT_EQ(ext.at(z(n)), Rational(std::abs(n)));
    EXPECT_EQ(greatest_extension(zn({{2, "1"}, {3, "6/5"}}), zset({1})).at(z(1)), q("11/5"));
    EXPECT_EQ(greatest_extension(zn({{1, "1"}, {3, "6/5"}}), zset({2})).at(z(2)), Rational(2));
}

TEST(GreatestExtension, Errors) {
    EXPECT_THROW(greatest_extension(zn({{1, "1"}, {2, "3"}}), zset({3})), InvalidNorm);
    try {
        greatest_extension(zn({{4, "1"}}), zset({2}));
        FAIL() << "expected OutsideSubgroup";
    } catch (const OutsideSubgroup& e) {
        EXPECT_EQ(e.element.at(0).get_num() * e.element.at(0).get_num(), 4);
    }
    auto trivial = greatest_extension(PartialNorm(Zs), zset({0}));
    EXPECT_EQ(trivial.size(), 1u);
}

TEST(GreatestExtension, OracleEquivalenceOnRandomFragments) {
    std::mt19937_64 rng(7);
    int compared = 0;
    for (int inst = 0; inst < 60; ++inst) {
        auto [s, coords] = gen::oracle_schemes()[inst % 3];
        PartialNorm p = gen::random_valid_norm(s, rng, coords, 4, 4);
        ASSERT_FALSE(validate_partial_norm(p)) << "generator produced an invalid norm";
        CostOracle o(p);
        for (int t = 0; t < 4; ++t) {
            GroupElement target = gen::random_element(s, rng, coords, 6);
            auto c = o.cost(target);
            if (!c)
                continue;
            const auto w = o.witness(target);
            if (w.size() > 6)
                continue;
            auto b = oracle::min_decomposition(s, gen::table_pairs(p), target, 6);
            ASSERT_TRUE(b) << format_element(s, target);
            EXPECT_EQ(*c, b->cost) << s.to_string() << " " << format_element(s, target);
            ++compared;
        }
    }
    EXPECT_GT(compared, 100);
}

TEST(GreatestExtension, IsValidIdempotentAndMaximal) {
    std::mt19937_64 rng(11);
    for (int inst = 0; inst < 30; ++inst) {
        auto [s, coords] = gen::oracle_schemes()[inst % 3];
        PartialNorm p = gen::random_valid_norm(s, rng, coords, 3, 3);
        std::vector<GroupElement> extra;
        for (const auto& a : p.elements())
            for (const auto& b : p.elements())
                extra.push_back(add(s, a, b));
        SymSet bset = SymSet::closure_of(s, extra);
        PartialNorm ext = greatest_extension(p, bset);
        EXPECT_FALSE(validate_partial_norm(ext));
        for (const auto& [g, v] : p.table())
            EXPECT_EQ(ext.at(g), v);
        EXPECT_EQ(greatest_extension(ext, bset), ext);
        // Damping at random non-domain points then re-closing gives another
        // seminorm extending λ; it must stay below the greatest extension.
        PartialNorm::Table damped = ext.table();
        for (auto& [g, v] : damped)
            if (!p.contains(g) && std::uniform_int_distribution<int>(0, 1)(rng))
                v = v * frac(std::uniform_int_distribution<long>(1, 9)(rng), 10);
        PartialNorm mu = cost_closure(PartialNorm::raw(s, damped), {});
        bool extends = true;
        for (const auto& [g, v] : p.table())
            extends = extends && mu.at(g) == v;
        if (!extends)
            continue;
        for (const auto& [g, v] : mu.table())
            EXPECT_LE(v, ext.at(g));
    }
}

TEST(InducedMetric, SpecExamples) {
    auto word = zn({{1, "1"}, {2, "2"}});
    auto m = induced_metric(word);
    EXPECT_EQ(m.dist(z(-1), z(2)), Rational(3));
    for (const auto& a : m.points)
        EXPECT_EQ(m.dist(a, a), Rational(0));
    auto m2 = induced_metric(zn({{2, "1"}, {3, "6/5"}}));
    EXPECT_EQ(m2.dist(z(2), z(3)), q("11/5"));
    EXPECT_FALSE(m2.check_axioms());
}

TEST(InducedMetric, CsvHasHeaderAndExactEntries) {
    auto m = induced_metric(zn({{1, "1"}}));
    const std::string csv = m.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "point,0,-1,1");
    EXPECT_NE(csv.find("\n-1,1,0,2\n"), std::string::npos);
}

TEST(Rationalize, SpecExamples) {
    auto p = zn({{1, "3/2"}});
    auto r = rationalize(p, q("1/4"));
    const Rational v = r.at(z(1));
    EXPECT_GT(v, q("3/2"));
    EXPECT_LT(v, q("7/4"));
    EXPECT_FALSE(validate_partial_norm(r));
    EXPECT_EQ(rationalize(PartialNorm(Zs), q("1/2")), PartialNorm(Zs));
    auto eq = rationalize(zn({{1, "1"}, {5, "1"}, {2, "2"}}), q("1/3"));
    EXPECT_EQ(eq.at(z(1)), eq.at(z(5)));
    EXPECT_LT(eq.at(z(1)), eq.at(z(2)));
}

TEST(Rationalize, RandomSuite) {
    std::mt19937_64 rng(5);
    for (int inst = 0; inst < 40; ++inst) {
        auto [s, coords] = gen::oracle_schemes()[inst % 3];
        PartialNorm p = gen::random_valid_norm(s, rng, coords, 4, 4, 4);
        for (const char* e : {"1/2", "1/10"}) {
            const Rational eps = q(e);
            PartialNorm r = rationalize(p, eps);
            EXPECT_FALSE(validate_partial_norm(r));
            for (const auto& [g, v] : p.table()) {
                const Rational d = r.at(g) - v;
                EXPECT_GE(d, 0);
                EXPECT_LT(d, eps);
                for (const auto& [h, w] : p.table()) {
                    if (v == w) {
                        EXPECT_EQ(r.at(g), r.at(h));
                    }
                    if (v < w) {
                        EXPECT_LT(r.at(g), r.at(h));
                    }
                }
            }
        }
    }
}

TEST(NormJson, RoundTrip) {
    auto p = zn({{1, "1"}, {3, "6/5"}});
    auto j = norm_to_json(p);
    EXPECT_EQ(j["values"].size(), 3u);
    EXPECT_EQ(norm_from_json(j), p);
    auto qz = GroupScheme::parse("sum QmodZ");
    PartialNorm r(qz);
    r.assign_pm(parse_element(qz, "c0=1/3;c2=1/2"), q("7/3"));
    EXPECT_EQ(norm_from_json(nlohmann::json::parse(norm_to_json(r).dump())), r);
    EXPECT_THROW(norm_from_json(nlohmann::json::parse(R"({"values": 3})")), std::exception);
}
