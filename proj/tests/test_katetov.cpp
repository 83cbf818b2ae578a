#include "invnorm/katetov.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace invnorm;

namespace {

const GroupScheme Zs = GroupScheme::parse("Z");

GroupElement z(long v) { return parse_element(Zs, std::to_string(v)); }
Rational q(const char* t) { return parse_rational(t); }

InducedMetric two_points(const char* dist) {
    InducedMetric m{Zs, {z(0), z(1)}, {}};
    m.d = {{0, q(dist)}, {q(dist), 0}};
    return m;
}

PartialNorm word_norm(long radius) {
    PartialNorm p(Zs);
    for (long n = 1; n <= radius; ++n)
        p.assign_pm(z(n), Rational(n));
    return p;
}

} // namespace

TEST(ValidateKatetov, SpecExamples) {
    auto d = two_points("2");
    EXPECT_FALSE(validate_katetov({{z(0), 1}, {z(1), 1}}, d));
    auto lip = validate_katetov({{z(0), 1}, {z(1), 4}}, d);
    ASSERT_TRUE(lip);
    EXPECT_EQ(lip->kind, KatetovViolation::Kind::Lipschitz);
    auto tri = validate_katetov({{z(0), q("1/2")}, {z(1), 1}}, d);
    ASSERT_TRUE(tri);
    EXPECT_EQ(tri->kind, KatetovViolation::Kind::Triangle);
    EXPECT_EQ(validate_katetov({{z(0), 1}}, d)->kind, KatetovViolation::Kind::Missing);
}

TEST(MinExtension, SpecExamples) {
    // Word metric on {-4..4} through the greatest extension of λ(±1) = 1.
    PartialNorm p(Zs);
    p.assign_pm(z(1), 1);
    std::vector<GroupElement> pts;
    for (long n = -4; n <= 4; ++n)
        pts.push_back(z(n));
    PartialNorm closed = cost_closure(p, diff_closure(Zs, SymSet::closure_of(Zs, pts)).elements());
    InducedMetric d = metric_from_table(closed, pts);
    // f(0)=1, f(4)=2 is not Katetov over d(0,4)=4 (1+2 < 4): rejected.
    EXPECT_THROW(katetov_min_extension({{z(0), 1}, {z(4), 2}}, d), InvalidKatetov);
    KatetovFn f{{z(0), 1}, {z(4), 3}};
    KatetovFn ext = katetov_min_extension(f, d);
    EXPECT_EQ(ext.at(z(2)), Rational(3)); // min(1+2, 3+2)
    EXPECT_EQ(ext.at(z(-3)), Rational(4));
    EXPECT_EQ(ext.at(z(0)), Rational(1));
    EXPECT_EQ(ext.at(z(4)), Rational(3));
    KatetovFn single = katetov_min_extension({{z(0), q("5/2")}}, d);
    for (const auto& x : pts)
        EXPECT_EQ(single.at(x), q("5/2") + d.dist(z(0), x));
    InducedMetric same = metric_from_table(closed, {z(0), z(4)});
    EXPECT_EQ(katetov_min_extension(f, same), f);
}

TEST(Realize, OnePointCase) {
    PartialNorm trivial(Zs);
    auto out = katetov_realize(trivial, {{z(0), q("7/3")}}, z(5));
    EXPECT_EQ(out.at(z(5)), q("7/3"));
    EXPECT_EQ(out.at(z(-5)), q("7/3"));
}

TEST(Realize, SpecExamples) {
    PartialNorm p = word_norm(1);
    KatetovFn f{{z(-1), 1}, {z(0), 1}, {z(1), 1}};
    auto out = katetov_realize(p, f, z(100));
    EXPECT_EQ(out.at(z(100)), Rational(1));
    EXPECT_EQ(out.at(z(99)), Rational(1));
    EXPECT_EQ(out.at(z(101)), Rational(1));
    EXPECT_EQ(out.at(z(2)), Rational(2));
    EXPECT_FALSE(validate_partial_norm(out));
    EXPECT_THROW(katetov_realize(p, f, z(3)), PreconditionError);
    EXPECT_THROW(katetov_realize(p, f, z(2)), PreconditionError);
    KatetovFn bad{{z(-1), 1}, {z(0), 4}, {z(1), 1}};
    EXPECT_THROW(katetov_realize(p, bad, z(100)), InvalidKatetov);
}

TEST(Realize, RandomInstancesMatchTheProposition) {
    std::mt19937_64 rng(21);
    int done = 0;
    for (int inst = 0; inst < 40; ++inst) {
        auto [s, coords] = gen::oracle_schemes()[inst % 3];
        if (!s.is_unbounded())
            s = GroupScheme::parse("Z^2"), coords = 2;
        PartialNorm p = gen::random_valid_norm(s, rng, coords, 3, 2);
        const SymSet a = p.domain();
        PartialNorm closed = greatest_extension(p, diff_closure(s, a));
        InducedMetric d = metric_from_table(closed, a.elements());
        KatetovFn f;
        const GroupElement& b = a.elements()[rng() % a.size()];
        const Rational c = gen::random_rational(rng, 4, 12, 4);
        for (const auto& x : a)
            f[x] = c + d.dist(b, x);
        ASSERT_FALSE(validate_katetov(f, d));
        const auto rb = realization_bounds(closed, f);
        GroupElement g = find_far_element(s, diff_closure(s, a), rb.radius);
        PartialNorm out = katetov_realize(p, f, g);
        for (const auto& [x, v] : f) {
            EXPECT_EQ(out.at(sub(s, g, x)), v);
            EXPECT_EQ(out.at(sub(s, x, g)), v);
        }
        for (const auto& [x, v] : closed.table())
            EXPECT_EQ(out.at(x), v);
        ++done;
    }
    EXPECT_EQ(done, 40);
}

TEST(OnePointCheck, FindsRealizedTypes) {
    PartialNorm p = word_norm(1);
    KatetovFn f{{z(-1), 1}, {z(0), 1}, {z(1), 1}};
    auto out = katetov_realize(p, f, z(100));
    std::vector<GroupElement> cands{z(0), z(1), z(100)};
    EXPECT_EQ(check_one_point_extension(out, f, 0, 10, cands), z(100));
    EXPECT_EQ(check_one_point_extension(out, f, 0, 2, cands), std::nullopt);
    KatetovFn near{{z(-1), q("5/4")}, {z(0), q("5/4")}, {z(1), q("5/4")}};
    EXPECT_EQ(check_one_point_extension(out, near, 0, 10, cands), std::nullopt);
    EXPECT_EQ(check_one_point_extension(out, near, q("1/3"), 10, cands), z(100));
    EXPECT_EQ(check_one_point_extension(out, near, q("1/4"), 10, cands), std::nullopt);
}

TEST(KatetovJson, RoundTrip) {
    KatetovFn f{{z(0), q("3/2")}, {z(1), 2}};
    EXPECT_EQ(katetov_from_json(Zs, nlohmann::json::parse(katetov_to_json(Zs, f, "stage").dump())), f);
}
