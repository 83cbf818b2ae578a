#include "invnorm/shkarin.hpp"
#include "finite_generators.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace invnorm;

namespace {

Rational q(const char* t) { return parse_rational(t); }

FiniteNormedGroup cyclic(long n, const std::vector<Rational>& values) {
    FiniteNormedGroup g{FiniteGroup({n}), values};
    EXPECT_FALSE(g.check()) << *g.check();
    return g;
}

FiniteNormedGroup trivial() { return FiniteNormedGroup{FiniteGroup::trivial(), {Rational(0)}}; }

FiniteEmbedding from_trivial(const FiniteNormedGroup& g) {
    return FiniteEmbedding{trivial(), g, FiniteHom{FiniteGroup::trivial(), g.group, {}}};
}

// Value of the brute-force coset minimum, independent of the quotient code.
Rational coset_min(const FiniteNormedGroup& g, const std::vector<std::size_t>& h, std::size_t x) {
    std::optional<Rational> best;
    for (std::size_t y : h) {
        const Rational v = g.norm[g.group.add(x, y)];
        if (!best || v < *best)
            best = v;
    }
    return *best;
}

} // namespace

TEST(FiniteGroup, SmithFormMatchesEnumeration) {
    // Quotients by random subgroups: the size matches the coset count and the
    // projection is a surjective homomorphism with kernel H.
    std::mt19937_64 rng(8);
    for (const auto& f : gen::small_groups()) {
        const FiniteGroup g(f);
        for (int t = 0; t < 4; ++t) {
            std::vector<std::size_t> gens{rng() % g.size()};
            if (t % 2)
                gens.push_back(rng() % g.size());
            const auto h = g.span(gens);
            const FiniteQuotient fq = finite_quotient(g, gens);
            EXPECT_TRUE(fq.group.is_invariant_form() || fq.group.size() == 1);
            EXPECT_EQ(fq.group.size() * h.size(), g.size()) << g.to_string();
            EXPECT_TRUE(fq.hom.well_defined());
            std::vector<char> hit(fq.group.size(), 0);
            for (std::size_t x = 0; x < g.size(); ++x) {
                hit[fq.projection[x]] = 1;
                const bool in_h = std::binary_search(h.begin(), h.end(), x);
                EXPECT_EQ(fq.projection[x] == 0, in_h);
                for (std::size_t y = 0; y < g.size(); y += 3)
                    EXPECT_EQ(fq.projection[g.add(x, y)], fq.group.add(fq.projection[x], fq.projection[y]));
            }
            EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](char c) { return c; }));
        }
    }
}

TEST(FiniteGroup, InvariantForm) {
    EXPECT_EQ(invariant_form(FiniteGroup({2, 3})).group.factors(), (std::vector<long>{6}));
    EXPECT_EQ(invariant_form(FiniteGroup({4, 6})).group.factors(), (std::vector<long>{2, 12}));
    EXPECT_EQ(invariant_form(FiniteGroup({2, 2})).group.factors(), (std::vector<long>{2, 2}));
    EXPECT_EQ(invariant_form(FiniteGroup({1, 5})).group.factors(), (std::vector<long>{5}));
}

TEST(Quotient, Z4Example) {
    const FiniteNormedGroup g = cyclic(4, {Rational(0), Rational(1), Rational(2), Rational(1)});
    const QuotientSeminorm qs = quotient_seminorm(g, {2});
    ASSERT_EQ(qs.quotient.group.size(), 2u);
    EXPECT_EQ(qs.value[qs.quotient.projection[1]], 1);
    EXPECT_EQ(qs.value[qs.quotient.projection[3]], 1);
    EXPECT_EQ(qs.value[qs.quotient.projection[2]], 0);
    EXPECT_EQ(qs.quotient.projection[2], 0u);
    EXPECT_TRUE(qs.is_norm);
}

TEST(Quotient, TrivialAndWhole) {
    const FiniteNormedGroup g = cyclic(4, {Rational(0), Rational(1), Rational(2), Rational(1)});
    const QuotientSeminorm id = quotient_seminorm(g, {});
    ASSERT_EQ(id.quotient.group.size(), 4u);
    for (std::size_t x = 0; x < 4; ++x)
        EXPECT_EQ(id.value[id.quotient.projection[x]], g.norm[x]);
    const QuotientSeminorm all = quotient_seminorm(g, {1});
    EXPECT_EQ(all.quotient.group.size(), 1u);
    EXPECT_EQ(all.value, std::vector<Rational>{Rational(0)});
}

TEST(Quotient, RandomMatchesCosetMinimum) {
    std::mt19937_64 rng(41);
    for (int inst = 0; inst < 60; ++inst) {
        const auto groups = gen::small_groups();
        const FiniteGroup g(groups[1 + rng() % (groups.size() - 1)]);
        const FiniteNormedGroup n = gen::random_finite_norm(g, rng);
        const std::vector<std::size_t> gens{rng() % g.size()};
        const auto h = g.span(gens);
        const QuotientSeminorm qs = quotient_seminorm(n, gens);
        for (std::size_t x = 0; x < g.size(); ++x)
            EXPECT_EQ(qs.value[qs.quotient.projection[x]], coset_min(n, h, x));
        // Subadditivity and symmetry on the quotient, full check.
        const FiniteGroup& qg = qs.quotient.group;
        for (std::size_t a = 0; a < qg.size(); ++a) {
            EXPECT_EQ(qs.value[qg.neg(a)], qs.value[a]);
            for (std::size_t b = 0; b < qg.size(); ++b)
                EXPECT_LE(qs.value[qg.add(a, b)], qs.value[a] + qs.value[b]);
        }
    }
}

TEST(Amalgam, Z2Z3GivesZ6) {
    const FiniteNormedGroup z2 = cyclic(2, {Rational(0), Rational(1)});
    const FiniteNormedGroup z3 = cyclic(3, {Rational(0), Rational(1), Rational(1)});
    const Amalgam a = amalgamate(from_trivial(z2), from_trivial(z3));
    ASSERT_EQ(a.group.group.factors(), (std::vector<long>{6}));
    // Order 2 -> 1, order 3 -> 1, order 6 -> 2 (1 = 3 + 4 in Z/6).
    for (std::size_t x = 1; x < 6; ++x) {
        const long ord = a.group.group.order(x);
        EXPECT_EQ(a.group.norm[x], ord == 6 ? Rational(2) : Rational(1)) << x;
    }
    EXPECT_EQ(a.group.norm[a.j1.apply(1)], 1);
    EXPECT_TRUE(a.certificate["checks"]["commutes"].get<bool>());
}

TEST(Amalgam, AlongIdentity) {
    std::mt19937_64 rng(3);
    const FiniteNormedGroup g1 = gen::random_finite_norm(FiniteGroup({2, 4}), rng);
    const FiniteNormedGroup g0 = restrict_norm(g1, FiniteHom{FiniteGroup({4}), g1.group, {g1.group.generator(1)}});
    const FiniteHom inc{g0.group, g1.group, {g1.group.generator(1)}};
    // G2 = G0 with e2 = id: the amalgam is G1.
    const Amalgam a = amalgamate(FiniteEmbedding{g0, g1, inc}, FiniteEmbedding{g0, g0, FiniteHom::identity(g0.group)});
    EXPECT_EQ(a.group.group.size(), g1.group.size());
    for (std::size_t x = 0; x < g1.group.size(); ++x)
        EXPECT_EQ(a.group.norm[a.j1.apply(x)], g1.norm[x]);
    // e1 = e2, G1 = G2: the doubled copy collapses.
    const Amalgam b = amalgamate(FiniteEmbedding{g1, g1, FiniteHom::identity(g1.group)},
                                 FiniteEmbedding{g1, g1, FiniteHom::identity(g1.group)});
    EXPECT_EQ(b.group.group.size(), g1.group.size());
    for (std::size_t x = 0; x < g1.group.size(); ++x)
        EXPECT_EQ(b.j1.apply(x), b.j2.apply(x));
}

TEST(Amalgam, RandomInstancesCommuteAndEmbedIsometrically) {
    std::mt19937_64 rng(100);
    for (int inst = 0; inst < 100; ++inst) {
        const auto [e1, e2] = gen::random_amalgam_instance(rng);
        const Amalgam a = amalgamate(e1, e2);
        for (std::size_t g = 0; g < e1.source.group.size(); ++g)
            EXPECT_EQ(a.j1.apply(e1.map.apply(g)), a.j2.apply(e2.map.apply(g)));
        for (std::size_t x = 0; x < e1.target.group.size(); ++x)
            EXPECT_EQ(a.group.norm[a.j1.apply(x)], e1.target.norm[x]);
        for (std::size_t x = 0; x < e2.target.group.size(); ++x)
            EXPECT_EQ(a.group.norm[a.j2.apply(x)], e2.target.norm[x]);
        EXPECT_EQ(a.group.group.size() * e1.source.group.size(), e1.target.group.size() * e2.target.group.size());
        EXPECT_FALSE(a.group.check());
    }
}

TEST(Amalgam, RejectsNonIsometricInput) {
    const FiniteNormedGroup z2 = cyclic(2, {Rational(0), Rational(1)});
    const FiniteNormedGroup z4 = cyclic(4, {Rational(0), Rational(1), Rational(3, 2), Rational(1)});
    // e: Z/2 -> Z/4, 1 -> 2, but λ(2) = 3/2 != 1.
    const FiniteEmbedding e{z2, z4, FiniteHom{z2.group, z4.group, {2}}};
    EXPECT_THROW(amalgamate(e, e), std::invalid_argument);
}

TEST(Amalgam, JsonRoundTrip) {
    std::mt19937_64 rng(5);
    const auto [e1, e2] = gen::random_amalgam_instance(rng);
    const FiniteEmbedding back = embedding_from_json(embedding_to_json(e1));
    EXPECT_EQ(back.map.images, e1.map.images);
    EXPECT_EQ(back.target.norm, e1.target.norm);
    EXPECT_EQ(FiniteNormedGroup::from_json(e2.target.to_json()).norm, e2.target.norm);
}

TEST(ExtProperty, IdentityWitness) {
    std::mt19937_64 rng(6);
    const FiniteNormedGroup g = gen::random_finite_norm(FiniteGroup({2, 2}), rng);
    const FiniteHom id = FiniteHom::identity(g.group);
    for (const Rational& eps : {Rational(0), q("1/100")}) {
        const ExtResult r = check_ext_property3(g, id, id, g, eps);
        ASSERT_TRUE(r.witness);
        EXPECT_EQ(r.witness->max_deviation, 0);
    }
}

TEST(ExtProperty, NoZ3InZ2) {
    const FiniteNormedGroup z2 = cyclic(2, {Rational(0), Rational(1)});
    const FiniteNormedGroup z3 = cyclic(3, {Rational(0), Rational(1), Rational(1)});
    const FiniteHom e0{FiniteGroup::trivial(), z2.group, {}};
    const FiniteHom i0{FiniteGroup::trivial(), z3.group, {}};
    EXPECT_FALSE(check_ext_property3(z2, e0, i0, z3, q("1/2")).witness);
}

TEST(ExtProperty, HypothesisChecked) {
    const FiniteNormedGroup z2 = cyclic(2, {Rational(0), Rational(1)});
    const FiniteNormedGroup z2b = cyclic(2, {Rational(0), Rational(2)});
    const FiniteHom id = FiniteHom::identity(z2.group);
    EXPECT_THROW(check_ext_property3(z2, id, id, z2b, q("1/2")), PreconditionFailure);
}

TEST(ExtProperty, IteratedAmalgamationStage) {
    // Pairs G0 ≤ G1 up to order 8 with {1, 3/2}-valued norms; every processed
    // pair has an exact witness in the final stage.
    std::vector<ExtPair> pairs;
    std::mt19937_64 rng(77);
    for (const auto& f : gen::small_groups()) {
        const FiniteGroup g1(f);
        if (g1.size() < 2 || g1.size() > 8)
            continue;
        for (long k : {1L, 2L}) {
            const auto o = gen::elements_of_order(g1, k);
            if (o.empty() || (k == 1 && g1.size() > 4))
                continue;
            FiniteNormedGroup n1{g1, {Rational(0)}};
            for (std::size_t x = 1; x < g1.size(); ++x)
                n1.norm.push_back(Rational(0));
            for (std::size_t x = 1; x < g1.size(); ++x)
                if (n1.norm[x] == 0) {
                    const Rational v = rng() % 2 ? Rational(1) : q("3/2");
                    n1.norm[x] = v;
                    n1.norm[g1.neg(x)] = v;
                }
            const FiniteGroup g0 = k == 1 ? FiniteGroup::trivial() : FiniteGroup({2});
            FiniteHom i0{g0, g1, {}};
            if (k == 2)
                i0.images.push_back(o.front());
            pairs.push_back(ExtPair{restrict_norm(n1, i0), n1, i0});
        }
    }
    const AmalgamStage st = amalgamation_stage(pairs, 400);
    ASSERT_GE(st.processed.size(), 4u);
    EXPECT_FALSE(st.group.check());
    for (std::size_t j = 0; j < st.processed.size(); ++j) {
        const ExtPair& p = pairs[st.processed[j]];
        const ExtResult r = check_ext_property3(st.group, st.anchors[j], p.i0, p.g1, Rational(0));
        ASSERT_TRUE(r.witness) << "pair " << st.processed[j] << " " << p.g1.group.to_string();
        EXPECT_EQ(r.witness->max_deviation, 0);
    }
}
