#include "invnorm/katetov.hpp"
#include "invnorm/layers.hpp"
#include "invnorm/urysohn.hpp"
#include "generators.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace invnorm;

namespace {

const GroupScheme Zs = GroupScheme::parse("Z");

GroupElement z(long v) { return parse_element(Zs, std::to_string(v)); }

PartialNorm point_table(const GroupScheme& s, const std::vector<GroupElement>& pts,
                        const std::vector<std::vector<Rational>>& d) {
    PartialNorm p(s);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (i != j)
                p.assign_pm(sub(s, pts[i], pts[j]), d[i][j]);
    return p;
}

// Grows a point table by repeated realization: each new point g is far from
// P - P at the proposition's radius and carries f = c + d(b, ·).
struct Grown {
    PartialNorm table;
    std::vector<GroupElement> points;
};

Grown grow(const GroupScheme& s, std::mt19937_64& rng, std::size_t n_points) {
    Grown out{PartialNorm(s), {GroupElement()}};
    while (out.points.size() < n_points) {
        const InducedMetric d = metric_from_table(out.table, out.points);
        const GroupElement& b = out.points[rng() % out.points.size()];
        const Rational c = gen::random_rational(rng, 2, 8, 4);
        KatetovFn f;
        for (const auto& a : out.points)
            f[a] = c + d.dist(b, a);
        const RealizationBounds rb = realization_bounds(out.table, f);
        const GroupElement g = find_far_element(s, out.table.domain(), rb.radius);
        out.table = realize_over_closed(out.table, out.points, f, g, false);
        out.points.push_back(g);
    }
    return out;
}

// Nonzero elements reachable as sums of up to two point differences plus a
// small offset.
std::vector<GroupElement> probe_targets(const GroupScheme& s, const Grown& g, std::mt19937_64& rng, std::size_t n) {
    std::vector<GroupElement> out;
    const auto dom = g.table.elements();
    for (std::size_t i = 0; i < n; ++i) {
        GroupElement x = add(s, dom[rng() % dom.size()], dom[rng() % dom.size()]);
        if (rng() % 2)
            x = add(s, x, gen::random_element(s, rng, 2, 2));
        if (!x.is_zero())
            out.push_back(x);
    }
    return out;
}

} // namespace

TEST(Peel, FarPointAndFreshPoint) {
    // d(0,1) = 1, d(0,100) = d(1,100) = 1: 100 is far from {0,1}; then 1 sits
    // on a coordinate where {0} vanishes.
    const std::vector<GroupElement> pts{z(0), z(1), z(100)};
    const PartialNorm t = point_table(Zs, pts, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    const PointTableLayers l = peel_point_table(t, pts);
    ASSERT_EQ(l.layers.size(), 2u);
    EXPECT_EQ(l.layers.back().point, z(100));
    EXPECT_EQ(l.layers.back().radius, 2u);
    EXPECT_FALSE(l.layers.back().fresh);
    EXPECT_EQ(l.layers.front().point, z(1));
    EXPECT_TRUE(l.layers.front().fresh);
    EXPECT_EQ(l.core, std::vector<GroupElement>{z(0)});
    EXPECT_TRUE(validate_point_table(t, pts).ok());
}

TEST(Peel, NearPointStaysInCore) {
    // 3 = 1 + 1 + 1 with λ(1) = 1/3 < λ(3) = 1: not far, and invalid.
    const std::vector<GroupElement> pts{z(0), z(1), z(3)};
    const Rational third = frac(1, 3);
    const PartialNorm t = point_table(Zs, pts, {{0, third, 1}, {third, 0, 1}, {1, 1, 0}});
    const PointTableCheck c = validate_point_table(t, pts);
    EXPECT_FALSE(c.ok());
    ASSERT_TRUE(validate_partial_norm(t));
}

TEST(Peel, ShapeProblems) {
    PartialNorm t(Zs);
    t.assign_pm(z(1), 1);
    t.assign_pm(z(2), 1);
    EXPECT_TRUE(validate_point_table(t, {z(0), z(1)}).shape_problem);
    EXPECT_TRUE(validate_point_table(t, {z(1), z(2)}).shape_problem);
}

TEST(Peel, CoprimeTorsionCoordinate) {
    const GroupScheme q = GroupScheme::parse("QmodZ");
    const GroupElement half = parse_element(q, "1/2");
    const GroupElement fifth = parse_element(q, "1/5");
    const std::vector<GroupElement> pts{GroupElement(), half, fifth};
    // R = 2; order 5 > 3 and coprime to 2.
    const PartialNorm t = point_table(q, pts, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    const PointTableLayers l = peel_point_table(t, pts);
    ASSERT_FALSE(l.layers.empty());
    EXPECT_EQ(l.layers.back().point, fifth);
    EXPECT_EQ(*l.layers.back().order, 5);
    EXPECT_EQ(l.layers.back().others_order, 2);
    EXPECT_EQ(validate_point_table(t, pts).ok(), !validate_partial_norm(t));
}

TEST(Layers, RealizedTablesMatchExhaustiveSearch) {
    std::mt19937_64 rng(404);
    const std::vector<GroupScheme> schemes{Zs, GroupScheme::parse("Z^2"), GroupScheme::parse("QmodZ"),
                                           GroupScheme::parse("Z + QmodZ"), GroupScheme::parse("sum QmodZ")};
    std::size_t peeled = 0, certified = 0, compared = 0, invalid = 0;
    for (int inst = 0; inst < 150; ++inst) {
        const GroupScheme& s = schemes[inst % schemes.size()];
        Grown g = grow(s, rng, 2 + inst % 4);
        const PointTableCheck c = validate_point_table(g.table, g.points);
        ASSERT_TRUE(c.ok()) << s.to_string() << " instance " << inst;
        EXPECT_FALSE(validate_partial_norm(g.table));
        peeled += c.layers.layers.size();

        LayeredCost lc(g.table, g.points);
        CostOracle oracle(g.table);
        for (const auto& x : probe_targets(s, g, rng, 12)) {
            ++compared;
            try {
                EXPECT_EQ(lc.cost(x), oracle.cost(x)) << format_element(s, x);
                ++certified;
            } catch (const CostUncertified&) {
            }
        }

        // Perturb one pair and compare the decisions.
        Grown bad = g;
        const std::size_t i = rng() % bad.points.size();
        std::size_t j = rng() % bad.points.size();
        if (i == j)
            j = (j + 1) % bad.points.size();
        const GroupElement x = sub(s, bad.points[i], bad.points[j]);
        const Rational v = gen::random_rational(rng, 1, 24, 4);
        bad.table.set(x, v);
        bad.table.set(neg(s, x), v);
        const PointTableCheck cb = validate_point_table(bad.table, bad.points);
        const auto brute = validate_partial_norm(bad.table);
        EXPECT_EQ(cb.ok(), !brute) << s.to_string() << " instance " << inst;
        invalid += !cb.ok();
    }
    EXPECT_GT(peeled, 150u);
    EXPECT_GT(invalid, 15u);
    EXPECT_GT(certified * 2, compared);
}

TEST(Layers, StagesMatchExhaustiveSearch) {
    for (const char* name : {"Z", "Z^2", "QmodZ", "Z + QmodZ"}) {
        const GroupScheme s = GroupScheme::parse(name);
        DefaultSchedule sched;
        BuildOptions opt;
        opt.validate_each_step = false;
        std::vector<StageState> stages;
        opt.on_checkpoint = [&](const StageState& st) { stages.push_back(st); };
        build_stages(s, sched, 8, std::nullopt, opt);
        std::mt19937_64 rng(9);
        for (const auto& st : stages) {
            EXPECT_TRUE(validate_point_table(st.table, st.points).ok()) << name << " step " << st.step;
            EXPECT_FALSE(validate_partial_norm(st.table)) << name << " step " << st.step;
            if (st.points.size() < 2)
                continue;
            LayeredCost lc(st.table, st.points);
            CostOracle oracle(st.table);
            Grown g{st.table, st.points};
            for (const auto& x : probe_targets(s, g, rng, 10)) {
                try {
                    EXPECT_EQ(lc.cost(x), oracle.cost(x)) << name << " " << format_element(s, x);
                } catch (const CostUncertified&) {
                }
            }
        }
    }
}
