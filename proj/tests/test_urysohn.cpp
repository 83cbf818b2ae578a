#include "invnorm/urysohn.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace invnorm;

namespace {

const GroupScheme Zs = GroupScheme::parse("Z");

GroupElement z(long v) { return parse_element(Zs, std::to_string(v)); }
Rational q(const char* t) { return parse_rational(t); }

MetricType one_point(const Rational& f) { return MetricType{{{Rational(0)}}, {f}}; }

MetricType two_points(const Rational& d, const Rational& f0, const Rational& f1) {
    return MetricType{{{Rational(0), d}, {d, Rational(0)}}, {f0, f1}};
}

// Word metric of λ(±1) = 1 on the points -r..r.
StageState word_stage(long r) {
    StageState st = StageState::initial(Zs);
    st.points.clear();
    for (long n = -r; n <= r; ++n)
        st.points.push_back(z(n));
    for (long n = 1; n <= 2 * r; ++n)
        st.table.assign_pm(z(n), Rational(n));
    return st;
}

std::vector<StageState> run(const GroupScheme& s, std::size_t steps, TypeSchedule& sched,
                            const std::optional<std::pair<PartialNorm, Rational>>& seed = {}) {
    std::vector<StageState> out;
    BuildOptions opt;
    opt.on_checkpoint = [&](const StageState& st) { out.push_back(st); };
    build_stages(s, sched, steps, seed, opt);
    return out;
}

} // namespace

TEST(Build, ZeroSteps) {
    DefaultSchedule sched;
    const StageState st = build_stages(Zs, sched, 0);
    EXPECT_EQ(st.step, 0u);
    EXPECT_EQ(st.points, std::vector<GroupElement>{z(0)});
    EXPECT_EQ(st.table.size(), 1u);
    EXPECT_EQ(st.table.at(z(0)), 0);
}

TEST(Build, TwoStepsGiveUnitNorm) {
    DefaultSchedule sched;
    const StageState st = build_stages(Zs, sched, 2);
    EXPECT_EQ(st.table.at(z(1)), 1);
    EXPECT_EQ(st.table.at(z(-1)), 1);
    ASSERT_GE(st.ledger.size(), 2u);
    EXPECT_EQ(st.ledger[0].kind, "absorb-present"); // g_1 = 0
    EXPECT_EQ(st.ledger[1].kind, "realized");       // one point at distance 1 from 0
}

TEST(EvenStep, ValueRules) {
    {
        StageState st = StageState::initial(Zs);
        const LedgerEntry e = absorb_element(st, z(1));
        EXPECT_EQ(e.kind, "absorb-new");
        EXPECT_EQ(*e.rule, "one");
        EXPECT_EQ(st.table.at(z(1)), 1);
        EXPECT_EQ(st.table.at(z(-1)), 1);
    }
    {
        // F = {0, ±1}, λ(1) = 1, g = 2 in <F>: greatest extension gives 2.
        StageState st = StageState::initial(Zs);
        st.points = {z(0), z(1), z(-1)};
        st.table.assign_pm(z(1), 1);
        st.table.assign_pm(z(2), 2);
        StageState narrow = StageState::initial(Zs);
        narrow.points = {z(0), z(1)};
        narrow.table.assign_pm(z(1), 1);
        const LedgerEntry e = absorb_element(narrow, z(2));
        EXPECT_EQ(*e.rule, "extension");
        EXPECT_EQ(narrow.table.at(z(2)), 2);
        EXPECT_EQ(narrow.table.at(z(-2)), 2);
        EXPECT_EQ(narrow.table.at(z(1)), 1);
        const auto brute = oracle::min_decomposition(Zs, {{z(1), 1}, {z(-1), 1}}, z(2), 6);
        EXPECT_EQ(brute->cost, 2);
        // Already in D: made a point, table unchanged there.
        const LedgerEntry e2 = absorb_element(st, z(2));
        EXPECT_EQ(e2.kind, "absorb-point");
        EXPECT_EQ(st.table.at(z(3)), 3);
        EXPECT_EQ(absorb_element(st, z(2)).kind, "absorb-present");
    }
    {
        const GroupScheme s = GroupScheme::parse("sum QmodZ");
        StageState st = StageState::initial(s);
        const LedgerEntry e = absorb_element(st, parse_element(s, "1/2"));
        EXPECT_EQ(*e.rule, "one");
        EXPECT_EQ(st.table.at(parse_element(s, "1/2")), 1);
    }
    {
        // m·g = f with m = 2: λ(1/4) = λ(1/2)/2.
        const GroupScheme s = GroupScheme::parse("QmodZ");
        StageState st = StageState::initial(s);
        st.points = {GroupElement(), parse_element(s, "1/2")};
        st.table.assign_pm(parse_element(s, "1/2"), 1);
        const LedgerEntry e = absorb_element(st, parse_element(s, "1/4"));
        EXPECT_EQ(*e.rule, "multiple");
        EXPECT_EQ(*e.value, q("1/2"));
        EXPECT_EQ(st.table.at(parse_element(s, "1/4")), q("1/2"));
        EXPECT_EQ(st.table.at(parse_element(s, "3/4")), q("1/2"));
        EXPECT_TRUE(check_stage(st).empty());
    }
}

TEST(IsometricCopies, Examples) {
    const StageState st = word_stage(2);
    const InducedMetric d = st.metric();
    const auto singles = find_isometric_copies(one_point(1), st.points, d);
    EXPECT_EQ(singles.size(), st.points.size());

    const auto pairs = find_isometric_copies(two_points(2, 1, 1), st.points, d);
    std::set<std::pair<long, long>> got;
    for (const auto& c : pairs)
        got.emplace(c[0].at(0).get_num().get_si(), c[1].at(0).get_num().get_si());
    std::set<std::pair<long, long>> want;
    for (long a = -2; a <= 2; ++a)
        for (long b = -2; b <= 2; ++b)
            if (std::abs(a - b) == 2)
                want.emplace(a, b);
    EXPECT_EQ(got, want);
    for (const auto& c : pairs)
        EXPECT_EQ(d.dist(c[0], c[1]), 2);

    EXPECT_TRUE(find_isometric_copies(two_points(q("1/3"), 1, 1), st.points, d).empty());
}

TEST(OddStep, OnePointTypeOverThreeCopies) {
    StageState st = word_stage(1);
    st.step = 1;
    ExplicitSchedule sched({one_point(1)});
    odd_step(st, sched);
    EXPECT_EQ(st.step, 2u);
    std::vector<LedgerEntry> realized;
    for (const auto& e : st.ledger)
        if (e.kind == "realized")
            realized.push_back(e);
    ASSERT_EQ(realized.size(), 3u);
    std::vector<GroupElement> copies;
    for (const auto& e : realized)
        copies.push_back(e.copy.at(0));
    std::vector<GroupElement> want{z(-1), z(0), z(1)};
    std::sort(want.begin(), want.end());
    EXPECT_EQ(copies, want); // serialization order
    for (const auto& e : realized) {
        EXPECT_EQ(st.table.at(sub(Zs, *e.element, e.copy[0])), 1);
        EXPECT_EQ(st.table.at(sub(Zs, e.copy[0], *e.element)), 1);
        EXPECT_GT(Rational(e.far_radius), Rational(e.radius) - 1);
    }
    EXPECT_TRUE(check_stage(st).empty());
    EXPECT_FALSE(validate_partial_norm(st.table));
    EXPECT_TRUE(verify_ledger(st).empty());
    // ε = 0 witness for the scheduled pair on each copy.
    for (const auto& e : realized) {
        const KatetovFn f{{e.copy[0], Rational(1)}};
        EXPECT_TRUE(check_one_point_extension(st.table, f, 0, st.points.size(), st.points));
        EXPECT_EQ(check_one_point_extension(st.table, f, 0, 1, {*e.element}), e.element);
    }
}

TEST(OddStep, NoCopyLeavesStage) {
    StageState st = word_stage(1);
    st.step = 1;
    const PartialNorm before = st.table;
    ExplicitSchedule sched({two_points(q("1/3"), 1, 1)});
    odd_step(st, sched);
    EXPECT_EQ(st.table, before);
    ASSERT_EQ(st.ledger.size(), 1u);
    EXPECT_EQ(st.ledger[0].kind, "no-copy");
}

TEST(OddStep, BoundedSchemeRejected) {
    DefaultSchedule sched;
    EXPECT_THROW(build_stages(GroupScheme::parse("sum Z/2"), sched, 4), UnsupportedGroup);
}

TEST(Construction, InvariantsOverRuns) {
    for (const auto& [name, steps] : std::vector<std::pair<const char*, std::size_t>>{
             {"Z", 20}, {"Z^2", 16}, {"QmodZ", 14}, {"Z + Z/6", 14}, {"Z^inf", 14}}) {
        const GroupScheme s = GroupScheme::parse(name);
        DefaultSchedule sched;
        const auto stages = run(s, steps, sched);
        ASSERT_EQ(stages.size(), steps + 1);
        GroupEnumerator en(s);
        for (std::size_t n = 0; n < stages.size(); ++n) {
            const StageState& st = stages[n];
            EXPECT_EQ(st.step, n);
            EXPECT_TRUE(check_stage(st).empty()) << name << " step " << n;
            EXPECT_TRUE(verify_ledger(st).empty()) << name << " step " << n;
            // Coverage: once step 2k has run (state 2k + 1 on), g_j is in F
            // for j <= k + 1.
            for (std::size_t j = 1; 2 * (j - 1) < n; ++j)
                if (auto g = en.at(j)) {
                    EXPECT_TRUE(st.table.contains(*g)) << name << " state " << n << " g_" << j;
                }
            if (n > 0) {
                // Monotone: the previous table is a restriction.
                for (const auto& [x, v] : stages[n - 1].table.table())
                    EXPECT_EQ(st.table.value(x), v) << name << " step " << n;
                for (const auto& p : stages[n - 1].points)
                    EXPECT_TRUE(st.is_point(p));
            }
        }
        // Every scheduled type with a copy is realized exactly.
        const StageState& last = stages.back();
        for (const auto& e : last.ledger)
            if (e.kind == "realized") {
                for (std::size_t i = 0; i < e.copy.size(); ++i)
                    EXPECT_EQ(last.table.at(sub(s, *e.element, e.copy[i])), e.type->f[i]);
            }
    }
}

TEST(Construction, SmallStagesPassExhaustiveValidation) {
    DefaultSchedule sched;
    for (const auto& st : run(Zs, 8, sched))
        EXPECT_FALSE(validate_partial_norm(st.table)) << "step " << st.step;
}

TEST(Construction, Deterministic) {
    DefaultSchedule a, b;
    const auto x = run(Zs, 14, a);
    const auto y = run(Zs, 14, b);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_EQ(stage_to_json(x[i]).dump(), stage_to_json(y[i]).dump());
}

TEST(Construction, ResumeFromCheckpoint) {
    DefaultSchedule sched;
    const StageState direct = build_stages(Zs, sched, 16);
    const StageState half = build_stages(Zs, sched, 9);
    const StageState loaded = stage_from_json(nlohmann::json::parse(stage_to_json(half).dump()));
    EXPECT_EQ(stage_to_json(loaded).dump(), stage_to_json(half).dump());
    DefaultSchedule sched2;
    const StageState resumed = build_stages(loaded, sched2, 16);
    EXPECT_EQ(stage_to_json(resumed).dump(), stage_to_json(direct).dump());
}

TEST(Construction, SeededRunStaysNearSeed) {
    PartialNorm seed(Zs);
    seed.assign_pm(z(1), q("3/2"));
    DefaultSchedule sched;
    const auto stages = run(Zs, 20, sched, std::make_pair(seed, q("1/4")));
    const StageState& st = stages.back();
    for (const auto& g : {z(1), z(-1)}) {
        const Rational gap = st.table.at(g) - q("3/2");
        EXPECT_GE(gap, 0);
        EXPECT_LT(gap, q("1/4"));
    }
    for (const auto& s : stages) {
        EXPECT_TRUE(check_stage(s).empty());
        EXPECT_TRUE(verify_ledger(s).empty());
    }
    std::size_t realized = 0;
    for (const auto& e : st.ledger)
        realized += e.kind == "realized";
    EXPECT_GT(realized, 0u);
}

TEST(Checkpoint, CorruptionIsDetected) {
    DefaultSchedule sched;
    StageState st = build_stages(Zs, sched, 12);
    ASSERT_TRUE(check_stage(st).empty());
    StageState bad = st;
    const GroupElement far = *st.ledger.back().element;
    bad.table.set(far, Rational(1000));
    bad.table.set(neg(Zs, far), Rational(1000));
    EXPECT_FALSE(check_stage(bad).empty());
    StageState ledger_bad = st;
    for (auto& e : ledger_bad.ledger)
        if (e.kind == "realized") {
            e.type->f[0] += 1;
            break;
        }
    EXPECT_FALSE(verify_ledger(ledger_bad).empty());
    nlohmann::json j = stage_to_json(st);
    j.erase("norm_table");
    EXPECT_THROW(stage_from_json(j), ParseError);
    j = stage_to_json(st);
    j["schema_version"] = 99;
    EXPECT_THROW(stage_from_json(j), ParseError);
}

TEST(Schedule, DefaultTypesAreValidAndRecur) {
    DefaultSchedule sched;
    std::set<std::string> seen;
    for (std::size_t pos = 0; pos < 300; ++pos) {
        const MetricType t = sched.at(pos);
        EXPECT_FALSE(t.check()) << pos << " " << t.label();
        seen.insert(t.label());
    }
    EXPECT_GE(seen.size(), 100u);
    EXPECT_EQ(sched.at(0).label(), one_point(1).label());
    // Diagonal s, row k sits at s(s-1)/2 + (s-k); row k cycles with period |E_k|.
    auto pos = [](std::size_t s, std::size_t k) { return s * (s - 1) / 2 + (s - k); };
    for (std::size_t k : {1, 2}) {
        detail::HeightLister row(k);
        std::set<std::string> labels;
        std::size_t n = 0;
        while (auto t = row.get(n)) {
            EXPECT_EQ(t->height(), k);
            EXPECT_TRUE(labels.insert(t->label()).second); // one labelling per type
            ++n;
        }
        ASSERT_GT(n, 0u);
        for (std::size_t s = k; s < k + 3; ++s)
            EXPECT_EQ(sched.at(pos(s, k)).label(), sched.at(pos(s + n, k)).label());
        if (k == 2) {
            EXPECT_TRUE(labels.count(two_points(q("1/2"), q("1/2"), q("1/2")).label()));
            // Up to relabelling: (d, f0, f1) and (d, f1, f0) are one type.
            EXPECT_EQ(labels.count(two_points(1, q("1/2"), q("3/2")).label()) +
                          labels.count(two_points(1, q("3/2"), q("1/2")).label()),
                      1u);
        }
    }
    DefaultSchedule other;
    EXPECT_EQ(other.at(123).label(), sched.at(123).label());
}

TEST(Schedule, MetricTypeChecksAndJson) {
    EXPECT_FALSE(two_points(2, 1, 1).check());
    EXPECT_TRUE(two_points(2, 1, 4).check());  // |f0 - f1| > d
    EXPECT_TRUE(two_points(3, 1, 1).check());  // d > f0 + f1
    EXPECT_TRUE(two_points(0, 1, 1).check());  // distinct points at distance 0
    const MetricType t = two_points(q("3/2"), 1, q("1/2"));
    EXPECT_EQ(MetricType::from_json(nlohmann::json::parse(t.to_json().dump())).label(), t.label());
    ExplicitSchedule ex({t, one_point(2)});
    const auto back = schedule_from_json(ex.describe());
    EXPECT_EQ(back->at(0).label(), t.label());
    EXPECT_EQ(back->at(3).label(), one_point(2).label());
    EXPECT_EQ(schedule_from_json(DefaultSchedule().describe())->at(7).label(), DefaultSchedule().at(7).label());
}
