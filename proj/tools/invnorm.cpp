// invnorm: command-line driver for the norm constructions.
//
// Exit status: 0 when every assertion passed, 1 when an assertion failed,
// 2 on bad input (usage, parse errors, unsupported groups).

#include "invnorm/invnorm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace invnorm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < std::min(e.byte == 0 ? 0 : e.byte - 1, text.size()); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError("parse error in " + path + " at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + " (byte " + std::to_string(e.byte) + "): " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << text;
    if (!out)
        throw InputError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p))
        throw InputError("output directory " + dir + " cannot be created");
    const fs::path probe = p / ".invnorm_write_probe";
    {
        std::ofstream t(probe);
        if (!t)
            throw InputError("output directory " + dir + " is not writable");
    }
    fs::remove(probe, ec);
    return p;
}

std::string checkpoint_name(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "checkpoint_%03zu.json", step);
    return buf;
}

/// Splits "{a, b, c}" on top-level commas; parentheses group tuple literals.
std::vector<std::string> split_set(const std::string& text) {
    std::string t;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch)))
            t.push_back(ch);
    if (t.size() < 2 || t.front() != '{' || t.back() != '}')
        throw InputError("set literal must look like {a,b,...}: " + text);
    t = t.substr(1, t.size() - 2);
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char ch : t) {
        if (ch == '(')
            ++depth;
        if (ch == ')')
            --depth;
        if (ch == ',' && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    if (depth != 0)
        throw InputError("unbalanced parentheses in " + text);
    return out;
}

SymSet parse_set(const GroupScheme& s, const std::string& text) {
    std::vector<GroupElement> elems;
    for (const auto& item : split_set(text))
        elems.push_back(parse_element(s, item));
    return SymSet::closure_of(s, elems);
}

json set_to_json(const GroupScheme& s, const SymSet& a) {
    json out = json::array();
    for (const auto& x : a)
        out.push_back(format_element(s, x));
    return out;
}

// ---------------------------------------------------------------------------
// Assertion report

struct Report {
    struct Item {
        std::string name;
        bool ok;
        std::string detail;
    };
    std::vector<Item> items;

    void add(std::string name, bool ok, std::string detail = {}) {
        items.push_back({std::move(name), ok, std::move(detail)});
    }

    void add_problems(const std::string& name, const std::vector<std::string>& problems) {
        if (problems.empty())
            add(name, true);
        for (const auto& p : problems)
            add(name, false, p);
    }

    bool ok() const {
        return std::all_of(items.begin(), items.end(), [](const Item& i) { return i.ok; });
    }

    int print(std::ostream& os) const {
        for (const auto& i : items) {
            os << (i.ok ? "PASS " : "FAIL ") << i.name;
            if (!i.detail.empty())
                os << ": " << i.detail;
            os << '\n';
        }
        os << (ok() ? "all assertions passed" : "assertion failures") << '\n';
        return ok() ? kOk : kFailed;
    }

    json to_json() const {
        json out = json::array();
        for (const auto& i : items)
            out.push_back({{"name", i.name}, {"ok", i.ok}, {"detail", i.detail}});
        return out;
    }
};

// ---------------------------------------------------------------------------
// Validation of each artifact kind

void validate_urysohn_stage(const StageState& st, Report& r) {
    const auto pointwise = check_pointwise_axioms(st.table);
    r.add("axioms 1-2 (zero, positivity, symmetry)", !pointwise, pointwise ? pointwise->describe(st.scheme) : "");
    if (pointwise) {
        r.add("axiom 3 (subadditivity)", false, "not checked: pointwise axioms fail");
        r.add("metric axioms on points", false, "not checked: pointwise axioms fail");
    } else {
        const PointTableCheck c = validate_point_table(st.table, st.points);
        r.add("table shape (domain = P - P)", !c.shape_problem, c.shape_problem.value_or(""));
        if (c.shape_problem) {
            r.add("axiom 3 (subadditivity)", false, "not checked: table shape fails");
            r.add("metric axioms on points", false, "not checked: table shape fails");
        } else {
            r.add("axiom 3 (subadditivity)", !c.violation, c.violation ? c.violation->describe(st.scheme) : "");
            const auto bad = st.metric().check_axioms();
            r.add("metric axioms on points", !bad, bad.value_or(""));
        }
    }
    r.add_problems("ledger re-verification", verify_ledger(st));
}

void validate_generic_stage(const GenericStage& st, Report& r) {
    const auto pointwise = check_pointwise_axioms(st.table);
    r.add("axioms 1-2 (zero, positivity, symmetry)", !pointwise, pointwise ? pointwise->describe(st.scheme) : "");
    r.add_problems("stage consistency (level tables, stored closure, bridges)", check_generic_stage(st));
    r.add_problems("ledger re-verification", verify_generic_ledger(st));
}

void validate_partial_norm_json(const json& j, Report& r) {
    const PartialNorm p = norm_from_json(j);
    const auto pointwise = check_pointwise_axioms(p);
    r.add("axioms 1-2 (zero, positivity, symmetry)", !pointwise, pointwise ? pointwise->describe(p.scheme()) : "");
    if (!pointwise) {
        const auto bad = validate_partial_norm(p);
        r.add("axiom 3 (subadditivity)", !bad, bad ? bad->describe(p.scheme()) : "");
    }
}

void validate_katetov_json(const json& j, Report& r) {
    const PartialNorm lambda = norm_from_json(j.at("input_norm"));
    const GroupScheme& s = lambda.scheme();
    const PartialNorm out = norm_from_json(j.at("norm"), s);
    const KatetovFn f = katetov_from_json(s, j.at("f"));
    const GroupElement g = parse_element(s, j.at("g").get<std::string>());
    const auto bad = validate_partial_norm(out);
    r.add("realized norm is valid", !bad, bad ? bad->describe(s) : "");
    bool exact = true;
    std::string detail;
    for (const auto& [a, v] : f) {
        const GroupElement x = sub(s, g, a);
        if (!out.contains(x) || out.at(x) != v) {
            exact = false;
            detail = "lambda(g - " + format_element(s, a) + ") != " + to_string(v);
            break;
        }
    }
    r.add("lambda(g - a) = f(a) exactly", exact, detail);
    bool kept = true;
    const PartialNorm closed = greatest_extension(lambda, diff_closure(s, lambda.domain()));
    for (const auto& [x, v] : closed.table())
        if (!out.contains(x) || out.at(x) != v)
            kept = false;
    r.add("input norm extended without change", kept);
}

void validate_far_json(const json& j, Report& r) {
    const GroupScheme s = GroupScheme::parse(j.at("scheme").get<std::string>());
    std::vector<GroupElement> elems;
    for (const auto& x : j.at("set"))
        elems.push_back(parse_element(s, x.get<std::string>()));
    const SymSet a = SymSet::closure_of(s, elems);
    const GroupElement g = parse_element(s, j.at("element").get<std::string>());
    const std::size_t radius = j.at("radius").get<std::size_t>();
    DistOptions opt;
    opt.use_certificates = false;
    const bool far = !a.contains(g) && oriented_dist_bounded(s, g, a, radius, opt).exceeds();
    r.add("dist(g, A) > R by bounded BFS", far);
}

void validate_dist_json(const json& j, Report& r) {
    const GroupScheme s = GroupScheme::parse(j.at("scheme").get<std::string>());
    std::vector<GroupElement> elems;
    for (const auto& x : j.at("set"))
        elems.push_back(parse_element(s, x.get<std::string>()));
    const SymSet a = SymSet::closure_of(s, elems);
    const GroupElement g = parse_element(s, j.at("g").get<std::string>());
    const json& res = j.at("result");
    if (res.at("exceeds").get<bool>()) {
        DistOptions opt;
        opt.use_certificates = false;
        r.add("exceedance re-checked by BFS",
              oriented_dist_bounded(s, g, a, res.at("radius").get<std::size_t>(), opt).exceeds());
        return;
    }
    std::vector<DistEdge> path;
    for (const auto& e : res.at("path"))
        path.push_back({parse_element(s, e.at("from").get<std::string>()),
                        parse_element(s, e.at("gen").get<std::string>()),
                        parse_element(s, e.at("to").get<std::string>())});
    r.add("witness path replays from g into A", check_dist_path(s, g, a, path));
    r.add("path length equals reported distance", path.size() == res.at("dist").get<std::size_t>());
}

void validate_amalgam_json(const json& j, Report& r) {
    const json& c = j.at("certificate");
    const FiniteNormedGroup g0 = FiniteNormedGroup::from_json(c.at("g0"));
    const FiniteNormedGroup g1 = FiniteNormedGroup::from_json(c.at("g1"));
    const FiniteNormedGroup g2 = FiniteNormedGroup::from_json(c.at("g2"));
    const FiniteNormedGroup g3 = FiniteNormedGroup::from_json(c.at("g3"));
    const FiniteHom e1 = FiniteHom::from_json(c.at("e1")), e2 = FiniteHom::from_json(c.at("e2"));
    const FiniteHom j1 = FiniteHom::from_json(c.at("j1")), j2 = FiniteHom::from_json(c.at("j2"));
    const auto n3 = g3.check();
    r.add("amalgam norm axioms", !n3, n3.value_or(""));
    const auto p1 = FiniteEmbedding{g1, g3, j1}.problems();
    const auto p2 = FiniteEmbedding{g2, g3, j2}.problems();
    r.add("j1 isometric embedding", p1.empty(), p1.empty() ? "" : p1.front());
    r.add("j2 isometric embedding", p2.empty(), p2.empty() ? "" : p2.front());
    const auto q1 = FiniteEmbedding{g0, g1, e1}.problems();
    const auto q2 = FiniteEmbedding{g0, g2, e2}.problems();
    r.add("e1, e2 isometric embeddings", q1.empty() && q2.empty());
    bool commutes = q1.empty() && q2.empty() && p1.empty() && p2.empty();
    for (std::size_t g = 0; commutes && g < g0.group.size(); ++g)
        commutes = j1.apply(e1.apply(g)) == j2.apply(e2.apply(g));
    r.add("diagram commutes", commutes);
}

bool parse_csv_rational(const std::string& cell, Rational& out) {
    try {
        out = parse_rational(cell);
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

void validate_metric_csv(const std::string& text, Report& r) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    if (rows.empty() || rows.front().empty() || rows.front().front() != "point")
        throw InputError("metric CSV must start with a 'point' header row");
    const std::size_t n = rows.front().size() - 1;
    if (rows.size() != n + 1)
        throw InputError("metric CSV has " + std::to_string(rows.size() - 1) + " rows for " + std::to_string(n) +
                         " points");
    std::vector<std::vector<Rational>> d(n, std::vector<Rational>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i + 1].size() != n + 1 || rows[i + 1][0] != rows[0][i + 1])
            throw InputError("metric CSV row " + std::to_string(i + 1) + " does not match the header");
        for (std::size_t k = 0; k < n; ++k)
            if (!parse_csv_rational(rows[i + 1][k + 1], d[i][k]))
                throw InputError("metric CSV entry '" + rows[i + 1][k + 1] + "' is not an exact rational");
    }
    std::string bad;
    for (std::size_t i = 0; i < n && bad.empty(); ++i)
        for (std::size_t k = 0; k < n && bad.empty(); ++k) {
            if ((i == k) != (d[i][k] == 0) || d[i][k] < 0)
                bad = "d(" + rows[0][i + 1] + ", " + rows[0][k + 1] + ") breaks positivity";
            else if (d[i][k] != d[k][i])
                bad = "d is not symmetric at (" + rows[0][i + 1] + ", " + rows[0][k + 1] + ")";
            for (std::size_t j = 0; j < n && bad.empty(); ++j)
                if (d[i][k] > d[i][j] + d[j][k])
                    bad = "triangle inequality fails at (" + rows[0][i + 1] + ", " + rows[0][j + 1] + ", " +
                          rows[0][k + 1] + ")";
        }
    r.add("metric axioms", bad.empty(), bad);
}

/// A ledger file names its checkpoint; the ledger must match the one stored
/// there and pass re-verification against it.
void validate_ledger_json(const std::string& path, const json& j, Report& r) {
    const fs::path cp = fs::path(path).parent_path() / j.at("checkpoint").get<std::string>();
    const json cj = read_json(cp.string());
    if (j.at("kind") == "urysohn-ledger") {
        const StageState st = stage_from_json(cj);
        r.add("ledger matches " + cp.filename().string(), cj.at("ledger") == j.at("entries"));
        r.add_problems("ledger re-verification", verify_ledger(st));
        return;
    }
    const GenericStage st = generic_stage_from_json(cj);
    bool same = j.at("triples").size() == cj.at("triples").size();
    for (std::size_t i = 0; same && i < cj.at("triples").size(); ++i) {
        json t = j.at("triples")[i];
        t.erase("witness_recheck");
        same = t == cj.at("triples")[i];
    }
    r.add("ledger matches " + cp.filename().string(), same);
    r.add_problems("ledger re-verification", verify_generic_ledger(st));
    bool rechecked = true;
    for (const auto& t : j.at("triples"))
        for (const auto& w : t.at("witness_recheck"))
            rechecked = rechecked && w.at("ok").get<bool>();
    r.add("logged witness re-checks passed", rechecked);
}

int cmd_validate(const std::string& path, const std::string& report_path) {
    Report r;
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        validate_metric_csv(read_text(path), r);
    } else {
        const json j = read_json(path);
        if (!j.is_object())
            throw InputError(path + ": expected a JSON object");
        if (j.contains("schema_version")) {
            const bool ok = j.at("schema_version") == kSchemaVersion;
            r.add("schema_version", ok, ok ? "" : "file has " + j.at("schema_version").dump());
            if (!ok)
                return r.print(std::cout);
        }
        const std::string kind = j.value("kind", "");
        if (is_generic_checkpoint(j))
            validate_generic_stage(generic_stage_from_json(j), r);
        else if (kind.empty() && j.contains("points") && j.contains("ledger"))
            validate_urysohn_stage(stage_from_json(j), r);
        else if (kind == "urysohn-ledger" || kind == "generic-ledger")
            validate_ledger_json(path, j, r);
        else if (kind == "katetov-realization")
            validate_katetov_json(j, r);
        else if (kind == "far")
            validate_far_json(j, r);
        else if (kind == "dist")
            validate_dist_json(j, r);
        else if (kind == "amalgam")
            validate_amalgam_json(j, r);
        else if (j.contains("values"))
            validate_partial_norm_json(j, r);
        else
            throw InputError(path + ": unrecognized artifact");
    }
    std::cout << "validate " << path << '\n';
    if (!report_path.empty())
        write_json(report_path, {{"schema_version", kSchemaVersion}, {"file", path}, {"ok", r.ok()},
                                 {"assertions", r.to_json()}});
    return r.print(std::cout);
}

// ---------------------------------------------------------------------------
// build-urysohn

struct UrysohnArgs {
    std::string scheme;
    std::size_t steps = 0;
    std::string out;
    std::string resume;
    std::string schedule;
    std::string seed;
    std::string seed_eps = "1/2";
};

std::unique_ptr<TypeSchedule> load_type_schedule(const std::string& spec, const json& fallback) {
    if (spec.empty())
        return schedule_from_json(fallback);
    if (spec == "default")
        return std::make_unique<DefaultSchedule>();
    return schedule_from_json(read_json(spec));
}

int cmd_build_urysohn(const UrysohnArgs& a) {
    StageState st;
    std::unique_ptr<TypeSchedule> sched;
    if (!a.resume.empty()) {
        st = stage_from_json(read_json(a.resume));
        if (!a.scheme.empty() && GroupScheme::parse(a.scheme).to_string() != st.scheme.to_string())
            throw InputError("--scheme differs from the checkpoint's scheme " + st.scheme.to_string());
        sched = load_type_schedule(a.schedule, st.schedule);
    } else {
        if (!a.seed.empty()) {
            const json sj = read_json(a.seed);
            const PartialNorm seed = a.scheme.empty() ? norm_from_json(sj) : norm_from_json(sj, GroupScheme::parse(a.scheme));
            const Rational eps = parse_rational(a.seed_eps);
            if (eps <= 0)
                throw InputError("--seed-eps must be positive");
            if (!seed.scheme().is_unbounded())
                throw UnsupportedGroup("group " + seed.scheme().to_string() + " is bounded");
            st = seeded_stage(seed, eps);
        } else {
            if (a.scheme.empty())
                throw InputError("--scheme is required unless --resume or --seed is given");
            st = StageState::initial(GroupScheme::parse(a.scheme));
        }
        sched = load_type_schedule(a.schedule.empty() ? "default" : a.schedule, json());
    }
    const fs::path out = prepare_out_dir(a.out);
    BuildOptions opt;
    std::size_t written = 0;
    opt.on_checkpoint = [&](const StageState& s) {
        write_json(out / checkpoint_name(s.step), stage_to_json(s));
        ++written;
    };
    st = build_stages(std::move(st), *sched, a.steps, opt);
    const std::string final_name = checkpoint_name(st.step);
    json ledger = json::array();
    for (const auto& e : st.ledger)
        ledger.push_back(e.to_json(st.scheme));
    write_json(out / "ledger.json", {{"schema_version", kSchemaVersion},
                                     {"kind", "urysohn-ledger"},
                                     {"checkpoint", final_name},
                                     {"entries", std::move(ledger)}});
    write_text(out / "metric.csv", st.metric().to_csv());

    Report r;
    r.add("checkpoints written", written > 0, std::to_string(written) + " files");
    validate_urysohn_stage(st, r);
    std::size_t realized = 0, no_copy = 0;
    for (const auto& e : st.ledger) {
        realized += e.kind == "realized";
        no_copy += e.kind == "no-copy";
    }
    std::cout << "build-urysohn " << st.scheme.to_string() << ": step " << st.step << ", " << st.points.size()
              << " points, " << st.table.size() << " table entries, " << realized << " realized copies, "
              << no_copy << " types without a copy\n";
    return r.print(std::cout);
}

// ---------------------------------------------------------------------------
// generic

struct GenericArgs {
    std::string scheme = "Z^inf";
    std::size_t steps = 0;
    std::string schedule;
    std::size_t bound = 4;
    std::string out;
    std::string resume;
};

std::unique_ptr<TripleSchedule> load_triple_schedule(const GroupScheme& s, const std::string& spec,
                                                     const json& fallback) {
    if (spec.empty())
        return triple_schedule_from_json(s, fallback);
    if (spec == "default")
        return triple_schedule_from_json(s, {{"kind", "default"}});
    return triple_schedule_from_json(s, read_json(spec));
}

int cmd_generic(const GenericArgs& a) {
    GenericStage st;
    std::unique_ptr<TripleSchedule> sched;
    const fs::path out = prepare_out_dir(a.out);
    std::map<std::size_t, GenericStage> stages;
    if (!a.resume.empty()) {
        st = generic_stage_from_json(read_json(a.resume));
        sched = load_triple_schedule(st.scheme, a.schedule, st.schedule);
    } else {
        const GroupScheme s = GroupScheme::parse(a.scheme);
        if (a.bound < 1)
            throw InputError("--bound must be at least 1");
        st = initial_generic_stage(s, std::nullopt, a.bound);
        sched = load_triple_schedule(s, a.schedule.empty() ? "default" : a.schedule, json());
    }
    GenericBuildOptions opt;
    std::size_t written = 0;
    opt.on_checkpoint = [&](const GenericStage& s) {
        write_json(out / checkpoint_name(s.step), generic_stage_to_json(s));
        stages.emplace(s.step, s);
        ++written;
    };
    if (!a.resume.empty())
        opt.on_checkpoint(st);
    st = build_generic_stages(std::move(st), *sched, a.steps, opt);

    auto stage_at = [&](std::size_t step) -> const GenericStage* {
        if (auto it = stages.find(step); it != stages.end())
            return &it->second;
        for (const fs::path& dir : {out, fs::path(a.resume).parent_path()}) {
            const fs::path p = dir / checkpoint_name(step);
            if (!a.resume.empty() && fs::exists(p))
                return &stages.emplace(step, generic_stage_from_json(read_json(p.string()))).first->second;
        }
        return nullptr;
    };

    Report r;
    r.add("checkpoints written", written > 0, std::to_string(written) + " files");
    json triples = json::array();
    std::size_t identity_copies = 0, recovered = 0;
    for (const auto& rec : st.triples) {
        json t = rec.to_json();
        json checks = json::array();
        for (const auto& c : rec.copies) {
            json w{{"level", c.level}};
            const bool identity = c.sigma == IndexMap::identity(rec.triple.b);
            if (!identity) {
                w["method"] = "direct";
                w["ok"] = c.equiv_ok && c.bridge_ok && c.preservation_ok;
            } else {
                ++identity_copies;
                w["method"] = "gdelta_witness";
                const GenericStage* after = stage_at(rec.step);
                if (!after) {
                    w["ok"] = false;
                    w["problem"] = "checkpoint " + checkpoint_name(rec.step) + " unavailable";
                } else {
                    const WitnessResult res = gdelta_witness(*after, rec.triple.b, rec.triple.a, rec.triple.rho,
                                                             rec.eps * 2, Rational(0), rec.bound, c.phi);
                    const bool ok = res.phi && *res.phi == c.phi;
                    recovered += ok;
                    w["ok"] = ok;
                    w["eps"] = to_string(rec.eps * 2);
                    w["eps_prime"] = "0";
                    w["candidates"] = res.candidates;
                    if (res.phi)
                        w["phi"] = res.phi->to_json();
                }
            }
            if (!w["ok"].get<bool>())
                r.add("witness re-check at step " + std::to_string(rec.step), false, w.dump());
            checks.push_back(std::move(w));
        }
        t["witness_recheck"] = std::move(checks);
        triples.push_back(std::move(t));
    }
    r.add("logged witnesses recovered", recovered == identity_copies,
          std::to_string(recovered) + "/" + std::to_string(identity_copies) + " identity copies");
    write_json(out / "ledger.json", {{"schema_version", kSchemaVersion},
                                     {"kind", "generic-ledger"},
                                     {"checkpoint", checkpoint_name(st.step)},
                                     {"triples", std::move(triples)}});
    validate_generic_stage(st, r);
    std::size_t copies = 0;
    for (const auto& rec : st.triples)
        copies += rec.copies.size();
    std::cout << "generic " << st.scheme.to_string() << ": step " << st.step << ", " << st.levels.size()
              << " levels, " << st.indices.size() << " generators, " << copies << " copies processed\n";
    return r.print(std::cout);
}

// ---------------------------------------------------------------------------
// shkarin, far, dist, katetov

int cmd_shkarin(const std::vector<std::string>& files, const std::string& out_dir) {
    if (files.size() != 2)
        throw InputError("--amalgamate takes two embedding files");
    const FiniteEmbedding e1 = embedding_from_json(read_json(files[0]));
    const FiniteEmbedding e2 = embedding_from_json(read_json(files[1]));
    Report r;
    try {
        const Amalgam a = amalgamate(e1, e2);
        const json doc{{"schema_version", kSchemaVersion},
                       {"kind", "amalgam"},
                       {"g3", a.group.to_json()},
                       {"certificate", a.certificate}};
        if (!out_dir.empty())
            write_json(prepare_out_dir(out_dir) / "amalgam.json", doc);
        else
            std::cout << doc.dump(2) << '\n';
        for (const auto& [k, v] : a.certificate.at("checks").items())
            r.add(k, v.get<bool>());
        std::cout << "amalgam of order " << a.group.group.size() << " (" << a.group.group.to_string() << ")\n";
    } catch (const AmalgamCounterexample& ce) {
        const json doc{{"schema_version", kSchemaVersion}, {"kind", "amalgam-counterexample"},
                       {"reason", ce.what()}, {"certificate", ce.certificate}};
        if (!out_dir.empty())
            write_json(prepare_out_dir(out_dir) / "counterexample.json", doc);
        else
            std::cout << doc.dump(2) << '\n';
        r.add("amalgam checks", false, ce.what());
    }
    return r.print(std::cout);
}

int cmd_far(const std::string& scheme, const std::string& set, std::size_t radius, const std::string& out_dir) {
    const GroupScheme s = GroupScheme::parse(scheme);
    const SymSet a = parse_set(s, set);
    const GroupElement g = find_far_element(s, a, radius);
    DistOptions opt;
    opt.use_certificates = false;
    const DistResult bfs = oriented_dist_bounded(s, g, a, radius, opt);
    const json doc{{"schema_version", kSchemaVersion},
                   {"kind", "far"},
                   {"scheme", s.to_string()},
                   {"set", set_to_json(s, a)},
                   {"radius", radius},
                   {"element", format_element(s, g)},
                   {"element_json", element_to_json(g)},
                   {"bfs_check", dist_result_to_json(s, g, bfs)}};
    if (!out_dir.empty())
        write_json(prepare_out_dir(out_dir) / "far.json", doc);
    std::cout << doc.dump(2) << '\n';
    Report r;
    r.add("dist(g, A) > R by bounded BFS", bfs.exceeds());
    return r.print(std::cout);
}

int cmd_dist(const std::string& scheme, const std::string& set, const std::string& g_text, std::size_t radius,
             bool both, bool no_certificates, const std::string& out_dir) {
    const GroupScheme s = GroupScheme::parse(scheme);
    const SymSet a = parse_set(s, set);
    const GroupElement g = parse_element(s, g_text);
    DistOptions opt;
    opt.direction = both ? DistDirection::Both : DistDirection::FromG;
    opt.use_certificates = !no_certificates;
    const DistResult res = oriented_dist_bounded(s, g, a, radius, opt);
    const json doc{{"schema_version", kSchemaVersion},
                   {"kind", "dist"},
                   {"scheme", s.to_string()},
                   {"set", set_to_json(s, a)},
                   {"g", format_element(s, g)},
                   {"direction", both ? "both" : "from-g"},
                   {"result", dist_result_to_json(s, g, res)}};
    if (!out_dir.empty())
        write_json(prepare_out_dir(out_dir) / "dist.json", doc);
    std::cout << doc.dump(2) << '\n';
    Report r;
    if (res.exceeds())
        r.add("distance exceeds the radius", true);
    else if (both)
        r.add("path found", true, "direction 'both' paths are not replayed from g");
    else
        r.add("witness path replays from g into A", check_dist_path(s, g, a, res.path));
    return r.print(std::cout);
}

int cmd_katetov(const std::string& norm_file, const std::string& f_file, const std::string& g_text,
                const std::string& out_dir) {
    const json nj = read_json(norm_file);
    const PartialNorm lambda = norm_from_json(nj);
    const GroupScheme& s = lambda.scheme();
    if (auto bad = validate_partial_norm(lambda))
        throw InvalidNorm(*bad, s);
    const KatetovFn f = katetov_from_json(s, read_json(f_file));
    const SymSet a = lambda.domain();
    const SymSet abar = diff_closure(s, a);
    const PartialNorm closed = greatest_extension(lambda, abar);
    const RealizationBounds rb = realization_bounds(closed, f);
    const GroupElement g = g_text.empty() ? find_far_element(s, abar, rb.radius) : parse_element(s, g_text);
    Report r;
    const bool far = !abar.contains(g) && oriented_dist_bounded(s, g, abar, rb.radius).exceeds();
    r.add("dist(g, A-bar) > 2M/m", far, "radius " + std::to_string(rb.radius));
    if (!far)
        return r.print(std::cout);
    const PartialNorm out = katetov_realize(lambda, f, g);
    const json doc{{"schema_version", kSchemaVersion},
                   {"kind", "katetov-realization"},
                   {"scheme", s.to_string()},
                   {"g", format_element(s, g)},
                   {"m", to_string(rb.m)},
                   {"M", to_string(rb.M)},
                   {"radius", rb.radius},
                   {"input_norm", norm_to_json(lambda)},
                   {"f", katetov_to_json(s, f, "input_norm")},
                   {"norm", norm_to_json(out)}};
    if (!out_dir.empty())
        write_json(prepare_out_dir(out_dir) / "katetov.json", doc);
    std::cout << doc.dump(2) << '\n';
    validate_katetov_json(doc, r);
    return r.print(std::cout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"invnorm: invariant norms on countable abelian groups"};
    app.require_subcommand(1);
    int schema_version = kSchemaVersion;
    unsigned long seed_rng = 0;
    app.add_option("--schema-version", schema_version, "Checkpoint schema version (only 1 is supported)");
    app.add_option("--seed-rng", seed_rng, "RNG seed for randomized suites; constructions ignore it");

    UrysohnArgs ua;
    auto* bu = app.add_subcommand("build-urysohn", "Build finite stages of the Urysohn norm construction");
    bu->add_option("--scheme", ua.scheme, "Group scheme, e.g. Z, Z^2, \"sum QmodZ\"");
    bu->add_option("--steps", ua.steps, "Target step count")->required();
    bu->add_option("--out", ua.out, "Output directory")->required();
    bu->add_option("--resume", ua.resume, "Resume from a checkpoint file");
    bu->add_option("--schedule", ua.schedule, "Type schedule file or 'default'");
    bu->add_option("--seed", ua.seed, "Seed partial norm (JSON)");
    bu->add_option("--seed-eps", ua.seed_eps, "Rationalization tolerance for the seed, as p/q");

    std::string vpath, vreport;
    auto* va = app.add_subcommand("validate", "Re-run every check on an emitted file");
    va->add_option("path", vpath, "Checkpoint, ledger, CSV or result file")->required();
    va->add_option("--report", vreport, "Also write the report as JSON");

    GenericArgs ga;
    auto* ge = app.add_subcommand("generic", "Run density steps of the generic-norm construction");
    ge->add_option("--scheme", ga.scheme, "Infinitely summed scheme (default Z^inf)");
    ge->add_option("--steps", ga.steps, "Number of density steps")->required();
    ge->add_option("--schedule", ga.schedule, "Triple schedule file or 'default'");
    ge->add_option("--bound", ga.bound, "Word-length bound L");
    ge->add_option("--out", ga.out, "Output directory")->required();
    ge->add_option("--resume", ga.resume, "Resume from a checkpoint file");

    std::vector<std::string> am_files;
    std::string sh_out;
    auto* sh = app.add_subcommand("shkarin", "Amalgamate finite normed groups over a common subgroup");
    sh->add_option("--amalgamate", am_files, "Two embedding files G0 -> G1, G0 -> G2")->expected(2)->required();
    sh->add_option("--out", sh_out, "Output directory");

    std::string f_scheme, f_set, f_out;
    std::size_t f_radius = 1;
    auto* fa = app.add_subcommand("far", "Find an element at Cayley distance > R from a set");
    fa->add_option("--scheme", f_scheme, "Group scheme")->required();
    fa->add_option("--set", f_set, "Set A, e.g. \"{0,1,-1}\"")->required();
    fa->add_option("--radius", f_radius, "Radius R")->required();
    fa->add_option("--out", f_out, "Output directory");

    std::string d_scheme, d_set, d_g, d_out;
    std::size_t d_radius = 1;
    bool d_both = false, d_plain = false;
    auto* di = app.add_subcommand("dist", "Oriented Cayley distance from g into A, bounded by R");
    di->add_option("--scheme", d_scheme, "Group scheme")->required();
    di->add_option("--set", d_set, "Set A")->required();
    di->add_option("--g", d_g, "Element g")->required();
    di->add_option("--radius", d_radius, "Radius R")->required();
    di->add_flag("--both", d_both, "Also search paths from A to g");
    di->add_flag("--no-certificates", d_plain, "Plain BFS only");
    di->add_option("--out", d_out, "Output directory");

    std::string k_norm, k_f, k_g, k_out;
    auto* ka = app.add_subcommand("katetov", "Realize a Katetov function by a far element");
    ka->add_option("--norm", k_norm, "Partial norm on A (JSON)")->required();
    ka->add_option("--f", k_f, "Katetov function on A-bar (JSON)")->required();
    ka->add_option("--g", k_g, "Element to use instead of the far-element search");
    ka->add_option("--out", k_out, "Output directory");

    CLI11_PARSE(app, argc, argv);
    (void)seed_rng;
    try {
        if (schema_version != kSchemaVersion)
            throw InputError("unsupported schema version " + std::to_string(schema_version) + " (supported: " +
                             std::to_string(kSchemaVersion) + ")");
        if (bu->parsed())
            return cmd_build_urysohn(ua);
        if (va->parsed())
            return cmd_validate(vpath, vreport);
        if (ge->parsed())
            return cmd_generic(ga);
        if (sh->parsed())
            return cmd_shkarin(am_files, sh_out);
        if (fa->parsed())
            return cmd_far(f_scheme, f_set, f_radius, f_out);
        if (di->parsed())
            return cmd_dist(d_scheme, d_set, d_g, d_radius, d_both, d_plain, d_out);
        if (ka->parsed())
            return cmd_katetov(k_norm, k_f, k_g, k_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kBadInput;
    } catch (const UnsupportedGroup& e) {
        std::cerr << "unsupported group: " << e.what() << '\n';
        return kBadInput;
    } catch (const InvalidNorm& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kBadInput;
    } catch (const InvalidKatetov& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kBadInput;
    } catch (const PreconditionFailure& e) {
        std::cerr << "precondition fails: " << e.what() << '\n';
        return kBadInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "malformed input: " << e.what() << '\n';
        return kBadInput;
    } catch (const ConstructionError& e) {
        std::cerr << "construction failed: " << e.what() << '\n';
        return kFailed;
    } catch (const ConstructionFailure& e) {
        std::cerr << "construction failed: " << e.what() << '\n';
        return kFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kBadInput;
}
