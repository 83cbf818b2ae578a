#include "invnorm/invnorm.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace invnorm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int code;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(INVNORM_CLI_PATH) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return {-1, "popen failed"};
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p))
        out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

std::string sample(const char* name) { return quote(fs::path(INVNORM_SAMPLES_DIR) / name); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

void save(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("invnorm_cli_" + std::string(info->name()) + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

std::size_t count_checkpoints(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        n += e.path().filename().string().rfind("checkpoint_", 0) == 0;
    return n;
}

} // namespace

TEST_F(Cli, BuildUrysohnWritesCheckpointsLedgerAndCsv) {
    const auto r = run("build-urysohn --scheme Z --steps 20 --out " + quote(dir_ / "z20"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(count_checkpoints(dir_ / "z20"), 21u);
    for (std::size_t n = 0; n <= 20; ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "checkpoint_%03zu.json", n);
        const json j = load(dir_ / "z20" / name);
        EXPECT_EQ(j.at("schema_version"), kSchemaVersion);
        EXPECT_EQ(j.at("step"), n);
        for (const char* key : {"scheme", "elements", "norm_table", "schedule_pos", "ledger"})
            EXPECT_TRUE(j.contains(key)) << key;
        for (const auto& e : j.at("norm_table"))
            EXPECT_TRUE(e[1].is_string());
    }
    const json ledger = load(dir_ / "z20" / "ledger.json");
    EXPECT_EQ(ledger.at("kind"), "urysohn-ledger");
    EXPECT_FALSE(ledger.at("entries").empty());
    const std::string csv = slurp(dir_ / "z20" / "metric.csv");
    EXPECT_EQ(csv.rfind("point,0,", 0), 0u);
    EXPECT_EQ(csv.find('.'), std::string::npos);
}

TEST_F(Cli, ZeroStepsGivesSingleSeedCheckpoint) {
    const auto r = run("build-urysohn --scheme Z --steps 0 --out " + quote(dir_ / "z0"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(count_checkpoints(dir_ / "z0"), 1u);
    EXPECT_EQ(load(dir_ / "z0" / "checkpoint_000.json").at("norm_table").size(), 1u);
}

TEST_F(Cli, BoundedSchemeIsRejected) {
    const auto r = run("build-urysohn --scheme 'sum Z/2' --steps 2 --out " + quote(dir_ / "b"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("bounded"), std::string::npos) << r.output;
}

TEST_F(Cli, SchemaVersionIsPinned) {
    const auto r = run("--schema-version 2 build-urysohn --scheme Z --steps 1 --out " + quote(dir_ / "v"));
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(run("--schema-version 1 build-urysohn --scheme Z --steps 1 --out " + quote(dir_ / "v")).code, 0);
}

TEST_F(Cli, EveryEmittedUrysohnFileValidates) {
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 12 --out " + quote(dir_ / "z")).code, 0);
    for (const auto& e : fs::directory_iterator(dir_ / "z")) {
        const auto r = run("validate " + quote(e.path()));
        EXPECT_EQ(r.code, 0) << e.path() << "\n" << r.output;
        EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
    }
}

TEST_F(Cli, ValidateReportsSubadditivityWitnessForRaisedValue) {
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 20 --out " + quote(dir_ / "z")).code, 0);
    json j = load(dir_ / "z" / "checkpoint_020.json");
    const json minus_two = json::array({{{"coord", 0}, {"val", -2}}});
    bool edited = false;
    for (auto& e : j.at("norm_table"))
        if (e[0] == minus_two) {
            ASSERT_EQ(e[1], "2");
            e[1] = "3";
            edited = true;
        }
    ASSERT_TRUE(edited);
    save(dir_ / "bad.json", j);
    const auto r = run("validate " + quote(dir_ / "bad.json"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("FAIL axiom 3 (subadditivity)"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("2 = 1 + 1 costs 2 < 3"), std::string::npos) << r.output;
}

TEST_F(Cli, ValidateRejectsTruncatedFile) {
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 4 --out " + quote(dir_ / "z")).code, 0);
    const std::string text = slurp(dir_ / "z" / "checkpoint_004.json");
    std::ofstream(dir_ / "trunc.json") << text.substr(0, text.size() / 2);
    const auto r = run("validate " + quote(dir_ / "trunc.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("parse error"), std::string::npos);
    EXPECT_NE(r.output.find("line"), std::string::npos);
}

TEST_F(Cli, ValidateCatchesLedgerTampering) {
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 8 --out " + quote(dir_ / "z")).code, 0);
    json j = load(dir_ / "z" / "checkpoint_008.json");
    for (auto& e : j.at("ledger"))
        if (e.at("kind") == "realized") {
            e.at("type").at("f")[0] = "7";
            break;
        }
    save(dir_ / "bad.json", j);
    const auto r = run("validate " + quote(dir_ / "bad.json"));
    EXPECT_EQ(r.code, 1) << r.output;
    EXPECT_NE(r.output.find("FAIL ledger re-verification"), std::string::npos) << r.output;
}

TEST_F(Cli, ResumeAndRepeatAreByteIdentical) {
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 14 --out " + quote(dir_ / "a")).code, 0);
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 14 --out " + quote(dir_ / "b")).code, 0);
    ASSERT_EQ(run("build-urysohn --scheme Z --steps 6 --out " + quote(dir_ / "c")).code, 0);
    ASSERT_EQ(run("build-urysohn --steps 14 --resume " + quote(dir_ / "c" / "checkpoint_006.json") + " --out " +
                  quote(dir_ / "c"))
                  .code,
              0);
    for (const auto& e : fs::directory_iterator(dir_ / "a")) {
        const std::string name = e.path().filename().string();
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / name)) << name;
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "c" / name)) << name;
    }
}

TEST_F(Cli, SeededRun) {
    const auto r = run("build-urysohn --seed " + sample("katetov_norm.json") + " --seed-eps 1/4 --steps 4 --out " +
                       quote(dir_ / "s"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_GE(load(dir_ / "s" / "checkpoint_000.json").at("points").size(), 3u);
}

TEST_F(Cli, GenericWritesCheckpointsAndWitnessLedger) {
    const auto r = run("generic --steps 5 --schedule default --out " + quote(dir_ / "g"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("PASS logged witnesses recovered"), std::string::npos);
    EXPECT_EQ(count_checkpoints(dir_ / "g"), 6u);
    const json ledger = load(dir_ / "g" / "ledger.json");
    EXPECT_EQ(ledger.at("triples").size(), 5u);
    std::size_t rechecked = 0;
    for (const auto& t : ledger.at("triples"))
        for (const auto& w : t.at("witness_recheck")) {
            EXPECT_TRUE(w.at("ok").get<bool>());
            rechecked += w.at("method") == "gdelta_witness";
        }
    EXPECT_GT(rechecked, 0u);
    for (const auto& e : fs::directory_iterator(dir_ / "g"))
        EXPECT_EQ(run("validate " + quote(e.path())).code, 0) << e.path();
}

TEST_F(Cli, GenericScheduleFileAndResume) {
    ASSERT_EQ(run("generic --steps 4 --schedule " + sample("triples.json") + " --out " + quote(dir_ / "a")).code, 0);
    ASSERT_EQ(run("generic --steps 2 --schedule " + sample("triples.json") + " --out " + quote(dir_ / "b")).code, 0);
    const auto r = run("generic --steps 4 --resume " + quote(dir_ / "b" / "checkpoint_002.json") + " --out " +
                       quote(dir_ / "b"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(dir_ / "a" / "checkpoint_004.json"), slurp(dir_ / "b" / "checkpoint_004.json"));
    EXPECT_EQ(slurp(dir_ / "a" / "ledger.json"), slurp(dir_ / "b" / "ledger.json"));
}

TEST_F(Cli, GenericRejectsFinitelySummedScheme) {
    EXPECT_EQ(run("generic --scheme Z^2 --steps 1 --out " + quote(dir_ / "g")).code, 2);
}

TEST_F(Cli, GenericValidateCatchesTamperedBlock) {
    ASSERT_EQ(run("generic --steps 3 --out " + quote(dir_ / "g")).code, 0);
    json j = load(dir_ / "g" / "checkpoint_003.json");
    auto& table = j.at("levels").back().at("table");
    ASSERT_FALSE(table.empty());
    table.back()[1] = "100";
    save(dir_ / "bad.json", j);
    EXPECT_EQ(run("validate " + quote(dir_ / "bad.json")).code, 1);
}

TEST_F(Cli, ShkarinAmalgamatesSamples) {
    const auto r = run("shkarin --amalgamate " + sample("amalgam_a.json") + " " + sample("amalgam_b.json") +
                       " --out " + quote(dir_ / "sh"));
    ASSERT_EQ(r.code, 0) << r.output;
    const json a = load(dir_ / "sh" / "amalgam.json");
    EXPECT_EQ(a.at("kind"), "amalgam");
    for (const auto& [k, v] : a.at("certificate").at("checks").items())
        EXPECT_TRUE(v.get<bool>()) << k;
    const json g3 = a.at("g3");
    long size = 1;
    for (long f : g3.at("factors").get<std::vector<long>>())
        size *= f;
    EXPECT_EQ(size, 8);
    EXPECT_EQ(run("validate " + quote(dir_ / "sh" / "amalgam.json")).code, 0);
}

TEST_F(Cli, ShkarinRejectsMismatchedSources) {
    json b = load(fs::path(INVNORM_SAMPLES_DIR) / "amalgam_b.json");
    b.at("g0").at("norm")[1][1] = "2";
    b.at("g").at("norm")[1][1] = "2";
    save(dir_ / "b.json", b);
    EXPECT_NE(run("shkarin --amalgamate " + sample("amalgam_a.json") + " " + quote(dir_ / "b.json")).code, 0);
}

TEST_F(Cli, FarElementIsReverified) {
    const auto r = run("far --scheme Z --set '{0,1,-1}' --radius 5 --out " + quote(dir_ / "f"));
    ASSERT_EQ(r.code, 0) << r.output;
    const json j = load(dir_ / "f" / "far.json");
    const GroupScheme s = GroupScheme::parse("Z");
    const GroupElement g = parse_element(s, j.at("element").get<std::string>());
    const SymSet a = SymSet::closure_of(s, {parse_element(s, "1")});
    DistOptions opt;
    opt.use_certificates = false;
    EXPECT_TRUE(oriented_dist_bounded(s, g, a, 5, opt).exceeds());
    EXPECT_EQ(j.at("bfs_check").at("exceeds"), true);
    EXPECT_EQ(run("validate " + quote(dir_ / "f" / "far.json")).code, 0);
}

TEST_F(Cli, FarRejectsBoundedScheme) {
    EXPECT_EQ(run("far --scheme 'sum Z/2' --set '{0}' --radius 2").code, 2);
}

TEST_F(Cli, DistEmitsReplayablePath) {
    const auto r = run("dist --scheme Z --set '{0,1,-1}' --g 7 --radius 10 --out " + quote(dir_ / "d"));
    ASSERT_EQ(r.code, 0) << r.output;
    const json j = load(dir_ / "d" / "dist.json");
    EXPECT_EQ(j.at("result").at("dist"), 6);
    EXPECT_EQ(j.at("result").at("path").size(), 6u);
    EXPECT_EQ(run("validate " + quote(dir_ / "d" / "dist.json")).code, 0);
}

TEST_F(Cli, KatetovRealizesSample) {
    const auto r = run("katetov --norm " + sample("katetov_norm.json") + " --f " + sample("katetov_f.json") +
                       " --out " + quote(dir_ / "k"));
    ASSERT_EQ(r.code, 0) << r.output;
    const json j = load(dir_ / "k" / "katetov.json");
    const PartialNorm out = norm_from_json(j.at("norm"));
    EXPECT_FALSE(validate_partial_norm(out));
    EXPECT_EQ(run("validate " + quote(dir_ / "k" / "katetov.json")).code, 0);
}

TEST_F(Cli, KatetovRejectsNearElement) {
    const auto r = run("katetov --norm " + sample("katetov_norm.json") + " --f " + sample("katetov_f.json") +
                       " --g 3");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("FAIL dist"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrors) {
    EXPECT_NE(run("").code, 0);
    EXPECT_NE(run("build-urysohn --steps 3").code, 0);
    EXPECT_EQ(run("validate " + quote(dir_ / "missing.json")).code, 2);
}
