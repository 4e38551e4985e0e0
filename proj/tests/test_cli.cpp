#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hats/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using hats_test::data_path;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "hats");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = hats::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

/// Fresh scratch directory per test case.
fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("hats_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const fs::path& p)
{
    const std::string text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const std::string kClock = data_path("environments/clock_app.json");

Result synth(const fs::path& dir, std::vector<std::string> extra = {})
{
    std::vector<std::string> args{"synthesize", "--env", kClock, "--out", dir.string()};
    if (std::find(extra.begin(), extra.end(), "--iterations") == extra.end()) {
        args.insert(args.end(), {"--iterations", "30"});
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("synthesize writes a corpus and a report")
    {
        const auto dir = scratch("synth");
        const auto r = synth(dir, {"--omissions", "1", "--dump-tree", (dir / "tree.json").string()});
        REQUIRE(r.code == hats::kExitOk);
        CHECK(r.out.find("synthesize: ") == 0);
        const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report["command"] == "synthesize");
        CHECK(report["environment"] == "clock_app");
        CHECK(report["config"]["iterations"] == 30);
        CHECK(report["scripted_oracle"]["omission_count"] == 1);
        CHECK(report["runs"].size() == 1);
        CHECK(report["runs"][0]["iterations"].size() == 30);
        CHECK(line_count(dir / "corpus.jsonl") == report["emitted_count"].get<std::size_t>());
        CHECK(nlohmann::json::parse(slurp(dir / "tree.json")).contains("nodes"));
    }

    TEST_CASE("identical runs write identical corpora")
    {
        const auto a = scratch("det_a");
        const auto b = scratch("det_b");
        REQUIRE(synth(a, {"--omissions", "2", "--seed", "9"}).code == 0);
        REQUIRE(synth(b, {"--omissions", "2", "--seed", "9"}).code == 0);
        CHECK(slurp(a / "corpus.jsonl") == slurp(b / "corpus.jsonl"));
        auto ra = nlohmann::json::parse(slurp(a / "report.json"));
        auto rb = nlohmann::json::parse(slurp(b / "report.json"));
        for (auto* j : {&ra, &rb}) {
            j->erase("wall_clock_seconds");
            for (auto& run : (*j)["runs"]) {
                run.erase("wall_clock_seconds");
            }
        }
        CHECK(ra == rb);
    }

    TEST_CASE("parallel runs share one corpus")
    {
        const auto dir = scratch("jobs");
        const auto r = synth(dir, {"--jobs", "3"});
        REQUIRE(r.code == 0);
        const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report["runs"].size() == 3);
        CHECK(report["runs"][2]["config"]["seed"] == 44);
        CHECK(line_count(dir / "corpus.jsonl") == report["emitted_count"].get<std::size_t>());
        CHECK(report["emitted_count"] == 90);
    }

    TEST_CASE("baseline command")
    {
        const auto dir = scratch("baseline");
        const auto r = run({"baseline", "--env", kClock, "--iterations", "20", "--out", dir.string()});
        REQUIRE(r.code == 0);
        const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report["command"] == "baseline");
        CHECK(report["runs"][0]["mode"] == "baseline");
        CHECK(run({"baseline", "--env", kClock, "--dump-tree", "x.json", "--out", dir.string()}).code ==
              hats::kExitConfig);
    }

    TEST_CASE("configuration errors exit with 1")
    {
        const auto dir = scratch("cfg");
        CHECK(run({}).code == hats::kExitConfig);
        CHECK(run({"synthesize"}).code == hats::kExitConfig);
        const auto bad = synth(dir, {"--iterations", "0"});
        CHECK(bad.code == hats::kExitConfig);
        CHECK(bad.err.find("configuration error") != std::string::npos);
        CHECK(synth(dir, {"--r-min", "2"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--intent-omission", "nope=1"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--intent-omission", "i0"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--oracle", "http"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--endpoint", "http://x"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--oracle", "http", "--endpoint", "https://x"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--jobs", "0"}).code == hats::kExitConfig);
        CHECK(synth(dir, {"--bogus"}).code == hats::kExitConfig);
        CHECK(run({"--help"}).code == 0);
    }

    TEST_CASE("config file values apply and flags override them")
    {
        const auto dir = scratch("config");
        std::ofstream(dir / "run.ini") << "[synthesize]\niterations=7\nseed=3\n";
        REQUIRE(run({"synthesize", "--config", (dir / "run.ini").string(), "--env", kClock, "--out",
                     (dir / "a").string()})
                    .code == 0);
        auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
        CHECK(report["config"]["iterations"] == 7);
        CHECK(report["config"]["seed"] == 3);
        REQUIRE(run({"synthesize", "--config", (dir / "run.ini").string(), "--iterations", "9", "--env", kClock,
                     "--out", (dir / "b").string()})
                    .code == 0);
        report = nlohmann::json::parse(slurp(dir / "b" / "report.json"));
        CHECK(report["config"]["iterations"] == 9);
        CHECK(run({"synthesize", "--config", (dir / "missing.ini").string(), "--env", kClock}).code ==
              hats::kExitConfig);
    }

    TEST_CASE("environment errors exit with 2")
    {
        const auto dir = scratch("envfail");
        CHECK(run({"synthesize", "--env", "/nonexistent.json", "--out", dir.string()}).code ==
              hats::kExitEnvironment);
        const auto r = run({"synthesize", "--env", hats_test::test_data_path("malformed/prerequisite_cycle.json"),
                            "--out", dir.string()});
        CHECK(r.code == hats::kExitEnvironment);
        CHECK(r.err.find("prerequisite-cycle") != std::string::npos);
    }

    TEST_CASE("an unreachable oracle exits with 3")
    {
        const auto dir = scratch("oracle");
        const auto r = synth(dir, {"--iterations", "2", "--oracle", "http", "--endpoint", "http://127.0.0.1:9"});
        CHECK(r.code == hats::kExitOracle);
        const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report["errored_count"] == 2);
    }

    TEST_CASE("validate-env")
    {
        const auto ok = run({"validate-env", kClock});
        CHECK(ok.code == 0);
        CHECK(ok.out.find("ok (12 states") != std::string::npos);
        const auto bad = run({"validate-env", hats_test::test_data_path("malformed/tag_mismatch.json")});
        CHECK(bad.code == hats::kExitEnvironment);
        CHECK(bad.out.find("tag-mismatch") != std::string::npos);
    }

    TEST_CASE("stats, compare, audit, replay on a written corpus")
    {
        const auto a = scratch("read_a");
        const auto b = scratch("read_b");
        REQUIRE(synth(a, {"--omissions", "1"}).code == 0);
        REQUIRE(run({"baseline", "--env", kClock, "--iterations", "30", "--out", b.string()}).code == 0);
        const std::string ca = (a / "corpus.jsonl").string();
        const std::string cb = (b / "corpus.jsonl").string();

        const auto table = run({"stats", ca});
        CHECK(table.code == 0);
        CHECK(table.out.find("context_dependency") != std::string::npos);
        const auto csv = run({"stats", ca, "--csv", "--out", (a / "stats.csv").string()});
        CHECK(csv.out.rfind("dimension,key,value\n", 0) == 0);
        CHECK(slurp(a / "stats.csv") == csv.out);

        const auto cmp = run({"compare", ca, cb, "--csv"});
        CHECK(cmp.code == 0);
        CHECK(cmp.out.rfind("dimension,key,a,b,delta,ratio,log_ratio,zero_flag\n", 0) == 0);
        CHECK(cmp.out.find("summary,sample_count") != std::string::npos);

        const auto audit = run({"audit", ca, "--env", kClock});
        CHECK(audit.code == 0);
        CHECK(audit.out.find(", 0 mismatches") != std::string::npos);

        const auto first = nlohmann::json::parse(slurp(a / "corpus.jsonl").substr(0, slurp(a / "corpus.jsonl").find('\n')));
        const auto replay = run({"replay", ca, first["sample_id"].get<std::string>(), "--env", kClock});
        CHECK(replay.code == 0);
        CHECK(replay.out.find("recall 1.000000") != std::string::npos);
        CHECK(replay.out.find("completed true") != std::string::npos);
        CHECK(run({"replay", ca, "missing", "--env", kClock}).code == hats::kExitCorpus);
    }

    TEST_CASE("tampered corpora")
    {
        const auto dir = scratch("tamper");
        REQUIRE(synth(dir).code == 0);
        const fs::path corpus = dir / "corpus.jsonl";
        std::string text = slurp(corpus);

        // Wrong ambiguity tags: audit mismatch.
        {
            auto j = nlohmann::ordered_json::parse(text.substr(0, text.find('\n')));
            j["ambiguity"] = nlohmann::ordered_json::array();
            j["ambiguity"].push_back("sequential_dependency");
            std::ofstream(dir / "tags.jsonl") << j.dump() << '\n';
            const auto r = run({"audit", (dir / "tags.jsonl").string(), "--env", kClock});
            CHECK(r.code == hats::kExitAuditMismatch);
            CHECK(r.out.find("1 mismatches") != std::string::npos);
        }
        // Wrong hardness: integrity error.
        {
            auto j = nlohmann::ordered_json::parse(text.substr(0, text.find('\n')));
            j["hardness"] = 3.0;
            std::ofstream(corpus) << j.dump() << '\n';
            const auto r = run({"stats", corpus.string()});
            CHECK(r.code == hats::kExitCorpus);
            CHECK(r.err.find(j["sample_id"].get<std::string>()) != std::string::npos);
            // An override that still disagrees is rejected too.
            CHECK(run({"stats", corpus.string(), "--h-max", "3"}).code == hats::kExitCorpus);
        }
        // Garbage line.
        std::ofstream(corpus) << "{\n";
        CHECK(run({"stats", corpus.string()}).code == hats::kExitCorpus);
        CHECK(run({"stats", (dir / "none.jsonl").string()}).code == hats::kExitCorpus);
    }

    TEST_CASE("empty corpus stats are undefined")
    {
        const auto dir = scratch("empty");
        std::ofstream(dir / "corpus.jsonl").close();
        const auto r = run({"stats", (dir / "corpus.jsonl").string()});
        CHECK(r.code != 0);
        CHECK(r.err.find("empty") != std::string::npos);
    }

    TEST_CASE("sweep")
    {
        const auto r = run({"sweep", "--csv"});
        CHECK(r.code == 0);
        std::istringstream lines(r.out);
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            ++n;
        }
        CHECK(n == 19);
        const auto one = run({"sweep", "--csv", "--epsilon-values", "0.01", "--alpha-values", "1", "--r-values", "0"});
        CHECK(one.out.find(",100\n") != std::string::npos);
        CHECK(run({"sweep", "--epsilon-values", "0"}).code == hats::kExitConfig);
    }
}
