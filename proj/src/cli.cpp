#include "hats/cli.hpp"

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "hats/corpus.hpp"
#include "hats/engine.hpp"
#include "hats/env.hpp"
#include "hats/errors.hpp"
#include "hats/http_oracle.hpp"
#include "hats/oracle.hpp"

#ifndef HATS_DATA_DIR
#define HATS_DATA_DIR "data"
#endif

namespace hats {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct RunOptions {
    std::string env_path;
    std::string oracle_kind = "scripted";
    std::string endpoint;
    std::string prompt_dir = HATS_DATA_DIR "/prompts";
    std::string out_dir = "hats_out";
    std::string dump_tree_path;
    std::vector<std::string> intent_omissions;
    unsigned jobs = 1;
    HardnessConfig cfg;
    ScriptedOracleConfig scripted;
};

/// Hardness parameters a corpus reader may override; unset ones come from
/// the report.json next to the corpus, or from the defaults.
struct ReadOptions {
    std::optional<double> epsilon;
    std::optional<double> alpha;
    std::optional<double> h_max;
};

void add_run_options(CLI::App* sub, RunOptions& o)
{
    sub->add_option("--env", o.env_path, "Environment JSON file")->required();
    sub->add_option("--oracle", o.oracle_kind, "Oracle implementation")
        ->check(CLI::IsMember({"scripted", "http"}))
        ->capture_default_str();
    sub->add_option("--endpoint", o.endpoint, "Base URL of the HTTP oracle");
    sub->add_option("--prompt-dir", o.prompt_dir, "Prompt templates sent to the HTTP oracle")->capture_default_str();
    sub->add_option("--iterations", o.cfg.iterations, "Iterations per run")->capture_default_str();
    sub->add_option("--seed", o.cfg.seed, "Run seed (worker i uses seed + i)")->capture_default_str();
    sub->add_option("--t-max", o.cfg.t_max, "Maximum path length")->capture_default_str();
    sub->add_option("--c-ucb", o.cfg.c_ucb, "UCB exploration constant")->capture_default_str();
    sub->add_option("--epsilon", o.cfg.epsilon, "Hardness offset")->capture_default_str();
    sub->add_option("--alpha", o.cfg.alpha, "Hardness exponent")->capture_default_str();
    sub->add_option("--h-max", o.cfg.h_max, "Hardness ceiling")->capture_default_str();
    sub->add_option("--r-min", o.cfg.r_min, "Recall needed to emit a sample")->capture_default_str();
    sub->add_option("--f-max", o.cfg.f_max, "Maximum refinement rounds")->capture_default_str();
    sub->add_option("--omissions", o.scripted.omission_count, "Scripted oracle: slots omitted at synthesis")
        ->capture_default_str();
    sub->add_option("--repairs", o.scripted.repair_per_round, "Scripted oracle: slots restored per refinement")
        ->capture_default_str();
    sub->add_option("--intent-omission", o.intent_omissions, "Scripted oracle: per-intent omissions, ID=N");
    sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--jobs", o.jobs, "Parallel runs sharing one corpus file")->capture_default_str();
}

void add_read_options(CLI::App* sub, ReadOptions& r)
{
    sub->add_option("--epsilon", r.epsilon, "Hardness offset used to verify records");
    sub->add_option("--alpha", r.alpha, "Hardness exponent used to verify records");
    sub->add_option("--h-max", r.h_max, "Hardness ceiling used to verify records");
}

std::map<std::string, std::uint32_t> parse_intent_omissions(const std::vector<std::string>& items)
{
    std::map<std::string, std::uint32_t> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw ConfigError("--intent-omission expects ID=N, got '" + item + "'");
        }
        const std::string count = item.substr(eq + 1);
        if (count.find_first_not_of("0123456789") != std::string::npos || count.size() > 9) {
            throw ConfigError("--intent-omission count must be a non-negative integer, got '" + count + "'");
        }
        out[item.substr(0, eq)] = static_cast<std::uint32_t>(std::stoul(count));
    }
    return out;
}

ordered_json scripted_to_json(const ScriptedOracleConfig& s)
{
    ordered_json j;
    j["omission_count"] = s.omission_count;
    j["repair_per_round"] = s.repair_per_round;
    j["seed"] = s.seed;
    ordered_json per_intent = ordered_json::object();
    for (const auto& [id, n] : s.intent_omissions) {
        per_intent[id] = n;
    }
    j["intent_omissions"] = std::move(per_intent);
    return j;
}

std::unique_ptr<Oracle> make_oracle(const RunOptions& o, std::uint64_t seed)
{
    if (o.oracle_kind == "http") {
        HttpOracleConfig h;
        h.endpoint = o.endpoint;
        h.prompt_dir = o.prompt_dir;
        if (const char* token = std::getenv("HATS_ORACLE_TOKEN"); token != nullptr && *token != '\0') {
            h.bearer_token = token;
        }
        return std::make_unique<HttpOracle>(std::move(h));
    }
    ScriptedOracleConfig s = o.scripted;
    s.seed = seed;
    return std::make_unique<ScriptedOracle>(std::move(s));
}

void write_json_file(const fs::path& path, const ordered_json& j)
{
    std::ofstream f(path);
    f << j.dump(2) << '\n';
    if (!f) {
        throw CorpusError(CorpusErrorKind::Io, path.string(), "cannot write '" + path.string() + "'");
    }
}

int run_generation(RunOptions o, bool hats_mode, std::ostream& out, std::ostream& err)
{
    if (o.oracle_kind == "http" && o.endpoint.empty()) {
        throw ConfigError("--oracle http requires --endpoint");
    }
    if (o.oracle_kind != "http" && !o.endpoint.empty()) {
        throw ConfigError("--endpoint is only meaningful with --oracle http");
    }
    if (o.jobs == 0) {
        throw ConfigError("--jobs must be at least 1");
    }
    if (!hats_mode && !o.dump_tree_path.empty()) {
        throw ConfigError("--dump-tree is only available for synthesize");
    }
    o.scripted.intent_omissions = parse_intent_omissions(o.intent_omissions);
    o.scripted.seed = o.cfg.seed;
    o.cfg.validate();
    o.scripted.validate();

    const EnvironmentGraph env = load_environment_file(o.env_path);
    for (const auto& [id, _] : o.scripted.intent_omissions) {
        if (env.find_intent(id) == nullptr) {
            throw ConfigError("--intent-omission names unknown intent '" + id + "'");
        }
    }

    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw CorpusError(CorpusErrorKind::Io, dir.string(), "cannot create '" + dir.string() + "': " + ec.message());
    }
    std::ofstream corpus_file(dir / "corpus.jsonl", std::ios::trunc);
    if (!corpus_file) {
        throw CorpusError(CorpusErrorKind::Io, (dir / "corpus.jsonl").string(), "cannot open corpus file");
    }
    JsonlSink sink(corpus_file);

    // Oracles are created up front so configuration problems surface before
    // any worker starts.
    std::vector<std::unique_ptr<Oracle>> oracles;
    for (unsigned i = 0; i < o.jobs; ++i) {
        oracles.push_back(make_oracle(o, o.cfg.seed + i));
    }

    const auto started = std::chrono::steady_clock::now();
    std::vector<RunReport> reports(o.jobs);
    std::vector<ActionTree> trees(o.jobs);
    std::vector<std::exception_ptr> failures(o.jobs);
    auto work = [&](unsigned i) {
        HardnessConfig cfg = o.cfg;
        cfg.seed = o.cfg.seed + i;
        const RunContext ctx{"run" + std::to_string(i)};
        try {
            reports[i] = hats_mode ? synthesize_corpus(env, *oracles[i], cfg, sink, ctx, &trees[i])
                                   : random_baseline(env, *oracles[i], cfg, sink, ctx);
        } catch (const SinkFailure& e) {
            reports[i] = e.partial();
            failures[i] = std::current_exception();
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };
    if (o.jobs == 1) {
        work(0);
    } else {
        std::vector<std::jthread> workers;
        for (unsigned i = 0; i < o.jobs; ++i) {
            workers.emplace_back(work, i);
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    ordered_json report;
    report["command"] = hats_mode ? "synthesize" : "baseline";
    report["environment"] = env.id();
    report["oracle"] = o.oracle_kind;
    report["endpoint"] = o.endpoint.empty() ? ordered_json() : ordered_json(o.endpoint);
    report["jobs"] = o.jobs;
    report["config"] = config_to_json(o.cfg);
    report["scripted_oracle"] = o.oracle_kind == "scripted" ? scripted_to_json(o.scripted) : ordered_json();
    std::size_t emitted = 0;
    std::size_t errored = 0;
    bool oracle_failed = false;
    ordered_json runs = ordered_json::array();
    for (const auto& r : reports) {
        emitted += r.emitted_count;
        errored += r.errored_count;
        for (const auto& outcome : r.outcomes) {
            oracle_failed = oracle_failed || outcome.oracle_error;
        }
        runs.push_back(report_to_json(r, true));
    }
    report["emitted_count"] = emitted;
    report["errored_count"] = errored;
    report["runs"] = std::move(runs);
    report["wall_clock_seconds"] = seconds;
    write_json_file(dir / "report.json", report);

    if (!o.dump_tree_path.empty()) {
        ordered_json dumps = ordered_json::array();
        for (const auto& t : trees) {
            dumps.push_back(dump_tree(t));
        }
        write_json_file(o.dump_tree_path, o.jobs == 1 ? dumps[0] : dumps);
    }

    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
    fmt::print(out, "{}: {} samples from {} iterations ({} errored) -> {}\n", hats_mode ? "synthesize" : "baseline",
               emitted, static_cast<std::size_t>(o.cfg.iterations) * o.jobs, errored, (dir / "corpus.jsonl").string());
    if (oracle_failed) {
        fmt::print(err, "error: the oracle failed during the run; see {}\n", (dir / "report.json").string());
        return kExitOracle;
    }
    return kExitOk;
}

HardnessConfig reading_config(const std::string& corpus_path, const ReadOptions& r)
{
    HardnessConfig cfg;
    const fs::path sidecar = fs::path(corpus_path).parent_path() / "report.json";
    if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        try {
            const json j = json::parse(in);
            if (j.contains("config")) {
                cfg = config_from_json(j["config"]);
            }
        } catch (const json::exception& e) {
            throw CorpusError(CorpusErrorKind::Parse, sidecar.string(),
                              "cannot read '" + sidecar.string() + "': " + e.what());
        }
    }
    if (r.epsilon) {
        cfg.epsilon = *r.epsilon;
    }
    if (r.alpha) {
        cfg.alpha = *r.alpha;
    }
    if (r.h_max) {
        cfg.h_max = *r.h_max;
    }
    cfg.validate();
    return cfg;
}

std::vector<VerifiedSample> load_corpus(const std::string& path, const ReadOptions& r)
{
    const HardnessConfig cfg = reading_config(path, r);
    std::ifstream in(path);
    if (!in) {
        throw CorpusError(CorpusErrorKind::Io, path, "cannot open corpus '" + path + "'");
    }
    return read_samples(in, cfg);
}

/// Writes CSV to `csv_path` when given; prints CSV or the table to `out`.
template <typename Csv, typename Table>
void emit(std::ostream& out, const std::string& csv_path, bool csv_to_stdout, Csv csv, Table table)
{
    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        csv(f);
        if (!f) {
            throw CorpusError(CorpusErrorKind::Io, csv_path, "cannot write '" + csv_path + "'");
        }
    }
    if (csv_to_stdout) {
        csv(out);
    } else {
        table(out);
    }
}

void write_comparison_table(const std::vector<ComparisonRow>& rows, std::ostream& out)
{
    fmt::print(out, "{:<12} {:<24} {:>12} {:>12} {:>12} {:>10}\n", "dimension", "key", "a", "b", "delta", "ratio");
    for (const auto& r : rows) {
        const std::string ratio = r.zero_flag ? "n/a" : fmt::format("{:.4f}", r.ratio);
        fmt::print(out, "{:<12} {:<24} {:>12.4f} {:>12.4f} {:>12.4f} {:>10}\n", r.dimension, r.key, r.a, r.b, r.delta,
                   ratio);
    }
}

void write_sweep_table(const std::vector<SweepRow>& rows, std::ostream& out)
{
    fmt::print(out, "{:>8} {:>6} {:>6} {:>14}\n", "epsilon", "alpha", "R", "hardness");
    for (const auto& r : rows) {
        fmt::print(out, "{:>8.2f} {:>6.2f} {:>6.2f} {:>14.6f}\n", r.epsilon, r.alpha, r.r_alignment, r.hardness);
    }
}

int cmd_audit(const std::string& corpus_path, const std::string& env_path, const ReadOptions& r, std::ostream& out)
{
    const EnvironmentGraph env = load_environment_file(env_path);
    const auto samples = load_corpus(corpus_path, r);
    std::size_t mismatches = 0;
    for (const auto& s : samples) {
        if (s.environment_id != env.id()) {
            fmt::print(out, "{}: recorded in environment '{}', auditing against '{}'\n", s.sample_id,
                       s.environment_id, env.id());
        }
        try {
            const AmbiguitySet derived = audit_ambiguity(env, s.start_state, s.execution_steps);
            if (!(derived == s.ambiguity_tags)) {
                ++mismatches;
                fmt::print(out, "{}: stored [{}] derived [{}]\n", s.sample_id,
                           fmt::join(s.ambiguity_tags.names(), ","), fmt::join(derived.names(), ","));
            }
        } catch (const AuditError& e) {
            ++mismatches;
            fmt::print(out, "{}: step {} does not replay: {}\n", s.sample_id, e.step_index(), e.what());
        }
    }
    fmt::print(out, "audited {} samples, {} mismatches\n", samples.size(), mismatches);
    return mismatches == 0 ? kExitOk : kExitAuditMismatch;
}

int cmd_replay(const std::string& corpus_path, const std::string& sample_id, const std::string& env_path,
               const ReadOptions& r, std::ostream& out)
{
    const EnvironmentGraph env = load_environment_file(env_path);
    const auto samples = load_corpus(corpus_path, r);
    auto it = std::find_if(samples.begin(), samples.end(), [&](const auto& s) { return s.sample_id == sample_id; });
    if (it == samples.end()) {
        throw CorpusError(CorpusErrorKind::Integrity, sample_id, "no sample '" + sample_id + "' in " + corpus_path);
    }
    ScriptedOracle oracle;
    const ReplayResult res = replay_sample(env, oracle, *it);
    fmt::print(out, "sample {}\ninstruction: {}\nrecall {:.6f}\nprecision {:.6f}\ncompleted {}\n", it->sample_id,
               it->instruction_text, res.alignment.recall, res.alignment.precision, res.execution.completed);
    return kExitOk;
}

int cmd_validate_env(const std::string& path, std::ostream& out)
{
    const auto findings = check_environment_file(path);
    if (findings.empty()) {
        const EnvironmentGraph env = load_environment_file(path);
        fmt::print(out, "{}: ok ({} states, {} transitions, {} intents)\n", path, env.states().size(),
                   env.transitions().size(), env.intents().size());
        return kExitOk;
    }
    for (const auto& f : findings) {
        fmt::print(out, "{}: {} [{}] {}\n", path, to_string(f.kind), f.subject, f.message);
    }
    return kExitEnvironment;
}

template <typename F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        fmt::print(err, "configuration error: {}\n", e.what());
        return kExitConfig;
    } catch (const EnvironmentError& e) {
        fmt::print(err, "environment error ({}): {}\n", to_string(e.kind()), e.what());
        return kExitEnvironment;
    } catch (const UnknownStateError& e) {
        fmt::print(err, "environment error: {}\n", e.what());
        return kExitEnvironment;
    } catch (const OracleError& e) {
        fmt::print(err, "oracle error: {}\n", e.what());
        return kExitOracle;
    } catch (const SinkFailure& e) {
        fmt::print(err, "corpus error: {}\n", e.what());
        return kExitCorpus;
    } catch (const CorpusError& e) {
        fmt::print(err, "corpus error: {}\n", e.what());
        return kExitCorpus;
    } catch (const AuditError& e) {
        fmt::print(err, "audit error at step {}: {}\n", e.step_index(), e.what());
        return kExitAuditMismatch;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitCorpus;
    }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Hardness-driven GUI trajectory synthesis", "hats"};
    app.require_subcommand(1);
    // Config files are only read by the top-level app; values go in a
    // [synthesize] or [baseline] section. fallthrough lets --config follow
    // the subcommand name.
    app.set_config("--config", "", "TOML/INI file with option values per subcommand section; flags take precedence");
    app.fallthrough();

    RunOptions synth_opts;
    auto* synth = app.add_subcommand("synthesize", "Tree search with replay-refine verification");
    add_run_options(synth, synth_opts);
    synth->add_option("--dump-tree", synth_opts.dump_tree_path, "Write the final search tree as JSON");

    RunOptions base_opts;
    auto* base = app.add_subcommand("baseline", "Random walks with one-shot instructions");
    add_run_options(base, base_opts);

    std::string stats_path;
    std::string stats_out;
    bool stats_csv = false;
    ReadOptions stats_read;
    auto* stats = app.add_subcommand("stats", "Distribution statistics of a corpus");
    stats->add_option("corpus", stats_path, "corpus.jsonl")->required();
    stats->add_option("--out", stats_out, "Also write CSV to this file");
    stats->add_flag("--csv", stats_csv, "Print CSV instead of a table");
    add_read_options(stats, stats_read);

    std::string cmp_a;
    std::string cmp_b;
    std::string cmp_out;
    bool cmp_csv = false;
    ReadOptions cmp_read;
    auto* compare = app.add_subcommand("compare", "Compare the statistics of two corpora (a minus b)");
    compare->add_option("a", cmp_a, "First corpus")->required();
    compare->add_option("b", cmp_b, "Second corpus")->required();
    compare->add_option("--out", cmp_out, "Also write CSV to this file");
    compare->add_flag("--csv", cmp_csv, "Print CSV instead of a table");
    add_read_options(compare, cmp_read);

    std::string audit_path;
    std::string audit_env;
    ReadOptions audit_read;
    auto* audit = app.add_subcommand("audit", "Re-derive ambiguity tags and compare with the stored ones");
    audit->add_option("corpus", audit_path, "corpus.jsonl")->required();
    audit->add_option("--env", audit_env, "Environment JSON file")->required();
    add_read_options(audit, audit_read);

    std::vector<double> sweep_eps{0.01, 0.10};
    std::vector<double> sweep_alpha{0.5, 1.0, 2.0};
    std::vector<double> sweep_r{0.0, 0.5, 1.0};
    double sweep_hmax = 100.0;
    std::string sweep_out;
    bool sweep_csv = false;
    auto* sweep = app.add_subcommand("sweep", "Tabulate the hardness reward over a parameter grid");
    sweep->add_option("--epsilon-values", sweep_eps, "Offsets")->capture_default_str();
    sweep->add_option("--alpha-values", sweep_alpha, "Exponents")->capture_default_str();
    sweep->add_option("--r-values", sweep_r, "Recall values")->capture_default_str();
    sweep->add_option("--h-max", sweep_hmax, "Hardness ceiling")->capture_default_str();
    sweep->add_option("--out", sweep_out, "Also write CSV to this file");
    sweep->add_flag("--csv", sweep_csv, "Print CSV instead of a table");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-env", "Check an environment file and list every finding");
    validate->add_option("env", validate_path, "Environment JSON file")->required();

    std::string replay_path;
    std::string replay_id;
    std::string replay_env;
    ReadOptions replay_read;
    auto* replay = app.add_subcommand("replay", "Replay one sample's instruction with the scripted oracle");
    replay->add_option("corpus", replay_path, "corpus.jsonl")->required();
    replay->add_option("sample_id", replay_id, "Sample to replay")->required();
    replay->add_option("--env", replay_env, "Environment JSON file")->required();
    add_read_options(replay, replay_read);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        const CLI::App* failing = &app;
        for (auto* sub : app.get_subcommands()) {
            failing = sub;
        }
        err << failing->help();
        return kExitConfig;
    }

    return guarded(err, [&]() -> int {
        if (*synth) {
            return run_generation(synth_opts, true, out, err);
        }
        if (*base) {
            return run_generation(base_opts, false, out, err);
        }
        if (*stats) {
            const CorpusStats st = compute_stats(load_corpus(stats_path, stats_read));
            emit(out, stats_out, stats_csv, [&](std::ostream& o) { write_stats_csv(st, o); },
                 [&](std::ostream& o) { write_stats_table(st, o); });
            return kExitOk;
        }
        if (*compare) {
            const auto rows = compare_corpora(compute_stats(load_corpus(cmp_a, cmp_read)),
                                              compute_stats(load_corpus(cmp_b, cmp_read)));
            emit(out, cmp_out, cmp_csv, [&](std::ostream& o) { write_comparison_csv(rows, o); },
                 [&](std::ostream& o) { write_comparison_table(rows, o); });
            return kExitOk;
        }
        if (*audit) {
            return cmd_audit(audit_path, audit_env, audit_read, out);
        }
        if (*sweep) {
            std::vector<std::pair<double, double>> grid;
            for (double e : sweep_eps) {
                for (double a : sweep_alpha) {
                    grid.emplace_back(e, a);
                }
            }
            const auto rows = sweep_hardness(grid, sweep_r, sweep_hmax);
            emit(out, sweep_out, sweep_csv, [&](std::ostream& o) { write_sweep_csv(rows, o); },
                 [&](std::ostream& o) { write_sweep_table(rows, o); });
            return kExitOk;
        }
        if (*validate) {
            return cmd_validate_env(validate_path, out);
        }
        return cmd_replay(replay_path, replay_id, replay_env, replay_read, out);
    });
}

} // namespace hats
