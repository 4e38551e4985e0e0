#include "hats/corpus.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "hats/errors.hpp"
#include "hats/json_io.hpp"

namespace hats {

using nlohmann::json;
using nlohmann::ordered_json;

void JsonlSink::write(const VerifiedSample& sample)
{
    const std::string line = sample_to_json(sample).dump() + "\n";
    std::lock_guard lock(mutex_);
    out_ << line;
    out_.flush();
    if (!out_) {
        throw CorpusError(CorpusErrorKind::Io, sample.sample_id,
                          "write failed after " + std::to_string(lines_) + " lines");
    }
    ++lines_;
}

std::size_t JsonlSink::lines_written() const
{
    std::lock_guard lock(mutex_);
    return lines_;
}

ordered_json sample_to_json(const VerifiedSample& s)
{
    ordered_json j;
    j["sample_id"] = s.sample_id;
    j["instruction"] = s.instruction_text;
    j["revision"] = s.revision;
    j["start"] = s.start_state;
    ordered_json steps = ordered_json::array();
    for (const auto& step : s.execution_steps) {
        steps.push_back(step_to_json(step));
    }
    j["steps"] = std::move(steps);
    j["recall"] = s.recall;
    j["hardness"] = s.hardness;
    j["ambiguity"] = s.ambiguity_tags.names();
    j["category"] = s.category_tag;
    j["environment"] = s.environment_id;
    j["seed"] = s.seed;
    return j;
}

VerifiedSample sample_from_json(const json& j)
{
    static const std::vector<std::string> kKeys = {"sample_id", "instruction", "revision", "start",
                                                    "steps",     "recall",      "hardness", "ambiguity",
                                                    "category",  "environment", "seed"};
    if (!j.is_object()) {
        throw Error("record is not an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
            throw Error("unknown field '" + key + "'");
        }
    }
    VerifiedSample s;
    try {
        s.sample_id = j.at("sample_id").get<std::string>();
        s.instruction_text = j.at("instruction").get<std::string>();
        s.revision = j.at("revision").get<std::uint32_t>();
        s.start_state = j.at("start").get<std::string>();
        for (const auto& step : j.at("steps")) {
            s.execution_steps.push_back(step_from_json(step));
        }
        s.recall = j.at("recall").get<double>();
        s.hardness = j.at("hardness").get<double>();
        for (const auto& name : j.at("ambiguity").get<std::vector<std::string>>()) {
            auto tag = parse_ambiguity_tag(name);
            if (!tag) {
                throw Error("unknown ambiguity tag '" + name + "'");
            }
            s.ambiguity_tags.insert(*tag);
        }
        s.category_tag = j.at("category").get<std::string>();
        s.environment_id = j.at("environment").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(e.what());
    }
    if (s.execution_steps.empty()) {
        throw Error("sample has no execution steps");
    }
    return s;
}

std::size_t write_samples(const std::vector<VerifiedSample>& samples, std::ostream& out)
{
    std::size_t written = 0;
    for (const auto& s : samples) {
        out << sample_to_json(s).dump() << '\n';
        if (!out) {
            throw CorpusError(CorpusErrorKind::Io, s.sample_id,
                              "write failed after " + std::to_string(written) + " lines");
        }
        ++written;
    }
    out.flush();
    return written;
}

std::vector<VerifiedSample> read_samples(std::istream& in, const HardnessConfig& cfg)
{
    std::vector<VerifiedSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        VerifiedSample s;
        try {
            s = sample_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw CorpusError(CorpusErrorKind::Parse, std::to_string(line_no),
                              "line " + std::to_string(line_no) + ": " + e.what());
        }
        const double expected = hardness(s.recall, cfg);
        if (std::abs(expected - s.hardness) > 1e-9 * std::max(1.0, std::abs(expected))) {
            throw CorpusError(CorpusErrorKind::Integrity, s.sample_id,
                              fmt::format("sample '{}': stored hardness {} does not match recall {} (expected {})",
                                          s.sample_id, s.hardness, s.recall, expected));
        }
        out.push_back(std::move(s));
    }
    return out;
}

CorpusStats compute_stats(const std::vector<VerifiedSample>& samples)
{
    if (samples.empty()) {
        throw UndefinedMetricError("statistics are undefined for an empty corpus");
    }
    CorpusStats st;
    st.sample_count = samples.size();
    std::map<std::string, std::size_t> categories;
    std::map<AmbiguityTag, std::size_t> tags;
    for (const auto& s : samples) {
        for (const auto& step : s.execution_steps) {
            ++st.action_kind_histogram[to_string(step.action.kind)];
        }
        ++categories[s.category_tag];
        for (auto tag : kAllAmbiguityTags) {
            if (s.ambiguity_tags.contains(tag)) {
                ++tags[tag];
            }
        }
        st.mean_recall += s.recall;
        st.mean_hardness += s.hardness;
    }
    const auto n = static_cast<double>(samples.size());
    for (const auto& [category, count] : categories) {
        st.category_histogram[category] = static_cast<double>(count) / n;
    }
    for (auto tag : kAllAmbiguityTags) {
        st.ambiguity_ratios[to_string(tag)] = static_cast<double>(tags[tag]) / n;
    }
    st.mean_recall /= n;
    st.mean_hardness /= n;
    return st;
}

void write_stats_csv(const CorpusStats& st, std::ostream& out)
{
    out << "dimension,key,value\n";
    out << fmt::format("summary,sample_count,{}\n", st.sample_count);
    out << fmt::format("summary,mean_recall,{}\n", st.mean_recall);
    out << fmt::format("summary,mean_hardness,{}\n", st.mean_hardness);
    for (const auto& [k, v] : st.action_kind_histogram) {
        out << fmt::format("action_kind,{},{}\n", k, v);
    }
    for (const auto& [k, v] : st.category_histogram) {
        out << fmt::format("category,{},{}\n", k, v);
    }
    for (const auto& [k, v] : st.ambiguity_ratios) {
        out << fmt::format("ambiguity,{},{}\n", k, v);
    }
}

void write_stats_table(const CorpusStats& st, std::ostream& out)
{
    out << fmt::format("{:<24} {:>10}\n", "samples", st.sample_count);
    out << fmt::format("{:<24} {:>10.4f}\n", "mean recall", st.mean_recall);
    out << fmt::format("{:<24} {:>10.4f}\n", "mean hardness", st.mean_hardness);
    out << "\naction kinds\n";
    for (const auto& [k, v] : st.action_kind_histogram) {
        out << fmt::format("  {:<22} {:>10}\n", k, v);
    }
    out << "\ncategories\n";
    for (const auto& [k, v] : st.category_histogram) {
        out << fmt::format("  {:<22} {:>9.1f}%\n", k, 100.0 * v);
    }
    out << "\nambiguity ratios\n";
    for (const auto& [k, v] : st.ambiguity_ratios) {
        out << fmt::format("  {:<22} {:>9.1f}%\n", k, 100.0 * v);
    }
}

namespace {

ComparisonRow make_row(std::string dimension, std::string key, double a, double b)
{
    ComparisonRow row{std::move(dimension), std::move(key), a, b, a - b};
    if (a == 0.0 || b == 0.0) {
        row.zero_flag = true;
    } else {
        row.ratio = a / b;
        row.log_ratio = std::log(row.ratio);
    }
    return row;
}

template <typename Map>
void compare_maps(std::vector<ComparisonRow>& rows, const char* dimension, const Map& a, const Map& b)
{
    std::map<std::string, std::pair<double, double>> merged;
    for (const auto& [k, v] : a) {
        merged[k].first = static_cast<double>(v);
    }
    for (const auto& [k, v] : b) {
        merged[k].second = static_cast<double>(v);
    }
    for (const auto& [k, v] : merged) {
        rows.push_back(make_row(dimension, k, v.first, v.second));
    }
}

} // namespace

std::vector<ComparisonRow> compare_corpora(const CorpusStats& a, const CorpusStats& b)
{
    std::vector<ComparisonRow> rows;
    rows.push_back(make_row("summary", "sample_count", static_cast<double>(a.sample_count),
                            static_cast<double>(b.sample_count)));
    rows.push_back(make_row("summary", "mean_recall", a.mean_recall, b.mean_recall));
    rows.push_back(make_row("summary", "mean_hardness", a.mean_hardness, b.mean_hardness));
    compare_maps(rows, "ambiguity", a.ambiguity_ratios, b.ambiguity_ratios);
    compare_maps(rows, "category", a.category_histogram, b.category_histogram);
    compare_maps(rows, "action_kind", a.action_kind_histogram, b.action_kind_histogram);
    return rows;
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out)
{
    out << "dimension,key,a,b,delta,ratio,log_ratio,zero_flag\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{}\n", r.dimension, r.key, r.a, r.b, r.delta, r.ratio, r.log_ratio,
                           r.zero_flag ? 1 : 0);
    }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out)
{
    out << "epsilon,alpha,r_alignment,hardness\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{}\n", r.epsilon, r.alpha, r.r_alignment, r.hardness);
    }
}

ReferenceSequence sample_reference(const EnvironmentGraph& env, const VerifiedSample& sample)
{
    ReferenceSequence a;
    a.start_state = sample.start_state;
    StateId current = env.state(sample.start_state).id;
    for (std::size_t i = 0; i < sample.execution_steps.size(); ++i) {
        const Step& stored = sample.execution_steps[i];
        const Transition* t = nullptr;
        try {
            t = &resolve_transition(env, current, stored.action, a.steps);
        } catch (const Error& e) {
            throw AuditError(i, e.what());
        }
        if (t->to != stored.state) {
            throw AuditError(i, "step " + std::to_string(i) + " leads to '" + t->to + "', not the stored '" +
                                    stored.state + "'");
        }
        a.steps.push_back(Step{stored.action, t->to, t->id});
        current = t->to;
    }
    return a;
}

ReplayResult replay_sample(const EnvironmentGraph& env, Oracle& oracle, const VerifiedSample& sample)
{
    const ReferenceSequence a = sample_reference(env, sample);
    Instruction inst = parse_instruction(sample.instruction_text);
    inst.revision = sample.revision;
    ReplayResult r;
    r.execution = oracle.execute_instruction(inst, sample.start_state, env);
    r.alignment = recall(env, a, r.execution);
    return r;
}

RunReport random_baseline(const EnvironmentGraph& env, Oracle& oracle, const HardnessConfig& cfg, SampleSink& sink,
                          const RunContext& ctx)
{
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    RunReport report;
    report.run_id = ctx.run_id;
    report.mode = "baseline";
    report.environment_id = env.id();
    report.config = cfg;

    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        IterationOutcome o;
        o.iteration_index = i;
        try {
            const Path walk = rollout(env, Path{env.root_state(), {}}, cfg.t_max, rng);
            o.path_length = walk.size();
            if (walk.empty()) {
                throw ContractViolation("no valid action from the root state '" + env.root_state() + "'");
            }
            const ReferenceSequence a_seq = oracle.select_subsequence(walk, env);
            const Instruction inst = oracle.synthesize_instruction(a_seq, env);
            const ExecutionSequence b_seq = oracle.execute_instruction(inst, a_seq.start_state, env);
            o.recall = recall(env, a_seq, b_seq).recall;
            o.recall_by_round = {o.recall};
            o.hardness = hardness(o.recall, cfg);
            o.aligned = b_seq.completed;
            if (o.aligned) {
                VerifiedSample s = make_sample(env, a_seq, inst, b_seq, o.recall, o.hardness, i, ctx);
                s.seed = cfg.seed;
                o.sample = std::move(s);
            }
        } catch (const std::exception& e) {
            o = IterationOutcome{};
            o.iteration_index = i;
            o.error = "iteration " + std::to_string(i) + ": " + e.what();
            o.oracle_error = dynamic_cast<const OracleError*>(&e) != nullptr;
            ++report.errored_count;
        }
        if (o.sample) {
            try {
                sink.write(*o.sample);
            } catch (const std::exception& e) {
                report.outcomes.push_back(std::move(o));
                throw SinkFailure("sample sink failed at iteration " + std::to_string(i) + ": " + e.what(),
                                  std::move(report));
            }
            ++report.emitted_count;
        }
        report.outcomes.push_back(std::move(o));
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace hats
