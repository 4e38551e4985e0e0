#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hats/alignment.hpp"
#include "hats/engine.hpp"
#include "hats/sample.hpp"

namespace hats {

/// One line of the corpus file, keys in a fixed order.
nlohmann::ordered_json sample_to_json(const VerifiedSample& sample);
VerifiedSample sample_from_json(const nlohmann::json& j);

/// Writes one JSON object per line; returns the number of lines.
/// Throws CorpusError(Io) with the partial count in the message.
std::size_t write_samples(const std::vector<VerifiedSample>& samples, std::ostream& out);

/// Parses every line and re-checks the stored hardness against `cfg`
/// (tolerance 1e-9). Errors name the line number or sample id.
std::vector<VerifiedSample> read_samples(std::istream& in, const HardnessConfig& cfg);

struct CorpusStats {
    std::size_t sample_count = 0;
    std::map<std::string, std::size_t> action_kind_histogram;
    std::map<std::string, double> category_histogram;
    /// Fraction of samples carrying each tag; tags are not exclusive.
    std::map<std::string, double> ambiguity_ratios;
    double mean_recall = 0.0;
    double mean_hardness = 0.0;
};

/// Throws UndefinedMetricError on an empty corpus.
CorpusStats compute_stats(const std::vector<VerifiedSample>& samples);

void write_stats_csv(const CorpusStats& stats, std::ostream& out);
void write_stats_table(const CorpusStats& stats, std::ostream& out);

struct ComparisonRow {
    std::string dimension;  // "ambiguity", "category", "action_kind", "summary"
    std::string key;
    double a = 0.0;
    double b = 0.0;
    double delta = 0.0;  // a - b
    /// a / b; exactly 0 with `zero_flag` when either side is 0.
    double ratio = 0.0;
    double log_ratio = 0.0;
    bool zero_flag = false;
};

std::vector<ComparisonRow> compare_corpora(const CorpusStats& a, const CorpusStats& b);
void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out);

/// epsilon,alpha,r_alignment,hardness
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

/// Stored steps with their transition ids re-derived from the environment.
/// Throws AuditError when a step does not follow from the previous state.
ReferenceSequence sample_reference(const EnvironmentGraph& env, const VerifiedSample& sample);

struct ReplayResult {
    ExecutionSequence execution;
    AlignmentReport alignment;
};

/// Parses the sample's instruction text, replays it with `oracle` from the
/// sample's start state and scores it against the stored steps.
ReplayResult replay_sample(const EnvironmentGraph& env, Oracle& oracle, const VerifiedSample& sample);

/// Uniform random walks with one-shot synthesis: per walk select,
/// synthesize, execute once, emit when the replay completed. No tree, no
/// refinement.
RunReport random_baseline(const EnvironmentGraph& env, Oracle& oracle, const HardnessConfig& cfg, SampleSink& sink,
                          const RunContext& ctx = {});

} // namespace hats
