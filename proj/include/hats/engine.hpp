#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hats/alignment.hpp"
#include "hats/env.hpp"
#include "hats/oracle.hpp"
#include "hats/rng.hpp"
#include "hats/sample.hpp"
#include "hats/tree.hpp"

namespace hats {

struct IterationOutcome {
    std::size_t iteration_index = 0;
    bool aligned = false;
    double recall = 0.0;
    double hardness = 0.0;
    std::uint32_t refine_rounds_used = 0;
    std::optional<VerifiedSample> sample;
    /// Full path length after rollout.
    std::size_t path_length = 0;
    /// Edges credited by backpropagation (selection + expansion).
    std::size_t tree_path_length = 0;
    /// Recall of every replay, first to last.
    std::vector<double> recall_by_round;
    /// Set when a stage failed; the iteration then has no sample and no credit.
    std::optional<std::string> error;
    bool oracle_error = false;
};

struct RunReport {
    std::string run_id;
    std::string mode;  // "hats" or "baseline"
    std::string environment_id;
    HardnessConfig config;
    std::vector<IterationOutcome> outcomes;
    std::size_t emitted_count = 0;
    std::size_t errored_count = 0;
    double wall_clock_seconds = 0.0;
};

/// Mean of the final-round recall over non-errored outcomes.
double mean_outcome_recall(const RunReport& report);

nlohmann::ordered_json config_to_json(const HardnessConfig& cfg);
HardnessConfig config_from_json(const nlohmann::json& j);
/// `include_timing` false drops wall-clock fields (for comparisons).
nlohmann::ordered_json report_to_json(const RunReport& report, bool include_timing = true);

/// Extends `path` by uniform random valid actions until it has t_max steps
/// or no action is available. Does not touch any tree.
Path rollout(const EnvironmentGraph& env, Path path, std::size_t t_max, Rng& rng);

struct RefineOutcome {
    Instruction instruction;
    ExecutionSequence execution;
    double recall = 0.0;
    bool aligned = false;
    std::uint32_t rounds = 0;
    std::vector<double> recall_by_round;
};

/// Replay, score, and refine until recall >= r_min with a complete replay,
/// or until f_max refinements have been spent. The refined instruction is
/// always replayed, so a run can execute up to f_max + 1 times.
RefineOutcome refine_loop(const ReferenceSequence& a_seq, Instruction inst, Oracle& oracle,
                          const EnvironmentGraph& env, const HardnessConfig& cfg);

/// Identifies a run in sample ids and reports.
struct RunContext {
    std::string run_id = "run0";
};

/// One search iteration: select, expand, roll out, synthesize and refine,
/// score, emit, backpropagate. Throws on any stage failure, in which case
/// no edge statistics were changed.
IterationOutcome run_iteration(ActionTree& tree, const EnvironmentGraph& env, Oracle& oracle,
                               const HardnessConfig& cfg, Rng& rng, std::size_t iteration_index,
                               const RunContext& ctx);

/// Builds the sample record for an aligned execution.
VerifiedSample make_sample(const EnvironmentGraph& env, const ReferenceSequence& a_seq, const Instruction& inst,
                           const ExecutionSequence& b_seq, double recall, double hardness, std::size_t iteration_index,
                           const RunContext& ctx);

/// cfg.iterations iterations on one tree, streaming samples to `sink`.
/// `tree` may be supplied to inspect it afterwards.
RunReport synthesize_corpus(const EnvironmentGraph& env, Oracle& oracle, const HardnessConfig& cfg, SampleSink& sink,
                            const RunContext& ctx = {}, ActionTree* tree = nullptr);

/// Thrown when the sink fails mid-run; carries what was done so far.
class SinkFailure : public Error {
public:
    SinkFailure(const std::string& message, RunReport partial);
    const RunReport& partial() const { return partial_; }

private:
    RunReport partial_;
};

} // namespace hats
