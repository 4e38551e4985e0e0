#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hats/env.hpp"

namespace hats {

/// Behavioral ground truth: the selected slice of an exploration path.
struct ReferenceSequence {
    StateId start_state;
    std::vector<Step> steps;
    std::optional<std::string> source_intent;

    /// State in which step i was originally executed.
    const StateId& pre_state(std::size_t i) const { return i == 0 ? start_state : steps[i - 1].state; }
};

/// Trace produced by replaying an instruction from the reference start.
struct ExecutionSequence {
    StateId start_state;
    std::vector<Step> steps;
    /// Replay reached the end of the instruction with no skipped step and no
    /// rejected action.
    bool completed = false;
    /// Instruction step indices that could not be executed.
    std::vector<std::size_t> gaps;
};

struct AlignmentReport {
    double recall = 0.0;
    double precision = 0.0;
    std::set<std::size_t> matched_reference_indices;
    std::set<std::size_t> matched_execution_indices;
};

/// Tunables of the search and refinement loop.
struct HardnessConfig {
    double epsilon = 0.01;
    double alpha = 1.0;
    double h_max = 100.0;
    double r_min = 0.7;
    std::uint32_t f_max = 3;
    double c_ucb = 1.0;
    std::uint32_t t_max = 8;
    std::uint32_t iterations = 100;
    std::uint64_t seed = 42;

    /// Throws ConfigError naming the first violated bound.
    void validate() const;
};

/// Whether executing `b` is equivalent to `a` in `a`'s original state `s`:
/// same kind, same resolved target (identical id or equal non-empty
/// normalized label among visible elements of s), equal normalized text,
/// equal direction.
bool match_action(const UiAction& a, const UiAction& b, const UiState& s);

/// Reference-side recall with existence semantics, plus the dual precision.
/// Throws UndefinedMetricError when the reference is empty.
AlignmentReport recall(const EnvironmentGraph& env, const ReferenceSequence& a_seq, const ExecutionSequence& b_seq);

/// (R + epsilon)^(-alpha) clipped to [0, h_max].
double hardness(double r_alignment, const HardnessConfig& cfg);

struct SweepRow {
    double epsilon;
    double alpha;
    double r_alignment;
    double hardness;
};

/// Every (epsilon, alpha, R) combination, in grid-major order.
std::vector<SweepRow> sweep_hardness(const std::vector<std::pair<double, double>>& grid,
                                     const std::vector<double>& r_values, double h_max);

/// The six (epsilon, alpha) cells {0.01, 0.10} x {0.5, 1.0, 2.0}.
std::vector<std::pair<double, double>> default_hardness_grid();

} // namespace hats
