#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hats/alignment.hpp"
#include "hats/env.hpp"

namespace hats {

/// Detail slots of a step that an instruction may leave out.
enum class Slot : std::uint8_t { Target, Text, Direction };

/// One instruction step: what to do, with a per-slot "omitted" mask.
struct StepDescriptor {
    ActionKind kind = ActionKind::Tap;
    bool has_target = false;
    std::string target_label;
    /// Used to name the element only when its label is empty.
    std::string target_id;
    ElementRole target_role = ElementRole::Button;
    /// Position among visible elements with the same label and role.
    std::size_t ordinal = 0;
    /// Rendered as "the 2nd ..." when the label alone is not unique.
    bool show_ordinal = false;
    std::optional<std::string> text;
    std::optional<Direction> direction;

    bool target_omitted = false;
    bool text_omitted = false;
    bool direction_omitted = false;

    bool has_slot(Slot slot) const;
    bool omitted(Slot slot) const;
    void set_omitted(Slot slot, bool value);

    friend bool operator==(const StepDescriptor&, const StepDescriptor&) = default;
};

struct Instruction {
    std::string text;
    std::vector<StepDescriptor> structured_steps;
    std::uint32_t revision = 0;
    std::string provenance;
    std::string app;
    /// Length of the reference the instruction was written for.
    std::size_t reference_length = 0;

    std::size_t omitted_slots() const;
};

struct RefineResult {
    Instruction instruction;
    /// Nothing was left to repair; the loop may continue but cannot improve.
    bool exhausted = false;
};

/// The instruction lifecycle: select, synthesize, execute, refine.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual std::string name() const = 0;
    virtual ReferenceSequence select_subsequence(const Path& path, const EnvironmentGraph& env) = 0;
    virtual Instruction synthesize_instruction(const ReferenceSequence& a_seq, const EnvironmentGraph& env) = 0;
    virtual ExecutionSequence execute_instruction(const Instruction& inst, const StateId& start,
                                                  const EnvironmentGraph& env) = 0;
    virtual RefineResult refine_instruction(const Instruction& inst, const ReferenceSequence& a_seq,
                                            const ExecutionSequence& b_seq, const EnvironmentGraph& env) = 0;
};

struct ScriptedOracleConfig {
    /// Detail slots dropped at synthesis (clamped to the slots available).
    std::uint32_t omission_count = 0;
    std::uint32_t repair_per_round = 1;
    std::uint64_t seed = 42;
    /// Per-intent overrides of omission_count, keyed by intent id.
    std::map<std::string, std::uint32_t> intent_omissions;

    void validate() const;
    std::uint32_t omissions_for(const std::optional<std::string>& intent) const;
};

/// Deterministic oracle backed by the environment's intent annotations.
///
/// Misalignment is modelled as omitted detail slots; replay skips any step
/// it cannot resolve and refinement restores omitted slots, unmatched
/// reference steps first.
class ScriptedOracle final : public Oracle {
public:
    explicit ScriptedOracle(ScriptedOracleConfig config = {});

    std::string name() const override { return "scripted"; }
    const ScriptedOracleConfig& config() const { return config_; }

    ReferenceSequence select_subsequence(const Path& path, const EnvironmentGraph& env) override;
    Instruction synthesize_instruction(const ReferenceSequence& a_seq, const EnvironmentGraph& env) override;
    ExecutionSequence execute_instruction(const Instruction& inst, const StateId& start,
                                          const EnvironmentGraph& env) override;
    RefineResult refine_instruction(const Instruction& inst, const ReferenceSequence& a_seq,
                                    const ExecutionSequence& b_seq, const EnvironmentGraph& env) override;

private:
    ScriptedOracleConfig config_;
};

/// Longest contiguous slice of `path` that is a prefix of some intent
/// (earliest start wins ties); the whole path when no intent overlaps.
/// Throws ContractViolation on an empty path.
ReferenceSequence select_intent_slice(const Path& path, const EnvironmentGraph& env);

/// Slice [first, first + count) of `path` as a reference sequence.
ReferenceSequence slice_reference(const Path& path, std::size_t first, std::size_t count);

/// "In {app}: clause; clause; ...". Omitted slots use generic phrases.
std::string render_instruction(const std::string& app, const std::vector<StepDescriptor>& steps);

/// Inverse of render_instruction: recovers app and structured steps.
/// Throws hats::Error on text that was not produced by the renderer.
Instruction parse_instruction(const std::string& text);

} // namespace hats
