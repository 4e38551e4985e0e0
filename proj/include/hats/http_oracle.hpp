#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hats/oracle.hpp"

namespace hats {

struct HttpOracleConfig {
    /// Base URL, e.g. "http://127.0.0.1:8080" or "http://host/prefix".
    std::string endpoint;
    /// Sent as "Authorization: Bearer <token>" when set.
    std::optional<std::string> bearer_token;
    /// Directory holding <template id>.txt prompt files; empty sends no prompt text.
    std::string prompt_dir;
    std::chrono::seconds timeout{60};
};

/// Oracle backed by a remote service speaking a small JSON protocol:
/// POST {prefix}/synthesize, /execute (called once per action) and /refine.
///
/// select_subsequence already calls /synthesize on the whole path and keeps
/// the returned instruction; synthesize_instruction reuses it when asked
/// about the same slice. Any transport or protocol problem is an OracleError.
class HttpOracle final : public Oracle {
public:
    explicit HttpOracle(HttpOracleConfig config);
    ~HttpOracle() override;

    std::string name() const override { return "http"; }

    ReferenceSequence select_subsequence(const Path& path, const EnvironmentGraph& env) override;
    Instruction synthesize_instruction(const ReferenceSequence& a_seq, const EnvironmentGraph& env) override;
    ExecutionSequence execute_instruction(const Instruction& inst, const StateId& start,
                                          const EnvironmentGraph& env) override;
    RefineResult refine_instruction(const Instruction& inst, const ReferenceSequence& a_seq,
                                    const ExecutionSequence& b_seq, const EnvironmentGraph& env) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Longest run of consecutive values among the sorted, deduplicated `ids`
/// (ties: earliest). Returns (first, count); count is 0 for no ids.
std::pair<std::size_t, std::size_t> longest_consecutive_run(const std::vector<std::size_t>& ids);

} // namespace hats
