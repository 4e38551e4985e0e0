#include "hats/errors.hpp"

namespace hats {

const char* to_string(EnvErrorKind kind)
{
    switch (kind) {
    case EnvErrorKind::Parse: return "parse";
    case EnvErrorKind::Schema: return "schema";
    case EnvErrorKind::DuplicateId: return "duplicate-id";
    case EnvErrorKind::DanglingReference: return "dangling-reference";
    case EnvErrorKind::DuplicateKey: return "duplicate-key";
    case EnvErrorKind::Unreachable: return "unreachable";
    case EnvErrorKind::PrerequisiteCycle: return "prerequisite-cycle";
    case EnvErrorKind::TagMismatch: return "tag-mismatch";
    case EnvErrorKind::InvalidElement: return "invalid-element";
    case EnvErrorKind::BrokenIntent: return "broken-intent";
    }
    return "unknown";
}

EnvironmentError::EnvironmentError(EnvErrorKind kind, std::string subject, const std::string& message)
    : Error(std::string(to_string(kind)) + ": " + message), kind_(kind), subject_(std::move(subject))
{
}

UnknownStateError::UnknownStateError(const std::string& state_id)
    : Error("unknown state '" + state_id + "'")
{
}

AuditError::AuditError(std::size_t step_index, const std::string& message)
    : Error("step " + std::to_string(step_index) + ": " + message), step_index_(step_index)
{
}

CorpusError::CorpusError(CorpusErrorKind kind, std::string where, const std::string& message)
    : Error(message), kind_(kind), where_(std::move(where))
{
}

} // namespace hats
