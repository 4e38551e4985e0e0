#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hats {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected configuration (bad bounds, missing required values).
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class EnvErrorKind {
    Parse,              // not a JSON document / wrong JSON types
    Schema,             // unknown or missing fields, bad enum values
    DuplicateId,        // state, element, transition or intent id repeated
    DanglingReference,  // id that names nothing
    DuplicateKey,       // two transitions share (from_state, action)
    Unreachable,        // state not reachable from the root
    PrerequisiteCycle,  // requires-graph has a cycle
    TagMismatch,        // sequential_dependency tag vs requires list disagree
    InvalidElement,     // action target missing, or wrong role for the action
    BrokenIntent,       // intent transitions do not chain
};

const char* to_string(EnvErrorKind kind);

/// Failure to load or validate an environment document.
class EnvironmentError : public Error {
public:
    EnvironmentError(EnvErrorKind kind, std::string subject, const std::string& message);

    EnvErrorKind kind() const { return kind_; }
    /// The offending id (state, transition, key, ...), empty for parse errors.
    const std::string& subject() const { return subject_; }

private:
    EnvErrorKind kind_;
    std::string subject_;
};

class UnknownStateError : public Error {
public:
    explicit UnknownStateError(const std::string& state_id);
};

/// No matching transition, or its prerequisites are not on the path.
class InvalidActionError : public Error {
public:
    using Error::Error;
};

class AuditError : public Error {
public:
    AuditError(std::size_t step_index, const std::string& message);
    std::size_t step_index() const { return step_index_; }

private:
    std::size_t step_index_;
};

/// Precondition of a search-tree operation was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// A metric or statistic is undefined for the given input (e.g. empty reference).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Transport or protocol failure talking to an external oracle.
class OracleError : public Error {
public:
    using Error::Error;
};

enum class CorpusErrorKind { Io, Parse, Integrity };

class CorpusError : public Error {
public:
    CorpusError(CorpusErrorKind kind, std::string where, const std::string& message);

    CorpusErrorKind kind() const { return kind_; }
    /// Line number or record id the error refers to.
    const std::string& where() const { return where_; }

private:
    CorpusErrorKind kind_;
    std::string where_;
};

} // namespace hats
