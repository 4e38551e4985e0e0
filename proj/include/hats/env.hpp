#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hats/errors.hpp"

namespace hats {

using StateId = std::string;

enum class ElementRole { Button, TextField, ListItem, Icon, Toggle, Container };
enum class ActionKind { Tap, Type, Scroll, Back, LongPress, Swipe };
enum class Direction { Up, Down, Left, Right };

const char* to_string(ElementRole role);
const char* to_string(ActionKind kind);
const char* to_string(Direction direction);
std::optional<ElementRole> parse_role(std::string_view text);
std::optional<ActionKind> parse_action_kind(std::string_view text);
std::optional<Direction> parse_direction(std::string_view text);

/// Trim surrounding whitespace and case-fold (ASCII).
std::string normalize_text(std::string_view text);

struct UiElement {
    std::string id;
    ElementRole role = ElementRole::Button;
    std::string label;
    bool visible = true;
    bool clickable = true;
};

struct UiState {
    StateId id;
    std::vector<UiElement> elements;
    std::string app;
    std::string category;
    bool terminal = false;

    const UiElement* find_element(std::string_view element_id) const;
    /// Index of the element in `elements`, or elements.size() if absent.
    std::size_t element_index(std::string_view element_id) const;
};

struct UiAction {
    ActionKind kind = ActionKind::Tap;
    std::optional<std::string> target;
    std::optional<std::string> text;
    std::optional<Direction> direction;

    static UiAction tap(std::string target) { return {ActionKind::Tap, std::move(target), {}, {}}; }
    static UiAction long_press(std::string target) { return {ActionKind::LongPress, std::move(target), {}, {}}; }
    static UiAction type(std::string target, std::string text)
    {
        return {ActionKind::Type, std::move(target), std::move(text), {}};
    }
    static UiAction back() { return {ActionKind::Back, {}, {}, {}}; }
    static UiAction scroll(Direction d, std::optional<std::string> target = {})
    {
        return {ActionKind::Scroll, std::move(target), {}, d};
    }
    static UiAction swipe(Direction d, std::optional<std::string> target = {})
    {
        return {ActionKind::Swipe, std::move(target), {}, d};
    }

    /// Structural equality; typed text compared after normalize_text.
    friend bool operator==(const UiAction& a, const UiAction& b);

    /// Empty when the field presence rules hold, otherwise the violated rule.
    std::string presence_violation() const;
    /// Compact human-readable form, e.g. `type(e3,"alice")`.
    std::string describe() const;
};

/// True for kinds that must name a target element.
bool requires_target(ActionKind kind);
bool requires_direction(ActionKind kind);

enum class AmbiguityTag : std::uint8_t { ContextDependency = 1, SequentialDependency = 2, VisualAmbiguity = 4 };

const char* to_string(AmbiguityTag tag);
std::optional<AmbiguityTag> parse_ambiguity_tag(std::string_view text);
inline constexpr AmbiguityTag kAllAmbiguityTags[] = {
    AmbiguityTag::ContextDependency, AmbiguityTag::SequentialDependency, AmbiguityTag::VisualAmbiguity};

/// Small value-type set of ambiguity tags.
class AmbiguitySet {
public:
    AmbiguitySet() = default;
    AmbiguitySet(std::initializer_list<AmbiguityTag> tags);

    void insert(AmbiguityTag tag) { bits_ |= static_cast<std::uint8_t>(tag); }
    bool contains(AmbiguityTag tag) const { return (bits_ & static_cast<std::uint8_t>(tag)) != 0; }
    bool empty() const { return bits_ == 0; }
    std::size_t size() const;
    AmbiguitySet& operator|=(const AmbiguitySet& other)
    {
        bits_ |= other.bits_;
        return *this;
    }
    /// True when every tag of `other` is also in this set.
    bool includes(const AmbiguitySet& other) const { return (bits_ & other.bits_) == other.bits_; }
    /// Tag names in canonical order.
    std::vector<std::string> names() const;

    friend bool operator==(const AmbiguitySet&, const AmbiguitySet&) = default;

private:
    std::uint8_t bits_ = 0;
};

struct Transition {
    std::string id;
    StateId from;
    UiAction action;
    StateId to;
    AmbiguitySet ambiguity;
    std::vector<std::string> requires_transitions;
};

struct IntentSegment {
    std::string id;
    std::string description;
    std::vector<std::string> transition_ids;
    std::string category;
};

/// One (action, resulting state) pair; `transition` caches the id of the
/// environment transition that produced it.
struct Step {
    UiAction action;
    StateId state;
    std::string transition;

    friend bool operator==(const Step&, const Step&) = default;
};

/// A sequence of steps starting from `origin`.
struct Path {
    StateId origin;
    std::vector<Step> steps;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
    /// State the path currently ends in.
    const StateId& current() const { return steps.empty() ? origin : steps.back().state; }
    /// State in which step `i` was executed.
    const StateId& pre_state(std::size_t i) const { return i == 0 ? origin : steps[i - 1].state; }
};

struct EnvironmentFinding {
    EnvErrorKind kind;
    std::string subject;
    std::string message;
};

/// A finite deterministic GUI: states, elements, and action-labelled
/// transitions. Immutable once constructed.
class EnvironmentGraph {
public:
    /// Builds and validates; throws EnvironmentError on the first finding.
    EnvironmentGraph(std::string id, StateId root, std::vector<UiState> states, std::vector<Transition> transitions,
                     std::vector<IntentSegment> intents);

    const std::string& id() const { return id_; }
    const StateId& root_state() const { return root_; }
    const std::vector<UiState>& states() const { return states_; }
    const std::vector<Transition>& transitions() const { return transitions_; }
    const std::vector<IntentSegment>& intents() const { return intents_; }

    bool has_state(std::string_view state_id) const;
    /// Throws UnknownStateError.
    const UiState& state(std::string_view state_id) const;
    const Transition* find_transition(std::string_view transition_id) const;
    const IntentSegment* find_intent(std::string_view intent_id) const;
    /// Transitions leaving `state_id` in declaration order (no gating).
    std::span<const std::size_t> outgoing(std::string_view state_id) const;
    /// The transition keyed by (state, action), ignoring prerequisites.
    const Transition* lookup(std::string_view state_id, const UiAction& action) const;

private:
    std::string id_;
    StateId root_;
    std::vector<UiState> states_;
    std::vector<Transition> transitions_;
    std::vector<IntentSegment> intents_;
    std::map<std::string, std::size_t, std::less<>> state_index_;
    std::map<std::string, std::size_t, std::less<>> transition_index_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> outgoing_;
};

/// Structural validation; empty result means the parts form a valid graph.
std::vector<EnvironmentFinding> validate_environment(const StateId& root, const std::vector<UiState>& states,
                                                     const std::vector<Transition>& transitions,
                                                     const std::vector<IntentSegment>& intents);
/// Re-validation of an already constructed graph.
std::vector<EnvironmentFinding> validate_environment(const EnvironmentGraph& env);

/// The document's contents before graph validation.
struct EnvironmentParts {
    StateId root;
    std::vector<UiState> states;
    std::vector<Transition> transitions;
    std::vector<IntentSegment> intents;
};

/// Parses the JSON document; throws EnvironmentError for Parse and Schema
/// problems only.
EnvironmentParts parse_environment(std::istream& source);

/// Every finding for the file, or the single parse/schema error.
std::vector<EnvironmentFinding> check_environment_file(const std::string& path);

/// Parses the environment JSON document. `id` names the environment in corpora.
EnvironmentGraph load_environment(std::istream& source, std::string id);
EnvironmentGraph load_environment_file(const std::string& path);
EnvironmentGraph load_environment_string(std::string_view text, std::string id = "inline");

/// Actions whose transition exists from `state` and whose prerequisites all
/// appear in `history`, ordered by target element position.
std::vector<UiAction> valid_actions(const EnvironmentGraph& env, std::string_view state,
                                    std::span<const Step> history);

/// The transition `action` fires from `state` given `history`.
/// Throws UnknownStateError or InvalidActionError.
const Transition& resolve_transition(const EnvironmentGraph& env, std::string_view state, const UiAction& action,
                                     std::span<const Step> history);

/// E(s, a): the resulting state id.
StateId apply(const EnvironmentGraph& env, std::string_view state, const UiAction& action,
              std::span<const Step> history);

/// Tags carried by the traversed transitions, plus visual_ambiguity when a
/// targeted element shares its label with another visible element of the
/// state it was used in. `steps` hold post-states, starting from `start`.
AmbiguitySet audit_ambiguity(const EnvironmentGraph& env, std::string_view start, std::span<const Step> steps);

/// True when the element's normalized label is non-empty and repeated on
/// another visible element of `state`.
bool has_duplicate_label(const UiState& state, const UiElement& element);

} // namespace hats
