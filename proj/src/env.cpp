#include "hats/env.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hats/json_io.hpp"

namespace hats {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup_name(const std::pair<Enum, const char*> (&table)[N], std::string_view text)
{
    for (const auto& [value, name] : table) {
        if (text == name) {
            return value;
        }
    }
    return std::nullopt;
}

template <typename Enum, std::size_t N>
const char* name_of(const std::pair<Enum, const char*> (&table)[N], Enum value)
{
    for (const auto& [v, name] : table) {
        if (v == value) {
            return name;
        }
    }
    return "?";
}

constexpr std::pair<ElementRole, const char*> kRoles[] = {
    {ElementRole::Button, "button"},     {ElementRole::TextField, "text-field"}, {ElementRole::ListItem, "list-item"},
    {ElementRole::Icon, "icon"},         {ElementRole::Toggle, "toggle"},        {ElementRole::Container, "container"},
};
constexpr std::pair<ActionKind, const char*> kKinds[] = {
    {ActionKind::Tap, "tap"},   {ActionKind::Type, "type"},          {ActionKind::Scroll, "scroll"},
    {ActionKind::Back, "back"}, {ActionKind::LongPress, "long_press"}, {ActionKind::Swipe, "swipe"},
};
constexpr std::pair<Direction, const char*> kDirections[] = {
    {Direction::Up, "up"}, {Direction::Down, "down"}, {Direction::Left, "left"}, {Direction::Right, "right"}};
constexpr std::pair<AmbiguityTag, const char*> kTags[] = {
    {AmbiguityTag::ContextDependency, "context_dependency"},
    {AmbiguityTag::SequentialDependency, "sequential_dependency"},
    {AmbiguityTag::VisualAmbiguity, "visual_ambiguity"},
};

bool prerequisites_met(const Transition& t, std::span<const Step> history)
{
    return std::all_of(t.requires_transitions.begin(), t.requires_transitions.end(), [&](const std::string& req) {
        return std::any_of(history.begin(), history.end(), [&](const Step& s) { return s.transition == req; });
    });
}

} // namespace

const char* to_string(ElementRole role) { return name_of(kRoles, role); }
const char* to_string(ActionKind kind) { return name_of(kKinds, kind); }
const char* to_string(Direction direction) { return name_of(kDirections, direction); }
const char* to_string(AmbiguityTag tag) { return name_of(kTags, tag); }
std::optional<ElementRole> parse_role(std::string_view text) { return lookup_name(kRoles, text); }
std::optional<ActionKind> parse_action_kind(std::string_view text) { return lookup_name(kKinds, text); }
std::optional<Direction> parse_direction(std::string_view text) { return lookup_name(kDirections, text); }
std::optional<AmbiguityTag> parse_ambiguity_tag(std::string_view text) { return lookup_name(kTags, text); }

std::string normalize_text(std::string_view text)
{
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) {
        text.remove_prefix(1);
    }
    while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) {
        text.remove_suffix(1);
    }
    std::string out(text);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

const UiElement* UiState::find_element(std::string_view element_id) const
{
    for (const auto& e : elements) {
        if (e.id == element_id) {
            return &e;
        }
    }
    return nullptr;
}

std::size_t UiState::element_index(std::string_view element_id) const
{
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (elements[i].id == element_id) {
            return i;
        }
    }
    return elements.size();
}

bool requires_target(ActionKind kind)
{
    return kind == ActionKind::Tap || kind == ActionKind::Type || kind == ActionKind::LongPress;
}

bool requires_direction(ActionKind kind) { return kind == ActionKind::Scroll || kind == ActionKind::Swipe; }

bool operator==(const UiAction& a, const UiAction& b)
{
    if (a.kind != b.kind || a.target != b.target || a.direction != b.direction) {
        return false;
    }
    if (a.text.has_value() != b.text.has_value()) {
        return false;
    }
    return !a.text || normalize_text(*a.text) == normalize_text(*b.text);
}

std::string UiAction::presence_violation() const
{
    if (requires_target(kind) && !target) {
        return std::string(to_string(kind)) + " requires a target";
    }
    if (kind == ActionKind::Back && target) {
        return "back takes no target";
    }
    if ((kind == ActionKind::Type) != text.has_value()) {
        return "text is required for type and only for type";
    }
    if (requires_direction(kind) != direction.has_value()) {
        return "direction is required for scroll/swipe and only for them";
    }
    return {};
}

std::string UiAction::describe() const
{
    std::string out = to_string(kind);
    out += '(';
    bool first = true;
    auto add = [&](const std::string& s) {
        if (!first) {
            out += ',';
        }
        out += s;
        first = false;
    };
    if (target) {
        add(*target);
    }
    if (text) {
        add('"' + normalize_text(*text) + '"');
    }
    if (direction) {
        add(to_string(*direction));
    }
    out += ')';
    return out;
}

AmbiguitySet::AmbiguitySet(std::initializer_list<AmbiguityTag> tags)
{
    for (auto t : tags) {
        insert(t);
    }
}

std::size_t AmbiguitySet::size() const
{
    std::size_t n = 0;
    for (auto t : kAllAmbiguityTags) {
        n += contains(t) ? 1 : 0;
    }
    return n;
}

std::vector<std::string> AmbiguitySet::names() const
{
    std::vector<std::string> out;
    for (auto t : kAllAmbiguityTags) {
        if (contains(t)) {
            out.emplace_back(to_string(t));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<EnvironmentFinding> validate_environment(const StateId& root, const std::vector<UiState>& states,
                                                     const std::vector<Transition>& transitions,
                                                     const std::vector<IntentSegment>& intents)
{
    std::vector<EnvironmentFinding> findings;
    auto report = [&](EnvErrorKind kind, std::string subject, std::string message) {
        findings.push_back({kind, std::move(subject), std::move(message)});
    };

    std::map<std::string, const UiState*, std::less<>> state_by_id;
    for (const auto& s : states) {
        if (s.id.empty()) {
            report(EnvErrorKind::Schema, "", "state with empty id");
            continue;
        }
        if (!state_by_id.emplace(s.id, &s).second) {
            report(EnvErrorKind::DuplicateId, s.id, "duplicate state id '" + s.id + "'");
        }
        std::set<std::string> element_ids;
        for (const auto& e : s.elements) {
            if (e.id.empty()) {
                report(EnvErrorKind::Schema, s.id, "element with empty id in state '" + s.id + "'");
            } else if (!element_ids.insert(e.id).second) {
                report(EnvErrorKind::DuplicateId, e.id, "duplicate element id '" + e.id + "' in state '" + s.id + "'");
            }
        }
    }
    if (!state_by_id.contains(root)) {
        report(EnvErrorKind::DanglingReference, root, "root state '" + root + "' does not exist");
    }

    std::map<std::string, const Transition*, std::less<>> transition_by_id;
    for (const auto& t : transitions) {
        if (t.id.empty()) {
            report(EnvErrorKind::Schema, "", "transition with empty id");
        } else if (!transition_by_id.emplace(t.id, &t).second) {
            report(EnvErrorKind::DuplicateId, t.id, "duplicate transition id '" + t.id + "'");
        }
    }

    std::vector<std::pair<const Transition*, const Transition*>> seen_keys;
    std::map<std::string, std::vector<const Transition*>, std::less<>> by_from;
    for (const auto& t : transitions) {
        const auto from_it = state_by_id.find(t.from);
        if (from_it == state_by_id.end()) {
            report(EnvErrorKind::DanglingReference, t.from,
                   "transition '" + t.id + "' leaves unknown state '" + t.from + "'");
        }
        if (!state_by_id.contains(t.to)) {
            report(EnvErrorKind::DanglingReference, t.to,
                   "transition '" + t.id + "' enters unknown state '" + t.to + "'");
        }
        if (auto why = t.action.presence_violation(); !why.empty()) {
            report(EnvErrorKind::Schema, t.id, "transition '" + t.id + "': " + why);
        }
        if (from_it != state_by_id.end() && t.action.target) {
            const UiElement* e = from_it->second->find_element(*t.action.target);
            if (e == nullptr) {
                report(EnvErrorKind::InvalidElement, t.id,
                       "transition '" + t.id + "' targets unknown element '" + *t.action.target + "'");
            } else if (t.action.kind == ActionKind::Type && e->role != ElementRole::TextField) {
                report(EnvErrorKind::InvalidElement, t.id,
                       "transition '" + t.id + "' types into non-text-field '" + e->id + "'");
            }
        }
        for (const Transition* other : by_from[t.from]) {
            if (other->action == t.action) {
                report(EnvErrorKind::DuplicateKey, t.from + ":" + t.action.describe(),
                       "transitions '" + other->id + "' and '" + t.id + "' share key (" + t.from + ", " +
                           t.action.describe() + ")");
            }
        }
        by_from[t.from].push_back(&t);

        for (const auto& req : t.requires_transitions) {
            if (!transition_by_id.contains(req)) {
                report(EnvErrorKind::DanglingReference, req,
                       "transition '" + t.id + "' requires unknown transition '" + req + "'");
            }
        }
        if (t.ambiguity.contains(AmbiguityTag::SequentialDependency) == t.requires_transitions.empty()) {
            report(EnvErrorKind::TagMismatch, t.id,
                   "transition '" + t.id + "': sequential_dependency tag and requires list must go together");
        }
    }

    // Prerequisite cycles: DFS over t -> requires(t).
    {
        enum Mark { White, Grey, Black };
        std::map<std::string, Mark, std::less<>> mark;
        std::string cycle_at;
        std::function<bool(const Transition&)> visit = [&](const Transition& t) {
            mark[t.id] = Grey;
            for (const auto& req : t.requires_transitions) {
                auto it = transition_by_id.find(req);
                if (it == transition_by_id.end()) {
                    continue;
                }
                Mark m = mark.contains(req) ? mark[req] : White;
                if (m == Grey) {
                    cycle_at = req;
                    return true;
                }
                if (m == White && visit(*it->second)) {
                    return true;
                }
            }
            mark[t.id] = Black;
            return false;
        };
        for (const auto& t : transitions) {
            if (!mark.contains(t.id) && visit(t)) {
                report(EnvErrorKind::PrerequisiteCycle, cycle_at,
                       "prerequisite cycle through transition '" + cycle_at + "'");
                break;
            }
        }
    }

    // Static reachability from the root.
    if (state_by_id.contains(root)) {
        std::set<std::string, std::less<>> reached{root};
        std::vector<std::string> frontier{root};
        while (!frontier.empty()) {
            const std::string s = frontier.back();
            frontier.pop_back();
            for (const Transition* t : by_from[s]) {
                if (state_by_id.contains(t->to) && reached.insert(t->to).second) {
                    frontier.push_back(t->to);
                }
            }
        }
        for (const auto& s : states) {
            if (!s.id.empty() && !reached.contains(s.id)) {
                report(EnvErrorKind::Unreachable, s.id, "state '" + s.id + "' is unreachable from the root");
            }
        }
    }

    std::set<std::string> intent_ids;
    for (const auto& intent : intents) {
        if (!intent_ids.insert(intent.id).second) {
            report(EnvErrorKind::DuplicateId, intent.id, "duplicate intent id '" + intent.id + "'");
        }
        if (intent.transition_ids.empty()) {
            report(EnvErrorKind::BrokenIntent, intent.id, "intent '" + intent.id + "' has no transitions");
            continue;
        }
        const Transition* prev = nullptr;
        for (const auto& tid : intent.transition_ids) {
            auto it = transition_by_id.find(tid);
            if (it == transition_by_id.end()) {
                report(EnvErrorKind::DanglingReference, tid,
                       "intent '" + intent.id + "' names unknown transition '" + tid + "'");
                prev = nullptr;
                continue;
            }
            if (prev != nullptr && prev->to != it->second->from) {
                report(EnvErrorKind::BrokenIntent, intent.id,
                       "intent '" + intent.id + "' breaks between '" + prev->id + "' and '" + tid + "'");
            }
            prev = it->second;
        }
    }
    return findings;
}

std::vector<EnvironmentFinding> validate_environment(const EnvironmentGraph& env)
{
    return validate_environment(env.root_state(), env.states(), env.transitions(), env.intents());
}

// ---------------------------------------------------------------------------
// EnvironmentGraph
// ---------------------------------------------------------------------------

EnvironmentGraph::EnvironmentGraph(std::string id, StateId root, std::vector<UiState> states,
                                   std::vector<Transition> transitions, std::vector<IntentSegment> intents)
    : id_(std::move(id)),
      root_(std::move(root)),
      states_(std::move(states)),
      transitions_(std::move(transitions)),
      intents_(std::move(intents))
{
    auto findings = validate_environment(root_, states_, transitions_, intents_);
    if (!findings.empty()) {
        const auto& f = findings.front();
        throw EnvironmentError(f.kind, f.subject, f.message);
    }
    for (std::size_t i = 0; i < states_.size(); ++i) {
        state_index_.emplace(states_[i].id, i);
    }
    for (std::size_t i = 0; i < transitions_.size(); ++i) {
        transition_index_.emplace(transitions_[i].id, i);
        outgoing_[transitions_[i].from].push_back(i);
    }
}

bool EnvironmentGraph::has_state(std::string_view state_id) const { return state_index_.contains(state_id); }

const UiState& EnvironmentGraph::state(std::string_view state_id) const
{
    auto it = state_index_.find(state_id);
    if (it == state_index_.end()) {
        throw UnknownStateError(std::string(state_id));
    }
    return states_[it->second];
}

const Transition* EnvironmentGraph::find_transition(std::string_view transition_id) const
{
    auto it = transition_index_.find(transition_id);
    return it == transition_index_.end() ? nullptr : &transitions_[it->second];
}

const IntentSegment* EnvironmentGraph::find_intent(std::string_view intent_id) const
{
    for (const auto& i : intents_) {
        if (i.id == intent_id) {
            return &i;
        }
    }
    return nullptr;
}

std::span<const std::size_t> EnvironmentGraph::outgoing(std::string_view state_id) const
{
    auto it = outgoing_.find(state_id);
    if (it == outgoing_.end()) {
        return {};
    }
    return it->second;
}

const Transition* EnvironmentGraph::lookup(std::string_view state_id, const UiAction& action) const
{
    for (std::size_t idx : outgoing(state_id)) {
        if (transitions_[idx].action == action) {
            return &transitions_[idx];
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!obj.is_object()) {
        throw EnvironmentError(EnvErrorKind::Schema, where, where + " must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw EnvironmentError(EnvErrorKind::Schema, where, "unknown field '" + key + "' in " + where);
        }
    }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw EnvironmentError(EnvErrorKind::Schema, where, "missing field '" + std::string(key) + "' in " + where);
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw EnvironmentError(EnvErrorKind::Schema, where, "field '" + std::string(key) + "' in " + where +
                                                                " has the wrong type");
    }
}

template <typename T>
T optional_field(const json& obj, const char* key, T fallback, const std::string& where)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    return required<T>(obj, key, where);
}

UiState parse_state(const json& j)
{
    reject_unknown(j, {"id", "app", "category", "terminal", "elements"}, "state");
    UiState s;
    s.id = required<std::string>(j, "id", "state");
    const std::string where = "state '" + s.id + "'";
    s.app = optional_field<std::string>(j, "app", "", where);
    s.category = optional_field<std::string>(j, "category", "", where);
    s.terminal = optional_field<bool>(j, "terminal", false, where);
    const json elements = optional_field<json>(j, "elements", json::array(), where);
    if (!elements.is_array()) {
        throw EnvironmentError(EnvErrorKind::Schema, s.id, "elements of " + where + " must be an array");
    }
    for (const auto& ej : elements) {
        reject_unknown(ej, {"id", "role", "label", "visible", "clickable"}, "element of " + where);
        UiElement e;
        e.id = required<std::string>(ej, "id", "element of " + where);
        const auto role_text = required<std::string>(ej, "role", "element '" + e.id + "'");
        auto role = parse_role(role_text);
        if (!role) {
            throw EnvironmentError(EnvErrorKind::Schema, e.id, "unknown role '" + role_text + "'");
        }
        e.role = *role;
        e.label = optional_field<std::string>(ej, "label", "", "element '" + e.id + "'");
        e.visible = optional_field<bool>(ej, "visible", true, "element '" + e.id + "'");
        e.clickable = optional_field<bool>(ej, "clickable", true, "element '" + e.id + "'");
        s.elements.push_back(std::move(e));
    }
    return s;
}

Transition parse_transition(const json& j)
{
    reject_unknown(j, {"id", "from", "action", "to", "ambiguity", "requires"}, "transition");
    Transition t;
    t.id = required<std::string>(j, "id", "transition");
    const std::string where = "transition '" + t.id + "'";
    t.from = required<std::string>(j, "from", where);
    t.to = required<std::string>(j, "to", where);
    try {
        t.action = action_from_json(required<json>(j, "action", where));
    } catch (const Error& e) {
        throw EnvironmentError(EnvErrorKind::Schema, t.id, where + ": " + e.what());
    }
    for (const auto& name : optional_field<std::vector<std::string>>(j, "ambiguity", {}, where)) {
        auto tag = parse_ambiguity_tag(name);
        if (!tag) {
            throw EnvironmentError(EnvErrorKind::Schema, t.id, where + ": unknown ambiguity tag '" + name + "'");
        }
        t.ambiguity.insert(*tag);
    }
    t.requires_transitions = optional_field<std::vector<std::string>>(j, "requires", {}, where);
    return t;
}

IntentSegment parse_intent(const json& j)
{
    reject_unknown(j, {"id", "description", "transitions", "category"}, "intent");
    IntentSegment i;
    i.id = required<std::string>(j, "id", "intent");
    const std::string where = "intent '" + i.id + "'";
    i.description = optional_field<std::string>(j, "description", "", where);
    i.transition_ids = required<std::vector<std::string>>(j, "transitions", where);
    i.category = optional_field<std::string>(j, "category", "", where);
    return i;
}

} // namespace

EnvironmentParts parse_environment(std::istream& source)
{
    json doc;
    try {
        doc = json::parse(source);
    } catch (const json::parse_error& e) {
        throw EnvironmentError(EnvErrorKind::Parse, "", std::string("malformed document: ") + e.what());
    }
    reject_unknown(doc, {"root_state", "states", "transitions", "intents"}, "document");
    EnvironmentParts parts;
    parts.root = required<std::string>(doc, "root_state", "document");

    auto array_of = [&](const char* key) {
        json arr = optional_field<json>(doc, key, json::array(), "document");
        if (!arr.is_array()) {
            throw EnvironmentError(EnvErrorKind::Schema, key, std::string(key) + " must be an array");
        }
        return arr;
    };
    for (const auto& j : array_of("states")) {
        parts.states.push_back(parse_state(j));
    }
    for (const auto& j : array_of("transitions")) {
        parts.transitions.push_back(parse_transition(j));
    }
    for (const auto& j : array_of("intents")) {
        parts.intents.push_back(parse_intent(j));
    }
    return parts;
}

EnvironmentGraph load_environment(std::istream& source, std::string id)
{
    EnvironmentParts p = parse_environment(source);
    return EnvironmentGraph(std::move(id), std::move(p.root), std::move(p.states), std::move(p.transitions),
                            std::move(p.intents));
}

std::vector<EnvironmentFinding> check_environment_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        return {{EnvErrorKind::Parse, path, "cannot open environment file '" + path + "'"}};
    }
    try {
        const EnvironmentParts p = parse_environment(in);
        return validate_environment(p.root, p.states, p.transitions, p.intents);
    } catch (const EnvironmentError& e) {
        return {{e.kind(), e.subject(), e.what()}};
    }
}

EnvironmentGraph load_environment_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw EnvironmentError(EnvErrorKind::Parse, path, "cannot open environment file '" + path + "'");
    }
    std::string stem = path;
    if (auto slash = stem.find_last_of('/'); slash != std::string::npos) {
        stem = stem.substr(slash + 1);
    }
    if (auto dot = stem.rfind('.'); dot != std::string::npos) {
        stem = stem.substr(0, dot);
    }
    return load_environment(in, stem);
}

EnvironmentGraph load_environment_string(std::string_view text, std::string id)
{
    std::istringstream in{std::string(text)};
    return load_environment(in, std::move(id));
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

std::vector<UiAction> valid_actions(const EnvironmentGraph& env, std::string_view state, std::span<const Step> history)
{
    const UiState& s = env.state(state);
    std::vector<const Transition*> enabled;
    for (std::size_t idx : env.outgoing(state)) {
        const Transition& t = env.transitions()[idx];
        if (prerequisites_met(t, history)) {
            enabled.push_back(&t);
        }
    }
    auto position = [&](const Transition* t) {
        return t->action.target ? s.element_index(*t->action.target) : s.elements.size();
    };
    std::stable_sort(enabled.begin(), enabled.end(),
                     [&](const Transition* a, const Transition* b) { return position(a) < position(b); });
    std::vector<UiAction> out;
    out.reserve(enabled.size());
    for (const Transition* t : enabled) {
        out.push_back(t->action);
    }
    return out;
}

const Transition& resolve_transition(const EnvironmentGraph& env, std::string_view state, const UiAction& action,
                                     std::span<const Step> history)
{
    if (!env.has_state(state)) {
        throw UnknownStateError(std::string(state));
    }
    const Transition* t = env.lookup(state, action);
    if (t == nullptr) {
        throw InvalidActionError("no transition for " + action.describe() + " in state '" + std::string(state) + "'");
    }
    if (!prerequisites_met(*t, history)) {
        throw InvalidActionError("transition '" + t->id + "' has unmet prerequisites");
    }
    return *t;
}

StateId apply(const EnvironmentGraph& env, std::string_view state, const UiAction& action,
              std::span<const Step> history)
{
    return resolve_transition(env, state, action, history).to;
}

bool has_duplicate_label(const UiState& state, const UiElement& element)
{
    const std::string label = normalize_text(element.label);
    if (label.empty()) {
        return false;
    }
    return std::any_of(state.elements.begin(), state.elements.end(), [&](const UiElement& other) {
        return other.id != element.id && other.visible && normalize_text(other.label) == label;
    });
}

AmbiguitySet audit_ambiguity(const EnvironmentGraph& env, std::string_view start, std::span<const Step> steps)
{
    AmbiguitySet tags;
    std::string current(start);
    if (!env.has_state(current)) {
        throw AuditError(0, "unknown start state '" + current + "'");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const Step& step = steps[i];
        const Transition* t = env.lookup(current, step.action);
        if (t == nullptr || t->to != step.state) {
            throw AuditError(i, step.action.describe() + " from '" + current + "' to '" + step.state +
                                    "' matches no transition");
        }
        tags |= t->ambiguity;
        if (step.action.target) {
            const UiState& s = env.state(current);
            if (const UiElement* e = s.find_element(*step.action.target); e && has_duplicate_label(s, *e)) {
                tags.insert(AmbiguityTag::VisualAmbiguity);
            }
        }
        current = step.state;
    }
    return tags;
}

} // namespace hats
