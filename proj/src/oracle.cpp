#include "hats/oracle.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string_view>

#include "hats/errors.hpp"
#include "hats/rng.hpp"

namespace hats {

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

bool StepDescriptor::has_slot(Slot slot) const
{
    switch (slot) {
    case Slot::Target: return has_target;
    case Slot::Text: return text.has_value();
    case Slot::Direction: return direction.has_value();
    }
    return false;
}

bool StepDescriptor::omitted(Slot slot) const
{
    switch (slot) {
    case Slot::Target: return target_omitted;
    case Slot::Text: return text_omitted;
    case Slot::Direction: return direction_omitted;
    }
    return false;
}

void StepDescriptor::set_omitted(Slot slot, bool value)
{
    switch (slot) {
    case Slot::Target: target_omitted = value; break;
    case Slot::Text: text_omitted = value; break;
    case Slot::Direction: direction_omitted = value; break;
    }
}

namespace {

constexpr std::array kSlots = {Slot::Target, Slot::Text, Slot::Direction};

struct SlotRef {
    std::size_t step;
    Slot slot;
};

std::vector<SlotRef> slots_where(const std::vector<StepDescriptor>& steps, bool omitted)
{
    std::vector<SlotRef> out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        for (Slot s : kSlots) {
            if (steps[i].has_slot(s) && steps[i].omitted(s) == omitted) {
                out.push_back({i, s});
            }
        }
    }
    return out;
}

std::vector<const UiElement*> same_looking(const UiState& state, const std::string& label, ElementRole role)
{
    std::vector<const UiElement*> out;
    const std::string norm = normalize_text(label);
    for (const auto& e : state.elements) {
        if (e.visible && e.role == role && normalize_text(e.label) == norm) {
            out.push_back(&e);
        }
    }
    return out;
}

StepDescriptor describe_step(const UiAction& action, const UiState& state)
{
    StepDescriptor d;
    d.kind = action.kind;
    d.text = action.text;
    d.direction = action.direction;
    if (action.target) {
        d.has_target = true;
        const UiElement* e = state.find_element(*action.target);
        if (e == nullptr) {
            throw ContractViolation("reference action " + action.describe() + " targets an element missing from '" +
                                    state.id + "'");
        }
        d.target_label = e->label;
        d.target_role = e->role;
        if (normalize_text(e->label).empty()) {
            d.target_id = e->id;
        } else {
            auto peers = same_looking(state, e->label, e->role);
            auto it = std::find(peers.begin(), peers.end(), e);
            d.ordinal = it == peers.end() ? 0 : static_cast<std::size_t>(it - peers.begin());
            d.show_ordinal = peers.size() > 1;
        }
    }
    return d;
}

/// The element a descriptor refers to in `state`, if it can be pinned down.
const UiElement* resolve_target(const StepDescriptor& d, const UiState& state)
{
    if (d.target_omitted) {
        return nullptr;
    }
    if (normalize_text(d.target_label).empty()) {
        const UiElement* e = state.find_element(d.target_id);
        return (e != nullptr && e->visible) ? e : nullptr;
    }
    auto peers = same_looking(state, d.target_label, d.target_role);
    if (peers.size() > 1 && !d.show_ordinal) {
        return nullptr;
    }
    return d.ordinal < peers.size() ? peers[d.ordinal] : nullptr;
}

// -- rendering --------------------------------------------------------------

constexpr std::pair<ElementRole, std::string_view> kRoleNouns[] = {
    {ElementRole::TextField, "text field"}, {ElementRole::ListItem, "list item"}, {ElementRole::Container, "container"},
    {ElementRole::Button, "button"},        {ElementRole::Toggle, "toggle"},      {ElementRole::Icon, "icon"},
};

std::string_view role_noun(ElementRole role)
{
    for (const auto& [r, noun] : kRoleNouns) {
        if (r == role) {
            return noun;
        }
    }
    return "element";
}

std::string quote(std::string_view s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '\'';
    return out;
}

std::string ordinal_word(std::size_t zero_based)
{
    const std::size_t n = zero_based + 1;
    const char* suffix = "th";
    if (n % 100 < 11 || n % 100 > 13) {
        switch (n % 10) {
        case 1: suffix = "st"; break;
        case 2: suffix = "nd"; break;
        case 3: suffix = "rd"; break;
        default: break;
        }
    }
    return std::to_string(n) + suffix;
}

std::string render_target(const StepDescriptor& d)
{
    if (d.target_omitted) {
        return "an element";
    }
    if (normalize_text(d.target_label).empty()) {
        return "the " + std::string(role_noun(d.target_role)) + " with id " + quote(d.target_id);
    }
    std::string out = "the ";
    if (d.show_ordinal) {
        out += ordinal_word(d.ordinal) + " ";
    }
    return out + quote(d.target_label) + " " + std::string(role_noun(d.target_role));
}

std::string render_clause(const StepDescriptor& d)
{
    auto directional = [&](const char* verb) {
        std::string out = verb;
        out += d.direction_omitted ? " in some direction" : std::string(" ") + to_string(*d.direction);
        if (d.has_target) {
            out += " on " + render_target(d);
        }
        return out;
    };
    switch (d.kind) {
    case ActionKind::Tap: return "tap " + render_target(d);
    case ActionKind::LongPress: return "long-press " + render_target(d);
    case ActionKind::Type:
        return "type " + (d.text_omitted ? std::string("some text") : quote(*d.text)) + " into " + render_target(d);
    case ActionKind::Scroll: return directional("scroll");
    case ActionKind::Swipe: return directional("swipe");
    case ActionKind::Back: return "go back";
    }
    return {};
}

// -- parsing ----------------------------------------------------------------

class ClauseParser {
public:
    explicit ClauseParser(std::string_view text) : text_(text) {}

    bool at_end() const { return pos_ >= text_.size(); }

    bool accept(std::string_view literal)
    {
        if (text_.substr(pos_, literal.size()) == literal) {
            pos_ += literal.size();
            return true;
        }
        return false;
    }

    void expect(std::string_view literal)
    {
        if (!accept(literal)) {
            fail("expected '" + std::string(literal) + "'");
        }
    }

    std::string quoted()
    {
        expect("'");
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_++];
            if (c == '\\' && pos_ < text_.size()) {
                out += text_[pos_++];
            } else if (c == '\'') {
                return out;
            } else {
                out += c;
            }
        }
        fail("unterminated quote");
    }

    std::string until(std::string_view delimiter)
    {
        auto end = text_.find(delimiter, pos_);
        if (end == std::string_view::npos) {
            fail("expected '" + std::string(delimiter) + "'");
        }
        std::string out(text_.substr(pos_, end - pos_));
        pos_ = end + delimiter.size();
        return out;
    }

    void target(StepDescriptor& d)
    {
        d.has_target = true;
        if (accept("an element")) {
            d.target_omitted = true;
            return;
        }
        expect("the ");
        for (const auto& [role, noun] : kRoleNouns) {
            if (accept(std::string(noun) + " with id ")) {
                d.target_role = role;
                d.target_id = quoted();
                return;
            }
        }
        if (text_.substr(pos_, 1) != "'") {
            std::size_t digits = 0;
            while (pos_ + digits < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + digits]))) {
                ++digits;
            }
            if (digits == 0) {
                fail("expected an ordinal or a quoted label");
            }
            d.ordinal = std::stoul(std::string(text_.substr(pos_, digits))) - 1;
            d.show_ordinal = true;
            pos_ += digits + 2;  // ordinal suffix
            expect(" ");
        }
        d.target_label = quoted();
        expect(" ");
        for (const auto& [role, noun] : kRoleNouns) {
            if (accept(noun)) {
                d.target_role = role;
                return;
            }
        }
        fail("expected an element role");
    }

    StepDescriptor clause()
    {
        StepDescriptor d;
        if (accept("go back")) {
            d.kind = ActionKind::Back;
        } else if (accept("tap ")) {
            d.kind = ActionKind::Tap;
            target(d);
        } else if (accept("long-press ")) {
            d.kind = ActionKind::LongPress;
            target(d);
        } else if (accept("type ")) {
            d.kind = ActionKind::Type;
            if (accept("some text")) {
                d.text = "";
                d.text_omitted = true;
            } else {
                d.text = quoted();
            }
            expect(" into ");
            target(d);
        } else if (accept("scroll ") || (swipe_ = accept("swipe "))) {
            d.kind = swipe_ ? ActionKind::Swipe : ActionKind::Scroll;
            swipe_ = false;
            if (accept("in some direction")) {
                d.direction = Direction::Up;
                d.direction_omitted = true;
            } else {
                bool found = false;
                for (Direction dir : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
                    if (accept(to_string(dir))) {
                        d.direction = dir;
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    fail("expected a direction");
                }
            }
            if (accept(" on ")) {
                target(d);
            }
        } else {
            fail("unknown clause");
        }
        return d;
    }

    [[noreturn]] void fail(const std::string& why) const
    {
        throw Error("cannot parse instruction at offset " + std::to_string(pos_) + ": " + why);
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    bool swipe_ = false;
};

} // namespace

std::size_t Instruction::omitted_slots() const { return slots_where(structured_steps, true).size(); }

std::string render_instruction(const std::string& app, const std::vector<StepDescriptor>& steps)
{
    std::string out = "In " + app + ": ";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0) {
            out += "; ";
        }
        out += render_clause(steps[i]);
    }
    return out;
}

Instruction parse_instruction(const std::string& text)
{
    if (text.rfind("In ", 0) != 0) {
        ClauseParser(text).expect("In ");
    }
    // The app name may itself contain ": "; take the first split whose
    // remainder parses.
    std::size_t split = text.find(": ", 3);
    if (split == std::string::npos) {
        throw Error("cannot parse instruction: expected ': ' after the app name");
    }
    for (;;) {
        const std::size_t next = text.find(": ", split + 2);
        try {
            ClauseParser p(std::string_view(text).substr(split + 2));
            Instruction inst;
            inst.app = text.substr(3, split - 3);
            inst.text = text;
            while (!p.at_end()) {
                inst.structured_steps.push_back(p.clause());
                if (!p.at_end()) {
                    p.expect("; ");
                }
            }
            inst.reference_length = inst.structured_steps.size();
            return inst;
        } catch (const Error&) {
            if (next == std::string::npos) {
                throw;
            }
        }
        split = next;
    }
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

ReferenceSequence slice_reference(const Path& path, std::size_t first, std::size_t count)
{
    ReferenceSequence a;
    a.start_state = path.pre_state(first);
    a.steps.assign(path.steps.begin() + static_cast<std::ptrdiff_t>(first),
                   path.steps.begin() + static_cast<std::ptrdiff_t>(first + count));
    return a;
}

ReferenceSequence select_intent_slice(const Path& path, const EnvironmentGraph& env)
{
    if (path.empty()) {
        throw ContractViolation("cannot select a sub-trajectory from an empty path");
    }
    std::size_t best_len = 0;
    std::size_t best_start = 0;
    const IntentSegment* best_intent = nullptr;
    for (std::size_t start = 0; start < path.size(); ++start) {
        for (const auto& intent : env.intents()) {
            std::size_t k = 0;
            while (start + k < path.size() && k < intent.transition_ids.size() &&
                   path.steps[start + k].transition == intent.transition_ids[k]) {
                ++k;
            }
            if (k > best_len) {
                best_len = k;
                best_start = start;
                best_intent = &intent;
            }
        }
    }
    if (best_intent == nullptr) {
        return slice_reference(path, 0, path.size());
    }
    ReferenceSequence a = slice_reference(path, best_start, best_len);
    a.source_intent = best_intent->id;
    return a;
}

// ---------------------------------------------------------------------------
// ScriptedOracle
// ---------------------------------------------------------------------------

void ScriptedOracleConfig::validate() const
{
    if (repair_per_round < 1) {
        throw ConfigError("repair_per_round must be a positive integer");
    }
}

std::uint32_t ScriptedOracleConfig::omissions_for(const std::optional<std::string>& intent) const
{
    if (intent) {
        if (auto it = intent_omissions.find(*intent); it != intent_omissions.end()) {
            return it->second;
        }
    }
    return omission_count;
}

ScriptedOracle::ScriptedOracle(ScriptedOracleConfig config) : config_(std::move(config)) { config_.validate(); }

ReferenceSequence ScriptedOracle::select_subsequence(const Path& path, const EnvironmentGraph& env)
{
    return select_intent_slice(path, env);
}

Instruction ScriptedOracle::synthesize_instruction(const ReferenceSequence& a_seq, const EnvironmentGraph& env)
{
    if (a_seq.steps.empty()) {
        throw ContractViolation("cannot synthesize an instruction for an empty reference");
    }
    Instruction inst;
    inst.provenance = name();
    inst.app = env.state(a_seq.start_state).app;
    inst.reference_length = a_seq.steps.size();
    for (std::size_t i = 0; i < a_seq.steps.size(); ++i) {
        inst.structured_steps.push_back(describe_step(a_seq.steps[i].action, env.state(a_seq.pre_state(i))));
    }

    // Draw which slots to omit, without replacement, from a stream keyed by
    // the oracle seed and the reference content.
    std::uint64_t fingerprint = fnv1a(a_seq.start_state);
    for (const auto& s : a_seq.steps) {
        fingerprint = fnv1a(s.transition, fnv1a("|", fingerprint));
    }
    Rng rng(mix_seed(config_.seed, fingerprint));
    auto candidates = slots_where(inst.structured_steps, false);
    const std::size_t to_omit = std::min<std::size_t>(config_.omissions_for(a_seq.source_intent), candidates.size());
    for (std::size_t k = 0; k < to_omit; ++k) {
        const std::size_t pick = k + rng.uniform_index(candidates.size() - k);
        std::swap(candidates[k], candidates[pick]);
        inst.structured_steps[candidates[k].step].set_omitted(candidates[k].slot, true);
    }
    inst.text = render_instruction(inst.app, inst.structured_steps);
    return inst;
}

ExecutionSequence ScriptedOracle::execute_instruction(const Instruction& inst, const StateId& start,
                                                      const EnvironmentGraph& env)
{
    ExecutionSequence b;
    b.start_state = start;
    StateId current = env.state(start).id;
    for (std::size_t i = 0; i < inst.structured_steps.size(); ++i) {
        const StepDescriptor& d = inst.structured_steps[i];
        UiAction action;
        action.kind = d.kind;
        bool resolvable = !(d.text && d.text_omitted) && !(d.direction && d.direction_omitted);
        if (resolvable && d.has_target) {
            const UiElement* e = resolve_target(d, env.state(current));
            if (e == nullptr) {
                resolvable = false;
            } else {
                action.target = e->id;
            }
        }
        if (!resolvable) {
            b.gaps.push_back(i);
            continue;
        }
        action.text = d.text;
        action.direction = d.direction;
        try {
            const Transition& t = resolve_transition(env, current, action, b.steps);
            b.steps.push_back(Step{action, t.to, t.id});
            current = t.to;
        } catch (const InvalidActionError&) {
            b.gaps.push_back(i);
        }
    }
    b.completed = b.gaps.empty();
    return b;
}

RefineResult ScriptedOracle::refine_instruction(const Instruction& inst, const ReferenceSequence& a_seq,
                                                const ExecutionSequence& b_seq, const EnvironmentGraph& env)
{
    RefineResult result{inst, false};
    Instruction& next = result.instruction;
    next.revision = inst.revision + 1;

    auto omitted = slots_where(next.structured_steps, true);
    if (omitted.empty()) {
        result.exhausted = true;
        return result;
    }
    const AlignmentReport report = recall(env, a_seq, b_seq);
    std::stable_partition(omitted.begin(), omitted.end(), [&](const SlotRef& s) {
        return !report.matched_reference_indices.contains(s.step);
    });
    const std::size_t repairs = std::min<std::size_t>(config_.repair_per_round, omitted.size());
    for (std::size_t k = 0; k < repairs; ++k) {
        next.structured_steps[omitted[k].step].set_omitted(omitted[k].slot, false);
    }
    next.text = render_instruction(next.app, next.structured_steps);
    return result;
}

} // namespace hats
