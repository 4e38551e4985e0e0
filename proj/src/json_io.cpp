#include "hats/json_io.hpp"

#include <algorithm>

namespace hats {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json action_to_json(const UiAction& action)
{
    ordered_json j;
    j["kind"] = to_string(action.kind);
    if (action.target) {
        j["target"] = *action.target;
    }
    if (action.text) {
        j["text"] = *action.text;
    }
    if (action.direction) {
        j["direction"] = to_string(*action.direction);
    }
    return j;
}

namespace {

void check_fields(const json& j, std::initializer_list<std::string_view> allowed)
{
    if (!j.is_object()) {
        throw Error("action must be an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error("unknown action field '" + key + "'");
        }
    }
}

UiAction parse_action_fields(const json& j)
{
    UiAction a;
    if (!j.contains("kind") || !j["kind"].is_string()) {
        throw Error("action needs a string 'kind'");
    }
    const auto kind_text = j["kind"].get<std::string>();
    auto kind = parse_action_kind(kind_text);
    if (!kind) {
        throw Error("unknown action kind '" + kind_text + "'");
    }
    a.kind = *kind;
    auto string_field = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key)) {
            return std::nullopt;
        }
        if (!j[key].is_string()) {
            throw Error(std::string("action field '") + key + "' must be a string");
        }
        return j[key].get<std::string>();
    };
    a.target = string_field("target");
    a.text = string_field("text");
    if (auto d = string_field("direction")) {
        auto dir = parse_direction(*d);
        if (!dir) {
            throw Error("unknown direction '" + *d + "'");
        }
        a.direction = *dir;
    }
    if (auto why = a.presence_violation(); !why.empty()) {
        throw Error(why);
    }
    return a;
}

} // namespace

UiAction action_from_json(const json& j)
{
    check_fields(j, {"kind", "target", "text", "direction"});
    return parse_action_fields(j);
}

ordered_json step_to_json(const Step& step)
{
    ordered_json j = action_to_json(step.action);
    j["state"] = step.state;
    return j;
}

Step step_from_json(const json& j)
{
    check_fields(j, {"kind", "target", "text", "direction", "state"});
    Step s;
    s.action = parse_action_fields(j);
    if (!j.contains("state") || !j["state"].is_string()) {
        throw Error("step needs a string 'state'");
    }
    s.state = j["state"].get<std::string>();
    return s;
}

ordered_json state_to_json(const UiState& state)
{
    ordered_json j;
    j["id"] = state.id;
    j["app"] = state.app;
    j["category"] = state.category;
    ordered_json elements = ordered_json::array();
    for (const auto& e : state.elements) {
        elements.push_back({{"id", e.id},
                            {"role", to_string(e.role)},
                            {"label", e.label},
                            {"visible", e.visible},
                            {"clickable", e.clickable}});
    }
    j["elements"] = std::move(elements);
    return j;
}

} // namespace hats
