#include "hats/http_oracle.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "hats/alignment.hpp"
#include "hats/errors.hpp"
#include "hats/json_io.hpp"

namespace hats {

using nlohmann::json;
using nlohmann::ordered_json;

std::pair<std::size_t, std::size_t> longest_consecutive_run(const std::vector<std::size_t>& ids)
{
    std::vector<std::size_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::size_t best_first = 0;
    std::size_t best_len = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[j - 1] + 1) {
            ++j;
        }
        if (j - i > best_len) {
            best_len = j - i;
            best_first = sorted[i];
        }
        i = j;
    }
    return {best_first, best_len};
}

namespace {

struct Cached {
    StateId start;
    std::vector<std::string> transitions;
    std::string instruction;
};

std::vector<std::string> transition_ids(const std::vector<Step>& steps)
{
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) {
        out.push_back(s.transition);
    }
    return out;
}

ordered_json trajectory_json(const EnvironmentGraph& env, const StateId& start, const std::vector<Step>& steps)
{
    ordered_json out = ordered_json::array();
    StateId pre = start;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        ordered_json j;
        j["step_id"] = i;
        j["screen"] = state_to_json(env.state(pre));
        j["action"] = action_to_json(steps[i].action);
        j["next_state"] = steps[i].state;
        out.push_back(std::move(j));
        pre = steps[i].state;
    }
    return out;
}

ordered_json steps_json(const std::vector<Step>& steps)
{
    ordered_json out = ordered_json::array();
    for (const auto& s : steps) {
        out.push_back(step_to_json(s));
    }
    return out;
}

std::string load_prompt(const std::string& dir, const std::string& id)
{
    if (dir.empty()) {
        return {};
    }
    std::ifstream in(dir + "/" + id + ".txt");
    if (!in) {
        throw ConfigError("prompt template '" + id + "' not found in " + dir);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

} // namespace

struct HttpOracle::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string prefix;
    HttpOracleConfig config;
    std::string prompt_generation;
    std::string prompt_action;
    std::string prompt_refine;
    std::optional<Cached> cached;

    json post(const std::string& route, const ordered_json& body)
    {
        const std::string path = prefix + route;
        auto res = client->Post(path, body.dump(), "application/json");
        if (!res) {
            throw OracleError("POST " + path + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw OracleError("POST " + path + " returned HTTP " + std::to_string(res->status));
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw OracleError("POST " + path + " returned malformed JSON: " + e.what());
        }
    }

    static std::string string_field(const json& j, const char* key, const std::string& route)
    {
        if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
            throw OracleError(route + " response lacks string field '" + key + "'");
        }
        return j[key].get<std::string>();
    }
};

HttpOracle::HttpOracle(HttpOracleConfig config) : impl_(std::make_unique<Impl>())
{
    const std::string& url = config.endpoint;
    constexpr std::string_view kScheme = "http://";
    if (url.rfind(kScheme, 0) != 0) {
        throw ConfigError("oracle endpoint must be an http:// URL, got '" + url + "'");
    }
    const std::size_t slash = url.find('/', kScheme.size());
    const std::string host_port = url.substr(0, slash);
    if (host_port.size() == kScheme.size()) {
        throw ConfigError("oracle endpoint has no host: '" + url + "'");
    }
    impl_->prefix = slash == std::string::npos ? "" : url.substr(slash);
    while (!impl_->prefix.empty() && impl_->prefix.back() == '/') {
        impl_->prefix.pop_back();
    }
    impl_->client = std::make_unique<httplib::Client>(host_port);
    const auto t = static_cast<time_t>(config.timeout.count());
    impl_->client->set_connection_timeout(t, 0);
    impl_->client->set_read_timeout(t, 0);
    impl_->client->set_write_timeout(t, 0);
    if (config.bearer_token) {
        impl_->client->set_bearer_token_auth(*config.bearer_token);
    }
    impl_->prompt_generation = load_prompt(config.prompt_dir, "instruction_generation");
    impl_->prompt_action = load_prompt(config.prompt_dir, "action_reasoning");
    impl_->prompt_refine = load_prompt(config.prompt_dir, "refine_instruction");
    impl_->config = std::move(config);
}

HttpOracle::~HttpOracle() = default;

ReferenceSequence HttpOracle::select_subsequence(const Path& path, const EnvironmentGraph& env)
{
    if (path.empty()) {
        throw ContractViolation("cannot select a sub-trajectory from an empty path");
    }
    ordered_json body;
    body["prompt_template_id"] = "instruction_generation";
    body["prompt"] = impl_->prompt_generation;
    body["trajectory"] = trajectory_json(env, path.origin, path.steps);
    const json res = impl_->post("/synthesize", body);
    std::string text = Impl::string_field(res, "task_instruction", "/synthesize");

    std::vector<std::size_t> ids;
    try {
        ids = res.at("selected_step_ids").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw OracleError(std::string("/synthesize response has bad 'selected_step_ids': ") + e.what());
    }
    for (std::size_t id : ids) {
        if (id >= path.size()) {
            throw OracleError("/synthesize selected step " + std::to_string(id) + " of a " +
                              std::to_string(path.size()) + "-step trajectory");
        }
    }
    const auto [first, count] = longest_consecutive_run(ids);
    if (count == 0) {
        throw OracleError("/synthesize selected no steps");
    }
    ReferenceSequence a = slice_reference(path, first, count);
    // The instruction was written for the whole selection; keep it only if
    // the selection was already contiguous.
    if (count == ids.size()) {
        impl_->cached = Cached{a.start_state, transition_ids(a.steps), std::move(text)};
    } else {
        impl_->cached.reset();
    }
    return a;
}

Instruction HttpOracle::synthesize_instruction(const ReferenceSequence& a_seq, const EnvironmentGraph& env)
{
    if (a_seq.steps.empty()) {
        throw ContractViolation("cannot synthesize an instruction for an empty reference");
    }
    Instruction inst;
    inst.provenance = name();
    inst.app = env.state(a_seq.start_state).app;
    inst.reference_length = a_seq.steps.size();
    if (impl_->cached && impl_->cached->start == a_seq.start_state &&
        impl_->cached->transitions == transition_ids(a_seq.steps)) {
        inst.text = impl_->cached->instruction;
        impl_->cached.reset();
        return inst;
    }
    ordered_json body;
    body["prompt_template_id"] = "instruction_generation";
    body["prompt"] = impl_->prompt_generation;
    body["trajectory"] = trajectory_json(env, a_seq.start_state, a_seq.steps);
    inst.text = Impl::string_field(impl_->post("/synthesize", body), "task_instruction", "/synthesize");
    return inst;
}

ExecutionSequence HttpOracle::execute_instruction(const Instruction& inst, const StateId& start,
                                                  const EnvironmentGraph& env)
{
    ExecutionSequence b;
    b.start_state = start;
    StateId current = env.state(start).id;
    const std::size_t budget = std::max(inst.reference_length, inst.structured_steps.size()) + 2;
    bool finished = false;
    for (std::size_t i = 0; i < budget; ++i) {
        ordered_json body;
        body["prompt_template_id"] = "action_reasoning";
        body["prompt"] = impl_->prompt_action;
        body["instruction"] = inst.text;
        body["state"] = state_to_json(env.state(current));
        body["history"] = steps_json(b.steps);
        const json res = impl_->post("/execute", body);
        if (!res.is_object() || !res.contains("action")) {
            throw OracleError("/execute response lacks 'action'");
        }
        if (res["action"].is_null()) {
            finished = true;
            break;
        }
        UiAction action;
        try {
            action = action_from_json(res["action"]);
        } catch (const Error& e) {
            throw OracleError(std::string("/execute returned a malformed action: ") + e.what());
        }
        try {
            const Transition& t = resolve_transition(env, current, action, b.steps);
            b.steps.push_back(Step{action, t.to, t.id});
            current = t.to;
        } catch (const InvalidActionError&) {
            b.gaps.push_back(i);
        }
    }
    b.completed = finished && b.gaps.empty();
    return b;
}

RefineResult HttpOracle::refine_instruction(const Instruction& inst, const ReferenceSequence& a_seq,
                                            const ExecutionSequence& b_seq, const EnvironmentGraph& env)
{
    const AlignmentReport report = recall(env, a_seq, b_seq);
    ordered_json body;
    body["prompt_template_id"] = "refine_instruction";
    body["prompt"] = impl_->prompt_refine;
    body["instruction"] = inst.text;
    body["matched_exploration_id"] = report.matched_reference_indices;
    body["matched_gui_agent_id"] = report.matched_execution_indices;
    body["reference"] = trajectory_json(env, a_seq.start_state, a_seq.steps);
    body["execution"] = steps_json(b_seq.steps);
    RefineResult result{inst, false};
    result.instruction.text =
        Impl::string_field(impl_->post("/refine", body), "refined_high_level_instruction", "/refine");
    result.instruction.structured_steps.clear();
    result.instruction.revision = inst.revision + 1;
    return result;
}

} // namespace hats
