#include "hats/engine.hpp"

#include <chrono>

#include "hats/errors.hpp"

namespace hats {

using nlohmann::ordered_json;

SinkFailure::SinkFailure(const std::string& message, RunReport partial)
    : Error(message), partial_(std::move(partial))
{
}

double mean_outcome_recall(const RunReport& report)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : report.outcomes) {
        if (!o.error) {
            sum += o.recall;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

ordered_json config_to_json(const HardnessConfig& cfg)
{
    ordered_json j;
    j["epsilon"] = cfg.epsilon;
    j["alpha"] = cfg.alpha;
    j["h_max"] = cfg.h_max;
    j["r_min"] = cfg.r_min;
    j["f_max"] = cfg.f_max;
    j["c_ucb"] = cfg.c_ucb;
    j["t_max"] = cfg.t_max;
    j["iterations"] = cfg.iterations;
    j["seed"] = cfg.seed;
    return j;
}

HardnessConfig config_from_json(const nlohmann::json& j)
{
    HardnessConfig cfg;
    try {
        cfg.epsilon = j.at("epsilon").get<double>();
        cfg.alpha = j.at("alpha").get<double>();
        cfg.h_max = j.at("h_max").get<double>();
        cfg.r_min = j.at("r_min").get<double>();
        cfg.f_max = j.at("f_max").get<std::uint32_t>();
        cfg.c_ucb = j.at("c_ucb").get<double>();
        cfg.t_max = j.at("t_max").get<std::uint32_t>();
        cfg.iterations = j.at("iterations").get<std::uint32_t>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config echo: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ordered_json report_to_json(const RunReport& report, bool include_timing)
{
    ordered_json j;
    j["run_id"] = report.run_id;
    j["mode"] = report.mode;
    j["environment"] = report.environment_id;
    j["config"] = config_to_json(report.config);
    j["emitted_count"] = report.emitted_count;
    j["errored_count"] = report.errored_count;
    j["mean_recall"] = mean_outcome_recall(report);
    ordered_json iterations = ordered_json::array();
    for (const auto& o : report.outcomes) {
        ordered_json oj;
        oj["iteration"] = o.iteration_index;
        oj["aligned"] = o.aligned;
        oj["recall"] = o.recall;
        oj["hardness"] = o.hardness;
        oj["refine_rounds"] = o.refine_rounds_used;
        oj["path_length"] = o.path_length;
        oj["tree_path_length"] = o.tree_path_length;
        oj["recall_by_round"] = o.recall_by_round;
        oj["sample_id"] = o.sample ? ordered_json(o.sample->sample_id) : ordered_json();
        oj["error"] = o.error ? ordered_json(*o.error) : ordered_json();
        iterations.push_back(std::move(oj));
    }
    j["iterations"] = std::move(iterations);
    if (include_timing) {
        j["wall_clock_seconds"] = report.wall_clock_seconds;
    }
    return j;
}

Path rollout(const EnvironmentGraph& env, Path path, std::size_t t_max, Rng& rng)
{
    while (path.size() < t_max) {
        const StateId& current = path.current();
        auto actions = valid_actions(env, current, path.steps);
        if (actions.empty()) {
            break;
        }
        const UiAction& pick = actions[rng.uniform_index(actions.size())];
        const Transition& t = resolve_transition(env, current, pick, path.steps);
        path.steps.push_back(Step{pick, t.to, t.id});
    }
    return path;
}

RefineOutcome refine_loop(const ReferenceSequence& a_seq, Instruction inst, Oracle& oracle,
                          const EnvironmentGraph& env, const HardnessConfig& cfg)
{
    RefineOutcome out;
    for (;;) {
        ExecutionSequence b = oracle.execute_instruction(inst, a_seq.start_state, env);
        const AlignmentReport report = recall(env, a_seq, b);
        out.recall = report.recall;
        out.recall_by_round.push_back(report.recall);
        out.execution = std::move(b);
        if (report.recall >= cfg.r_min && out.execution.completed) {
            out.aligned = true;
            break;
        }
        if (out.rounds >= cfg.f_max) {
            break;
        }
        inst = oracle.refine_instruction(inst, a_seq, out.execution, env).instruction;
        ++out.rounds;
    }
    out.instruction = std::move(inst);
    return out;
}

VerifiedSample make_sample(const EnvironmentGraph& env, const ReferenceSequence& a_seq, const Instruction& inst,
                           const ExecutionSequence& b_seq, double recall, double hardness, std::size_t iteration_index,
                           const RunContext& ctx)
{
    VerifiedSample s;
    s.sample_id = ctx.run_id + "-" + std::to_string(iteration_index);
    s.instruction_text = inst.text;
    s.revision = inst.revision;
    s.start_state = b_seq.start_state;
    s.execution_steps = b_seq.steps;
    s.recall = recall;
    s.hardness = hardness;
    s.ambiguity_tags = audit_ambiguity(env, b_seq.start_state, b_seq.steps);
    const IntentSegment* intent = a_seq.source_intent ? env.find_intent(*a_seq.source_intent) : nullptr;
    s.category_tag = intent != nullptr ? intent->category : env.state(a_seq.start_state).category;
    s.environment_id = env.id();
    return s;
}

IterationOutcome run_iteration(ActionTree& tree, const EnvironmentGraph& env, Oracle& oracle,
                               const HardnessConfig& cfg, Rng& rng, std::size_t iteration_index,
                               const RunContext& ctx)
{
    IterationOutcome outcome;
    outcome.iteration_index = iteration_index;

    NodeId v = tree.get_or_create_root(env);
    Path path{env.root_state(), {}};

    // Selection: descend while the node is fully expanded; a node without
    // children is a dead end and stops the descent.
    while (tree.node(v).fully_expanded() && !tree.node(v).children.empty() && path.size() < cfg.t_max) {
        const TreeNode& node = tree.node(v);
        const Edge& edge = node.children[ucb_select_index(node, cfg.c_ucb)];
        const Transition& t = resolve_transition(env, node.state, edge.action, path.steps);
        path.steps.push_back(Step{edge.action, t.to, t.id});
        v = edge.child;
    }
    if (!tree.node(v).fully_expanded() && path.size() < cfg.t_max) {
        v = expand(tree, v, env, path, cfg.t_max).first;
    }
    const Path tree_path = path;

    const Path full = rollout(env, std::move(path), cfg.t_max, rng);
    outcome.path_length = full.size();
    outcome.tree_path_length = tree_path.size();
    if (full.empty()) {
        throw ContractViolation("no valid action from the root state '" + env.root_state() + "'");
    }

    const ReferenceSequence a_seq = oracle.select_subsequence(full, env);
    Instruction inst = oracle.synthesize_instruction(a_seq, env);
    RefineOutcome loop = refine_loop(a_seq, std::move(inst), oracle, env, cfg);

    const double reward = hardness(loop.recall, cfg);
    outcome.aligned = loop.aligned;
    outcome.recall = loop.recall;
    outcome.hardness = reward;
    outcome.refine_rounds_used = loop.rounds;
    outcome.recall_by_round = loop.recall_by_round;
    if (loop.aligned) {
        VerifiedSample sample =
            make_sample(env, a_seq, loop.instruction, loop.execution, loop.recall, reward, iteration_index, ctx);
        sample.seed = cfg.seed;
        outcome.sample = std::move(sample);
    }

    backpropagate(tree, tree_path, reward);
    return outcome;
}

RunReport synthesize_corpus(const EnvironmentGraph& env, Oracle& oracle, const HardnessConfig& cfg, SampleSink& sink,
                            const RunContext& ctx, ActionTree* tree)
{
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    RunReport report;
    report.run_id = ctx.run_id;
    report.mode = "hats";
    report.environment_id = env.id();
    report.config = cfg;

    ActionTree local;
    ActionTree& search = tree != nullptr ? *tree : local;
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        IterationOutcome outcome;
        try {
            outcome = run_iteration(search, env, oracle, cfg, rng, i, ctx);
        } catch (const std::exception& e) {
            outcome = IterationOutcome{};
            outcome.iteration_index = i;
            outcome.error = "iteration " + std::to_string(i) + ": " + e.what();
            outcome.oracle_error = dynamic_cast<const OracleError*>(&e) != nullptr;
            ++report.errored_count;
        }
        if (outcome.sample) {
            try {
                sink.write(*outcome.sample);
            } catch (const std::exception& e) {
                report.outcomes.push_back(std::move(outcome));
                throw SinkFailure("sample sink failed at iteration " + std::to_string(i) + ": " + e.what(),
                                  std::move(report));
            }
            ++report.emitted_count;
        }
        report.outcomes.push_back(std::move(outcome));
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace hats
