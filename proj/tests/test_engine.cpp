#include <doctest.h>

#include <stdexcept>

#include "hats/engine.hpp"
#include "hats/errors.hpp"
#include "support.hpp"

using namespace hats;
using hats_test::clock_env;

namespace {

/// Delegates to a scripted oracle but throws from `execute_instruction` on
/// the iterations listed in `fail_on`.
class FlakyOracle final : public Oracle {
public:
    explicit FlakyOracle(std::set<std::size_t> fail_on) : fail_on_(std::move(fail_on)) {}

    std::string name() const override { return "flaky"; }
    ReferenceSequence select_subsequence(const Path& path, const EnvironmentGraph& env) override
    {
        ++calls_;
        return inner_.select_subsequence(path, env);
    }
    Instruction synthesize_instruction(const ReferenceSequence& a, const EnvironmentGraph& env) override
    {
        return inner_.synthesize_instruction(a, env);
    }
    ExecutionSequence execute_instruction(const Instruction& inst, const StateId& start,
                                          const EnvironmentGraph& env) override
    {
        if (fail_on_.contains(calls_ - 1)) {
            throw OracleError("service unavailable");
        }
        return inner_.execute_instruction(inst, start, env);
    }
    RefineResult refine_instruction(const Instruction& inst, const ReferenceSequence& a, const ExecutionSequence& b,
                                    const EnvironmentGraph& env) override
    {
        return inner_.refine_instruction(inst, a, b, env);
    }

private:
    ScriptedOracle inner_;
    std::set<std::size_t> fail_on_;
    std::size_t calls_ = 0;
};

class BrokenSink final : public SampleSink {
public:
    explicit BrokenSink(std::size_t ok) : ok_(ok) {}
    void write(const VerifiedSample&) override
    {
        if (ok_ == 0) {
            throw std::runtime_error("disk full");
        }
        --ok_;
    }

private:
    std::size_t ok_;
};

/// Sum of visit counts over every edge in the tree.
std::uint64_t total_visits(const ActionTree& tree)
{
    std::uint64_t n = 0;
    for (NodeId id = 0; id < tree.size(); ++id) {
        for (const auto& e : tree.node(id).children) {
            n += e.stats.visit_count;
        }
    }
    return n;
}

HardnessConfig small_config(std::uint32_t iterations)
{
    HardnessConfig cfg;
    cfg.iterations = iterations;
    return cfg;
}

} // namespace

TEST_SUITE("engine")
{
    TEST_CASE("rollout from the root with seed 42")
    {
        const auto env = clock_env();
        Rng rng(42);
        const Path p = rollout(env, Path{"s0", {}}, 8, rng);
        std::vector<std::string> ids;
        for (const auto& s : p.steps) {
            ids.push_back(s.transition);
        }
        CHECK(ids == std::vector<std::string>{"t0", "t1", "t2", "t5", "t6", "a0", "a4", "a2"});
        // Each step follows the previous state.
        StateId at = "s0";
        for (const auto& s : p.steps) {
            const Transition* t = env.find_transition(s.transition);
            REQUIRE(t != nullptr);
            CHECK(t->from == at);
            at = t->to;
        }
    }

    TEST_CASE("rollout respects t_max and leaves a full path alone")
    {
        const auto env = clock_env();
        Rng rng(1);
        const Path p = rollout(env, Path{"s0", {}}, 3, rng);
        CHECK(p.size() == 3);
        const Path same = rollout(env, p, 3, rng);
        CHECK(same.steps == p.steps);
        const auto chain = hats_test::chain_env(2);
        CHECK(rollout(chain, Path{"c0", {}}, 10, rng).size() == 2);
    }

    TEST_CASE("lossless oracle: every iteration aligns at recall 1")
    {
        const auto env = clock_env();
        ScriptedOracle oracle;
        VectorSink sink;
        const auto report = synthesize_corpus(env, oracle, small_config(40), sink);
        CHECK(report.errored_count == 0);
        CHECK(report.emitted_count == 40);
        CHECK(sink.samples.size() == 40);
        for (const auto& o : report.outcomes) {
            CHECK(o.aligned);
            CHECK(o.recall == 1.0);
            CHECK(o.hardness == doctest::Approx(hats_test::oracle_hardness(1.0, 0.01, 1.0, 100.0)));
            CHECK(o.refine_rounds_used == 0);
            CHECK(o.recall_by_round.size() == 1);
        }
    }

    TEST_CASE("first iteration on a fresh tree expands the first root action")
    {
        const auto env = clock_env();
        ScriptedOracle oracle;
        ActionTree tree;
        Rng rng(42);
        const auto o = run_iteration(tree, env, oracle, HardnessConfig{}, rng, 0, {});
        const TreeNode& root = tree.node(0);
        REQUIRE(root.children.size() == 1);
        CHECK(root.children[0].action == UiAction::tap("tab_alarm"));
        CHECK(root.children[0].stats.visit_count == 1);
        CHECK(root.children[0].stats.q_value == o.hardness);
        CHECK(o.tree_path_length == 1);
        CHECK(o.path_length == 8);
        CHECK(tree.size() == 2);
        CHECK(o.sample.has_value());
        CHECK(o.sample->sample_id == "run0-0");
    }

    TEST_CASE("every iteration adds exactly one visit per tree edge on its path")
    {
        const auto env = clock_env();
        ScriptedOracle oracle({.omission_count = 2, .seed = 3});
        ActionTree tree;
        VectorSink sink;
        const auto report = synthesize_corpus(env, oracle, small_config(60), sink, {}, &tree);
        std::uint64_t expected = 0;
        for (const auto& o : report.outcomes) {
            expected += o.tree_path_length;
        }
        CHECK(total_visits(tree) == expected);
        // Root edges together carry one visit per iteration.
        std::uint64_t root_visits = 0;
        for (const auto& e : tree.node(0).children) {
            root_visits += e.stats.visit_count;
        }
        CHECK(root_visits == 60);
    }

    TEST_CASE("five masks with three refinements: not aligned after three rounds")
    {
        const auto env = hats_test::chain_env(5);
        ScriptedOracle oracle({.omission_count = 5, .repair_per_round = 1});
        const IntentSegment* intent = env.find_intent("chain");
        Path p{"c0", {}};
        for (const auto& id : intent->transition_ids) {
            const Transition* t = env.find_transition(id);
            p.steps.push_back({t->action, t->to, t->id});
        }
        const ReferenceSequence a = oracle.select_subsequence(p, env);
        const Instruction inst = oracle.synthesize_instruction(a, env);
        REQUIRE(inst.omitted_slots() == 5);
        const auto loop = refine_loop(a, inst, oracle, env, HardnessConfig{});
        CHECK_FALSE(loop.aligned);
        CHECK(loop.rounds == 3);
        CHECK(loop.recall_by_round.size() == 4);
        CHECK(loop.instruction.revision == 3);
        CHECK(loop.instruction.omitted_slots() == 2);
        for (std::size_t i = 1; i < loop.recall_by_round.size(); ++i) {
            CHECK(loop.recall_by_round[i] >= loop.recall_by_round[i - 1]);
        }
        CHECK(loop.recall == doctest::Approx(3.0 / 5.0));
    }

    TEST_CASE("recall above threshold with a gap is not aligned")
    {
        const auto env = hats_test::chain_env(5);
        ScriptedOracle oracle({.omission_count = 1, .repair_per_round = 1});
        const IntentSegment* intent = env.find_intent("chain");
        Path p{"c0", {}};
        for (const auto& id : intent->transition_ids) {
            const Transition* t = env.find_transition(id);
            p.steps.push_back({t->action, t->to, t->id});
        }
        const ReferenceSequence a = oracle.select_subsequence(p, env);
        HardnessConfig cfg;
        cfg.r_min = 0.1;
        const auto loop = refine_loop(a, oracle.synthesize_instruction(a, env), oracle, env, cfg);
        CHECK(loop.recall_by_round.front() < 1.0);
        CHECK(loop.rounds == 1);
        CHECK(loop.aligned);
        CHECK(loop.recall == 1.0);
    }

    TEST_CASE("runs are deterministic")
    {
        const auto env = clock_env();
        auto run = [&] {
            ScriptedOracle oracle({.omission_count = 1, .seed = 11});
            VectorSink sink;
            HardnessConfig cfg = small_config(50);
            cfg.seed = 11;
            auto report = synthesize_corpus(env, oracle, cfg, sink);
            return std::make_pair(report_to_json(report, false).dump(), sink.samples);
        };
        const auto a = run();
        const auto b = run();
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }

    TEST_CASE("errored iterations get no credit and no sample")
    {
        const auto env = clock_env();
        FlakyOracle oracle({1, 4});
        ActionTree tree;
        VectorSink sink;
        const auto report = synthesize_corpus(env, oracle, small_config(8), sink, {}, &tree);
        CHECK(report.errored_count == 2);
        CHECK(report.emitted_count == 6);
        REQUIRE(report.outcomes.size() == 8);
        CHECK(report.outcomes[1].error.has_value());
        CHECK(report.outcomes[1].oracle_error);
        CHECK_FALSE(report.outcomes[1].sample.has_value());
        CHECK(report.outcomes[1].error->find("service unavailable") != std::string::npos);
        std::uint64_t expected = 0;
        for (const auto& o : report.outcomes) {
            expected += o.error ? 0 : o.tree_path_length;
        }
        CHECK(total_visits(tree) == expected);
        CHECK(mean_outcome_recall(report) == 1.0);
    }

    TEST_CASE("a failing sink stops the run and keeps the partial report")
    {
        const auto env = clock_env();
        ScriptedOracle oracle;
        BrokenSink sink(3);
        try {
            synthesize_corpus(env, oracle, small_config(10), sink);
            FAIL("no failure");
        } catch (const SinkFailure& e) {
            CHECK(e.partial().emitted_count == 3);
            CHECK(e.partial().outcomes.size() == 4);
            CHECK(std::string(e.what()).find("disk full") != std::string::npos);
        }
    }

    TEST_CASE("invalid configuration is rejected before any work")
    {
        const auto env = clock_env();
        ScriptedOracle oracle;
        VectorSink sink;
        HardnessConfig cfg;
        cfg.iterations = 0;
        CHECK_THROWS_AS(synthesize_corpus(env, oracle, cfg, sink), ConfigError);
    }

    TEST_CASE("config json round trip")
    {
        HardnessConfig cfg;
        cfg.epsilon = 0.05;
        cfg.alpha = 2;
        cfg.f_max = 5;
        cfg.seed = 77;
        const auto back = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()));
        CHECK(back.epsilon == 0.05);
        CHECK(back.alpha == 2);
        CHECK(back.f_max == 5);
        CHECK(back.seed == 77);
        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"epsilon":1})")), ConfigError);
    }
}
