#include <doctest.h>

#include "hats/alignment.hpp"
#include "hats/errors.hpp"
#include "hats/rng.hpp"
#include "support.hpp"

using namespace hats;
using hats_test::clock_env;

namespace {

const char* kSaveDoc = R"({"root_state":"s","states":[
  {"id":"s","elements":[
     {"id":"e1","role":"button","label":"Save"},
     {"id":"e2","role":"button","label":" save"},
     {"id":"e3","role":"text-field","label":"Name"},
     {"id":"e4","role":"button","label":"Save","visible":false},
     {"id":"e5","role":"icon","label":""},
     {"id":"e6","role":"icon","label":""}]},
  {"id":"t"}],
 "transitions":[
  {"id":"t1","from":"s","action":{"kind":"tap","target":"e1"},"to":"t"},
  {"id":"t2","from":"s","action":{"kind":"type","target":"e3","text":"x"},"to":"s"},
  {"id":"t3","from":"s","action":{"kind":"back"},"to":"t"}]})";

} // namespace

TEST_SUITE("alignment")
{
    TEST_CASE("match rule")
    {
        const auto env = load_environment_string(kSaveDoc);
        const UiState& s = env.state("s");
        CHECK(match_action(UiAction::tap("e1"), UiAction::tap("e1"), s));
        CHECK(match_action(UiAction::tap("e1"), UiAction::tap("e2"), s));
        CHECK_FALSE(match_action(UiAction::tap("e1"), UiAction::tap("e4"), s));  // hidden twin
        CHECK_FALSE(match_action(UiAction::tap("e5"), UiAction::tap("e6"), s));  // empty labels
        CHECK_FALSE(match_action(UiAction::tap("e1"), UiAction::long_press("e1"), s));
        CHECK(match_action(UiAction::type("e3", "Alice"), UiAction::type("e3", "alice "), s));
        CHECK_FALSE(match_action(UiAction::type("e3", "Alice"), UiAction::type("e3", "Bob"), s));
        CHECK(match_action(UiAction::back(), UiAction::back(), s));
        CHECK_FALSE(match_action(UiAction::scroll(Direction::Up), UiAction::scroll(Direction::Down), s));
        CHECK_FALSE(match_action(UiAction::scroll(Direction::Up, "e1"), UiAction::scroll(Direction::Up), s));
    }

    TEST_CASE("identity and empty execution")
    {
        const auto env = load_environment_string(kSaveDoc);
        ReferenceSequence a{"s", {{UiAction::type("e3", "x"), "s", "t2"}, {UiAction::tap("e1"), "t", "t1"}}, {}};
        ExecutionSequence same{"s", a.steps, true, {}};
        auto r = recall(env, a, same);
        CHECK(r.recall == 1.0);
        CHECK(r.precision == 1.0);

        ExecutionSequence none{"s", {}, false, {}};
        r = recall(env, a, none);
        CHECK(r.recall == 0.0);
        CHECK(r.precision == 1.0);
        CHECK(r.matched_reference_indices.empty());
    }

    TEST_CASE("worked example: two of three")
    {
        const auto env = load_environment_string(kSaveDoc);
        const ReferenceSequence a{
            "s", {{UiAction::tap("e1"), "s", ""}, {UiAction::type("e3", "x"), "s", ""}, {UiAction::back(), "t", ""}}, {}};
        ExecutionSequence b{"s", {{UiAction::tap("e1"), "t", ""}, {UiAction::back(), "t", ""}, {UiAction::back(), "t", ""}},
                            true, {}};
        const auto r = recall(env, a, b);
        CHECK(r.recall == doctest::Approx(2.0 / 3.0));
        CHECK(r.precision == 1.0);
        CHECK(r.matched_reference_indices == std::set<std::size_t>{0, 2});
        CHECK(r.matched_execution_indices == std::set<std::size_t>{0, 1, 2});
    }

    TEST_CASE("empty reference is undefined")
    {
        const auto env = load_environment_string(kSaveDoc);
        CHECK_THROWS_AS(recall(env, ReferenceSequence{"s", {}, {}}, ExecutionSequence{"s", {}, true, {}}),
                        UndefinedMetricError);
    }

    TEST_CASE("random pairs agree with the double-loop count")
    {
        const auto env = clock_env();
        Rng rng(2024);
        for (int trial = 0; trial < 400; ++trial) {
            const auto& states = env.states();
            ReferenceSequence a;
            a.start_state = states[rng.uniform_index(states.size())].id;
            std::string pre = a.start_state;
            const std::size_t la = 1 + rng.uniform_index(6);
            for (std::size_t i = 0; i < la; ++i) {
                const std::string post = states[rng.uniform_index(states.size())].id;
                a.steps.push_back({hats_test::random_action(rng, env, env.state(pre)), post, ""});
                pre = post;
            }
            ExecutionSequence b;
            b.start_state = a.start_state;
            const std::size_t lb = rng.uniform_index(7);
            for (std::size_t i = 0; i < lb; ++i) {
                const auto& s = states[rng.uniform_index(states.size())];
                b.steps.push_back({hats_test::random_action(rng, env, s), s.id, ""});
            }
            const auto got = recall(env, a, b);
            const auto want = hats_test::oracle_counts(env, a.start_state, a.steps, b.steps);
            CHECK(got.matched_reference_indices.size() == want.matched_ref);
            CHECK(got.matched_execution_indices.size() == want.matched_exec);
            CHECK(got.recall == static_cast<double>(want.matched_ref) / static_cast<double>(want.ref_len));

            // Appending to B never lowers recall.
            ExecutionSequence longer = b;
            longer.steps.push_back({hats_test::random_action(rng, env, env.state(a.start_state)), "s0", ""});
            CHECK(recall(env, a, longer).recall >= got.recall);
            CHECK(got.recall >= 0.0);
            CHECK(got.recall <= 1.0);
            CHECK(got.precision >= 0.0);
            CHECK(got.precision <= 1.0);
        }
    }

    TEST_CASE("hardness values")
    {
        HardnessConfig cfg;
        CHECK(hardness(0.0, cfg) == 100.0);
        CHECK(hardness(1.0, cfg) == doctest::Approx(0.9900990099009901).epsilon(1e-15));
        cfg.epsilon = 0.1;
        cfg.alpha = 2.0;
        CHECK(hardness(0.5, cfg) == doctest::Approx(2.777777777777778).epsilon(1e-14));
        cfg.epsilon = 0.01;
        cfg.alpha = 0.5;
        CHECK(hardness(0.0, cfg) == doctest::Approx(10.0).epsilon(1e-14));
    }

    TEST_CASE("hardness is anti-monotone and bounded")
    {
        for (const auto& [eps, alpha] : default_hardness_grid()) {
            HardnessConfig cfg;
            cfg.epsilon = eps;
            cfg.alpha = alpha;
            double prev = hardness(0.0, cfg);
            for (int i = 1; i <= 100; ++i) {
                const double h = hardness(i / 100.0, cfg);
                CHECK(h <= prev);
                if (prev < cfg.h_max) {
                    CHECK(h < prev);
                }
                CHECK(h > 0.0);
                CHECK(h <= cfg.h_max);
                prev = h;
            }
        }
    }

    TEST_CASE("sweep grid")
    {
        const auto grid = default_hardness_grid();
        REQUIRE(grid.size() == 6);
        const auto rows = sweep_hardness(grid, {0.0, 0.5, 1.0}, 100.0);
        REQUIRE(rows.size() == 18);
        for (const auto& row : rows) {
            CHECK(row.hardness ==
                  doctest::Approx(hats_test::oracle_hardness(row.r_alignment, row.epsilon, row.alpha, 100.0))
                      .epsilon(1e-12));
        }
        const auto one = sweep_hardness({{0.01, 1.0}}, {1.0}, 100.0);
        CHECK(one.at(0).hardness == doctest::Approx(0.9900990099009901));
        CHECK(sweep_hardness({{0.01, 0.5}}, {0.0}, 100.0).at(0).hardness == doctest::Approx(10.0));
        CHECK_THROWS_AS(sweep_hardness({}, {0.0}, 100.0), ConfigError);
    }

    TEST_CASE("config bounds")
    {
        HardnessConfig ok;
        CHECK_NOTHROW(ok.validate());
        auto bad = [](auto mutate) {
            HardnessConfig c;
            mutate(c);
            return c;
        };
        CHECK_THROWS_AS(bad([](auto& c) { c.epsilon = 0; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.alpha = -1; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.h_max = 0; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.r_min = 0; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.r_min = 1.5; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.f_max = 0; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.c_ucb = -0.1; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.t_max = 0; }).validate(), ConfigError);
        CHECK_THROWS_AS(bad([](auto& c) { c.iterations = 0; }).validate(), ConfigError);
    }
}
