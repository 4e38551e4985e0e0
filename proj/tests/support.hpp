#pragma once

// Shared fixtures and independent reference computations for the tests.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hats/alignment.hpp"
#include "hats/env.hpp"
#include "hats/rng.hpp"

namespace hats_test {

inline std::string data_path(const std::string& rel) { return std::string(HATS_DATA_DIR) + "/" + rel; }
inline std::string test_data_path(const std::string& rel) { return std::string(HATS_TEST_DATA_DIR) + "/" + rel; }

inline hats::EnvironmentGraph clock_env()
{
    return hats::load_environment_file(data_path("environments/clock_app.json"));
}

inline hats::EnvironmentGraph fork_env()
{
    return hats::load_environment_file(data_path("environments/two_subtree.json"));
}

/// States c0..cn in a line; step i taps button "Step i" and moves on. One
/// intent "chain" covering all n steps.
inline hats::EnvironmentGraph chain_env(int n)
{
    std::ostringstream j;
    j << R"({"root_state":"c0","states":[)";
    for (int i = 0; i <= n; ++i) {
        j << (i ? "," : "") << R"({"id":"c)" << i << R"(","app":"Chain","category":"Line","elements":[)";
        if (i < n) {
            j << R"({"id":"b)" << i << R"(","role":"button","label":"Step )" << i << R"("})";
        }
        j << "]}";
    }
    j << R"(],"transitions":[)";
    for (int i = 0; i < n; ++i) {
        j << (i ? "," : "") << R"({"id":"t)" << i << R"(","from":"c)" << i << R"(","action":{"kind":"tap","target":"b)"
          << i << R"("},"to":"c)" << i + 1 << R"("})";
    }
    j << R"(],"intents":[{"id":"chain","description":"walk the line","category":"Line","transitions":[)";
    for (int i = 0; i < n; ++i) {
        j << (i ? "," : "") << "\"t" << i << "\"";
    }
    j << "]}]}";
    return hats::load_environment_string(j.str(), "chain");
}

// ---------------------------------------------------------------------------
// Independent matcher and recall, written directly from the metric's
// definition with no shared helpers.
// ---------------------------------------------------------------------------

inline std::string fold(const std::string& s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    }
    return out;
}

inline bool oracle_match(const hats::UiAction& a, const hats::UiAction& b, const hats::UiState& s)
{
    if (a.kind != b.kind) {
        return false;
    }
    if (a.target.has_value() != b.target.has_value()) {
        return false;
    }
    if (a.target && *a.target != *b.target) {
        std::string la;
        std::string lb;
        bool fa = false;
        bool fb = false;
        for (const auto& e : s.elements) {
            if (e.id == *a.target && e.visible) {
                la = fold(e.label);
                fa = true;
            }
            if (e.id == *b.target && e.visible) {
                lb = fold(e.label);
                fb = true;
            }
        }
        if (!fa || !fb || la.empty() || la != lb) {
            return false;
        }
    }
    if (a.kind == hats::ActionKind::Type && fold(a.text.value_or("")) != fold(b.text.value_or(""))) {
        return false;
    }
    if ((a.kind == hats::ActionKind::Scroll || a.kind == hats::ActionKind::Swipe) && a.direction != b.direction) {
        return false;
    }
    return true;
}

struct Counts {
    std::size_t matched_ref = 0;
    std::size_t ref_len = 0;
    std::size_t matched_exec = 0;
    std::size_t exec_len = 0;
};

/// Double loop over (A, B) with each A action judged in its own pre-state.
inline Counts oracle_counts(const hats::EnvironmentGraph& env, const std::string& start,
                            const std::vector<hats::Step>& a, const std::vector<hats::Step>& b)
{
    Counts c;
    c.ref_len = a.size();
    c.exec_len = b.size();
    std::vector<bool> exec_hit(b.size(), false);
    std::string pre = start;
    for (const auto& ra : a) {
        const hats::UiState& s = env.state(pre);
        bool hit = false;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (oracle_match(ra.action, b[j].action, s)) {
                hit = true;
                exec_hit[j] = true;
            }
        }
        c.matched_ref += hit ? 1 : 0;
        pre = ra.state;
    }
    c.matched_exec = static_cast<std::size_t>(std::count(exec_hit.begin(), exec_hit.end(), true));
    return c;
}

/// Hardness straight from its closed form.
inline double oracle_hardness(double r, double eps, double alpha, double h_max)
{
    const double v = 1.0 / std::pow(r + eps, alpha);
    return v > h_max ? h_max : v;
}

/// Random action drawn from the transitions and elements of `s`, with some
/// label-alias and text-case noise.
inline hats::UiAction random_action(hats::Rng& rng, const hats::EnvironmentGraph& env, const hats::UiState& s)
{
    using hats::ActionKind;
    const auto out = env.outgoing(s.id);
    if (!out.empty() && rng.uniform_index(3) != 0) {
        hats::UiAction a = env.transitions()[out[rng.uniform_index(out.size())]].action;
        if (a.text && rng.uniform_index(2) == 0) {
            std::string t = *a.text;
            std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::toupper(ch); });
            a.text = " " + t;
        }
        return a;
    }
    static constexpr ActionKind kinds[] = {ActionKind::Tap, ActionKind::Type, ActionKind::Scroll,
                                           ActionKind::Back, ActionKind::LongPress, ActionKind::Swipe};
    hats::UiAction a;
    a.kind = kinds[rng.uniform_index(6)];
    if (a.kind != ActionKind::Back && !s.elements.empty() &&
        (hats::requires_target(a.kind) || rng.uniform_index(2) == 0)) {
        a.target = s.elements[rng.uniform_index(s.elements.size())].id;
    }
    if (hats::requires_target(a.kind) && !a.target) {
        a.target = "ghost";
    }
    if (a.kind == ActionKind::Type) {
        static const char* texts[] = {"London", "london ", "6", "5", "x"};
        a.text = texts[rng.uniform_index(5)];
    }
    if (hats::requires_direction(a.kind)) {
        a.direction = static_cast<hats::Direction>(rng.uniform_index(4));
    }
    return a;
}

} // namespace hats_test
