#include "hats/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "hats/errors.hpp"

namespace hats {

void HardnessConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(what);
        }
    };
    require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be > 0");
    require(std::isfinite(alpha) && alpha > 0.0, "alpha must be > 0");
    require(std::isfinite(h_max) && h_max > 0.0, "h_max must be > 0");
    require(r_min > 0.0 && r_min <= 1.0, "r_min must lie in (0, 1]");
    require(f_max >= 1, "f_max must be a positive integer");
    require(std::isfinite(c_ucb) && c_ucb >= 0.0, "c_ucb must be >= 0");
    require(t_max >= 1, "t_max must be a positive integer");
    require(iterations >= 1, "iterations must be a positive integer");
}

namespace {

bool same_target(const std::optional<std::string>& a, const std::optional<std::string>& b, const UiState& s)
{
    if (!a && !b) {
        return true;
    }
    if (!a || !b) {
        return false;
    }
    if (*a == *b) {
        return true;
    }
    const UiElement* ea = s.find_element(*a);
    const UiElement* eb = s.find_element(*b);
    if (ea == nullptr || eb == nullptr || !ea->visible || !eb->visible) {
        return false;
    }
    const std::string la = normalize_text(ea->label);
    return !la.empty() && la == normalize_text(eb->label);
}

} // namespace

bool match_action(const UiAction& a, const UiAction& b, const UiState& s)
{
    if (a.kind != b.kind) {
        return false;
    }
    if (!same_target(a.target, b.target, s)) {
        return false;
    }
    if (a.kind == ActionKind::Type && normalize_text(a.text.value_or("")) != normalize_text(b.text.value_or(""))) {
        return false;
    }
    if (requires_direction(a.kind) && a.direction != b.direction) {
        return false;
    }
    return true;
}

AlignmentReport recall(const EnvironmentGraph& env, const ReferenceSequence& a_seq, const ExecutionSequence& b_seq)
{
    if (a_seq.steps.empty()) {
        throw UndefinedMetricError("recall is undefined for an empty reference sequence");
    }
    AlignmentReport report;
    for (std::size_t i = 0; i < a_seq.steps.size(); ++i) {
        const UiState& s = env.state(a_seq.pre_state(i));
        for (std::size_t j = 0; j < b_seq.steps.size(); ++j) {
            if (match_action(a_seq.steps[i].action, b_seq.steps[j].action, s)) {
                report.matched_reference_indices.insert(i);
                report.matched_execution_indices.insert(j);
            }
        }
    }
    report.recall = static_cast<double>(report.matched_reference_indices.size()) /
                    static_cast<double>(a_seq.steps.size());
    report.precision = b_seq.steps.empty() ? 1.0
                                           : static_cast<double>(report.matched_execution_indices.size()) /
                                                 static_cast<double>(b_seq.steps.size());
    return report;
}

double hardness(double r_alignment, const HardnessConfig& cfg)
{
    const double raw = std::pow(r_alignment + cfg.epsilon, -cfg.alpha);
    return std::clamp(raw, 0.0, cfg.h_max);
}

std::vector<SweepRow> sweep_hardness(const std::vector<std::pair<double, double>>& grid,
                                     const std::vector<double>& r_values, double h_max)
{
    if (grid.empty()) {
        throw ConfigError("hardness sweep needs a non-empty (epsilon, alpha) grid");
    }
    std::vector<SweepRow> rows;
    rows.reserve(grid.size() * r_values.size());
    for (const auto& [epsilon, alpha] : grid) {
        HardnessConfig cfg;
        cfg.epsilon = epsilon;
        cfg.alpha = alpha;
        cfg.h_max = h_max;
        cfg.validate();
        for (double r : r_values) {
            rows.push_back({epsilon, alpha, r, hardness(r, cfg)});
        }
    }
    return rows;
}

std::vector<std::pair<double, double>> default_hardness_grid()
{
    std::vector<std::pair<double, double>> grid;
    for (double eps : {0.01, 0.10}) {
        for (double alpha : {0.5, 1.0, 2.0}) {
            grid.emplace_back(eps, alpha);
        }
    }
    return grid;
}

} // namespace hats
