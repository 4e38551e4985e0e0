#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hats/env.hpp"

namespace hats {

using NodeId = std::size_t;

/// Q(v,a) and N(v,a) for one edge.
struct EdgeStats {
    double q_value = 0.0;
    std::uint64_t visit_count = 0;
};

struct Edge {
    UiAction action;
    NodeId child = 0;
    EdgeStats stats;
};

struct TreeNode {
    NodeId id = 0;
    StateId state;
    std::optional<UiAction> incoming_action;
    std::size_t depth = 0;
    std::vector<Edge> children;  // insertion order; ties in selection resolve to the earliest
    std::deque<UiAction> untried_actions;

    bool fully_expanded() const { return untried_actions.empty(); }
    /// N(v) = sum over outgoing edges of N(v,a).
    std::uint64_t visits() const;
    const Edge* find_edge(const UiAction& action) const;
    Edge* find_edge(const UiAction& action);
};

/// Search tree over one environment. Nodes are identified by their position
/// in the tree (path from the root), never merged by state.
class ActionTree {
public:
    /// The root for env's root state; created on first call, reused afterwards.
    NodeId get_or_create_root(const EnvironmentGraph& env);

    std::optional<NodeId> root() const { return root_; }
    const TreeNode& node(NodeId id) const { return nodes_.at(id); }
    TreeNode& node(NodeId id) { return nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    NodeId add_child(NodeId parent, const UiAction& action, StateId state, std::vector<UiAction> untried);

private:
    std::vector<TreeNode> nodes_;
    std::optional<NodeId> root_;
};

/// Score used by ucb_select: Q + c * sqrt(ln(N(v)+1) / (N(v,a)+1)).
double ucb_score(const EdgeStats& edge, std::uint64_t parent_visits, double c);

/// Index into node.children of the UCB argmax (first wins on ties).
/// Throws ContractViolation unless the node is fully expanded with children.
std::size_t ucb_select_index(const TreeNode& node, double c);
UiAction ucb_select(const TreeNode& node, double c);

/// Expands the first untried action of `node`: applies it, creates the
/// child and appends the step to `path`. Returns (child, action).
std::pair<NodeId, UiAction> expand(ActionTree& tree, NodeId node, const EnvironmentGraph& env, Path& path,
                                   std::size_t t_max);

/// Incremental-mean update of every edge along `path`, walked from the root.
/// All edges are checked before any is touched.
void backpropagate(ActionTree& tree, const Path& path, double reward);

/// Debug dump: nodes with depth, incoming action and per-edge (Q, N).
nlohmann::ordered_json dump_tree(const ActionTree& tree);

} // namespace hats
