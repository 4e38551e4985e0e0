#include "hats/tree.hpp"

#include <cmath>

#include "hats/errors.hpp"
#include "hats/json_io.hpp"

namespace hats {

std::uint64_t TreeNode::visits() const
{
    std::uint64_t n = 0;
    for (const auto& e : children) {
        n += e.stats.visit_count;
    }
    return n;
}

const Edge* TreeNode::find_edge(const UiAction& action) const
{
    for (const auto& e : children) {
        if (e.action == action) {
            return &e;
        }
    }
    return nullptr;
}

Edge* TreeNode::find_edge(const UiAction& action)
{
    return const_cast<Edge*>(static_cast<const TreeNode&>(*this).find_edge(action));
}

NodeId ActionTree::get_or_create_root(const EnvironmentGraph& env)
{
    if (root_) {
        return *root_;
    }
    TreeNode root;
    root.id = 0;
    root.state = env.root_state();
    auto actions = valid_actions(env, root.state, {});
    root.untried_actions.assign(actions.begin(), actions.end());
    nodes_.push_back(std::move(root));
    root_ = 0;
    return 0;
}

NodeId ActionTree::add_child(NodeId parent, const UiAction& action, StateId state, std::vector<UiAction> untried)
{
    TreeNode child;
    child.id = nodes_.size();
    child.state = std::move(state);
    child.incoming_action = action;
    child.depth = node(parent).depth + 1;
    child.untried_actions.assign(untried.begin(), untried.end());
    const NodeId id = child.id;
    nodes_.push_back(std::move(child));
    node(parent).children.push_back(Edge{action, id, {}});
    return id;
}

double ucb_score(const EdgeStats& edge, std::uint64_t parent_visits, double c)
{
    const double bonus = std::sqrt(std::log(static_cast<double>(parent_visits) + 1.0) /
                                   (static_cast<double>(edge.visit_count) + 1.0));
    return edge.q_value + c * bonus;
}

std::size_t ucb_select_index(const TreeNode& node, double c)
{
    if (!node.fully_expanded()) {
        throw ContractViolation("ucb_select on node " + std::to_string(node.id) + " with untried actions");
    }
    if (node.children.empty()) {
        throw ContractViolation("ucb_select on leaf node " + std::to_string(node.id));
    }
    const std::uint64_t parent_visits = node.visits();
    std::size_t best = 0;
    double best_score = ucb_score(node.children[0].stats, parent_visits, c);
    for (std::size_t i = 1; i < node.children.size(); ++i) {
        const double s = ucb_score(node.children[i].stats, parent_visits, c);
        if (s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

UiAction ucb_select(const TreeNode& node, double c) { return node.children[ucb_select_index(node, c)].action; }

std::pair<NodeId, UiAction> expand(ActionTree& tree, NodeId node_id, const EnvironmentGraph& env, Path& path,
                                   std::size_t t_max)
{
    TreeNode& node = tree.node(node_id);
    if (node.fully_expanded()) {
        throw ContractViolation("expand on fully expanded node " + std::to_string(node_id));
    }
    if (path.size() >= t_max) {
        throw ContractViolation("expand at depth limit " + std::to_string(t_max));
    }
    const UiAction action = node.untried_actions.front();
    const Transition& t = resolve_transition(env, node.state, action, path.steps);
    node.untried_actions.pop_front();

    path.steps.push_back(Step{action, t.to, t.id});
    auto untried = valid_actions(env, t.to, path.steps);
    const NodeId child = tree.add_child(node_id, action, t.to, std::move(untried));
    return {child, action};
}

void backpropagate(ActionTree& tree, const Path& path, double reward)
{
    if (!tree.root()) {
        throw ContractViolation("backpropagate on an empty tree");
    }
    std::vector<Edge*> edges;
    edges.reserve(path.size());
    NodeId current = *tree.root();
    for (std::size_t i = 0; i < path.size(); ++i) {
        Edge* e = tree.node(current).find_edge(path.steps[i].action);
        if (e == nullptr) {
            throw ContractViolation("path step " + std::to_string(i) + " (" + path.steps[i].action.describe() +
                                    ") has no tree edge");
        }
        edges.push_back(e);
        current = e->child;
    }
    for (Edge* e : edges) {
        e->stats.visit_count += 1;
        e->stats.q_value += (reward - e->stats.q_value) / static_cast<double>(e->stats.visit_count);
    }
}

nlohmann::ordered_json dump_tree(const ActionTree& tree)
{
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes()) {
        nlohmann::ordered_json j;
        j["id"] = n.id;
        j["state"] = n.state;
        j["depth"] = n.depth;
        j["incoming_action"] = n.incoming_action ? action_to_json(*n.incoming_action) : nlohmann::ordered_json();
        nlohmann::ordered_json edges = nlohmann::ordered_json::array();
        for (const auto& e : n.children) {
            edges.push_back({{"action", action_to_json(e.action)},
                             {"child", e.child},
                             {"q", e.stats.q_value},
                             {"n", e.stats.visit_count}});
        }
        j["edges"] = std::move(edges);
        j["untried"] = n.untried_actions.size();
        nodes.push_back(std::move(j));
    }
    return {{"nodes", std::move(nodes)}};
}

} // namespace hats
