#include "remede/prune.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace remede {

namespace {

struct VisitSets {
    std::unordered_set<int> internals;
    std::unordered_set<int> leaves;
};

VisitSets collect_visits(const RemedeCell& cell,
                         const std::vector<SequenceExample>& dataset) {
    VisitSets v;
    for (const auto& seq : dataset) {
        HardRun run = run_hard(cell, seq, /*record_visits=*/true);
        for (int leaf : run.leaf_per_step) v.leaves.insert(leaf);
        for (const auto& path : run.visited)
            for (int node : path) v.internals.insert(node);
    }
    return v;
}

std::unique_ptr<TreeNode> make_leaf(const TreeParams& p, int leaf) {
    auto n = std::make_unique<TreeNode>();
    n->is_leaf = true;
    n->payload = p.payload(leaf);
    return n;
}

bool child_visited(const TreeParams& p, int child, const VisitSets& v) {
    if (child >= p.internals()) return v.leaves.count(child - p.internals()) > 0;
    return v.internals.count(child) > 0;
}

std::unique_ptr<TreeNode> build_visited(const TreeParams& p, int node,
                                        const VisitSets& v) {
    if (node >= p.internals()) return make_leaf(p, node - p.internals());
    const int left = 2 * node + 1, right = 2 * node + 2;
    const bool lv = child_visited(p, left, v);
    const bool rv = child_visited(p, right, v);
    if (lv && !rv) return build_visited(p, left, v);
    if (rv && !lv) return build_visited(p, right, v);
    // both visited (both unvisited cannot happen for a visited node)
    auto n = std::make_unique<TreeNode>();
    const int nf = p.n_features();
    n->feature = static_cast<int>(
        argmax_lowest(p.feature_logits.values.data() + node * nf, nf));
    n->threshold = p.thresholds.values[node * nf + n->feature];
    n->left = build_visited(p, left, v);
    n->right = build_visited(p, right, v);
    return n;
}

// Post-order: collapse internal nodes whose children are leaves with exactly
// equal payloads.
void merge_equal_leaves(std::unique_ptr<TreeNode>& node) {
    if (!node || node->is_leaf) return;
    merge_equal_leaves(node->left);
    merge_equal_leaves(node->right);
    if (node->left->is_leaf && node->right->is_leaf &&
        node->left->payload == node->right->payload) {
        node = std::move(node->left);
    }
}

const TreeNode* traverse(const TreeNode* node, const std::vector<double>& x_aug) {
    while (!node->is_leaf) {
        const bool right = hard_split_true(x_aug[node->feature] - node->threshold);
        node = right ? node->right.get() : node->left.get();
    }
    return node;
}

int count_nodes(const TreeNode* n) {
    if (!n) return 0;
    return 1 + count_nodes(n->left.get()) + count_nodes(n->right.get());
}

}  // namespace

PrunedTree prune(const RemedeCell& cell, const std::vector<SequenceExample>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("prune: empty dataset");
    const TreeParams& p = cell.tree;
    VisitSets v = collect_visits(cell, dataset);
    PrunedTree t;
    t.n_x = p.n_x;
    t.n_m = p.n_m;
    t.n_classes = p.n_classes;
    t.root = build_visited(p, 0, v);
    merge_equal_leaves(t.root);
    return t;
}

int tree_size(const PrunedTree& tree) { return count_nodes(tree.root.get()); }

HardRun run_hard(const PrunedTree& tree, const SequenceExample& seq) {
    HardRun r;
    const int n_x = tree.n_x, n_m = tree.n_m;
    std::vector<double> x_aug(n_x + n_m, 0.0);
    std::vector<double> m(n_m, 0.0);
    for (std::size_t step = 0; step < seq.length(); ++step) {
        for (int f = 0; f < n_x; ++f) x_aug[f] = seq.inputs.at(step, f);
        for (int i = 0; i < n_m; ++i) x_aug[n_x + i] = m[i];
        const TreeNode* leaf = traverse(tree.root.get(), x_aug);
        r.pred_class.push_back(static_cast<int>(argmax_lowest(
            leaf->payload.class_logits.data(), leaf->payload.class_logits.size())));
        for (int i = 0; i < n_m; ++i) {
            const double gate = std::round(sigmoid_scalar(leaf->payload.gate_logits[i]));
            if (gate == 0.0) continue;
            double dot = 0.0;
            for (int f = 0; f < n_x; ++f) dot += leaf->payload.input_weights[i * n_x + f] * x_aug[f];
            m[i] += gate * std::tanh(dot);
        }
        r.m_trace.push_back(m);
    }
    return r;
}

bool prune_sound(const RemedeCell& cell, const PrunedTree& tree,
                 const std::vector<SequenceExample>& dataset) {
    for (const auto& seq : dataset) {
        HardRun a = run_hard(cell, seq);
        HardRun b = run_hard(tree, seq);
        if (a.pred_class != b.pred_class) return false;
        if (a.m_trace != b.m_trace) return false;
    }
    return true;
}

namespace {

std::string feature_label(int f, int n_x) {
    return f < n_x ? "x_" + std::to_string(f) : "m_" + std::to_string(f - n_x);
}

nlohmann::json node_json(const TreeNode* n, int n_x) {
    nlohmann::json j;
    if (n->is_leaf) {
        j["type"] = "leaf";
        j["class"] = class_value(static_cast<int>(argmax_lowest(
            n->payload.class_logits.data(), n->payload.class_logits.size())));
        j["class_logits"] = n->payload.class_logits;
        j["gate_logits"] = n->payload.gate_logits;
        nlohmann::json gates = nlohmann::json::array();
        for (double g : n->payload.gate_logits)
            gates.push_back(static_cast<int>(std::round(sigmoid_scalar(g))));
        j["gates"] = std::move(gates);
        const int n_m = static_cast<int>(n->payload.gate_logits.size());
        const int nx = n_m ? static_cast<int>(n->payload.input_weights.size()) / n_m : 0;
        nlohmann::json w = nlohmann::json::array();
        for (int i = 0; i < n_m; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int f = 0; f < nx; ++f) row.push_back(n->payload.input_weights[i * nx + f]);
            w.push_back(std::move(row));
        }
        j["input_weights"] = std::move(w);
    } else {
        j["type"] = "split";
        j["feature"] = feature_label(n->feature, n_x);
        j["feature_index"] = n->feature;
        j["threshold"] = n->threshold;
        j["left"] = node_json(n->left.get(), n_x);
        j["right"] = node_json(n->right.get(), n_x);
    }
    return j;
}

void node_dot(const TreeNode* n, int n_x, int& counter, std::ostringstream& os,
              int parent, const char* edge) {
    const int id = counter++;
    if (n->is_leaf) {
        std::ostringstream label;
        label << "class=" << class_value(static_cast<int>(argmax_lowest(
                     n->payload.class_logits.data(), n->payload.class_logits.size())));
        label << "\\ngates=[";
        for (std::size_t i = 0; i < n->payload.gate_logits.size(); ++i)
            label << (i ? "," : "")
                  << static_cast<int>(std::round(sigmoid_scalar(n->payload.gate_logits[i])));
        label << "]";
        const int n_m = static_cast<int>(n->payload.gate_logits.size());
        const int nx = n_m ? static_cast<int>(n->payload.input_weights.size()) / n_m : 0;
        label << "\\nW=[";
        for (int i = 0; i < n_m; ++i) {
            label << (i ? ";" : "") << "[";
            for (int f = 0; f < nx; ++f) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.3g", n->payload.input_weights[i * nx + f]);
                label << (f ? "," : "") << buf;
            }
            label << "]";
        }
        label << "]";
        os << "  n" << id << " [shape=box, label=\"" << label.str() << "\"];\n";
    } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", n->threshold);
        os << "  n" << id << " [label=\"" << feature_label(n->feature, n_x)
           << " >= " << buf << "\"];\n";
    }
    if (parent >= 0)
        os << "  n" << parent << " -> n" << id << " [label=\"" << edge << "\"];\n";
    if (!n->is_leaf) {
        node_dot(n->left.get(), n_x, counter, os, id, "no");
        node_dot(n->right.get(), n_x, counter, os, id, "yes");
    }
}

std::unique_ptr<TreeNode> node_from_json(const nlohmann::json& j) {
    auto n = std::make_unique<TreeNode>();
    const std::string type = j.at("type").get<std::string>();
    if (type == "leaf") {
        n->is_leaf = true;
        n->payload.class_logits = j.at("class_logits").get<std::vector<double>>();
        n->payload.gate_logits = j.at("gate_logits").get<std::vector<double>>();
        for (const auto& row : j.at("input_weights"))
            for (const auto& v : row) n->payload.input_weights.push_back(v.get<double>());
    } else if (type == "split") {
        n->feature = j.at("feature_index").get<int>();
        n->threshold = j.at("threshold").get<double>();
        n->left = node_from_json(j.at("left"));
        n->right = node_from_json(j.at("right"));
    } else {
        throw std::runtime_error("import_graph_json: unknown node type '" + type + "'");
    }
    return n;
}

}  // namespace

std::string export_graph(const PrunedTree& tree, const std::string& format) {
    if (format == "json") {
        nlohmann::json j;
        j["n_x"] = tree.n_x;
        j["n_m"] = tree.n_m;
        j["n_classes"] = tree.n_classes;
        j["root"] = node_json(tree.root.get(), tree.n_x);
        return j.dump(2) + "\n";
    }
    if (format == "dot") {
        std::ostringstream os;
        os << "digraph remede {\n";
        int counter = 0;
        node_dot(tree.root.get(), tree.n_x, counter, os, -1, "");
        os << "}\n";
        return os.str();
    }
    throw std::invalid_argument("export_graph: unknown format '" + format +
                                "' (expected dot or json)");
}

PrunedTree import_graph_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PrunedTree t;
    t.n_x = j.at("n_x").get<int>();
    t.n_m = j.at("n_m").get<int>();
    t.n_classes = j.at("n_classes").get<int>();
    t.root = node_from_json(j.at("root"));
    return t;
}

}  // namespace remede
