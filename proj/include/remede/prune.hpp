#pragma once

#include <memory>
#include <string>
#include <vector>

#include "remede/cell.hpp"

namespace remede {

// Explicit (no longer fully-grown) tree produced by pruning.
struct TreeNode {
    bool is_leaf = false;
    // internal
    int feature = -1;
    double threshold = 0.0;
    // leaf
    LeafPayload payload;
    std::unique_ptr<TreeNode> left, right;
};

struct PrunedTree {
    std::unique_ptr<TreeNode> root;
    int n_x = 0, n_m = 0, n_classes = 0;
};

// Runs the recurrent model over the dataset, drops subtrees never visited at
// any timestep, then bottom-up merges sibling leaves with exactly equal
// payloads. The result selects the same payload as the original tree on every
// timestep of the dataset.
PrunedTree prune(const RemedeCell& cell, const std::vector<SequenceExample>& dataset);

// Total node count (internal + leaf).
int tree_size(const PrunedTree& tree);

// Hard recurrent inference with the pruned tree.
HardRun run_hard(const PrunedTree& tree, const SequenceExample& seq);

// Exact per-timestep leaf-payload agreement between cell and pruned tree.
bool prune_sound(const RemedeCell& cell, const PrunedTree& tree,
                 const std::vector<SequenceExample>& dataset);

// format: "dot" or "json". Split conditions are labeled x_i / m_i against the
// threshold; leaves show the argmax class, gate bits, and weight rows.
std::string export_graph(const PrunedTree& tree, const std::string& format);

// Parses the JSON export back into a tree (round-trip of the structure).
PrunedTree import_graph_json(const std::string& text);

}  // namespace remede
