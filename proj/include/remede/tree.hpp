#pragma once

#include <random>
#include <vector>

#include "remede/tape.hpp"
#include "remede/tensor.hpp"

namespace remede {

inline constexpr int kMaxDepth = 12;

// Breadth-first path tables for a fully-grown tree of depth d.
// node_index[l][j] is the internal node on leaf l's path at depth j,
// direction[l][j] is 0 for left, 1 for right. Leaf l's direction row is the
// d-bit binary code of l, most significant bit first.
struct PathTables {
    int depth = 0;
    std::vector<std::vector<int>> node_index;
    std::vector<std::vector<int>> direction;
};

PathTables build_path_tables(int depth);

// Shared per-depth tables, built once.
const PathTables& path_tables(int depth);

inline int internal_count(int depth) { return (1 << depth) - 1; }
inline int leaf_count(int depth) { return 1 << depth; }

// One leaf's learnable bundle.
struct LeafPayload {
    std::vector<double> class_logits;   // n_classes
    std::vector<double> gate_logits;    // n_m
    std::vector<double> input_weights;  // n_m x n_x, row-major

    bool operator==(const LeafPayload&) const = default;
};

// All learnable parameters of one tree over the augmented input space
// (n_x input features followed by n_m memory features).
struct TreeParams {
    int depth = 0;
    int n_x = 0, n_m = 0, n_classes = 0;

    Tensor thresholds;      // [internal, n_x + n_m]
    Tensor feature_logits;  // [internal, n_x + n_m]
    Tensor leaf_class;      // [leaves, n_classes]
    Tensor leaf_gate;       // [leaves, n_m]
    Tensor leaf_weight;     // [leaves, n_m * n_x]

    int n_features() const { return n_x + n_m; }
    int internals() const { return internal_count(depth); }
    int leaves() const { return leaf_count(depth); }

    LeafPayload payload(int leaf) const;
    void set_payload(int leaf, const LeafPayload& p);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

// Random initialization. Thresholds for input features are drawn uniformly in
// the per-feature empirical range of `warmup_inputs` (rows of augmented or raw
// input vectors); memory-feature thresholds in [-1, 1]. Feature logits N(0,1),
// class logits N(0,0.1), gate logits 0, input weights N(0,0.5).
TreeParams init_tree_params(int depth, int n_x, int n_m, int n_classes,
                            const std::vector<std::vector<double>>& warmup_inputs,
                            std::mt19937_64& rng);

// --- tape-based dense formulation ---

// Single split: round_st(sigmoid(iota.x - iota.tau)) for one internal node.
Var split_eval(Tape& t, Var x_aug, int node, Var thresholds, Var feature_logits);

// Indicator of one leaf: product over depths of the split factor, where a
// direction-1 (right) step contributes s and a direction-0 step (1 - s).
Var leaf_indicator(Tape& t, Var x_aug, int leaf, Var thresholds, Var feature_logits,
                   const PathTables& paths);

// All leaf indicators from the vector of split values, as one fused op.
Var leaf_indicators(Tape& t, Var splits, const PathTables& paths);

// Dense forward products of a tree bound on a tape. `iota` and `theta`
// (row_dot(iota, thresholds)) depend only on parameters, so callers compute
// them once per tape and reuse them across timesteps and sequences.
struct TreeVars {
    Var thresholds, feature_logits, leaf_class, leaf_gate, leaf_weight;
    Var iota;   // rowwise_hardmax_st(feature_logits)
    Var theta;  // row_dot(iota, thresholds)
};

TreeVars bind_tree(Tape& t, const TreeParams& params);

struct DenseForward {
    Var indicators;    // [leaves], hard one-hot in hard mode
    Var class_logits;  // [n_classes]
    Var gate_logits;   // [n_m]
    Var input_weight;  // [n_m, n_x]
};

DenseForward forward_dense(Tape& t, Var x_aug, const TreeVars& tv,
                           const TreeParams& params);

// --- tape-free hard traversal ---

struct TraversalResult {
    int leaf = 0;
    std::vector<int> visited;  // internal nodes on the path, root first
};

// Iterative root-to-leaf walk with the same hard split rule as the dense pass.
TraversalResult forward_traversal(const TreeParams& params,
                                  const std::vector<double>& x_aug);

}  // namespace remede
