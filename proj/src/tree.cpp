#include "remede/tree.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace remede {

PathTables build_path_tables(int depth) {
    if (depth < 1 || depth > kMaxDepth)
        throw std::invalid_argument("build_path_tables: depth must be in [1, 12]");
    PathTables p;
    p.depth = depth;
    const int leaves = leaf_count(depth);
    p.node_index.assign(leaves, std::vector<int>(depth));
    p.direction.assign(leaves, std::vector<int>(depth));
    for (int l = 0; l < leaves; ++l) {
        int node = 0;
        for (int j = 0; j < depth; ++j) {
            const int bit = (l >> (depth - 1 - j)) & 1;
            p.node_index[l][j] = node;
            p.direction[l][j] = bit;
            node = 2 * node + 1 + bit;
        }
    }
    return p;
}

const PathTables& path_tables(int depth) {
    static std::array<PathTables, kMaxDepth + 1> cache;
    static std::once_flag flags[kMaxDepth + 1];
    if (depth < 1 || depth > kMaxDepth)
        throw std::invalid_argument("path_tables: depth must be in [1, 12]");
    std::call_once(flags[depth], [depth] { cache[depth] = build_path_tables(depth); });
    return cache[depth];
}

LeafPayload TreeParams::payload(int leaf) const {
    LeafPayload p;
    p.class_logits.assign(leaf_class.values.begin() + leaf * n_classes,
                          leaf_class.values.begin() + (leaf + 1) * n_classes);
    p.gate_logits.assign(leaf_gate.values.begin() + leaf * n_m,
                         leaf_gate.values.begin() + (leaf + 1) * n_m);
    p.input_weights.assign(leaf_weight.values.begin() + leaf * n_m * n_x,
                           leaf_weight.values.begin() + (leaf + 1) * n_m * n_x);
    return p;
}

void TreeParams::set_payload(int leaf, const LeafPayload& p) {
    std::copy(p.class_logits.begin(), p.class_logits.end(),
              leaf_class.values.begin() + leaf * n_classes);
    std::copy(p.gate_logits.begin(), p.gate_logits.end(),
              leaf_gate.values.begin() + leaf * n_m);
    std::copy(p.input_weights.begin(), p.input_weights.end(),
              leaf_weight.values.begin() + leaf * n_m * n_x);
}

std::vector<Tensor*> TreeParams::parameters() {
    return {&thresholds, &feature_logits, &leaf_class, &leaf_gate, &leaf_weight};
}

std::vector<const Tensor*> TreeParams::parameters() const {
    return {&thresholds, &feature_logits, &leaf_class, &leaf_gate, &leaf_weight};
}

TreeParams init_tree_params(int depth, int n_x, int n_m, int n_classes,
                            const std::vector<std::vector<double>>& warmup_inputs,
                            std::mt19937_64& rng) {
    if (depth < 1 || depth > kMaxDepth)
        throw std::invalid_argument("init_tree_params: depth out of range");
    TreeParams p;
    p.depth = depth;
    p.n_x = n_x;
    p.n_m = n_m;
    p.n_classes = n_classes;
    const int ni = p.internals();
    const int nl = p.leaves();
    const int n = p.n_features();

    std::vector<double> lo(n, -1.0), hi(n, 1.0);
    for (int f = 0; f < n_x; ++f) {
        double mn = 0.0, mx = 0.0;
        bool first = true;
        for (const auto& xrow : warmup_inputs) {
            if (f >= static_cast<int>(xrow.size())) continue;
            const double v = xrow[f];
            if (first || v < mn) mn = v;
            if (first || v > mx) mx = v;
            first = false;
        }
        if (!first && mx > mn) {
            lo[f] = mn;
            hi[f] = mx;
        }
    }

    std::normal_distribution<double> n01(0.0, 1.0);
    std::normal_distribution<double> cls(0.0, 0.1);
    std::normal_distribution<double> wts(0.0, 0.5);

    p.thresholds = Tensor::zeros({(std::size_t)ni, (std::size_t)n});
    for (int i = 0; i < ni; ++i)
        for (int f = 0; f < n; ++f) {
            std::uniform_real_distribution<double> u(lo[f], hi[f]);
            p.thresholds.at(i, f) = u(rng);
        }

    p.feature_logits = Tensor::zeros({(std::size_t)ni, (std::size_t)n});
    for (double& v : p.feature_logits.values) v = n01(rng);

    p.leaf_class = Tensor::zeros({(std::size_t)nl, (std::size_t)n_classes});
    for (double& v : p.leaf_class.values) v = cls(rng);

    p.leaf_gate = Tensor::zeros({(std::size_t)nl, (std::size_t)n_m});

    p.leaf_weight = Tensor::zeros({(std::size_t)nl, (std::size_t)(n_m * n_x)});
    for (double& v : p.leaf_weight.values) v = wts(rng);

    return p;
}

Var split_eval(Tape& t, Var x_aug, int node, Var thresholds, Var feature_logits) {
    Var iota = hardmax_st(t, row(t, feature_logits, node));
    Var tau = row(t, thresholds, node);
    Var ix = sum(t, mul(t, iota, x_aug));
    Var itau = sum(t, mul(t, iota, tau));
    return round_st(t, sigmoid(t, sub(t, ix, itau)));
}

Var leaf_indicator(Tape& t, Var x_aug, int leaf, Var thresholds, Var feature_logits,
                   const PathTables& paths) {
    if (leaf < 0 || leaf >= leaf_count(paths.depth))
        throw std::invalid_argument("leaf_indicator: leaf out of range");
    Var prod;
    Var one = t.input(Tensor::scalar(1.0));
    for (int j = 0; j < paths.depth; ++j) {
        Var s = split_eval(t, x_aug, paths.node_index[leaf][j], thresholds, feature_logits);
        Var factor = paths.direction[leaf][j] ? s : sub(t, one, s);
        prod = (j == 0) ? factor : mul(t, prod, factor);
    }
    return prod;
}

Var leaf_indicators(Tape& t, Var splits, const PathTables& paths) {
    const Tensor& sv = t.val(splits);
    const int leaves = leaf_count(paths.depth);
    const int depth = paths.depth;
    if (sv.size() != static_cast<std::size_t>(internal_count(depth)))
        throw std::invalid_argument("leaf_indicators: split vector size mismatch");

    Tensor out = Tensor::zeros({(std::size_t)leaves});
    for (int l = 0; l < leaves; ++l) {
        double prod = 1.0;
        for (int j = 0; j < depth; ++j) {
            const double s = sv.values[paths.node_index[l][j]];
            prod *= paths.direction[l][j] ? s : (1.0 - s);
        }
        out.values[l] = prod;
    }

    return t.record(std::move(out), [splits, &paths, leaves, depth](Tape& tp,
                                                                    const Tensor& g) {
        const Tensor& sv2 = tp.val(splits);
        // prefix/suffix products per leaf; product rule with sign from the
        // direction bit.
        std::vector<double> factor(depth), prefix(depth + 1), suffix(depth + 1);
        for (int l = 0; l < leaves; ++l) {
            const double gl = g.values[l];
            if (gl == 0.0) continue;
            for (int j = 0; j < depth; ++j) {
                const double s = sv2.values[paths.node_index[l][j]];
                factor[j] = paths.direction[l][j] ? s : (1.0 - s);
            }
            prefix[0] = 1.0;
            for (int j = 0; j < depth; ++j) prefix[j + 1] = prefix[j] * factor[j];
            suffix[depth] = 1.0;
            for (int j = depth - 1; j >= 0; --j) suffix[j] = suffix[j + 1] * factor[j];
            for (int j = 0; j < depth; ++j) {
                const double others = prefix[j] * suffix[j + 1];
                const double sign = paths.direction[l][j] ? 1.0 : -1.0;
                tp.accumulate_at(splits, paths.node_index[l][j], gl * sign * others);
            }
        }
    });
}

TreeVars bind_tree(Tape& t, const TreeParams& params) {
    TreeVars tv;
    tv.thresholds = t.input(params.thresholds);
    tv.feature_logits = t.input(params.feature_logits);
    tv.leaf_class = t.input(params.leaf_class);
    tv.leaf_gate = t.input(params.leaf_gate);
    tv.leaf_weight = t.input(params.leaf_weight);
    tv.iota = rowwise_hardmax_st(t, tv.feature_logits);
    tv.theta = row_dot(t, tv.iota, tv.thresholds);
    return tv;
}

DenseForward forward_dense(Tape& t, Var x_aug, const TreeVars& tv,
                           const TreeParams& params) {
    const PathTables& paths = path_tables(params.depth);
    Var splits = round_st(t, sigmoid(t, sub(t, matvec(t, tv.iota, x_aug), tv.theta)));
    DenseForward f;
    f.indicators = leaf_indicators(t, splits, paths);
    f.class_logits = matvec_t(t, tv.leaf_class, f.indicators);
    f.gate_logits = matvec_t(t, tv.leaf_gate, f.indicators);
    f.input_weight = reshape(t, matvec_t(t, tv.leaf_weight, f.indicators),
                             {(std::size_t)params.n_m, (std::size_t)params.n_x});
    return f;
}

TraversalResult forward_traversal(const TreeParams& params,
                                  const std::vector<double>& x_aug) {
    if (x_aug.size() != static_cast<std::size_t>(params.n_features()))
        throw std::invalid_argument("forward_traversal: input dimension mismatch");
    TraversalResult r;
    const int n = params.n_features();
    const int internals = params.internals();
    int node = 0;
    while (node < internals) {
        r.visited.push_back(node);
        const std::size_t f =
            argmax_lowest(params.feature_logits.values.data() + node * n, n);
        const double tau = params.thresholds.values[node * n + f];
        const bool right = hard_split_true(x_aug[f] - tau);
        node = 2 * node + 1 + (right ? 1 : 0);
    }
    r.leaf = node - internals;
    return r;
}

}  // namespace remede
