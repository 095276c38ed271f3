#include "remede/cell.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace remede {

RemedeCell init_cell(int depth, int n_x, int n_m, int n_classes,
                     const std::vector<SequenceExample>& warmup, std::uint64_t seed) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : warmup) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            std::vector<double> r(n_x);
            for (int f = 0; f < n_x; ++f) r[f] = s.inputs.at(t, f);
            rows.push_back(std::move(r));
        }
        if (rows.size() > 4096) break;
    }
    std::mt19937_64 rng(seed);
    RemedeCell cell;
    cell.tree = init_tree_params(depth, n_x, n_m, n_classes, rows, rng);
    return cell;
}

CellTapeCtx bind_cell(Tape& t, const RemedeCell& cell) {
    CellTapeCtx ctx;
    ctx.tape = &t;
    ctx.cell = &cell;
    ctx.tree = bind_tree(t, cell.tree);
    return ctx;
}

StepVars step_on_tape(CellTapeCtx& ctx, Var x_t, Var m_prev) {
    Tape& t = *ctx.tape;
    const TreeParams& p = ctx.cell->tree;
    if (t.val(x_t).size() != static_cast<std::size_t>(p.n_x) ||
        t.val(m_prev).size() != static_cast<std::size_t>(p.n_m))
        throw std::invalid_argument("step: input/state dimension mismatch");

    Var x_aug = concat(t, x_t, m_prev);
    DenseForward f = forward_dense(t, x_aug, ctx.tree, p);

    Var gate = round_st(t, sigmoid(t, f.gate_logits));
    Var delta = mul(t, gate, tanh_act(t, matvec(t, f.input_weight, x_t)));

    StepVars sv;
    sv.class_logits = f.class_logits;
    sv.m_next = add(t, m_prev, delta);
    sv.indicators = f.indicators;
    return sv;
}

UnrollVars unroll_on_tape(CellTapeCtx& ctx, const SequenceExample& seq) {
    Tape& t = *ctx.tape;
    const std::size_t L = seq.length();
    if (L == 0) throw std::invalid_argument("unroll: empty sequence");
    UnrollVars u;
    u.step_logits.reserve(L);
    Var m = t.input(Tensor::zeros({(std::size_t)ctx.cell->n_m()}));
    for (std::size_t step = 0; step < L; ++step) {
        Tensor x = Tensor::zeros({(std::size_t)ctx.cell->n_x()});
        for (int f = 0; f < ctx.cell->n_x(); ++f) x.values[f] = seq.inputs.at(step, f);
        StepVars sv = step_on_tape(ctx, t.input(std::move(x)), m);
        u.step_logits.push_back(sv.class_logits);
        m = sv.m_next;
    }
    u.final_m = m;
    return u;
}

Var sequence_loss(Tape& t, const std::vector<Var>& step_logits,
                  const std::vector<int>& targets) {
    if (step_logits.size() != targets.size())
        throw std::invalid_argument("sequence_loss: logits/targets length mismatch");
    if (step_logits.empty()) throw std::invalid_argument("sequence_loss: empty sequence");
    Var total;
    for (std::size_t i = 0; i < step_logits.size(); ++i) {
        Var l = cross_entropy(t, step_logits[i], class_index(targets[i]));
        total = (i == 0) ? l : add(t, total, l);
    }
    return scale(t, total, 1.0 / step_logits.size());
}

Var unroll_loss(CellTapeCtx& ctx, const SequenceExample& seq) {
    UnrollVars u = unroll_on_tape(ctx, seq);
    return sequence_loss(*ctx.tape, u.step_logits, seq.targets);
}

std::pair<Tensor, HiddenState> step(const RemedeCell& cell, const Tensor& x_t,
                                    const HiddenState& m_prev) {
    Tape t;
    CellTapeCtx ctx = bind_cell(t, cell);
    StepVars sv = step_on_tape(ctx, t.input(x_t), t.input(m_prev.m));
    return {t.val(sv.class_logits), HiddenState{t.val(sv.m_next)}};
}

UnrollResult unroll(const RemedeCell& cell, const SequenceExample& seq) {
    Tape t;
    CellTapeCtx ctx = bind_cell(t, cell);
    UnrollVars u = unroll_on_tape(ctx, seq);
    UnrollResult r;
    const std::size_t L = seq.length();
    r.logits = Tensor::zeros({L, (std::size_t)cell.n_classes()});
    for (std::size_t i = 0; i < L; ++i)
        for (int c = 0; c < cell.n_classes(); ++c)
            r.logits.at(i, c) = t.val(u.step_logits[i]).values[c];
    r.final_m = HiddenState{t.val(u.final_m)};
    return r;
}

HardRun run_hard(const RemedeCell& cell, const SequenceExample& seq,
                 bool record_visits) {
    const TreeParams& p = cell.tree;
    const int n_x = p.n_x, n_m = p.n_m;
    const std::size_t L = seq.length();
    HardRun r;
    r.leaf_per_step.reserve(L);
    r.pred_class.reserve(L);
    r.m_trace.reserve(L);

    std::vector<double> x_aug(p.n_features(), 0.0);
    std::vector<double> m(n_m, 0.0);
    for (std::size_t step = 0; step < L; ++step) {
        for (int f = 0; f < n_x; ++f) x_aug[f] = seq.inputs.at(step, f);
        for (int i = 0; i < n_m; ++i) x_aug[n_x + i] = m[i];

        TraversalResult tr = forward_traversal(p, x_aug);
        const int leaf = tr.leaf;
        r.leaf_per_step.push_back(leaf);
        if (record_visits) r.visited.push_back(std::move(tr.visited));

        const double* z = p.leaf_class.values.data() + leaf * p.n_classes;
        r.pred_class.push_back(
            static_cast<int>(argmax_lowest(z, p.n_classes)));

        const double* c = p.leaf_gate.values.data() + leaf * n_m;
        const double* w = p.leaf_weight.values.data() + leaf * n_m * n_x;
        for (int i = 0; i < n_m; ++i) {
            const double gate = std::round(sigmoid_scalar(c[i]));
            if (gate == 0.0) continue;
            double dot = 0.0;
            for (int f = 0; f < n_x; ++f) dot += w[i * n_x + f] * x_aug[f];
            m[i] += gate * std::tanh(dot);
        }
        r.m_trace.push_back(m);
    }
    return r;
}

namespace {

nlohmann::json tensor_rows(const Tensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (std::size_t j = 0; j < t.cols(); ++j) r.push_back(t.at(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

Tensor tensor_from_rows(const nlohmann::json& rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows[0].size() : 0;
    Tensor t = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t.at(i, j) = rows[i][j].get<double>();
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const TreeParams& p = ck.cell.tree;
    nlohmann::json j;
    j["depth"] = p.depth;
    j["n_x"] = p.n_x;
    j["n_m"] = p.n_m;
    j["n_classes"] = p.n_classes;
    j["thresholds"] = tensor_rows(p.thresholds);
    j["feature_logits"] = tensor_rows(p.feature_logits);
    nlohmann::json leaves = nlohmann::json::array();
    for (int l = 0; l < p.leaves(); ++l) {
        LeafPayload pl = p.payload(l);
        nlohmann::json jl;
        jl["class_logits"] = pl.class_logits;
        jl["gate_logits"] = pl.gate_logits;
        nlohmann::json wrows = nlohmann::json::array();
        for (int i = 0; i < p.n_m; ++i) {
            nlohmann::json r = nlohmann::json::array();
            for (int f = 0; f < p.n_x; ++f) r.push_back(pl.input_weights[i * p.n_x + f]);
            wrows.push_back(std::move(r));
        }
        jl["input_weights"] = std::move(wrows);
        leaves.push_back(std::move(jl));
    }
    j["leaf_payloads"] = std::move(leaves);
    j["seed"] = ck.seed;
    j["task_id"] = ck.task_id;

    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    is >> j;

    Checkpoint ck;
    TreeParams& p = ck.cell.tree;
    p.depth = j.at("depth").get<int>();
    p.n_x = j.at("n_x").get<int>();
    p.n_m = j.at("n_m").get<int>();
    p.n_classes = j.at("n_classes").get<int>();
    p.thresholds = tensor_from_rows(j.at("thresholds"));
    p.feature_logits = tensor_from_rows(j.at("feature_logits"));

    const auto& leaves = j.at("leaf_payloads");
    if (static_cast<int>(leaves.size()) != p.leaves())
        throw std::runtime_error("load_checkpoint: leaf count mismatch");
    p.leaf_class = Tensor::zeros({(std::size_t)p.leaves(), (std::size_t)p.n_classes});
    p.leaf_gate = Tensor::zeros({(std::size_t)p.leaves(), (std::size_t)p.n_m});
    p.leaf_weight = Tensor::zeros({(std::size_t)p.leaves(), (std::size_t)(p.n_m * p.n_x)});
    for (int l = 0; l < p.leaves(); ++l) {
        LeafPayload pl;
        pl.class_logits = leaves[l].at("class_logits").get<std::vector<double>>();
        pl.gate_logits = leaves[l].at("gate_logits").get<std::vector<double>>();
        for (const auto& r : leaves[l].at("input_weights"))
            for (const auto& v : r) pl.input_weights.push_back(v.get<double>());
        p.set_payload(l, pl);
    }
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.task_id = j.at("task_id").get<std::string>();
    return ck;
}

}  // namespace remede
