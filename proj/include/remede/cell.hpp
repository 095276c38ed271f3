#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "remede/datagen.hpp"
#include "remede/tree.hpp"

namespace remede {

struct HiddenState {
    Tensor m;  // [n_m]; starts at all zeros
    static HiddenState zeros(int n_m) { return {Tensor::zeros({(std::size_t)n_m})}; }
};

// One tree over the augmented space (x, m); the tree's leaf payloads drive
// both the class output and the gated additive memory update.
struct RemedeCell {
    TreeParams tree;

    int n_x() const { return tree.n_x; }
    int n_m() const { return tree.n_m; }
    int n_classes() const { return tree.n_classes; }
};

RemedeCell init_cell(int depth, int n_x, int n_m, int n_classes,
                     const std::vector<SequenceExample>& warmup, std::uint64_t seed);

// --- tape-based recurrence (training path) ---

struct CellTapeCtx {
    Tape* tape = nullptr;
    const RemedeCell* cell = nullptr;
    TreeVars tree;
};

// Binds the cell's parameters once per tape; iota/theta are shared by every
// step recorded afterwards.
CellTapeCtx bind_cell(Tape& t, const RemedeCell& cell);

struct StepVars {
    Var class_logits;  // [n_classes]
    Var m_next;        // [n_m]
    Var indicators;    // [leaves]
};

// One recurrent step on the shared tape:
//   x~ = (x_t, m_prev); leaf j = tree(x~);
//   y  = z_j;  m_next = m_prev + round_st(sigmoid(c_j)) .* tanh(W_j x_t).
StepVars step_on_tape(CellTapeCtx& ctx, Var x_t, Var m_prev);

struct UnrollVars {
    std::vector<Var> step_logits;
    Var final_m;
};

UnrollVars unroll_on_tape(CellTapeCtx& ctx, const SequenceExample& seq);

// Mean over timesteps of per-step cross entropy against the class targets.
Var sequence_loss(Tape& t, const std::vector<Var>& step_logits,
                  const std::vector<int>& targets);

// Convenience: unroll + loss for one sequence.
Var unroll_loss(CellTapeCtx& ctx, const SequenceExample& seq);

// --- standalone API (fresh tape per call) ---

std::pair<Tensor, HiddenState> step(const RemedeCell& cell, const Tensor& x_t,
                                    const HiddenState& m_prev);

struct UnrollResult {
    Tensor logits;  // [L x n_classes]
    HiddenState final_m;
};

UnrollResult unroll(const RemedeCell& cell, const SequenceExample& seq);

// --- tape-free hard inference (evaluation / pruning path) ---

struct HardRun {
    std::vector<int> leaf_per_step;
    std::vector<int> pred_class;                 // class indices 0..n_classes-1
    std::vector<std::vector<int>> visited;       // internal nodes per step
    std::vector<std::vector<double>> m_trace;    // state after each step
};

HardRun run_hard(const RemedeCell& cell, const SequenceExample& seq,
                 bool record_visits = false);

// --- checkpoint I/O (single JSON document) ---

struct Checkpoint {
    RemedeCell cell;
    std::uint64_t seed = 0;
    std::string task_id;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace remede
