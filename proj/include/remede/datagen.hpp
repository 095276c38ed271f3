#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "remede/tensor.hpp"

namespace remede {

enum class TaskId { PoC1, PoC2, PoC3, PoC4, PoC5 };

const char* task_name(TaskId id);
TaskId parse_task(const std::string& name);  // "poc1".."poc5"
int task_input_dim(TaskId id);               // 1 or 2

// One sequence: inputs [L x n_x], per-step targets in {-1, 0, 1}.
struct SequenceExample {
    Tensor inputs;
    std::vector<int> targets;
    TaskId task = TaskId::PoC1;

    std::size_t length() const { return inputs.rows(); }
    bool operator==(const SequenceExample&) const = default;
};

// Target value {-1,0,1} <-> class index {0,1,2}.
inline constexpr int kNumClasses = 3;
inline int class_index(int target) { return target + 1; }
inline int class_value(int index) { return index - 1; }

struct GenConfig {
    double v = 0.5;           // value range half-width, x0 ~ U(-v, v)
    int d = 5;                // fixed delay (PoC1/2) and PoC5 zero-block length
    int d_min = 3, d_max = 7; // variable delay range (PoC3/4)
    double noise_mean = -0.01;
    double noise_std = 0.01;
    int n_sequences = 10000;
    int block_len = 1;        // PoC5
    int n_blocks = 5;         // PoC5
    std::uint64_t seed = 0;
    bool noise = true;

    void validate() const;
};

// 1 if x >= 0, else -1.
inline int sign_of(double x) { return x >= 0.0 ? 1 : -1; }

// Deterministic per-stream seed derivation (splitmix64 over seed ^ stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Single-sequence generators; rng carries all randomness. Noise is NOT
// applied here (see add_noise / generate_dataset).
SequenceExample gen_poc1(const GenConfig& cfg, std::mt19937_64& rng);
SequenceExample gen_poc2(const GenConfig& cfg, std::mt19937_64& rng);
SequenceExample gen_poc3(const GenConfig& cfg, std::mt19937_64& rng);
SequenceExample gen_poc4(const GenConfig& cfg, std::mt19937_64& rng);
SequenceExample gen_poc5(const GenConfig& cfg, std::mt19937_64& rng);

// Adds N(noise_mean, noise_std) to every exactly-zero input position; value,
// trigger, and block positions (nonzero entries) stay bit-identical.
SequenceExample add_noise(const SequenceExample& seq, const GenConfig& cfg,
                          std::mt19937_64& rng);

// cfg.n_sequences examples with per-sequence derived seeds; applies noise
// when cfg.noise is set.
std::vector<SequenceExample> generate_dataset(TaskId task, const GenConfig& cfg);

// Deterministic shuffled split; fraction is the train share.
std::pair<std::vector<SequenceExample>, std::vector<SequenceExample>>
split_dataset(const std::vector<SequenceExample>& data, double fraction,
              std::uint64_t seed);

// JSONL persistence: one {"task","inputs","targets"} object per line.
void write_jsonl(const std::string& path, const std::vector<SequenceExample>& data);
std::vector<SequenceExample> read_jsonl(const std::string& path);

}  // namespace remede
