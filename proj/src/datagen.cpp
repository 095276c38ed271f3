#include "remede/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace remede {

const char* task_name(TaskId id) {
    switch (id) {
        case TaskId::PoC1: return "poc1";
        case TaskId::PoC2: return "poc2";
        case TaskId::PoC3: return "poc3";
        case TaskId::PoC4: return "poc4";
        case TaskId::PoC5: return "poc5";
    }
    throw std::invalid_argument("task_name: bad id");
}

TaskId parse_task(const std::string& name) {
    for (TaskId id : {TaskId::PoC1, TaskId::PoC2, TaskId::PoC3, TaskId::PoC4, TaskId::PoC5})
        if (name == task_name(id)) return id;
    throw std::invalid_argument("unknown task '" + name + "' (expected poc1..poc5)");
}

int task_input_dim(TaskId id) {
    return (id == TaskId::PoC2 || id == TaskId::PoC4) ? 2 : 1;
}

void GenConfig::validate() const {
    if (v <= 0) throw std::invalid_argument("GenConfig: v must be > 0");
    if (d < 0) throw std::invalid_argument("GenConfig: d must be >= 0");
    if (d_min > d_max) throw std::invalid_argument("GenConfig: d_min > d_max");
    if (d_min < 1) throw std::invalid_argument("GenConfig: d_min must be >= 1");
    if (n_sequences <= 0) throw std::invalid_argument("GenConfig: n_sequences must be > 0");
    if (block_len < 1 || n_blocks < 2)
        throw std::invalid_argument("GenConfig: need block_len >= 1, n_blocks >= 2");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

double draw_value(const GenConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-cfg.v, cfg.v);
    return u(rng);
}

SequenceExample fixed_delay(const GenConfig& cfg, std::mt19937_64& rng, int n_x,
                            TaskId task) {
    const int L = cfg.d + 2;
    const double x0 = draw_value(cfg, rng);
    SequenceExample s;
    s.task = task;
    s.inputs = Tensor::zeros({(std::size_t)L, (std::size_t)n_x});
    s.targets.assign(L, 0);
    s.inputs.at(0, 0) = x0;
    s.inputs.at(L - 1, n_x - 1) = 1.0;  // trigger
    s.targets[L - 1] = sign_of(x0);
    return s;
}

SequenceExample variable_delay(const GenConfig& cfg, std::mt19937_64& rng, int n_x,
                               TaskId task) {
    const int L = cfg.d_max + 2;
    const double x0 = draw_value(cfg, rng);
    std::uniform_int_distribution<int> ud(cfg.d_min, cfg.d_max);
    const int delta = ud(rng);
    SequenceExample s;
    s.task = task;
    s.inputs = Tensor::zeros({(std::size_t)L, (std::size_t)n_x});
    s.targets.assign(L, 0);
    s.inputs.at(0, 0) = x0;
    s.inputs.at(delta + 1, n_x - 1) = 1.0;
    s.targets[delta + 1] = sign_of(x0);
    return s;
}

}  // namespace

SequenceExample gen_poc1(const GenConfig& cfg, std::mt19937_64& rng) {
    return fixed_delay(cfg, rng, 1, TaskId::PoC1);
}

SequenceExample gen_poc2(const GenConfig& cfg, std::mt19937_64& rng) {
    return fixed_delay(cfg, rng, 2, TaskId::PoC2);
}

SequenceExample gen_poc3(const GenConfig& cfg, std::mt19937_64& rng) {
    return variable_delay(cfg, rng, 1, TaskId::PoC3);
}

SequenceExample gen_poc4(const GenConfig& cfg, std::mt19937_64& rng) {
    return variable_delay(cfg, rng, 2, TaskId::PoC4);
}

SequenceExample gen_poc5(const GenConfig& cfg, std::mt19937_64& rng) {
    const int period = cfg.block_len + cfg.d;
    const int L = cfg.n_blocks * cfg.block_len + (cfg.n_blocks - 1) * cfg.d;
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<int> blocks(cfg.n_blocks);
    for (int& b : blocks) b = coin(rng) ? 1 : -1;

    SequenceExample s;
    s.task = TaskId::PoC5;
    s.inputs = Tensor::zeros({(std::size_t)L, 1});
    s.targets.assign(L, 0);
    for (int j = 0; j < cfg.n_blocks; ++j) {
        const int start = j * period;
        for (int k = 0; k < cfg.block_len; ++k) {
            s.inputs.at(start + k, 0) = blocks[j];
            if (j > 0) s.targets[start + k] = blocks[j - 1];
        }
    }
    return s;
}

SequenceExample add_noise(const SequenceExample& seq, const GenConfig& cfg,
                          std::mt19937_64& rng) {
    SequenceExample out = seq;
    std::normal_distribution<double> noise(cfg.noise_mean, cfg.noise_std);
    for (double& v : out.inputs.values)
        if (v == 0.0) v = noise(rng);
    return out;
}

std::vector<SequenceExample> generate_dataset(TaskId task, const GenConfig& cfg) {
    cfg.validate();
    std::vector<SequenceExample> data;
    data.reserve(cfg.n_sequences);
    for (int i = 0; i < cfg.n_sequences; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, i));
        SequenceExample s;
        switch (task) {
            case TaskId::PoC1: s = gen_poc1(cfg, rng); break;
            case TaskId::PoC2: s = gen_poc2(cfg, rng); break;
            case TaskId::PoC3: s = gen_poc3(cfg, rng); break;
            case TaskId::PoC4: s = gen_poc4(cfg, rng); break;
            case TaskId::PoC5: s = gen_poc5(cfg, rng); break;
        }
        if (cfg.noise) s = add_noise(s, cfg, rng);
        data.push_back(std::move(s));
    }
    return data;
}

std::pair<std::vector<SequenceExample>, std::vector<SequenceExample>>
split_dataset(const std::vector<SequenceExample>& data, double fraction,
              std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("split_dataset: fraction must be in (0, 1)");
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_train = static_cast<std::size_t>(fraction * data.size());
    std::pair<std::vector<SequenceExample>, std::vector<SequenceExample>> out;
    out.first.reserve(n_train);
    out.second.reserve(data.size() - n_train);
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? out.first : out.second).push_back(data[idx[i]]);
    return out;
}

void write_jsonl(const std::string& path, const std::vector<SequenceExample>& data) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_jsonl: cannot open " + path);
    for (const auto& s : data) {
        nlohmann::json j;
        j["task"] = task_name(s.task);
        const std::size_t L = s.length(), n_x = s.inputs.cols();
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t t = 0; t < L; ++t) {
            nlohmann::json r = nlohmann::json::array();
            for (std::size_t f = 0; f < n_x; ++f) r.push_back(s.inputs.at(t, f));
            rows.push_back(std::move(r));
        }
        j["inputs"] = std::move(rows);
        j["targets"] = s.targets;
        os << j.dump() << '\n';
    }
    if (!os) throw std::runtime_error("write_jsonl: write failed for " + path);
}

std::vector<SequenceExample> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_jsonl: cannot open " + path);
    std::vector<SequenceExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            SequenceExample s;
            s.task = parse_task(j.at("task").get<std::string>());
            const auto& rows = j.at("inputs");
            const std::size_t L = rows.size();
            const std::size_t n_x = L ? rows[0].size() : 0;
            s.inputs = Tensor::zeros({L, n_x});
            for (std::size_t t = 0; t < L; ++t) {
                if (rows[t].size() != n_x)
                    throw std::runtime_error("ragged input rows");
                for (std::size_t f = 0; f < n_x; ++f)
                    s.inputs.at(t, f) = rows[t][f].get<double>();
            }
            s.targets = j.at("targets").get<std::vector<int>>();
            if (s.targets.size() != L)
                throw std::runtime_error("targets length mismatch");
            for (int tval : s.targets)
                if (tval < -1 || tval > 1)
                    throw std::runtime_error("target outside {-1,0,1}");
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed sequence: " + e.what());
        }
    }
    return out;
}

}  // namespace remede
