#include "remede/eval.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace remede {

double elementwise_accuracy(const std::vector<int>& pred,
                            const std::vector<int>& target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("elementwise_accuracy: length mismatch");
    if (pred.empty()) throw std::invalid_argument("elementwise_accuracy: empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == target[i]) ++correct;
    return static_cast<double>(correct) / pred.size();
}

double dataset_accuracy(const std::vector<std::vector<int>>& preds,
                        const std::vector<SequenceExample>& data) {
    if (preds.size() != data.size())
        throw std::invalid_argument("dataset_accuracy: size mismatch");
    std::size_t correct = 0, total = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        if (preds[s].size() != data[s].targets.size())
            throw std::invalid_argument("dataset_accuracy: length mismatch");
        for (std::size_t i = 0; i < preds[s].size(); ++i)
            if (preds[s][i] == data[s].targets[i]) ++correct;
        total += preds[s].size();
    }
    return static_cast<double>(correct) / total;
}

double random_guess_baseline(const std::vector<SequenceExample>& data,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(-1, 1);
    std::size_t correct = 0, total = 0;
    for (const auto& s : data)
        for (int t : s.targets) {
            if (coin(rng) == t) ++correct;
            ++total;
        }
    return static_cast<double>(correct) / total;
}

double naive_baseline(const std::vector<SequenceExample>& train,
                      const std::vector<SequenceExample>& test) {
    if (train.empty() || test.empty())
        throw std::invalid_argument("naive_baseline: empty dataset");
    const std::size_t L = train[0].length();
    for (const auto& s : train)
        if (s.length() != L) throw std::invalid_argument("naive_baseline: ragged lengths");
    for (const auto& s : test)
        if (s.length() != L) throw std::invalid_argument("naive_baseline: ragged lengths");

    // counts[pos][class index]
    std::vector<std::array<std::size_t, 3>> counts(L, {0, 0, 0});
    for (const auto& s : train)
        for (std::size_t p = 0; p < L; ++p) ++counts[p][class_index(s.targets[p])];

    std::vector<int> majority(L);
    for (std::size_t p = 0; p < L; ++p) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (counts[p][c] >= counts[p][best]) best = c;  // ties -> larger value
        majority[p] = class_value(best);
    }

    std::size_t correct = 0, total = 0;
    for (const auto& s : test)
        for (std::size_t p = 0; p < L; ++p) {
            if (s.targets[p] == majority[p]) ++correct;
            ++total;
        }
    return static_cast<double>(correct) / total;
}

double evaluate_model(const RemedeCell& cell, const std::vector<SequenceExample>& data) {
    std::size_t correct = 0, total = 0;
    for (const auto& s : data) {
        HardRun run = run_hard(cell, s);
        for (std::size_t i = 0; i < s.targets.size(); ++i) {
            if (class_value(run.pred_class[i]) == s.targets[i]) ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / total;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
}

std::string format_mean_std(double m, double s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f \xC2\xB1 %.3f", m, s);
    return buf;
}

void finalize_report(TrialReport& r) {
    r.mean_accuracy = mean(r.accuracies);
    r.std_accuracy = sample_std(r.accuracies);
    std::vector<double> sizes(r.tree_sizes.begin(), r.tree_sizes.end());
    r.mean_size = mean(sizes);
}

std::string report_csv(const TrialReport& r) {
    std::ostringstream os;
    os << "task,trial,accuracy,tree_size\n";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
        os << r.task << ',' << i << ',' << r.accuracies[i] << ','
           << (i < r.tree_sizes.size() ? r.tree_sizes[i] : -1) << '\n';
    }
    os << r.task << ",mean," << r.mean_accuracy << ',' << r.mean_size << '\n';
    os << r.task << ",std," << r.std_accuracy << ",\n";
    os << r.task << ",naive," << r.naive << ",\n";
    os << r.task << ",random," << r.random_guess << ",\n";
    return os.str();
}

std::string report_table(const TrialReport& r) {
    // std reported over trials; 0.000 for single values by the n-1 convention.
    std::ostringstream os;
    os << "Task " << r.task << " (" << r.accuracies.size() << " trials)\n";
    os << "  ReMeDe          " << format_mean_std(r.mean_accuracy, r.std_accuracy) << "\n";
    os << "  Random Guess    " << format_mean_std(r.random_guess, 0.0) << "\n";
    os << "  Naive Baseline  " << format_mean_std(r.naive, 0.0) << "\n";
    os << "  Tree size       " << format_mean_std(r.mean_size, 0.0) << " nodes\n";
    return os.str();
}

}  // namespace remede
