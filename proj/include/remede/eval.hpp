#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "remede/cell.hpp"
#include "remede/datagen.hpp"

namespace remede {

// Fraction of correctly classified timesteps (class values in {-1,0,1}).
double elementwise_accuracy(const std::vector<int>& pred,
                            const std::vector<int>& target);

// Micro-averaged over all timesteps of all sequences.
double dataset_accuracy(const std::vector<std::vector<int>>& preds,
                        const std::vector<SequenceExample>& data);

// Uniform prediction over {-1,0,1} per timestep.
double random_guess_baseline(const std::vector<SequenceExample>& data,
                             std::uint64_t seed);

// Per-position majority class from train, scored on test. All sequences must
// share one length; ties prefer the larger class value.
double naive_baseline(const std::vector<SequenceExample>& train,
                      const std::vector<SequenceExample>& test);

// Hard-traversal accuracy of a trained cell.
double evaluate_model(const RemedeCell& cell, const std::vector<SequenceExample>& data);

struct TrialReport {
    std::string task;
    std::vector<double> accuracies;
    std::vector<int> tree_sizes;  // pruned node counts, one per trial
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_size = 0.0;
    double naive = 0.0, random_guess = 0.0;
};

double mean(const std::vector<double>& v);
// Sample standard deviation (n - 1 denominator); 0 for n < 2.
double sample_std(const std::vector<double>& v);

// "0.930 ± 0.002" style formatting, three decimals.
std::string format_mean_std(double mean, double std);

// Fills mean/std fields from the stored per-trial values.
void finalize_report(TrialReport& r);

std::string report_csv(const TrialReport& r);
std::string report_table(const TrialReport& r);

}  // namespace remede
