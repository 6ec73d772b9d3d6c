#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fan/blocks.hpp"
#include "fan/corruptions.hpp"
#include "fan/dataset.hpp"

namespace fan {

// R = robust / clean, both accuracies in [0,1] or both in percent.
double retention(double clean_acc, double robust_acc);

// errors on a (kind, severity) grid, error = 1 - accuracy
using ErrorGrid = std::map<std::pair<CorruptionKind, int>, double>;

// CE_kind = sum_s E_model / sum_s E_base; mCE = 100 * mean over kinds.
// Throws when a baseline kind has zero total error.
double mce(const ErrorGrid& model_errors, const ErrorGrid& baseline_errors);

struct EvalReport {
    std::string model_id;
    std::string baseline_id;
    double clean_acc = 0.0;
    ErrorGrid errors;          // corrupted errors per (kind, severity)
    double robust_acc = 0.0;   // mean accuracy over the corruption grid
    double retention = 0.0;
    double mce = 0.0;

    std::string to_json() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

// clean + corrupted accuracies for one checkpoint on a dataset
EvalReport evaluate_robustness(const Model& model, const std::vector<Tensor>& params,
                               const ShapesDataset& ds,
                               const std::vector<CorruptionKind>& kinds,
                               const std::vector<int>& severities, uint64_t corruption_seed,
                               const std::string& model_id,
                               const SeverityLadders& ladders = SeverityLadders{});

struct NamedCheckpoint {
    std::string id;
    const Model* model;
    const std::vector<Tensor>* params;
};

// Runs every checkpoint over the grid; mCE is relative to `baseline_index`.
std::vector<EvalReport> robustness_suite(const std::vector<NamedCheckpoint>& checkpoints,
                                         const ShapesDataset& ds,
                                         const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities,
                                         uint64_t corruption_seed, size_t baseline_index,
                                         const SeverityLadders& ladders = SeverityLadders{});

} // namespace fan
