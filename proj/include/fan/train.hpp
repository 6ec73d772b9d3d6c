#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fan/blocks.hpp"
#include "fan/dataset.hpp"
#include "fan/tensor.hpp"

namespace fan {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.01;
    size_t epochs = 30;
    size_t batch_size = 32;
    size_t warmup_epochs = 2;
    bool cosine = true;
    uint64_t seed = 0;
    double label_smoothing = 0.1;
    Precision precision = Precision::F32;
    // stop once validation accuracy reaches this (negative disables)
    double early_stop_acc = -1.0;
    // threads for the per-batch forward/backward; per-example gradients are
    // summed in example order, so the count never changes the result
    size_t workers = 1;

    void validate() const;
};

struct TrainLogEntry {
    size_t epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<Tensor> params;
    std::vector<TrainLogEntry> log;
    bool aborted = false; // non-finite loss; params are the last good epoch
    size_t steps = 0;
    double best_val_acc = 0.0;
};

// AdamW (decoupled weight decay), linear warmup then cosine decay,
// cross-entropy with label smoothing. Deterministic given the seed.
TrainResult train(const Model& model, const ShapesDataset& train_set,
                  const ShapesDataset& val_set, const TrainConfig& cfg);

// Accuracy over a dataset; `workers` only parallelizes, never changes the
// result.
double evaluate(const Model& model, const std::vector<Tensor>& params,
                const ShapesDataset& ds, size_t workers = 1);

struct Checkpoint {
    ModelConfig config;
    uint64_t seed = 0;
    uint64_t step = 0;
    std::vector<Tensor> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace fan
