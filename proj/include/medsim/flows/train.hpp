#pragma once

#include "medsim/estimate.hpp"
#include "medsim/flows/flow.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace medsim::flows {

struct TrainConfig {
    std::size_t batch_size = 512;
    double learning_rate = 1e-3;  // initial Adam step, cosine-decayed to 0 over max_epochs
    int max_epochs = 200;
    double validation_fraction = 0.2;
    int patience = 10;  // epochs without validation improvement before stopping
    int restarts = 5;
    int max_halvings = 2;  // learning-rate halvings after a non-finite loss
    std::uint64_t seed = 0;
    std::size_t warn_below_rows = 16000;

    void validate() const;
};

struct EpochRecord {
    int restart = 0;
    int attempt = 0;  // number of learning-rate halvings so far
    int epoch = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::vector<double> restart_validation;  // best validation loss per restart
    int best_restart = 0;
    int best_epoch = 0;
    double best_validation = 0.0;
    std::size_t n_train = 0, n_validation = 0;
    std::vector<std::string> warnings;
};

struct TrainResult {
    std::vector<FlowModel> models;
    TrainReport report;
};

// Trains the flows jointly on the summed negative log-likelihood with Adam.
// Each restart redraws the weights from (seed, restart); the returned
// models are the lowest-validation-loss snapshot over all restarts. Fits the
// standardization constants of every model on the whole dataset first.
TrainResult train(std::vector<FlowModel> models, const data::CausalDataset& ds, const TrainConfig& cfg);

// Training and validation row indices used by train() for this dataset size and seed.
void split_rows(std::size_t n, const TrainConfig& cfg, std::vector<std::size_t>& train_rows,
                std::vector<std::size_t>& validation_rows);

void write_training_curve(std::ostream& out, const TrainReport& report);

// One line per row: original value, its dequantized value (equal to the
// original for continuous targets) and the transformed z.
void write_transform_diagnostics(std::ostream& out, const FlowModel& m, const data::CausalDataset& ds,
                                 std::span<const std::size_t> rows, std::uint64_t seed);

// Empty flows for every model the modes need: L | V,D; X | V,D,L (natural-pse);
// X | V,D (interventional); Y | V,D,L,X. Order follows that list.
std::vector<FlowModel> make_bundle_flows(const data::CausalSchema& schema, std::span<const Mode> modes,
                                         const FlowArchitecture& arch, std::uint64_t seed);

// Picks the flows matching the mode's conditioning sets.
ModelBundle bundle_from_flows(const data::CausalSchema& schema, const std::vector<FlowModel>& flows, Mode mode);

}  // namespace medsim::flows
