#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "betaunc/config.hpp"
#include "betaunc/data.hpp"
#include "betaunc/inference.hpp"
#include "betaunc/network.hpp"

namespace betaunc {

struct EpochLog {
    std::size_t epoch = 0;
    /// Mean minibatch loss over the epoch's optimization steps.
    double train_loss = 0.0;
    /// Train-mode loss on a probe batch drawn once before training. Depends only
    /// on the parameters, so it is flat when nothing is learned.
    double probe_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_macro_f1;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::optional<std::size_t> best_epoch;
    bool stopped_early = false;
    std::uint64_t steps = 0;

    std::string to_json() const;
};

/// Model options derived from the run configuration.
ModelOptions model_options(const RunConfig& cfg);

/// Builds the configured model and stores the config echo in it.
Model build_model(const RunConfig& cfg);

/// Minibatch Adam on the beta negative log-likelihood. With validation records
/// and a nonzero patience, stops when validation loss has not improved for
/// `patience` epochs and restores the best weights.
TrainLog train(Model& model, std::span<const SignalRecord> train_records, std::span<const SignalRecord> val_records,
               const RunConfig& cfg);

/// Predictions for every record using the configured decision threshold.
std::vector<Prediction> predict_all(const Model& model, std::span<const SignalRecord> records,
                                    double decision_threshold);

}  // namespace betaunc
