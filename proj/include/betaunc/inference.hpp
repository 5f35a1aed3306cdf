#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "betaunc/beta.hpp"
#include "betaunc/data.hpp"
#include "betaunc/network.hpp"

namespace betaunc {

struct CropWindow {
    std::size_t start;
    bool padded;
    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

/// Consecutive non-overlapping windows [0,c), [c,2c), ...; a trailing
/// remainder of at least c/2 adds one window aligned to the signal end, a
/// shorter one is dropped. Signals shorter than c give one padded window.
std::vector<CropWindow> decompose_crops(std::size_t length, std::size_t crop_len);

/// Stacks the windows of samples into a (n_windows, 1, crop_len) tensor.
Tensor3<float> gather_crops(std::span<const float> samples, std::span<const CropWindow> windows,
                            std::size_t crop_len);

struct Prediction {
    std::string record_id;
    PredictiveSummary summary;
    BetaMixture components;
    int predicted_class = 0;
    std::optional<double> true_target;
    std::optional<bool> accepted;
};

inline constexpr double kDefaultDecisionThreshold = 0.5;

Prediction summarize_prediction(std::string record_id, BetaMixture mixture, double decision_threshold,
                                std::optional<double> true_target = std::nullopt);

/// orient -> decompose -> network -> beta mixture -> summary -> class.
/// The crop length is the model's input length. Safe to call concurrently on a
/// shared model.
Prediction predict(const Model& model, const SignalRecord& record,
                   double decision_threshold = kDefaultDecisionThreshold);

struct RejectionResult {
    std::size_t n_accepted;
    /// Largest accepted uncertainty.
    double threshold;
};

/// Accepts the ceil(keep_fraction * N) lowest-uncertainty predictions; ties at
/// the cut go to the earlier input position.
RejectionResult reject_by_uncertainty(std::vector<Prediction>& preds, double keep_fraction);

/// Accepts exactly the predictions with uncertainty <= tau.
void reject_by_threshold(std::vector<Prediction>& preds, double tau);

/// One JSON object: id, mean, variance, uncertainty, class, accepted, components.
std::string prediction_to_json(const Prediction& p);
void write_predictions_jsonl(const std::filesystem::path& path, std::span<const Prediction> preds);

}  // namespace betaunc
