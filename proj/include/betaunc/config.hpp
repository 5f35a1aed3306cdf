#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace betaunc {

enum class Sampling {
    Balanced,     // class-balanced crops with hard record labels
    Changepoint,  // segments around rhythm changepoints with soft targets
};

/// Flat key=value run configuration. Lines starting with '#' are comments.
/// Unknown keys and out-of-domain values are rejected at parse time.
struct RunConfig {
    std::string arch_preset = "paper";
    std::optional<std::size_t> crop_len;  // defaults to the preset's input length
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::size_t steps_per_epoch = 0;  // 0: one pass worth of non-overlapping crops
    std::size_t patience = 5;         // early stopping on validation loss; 0 disables
    std::uint64_t seed = 0;
    double label_eps = 1e-2;
    double resample_min = 0.8;
    double resample_max = 1.25;
    bool augment = true;
    double keep_fraction = 0.9;
    double decision_threshold = 0.5;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    Sampling sampling = Sampling::Balanced;

    /// Crop length actually used: crop_len if set, else the preset input length.
    /// Throws UsageError if crop_len disagrees with the preset.
    std::size_t effective_crop_len() const;

    /// Canonical key=value rendering of every field.
    std::map<std::string, std::string> echo() const;
    std::string to_text() const;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_echo(const std::map<std::string, std::string>& kv);
};

}  // namespace betaunc
