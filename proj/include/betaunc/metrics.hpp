#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "betaunc/inference.hpp"

namespace betaunc {

/// Counts with AF (class 1) as the positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Some ratio was 0/0 and has been reported as 0.
    bool degenerate = false;
};

struct MetricsReport {
    ClassMetrics af;      // "A"
    ClassMetrics normal;  // "NO"
    ClassMetrics macro;   // "Overall": unweighted mean of the two rows
    std::size_t n_evaluated = 0;
    std::size_t n_misclassified = 0;
};

/// Soft targets are binarized at 0.5. With only_accepted, predictions whose
/// accepted flag is false are skipped (unset counts as accepted).
ConfusionCounts confusion(std::span<const Prediction> preds, bool only_accepted);

MetricsReport report(const ConfusionCounts& c);

/// For each keep fraction: reject by uncertainty, then report on the accepted set.
std::vector<std::pair<double, MetricsReport>> coverage_curve(std::vector<Prediction> preds,
                                                             std::span<const double> fractions);

/// "class,precision,recall,f1" with rows A, NO, Overall.
std::string report_to_csv(const MetricsReport& r);

}  // namespace betaunc
