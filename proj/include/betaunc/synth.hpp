#pragma once

#include <cstdint>
#include <vector>

#include "betaunc/data.hpp"

namespace betaunc {

/// Synthetic single-lead recordings for desk-scale experiments.
///
/// Class 0: regular RR intervals (normal, per-record mean in [0.7, 1.1] s,
/// sd 0.02 s) with a P-wave bump before every R spike.
/// Class 1: gamma-distributed RR intervals (coefficient of variation 0.35 to
/// 0.5), no P-wave, low-amplitude fibrillatory oscillation between beats.
///
/// A fraction of records is "atypical": the beat timing keeps its class but
/// the waveform morphology switches between both classes in blocks of a few
/// seconds, and noise is higher. Some records are stored upside down.
struct SynthOptions {
    std::size_t n_per_class = 100;
    std::uint64_t seed = 0;
    double min_seconds = 9.0;
    double max_seconds = 61.0;
    double sampling_rate = 300.0;
    double atypical_fraction = 0.1;
    double inverted_fraction = 0.3;
};

/// Records alternate class 0 / class 1; ids are "N0000", "A0000", ...
std::vector<SignalRecord> synth_generate(const SynthOptions& options);
std::vector<SignalRecord> synth_generate(std::size_t n_per_class, double max_seconds, std::uint64_t seed);

/// Recordings that switch between normal and AF rhythm, with the switch
/// points stored as a rhythm annotation. The record target is the overall AF
/// fraction.
struct ChangepointSynthOptions {
    std::size_t n_records = 40;
    std::uint64_t seed = 0;
    double min_seconds = 30.0;
    double max_seconds = 60.0;
    double min_interval_seconds = 4.0;
    double max_interval_seconds = 12.0;
    double sampling_rate = 300.0;
};

std::vector<SignalRecord> synth_generate_changepoints(const ChangepointSynthOptions& options);

}  // namespace betaunc
