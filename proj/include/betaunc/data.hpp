#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "betaunc/tensor.hpp"

namespace betaunc {

using Rng = std::mt19937_64;

inline constexpr std::uint8_t kTagNormal = 0;
inline constexpr std::uint8_t kTagAf = 1;

struct Changepoint {
    std::uint64_t index;
    /// Rhythm from this index onward: 0 normal, 1 AF.
    std::uint8_t tag;
    friend bool operator==(const Changepoint&, const Changepoint&) = default;
};

/// Piecewise-constant rhythm labelling of a recording.
struct RhythmAnnotation {
    std::uint8_t initial_tag = kTagNormal;
    std::vector<Changepoint> changepoints;

    std::uint8_t tag_at(std::uint64_t index) const;
    friend bool operator==(const RhythmAnnotation&, const RhythmAnnotation&) = default;
};

struct SignalRecord {
    std::string id;
    double sampling_rate = 300.0;
    std::vector<float> samples;
    /// 0 = normal/other, 1 = AF, anything in between is a soft target.
    double target = 0.0;
    std::optional<RhythmAnnotation> annotation;
    /// Set by orient_signal when the samples were negated.
    bool flipped = false;

    int hard_class() const { return target >= 0.5 ? 1 : 0; }
    /// Throws DataError(InvalidRecord / NonMonotoneChangepoints) on a broken invariant.
    void validate() const;
};

enum class Split { Train, Val };

struct ManifestEntry {
    std::string id;
    std::string path;
    double target = 0.0;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> records;
    std::optional<std::uint64_t> seed;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SignalRecord> records;  // same order as manifest.records

    std::vector<SignalRecord> subset(Split split) const;
    const SignalRecord* find(const std::string& id) const;
};

// --- record files and manifests -------------------------------------------

inline constexpr std::uint32_t kRecordVersion = 1;
/// Initial-tag byte marking a record without rhythm annotation.
inline constexpr std::uint8_t kNoAnnotation = 0xFF;

std::vector<std::uint8_t> serialize_record(const SignalRecord& r);
/// id and target live in the manifest, not the record file.
SignalRecord deserialize_record(const std::vector<std::uint8_t>& bytes, const std::string& id, double target);

void write_record_file(const std::filesystem::path& path, const SignalRecord& r);
SignalRecord read_record_file(const std::filesystem::path& path, const std::string& id, double target);

std::string format_target(double target);
std::string manifest_to_csv(const DatasetManifest& manifest);
DatasetManifest parse_manifest_csv(const std::string& text);

/// Writes manifest.csv plus one record file per manifest entry under dir.
void write_dataset(const std::filesystem::path& dir, const std::vector<SignalRecord>& records,
                   const DatasetManifest& manifest);
/// Accepts either the manifest file or the directory containing manifest.csv.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// --- signal operations ------------------------------------------------------

/// Subtracts the median and negates when the dominant deflection is negative.
SignalRecord orient_signal(const SignalRecord& r);

/// Linear interpolation onto round(L * factor) points spaced L / n apart,
/// starting at the first sample.
std::vector<float> resample_samples(std::span<const float> x, double factor);
SignalRecord resample(const SignalRecord& r, double factor);

/// crop_len samples starting at start; a source shorter than crop_len is
/// edge-replicated on both sides (extra element on the right).
std::vector<float> extract_crop(std::span<const float> x, std::size_t start, std::size_t crop_len);

struct AugmentConfig {
    bool enabled = true;
    double resample_min = 0.8;
    double resample_max = 1.25;
};

struct CropProvenance {
    std::string record_id;
    std::size_t start = 0;
    double resample_factor = 1.0;
    bool padded = false;
    bool flipped = false;
};

struct CropBatch {
    Tensor3<float> crops;
    std::vector<double> targets;
    std::vector<CropProvenance> provenance;
};

/// Class-balanced crop sampler. Orientation is computed once per record.
class CropSampler {
public:
    CropSampler(std::span<const SignalRecord> records, std::size_t crop_len, AugmentConfig augment);

    /// batch_size / 2 crops of each class, class 0 first.
    CropBatch sample(std::size_t batch_size, Rng& rng) const;

private:
    std::vector<SignalRecord> oriented_;
    std::vector<std::size_t> by_class_[2];
    std::size_t crop_len_;
    AugmentConfig augment_;
};

CropBatch sample_crop_batch(std::span<const SignalRecord> records, std::size_t batch_size, std::size_t crop_len,
                            const AugmentConfig& augment, Rng& rng);

/// Fraction of samples in [start, start + len) tagged AF.
double soft_target_for_segment(const SignalRecord& r, std::size_t start, std::size_t len);

struct SegmentSample {
    std::size_t start;
    double target;
};

/// Windows of crop_len around uniformly chosen changepoints.
std::vector<SegmentSample> sample_changepoint_segments(const SignalRecord& r, std::size_t crop_len, std::size_t n,
                                                       Rng& rng);

/// Batch of changepoint-centred segments with soft targets drawn from
/// annotated records (uniform over records).
CropBatch sample_changepoint_batch(std::span<const SignalRecord> records, std::size_t batch_size,
                                   std::size_t crop_len, Rng& rng);

/// Stratified random split; ceil(N * train_fraction) records go to train.
DatasetManifest split_dataset(const std::vector<SignalRecord>& records, double train_fraction, std::uint64_t seed);

}  // namespace betaunc
