#include "betaunc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "betaunc/binary_io.hpp"
#include "betaunc/errors.hpp"

namespace betaunc {

namespace {

constexpr char kRecordMagic[4] = {'B', 'G', 'S', '1'};

double median_of(std::span<const float> x) {
    std::vector<float> tmp(x.begin(), x.end());
    const std::size_t n = tmp.size();
    const std::size_t mid = n / 2;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
    const double upper = tmp[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid));
    // exact in double for float inputs, and symmetric under negation
    return 0.5 * (lower + upper);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::uint8_t RhythmAnnotation::tag_at(std::uint64_t index) const {
    std::uint8_t tag = initial_tag;
    for (const auto& cp : changepoints) {
        if (cp.index > index) break;
        tag = cp.tag;
    }
    return tag;
}

void SignalRecord::validate() const {
    if (samples.empty()) throw DataError(DataErrorCode::InvalidRecord, "record '" + id + "' has no samples");
    if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
        throw DataError(DataErrorCode::InvalidRecord, "record '" + id + "' has a non-positive sampling rate");
    }
    if (!(target >= 0.0 && target <= 1.0)) {
        throw DataError(DataErrorCode::InvalidRecord, "record '" + id + "' target outside [0, 1]");
    }
    if (annotation) {
        if (annotation->initial_tag > kTagAf) {
            throw DataError(DataErrorCode::InvalidRecord, "record '" + id + "' has an unknown rhythm tag");
        }
        std::uint64_t prev = 0;
        bool first = true;
        for (const auto& cp : annotation->changepoints) {
            if (cp.tag > kTagAf) {
                throw DataError(DataErrorCode::InvalidRecord, "record '" + id + "' has an unknown rhythm tag");
            }
            if (cp.index >= samples.size() || (!first && cp.index <= prev)) {
                throw DataError(DataErrorCode::NonMonotoneChangepoints,
                                "record '" + id + "' changepoints must be strictly increasing and within the signal");
            }
            prev = cp.index;
            first = false;
        }
    }
}

std::vector<SignalRecord> Dataset::subset(Split split) const {
    std::vector<SignalRecord> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (manifest.records[i].split == split) out.push_back(records[i]);
    }
    return out;
}

const SignalRecord* Dataset::find(const std::string& id) const {
    for (const auto& r : records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

// --- record files -----------------------------------------------------------

std::vector<std::uint8_t> serialize_record(const SignalRecord& r) {
    ByteWriter w;
    w.bytes(kRecordMagic, 4);
    w.u32(kRecordVersion);
    w.f64(r.sampling_rate);
    w.u64(r.samples.size());
    for (float v : r.samples) w.f32(v);
    if (r.annotation) {
        w.u32(static_cast<std::uint32_t>(r.annotation->changepoints.size()));
        w.u8(r.annotation->initial_tag);
        for (const auto& cp : r.annotation->changepoints) {
            w.u64(cp.index);
            w.u8(cp.tag);
        }
    } else {
        w.u32(0);
        w.u8(kNoAnnotation);
    }
    return w.take();
}

SignalRecord deserialize_record(const std::vector<std::uint8_t>& bytes, const std::string& id, double target) {
    ByteReader r(bytes, DataErrorCode::MalformedHeader);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kRecordMagic)) {
        throw DataError(DataErrorCode::MalformedHeader, "record '" + id + "' has bad magic bytes");
    }
    const std::uint32_t version = r.u32();
    if (version != kRecordVersion) {
        throw DataError(DataErrorCode::UnsupportedVersion,
                        "record '" + id + "' has format version " + std::to_string(version));
    }
    SignalRecord rec;
    rec.id = id;
    rec.target = target;
    rec.sampling_rate = r.f64();
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 4) throw DataError(DataErrorCode::MalformedHeader, "record '" + id + "' is truncated");
    rec.samples.resize(n);
    for (auto& v : rec.samples) v = r.f32();
    const std::uint32_t n_cp = r.u32();
    const std::uint8_t initial = r.u8();
    if (initial != kNoAnnotation) {
        RhythmAnnotation ann;
        ann.initial_tag = initial;
        for (std::uint32_t i = 0; i < n_cp; ++i) {
            const std::uint64_t idx = r.u64();
            ann.changepoints.push_back({idx, r.u8()});
        }
        rec.annotation = std::move(ann);
    } else if (n_cp != 0) {
        throw DataError(DataErrorCode::MalformedHeader, "record '" + id + "' lists changepoints without a tag");
    }
    if (r.remaining() != 0) {
        throw DataError(DataErrorCode::MalformedHeader, "record '" + id + "' has trailing bytes");
    }
    rec.validate();
    return rec;
}

void write_record_file(const std::filesystem::path& path, const SignalRecord& r) {
    write_file_bytes(path, serialize_record(r));
}

SignalRecord read_record_file(const std::filesystem::path& path, const std::string& id, double target) {
    return deserialize_record(read_file_bytes(path), id, target);
}

// --- manifests --------------------------------------------------------------

std::string format_target(double target) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), target);
    return std::string(buf, res.ptr);
}

std::string manifest_to_csv(const DatasetManifest& manifest) {
    std::string out = "id,path,target,split\n";
    for (const auto& e : manifest.records) {
        out += e.id + "," + e.path + "," + format_target(e.target) + "," +
               (e.split == Split::Train ? "train" : "val") + "\n";
    }
    return out;
}

DatasetManifest parse_manifest_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "id,path,target,split") {
        throw DataError(DataErrorCode::MalformedHeader, "manifest header must be 'id,path,target,split'");
    }
    DatasetManifest m;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split_csv_line(line);
        const std::string where = "manifest line " + std::to_string(line_no);
        if (cols.size() != 4) throw DataError(DataErrorCode::MalformedHeader, where + ": expected 4 columns");
        ManifestEntry e;
        e.id = cols[0];
        e.path = cols[1];
        if (e.id.empty() || e.path.empty()) throw DataError(DataErrorCode::MalformedHeader, where + ": empty id or path");
        const char* b = cols[2].data();
        const char* end = b + cols[2].size();
        const auto res = std::from_chars(b, end, e.target);
        if (res.ec != std::errc() || res.ptr != end || !(e.target >= 0.0 && e.target <= 1.0)) {
            throw DataError(DataErrorCode::MalformedHeader, where + ": target must be 0, 1 or a decimal in [0, 1]");
        }
        if (cols[3] == "train") {
            e.split = Split::Train;
        } else if (cols[3] == "val") {
            e.split = Split::Val;
        } else {
            throw DataError(DataErrorCode::MalformedHeader, where + ": split must be 'train' or 'val'");
        }
        m.records.push_back(std::move(e));
    }
    return m;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SignalRecord>& records,
                   const DatasetManifest& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(DataErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
    for (const auto& e : manifest.records) {
        const auto it = std::find_if(records.begin(), records.end(), [&](const SignalRecord& r) { return r.id == e.id; });
        if (it == records.end()) throw DataError(DataErrorCode::UnknownRecord, "manifest names unknown record '" + e.id + "'");
        const auto path = dir / e.path;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw DataError(DataErrorCode::Io, "cannot create '" + path.parent_path().string() + "'");
        write_record_file(path, *it);
    }
    const std::string csv = manifest_to_csv(manifest);
    write_file_bytes(dir / "manifest.csv", std::vector<std::uint8_t>(csv.begin(), csv.end()));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::filesystem::path path = manifest_path;
    if (std::filesystem::is_directory(path)) path /= "manifest.csv";
    const auto bytes = read_file_bytes(path);
    Dataset ds;
    ds.manifest = parse_manifest_csv(std::string(bytes.begin(), bytes.end()));
    if (ds.manifest.records.empty()) throw UsageError("no records in '" + path.string() + "'");
    const auto base = path.parent_path();
    for (const auto& e : ds.manifest.records) {
        ds.records.push_back(read_record_file(base / e.path, e.id, e.target));
    }
    return ds;
}

// --- signal operations ------------------------------------------------------

SignalRecord orient_signal(const SignalRecord& r) {
    SignalRecord out = r;
    if (r.samples.empty()) return out;
    const double med = median_of(r.samples);
    float lo = 0.0f;
    float hi = 0.0f;
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const float v = static_cast<float>(static_cast<double>(r.samples[i]) - med);
        out.samples[i] = v;
        if (i == 0 || v < lo) lo = v;
        if (i == 0 || v > hi) hi = v;
    }
    if (std::abs(lo) > std::abs(hi)) {
        for (auto& v : out.samples) v = -v;
        out.flipped = !r.flipped;
    }
    return out;
}

std::vector<float> resample_samples(std::span<const float> x, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw DomainError("resample factor must be positive");
    if (x.empty()) return {};
    const std::size_t n_in = x.size();
    const auto n_out = static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(n_in) * factor)));
    if (n_out == n_in) return {x.begin(), x.end()};
    const double step = static_cast<double>(n_in) / static_cast<double>(n_out);
    std::vector<float> y(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
        const double pos = static_cast<double>(j) * step;
        const auto i0 = static_cast<std::size_t>(pos);
        if (i0 + 1 >= n_in) {
            y[j] = x[n_in - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i0);
        y[j] = static_cast<float>(x[i0] + frac * (static_cast<double>(x[i0 + 1]) - x[i0]));
    }
    return y;
}

SignalRecord resample(const SignalRecord& r, double factor) {
    SignalRecord out = r;
    out.samples = resample_samples(r.samples, factor);
    out.sampling_rate = r.sampling_rate * factor;
    if (r.annotation && out.samples.size() != r.samples.size()) {
        const double scale = static_cast<double>(out.samples.size()) / static_cast<double>(r.samples.size());
        RhythmAnnotation ann{r.annotation->initial_tag, {}};
        for (const auto& cp : r.annotation->changepoints) {
            const auto idx = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::llround(cp.index * scale)),
                                                     out.samples.size() - 1);
            if (!ann.changepoints.empty() && ann.changepoints.back().index >= idx) {
                ann.changepoints.back().tag = cp.tag;
            } else if (idx == 0) {
                ann.initial_tag = cp.tag;
            } else {
                ann.changepoints.push_back({idx, cp.tag});
            }
        }
        out.annotation = std::move(ann);
    }
    return out;
}

std::vector<float> extract_crop(std::span<const float> x, std::size_t start, std::size_t crop_len) {
    if (x.empty()) throw DomainError("extract_crop on an empty signal");
    if (x.size() >= crop_len) {
        if (start + crop_len > x.size()) throw DomainError("crop window extends past the signal end");
        return {x.begin() + static_cast<std::ptrdiff_t>(start),
                x.begin() + static_cast<std::ptrdiff_t>(start + crop_len)};
    }
    const std::size_t left = (crop_len - x.size()) / 2;
    std::vector<float> out(crop_len, x.back());
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(left), x.front());
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(left));
    return out;
}

CropSampler::CropSampler(std::span<const SignalRecord> records, std::size_t crop_len, AugmentConfig augment)
    : crop_len_(crop_len), augment_(augment) {
    if (crop_len == 0) throw UsageError("crop length must be positive");
    oriented_.reserve(records.size());
    for (const auto& r : records) {
        by_class_[r.hard_class()].push_back(oriented_.size());
        oriented_.push_back(orient_signal(r));
    }
    if (by_class_[0].empty() || by_class_[1].empty()) {
        throw UsageError("class-balanced sampling needs records of both classes");
    }
    if (augment_.enabled && !(augment_.resample_min > 0.0 && augment_.resample_min <= augment_.resample_max)) {
        throw UsageError("resample range must satisfy 0 < min <= max");
    }
}

CropBatch CropSampler::sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0 || batch_size % 2 != 0) throw UsageError("batch size must be a positive even number");
    CropBatch batch;
    batch.crops = Tensor3<float>(batch_size, 1, crop_len_);
    batch.targets.reserve(batch_size);
    batch.provenance.reserve(batch_size);
    const std::size_t per_class = batch_size / 2;
    std::size_t row = 0;
    for (int cls = 0; cls < 2; ++cls) {
        const auto& pool = by_class_[cls];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            const SignalRecord& rec = oriented_[pool[pick(rng)]];
            double factor = 1.0;
            if (augment_.enabled) {
                factor = std::uniform_real_distribution<double>(augment_.resample_min, augment_.resample_max)(rng);
            }
            std::vector<float> resampled;
            std::span<const float> src = rec.samples;
            if (factor != 1.0) {
                resampled = resample_samples(rec.samples, factor);
                src = resampled;
            }
            CropProvenance prov{rec.id, 0, factor, false, rec.flipped};
            if (src.size() >= crop_len_) {
                prov.start = std::uniform_int_distribution<std::size_t>(0, src.size() - crop_len_)(rng);
            } else {
                prov.padded = true;
            }
            const auto crop = extract_crop(src, prov.start, crop_len_);
            std::copy(crop.begin(), crop.end(), batch.crops.row(row, 0).begin());
            batch.targets.push_back(rec.target);
            batch.provenance.push_back(std::move(prov));
        }
    }
    return batch;
}

CropBatch sample_crop_batch(std::span<const SignalRecord> records, std::size_t batch_size, std::size_t crop_len,
                            const AugmentConfig& augment, Rng& rng) {
    return CropSampler(records, crop_len, augment).sample(batch_size, rng);
}

double soft_target_for_segment(const SignalRecord& r, std::size_t start, std::size_t len) {
    if (!r.annotation) throw UsageError("record '" + r.id + "' has no changepoint annotation");
    if (len == 0 || start + len > r.samples.size()) throw DomainError("segment outside record '" + r.id + "'");
    const auto& ann = *r.annotation;
    const std::size_t end = start + len;
    std::size_t af = 0;
    std::size_t seg_begin = 0;
    std::uint8_t tag = ann.initial_tag;
    // walk the piecewise-constant intervals [seg_begin, next change)
    for (std::size_t k = 0; k <= ann.changepoints.size(); ++k) {
        const std::size_t seg_end = k < ann.changepoints.size() ? ann.changepoints[k].index : r.samples.size();
        if (tag == kTagAf) {
            const std::size_t lo = std::max(seg_begin, start);
            const std::size_t hi = std::min(seg_end, end);
            if (hi > lo) af += hi - lo;
        }
        if (k < ann.changepoints.size()) {
            seg_begin = seg_end;
            tag = ann.changepoints[k].tag;
        }
    }
    return static_cast<double>(af) / static_cast<double>(len);
}

std::vector<SegmentSample> sample_changepoint_segments(const SignalRecord& r, std::size_t crop_len, std::size_t n,
                                                       Rng& rng) {
    if (!r.annotation || r.annotation->changepoints.empty()) {
        throw UsageError("record '" + r.id + "' has no changepoints to sample around");
    }
    if (crop_len == 0 || r.samples.size() < crop_len) {
        throw UsageError("record '" + r.id + "' is shorter than the crop length");
    }
    const auto& cps = r.annotation->changepoints;
    std::uniform_int_distribution<std::size_t> pick(0, cps.size() - 1);
    std::uniform_int_distribution<std::size_t> offset(0, crop_len - 1);
    const std::size_t max_start = r.samples.size() - crop_len;
    std::vector<SegmentSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cp = static_cast<std::size_t>(cps[pick(rng)].index);
        const std::size_t off = offset(rng);
        const std::size_t start = std::min(cp >= off ? cp - off : 0, max_start);
        out.push_back({start, soft_target_for_segment(r, start, crop_len)});
    }
    return out;
}

CropBatch sample_changepoint_batch(std::span<const SignalRecord> records, std::size_t batch_size,
                                   std::size_t crop_len, Rng& rng) {
    std::vector<const SignalRecord*> usable;
    for (const auto& r : records) {
        if (r.annotation && !r.annotation->changepoints.empty() && r.samples.size() >= crop_len) usable.push_back(&r);
    }
    if (usable.empty()) throw UsageError("no annotated records with changepoints for segment sampling");
    if (batch_size == 0) throw UsageError("batch size must be positive");
    CropBatch batch;
    batch.crops = Tensor3<float>(batch_size, 1, crop_len);
    std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
    for (std::size_t row = 0; row < batch_size; ++row) {
        const SignalRecord& rec = *usable[pick(rng)];
        const auto seg = sample_changepoint_segments(rec, crop_len, 1, rng).front();
        std::copy_n(rec.samples.begin() + static_cast<std::ptrdiff_t>(seg.start), crop_len,
                    batch.crops.row(row, 0).begin());
        batch.targets.push_back(seg.target);
        batch.provenance.push_back({rec.id, seg.start, 1.0, false, rec.flipped});
    }
    return batch;
}

DatasetManifest split_dataset(const std::vector<SignalRecord>& records, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must be in (0, 1)");
    const std::size_t n = records.size();
    if (n < 2) throw UsageError("splitting needs at least 2 records");
    Rng rng(seed);

    std::vector<std::size_t> idx[2];
    for (std::size_t i = 0; i < n; ++i) idx[records[i].hard_class()].push_back(i);
    for (auto& v : idx) std::shuffle(v.begin(), v.end(), rng);

    auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * train_fraction - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    // proportional per-class quotas, largest remainder first
    std::size_t quota[2];
    double rem[2];
    for (int c = 0; c < 2; ++c) {
        const double exact = static_cast<double>(idx[c].size()) * static_cast<double>(n_train) / static_cast<double>(n);
        quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[c] = exact - static_cast<double>(quota[c]);
    }
    while (quota[0] + quota[1] < n_train) {
        const int c = (rem[1] > rem[0] && quota[1] < idx[1].size()) || quota[0] >= idx[0].size() ? 1 : 0;
        ++quota[c];
        rem[c] = -1.0;
    }
    // keep both classes on both sides whenever a class has two or more records
    for (int c = 0; c < 2; ++c) {
        const int o = 1 - c;
        if (idx[c].size() < 2) continue;
        if (quota[c] == 0 && quota[o] > 1) {
            ++quota[c];
            --quota[o];
        } else if (quota[c] == idx[c].size() && quota[o] < idx[o].size()) {
            --quota[c];
            ++quota[o];
        }
    }

    std::vector<Split> split(n, Split::Val);
    for (int c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < quota[c]; ++k) split[idx[c][k]] = Split::Train;

    DatasetManifest m;
    m.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        m.records.push_back({records[i].id, "records/" + records[i].id + ".bgs", records[i].target, split[i]});
    }
    return m;
}

}  // namespace betaunc
