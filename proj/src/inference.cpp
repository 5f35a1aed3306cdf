#include "betaunc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "betaunc/binary_io.hpp"
#include "betaunc/errors.hpp"
#include "json.hpp"

namespace betaunc {

namespace {

constexpr std::size_t kInferChunk = 256;

}  // namespace

std::vector<CropWindow> decompose_crops(std::size_t length, std::size_t crop_len) {
    if (length == 0) throw DomainError("cannot decompose an empty signal");
    if (crop_len == 0) throw DomainError("crop length must be positive");
    if (length < crop_len) return {{0, true}};
    const std::size_t k = length / crop_len;
    std::vector<CropWindow> out;
    out.reserve(k + 1);
    for (std::size_t i = 0; i < k; ++i) out.push_back({i * crop_len, false});
    const std::size_t remainder = length - k * crop_len;
    if (remainder > 0 && 2 * remainder >= crop_len) out.push_back({length - crop_len, false});
    return out;
}

Tensor3<float> gather_crops(std::span<const float> samples, std::span<const CropWindow> windows,
                            std::size_t crop_len) {
    Tensor3<float> t(windows.size(), 1, crop_len);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto crop = extract_crop(samples, windows[i].start, crop_len);
        std::copy(crop.begin(), crop.end(), t.row(i, 0).begin());
    }
    return t;
}

Prediction summarize_prediction(std::string record_id, BetaMixture mixture, double decision_threshold,
                                std::optional<double> true_target) {
    const PredictiveSummary s = mixture_summary(mixture);
    return Prediction{std::move(record_id), s, std::move(mixture), s.mean >= decision_threshold ? 1 : 0,
                      true_target, std::nullopt};
}

Prediction predict(const Model& model, const SignalRecord& record, double decision_threshold) {
    const std::size_t crop_len = model.spec().input_length;
    const SignalRecord oriented = orient_signal(record);
    const auto windows = decompose_crops(oriented.samples.size(), crop_len);
    std::vector<BetaParams> components;
    components.reserve(windows.size());
    for (std::size_t off = 0; off < windows.size(); off += kInferChunk) {
        const std::size_t n = std::min(kInferChunk, windows.size() - off);
        const auto crops = gather_crops(oriented.samples, std::span(windows).subspan(off, n), crop_len);
        const auto params = model.predict(crops);
        components.insert(components.end(), params.begin(), params.end());
    }
    return summarize_prediction(record.id, BetaMixture(std::move(components)), decision_threshold, record.target);
}

RejectionResult reject_by_uncertainty(std::vector<Prediction>& preds, double keep_fraction) {
    if (preds.empty()) throw DomainError("reject_by_uncertainty on an empty prediction list");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw DomainError("keep_fraction must be in (0, 1]");
    const std::size_t n = preds.size();
    auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preds[a].summary.uncertainty < preds[b].summary.uncertainty;
    });
    for (std::size_t rank = 0; rank < n; ++rank) preds[order[rank]].accepted = rank < keep;
    return {keep, preds[order[keep - 1]].summary.uncertainty};
}

void reject_by_threshold(std::vector<Prediction>& preds, double tau) {
    for (auto& p : preds) p.accepted = p.summary.uncertainty <= tau;
}

std::string prediction_to_json(const Prediction& p) {
    nlohmann::ordered_json j;
    j["id"] = p.record_id;
    j["mean"] = p.summary.mean;
    j["variance"] = p.summary.variance;
    j["uncertainty"] = p.summary.uncertainty;
    j["class"] = p.predicted_class;
    j["accepted"] = p.accepted ? nlohmann::ordered_json(*p.accepted) : nlohmann::ordered_json(nullptr);
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : p.components.components()) comps.push_back({c.alpha(), c.beta()});
    j["components"] = std::move(comps);
    return j.dump();
}

void write_predictions_jsonl(const std::filesystem::path& path, std::span<const Prediction> preds) {
    std::string text;
    for (const auto& p : preds) {
        text += prediction_to_json(p);
        text += '\n';
    }
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace betaunc
