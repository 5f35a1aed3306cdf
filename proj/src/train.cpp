#include "betaunc/train.hpp"

#include <cmath>
#include <limits>

#include "betaunc/errors.hpp"
#include "betaunc/metrics.hpp"
#include "json.hpp"

namespace betaunc {

namespace {

constexpr std::size_t kValSegmentsPerRecord = 8;

struct ValItem {
    std::string id;
    double target;
    Tensor3<float> crops;
};

std::vector<ValItem> prepare_val_records(std::span<const SignalRecord> records, std::size_t crop_len) {
    std::vector<ValItem> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const SignalRecord o = orient_signal(r);
        const auto windows = decompose_crops(o.samples.size(), crop_len);
        out.push_back({r.id, r.target, gather_crops(o.samples, windows, crop_len)});
    }
    return out;
}

CropBatch prepare_val_segments(std::span<const SignalRecord> oriented, std::size_t crop_len, Rng& rng) {
    CropBatch batch;
    std::vector<std::pair<const SignalRecord*, SegmentSample>> segs;
    for (const auto& r : oriented) {
        if (!r.annotation || r.annotation->changepoints.empty() || r.samples.size() < crop_len) continue;
        for (const auto& s : sample_changepoint_segments(r, crop_len, kValSegmentsPerRecord, rng)) {
            segs.emplace_back(&r, s);
        }
    }
    batch.crops = Tensor3<float>(segs.size(), 1, crop_len);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& [rec, s] = segs[i];
        std::copy_n(rec->samples.begin() + static_cast<std::ptrdiff_t>(s.start), crop_len,
                    batch.crops.row(i, 0).begin());
        batch.targets.push_back(s.target);
        batch.provenance.push_back({rec->id, s.start, 1.0, false, rec->flipped});
    }
    return batch;
}

std::size_t auto_steps(std::span<const SignalRecord> records, std::size_t crop_len, std::size_t batch) {
    std::size_t windows = 0;
    for (const auto& r : records) windows += std::max<std::size_t>(1, r.samples.size() / crop_len);
    return std::max<std::size_t>(1, (windows + batch - 1) / batch);
}

}  // namespace

std::string TrainLog::to_json() const {
    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : epochs) {
        nlohmann::ordered_json row;
        row["epoch"] = e.epoch;
        row["train_loss"] = e.train_loss;
        row["probe_loss"] = e.probe_loss;
        row["val_loss"] = e.val_loss ? nlohmann::ordered_json(*e.val_loss) : nlohmann::ordered_json(nullptr);
        row["val_macro_f1"] =
            e.val_macro_f1 ? nlohmann::ordered_json(*e.val_macro_f1) : nlohmann::ordered_json(nullptr);
        arr.push_back(std::move(row));
    }
    j["epochs"] = std::move(arr);
    j["best_epoch"] = best_epoch ? nlohmann::ordered_json(*best_epoch) : nlohmann::ordered_json(nullptr);
    j["stopped_early"] = stopped_early;
    j["steps"] = steps;
    return j.dump(2);
}

ModelOptions model_options(const RunConfig& cfg) { return {cfg.bn_momentum, cfg.bn_eps}; }

Model build_model(const RunConfig& cfg) {
    Model m(ArchitectureSpec::from_preset(cfg.arch_preset), cfg.seed, model_options(cfg));
    m.config_echo() = cfg.echo();
    return m;
}

std::vector<Prediction> predict_all(const Model& model, std::span<const SignalRecord> records,
                                    double decision_threshold) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(predict(model, r, decision_threshold));
    return out;
}

TrainLog train(Model& model, std::span<const SignalRecord> train_records, std::span<const SignalRecord> val_records,
               const RunConfig& cfg) {
    const std::size_t crop_len = cfg.effective_crop_len();
    if (crop_len != model.spec().input_length) {
        throw UsageError("config crop length does not match the model input length");
    }
    if (train_records.empty()) throw UsageError("no training records");

    auto& adam = model.optimizer();
    adam.learning_rate = cfg.learning_rate;
    adam.beta1 = cfg.adam_beta1;
    adam.beta2 = cfg.adam_beta2;
    adam.epsilon = cfg.adam_eps;

    TrainLog log;
    if (cfg.epochs == 0) return log;

    Rng rng(cfg.seed);
    const AugmentConfig augment{cfg.augment, cfg.resample_min, cfg.resample_max};
    const bool balanced = cfg.sampling == Sampling::Balanced;

    std::optional<CropSampler> sampler;
    std::vector<SignalRecord> oriented_train;
    if (balanced) {
        sampler.emplace(train_records, crop_len, augment);
    } else {
        for (const auto& r : train_records) oriented_train.push_back(orient_signal(r));
    }
    const auto draw = [&]() {
        return balanced ? sampler->sample(cfg.batch_size, rng)
                        : sample_changepoint_batch(oriented_train, cfg.batch_size, crop_len, rng);
    };

    const CropBatch probe = draw();

    std::vector<ValItem> val_items;
    CropBatch val_segments;
    if (!val_records.empty()) {
        if (balanced) {
            val_items = prepare_val_records(val_records, crop_len);
        } else {
            std::vector<SignalRecord> oriented_val;
            for (const auto& r : val_records) oriented_val.push_back(orient_signal(r));
            val_segments = prepare_val_segments(oriented_val, crop_len, rng);
        }
    }
    const bool has_val = balanced ? !val_items.empty() : val_segments.crops.batch > 0;

    const std::size_t steps =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : auto_steps(train_records, crop_len, cfg.batch_size);
    auto params = model.params();

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<NamedTensor> best_weights;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLog e;
        e.epoch = epoch;
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const CropBatch batch = draw();
            loss_sum += model.loss_and_grads(batch.crops, batch.targets, cfg.label_eps);
            adam_step<float>(params, adam);
            ++log.steps;
        }
        e.train_loss = loss_sum / static_cast<double>(steps);
        e.probe_loss = model.evaluate_loss(probe.crops, probe.targets, cfg.label_eps, Mode::Train);

        if (has_val) {
            if (balanced) {
                double nll = 0.0;
                std::size_t count = 0;
                std::vector<Prediction> preds;
                for (const auto& item : val_items) {
                    const auto comps = model.predict(item.crops);
                    const double t = clip_label(item.target, cfg.label_eps);
                    for (const auto& c : comps) nll -= beta_log_pdf(t, c);
                    count += comps.size();
                    preds.push_back(summarize_prediction(item.id, BetaMixture(comps), cfg.decision_threshold,
                                                         item.target));
                }
                e.val_loss = nll / static_cast<double>(count);
                e.val_macro_f1 = report(confusion(preds, false)).macro.f1;
            } else {
                e.val_loss = model.evaluate_loss(val_segments.crops, val_segments.targets, cfg.label_eps, Mode::Infer);
            }
            if (*e.val_loss < best_val) {
                best_val = *e.val_loss;
                log.best_epoch = epoch;
                since_best = 0;
                if (cfg.patience > 0) best_weights = model.named_tensors();
            } else {
                ++since_best;
            }
        }
        log.epochs.push_back(e);
        if (has_val && cfg.patience > 0 && since_best >= cfg.patience) {
            log.stopped_early = true;
            break;
        }
    }

    if (has_val && cfg.patience > 0 && !best_weights.empty() && log.best_epoch &&
        *log.best_epoch + 1 != log.epochs.size()) {
        model.load_named_tensors(best_weights);
    }
    return log;
}

}  // namespace betaunc
