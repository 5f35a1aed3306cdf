#include "betaunc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "betaunc/binary_io.hpp"
#include "betaunc/checkpoint.hpp"
#include "betaunc/config.hpp"
#include "betaunc/data.hpp"
#include "betaunc/errors.hpp"
#include "betaunc/inference.hpp"
#include "betaunc/metrics.hpp"
#include "betaunc/synth.hpp"
#include "betaunc/train.hpp"
#include "json.hpp"

namespace betaunc {

namespace {

constexpr double kTrainFraction = 0.8;

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

double checkpoint_threshold(const Model& m) {
    const auto it = m.config_echo().find("decision_threshold");
    if (it == m.config_echo().end()) return kDefaultDecisionThreshold;
    double v = kDefaultDecisionThreshold;
    std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    return v;
}

struct SynthArgs {
    std::string out;
    std::size_t n_per_class = 0;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
};

struct PredictArgs {
    std::string model;
    std::string data;
    std::vector<std::string> ids;
    std::string out;
};

struct EvalArgs {
    std::string model;
    std::string data;
    double keep_fraction = 0.9;
    std::string out;
};

struct DensityArgs {
    std::string model;
    std::string data;
    std::string id;
    std::size_t points = 201;
    double eps = 1e-4;
    std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
    if (a.n_per_class == 0) throw UsageError("--n-per-class must be at least 1");
    const auto records = synth_generate(a.n_per_class, 61.0, a.seed);
    const auto manifest = split_dataset(records, kTrainFraction, a.seed);
    write_dataset(a.out, records, manifest);
    out << "wrote " << records.size() << " records to " << a.out << "\n";
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
    const RunConfig cfg = RunConfig::load(a.config);
    const Dataset ds = load_dataset(a.data);
    const auto train_set = ds.subset(Split::Train);
    const auto val_set = ds.subset(Split::Val);
    if (train_set.empty()) throw UsageError("dataset has no training records");
    if (cfg.sampling == Sampling::Balanced) {
        const bool has0 = std::any_of(train_set.begin(), train_set.end(), [](auto& r) { return r.hard_class() == 0; });
        const bool has1 = std::any_of(train_set.begin(), train_set.end(), [](auto& r) { return r.hard_class() == 1; });
        if (!has0 || !has1) throw UsageError("training split must contain both classes");
    }
    Model model = build_model(cfg);
    const TrainLog log = train(model, train_set, val_set, cfg);
    save_checkpoint(model, a.out);
    write_text(a.out + ".log.json", log.to_json() + "\n");
    out << "trained " << log.epochs.size() << " epochs (" << log.steps << " steps), checkpoint " << a.out << "\n";
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
    const Model model = load_checkpoint(a.model);
    const Dataset ds = load_dataset(a.data);
    std::vector<SignalRecord> selected;
    if (a.ids.empty()) {
        selected = ds.records;
    } else {
        for (const auto& id : a.ids) {
            const SignalRecord* r = ds.find(id);
            if (!r) throw DataError(DataErrorCode::UnknownRecord, "no record with id '" + id + "'");
            selected.push_back(*r);
        }
    }
    const auto preds = predict_all(model, selected, checkpoint_threshold(model));
    write_predictions_jsonl(a.out, preds);
    out << "wrote " << preds.size() << " predictions to " << a.out << "\n";
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Model model = load_checkpoint(a.model);
    const Dataset ds = load_dataset(a.data);
    const auto val_set = ds.subset(Split::Val);
    if (val_set.empty()) throw UsageError("dataset has no validation records");
    auto preds = predict_all(model, val_set, checkpoint_threshold(model));
    const MetricsReport all = report(confusion(preds, false));
    const RejectionResult rej = reject_by_uncertainty(preds, a.keep_fraction);
    const MetricsReport accepted = report(confusion(preds, true));

    std::string csv = "subset,class,precision,recall,f1\n";
    const auto rows = [&](const char* subset, const MetricsReport& r) {
        const std::string body = report_to_csv(r);
        std::size_t pos = body.find('\n') + 1;
        while (pos < body.size()) {
            const std::size_t end = body.find('\n', pos);
            csv += std::string(subset) + "," + body.substr(pos, end - pos + 1);
            pos = end + 1;
        }
    };
    rows("all", all);
    rows("accepted", accepted);
    write_text(a.out, csv);

    nlohmann::ordered_json summary;
    summary["keep_fraction"] = a.keep_fraction;
    summary["uncertainty_threshold"] = rej.threshold;
    summary["n_all"] = all.n_evaluated;
    summary["n_accepted"] = accepted.n_evaluated;
    summary["misclassified_all"] = all.n_misclassified;
    summary["misclassified_accepted"] = accepted.n_misclassified;
    summary["macro_f1_all"] = all.macro.f1;
    summary["macro_f1_accepted"] = accepted.macro.f1;
    write_text(a.out + ".json", summary.dump(2) + "\n");

    out << "macro F1 all=" << fmt(all.macro.f1) << " accepted=" << fmt(accepted.macro.f1)
        << " misclassified " << all.n_misclassified << " -> " << accepted.n_misclassified
        << " (uncertainty threshold " << fmt(rej.threshold) << ")\n";
}

void cmd_density(const DensityArgs& a, std::ostream& out) {
    const Model model = load_checkpoint(a.model);
    const Dataset ds = load_dataset(a.data);
    const SignalRecord* r = ds.find(a.id);
    if (!r) throw DataError(DataErrorCode::UnknownRecord, "no record with id '" + a.id + "'");
    const Prediction p = predict(model, *r, checkpoint_threshold(model));
    std::string csv = "t,pdf\n";
    for (const auto& pt : mixture_density_grid(p.components, a.points, a.eps)) {
        csv += fmt(pt.t) + "," + fmt(pt.pdf) + "\n";
    }
    write_text(a.out, csv);
    out << "wrote " << a.points << " density points for " << a.id << " to " << a.out << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Beta-likelihood uncertainty estimation for single-lead signal classification", "betaunc"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic two-class dataset with an 80/20 split");
    s->add_option("--out", synth.out, "Output dataset directory")->required();
    s->add_option("--n-per-class", synth.n_per_class, "Records per class")->required();
    s->add_option("--seed", synth.seed, "Random seed");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model; writes CKPT and CKPT.log.json");
    t->add_option("--config", tr.config, "key=value run configuration")->required();
    t->add_option("--data", tr.data, "Dataset directory or manifest.csv")->required();
    t->add_option("--out", tr.out, "Checkpoint path")->required();

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Predict records; writes JSON lines");
    p->add_option("--model", pr.model, "Checkpoint path")->required();
    p->add_option("--data", pr.data, "Dataset directory or manifest.csv")->required();
    p->add_option("--ids", pr.ids, "Record ids (default: all records)");
    p->add_option("--out", pr.out, "Output .jsonl path")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate the validation split with and without rejection");
    e->add_option("--model", ev.model, "Checkpoint path")->required();
    e->add_option("--data", ev.data, "Dataset directory or manifest.csv")->required();
    e->add_option("--keep-fraction", ev.keep_fraction, "Fraction of most certain predictions kept")
        ->check(CLI::Range(0.0, 1.0));
    e->add_option("--out", ev.out, "Report CSV (summary written to OUT.json)")->required();

    DensityArgs de;
    auto* d = app.add_subcommand("density", "Export the predictive density of one record as CSV");
    d->add_option("--model", de.model, "Checkpoint path")->required();
    d->add_option("--data", de.data, "Dataset directory or manifest.csv")->required();
    d->add_option("--id", de.id, "Record id")->required();
    d->add_option("--points", de.points, "Grid points");
    d->add_option("--eps", de.eps, "Grid covers [eps, 1 - eps]");
    d->add_option("--out", de.out, "Output CSV path")->required();

    app.footer(
        "Outputs: predict writes one JSON object per line with id, mean, variance, uncertainty, class,\n"
        "accepted and components [[alpha, beta], ...]; eval writes subset,class,precision,recall,f1 rows\n"
        "(subsets all/accepted, classes A/NO/Overall); density writes t,pdf rows.\n"
        "Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 internal invariant failure.");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*s) cmd_synth(synth, out);
        else if (*t) cmd_train(tr, out);
        else if (*p) cmd_predict(pr, out);
        else if (*e) {
            if (!(ev.keep_fraction > 0.0)) throw UsageError("--keep-fraction must be in (0, 1]");
            cmd_eval(ev, out);
        } else if (*d) cmd_density(de, out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const DataError& ex) {
        err << "data error: " << ex.what() << "\n";
        return kExitData;
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}

}  // namespace betaunc
