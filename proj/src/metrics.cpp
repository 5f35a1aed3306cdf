#include "betaunc/metrics.hpp"

#include <charconv>

#include "betaunc/errors.hpp"

namespace betaunc {

namespace {

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassMetrics m;
    m.precision = ratio(tp, tp + fp, m.degenerate);
    m.recall = ratio(tp, tp + fn, m.degenerate);
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1 = 0.0;
        m.degenerate = true;
    }
    return m;
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

ConfusionCounts confusion(std::span<const Prediction> preds, bool only_accepted) {
    ConfusionCounts c;
    for (const auto& p : preds) {
        if (only_accepted && !p.accepted.value_or(true)) continue;
        if (!p.true_target) throw UsageError("prediction for '" + p.record_id + "' has no true target");
        const bool truth = *p.true_target >= 0.5;
        const bool pred = p.predicted_class == 1;
        if (pred && truth) ++c.tp;
        else if (pred && !truth) ++c.fp;
        else if (!pred && truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricsReport report(const ConfusionCounts& c) {
    MetricsReport r;
    r.af = class_metrics(c.tp, c.fp, c.fn);
    r.normal = class_metrics(c.tn, c.fn, c.fp);
    r.macro.precision = 0.5 * (r.af.precision + r.normal.precision);
    r.macro.recall = 0.5 * (r.af.recall + r.normal.recall);
    r.macro.f1 = 0.5 * (r.af.f1 + r.normal.f1);
    r.macro.degenerate = r.af.degenerate || r.normal.degenerate;
    r.n_evaluated = c.total();
    r.n_misclassified = c.fp + c.fn;
    return r;
}

std::vector<std::pair<double, MetricsReport>> coverage_curve(std::vector<Prediction> preds,
                                                             std::span<const double> fractions) {
    std::vector<std::pair<double, MetricsReport>> out;
    out.reserve(fractions.size());
    for (double f : fractions) {
        reject_by_uncertainty(preds, f);
        out.emplace_back(f, report(confusion(preds, true)));
    }
    return out;
}

std::string report_to_csv(const MetricsReport& r) {
    std::string out = "class,precision,recall,f1\n";
    const auto row = [&](const char* name, const ClassMetrics& m) {
        out += std::string(name) + "," + fmt(m.precision) + "," + fmt(m.recall) + "," + fmt(m.f1) + "\n";
    };
    row("A", r.af);
    row("NO", r.normal);
    row("Overall", r.macro);
    return out;
}

}  // namespace betaunc
