#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "betaunc/beta.hpp"
#include "betaunc/checkpoint.hpp"
#include "betaunc/cli.hpp"
#include "betaunc/config.hpp"
#include "betaunc/data.hpp"
#include "betaunc/errors.hpp"
#include "betaunc/inference.hpp"
#include "betaunc/metrics.hpp"
#include "betaunc/synth.hpp"
#include "betaunc/train.hpp"

namespace py = pybind11;
using namespace betaunc;

namespace {

std::vector<BetaParams> to_components(const std::vector<std::pair<double, double>>& ab) {
    std::vector<BetaParams> out;
    out.reserve(ab.size());
    for (const auto& [a, b] : ab) out.emplace_back(a, b);
    return out;
}

py::dict summary_dict(const PredictiveSummary& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["variance"] = s.variance;
    d["uncertainty"] = s.uncertainty;
    return d;
}

SignalRecord make_record(std::string id, py::array_t<float, py::array::c_style | py::array::forcecast> samples,
                         double target, double sampling_rate) {
    SignalRecord r;
    r.id = std::move(id);
    r.samples.assign(samples.data(), samples.data() + samples.size());
    r.target = target;
    r.sampling_rate = sampling_rate;
    r.validate();
    return r;
}

}  // namespace

PYBIND11_MODULE(_betaunc, m) {
    m.doc() = "Beta-likelihood uncertainty estimation for single-lead signal classification";

    static py::exception<DataError> data_error(m, "DataError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DataError& e) {
            data_error(e.what());
        } catch (const UsageError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    // beta distribution math
    m.def("ln_gamma", &ln_gamma);
    m.def("digamma", &digamma);
    m.def("ln_beta", &ln_beta_fn, py::arg("alpha"), py::arg("beta"));
    m.def(
        "beta_log_pdf", [](double t, double a, double b) { return beta_log_pdf(t, BetaParams(a, b)); }, py::arg("t"),
        py::arg("alpha"), py::arg("beta"));
    m.def(
        "beta_nll_grad",
        [](double t, double a, double b) {
            const auto g = beta_nll_grad(t, BetaParams(a, b));
            return std::make_pair(g.d_alpha, g.d_beta);
        },
        py::arg("t"), py::arg("alpha"), py::arg("beta"), "Gradient of the negative log density w.r.t. (alpha, beta).");
    m.def(
        "mixture_summary",
        [](const std::vector<std::pair<double, double>>& comps) {
            return summary_dict(mixture_summary(BetaMixture(to_components(comps))));
        },
        py::arg("components"), "Mean, variance and uncertainty (4 * variance) of an equal-weight beta mixture.");
    m.def(
        "density_grid",
        [](const std::vector<std::pair<double, double>>& comps, std::size_t n_points, double eps) {
            std::vector<std::pair<double, double>> out;
            for (const auto& p : mixture_density_grid(BetaMixture(to_components(comps)), n_points, eps)) {
                out.emplace_back(p.t, p.pdf);
            }
            return out;
        },
        py::arg("components"), py::arg("n_points") = 201, py::arg("eps") = 1e-4);

    // records
    py::class_<SignalRecord>(m, "Record")
        .def(py::init(&make_record), py::arg("id"), py::arg("samples"), py::arg("target") = 0.0,
             py::arg("sampling_rate") = 300.0)
        .def_readonly("id", &SignalRecord::id)
        .def_readonly("target", &SignalRecord::target)
        .def_readonly("sampling_rate", &SignalRecord::sampling_rate)
        .def_property_readonly("samples",
                               [](const SignalRecord& r) { return py::array_t<float>(r.samples.size(), r.samples.data()); })
        .def("__repr__", [](const SignalRecord& r) {
            return "<Record " + r.id + " n=" + std::to_string(r.samples.size()) + " target=" + std::to_string(r.target) +
                   ">";
        });

    m.def(
        "synth_generate",
        [](std::size_t n_per_class, std::uint64_t seed, double max_seconds) {
            return synth_generate(n_per_class, max_seconds, seed);
        },
        py::arg("n_per_class"), py::arg("seed") = 0, py::arg("max_seconds") = 61.0);
    m.def(
        "load_dataset",
        [](const std::filesystem::path& path) {
            const Dataset ds = load_dataset(path);
            return std::make_pair(ds.subset(Split::Train), ds.subset(Split::Val));
        },
        py::arg("path"), "Returns (train_records, val_records).");

    // predictions
    py::class_<Prediction>(m, "Prediction")
        .def_readonly("id", &Prediction::record_id)
        .def_property_readonly("mean", [](const Prediction& p) { return p.summary.mean; })
        .def_property_readonly("variance", [](const Prediction& p) { return p.summary.variance; })
        .def_property_readonly("uncertainty", [](const Prediction& p) { return p.summary.uncertainty; })
        .def_readonly("predicted_class", &Prediction::predicted_class)
        .def_readonly("true_target", &Prediction::true_target)
        .def_readonly("accepted", &Prediction::accepted)
        .def_property_readonly("components",
                               [](const Prediction& p) {
                                   std::vector<std::pair<double, double>> out;
                                   for (const auto& c : p.components.components()) out.emplace_back(c.alpha(), c.beta());
                                   return out;
                               })
        .def("to_json", &prediction_to_json);

    m.def(
        "reject_by_uncertainty",
        [](std::vector<Prediction> preds, double keep_fraction) {
            reject_by_uncertainty(preds, keep_fraction);
            return preds;
        },
        py::arg("predictions"), py::arg("keep_fraction") = 0.9, "Copies of the predictions with `accepted` set.");
    m.def(
        "evaluate",
        [](const std::vector<Prediction>& preds, bool only_accepted) {
            const auto r = report(confusion(preds, only_accepted));
            py::dict d;
            d["macro_f1"] = r.macro.f1;
            d["f1_af"] = r.af.f1;
            d["f1_normal"] = r.normal.f1;
            d["n_evaluated"] = r.n_evaluated;
            d["n_misclassified"] = r.n_misclassified;
            d["csv"] = report_to_csv(r);
            return d;
        },
        py::arg("predictions"), py::arg("only_accepted") = false);

    // model
    py::class_<Model>(m, "Model")
        .def_static(
            "build", [](const std::string& preset, std::uint64_t seed) { return build_model(preset, seed); },
            py::arg("preset") = "tiny", py::arg("seed") = 0)
        .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"))
        .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(self, p); },
             py::arg("path"))
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def_property_readonly("input_length", [](const Model& self) { return self.spec().input_length; })
        .def("spatial_chain", [](const Model& self) { return self.spec().spatial_chain(); })
        .def("predict", &predict, py::arg("record"), py::arg("decision_threshold") = kDefaultDecisionThreshold,
             py::call_guard<py::gil_scoped_release>())
        .def(
            "predict_all",
            [](const Model& self, const std::vector<SignalRecord>& records, double threshold) {
                return predict_all(self, records, threshold);
            },
            py::arg("records"), py::arg("decision_threshold") = kDefaultDecisionThreshold,
            py::call_guard<py::gil_scoped_release>());

    m.def(
        "train",
        [](const std::string& config_text, const std::vector<SignalRecord>& train_records,
           const std::vector<SignalRecord>& val_records) {
            const RunConfig cfg = RunConfig::parse(config_text);
            Model model = build_model(cfg);
            TrainLog log;
            {
                py::gil_scoped_release release;
                log = train(model, train_records, val_records, cfg);
            }
            return std::make_pair(std::move(model), log.to_json());
        },
        py::arg("config"), py::arg("train_records"), py::arg("val_records") = std::vector<SignalRecord>{},
        "Trains from key=value config text; returns (model, log_json).");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
