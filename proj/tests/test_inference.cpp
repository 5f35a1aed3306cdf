#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "betaunc/inference.hpp"
#include "betaunc/synth.hpp"
#include "betaunc/train.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace betaunc;

namespace {

Prediction fake(std::string id, double uncertainty, int cls = 0, double truth = 0.0) {
    Prediction p{std::move(id), {0.5, uncertainty / 4.0, uncertainty}, BetaMixture({{1.0, 1.0}}), cls, truth, {}};
    return p;
}

std::size_t count_accepted(const std::vector<Prediction>& ps) {
    return static_cast<std::size_t>(std::count_if(ps.begin(), ps.end(), [](auto& p) { return *p.accepted; }));
}

Model uniform_head_model() {
    Model m = build_model("tiny", 1);
    auto ps = m.params();
    std::fill(ps[ps.size() - 2]->value.begin(), ps[ps.size() - 2]->value.end(), 0.0f);
    std::fill(ps.back()->value.begin(), ps.back()->value.end(), static_cast<float>(std::log(std::expm1(1.0))));
    return m;
}

SignalRecord noise_record(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    SignalRecord r;
    r.id = "noise" + std::to_string(seed);
    r.samples.resize(n);
    for (auto& v : r.samples) v = static_cast<float>(g(rng));
    return r;
}

}  // namespace

TEST_CASE("decompose_crops") {
    const std::size_t c = 100;
    CHECK(decompose_crops(300, c) == std::vector<CropWindow>{{0, false}, {100, false}, {200, false}});
    CHECK(decompose_crops(260, c) == std::vector<CropWindow>{{0, false}, {100, false}, {160, false}});
    CHECK(decompose_crops(40, c) == std::vector<CropWindow>{{0, true}});
    CHECK(decompose_crops(249, c).size() == 2);
    CHECK(decompose_crops(250, c).back().start == 150);
    CHECK(decompose_crops(100, c).size() == 1);
    CHECK_THROWS_AS(decompose_crops(0, c), DomainError);
}

TEST_CASE("predict with a forced uniform head") {
    const Model m = uniform_head_model();
    const auto r = noise_record(256 * 3 + 200, 1);
    const Prediction p = predict(m, r);
    CHECK(p.components.size() == 4);
    CHECK(p.summary.mean == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p.summary.uncertainty == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    CHECK(p.predicted_class == 1);
}

TEST_CASE("predict invariants") {
    const Model m = build_model("tiny", 4);
    CHECK(predict(m, noise_record(256, 3)).components.size() == 1);
    CHECK(predict(m, noise_record(100, 3)).components.size() == 1);
    for (std::size_t n : {300, 700, 2000, 256 * 300}) {
        const auto r = noise_record(n, n);
        const Prediction a = predict(m, r);
        const Prediction b = predict(m, r);
        CHECK(a.components.components() == b.components.components());
        CHECK(a.components.size() == decompose_crops(n, 256).size());
        CHECK(a.summary.uncertainty >= 0.0);
        CHECK(a.summary.uncertainty <= 1.0);
        CHECK(a.summary.uncertainty == 4.0 * a.summary.variance);
        CHECK(a.predicted_class == (a.summary.mean >= 0.5 ? 1 : 0));
    }
    SUBCASE("threshold") {
        const Model u = uniform_head_model();
        CHECK(predict(u, noise_record(300, 1), 0.6).predicted_class == 0);
    }
}

TEST_CASE("crop order does not change the summary") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.2, 20.0);
    std::vector<BetaParams> comps;
    for (int i = 0; i < 12; ++i) comps.emplace_back(u(rng), u(rng));
    const auto a = summarize_prediction("x", BetaMixture(comps), 0.5);
    std::shuffle(comps.begin(), comps.end(), rng);
    const auto b = summarize_prediction("x", BetaMixture(comps), 0.5);
    CHECK(a.summary.mean == doctest::Approx(b.summary.mean).epsilon(1e-14));
    CHECK(a.summary.variance == doctest::Approx(b.summary.variance).epsilon(1e-12));
}

TEST_CASE("concurrent predict on a shared model") {
    const Model m = build_model("tiny", 8);
    std::vector<SignalRecord> recs;
    for (std::uint64_t s = 0; s < 8; ++s) recs.push_back(noise_record(1500 + 97 * s, s));
    std::vector<Prediction> serial;
    for (const auto& r : recs) serial.push_back(predict(m, r));
    std::vector<std::optional<Prediction>> parallel(recs.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (std::size_t i = t; i < recs.size(); i += 4) parallel[i] = predict(m, recs[i]);
        });
    }
    for (auto& th : threads) th.join();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(parallel[i]->components.components() == serial[i].components.components());
    }
}

TEST_CASE("reject_by_uncertainty") {
    std::vector<Prediction> ps;
    for (int i = 0; i < 10; ++i) ps.push_back(fake("p" + std::to_string(i), 0.05 * ((i * 7) % 10)));

    auto all = ps;
    const auto r1 = reject_by_uncertainty(all, 1.0);
    CHECK(r1.n_accepted == 10);
    CHECK(count_accepted(all) == 10);

    auto nine = ps;
    const auto r9 = reject_by_uncertainty(nine, 0.9);
    CHECK(r9.n_accepted == 9);
    CHECK(count_accepted(nine) == 9);
    for (const auto& p : nine) {
        if (!*p.accepted) CHECK(p.summary.uncertainty == doctest::Approx(0.45));
    }
    CHECK(r9.threshold == doctest::Approx(0.40));

    SUBCASE("ties go to the earlier input") {
        std::vector<Prediction> eq{fake("a", 0.3), fake("b", 0.3), fake("c", 0.3), fake("d", 0.3)};
        reject_by_uncertainty(eq, 0.5);
        CHECK(*eq[0].accepted);
        CHECK(*eq[1].accepted);
        CHECK_FALSE(*eq[2].accepted);
        CHECK_FALSE(*eq[3].accepted);
    }
    SUBCASE("monotone in keep fraction") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Prediction> base;
        for (int i = 0; i < 37; ++i) base.push_back(fake("r", std::round(u(rng) * 10.0) / 10.0));
        std::vector<bool> prev(base.size(), false);
        for (double f = 0.05; f <= 1.0 + 1e-12; f += 0.05) {
            auto cur = base;
            reject_by_uncertainty(cur, std::min(f, 1.0));
            for (std::size_t i = 0; i < cur.size(); ++i) {
                if (prev[i]) CHECK(*cur[i].accepted);
                prev[i] = *cur[i].accepted;
            }
        }
    }
    SUBCASE("errors") {
        std::vector<Prediction> empty;
        CHECK_THROWS_AS(reject_by_uncertainty(empty, 0.9), DomainError);
        CHECK_THROWS_AS(reject_by_uncertainty(ps, 0.0), DomainError);
        CHECK_THROWS_AS(reject_by_uncertainty(ps, 1.5), DomainError);
    }
}

TEST_CASE("reject_by_threshold") {
    std::vector<Prediction> ps{fake("a", 0.0), fake("b", 0.2), fake("c", 0.7), fake("d", 1.0)};
    reject_by_threshold(ps, 1.0);
    CHECK(count_accepted(ps) == 4);
    reject_by_threshold(ps, 0.0);
    CHECK(count_accepted(ps) == 1);
    CHECK(*ps[0].accepted);
    std::vector<bool> prev(ps.size(), false);
    for (double tau = 0.0; tau <= 1.0; tau += 0.1) {
        reject_by_threshold(ps, tau);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (prev[i]) CHECK(*ps[i].accepted);
            prev[i] = *ps[i].accepted;
        }
    }
}

TEST_CASE("prediction json lines") {
    Prediction p = summarize_prediction("rec-1", BetaMixture({{2.0, 3.0}, {0.5, 0.25}}), 0.5, 1.0);
    const auto j = nlohmann::json::parse(prediction_to_json(p));
    CHECK(j["id"] == "rec-1");
    CHECK(j["accepted"].is_null());
    CHECK(j["components"].size() == 2);
    CHECK(j["components"][1][1].get<double>() == 0.25);
    CHECK(j["uncertainty"].get<double>() == 4.0 * j["variance"].get<double>());
    CHECK(j["mean"].get<double>() == p.summary.mean);

    const std::string text = prediction_to_json(p);
    CHECK(text.find("\"id\"") < text.find("\"mean\""));
    CHECK(text.find("\"accepted\"") < text.find("\"components\""));

    p.accepted = false;
    const auto dir = std::filesystem::temp_directory_path() / "betaunc_test_inference";
    std::filesystem::create_directories(dir);
    const std::vector<Prediction> two{p, p};
    write_predictions_jsonl(dir / "p.jsonl", two);
    std::ifstream f(dir / "p.jsonl");
    int lines = 0;
    for (std::string line; std::getline(f, line); ++lines) CHECK(nlohmann::json::parse(line)["accepted"] == false);
    CHECK(lines == 2);
}

TEST_CASE("a trained tiny model labels a regular rhythm as class 0") {
    SynthOptions o;
    o.n_per_class = 40;
    o.seed = 21;
    o.atypical_fraction = 0.0;
    const auto train_set = synth_generate(o);
    RunConfig cfg;
    cfg.arch_preset = "tiny";
    cfg.batch_size = 64;
    cfg.epochs = 40;
    cfg.steps_per_epoch = 40;
    cfg.patience = 0;
    cfg.seed = 21;
    Model m = build_model(cfg);
    train(m, train_set, {}, cfg);

    o.n_per_class = 5;
    o.seed = 99;
    int correct = 0;
    int regular = 0;
    for (const auto& r : synth_generate(o)) {
        if (r.hard_class() != 0) continue;
        ++regular;
        correct += predict(m, r).predicted_class == 0;
    }
    CHECK(regular == 5);
    CHECK(correct == 5);
}
