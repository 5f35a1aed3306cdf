#include <numeric>
#include <random>

#include "betaunc/metrics.hpp"
#include "doctest.h"

using namespace betaunc;

namespace {

Prediction pred(int cls, double truth, std::optional<bool> accepted = std::nullopt, double uncertainty = 0.1) {
    Prediction p{"p", {cls ? 0.9 : 0.1, uncertainty / 4.0, uncertainty}, BetaMixture({{1.0, 1.0}}), cls, truth,
                 accepted};
    return p;
}

/// Exact rational a/b as a reduced pair.
struct Rational {
    std::uint64_t num;
    std::uint64_t den;
};

Rational make(std::uint64_t n, std::uint64_t d) {
    if (d == 0) return {0, 1};
    const auto g = std::gcd(n, d);
    return {n / g, d / g};
}

double as_double(Rational r) { return static_cast<double>(r.num) / static_cast<double>(r.den); }

/// F1 = 2PR / (P + R) = 2 tp / (2 tp + fp + fn), evaluated exactly.
Rational f1(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    if (tp == 0) return {0, 1};
    return make(2 * tp, 2 * tp + fp + fn);
}

}  // namespace

TEST_CASE("confusion counts") {
    SUBCASE("perfect predictor") {
        std::vector<Prediction> ps{pred(0, 0.0), pred(1, 1.0), pred(1, 1.0)};
        const auto c = confusion(ps, false);
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
        CHECK(c.tp == 2);
        CHECK(c.tn == 1);
    }
    SUBCASE("single false positive") {
        std::vector<Prediction> ps{pred(1, 0.0)};
        CHECK(confusion(ps, false) == ConfusionCounts{0, 1, 0, 0});
    }
    SUBCASE("hand-enumerated fixture of eight") {
        // (pred, truth): TP TP FP FN TN TN TN FN, with one soft truth 0.7 -> 1 and 0.2 -> 0
        std::vector<Prediction> ps{pred(1, 1.0), pred(1, 0.7), pred(1, 0.0), pred(0, 1.0),
                                   pred(0, 0.0), pred(0, 0.2), pred(0, 0.0), pred(0, 0.5)};
        const auto c = confusion(ps, false);
        CHECK(c == ConfusionCounts{2, 1, 2, 3});
        CHECK(c.total() == 8);
        const auto r = report(c);
        CHECK(r.n_misclassified == 3);
        CHECK(r.n_evaluated == 8);
    }
    SUBCASE("only accepted") {
        std::vector<Prediction> ps{pred(1, 0.0, false), pred(1, 1.0, true), pred(0, 0.0)};
        CHECK(confusion(ps, true) == ConfusionCounts{1, 0, 0, 1});
        CHECK(confusion(ps, false).total() == 3);
    }
    SUBCASE("missing truth") {
        std::vector<Prediction> ps{pred(1, 0.0)};
        ps[0].true_target.reset();
        CHECK_THROWS_AS(confusion(ps, false), UsageError);
    }
}

TEST_CASE("report arithmetic") {
    const auto r = report({17, 3, 4, 76});
    CHECK(r.af.precision == doctest::Approx(0.85));
    CHECK(r.af.recall == doctest::Approx(17.0 / 21.0));
    CHECK(r.af.f1 == doctest::Approx(0.8293).epsilon(1e-4));
    CHECK(r.normal.precision == doctest::Approx(76.0 / 80.0));
    CHECK(r.normal.recall == doctest::Approx(76.0 / 79.0));
    CHECK(r.macro.f1 == doctest::Approx(0.5 * (r.af.f1 + r.normal.f1)));
    CHECK_FALSE(r.af.degenerate);

    const auto d = report({0, 0, 0, 10});
    CHECK(d.af.precision == 0.0);
    CHECK(d.af.recall == 0.0);
    CHECK(d.af.f1 == 0.0);
    CHECK(d.af.degenerate);
    CHECK(d.normal.precision == 1.0);
    CHECK(d.normal.recall == 1.0);
    CHECK(d.normal.f1 == 1.0);
    CHECK_FALSE(d.normal.degenerate);
    CHECK(d.macro.degenerate);
}

TEST_CASE("report agrees with an exact-rational oracle") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<std::uint64_t> u(0, 60);
    for (int i = 0; i < 2000; ++i) {
        const ConfusionCounts c{u(rng), u(rng), u(rng), u(rng)};
        const auto r = report(c);
        CHECK(std::abs(r.af.precision - as_double(make(c.tp, c.tp + c.fp))) < 1e-12);
        CHECK(std::abs(r.af.recall - as_double(make(c.tp, c.tp + c.fn))) < 1e-12);
        CHECK(std::abs(r.af.f1 - as_double(f1(c.tp, c.fp, c.fn))) < 1e-12);
        CHECK(std::abs(r.normal.f1 - as_double(f1(c.tn, c.fn, c.fp))) < 1e-12);
        CHECK(std::abs(r.macro.f1 - 0.5 * (as_double(f1(c.tp, c.fp, c.fn)) + as_double(f1(c.tn, c.fn, c.fp)))) <
              1e-12);
        for (const auto* m : {&r.af, &r.normal, &r.macro}) {
            CHECK(m->precision >= 0.0);
            CHECK(m->precision <= 1.0);
            CHECK(m->f1 >= 0.0);
            CHECK(m->f1 <= 1.0);
        }
        if (r.af.precision + r.af.recall > 0.0) {
            CHECK(std::abs(r.af.f1 - 2.0 * r.af.precision * r.af.recall / (r.af.precision + r.af.recall)) < 1e-12);
        }
    }
}

TEST_CASE("report is invariant under prediction order") {
    std::mt19937_64 rng(5);
    std::vector<Prediction> ps;
    for (int i = 0; i < 50; ++i) ps.push_back(pred(static_cast<int>(rng() % 2), static_cast<double>(rng() % 2)));
    const auto a = report(confusion(ps, false));
    std::shuffle(ps.begin(), ps.end(), rng);
    const auto b = report(confusion(ps, false));
    CHECK(a.macro.f1 == b.macro.f1);
    CHECK(a.n_misclassified == b.n_misclassified);
}

TEST_CASE("coverage curve") {
    std::vector<Prediction> ps;
    for (int i = 0; i < 18; ++i) ps.push_back(pred(i % 2, i % 2, std::nullopt, 0.01 * i));
    ps.push_back(pred(1, 0.0, std::nullopt, 0.9));
    ps.push_back(pred(0, 1.0, std::nullopt, 0.95));
    const std::vector<double> fractions{1.0, 0.95, 0.9, 0.5};
    const auto curve = coverage_curve(ps, fractions);
    REQUIRE(curve.size() == 4);
    const auto plain = report(confusion(ps, false));
    CHECK(curve[0].second.macro.f1 == plain.macro.f1);
    CHECK(curve[0].second.n_evaluated == 20);
    CHECK(curve[1].second.n_misclassified == 1);
    CHECK(curve[2].second.macro.f1 == 1.0);
    CHECK(curve[3].second.n_evaluated == 10);
}

TEST_CASE("csv export") {
    const std::string csv = report_to_csv(report({17, 3, 4, 76}));
    CHECK(csv.rfind("class,precision,recall,f1\nA,0.85,", 0) == 0);
    CHECK(csv.find("\nNO,") != std::string::npos);
    CHECK(csv.find("\nOverall,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
