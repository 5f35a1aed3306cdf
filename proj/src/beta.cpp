#include "betaunc/beta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "betaunc/errors.hpp"

namespace betaunc {

namespace {

constexpr double kLnSqrt2Pi = 0.91893853320467274178032973640562;
// Below this the recurrences shift the argument up before using asymptotic series.
constexpr double kAsymptoticThreshold = 10.0;

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(what) + " requires a finite positive argument, got " + std::to_string(x));
    }
}

// Stirling remainder: lnG(x) - [(x - 1/2) ln x - x + ln sqrt(2 pi)], x >= 10.
double stirling_correction(double x) {
    const double r = 1.0 / x;
    const double r2 = r * r;
    return r *
           (1.0 / 12.0 +
            r2 * (-1.0 / 360.0 +
                  r2 * (1.0 / 1260.0 +
                        r2 * (-1.0 / 1680.0 +
                              r2 * (1.0 / 1188.0 +
                                    r2 * (-691.0 / 360360.0 + r2 * (1.0 / 156.0 + r2 * (-3617.0 / 122400.0))))))));
}

double ln_gamma_unchecked(double x) {
    if (x >= kAsymptoticThreshold) {
        return (x - 0.5) * std::log(x) - x + kLnSqrt2Pi + stirling_correction(x);
    }
    // lnG(x) = lnG(x + n) - ln(x (x+1) ... (x+n-1))
    double product = 1.0;
    while (x < kAsymptoticThreshold) {
        product *= x;
        x += 1.0;
    }
    return (x - 0.5) * std::log(x) - x + kLnSqrt2Pi + stirling_correction(x) - std::log(product);
}

}  // namespace

BetaParams::BetaParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
        throw DomainError("BetaParams requires finite positive alpha and beta, got (" + std::to_string(alpha) +
                          ", " + std::to_string(beta) + ")");
    }
}

BetaMixture::BetaMixture(std::vector<BetaParams> components) : components_(std::move(components)) {
    if (components_.empty()) {
        throw DomainError("BetaMixture requires at least one component");
    }
}

double BetaMixture::pdf(double t) const {
    double acc = 0.0;
    for (const auto& c : components_) {
        acc += std::exp(beta_log_pdf(t, c));
    }
    return acc / static_cast<double>(components_.size());
}

double ln_gamma(double x) {
    require_positive(x, "ln_gamma");
    return ln_gamma_unchecked(x);
}

double digamma(double x) {
    require_positive(x, "digamma");
    double shift = 0.0;
    while (x < kAsymptoticThreshold) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double r2 = 1.0 / (x * x);
    const double tail =
        r2 * (1.0 / 12.0 -
              r2 * (1.0 / 120.0 -
                    r2 * (1.0 / 252.0 -
                          r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 * (1.0 / 12.0)))))));
    return shift + std::log(x) - 0.5 / x - tail;
}

double ln_beta_fn(double alpha, double beta) {
    require_positive(alpha, "ln_beta_fn");
    require_positive(beta, "ln_beta_fn");
    const double p = std::min(alpha, beta);
    const double q = std::max(alpha, beta);
    const double sum = p + q;
    if (p >= kAsymptoticThreshold) {
        const double corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(sum);
        return -0.5 * std::log(q) + kLnSqrt2Pi + corr + (p - 0.5) * std::log(p / sum) + q * std::log1p(-p / sum);
    }
    if (q >= kAsymptoticThreshold) {
        const double corr = stirling_correction(q) - stirling_correction(sum);
        return ln_gamma_unchecked(p) + corr + p - p * std::log(sum) + (q - 0.5) * std::log1p(-p / sum);
    }
    return ln_gamma_unchecked(p) + ln_gamma_unchecked(q) - ln_gamma_unchecked(sum);
}

double beta_log_pdf(double t, const BetaParams& p) {
    if (!(t > 0.0 && t < 1.0)) {
        throw DomainError("beta_log_pdf requires t in (0, 1), got " + std::to_string(t));
    }
    return (p.alpha() - 1.0) * std::log(t) + (p.beta() - 1.0) * std::log1p(-t) - ln_beta_fn(p.alpha(), p.beta());
}

BetaGradient beta_nll_grad(double t, const BetaParams& p) {
    if (!(t > 0.0 && t < 1.0)) {
        throw DomainError("beta_nll_grad requires t in (0, 1), got " + std::to_string(t));
    }
    const double psi_sum = digamma(p.alpha() + p.beta());
    return {digamma(p.alpha()) - psi_sum - std::log(t), digamma(p.beta()) - psi_sum - std::log1p(-t)};
}

BetaMoments beta_moments(const BetaParams& p) {
    const double a = p.alpha();
    const double s = a + p.beta();
    const double mean = a / s;
    const double second = a * (a + 1.0) / (s * (s + 1.0));
    // a*b / (s^2 (s+1)) is the same quantity without cancellation
    const double variance = a * p.beta() / (s * s * (s + 1.0));
    return {mean, second, variance};
}

PredictiveSummary mixture_summary(const BetaMixture& m) {
    double mean = 0.0;
    double second = 0.0;
    for (const auto& c : m.components()) {
        const auto mom = beta_moments(c);
        mean += mom.mean;
        second += mom.second_moment;
    }
    const double n = static_cast<double>(m.size());
    mean /= n;
    second /= n;
    double variance = second - mean * mean;
    constexpr double kRoundingSlack = 64.0 * std::numeric_limits<double>::epsilon();
    if (variance < 0.0) {
        if (variance < -kRoundingSlack) {
            throw ContractViolation("mixture variance is negative beyond rounding: " + std::to_string(variance));
        }
        variance = 0.0;
    }
    if (variance > 0.25 + kRoundingSlack) {
        throw ContractViolation("mixture variance exceeds 1/4: " + std::to_string(variance));
    }
    return {mean, variance, 4.0 * variance};
}

std::vector<DensityPoint> mixture_density_grid(const BetaMixture& m, std::size_t n_points, double eps) {
    if (n_points < 2) {
        throw DomainError("mixture_density_grid needs at least 2 points");
    }
    if (!(eps > 0.0 && eps < 0.5)) {
        throw DomainError("mixture_density_grid needs eps in (0, 0.5), got " + std::to_string(eps));
    }
    std::vector<DensityPoint> grid;
    grid.reserve(n_points);
    const double hi = 1.0 - eps;
    const double step = (hi - eps) / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t = (i + 1 == n_points) ? hi : eps + step * static_cast<double>(i);
        grid.push_back({t, m.pdf(t)});
    }
    return grid;
}

double clip_label(double t, double eps) {
    if (!(eps > 0.0 && eps < 0.5)) {
        throw DomainError("clip_label needs eps in (0, 0.5), got " + std::to_string(eps));
    }
    if (std::isnan(t)) {
        throw DomainError("clip_label got NaN");
    }
    return std::max(eps, std::min(1.0 - eps, t));
}

}  // namespace betaunc
