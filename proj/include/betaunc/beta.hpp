#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace betaunc {

/// Parameters of a beta distribution over the positive-class probability.
class BetaParams {
public:
    /// Throws DomainError unless both values are finite and positive.
    BetaParams(double alpha, double beta);

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }

    friend bool operator==(const BetaParams&, const BetaParams&) = default;

private:
    double alpha_;
    double beta_;
};

/// Equal-weight mixture of beta distributions. Never empty.
class BetaMixture {
public:
    explicit BetaMixture(std::vector<BetaParams> components);

    const std::vector<BetaParams>& components() const noexcept { return components_; }
    std::size_t size() const noexcept { return components_.size(); }

    /// Mixture density at t in (0, 1).
    double pdf(double t) const;

private:
    std::vector<BetaParams> components_;
};

struct BetaMoments {
    double mean;
    double second_moment;
    double variance;
};

struct PredictiveSummary {
    double mean;
    double variance;
    /// 4 * variance; 0 means certain, 1 means maximally unsure.
    double uncertainty;
};

struct BetaGradient {
    double d_alpha;
    double d_beta;
};

struct DensityPoint {
    double t;
    double pdf;
};

// Special functions. All throw DomainError for non-positive or non-finite input.
double ln_gamma(double x);
double digamma(double x);
/// ln B(a, b) = lnG(a) + lnG(b) - lnG(a + b), evaluated without large cancellation.
double ln_beta_fn(double alpha, double beta);

double beta_log_pdf(double t, const BetaParams& p);

/// Gradient of -beta_log_pdf(t, p) with respect to (alpha, beta).
BetaGradient beta_nll_grad(double t, const BetaParams& p);

BetaMoments beta_moments(const BetaParams& p);

/// Closed-form mean, variance and uncertainty of the equal-weight mixture.
PredictiveSummary mixture_summary(const BetaMixture& m);

/// Mixture pdf on n_points uniformly spaced points over [eps, 1 - eps].
std::vector<DensityPoint> mixture_density_grid(const BetaMixture& m, std::size_t n_points, double eps);

double clip_label(double t, double eps);

inline constexpr double kDefaultLabelEps = 1e-2;

}  // namespace betaunc
