#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace riskq {

/// Parameters of the one-step risk measure
///   rho(X) = (1 - lambda) * E[X] + lambda * CVaR_alpha[X]
/// together with the discount factor of the surrounding control problem.
struct RiskParams {
    double lambda = 0.5; // mean/CVaR mixing weight, in [0, 1]
    double alpha = 0.05; // CVaR tail level, in (0, 1)
    double gamma = 0.98; // discount factor, in (0, 1)

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("RiskParams: lambda must be in [0,1]");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("RiskParams: alpha must be in (0,1)");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("RiskParams: gamma must be in (0,1)");
    }
};

namespace detail {
inline void check_sample(std::span<const double> sample, double alpha) {
    if (sample.empty()) throw std::invalid_argument("risk: sample must be non-empty");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("risk: alpha must be in (0,1)");
}
} // namespace detail

/// Lower-tail value at risk of an empirical sample:
///   VaR_alpha = inf{ v : P(X <= v) >= alpha },
/// i.e. the k-th smallest sample value with k = ceil(alpha * n).
inline double var_lower(std::span<const double> sample, double alpha) {
    detail::check_sample(sample, alpha);
    const size_t n = sample.size();
    const size_t k = static_cast<size_t>(std::ceil(alpha * static_cast<double>(n)));
    std::vector<double> work(sample.begin(), sample.end());
    std::nth_element(work.begin(), work.begin() + (k - 1), work.end());
    return work[k - 1];
}

/// Lower-tail conditional value at risk of an empirical sample, defined by
/// the variational form
///   CVaR_alpha = max_eta { eta - (1/alpha) * E[(eta - X)_+] }.
/// The objective is piecewise-linear and concave in eta with breakpoints at
/// the sample values, so its maximum is attained at a sample point; the
/// estimator evaluates it at every sorted sample value with a running prefix
/// sum, O(n log n) overall.
inline double cvar_lower(std::span<const double> sample, double alpha) {
    detail::check_sample(sample, alpha);
    const size_t n = sample.size();
    std::vector<double> work(sample.begin(), sample.end());
    std::sort(work.begin(), work.end());
    const double inv = 1.0 / (alpha * static_cast<double>(n));
    double best = -std::numeric_limits<double>::infinity();
    double prefix = 0.0; // sum of the j smallest values
    for (size_t j = 0; j < n; ++j) {
        // E[(eta - X)_+] at eta = work[j] touches only values below work[j].
        const double objective =
            work[j] - inv * (static_cast<double>(j) * work[j] - prefix);
        best = std::max(best, objective);
        prefix += work[j];
    }
    return best;
}

/// One-step risk functional rho applied to an empirical reward sample.
inline double one_step_risk(std::span<const double> sample, const RiskParams& p) {
    p.validate();
    detail::check_sample(sample, p.alpha);
    const double mean =
        std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(sample.size());
    return (1.0 - p.lambda) * mean + p.lambda * cvar_lower(sample, p.alpha);
}

/// Reward of the augmented-action reformulation for a non-terminal step:
///   -(lambda/alpha) * (eta_t - r)_+ + (1 - lambda) * r + gamma * lambda * eta_next.
/// At lambda = 0 this is bitwise equal to r.
inline double shaped_reward(double r, double eta_t, double eta_next, const RiskParams& p) {
    const double shortfall = std::max(eta_t - r, 0.0);
    return -(p.lambda / p.alpha) * shortfall + (1.0 - p.lambda) * r +
           p.gamma * p.lambda * eta_next;
}

/// Terminal-step variant: the successor auxiliary level does not exist, so
/// the gamma * lambda * eta_next term is dropped.
inline double shaped_reward_terminal(double r, double eta_t, const RiskParams& p) {
    const double shortfall = std::max(eta_t - r, 0.0);
    return -(p.lambda / p.alpha) * shortfall + (1.0 - p.lambda) * r;
}

/// Uniform grid of candidate auxiliary-variable values eta covering
/// [lower, upper] with resolution + 1 points, points[d] = lower + step * d.
struct EtaGrid {
    double lower = 0.0;
    double upper = 1.0;
    std::vector<double> points;

    int resolution() const { return static_cast<int>(points.size()) - 1; }
    int size() const { return static_cast<int>(points.size()); }
    double value(int d) const { return points.at(static_cast<size_t>(d)); }

    /// Maps a grid index into [0, 1] for use as a network input feature.
    double normalized(int d) const { return (value(d) - lower) / (upper - lower); }
};

inline EtaGrid make_eta_grid(double lower, double upper, int resolution) {
    if (!(lower < upper)) throw std::invalid_argument("make_eta_grid: requires lower < upper");
    if (resolution < 1) throw std::invalid_argument("make_eta_grid: resolution must be >= 1");
    EtaGrid grid;
    grid.lower = lower;
    grid.upper = upper;
    grid.points.resize(static_cast<size_t>(resolution) + 1);
    for (int d = 0; d <= resolution; ++d)
        grid.points[static_cast<size_t>(d)] =
            lower + (upper - lower) * static_cast<double>(d) / static_cast<double>(resolution);
    return grid;
}

} // namespace riskq
