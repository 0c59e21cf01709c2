#pragma once

// Independent reference implementations used only to check the library.
// Everything here is deliberately written the slow/direct way, from the
// defining formulas, sharing no code path with the headers under test.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskq/env.hpp"

namespace oracle {

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

/// Brute-force CVaR: evaluates eta - (1/alpha)*mean((eta - x)_+) at every
/// sample point and on a uniform grid across the sample range, O(n^2).
inline double cvar_brute_force(std::span<const double> xs, double alpha, int grid_points = 2000) {
    std::vector<double> candidates(xs.begin(), xs.end());
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    for (int i = 0; i <= grid_points; ++i)
        candidates.push_back(*lo_it + (*hi_it - *lo_it) * i / static_cast<double>(grid_points));
    double best = -1e300;
    for (double eta : candidates) {
        double shortfall = 0.0;
        for (double x : xs) shortfall += std::max(eta - x, 0.0);
        best = std::max(best, eta - shortfall / (alpha * static_cast<double>(xs.size())));
    }
    return best;
}

/// Empirical alpha-quantile by linear scan of the sorted CDF.
inline double var_scan(std::span<const double> xs, double alpha) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i) {
        if ((static_cast<double>(i) + 1.0) / n >= alpha) return sorted[i];
    }
    return sorted.back();
}

inline double phi(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile by bisection on Phi; independent of the
/// library's closed-form approximation.
inline double phi_inv(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (Phi(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Analytic lower-tail CVaR of Normal(mu, sigma^2): mu - sigma*phi(Phi^{-1}(alpha))/alpha.
inline double normal_cvar(double mu, double sigma, double alpha) {
    return mu - sigma * phi(phi_inv(alpha)) / alpha;
}

/// Classical (risk-neutral) value iteration on an atom-discretized model:
/// V(s) = max_a [ E_atoms r(s,a) + gamma * sum_s' P(s'|s,a) V(s') ], V = 0 at
/// terminals. Plain dense sweeps until the sup-norm change drops below tol.
inline std::vector<double> classical_vi(const riskq::EnvModel& env, double gamma,
                                        double tol = 1e-12, int max_iters = 100000) {
    std::vector<double> v(static_cast<size_t>(env.n_states), 0.0);
    for (int k = 0; k < max_iters; ++k) {
        std::vector<double> next(v.size(), 0.0);
        for (int s = 0; s < env.n_states; ++s) {
            if (env.is_terminal(s)) continue;
            double best = -1e300;
            for (int a = 0; a < env.n_actions; ++a) {
                const auto& atoms = env.reward_dist(s, a).atoms;
                if (atoms.empty()) throw std::logic_error("classical_vi: needs atoms");
                double val = 0.0;
                for (const auto& [r, p] : atoms) val += p * r;
                const auto row = env.transition_row(s, a);
                for (int sn = 0; sn < env.n_states; ++sn)
                    val += gamma * row[static_cast<size_t>(sn)] * v[static_cast<size_t>(sn)];
                best = std::max(best, val);
            }
            next[static_cast<size_t>(s)] = best;
        }
        double gap = 0.0;
        for (size_t i = 0; i < v.size(); ++i) gap = std::max(gap, std::fabs(next[i] - v[i]));
        v = next;
        if (gap < tol) return v;
    }
    throw std::runtime_error("classical_vi: no convergence");
}

} // namespace oracle
