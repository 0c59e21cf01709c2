#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "riskq/rng.hpp"
#include "riskq/stats.hpp"

namespace riskq {

enum class RewardKind { deterministic, normal, shifted_neg_lognormal };

/// Immediate-reward distribution of one (state, action) pair. Besides
/// sampling, it can carry an equiprobable atom discretization of itself
/// (built by discretize_rewards) for exact dynamic programming.
struct RewardDist {
    RewardKind kind = RewardKind::deterministic;
    double value = 0.0;       // deterministic
    double mu = 0.0;          // normal / underlying log-normal
    double sigma = 1.0;       // normal / underlying log-normal
    double shift = 0.0;       // shifted_neg_lognormal: r = shift - exp(Normal(mu, sigma))
    std::vector<std::pair<double, double>> atoms; // (value, probability), empty until discretized

    static RewardDist deterministic(double v) {
        RewardDist d;
        d.kind = RewardKind::deterministic;
        d.value = v;
        return d;
    }
    static RewardDist normal(double mu, double sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("RewardDist: sigma must be positive");
        RewardDist d;
        d.kind = RewardKind::normal;
        d.mu = mu;
        d.sigma = sigma;
        return d;
    }
    static RewardDist shifted_neg_lognormal(double shift, double mu, double sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("RewardDist: sigma must be positive");
        RewardDist d;
        d.kind = RewardKind::shifted_neg_lognormal;
        d.shift = shift;
        d.mu = mu;
        d.sigma = sigma;
        return d;
    }

    double mean() const {
        switch (kind) {
            case RewardKind::deterministic: return value;
            case RewardKind::normal: return mu;
            case RewardKind::shifted_neg_lognormal:
                return shift - std::exp(mu + 0.5 * sigma * sigma);
        }
        throw std::logic_error("RewardDist: bad kind");
    }

    double stddev() const {
        switch (kind) {
            case RewardKind::deterministic: return 0.0;
            case RewardKind::normal: return sigma;
            case RewardKind::shifted_neg_lognormal: {
                const double s2 = sigma * sigma;
                return std::sqrt((std::exp(s2) - 1.0) * std::exp(2.0 * mu + s2));
            }
        }
        throw std::logic_error("RewardDist: bad kind");
    }

    double sample(RngStream& rng) const {
        switch (kind) {
            case RewardKind::deterministic: return value;
            case RewardKind::normal: return rng.normal(mu, sigma);
            case RewardKind::shifted_neg_lognormal:
                return shift - std::exp(rng.normal(mu, sigma));
        }
        throw std::logic_error("RewardDist: bad kind");
    }

    /// q-quantile of the reward distribution, q in (0, 1).
    double quantile(double q) const {
        if (!(q > 0.0 && q < 1.0))
            throw std::invalid_argument("RewardDist::quantile: q must be in (0,1)");
        switch (kind) {
            case RewardKind::deterministic: return value;
            case RewardKind::normal: return mu + sigma * normal_quantile(q);
            case RewardKind::shifted_neg_lognormal:
                // r = shift - X is decreasing in X, so the q-quantile of r
                // maps to the (1-q)-quantile of the log-normal X.
                return shift - std::exp(mu + sigma * normal_quantile(1.0 - q));
        }
        throw std::logic_error("RewardDist: bad kind");
    }
};

struct EpisodeStep {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool terminal = false;
};

/// Finite MDP with per-(s,a) stochastic rewards. Terminal states are
/// absorbing with zero reward. Immutable after construction; shareable
/// across concurrent trials.
struct EnvModel {
    std::string name;
    int n_states = 0;
    int n_actions = 0;
    int initial_state = 0;
    std::vector<char> terminal;                   // size n_states
    std::vector<std::vector<double>> transition;  // [s*n_actions + a] -> probs over s'
    std::vector<RewardDist> reward;               // [s*n_actions + a]

    bool is_terminal(int s) const { return terminal.at(static_cast<size_t>(s)) != 0; }

    size_t sa_index(int s, int a) const {
        if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
            throw std::invalid_argument("EnvModel: state or action out of range");
        return static_cast<size_t>(s) * static_cast<size_t>(n_actions) + static_cast<size_t>(a);
    }

    std::span<const double> transition_row(int s, int a) const {
        return transition[sa_index(s, a)];
    }
    const RewardDist& reward_dist(int s, int a) const { return reward[sa_index(s, a)]; }

    void validate() const {
        if (n_states < 1 || n_actions < 1)
            throw std::invalid_argument("EnvModel: needs at least one state and action");
        if (initial_state < 0 || initial_state >= n_states || is_terminal(initial_state))
            throw std::invalid_argument("EnvModel: initial state invalid or terminal");
        if (terminal.size() != static_cast<size_t>(n_states) ||
            transition.size() != static_cast<size_t>(n_states * n_actions) ||
            reward.size() != static_cast<size_t>(n_states * n_actions))
            throw std::invalid_argument("EnvModel: field sizes inconsistent");
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                const auto& row = transition[sa_index(s, a)];
                if (row.size() != static_cast<size_t>(n_states))
                    throw std::invalid_argument("EnvModel: transition row has wrong length");
                double sum = 0.0;
                for (double p : row) {
                    if (p < 0.0) throw std::invalid_argument("EnvModel: negative probability");
                    sum += p;
                }
                if (std::fabs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("EnvModel: transition row does not sum to 1");
                if (is_terminal(s)) {
                    if (row[static_cast<size_t>(s)] != 1.0)
                        throw std::invalid_argument("EnvModel: terminal state must be absorbing");
                    const auto& rd = reward[sa_index(s, a)];
                    if (rd.kind != RewardKind::deterministic || rd.value != 0.0)
                        throw std::invalid_argument("EnvModel: terminal reward must be 0");
                }
            }
        }
    }

    /// Analytic immediate-reward range over non-terminal (s,a) pairs:
    /// min/max of mean +/- 3 stddev per distribution. Used to span the
    /// eta-grid when the reward support is unbounded.
    std::pair<double, double> reward_bounds() const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < n_states; ++s) {
            if (is_terminal(s)) continue;
            for (int a = 0; a < n_actions; ++a) {
                const auto& rd = reward[sa_index(s, a)];
                lo = std::min(lo, rd.mean() - 3.0 * rd.stddev());
                hi = std::max(hi, rd.mean() + 3.0 * rd.stddev());
            }
        }
        if (!(lo < hi)) throw std::logic_error("EnvModel: degenerate reward bounds");
        return {lo, hi};
    }
};

namespace detail {
inline void add_absorbing_terminal(EnvModel& env, int s) {
    for (int a = 0; a < env.n_actions; ++a) {
        auto& row = env.transition[env.sa_index(s, a)];
        row.assign(static_cast<size_t>(env.n_states), 0.0);
        row[static_cast<size_t>(s)] = 1.0;
        env.reward[env.sa_index(s, a)] = RewardDist::deterministic(0.0);
    }
    env.terminal[static_cast<size_t>(s)] = 1;
}

inline EnvModel blank_env(std::string name, int n_states, int n_actions, int initial) {
    EnvModel env;
    env.name = std::move(name);
    env.n_states = n_states;
    env.n_actions = n_actions;
    env.initial_state = initial;
    env.terminal.assign(static_cast<size_t>(n_states), 0);
    env.transition.assign(static_cast<size_t>(n_states * n_actions),
                          std::vector<double>(static_cast<size_t>(n_states), 0.0));
    env.reward.assign(static_cast<size_t>(n_states * n_actions), RewardDist::deterministic(0.0));
    return env;
}
} // namespace detail

/// Ten-state chain: both actions move s_i to s_{i+1}, s_9 is terminal.
/// a_0 pays Normal(2.5, 4^2) (high mean, high spread), a_1 pays
/// Normal(2, 0.1^2) (lower mean, tight spread).
inline EnvModel chain_mdp() {
    EnvModel env = detail::blank_env("chain10", 10, 2, 0);
    for (int s = 0; s < 9; ++s) {
        for (int a = 0; a < 2; ++a) {
            env.transition[env.sa_index(s, a)][static_cast<size_t>(s + 1)] = 1.0;
        }
        env.reward[env.sa_index(s, 0)] = RewardDist::normal(2.5, 4.0);
        env.reward[env.sa_index(s, 1)] = RewardDist::normal(2.0, 0.1);
    }
    detail::add_absorbing_terminal(env, 9);
    env.validate();
    return env;
}

/// Seven-state random walk started at s_3; a_0 steps left, a_1 steps right;
/// s_0 and s_6 are terminal. The only nonzero rewards are paid on the
/// transitions entering a terminal state: into s_0, r = 10 - X with
/// log X ~ Normal(0.5, 1) (mean 7.28, heavy left tail); into s_6,
/// r = 10 - X with log X ~ Normal(1.5, 0.1^2) (mean 5.50, tight).
inline EnvModel random_walk() {
    EnvModel env = detail::blank_env("walk7", 7, 2, 3);
    for (int s = 1; s <= 5; ++s) {
        env.transition[env.sa_index(s, 0)][static_cast<size_t>(s - 1)] = 1.0;
        env.transition[env.sa_index(s, 1)][static_cast<size_t>(s + 1)] = 1.0;
    }
    env.reward[env.sa_index(1, 0)] = RewardDist::shifted_neg_lognormal(10.0, 0.5, 1.0);
    env.reward[env.sa_index(5, 1)] = RewardDist::shifted_neg_lognormal(10.0, 1.5, 0.1);
    detail::add_absorbing_terminal(env, 0);
    detail::add_absorbing_terminal(env, 6);
    env.validate();
    return env;
}

/// Draws one transition. The next state consumes exactly one uniform from
/// the stream, then the reward distribution draws, so a fixed stream state
/// always yields the same step.
inline EpisodeStep sample_step(const EnvModel& env, int s, int a, RngStream& rng) {
    if (env.is_terminal(s)) throw std::invalid_argument("sample_step: state is terminal");
    const auto row = env.transition_row(s, a);
    const double u = rng.uniform();
    int s_next = env.n_states - 1;
    double cum = 0.0;
    for (int j = 0; j < env.n_states; ++j) {
        cum += row[static_cast<size_t>(j)];
        if (u < cum) {
            s_next = j;
            break;
        }
    }
    EpisodeStep step;
    step.state = s;
    step.action = a;
    step.reward = env.reward_dist(s, a).sample(rng);
    step.next_state = s_next;
    step.terminal = env.is_terminal(s_next);
    return step;
}

/// Returns a copy of the environment whose reward distributions carry an
/// equiprobable atom discretization: n_atoms inverse-CDF values at the
/// midpoint quantiles q_k = (k - 0.5)/n_atoms. Deterministic rewards get a
/// single unit-mass atom.
inline EnvModel discretize_rewards(const EnvModel& env, int n_atoms) {
    if (n_atoms < 2) throw std::invalid_argument("discretize_rewards: n_atoms must be >= 2");
    EnvModel out = env;
    for (auto& rd : out.reward) {
        rd.atoms.clear();
        if (rd.kind == RewardKind::deterministic) {
            rd.atoms.emplace_back(rd.value, 1.0);
            continue;
        }
        const double p = 1.0 / static_cast<double>(n_atoms);
        rd.atoms.reserve(static_cast<size_t>(n_atoms));
        for (int k = 1; k <= n_atoms; ++k) {
            const double q = (static_cast<double>(k) - 0.5) / static_cast<double>(n_atoms);
            rd.atoms.emplace_back(rd.quantile(q), p);
        }
        std::sort(rd.atoms.begin(), rd.atoms.end());
    }
    return out;
}

} // namespace riskq
