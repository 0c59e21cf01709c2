#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "riskq/env.hpp"
#include "riskq/risk.hpp"
#include "riskq/rng.hpp"

namespace riskq {

/// Dense action-value table of the augmented problem, indexed by
/// (state, eta-index, action, next-eta-index). Terminal-state rows are kept
/// at 0 and never maximized over.
struct QTable {
    int n_states = 0;
    int n_eta = 0;
    int n_actions = 0;
    std::vector<double> values;

    QTable() = default;
    QTable(int states, int eta, int actions)
        : n_states(states), n_eta(eta), n_actions(actions),
          values(static_cast<size_t>(states) * static_cast<size_t>(eta) *
                     static_cast<size_t>(actions) * static_cast<size_t>(eta),
                 0.0) {}

    size_t index(int s, int d, int a, int e) const {
        return ((static_cast<size_t>(s) * static_cast<size_t>(n_eta) + static_cast<size_t>(d)) *
                    static_cast<size_t>(n_actions) +
                static_cast<size_t>(a)) *
                   static_cast<size_t>(n_eta) +
               static_cast<size_t>(e);
    }
    double& at(int s, int d, int a, int e) { return values[index(s, d, a, e)]; }
    double at(int s, int d, int a, int e) const { return values[index(s, d, a, e)]; }

    bool same_shape(const QTable& other) const {
        return n_states == other.n_states && n_eta == other.n_eta &&
               n_actions == other.n_actions;
    }

    /// Sup-norm distance to another table of identical shape.
    double sup_diff(const QTable& other) const {
        if (!same_shape(other)) throw std::invalid_argument("QTable: shape mismatch");
        double m = 0.0;
        for (size_t i = 0; i < values.size(); ++i)
            m = std::max(m, std::fabs(values[i] - other.values[i]));
        return m;
    }
};

/// Deterministic greedy choice (action, next-eta-index) per (state, eta-index);
/// terminal states hold (-1, -1).
struct AugmentedPolicy {
    int n_states = 0;
    int n_eta = 0;
    std::vector<std::pair<int, int>> choice;

    const std::pair<int, int>& at(int s, int d) const {
        return choice[static_cast<size_t>(s) * static_cast<size_t>(n_eta) +
                      static_cast<size_t>(d)];
    }
};

/// The augmented risk-neutral reformulation of a (discretized) environment:
/// grid of eta candidates, per-atom shaped rewards, and the pieces of the
/// Bellman operator that do not depend on the chosen eta'.
struct AugmentedModel {
    EnvModel base; // rewards carry atoms
    EtaGrid grid;
    RiskParams params;
    // shaped_atoms[(s*E + d)*A + a][k] = shaped reward of atom k at eta_d
    // excluding the gamma*lambda*eta' term (it is added per chosen eta' at
    // operator time, making these entries eta'-independent).
    std::vector<std::vector<double>> shaped_atoms;
    // nonterm_prob[s*A + a] = probability the successor is non-terminal; the
    // gamma*lambda*eta' credit only accrues when the episode continues.
    std::vector<double> nonterm_prob;

    int n_states() const { return base.n_states; }
    int n_actions() const { return base.n_actions; }
    int n_eta() const { return grid.size(); }

    const std::vector<double>& shaped_row(int s, int d, int a) const {
        return shaped_atoms[(static_cast<size_t>(s) * static_cast<size_t>(n_eta()) +
                             static_cast<size_t>(d)) *
                                static_cast<size_t>(n_actions()) +
                            static_cast<size_t>(a)];
    }

    /// Expected shaped reward (over atoms) at (s, eta_d, a), still excluding
    /// the gamma*lambda*eta' term.
    double expected_shaped(int s, int d, int a) const {
        const auto& row = shaped_row(s, d, a);
        const auto& atoms = base.reward_dist(s, a).atoms;
        double sum = 0.0;
        for (size_t k = 0; k < row.size(); ++k) sum += atoms[k].second * row[k];
        return sum;
    }
};

/// Builds the augmented model from a reward-discretized environment.
inline AugmentedModel make_augmented_model(EnvModel env, EtaGrid grid, RiskParams params) {
    params.validate();
    env.validate();
    const int S = env.n_states, A = env.n_actions, E = grid.size();
    AugmentedModel model;
    model.shaped_atoms.resize(static_cast<size_t>(S) * static_cast<size_t>(E) *
                              static_cast<size_t>(A));
    model.nonterm_prob.assign(static_cast<size_t>(S) * static_cast<size_t>(A), 0.0);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const auto& atoms = env.reward_dist(s, a).atoms;
            if (atoms.empty())
                throw std::invalid_argument(
                    "make_augmented_model: environment lacks reward atoms; call "
                    "discretize_rewards first");
            double ntp = 0.0;
            const auto row = env.transition_row(s, a);
            for (int sn = 0; sn < S; ++sn)
                if (!env.is_terminal(sn)) ntp += row[static_cast<size_t>(sn)];
            model.nonterm_prob[static_cast<size_t>(s) * static_cast<size_t>(A) +
                               static_cast<size_t>(a)] = ntp;
            for (int d = 0; d < E; ++d) {
                auto& shaped =
                    model.shaped_atoms[(static_cast<size_t>(s) * static_cast<size_t>(E) +
                                        static_cast<size_t>(d)) *
                                           static_cast<size_t>(A) +
                                       static_cast<size_t>(a)];
                shaped.resize(atoms.size());
                for (size_t k = 0; k < atoms.size(); ++k)
                    shaped[k] =
                        shaped_reward_terminal(atoms[k].first, grid.value(d), params);
            }
        }
    }
    model.base = std::move(env);
    model.grid = std::move(grid);
    model.params = params;
    return model;
}

/// Convenience builder: discretizes rewards, spans the eta-grid over the
/// environment's analytic reward bounds, and assembles the model.
inline AugmentedModel augment_env(const EnvModel& env, RiskParams params, int grid_resolution,
                                  int n_atoms) {
    const auto [lo, hi] = env.reward_bounds();
    return make_augmented_model(discretize_rewards(env, n_atoms),
                                make_eta_grid(lo, hi, grid_resolution), params);
}

namespace detail {
/// greedy_values[s*E + d] = max over (a, e) of q(s, d, a, e); 0 at terminals.
inline std::vector<double> greedy_values(const AugmentedModel& model, const QTable& q) {
    const int S = model.n_states(), A = model.n_actions(), E = model.n_eta();
    std::vector<double> v(static_cast<size_t>(S) * static_cast<size_t>(E), 0.0);
    for (int s = 0; s < S; ++s) {
        if (model.base.is_terminal(s)) continue;
        for (int d = 0; d < E; ++d) {
            const size_t block = q.index(s, d, 0, 0);
            double best = q.values[block];
            for (size_t i = 1; i < static_cast<size_t>(A) * static_cast<size_t>(E); ++i)
                best = std::max(best, q.values[block + i]);
            v[static_cast<size_t>(s) * static_cast<size_t>(E) + static_cast<size_t>(d)] = best;
        }
    }
    return v;
}
} // namespace detail

/// One application of the risk-averse Bellman operator:
///   (TQ)(s, eta, a, eta') = E_atoms[shaped] + gamma*lambda*eta'*P(continue)
///                           + gamma * sum_{s' non-terminal} P(s'|s,a) * max_{a',eta''} Q(s', eta', a', eta'')
/// Terminal-state rows of the output are 0.
inline QTable bellman_apply(const AugmentedModel& model, const QTable& q) {
    const int S = model.n_states(), A = model.n_actions(), E = model.n_eta();
    if (q.n_states != S || q.n_eta != E || q.n_actions != A)
        throw std::invalid_argument("bellman_apply: table does not match model");
    const double gamma = model.params.gamma;
    const double lambda = model.params.lambda;
    const std::vector<double> v = detail::greedy_values(model, q);
    QTable out(S, E, A);
    std::vector<double> cont(static_cast<size_t>(E));
    for (int s = 0; s < S; ++s) {
        if (model.base.is_terminal(s)) continue;
        for (int a = 0; a < A; ++a) {
            const auto row = model.base.transition_row(s, a);
            const double ntp =
                model.nonterm_prob[static_cast<size_t>(s) * static_cast<size_t>(A) +
                                   static_cast<size_t>(a)];
            for (int e = 0; e < E; ++e) {
                double c = 0.0;
                for (int sn = 0; sn < S; ++sn) {
                    const double p = row[static_cast<size_t>(sn)];
                    if (p != 0.0 && !model.base.is_terminal(sn))
                        c += p * v[static_cast<size_t>(sn) * static_cast<size_t>(E) +
                                   static_cast<size_t>(e)];
                }
                cont[static_cast<size_t>(e)] = c;
            }
            for (int d = 0; d < E; ++d) {
                const double base = model.expected_shaped(s, d, a);
                for (int e = 0; e < E; ++e)
                    out.at(s, d, a, e) = base +
                                         gamma * lambda * model.grid.value(e) * ntp +
                                         gamma * cont[static_cast<size_t>(e)];
            }
        }
    }
    return out;
}

/// Greedy policy extraction; argmax ties broken toward the lowest flattened
/// (action, eta') index.
inline AugmentedPolicy greedy_policy(const AugmentedModel& model, const QTable& q) {
    const int S = model.n_states(), A = model.n_actions(), E = model.n_eta();
    AugmentedPolicy policy;
    policy.n_states = S;
    policy.n_eta = E;
    policy.choice.assign(static_cast<size_t>(S) * static_cast<size_t>(E), {-1, -1});
    for (int s = 0; s < S; ++s) {
        if (model.base.is_terminal(s)) continue;
        for (int d = 0; d < E; ++d) {
            const size_t block = q.index(s, d, 0, 0);
            size_t best = 0;
            for (size_t i = 1; i < static_cast<size_t>(A) * static_cast<size_t>(E); ++i)
                if (q.values[block + i] > q.values[block + best]) best = i;
            policy.choice[static_cast<size_t>(s) * static_cast<size_t>(E) +
                          static_cast<size_t>(d)] = {static_cast<int>(best / static_cast<size_t>(E)),
                                                     static_cast<int>(best % static_cast<size_t>(E))};
        }
    }
    return policy;
}

struct SolveResult {
    QTable q;
    AugmentedPolicy policy;
    int iterations = 0;
    std::vector<double> gaps; // sup-norm change per sweep
};

/// Certified sweep bound from the contraction argument: the k-th gap is at
/// most gamma^k * R_max, so ceil(log(tol*(1-gamma)/R_max)/log(gamma)) + 1
/// sweeps suffice for any tol.
inline int certified_iteration_cap(const AugmentedModel& model, double tol) {
    const int S = model.n_states(), A = model.n_actions(), E = model.n_eta();
    double r_max = 0.0;
    for (int s = 0; s < S; ++s) {
        if (model.base.is_terminal(s)) continue;
        for (int a = 0; a < A; ++a)
            for (int d = 0; d < E; ++d)
                r_max = std::max(r_max, std::fabs(model.expected_shaped(s, d, a)));
    }
    double eta_abs = 0.0;
    for (double p : model.grid.points) eta_abs = std::max(eta_abs, std::fabs(p));
    r_max += model.params.gamma * model.params.lambda * eta_abs;
    if (r_max == 0.0) return 2; // operator is constant-zero; one sweep converges
    const double gamma = model.params.gamma;
    const double cap = std::ceil(std::log(tol * (1.0 - gamma) / r_max) / std::log(gamma)) + 1.0;
    return static_cast<int>(std::max(cap, 2.0));
}

/// Value iteration from Q = 0 to sup-norm fixed-point tolerance `tol`.
/// `max_iters` = 0 uses the certified cap; exceeding the cap without
/// converging raises with the final gap in the message.
inline SolveResult value_iteration(const AugmentedModel& model, double tol = 1e-8,
                                   int max_iters = 0) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    if (max_iters <= 0) max_iters = certified_iteration_cap(model, tol);
    SolveResult result;
    result.q = QTable(model.n_states(), model.n_eta(), model.n_actions());
    for (int k = 0; k < max_iters; ++k) {
        QTable next = bellman_apply(model, result.q);
        const double gap = next.sup_diff(result.q);
        result.q = std::move(next);
        result.gaps.push_back(gap);
        result.iterations = k + 1;
        if (gap < tol) {
            result.policy = greedy_policy(model, result.q);
            return result;
        }
    }
    throw std::runtime_error("value_iteration: no convergence after " +
                             std::to_string(max_iters) +
                             " sweeps; final gap = " + std::to_string(result.gaps.back()));
}

/// Policy evaluation: the fixed point of the operator with the maximization
/// replaced by the policy's choice. Linear, hence also a gamma-contraction.
inline QTable evaluate_policy(const AugmentedModel& model, const AugmentedPolicy& policy,
                              double tol = 1e-10, int max_iters = 0) {
    const int S = model.n_states(), A = model.n_actions(), E = model.n_eta();
    if (policy.n_states != S || policy.n_eta != E)
        throw std::invalid_argument("evaluate_policy: policy does not match model");
    for (int s = 0; s < S; ++s)
        for (int d = 0; d < E; ++d) {
            const auto& [a, e] = policy.at(s, d);
            if (!model.base.is_terminal(s) && (a < 0 || a >= A || e < 0 || e >= E))
                throw std::invalid_argument("evaluate_policy: incomplete policy");
        }
    if (max_iters <= 0) max_iters = certified_iteration_cap(model, tol);
    const double gamma = model.params.gamma;
    const double lambda = model.params.lambda;
    QTable q(S, E, A);
    std::vector<double> v(static_cast<size_t>(S) * static_cast<size_t>(E), 0.0);
    std::vector<double> cont(static_cast<size_t>(E));
    for (int k = 0; k < max_iters; ++k) {
        QTable next(S, E, A);
        for (int s = 0; s < S; ++s) {
            if (model.base.is_terminal(s)) continue;
            for (int a = 0; a < A; ++a) {
                const auto row = model.base.transition_row(s, a);
                const double ntp =
                    model.nonterm_prob[static_cast<size_t>(s) * static_cast<size_t>(A) +
                                       static_cast<size_t>(a)];
                for (int e = 0; e < E; ++e) {
                    double c = 0.0;
                    for (int sn = 0; sn < S; ++sn) {
                        const double p = row[static_cast<size_t>(sn)];
                        if (p != 0.0 && !model.base.is_terminal(sn))
                            c += p * v[static_cast<size_t>(sn) * static_cast<size_t>(E) +
                                       static_cast<size_t>(e)];
                    }
                    cont[static_cast<size_t>(e)] = c;
                }
                for (int d = 0; d < E; ++d) {
                    const double base = model.expected_shaped(s, d, a);
                    for (int e = 0; e < E; ++e)
                        next.at(s, d, a, e) = base +
                                              gamma * lambda * model.grid.value(e) * ntp +
                                              gamma * cont[static_cast<size_t>(e)];
                }
            }
        }
        const double gap = next.sup_diff(q);
        q = std::move(next);
        // v[s][d] follows the policy's own choice rather than the max.
        for (int s = 0; s < S; ++s) {
            if (model.base.is_terminal(s)) continue;
            for (int d = 0; d < E; ++d) {
                const auto& [a, e] = policy.at(s, d);
                v[static_cast<size_t>(s) * static_cast<size_t>(E) + static_cast<size_t>(d)] =
                    q.at(s, d, a, e);
            }
        }
        if (gap < tol) return q;
    }
    throw std::runtime_error("evaluate_policy: no convergence within the certified cap");
}

/// Empirical contraction factor: max over random table pairs (entries
/// uniform in [-50, 50]) of ||TQ1 - TQ2||_inf / ||Q1 - Q2||_inf, skipping
/// zero-denominator pairs.
inline double contraction_probe(const AugmentedModel& model, int n_pairs, RngStream& rng) {
    if (n_pairs < 1) throw std::invalid_argument("contraction_probe: n_pairs must be >= 1");
    double worst = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        QTable q1(model.n_states(), model.n_eta(), model.n_actions());
        QTable q2 = q1;
        for (auto& x : q1.values) x = rng.uniform() * 100.0 - 50.0;
        for (auto& x : q2.values) x = rng.uniform() * 100.0 - 50.0;
        const double denom = q1.sup_diff(q2);
        if (denom == 0.0) continue;
        const double numer = bellman_apply(model, q1).sup_diff(bellman_apply(model, q2));
        worst = std::max(worst, numer / denom);
    }
    return worst;
}

/// State values V(s, eta) = max_{a, eta'} Q; 0 at terminals.
inline std::vector<double> state_values(const AugmentedModel& model, const QTable& q) {
    return detail::greedy_values(model, q);
}

/// Scalar problem value: the stage-1 reward carries no eta-penalty, so the
/// initial auxiliary level is a free maximization — report
/// max over eta-index of V(initial_state, eta).
inline double problem_value(const AugmentedModel& model, const QTable& q) {
    const auto v = state_values(model, q);
    const int E = model.n_eta();
    double best = v[static_cast<size_t>(model.base.initial_state) * static_cast<size_t>(E)];
    for (int d = 1; d < E; ++d)
        best = std::max(best,
                        v[static_cast<size_t>(model.base.initial_state) * static_cast<size_t>(E) +
                          static_cast<size_t>(d)]);
    return best;
}

struct TrajectoryStep {
    int state = 0;
    int eta_index = 0;
    int action = 0;
    int eta_next = 0;
};

/// Follows the greedy policy from (initial_state, eta-index 0), stepping to
/// the most probable successor, until a terminal state or the step cap.
/// The eta-index of the first step is the initialization, not a greedy
/// choice; every later step sits at the eta picked one step earlier.
inline std::vector<TrajectoryStep> greedy_trajectory(const AugmentedModel& model,
                                                     const AugmentedPolicy& policy,
                                                     int max_steps = 1000) {
    std::vector<TrajectoryStep> traj;
    int s = model.base.initial_state;
    int d = 0;
    while (!model.base.is_terminal(s) && static_cast<int>(traj.size()) < max_steps) {
        const auto& [a, e] = policy.at(s, d);
        traj.push_back({s, d, a, e});
        const auto row = model.base.transition_row(s, a);
        int best_sn = 0;
        for (int sn = 1; sn < model.n_states(); ++sn)
            if (row[static_cast<size_t>(sn)] > row[static_cast<size_t>(best_sn)]) best_sn = sn;
        s = best_sn;
        d = e;
    }
    return traj;
}

} // namespace riskq
