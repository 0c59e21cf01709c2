#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "riskq/env.hpp"
#include "riskq/exact.hpp"
#include "riskq/net.hpp"
#include "riskq/risk.hpp"
#include "riskq/rng.hpp"

namespace riskq {

/// One stored interaction of the augmented-state learning loop. The eta
/// fields are grid indices, not values.
struct AugmentedTransition {
    int s = 0;
    int a = 0;
    int eta_t = 0;    // auxiliary level the step was taken at
    int eta_next = 0; // auxiliary level chosen for the next step
    double r = 0.0;   // raw environment reward
    int s_next = 0;
    bool terminal = false;
};

/// Fixed-capacity experience store with strictly FIFO eviction and uniform
/// sampling with replacement.
class ReplayBuffer {
  public:
    ReplayBuffer() = default;
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }

    size_t capacity() const { return capacity_; }
    size_t size() const { return storage_.size(); }

    void push(const AugmentedTransition& t) {
        if (capacity_ == 0) throw std::logic_error("ReplayBuffer: default-constructed");
        if (storage_.size() < capacity_) {
            storage_.push_back(t);
        } else {
            storage_[next_] = t; // next_ points at the oldest element once full
        }
        next_ = (next_ + 1) % capacity_;
    }

    /// Uniform sample of m transitions with replacement. Callers decide when
    /// the buffer is warm enough; asking for more than is stored is a usage
    /// error.
    std::vector<AugmentedTransition> sample(size_t m, RngStream& rng) const {
        if (m < 1 || m > storage_.size())
            throw std::invalid_argument("ReplayBuffer: sample size exceeds stored items");
        std::vector<AugmentedTransition> out;
        out.reserve(m);
        for (size_t j = 0; j < m; ++j)
            out.push_back(storage_[rng.uniform_int(storage_.size())]);
        return out;
    }

    /// Raw ring contents in storage order (not age order); for inspection.
    const std::vector<AugmentedTransition>& contents() const { return storage_; }

  private:
    size_t capacity_ = 0;
    size_t next_ = 0;
    std::vector<AugmentedTransition> storage_;
};

/// Per-episode multiplicative exploration decay:
///   eps_k = max(eps_min, eps_max * decay^k).
struct ExplorationSchedule {
    double eps_max = 1.0;
    double eps_min = 0.01;
    double decay = 0.95;

    void validate() const {
        if (!(eps_min >= 0.0 && eps_min <= eps_max && eps_max <= 1.0))
            throw std::invalid_argument(
                "ExplorationSchedule: needs 0 <= eps_min <= eps_max <= 1");
        if (!(decay > 0.0 && decay <= 1.0))
            throw std::invalid_argument("ExplorationSchedule: decay must be in (0,1]");
    }

    double value(int episode) const {
        return std::max(eps_min, eps_max * std::pow(decay, static_cast<double>(episode)));
    }
};

/// A chosen joint head: base action, next auxiliary level, and the flattened
/// index head = action * n_eta + eta_next.
struct JointChoice {
    int action = 0;
    int eta_next = 0;
    int head = 0;
};

/// Epsilon-greedy selection over the flattened (action, eta') heads. With
/// probability epsilon the head is uniform; otherwise the argmax, with ties
/// broken toward the lowest index. The greedy branch consumes no randomness.
inline JointChoice select_action(std::span<const double> q_values, int n_eta, double epsilon,
                                 RngStream& rng) {
    if (q_values.empty()) throw std::invalid_argument("select_action: empty head vector");
    if (n_eta < 1 || q_values.size() % static_cast<size_t>(n_eta) != 0)
        throw std::invalid_argument("select_action: head count not divisible by eta count");
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("select_action: epsilon must be in [0,1]");
    size_t head = 0;
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
        head = rng.uniform_int(q_values.size());
    } else {
        for (size_t i = 1; i < q_values.size(); ++i)
            if (q_values[i] > q_values[head]) head = i;
    }
    return {static_cast<int>(head / static_cast<size_t>(n_eta)),
            static_cast<int>(head % static_cast<size_t>(n_eta)), static_cast<int>(head)};
}

/// Network input encoding: one-hot state followed by the auxiliary level
/// mapped into [0, 1]. Input dimension is n_states + 1.
inline std::vector<double> encode_input(int s, int eta_index, const EtaGrid& grid,
                                        int n_states) {
    if (s < 0 || s >= n_states) throw std::invalid_argument("encode_input: state out of range");
    std::vector<double> x(static_cast<size_t>(n_states) + 1, 0.0);
    x[static_cast<size_t>(s)] = 1.0;
    x[static_cast<size_t>(n_states)] = grid.normalized(eta_index);
    return x;
}

/// Bootstrap target of the augmented Q-update. A terminal transition takes
/// the terminal-step shaped reward alone; a non-terminal one takes the full
/// shaped reward plus the discounted greedy value of the target network at
/// (s_next, eta_next). At lambda = 0 this is bitwise the classical DQN
/// target.
inline double dqn_target(const AugmentedTransition& t, const RiskParams& params,
                         const EtaGrid& grid, const Mlp& target_net, int n_states,
                         MlpWorkspace& ws) {
    const double eta_t = grid.value(t.eta_t);
    if (t.terminal) return shaped_reward_terminal(t.r, eta_t, params);
    const double shaped = shaped_reward(t.r, eta_t, grid.value(t.eta_next), params);
    ws.fit(target_net);
    detail::forward_into(target_net, encode_input(t.s_next, t.eta_next, grid, n_states), ws);
    const auto& out = ws.act.back();
    double best = out[0];
    for (size_t i = 1; i < out.size(); ++i) best = std::max(best, out[i]);
    return shaped + params.gamma * best;
}

inline double dqn_target(const AugmentedTransition& t, const RiskParams& params,
                         const EtaGrid& grid, const Mlp& target_net, int n_states) {
    MlpWorkspace ws;
    return dqn_target(t, params, grid, target_net, n_states, ws);
}

/// Settings of the replay-based deep agent. The auxiliary grid is spanned
/// over the environment's analytic reward bounds with grid_resolution + 1
/// points.
struct DqnConfig {
    int episodes = 2000;
    int replay_capacity = 10000;
    int minibatch = 64;
    int target_sync = 100; // gradient steps between target refreshes
    std::vector<int> hidden = {64, 64};
    double learning_rate = 1e-3;
    int grid_resolution = 20;
    int max_episode_steps = 200;
    RiskParams risk;
    ExplorationSchedule exploration;
    uint64_t seed = 1;

    void validate() const {
        risk.validate();
        exploration.validate();
        if (episodes < 1) throw std::invalid_argument("DqnConfig: episodes must be >= 1");
        if (replay_capacity < 1)
            throw std::invalid_argument("DqnConfig: replay capacity must be >= 1");
        if (minibatch < 1 || minibatch > replay_capacity)
            throw std::invalid_argument("DqnConfig: minibatch must fit the replay capacity");
        if (target_sync < 1)
            throw std::invalid_argument("DqnConfig: target sync period must be >= 1");
        if (grid_resolution < 1)
            throw std::invalid_argument("DqnConfig: grid resolution must be >= 1");
        if (max_episode_steps < 1)
            throw std::invalid_argument("DqnConfig: max episode steps must be >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("DqnConfig: learning rate must be positive");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("DqnConfig: hidden sizes must be positive");
    }
};

/// Per-episode training metrics. step_rewards keeps every raw reward so
/// downstream aggregation can pool them for quantile estimates.
struct EpisodeRecord {
    int episode = 0;
    double epsilon = 0.0;
    double avg_action = 0.0;     // mean chosen base-action id
    double episode_return = 0.0; // sum of raw rewards
    double shaped_return = 0.0;  // sum of shaped rewards
    std::vector<double> step_rewards;
};

/// Deep Q-learning over the augmented state (s, eta): epsilon-greedy over
/// the joint (action, eta') head, experience replay, masked regression onto
/// bootstrap targets from a periodically synchronized target network.
///
/// Episodes start the auxiliary level at the grid minimum, where the
/// first-step shortfall penalty is almost surely inactive. Training begins
/// once the buffer holds a full minibatch; the target network refreshes
/// every target_sync gradient steps. All randomness comes from four
/// substreams of the config seed (net init, environment, exploration,
/// minibatch), so a seed pins the whole run.
class DqnAgent {
  public:
    DqnAgent(EnvModel env, DqnConfig config)
        : env_(std::move(env)), config_(std::move(config)), env_rng_(0), explore_rng_(0),
          batch_rng_(0) {
        config_.validate();
        env_.validate();
        const auto [lo, hi] = env_.reward_bounds();
        grid_ = make_eta_grid(lo, hi, config_.grid_resolution);
        std::vector<int> dims;
        dims.push_back(env_.n_states + 1);
        for (int h : config_.hidden) dims.push_back(h);
        dims.push_back(env_.n_actions * grid_.size());
        RngStream init_rng(derive_seed({config_.seed, 1}));
        online_ = Mlp::glorot(std::move(dims), init_rng);
        target_ = online_;
        adam_ = AdamState::for_net(online_, config_.learning_rate);
        buffer_ = ReplayBuffer(static_cast<size_t>(config_.replay_capacity));
        env_rng_ = RngStream(derive_seed({config_.seed, 2}));
        explore_rng_ = RngStream(derive_seed({config_.seed, 3}));
        batch_rng_ = RngStream(derive_seed({config_.seed, 4}));
        ws_.fit(online_);
    }

    /// Runs one episode (interaction, storage, training) and returns its
    /// metrics. Episode indices advance by one per call.
    EpisodeRecord run_episode() {
        const double eps = config_.exploration.value(episode_);
        EpisodeRecord rec;
        rec.episode = episode_;
        rec.epsilon = eps;
        int s = env_.initial_state;
        int d = 0; // grid minimum
        long action_sum = 0;
        int n_steps = 0;
        while (n_steps < config_.max_episode_steps) {
            detail::forward_into(online_, encode_input(s, d, grid_, env_.n_states), ws_);
            const JointChoice choice =
                select_action(ws_.act.back(), grid_.size(), eps, explore_rng_);
            const EpisodeStep step = sample_step(env_, s, choice.action, env_rng_);
            AugmentedTransition t;
            t.s = s;
            t.a = choice.action;
            t.eta_t = d;
            t.eta_next = choice.eta_next;
            t.r = step.reward;
            t.s_next = step.next_state;
            t.terminal = step.terminal;
            buffer_.push(t);
            action_sum += choice.action;
            rec.episode_return += step.reward;
            rec.shaped_return +=
                step.terminal
                    ? shaped_reward_terminal(step.reward, grid_.value(d), config_.risk)
                    : shaped_reward(step.reward, grid_.value(d), grid_.value(choice.eta_next),
                                    config_.risk);
            rec.step_rewards.push_back(step.reward);
            ++n_steps;
            if (buffer_.size() >= static_cast<size_t>(config_.minibatch)) train_step();
            if (step.terminal) break;
            s = step.next_state;
            d = choice.eta_next;
        }
        rec.avg_action =
            n_steps > 0 ? static_cast<double>(action_sum) / static_cast<double>(n_steps) : 0.0;
        ++episode_;
        return rec;
    }

    const Mlp& online_net() const { return online_; }
    const Mlp& target_net() const { return target_; }
    const EtaGrid& grid() const { return grid_; }
    const EnvModel& env() const { return env_; }
    long gradient_steps() const { return grad_steps_; }
    int episodes_run() const { return episode_; }

  private:
    void train_step() {
        const auto sampled =
            buffer_.sample(static_cast<size_t>(config_.minibatch), batch_rng_);
        batch_.clear();
        for (const auto& t : sampled) {
            batch_.inputs.push_back(encode_input(t.s, t.eta_t, grid_, env_.n_states));
            batch_.heads.push_back(t.a * grid_.size() + t.eta_next);
            batch_.targets.push_back(
                dqn_target(t, config_.risk, grid_, target_, env_.n_states, target_ws_));
        }
        backward(online_, batch_, grads_, ws_);
        adam_step(adam_, online_, grads_);
        ++grad_steps_;
        if (grad_steps_ % config_.target_sync == 0) target_ = online_;
    }

    EnvModel env_;
    DqnConfig config_;
    EtaGrid grid_;
    Mlp online_, target_;
    AdamState adam_;
    ReplayBuffer buffer_;
    RngStream env_rng_, explore_rng_, batch_rng_;
    MlpWorkspace ws_, target_ws_;
    MlpGrads grads_;
    MaskedBatch batch_;
    long grad_steps_ = 0;
    int episode_ = 0;
};

struct DqnResult {
    Mlp net;
    std::vector<EpisodeRecord> episodes;
};

/// Trains a fresh agent for config.episodes episodes.
inline DqnResult train_dqn(const EnvModel& env, const DqnConfig& config) {
    DqnAgent agent(env, config);
    DqnResult result;
    result.episodes.reserve(static_cast<size_t>(config.episodes));
    for (int k = 0; k < config.episodes; ++k) result.episodes.push_back(agent.run_episode());
    result.net = agent.online_net();
    return result;
}

/// Step-size schedules for the tabular agent. `harmonic` decays per table
/// entry: alpha_n = alpha0 * tau / (tau + n) with n that entry's prior
/// update count, so every entry satisfies the usual summability conditions.
struct StepSizeSchedule {
    enum class Mode { constant, harmonic };
    Mode mode = Mode::constant;
    double alpha0 = 0.1;
    double tau = 20.0;

    void validate() const {
        if (!(alpha0 > 0.0 && alpha0 <= 1.0))
            throw std::invalid_argument("StepSizeSchedule: alpha0 must be in (0,1]");
        if (!(tau > 0.0)) throw std::invalid_argument("StepSizeSchedule: tau must be positive");
    }

    double value(long n) const {
        return mode == Mode::constant ? alpha0
                                      : alpha0 * tau / (tau + static_cast<double>(n));
    }
};

struct TabularConfig {
    int episodes = 2000;
    long max_total_steps = 0; // 0 = unlimited; otherwise stop after this many steps
    int grid_resolution = 20;
    int max_episode_steps = 200;
    RiskParams risk;
    ExplorationSchedule exploration;
    StepSizeSchedule step_size;
    uint64_t seed = 1;

    void validate() const {
        risk.validate();
        exploration.validate();
        step_size.validate();
        if (episodes < 1) throw std::invalid_argument("TabularConfig: episodes must be >= 1");
        if (grid_resolution < 1)
            throw std::invalid_argument("TabularConfig: grid resolution must be >= 1");
        if (max_episode_steps < 1)
            throw std::invalid_argument("TabularConfig: max episode steps must be >= 1");
        if (max_total_steps < 0)
            throw std::invalid_argument("TabularConfig: max total steps must be >= 0");
    }
};

struct TabularResult {
    QTable q;
    EtaGrid grid;
    std::vector<EpisodeRecord> episodes;
    std::vector<long> state_visits; // [s * n_eta + d] update counts
    long total_steps = 0;
};

/// Greedy (action, eta') per (state, eta) read off a learned table; ties go
/// to the lowest flattened index, terminal states hold (-1, -1).
inline AugmentedPolicy table_policy(const QTable& q, const EnvModel& env) {
    if (q.n_states != env.n_states || q.n_actions != env.n_actions)
        throw std::invalid_argument("table_policy: table does not match environment");
    const int E = q.n_eta;
    AugmentedPolicy policy;
    policy.n_states = q.n_states;
    policy.n_eta = E;
    policy.choice.assign(static_cast<size_t>(q.n_states) * static_cast<size_t>(E), {-1, -1});
    const size_t n_heads = static_cast<size_t>(q.n_actions) * static_cast<size_t>(E);
    for (int s = 0; s < q.n_states; ++s) {
        if (env.is_terminal(s)) continue;
        for (int d = 0; d < E; ++d) {
            const size_t block = q.index(s, d, 0, 0);
            size_t best = 0;
            for (size_t i = 1; i < n_heads; ++i)
                if (q.values[block + i] > q.values[block + best]) best = i;
            policy.choice[static_cast<size_t>(s) * static_cast<size_t>(E) +
                          static_cast<size_t>(d)] = {
                static_cast<int>(best / static_cast<size_t>(E)),
                static_cast<int>(best % static_cast<size_t>(E))};
        }
    }
    return policy;
}

/// Online tabular Q-learning on the augmented table. The update target is
/// the same two-case bootstrap as the deep agent's, read from the live
/// table; exploration and episode bookkeeping mirror the deep loop.
inline TabularResult train_tabular(const EnvModel& env, const TabularConfig& config) {
    config.validate();
    env.validate();
    const auto [lo, hi] = env.reward_bounds();
    EtaGrid grid = make_eta_grid(lo, hi, config.grid_resolution);
    const int A = env.n_actions, E = grid.size();
    TabularResult result;
    result.q = QTable(env.n_states, E, A);
    result.grid = grid;
    result.state_visits.assign(static_cast<size_t>(env.n_states) * static_cast<size_t>(E), 0);
    std::vector<long> entry_visits(result.q.values.size(), 0);
    RngStream env_rng(derive_seed({config.seed, 2}));
    RngStream explore_rng(derive_seed({config.seed, 3}));
    std::vector<double> head(static_cast<size_t>(A) * static_cast<size_t>(E));
    QTable& q = result.q;
    const size_t n_heads = head.size();
    for (int k = 0; k < config.episodes; ++k) {
        const double eps = config.exploration.value(k);
        EpisodeRecord rec;
        rec.episode = k;
        rec.epsilon = eps;
        int s = env.initial_state;
        int d = 0;
        long action_sum = 0;
        int n_steps = 0;
        while (n_steps < config.max_episode_steps) {
            const size_t block = q.index(s, d, 0, 0);
            for (size_t i = 0; i < n_heads; ++i) head[i] = q.values[block + i];
            const JointChoice choice = select_action(head, E, eps, explore_rng);
            const EpisodeStep step = sample_step(env, s, choice.action, env_rng);
            double y;
            double shaped;
            if (step.terminal) {
                shaped = shaped_reward_terminal(step.reward, grid.value(d), config.risk);
                y = shaped;
            } else {
                shaped = shaped_reward(step.reward, grid.value(d),
                                       grid.value(choice.eta_next), config.risk);
                const size_t next_block = q.index(step.next_state, choice.eta_next, 0, 0);
                double best = q.values[next_block];
                for (size_t i = 1; i < n_heads; ++i)
                    best = std::max(best, q.values[next_block + i]);
                y = shaped + config.risk.gamma * best;
            }
            const size_t cell = q.index(s, d, choice.action, choice.eta_next);
            const double alpha = config.step_size.value(entry_visits[cell]);
            ++entry_visits[cell];
            q.values[cell] += alpha * (y - q.values[cell]);
            ++result.state_visits[static_cast<size_t>(s) * static_cast<size_t>(E) +
                                  static_cast<size_t>(d)];
            action_sum += choice.action;
            rec.episode_return += step.reward;
            rec.shaped_return += shaped;
            rec.step_rewards.push_back(step.reward);
            ++n_steps;
            ++result.total_steps;
            if (step.terminal) break;
            s = step.next_state;
            d = choice.eta_next;
        }
        rec.avg_action =
            n_steps > 0 ? static_cast<double>(action_sum) / static_cast<double>(n_steps) : 0.0;
        result.episodes.push_back(std::move(rec));
        if (config.max_total_steps > 0 && result.total_steps >= config.max_total_steps) break;
    }
    return result;
}

} // namespace riskq
