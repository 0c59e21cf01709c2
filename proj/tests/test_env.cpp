#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "riskq/env.hpp"
#include "riskq/env_io.hpp"
#include "riskq/risk.hpp"

#include "oracles.hpp"

using namespace riskq;

TEST_CASE("chain layout and reward distributions") {
    const EnvModel env = chain_mdp();
    REQUIRE(env.n_states == 10);
    REQUIRE(env.n_actions == 2);
    REQUIRE(env.initial_state == 0);
    REQUIRE(env.is_terminal(9));
    REQUIRE_NOTHROW(env.validate());

    const auto row = env.transition_row(3, 0);
    for (int sn = 0; sn < 10; ++sn) REQUIRE(row[static_cast<size_t>(sn)] == (sn == 4 ? 1.0 : 0.0));

    const RewardDist& rd = env.reward_dist(0, 1);
    REQUIRE(rd.kind == RewardKind::normal);
    REQUIRE(rd.mu == 2.0);
    REQUIRE(rd.sigma == 0.1);

    const auto [lo, hi] = env.reward_bounds();
    REQUIRE(lo == -9.5);
    REQUIRE(hi == 14.5);
}

TEST_CASE("chain episodes last exactly nine steps") {
    const EnvModel env = chain_mdp();
    RngStream rng(5);
    int s = env.initial_state;
    int steps = 0;
    while (!env.is_terminal(s)) {
        const EpisodeStep step = sample_step(env, s, steps % 2, rng);
        s = step.next_state;
        ++steps;
    }
    REQUIRE(steps == 9);
}

TEST_CASE("random walk layout") {
    const EnvModel env = random_walk();
    REQUIRE(env.n_states == 7);
    REQUIRE(env.initial_state == 3);
    REQUIRE(env.is_terminal(0));
    REQUIRE(env.is_terminal(6));
    REQUIRE_NOTHROW(env.validate());

    const auto left = env.transition_row(3, 0);
    REQUIRE(left[2] == 1.0);
    const auto right = env.transition_row(3, 1);
    REQUIRE(right[4] == 1.0);

    // Only the two terminal-entry moves pay a reward.
    for (int s = 1; s <= 5; ++s)
        for (int a = 0; a < 2; ++a) {
            const auto& rd = env.reward_dist(s, a);
            if ((s == 1 && a == 0) || (s == 5 && a == 1)) {
                REQUIRE(rd.kind == RewardKind::shifted_neg_lognormal);
            } else {
                REQUIRE(rd.kind == RewardKind::deterministic);
                REQUIRE(rd.value == 0.0);
            }
        }
}

TEST_CASE("random walk terminal rewards have the documented means") {
    const EnvModel env = random_walk();
    RngStream rng(777);
    std::vector<double> left(1000000), right(1000000);
    for (auto& x : left) x = env.reward_dist(1, 0).sample(rng);
    for (auto& x : right) x = env.reward_dist(5, 1).sample(rng);
    REQUIRE(std::fabs(oracle::mean(left) - 7.28) < 0.02);
    REQUIRE(std::fabs(oracle::mean(right) - 5.5) < 0.01);

    // Analytic moments agree with the sampled ones.
    REQUIRE(std::fabs(env.reward_dist(1, 0).mean() - 7.28) < 0.005);
    REQUIRE(std::fabs(env.reward_dist(5, 1).mean() - 5.5) < 0.005);
}

TEST_CASE("sample_step determinism and terminal handling") {
    const EnvModel env = chain_mdp();

    RngStream a(99), b(99);
    const EpisodeStep s1 = sample_step(env, 4, 0, a);
    const EpisodeStep s2 = sample_step(env, 4, 0, b);
    REQUIRE(s1.next_state == s2.next_state);
    REQUIRE(s1.reward == s2.reward);

    RngStream c(1);
    const EpisodeStep last = sample_step(env, 8, 0, c);
    REQUIRE(last.next_state == 9);
    REQUIRE(last.terminal);

    RngStream d(1);
    REQUIRE_THROWS_AS(sample_step(env, 9, 0, d), std::invalid_argument);
}

namespace {
EnvModel stochastic_test_env() {
    nlohmann::json j = {
        {"env_version", 1},
        {"name", "coin"},
        {"n_states", 3},
        {"n_actions", 2},
        {"initial_state", 0},
        {"terminal_states", {2}},
        {"transitions",
         {{{"state", 0}, {"action", 0}, {"probs", {0.0, 0.3, 0.7}}},
          {{"state", 0}, {"action", 1}, {"probs", {0.0, 1.0, 0.0}}},
          {{"state", 1}, {"action", 0}, {"probs", {0.0, 0.0, 1.0}}},
          {{"state", 1}, {"action", 1}, {"probs", {0.0, 0.0, 1.0}}}}},
        {"rewards",
         {{{"state", 0}, {"action", 0}, {"kind", "normal"}, {"mu", 1.0}, {"sigma", 0.5}},
          {{"state", 0}, {"action", 1}, {"kind", "deterministic"}, {"value", 2.0}},
          {{"state", 1},
           {"action", 0},
           {"kind", "shifted_neg_lognormal"},
           {"shift", 10.0},
           {"mu", 0.5},
           {"sigma", 1.0}},
          {{"state", 1}, {"action", 1}, {"kind", "deterministic"}, {"value", 0.0}}}}};
    return env_from_json(j);
}
} // namespace

TEST_CASE("empirical transition frequencies match the kernel") {
    const EnvModel env = stochastic_test_env();
    RngStream rng(2024);
    const int n = 100000;
    int hits_s1 = 0;
    for (int i = 0; i < n; ++i)
        if (sample_step(env, 0, 0, rng).next_state == 1) ++hits_s1;
    const double freq = static_cast<double>(hits_s1) / n;
    const double se = std::sqrt(0.3 * 0.7 / n);
    REQUIRE(std::fabs(freq - 0.3) < 3.0 * se);
}

TEST_CASE("env json round trip") {
    const EnvModel env = stochastic_test_env();
    const EnvModel back = env_from_json(env_to_json(env));
    REQUIRE(back.n_states == env.n_states);
    REQUIRE(back.n_actions == env.n_actions);
    REQUIRE(back.initial_state == env.initial_state);
    REQUIRE(back.transition == env.transition);
    for (int s = 0; s < env.n_states; ++s)
        for (int a = 0; a < env.n_actions; ++a) {
            REQUIRE(back.reward_dist(s, a).kind == env.reward_dist(s, a).kind);
            REQUIRE(back.reward_dist(s, a).mean() == env.reward_dist(s, a).mean());
        }

    nlohmann::json bad = env_to_json(env);
    bad["env_version"] = 99;
    REQUIRE_THROWS_AS(env_from_json(bad), std::invalid_argument);
}

TEST_CASE("env file loading and name resolution") {
    const auto path = std::filesystem::temp_directory_path() / "riskq_test_env.json";
    {
        std::ofstream out(path);
        out << env_to_json(stochastic_test_env()).dump(2);
    }
    const EnvModel loaded = load_env_file(path.string());
    REQUIRE(loaded.name == "coin");
    std::filesystem::remove(path);

    REQUIRE(env_by_name("chain10").n_states == 10);
    REQUIRE(env_by_name("walk7").n_states == 7);
    REQUIRE_THROWS(env_by_name("no_such_env_or_file"));
}

TEST_CASE("invalid models are rejected") {
    EnvModel env = chain_mdp();
    env.transition[env.sa_index(2, 0)][5] = 0.5; // row now sums to 1.5
    REQUIRE_THROWS_AS(env.validate(), std::invalid_argument);

    EnvModel env2 = chain_mdp();
    env2.reward[env2.sa_index(9, 0)] = RewardDist::deterministic(1.0);
    REQUIRE_THROWS_AS(env2.validate(), std::invalid_argument);
}

TEST_CASE("discretize_rewards builds midpoint-quantile atoms") {
    SECTION("deterministic keeps a single unit atom") {
        const EnvModel env = discretize_rewards(random_walk(), 32);
        const auto& atoms = env.reward_dist(2, 0).atoms;
        REQUIRE(atoms.size() == 1);
        REQUIRE(atoms[0].first == 0.0);
        REQUIRE(atoms[0].second == 1.0);
    }

    SECTION("normal atoms are mean-exact and equiprobable") {
        const EnvModel env = discretize_rewards(chain_mdp(), 64);
        const auto& atoms = env.reward_dist(0, 0).atoms;
        REQUIRE(atoms.size() == 64);
        double mass = 0.0, mean = 0.0;
        for (const auto& [v, p] : atoms) {
            REQUIRE(p == 1.0 / 64);
            mass += p;
            mean += p * v;
        }
        REQUIRE(std::fabs(mass - 1.0) < 1e-12);
        REQUIRE(std::fabs(mean - 2.5) < 1e-3); // symmetric quantiles: error is ~1e-15
        REQUIRE(std::is_sorted(atoms.begin(), atoms.end()));
    }

    SECTION("heavy-tailed atoms reproduce the documented mean") {
        const RewardDist rd = RewardDist::shifted_neg_lognormal(10.0, 0.5, 1.0);
        EnvModel env = random_walk();
        env = discretize_rewards(env, 256);
        const auto& atoms = env.reward_dist(1, 0).atoms;
        REQUIRE(atoms.size() == 256);
        double mean = 0.0;
        for (const auto& [v, p] : atoms) mean += p * v;
        REQUIRE(std::fabs(mean - 7.28) < 0.02);
        REQUIRE(std::fabs(rd.mean() - 7.2817) < 1e-3);
    }

    SECTION("n_atoms below two is rejected") {
        REQUIRE_THROWS_AS(discretize_rewards(chain_mdp(), 1), std::invalid_argument);
    }
}

TEST_CASE("atom distribution CVaR tracks the analytic value") {
    const EnvModel env = discretize_rewards(chain_mdp(), 256);
    const auto& atoms = env.reward_dist(0, 0).atoms; // Normal(2.5, 4^2)
    std::vector<double> values;
    for (const auto& [v, p] : atoms) values.push_back(v);
    const double analytic = oracle::normal_cvar(2.5, 4.0, 0.05);
    REQUIRE(std::fabs(analytic - (-5.75)) < 0.01);
    REQUIRE(std::fabs(cvar_lower(values, 0.05) - analytic) < 0.15);
}

TEST_CASE("reward quantiles invert the sampling distributions") {
    const RewardDist snl = RewardDist::shifted_neg_lognormal(10.0, 0.5, 1.0);
    // Monotone increasing in q, and the median is exact: 10 - exp(0.5).
    REQUIRE(std::fabs(snl.quantile(0.5) - (10.0 - std::exp(0.5))) < 1e-12);
    REQUIRE(snl.quantile(0.1) < snl.quantile(0.5));
    REQUIRE(snl.quantile(0.5) < snl.quantile(0.9));

    const RewardDist norm = RewardDist::normal(2.0, 0.1);
    REQUIRE(std::fabs(norm.quantile(0.5) - 2.0) < 1e-12);
    REQUIRE_THROWS_AS(norm.quantile(0.0), std::invalid_argument);
}
