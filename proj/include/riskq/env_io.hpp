#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "riskq/env.hpp"

namespace riskq {

/// Environment-file schema (versioned). Terminal states are listed once and
/// made absorbing automatically; their transition/reward entries may be
/// omitted. Reward kinds: "deterministic" {value}, "normal" {mu, sigma},
/// "shifted_neg_lognormal" {shift, mu, sigma}.
///
/// {
///   "env_version": 1,
///   "name": "my_env",
///   "n_states": 3, "n_actions": 2, "initial_state": 0,
///   "terminal_states": [2],
///   "transitions": [{"state": 0, "action": 0, "probs": [0.0, 1.0, 0.0]}, ...],
///   "rewards":     [{"state": 0, "action": 0, "kind": "normal", "mu": 2.5, "sigma": 4.0}, ...]
/// }
inline EnvModel env_from_json(const nlohmann::json& j) {
    if (!j.contains("env_version") || j.at("env_version").get<int>() != 1)
        throw std::invalid_argument("env_from_json: missing or unsupported env_version");
    EnvModel env = detail::blank_env(j.value("name", std::string("custom")),
                                     j.at("n_states").get<int>(), j.at("n_actions").get<int>(),
                                     j.at("initial_state").get<int>());
    for (int s : j.value("terminal_states", std::vector<int>{}))
        detail::add_absorbing_terminal(env, s);
    for (const auto& t : j.value("transitions", nlohmann::json::array())) {
        const int s = t.at("state").get<int>();
        const int a = t.at("action").get<int>();
        auto probs = t.at("probs").get<std::vector<double>>();
        if (probs.size() != static_cast<size_t>(env.n_states))
            throw std::invalid_argument("env_from_json: transition probs length mismatch");
        env.transition[env.sa_index(s, a)] = std::move(probs);
    }
    for (const auto& r : j.value("rewards", nlohmann::json::array())) {
        const int s = r.at("state").get<int>();
        const int a = r.at("action").get<int>();
        const std::string kind = r.at("kind").get<std::string>();
        RewardDist rd;
        if (kind == "deterministic") {
            rd = RewardDist::deterministic(r.at("value").get<double>());
        } else if (kind == "normal") {
            rd = RewardDist::normal(r.at("mu").get<double>(), r.at("sigma").get<double>());
        } else if (kind == "shifted_neg_lognormal") {
            rd = RewardDist::shifted_neg_lognormal(r.at("shift").get<double>(),
                                                   r.at("mu").get<double>(),
                                                   r.at("sigma").get<double>());
        } else {
            throw std::invalid_argument("env_from_json: unknown reward kind '" + kind + "'");
        }
        env.reward[env.sa_index(s, a)] = rd;
    }
    env.validate();
    return env;
}

inline nlohmann::json env_to_json(const EnvModel& env) {
    nlohmann::json j;
    j["env_version"] = 1;
    j["name"] = env.name;
    j["n_states"] = env.n_states;
    j["n_actions"] = env.n_actions;
    j["initial_state"] = env.initial_state;
    auto terminals = nlohmann::json::array();
    for (int s = 0; s < env.n_states; ++s)
        if (env.is_terminal(s)) terminals.push_back(s);
    j["terminal_states"] = terminals;
    auto transitions = nlohmann::json::array();
    auto rewards = nlohmann::json::array();
    for (int s = 0; s < env.n_states; ++s) {
        if (env.is_terminal(s)) continue;
        for (int a = 0; a < env.n_actions; ++a) {
            transitions.push_back({{"state", s},
                                   {"action", a},
                                   {"probs", env.transition[env.sa_index(s, a)]}});
            const auto& rd = env.reward_dist(s, a);
            nlohmann::json r = {{"state", s}, {"action", a}};
            switch (rd.kind) {
                case RewardKind::deterministic:
                    r["kind"] = "deterministic";
                    r["value"] = rd.value;
                    break;
                case RewardKind::normal:
                    r["kind"] = "normal";
                    r["mu"] = rd.mu;
                    r["sigma"] = rd.sigma;
                    break;
                case RewardKind::shifted_neg_lognormal:
                    r["kind"] = "shifted_neg_lognormal";
                    r["shift"] = rd.shift;
                    r["mu"] = rd.mu;
                    r["sigma"] = rd.sigma;
                    break;
            }
            rewards.push_back(r);
        }
    }
    j["transitions"] = transitions;
    j["rewards"] = rewards;
    return j;
}

inline EnvModel load_env_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_env_file: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return env_from_json(j);
}

/// Resolves the config-level environment selector: the two built-in names,
/// or anything else is treated as a path to an environment file.
inline EnvModel env_by_name(const std::string& name) {
    if (name == "chain10") return chain_mdp();
    if (name == "walk7") return random_walk();
    return load_env_file(name);
}

} // namespace riskq
