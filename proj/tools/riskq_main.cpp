/// Command-line front end for the risk-averse Q-learning toolkit: exact
/// solves, single training runs, lambda sweeps, fixed-policy evaluation,
/// and an empirical contraction diagnostic.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riskq/agent.hpp"
#include "riskq/env_io.hpp"
#include "riskq/exact.hpp"
#include "riskq/harness.hpp"
#include "riskq/net.hpp"
#include "riskq/version.hpp"

namespace {

using namespace riskq;

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

/// Flags shared by every subcommand. Config-file keys lose to flags the
/// user actually passed; option count() tells the two apart.
struct CommonFlags {
    std::string config_path;
    std::string env;
    std::string out_dir;
    uint64_t seed = 0;
    CLI::Option* env_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file (JSON)")
            ->check(CLI::ExistingFile);
        env_opt =
            cmd->add_option("--env", env, "environment: chain10, walk7, or an env-file path");
        seed_opt = cmd->add_option("--seed", seed, "master seed");
        out_opt = cmd->add_option("--out", out_dir, "output directory");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg =
            config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);
        if (env_opt->count() > 0) cfg.environment = env;
        if (seed_opt->count() > 0) cfg.master_seed = seed;
        if (out_opt->count() > 0) cfg.out_dir = out_dir;
        return cfg;
    }
};

/// Risk and discretization overrides common to the solver-facing commands.
struct RiskFlags {
    double lambda = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    int grid = 0;
    int atoms = 0;
    double tol = 0.0;
    CLI::Option* lambda_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* gamma_opt = nullptr;
    CLI::Option* grid_opt = nullptr;
    CLI::Option* atoms_opt = nullptr;
    CLI::Option* tol_opt = nullptr;

    void attach(CLI::App* cmd, bool with_solver) {
        lambda_opt = cmd->add_option("--lambda", lambda, "risk mixing weight in [0,1]");
        alpha_opt = cmd->add_option("--alpha", alpha, "tail level in (0,1)");
        gamma_opt = cmd->add_option("--gamma", gamma, "discount factor in (0,1)");
        grid_opt = cmd->add_option("--grid", grid, "eta-grid resolution (grid has D+1 points)");
        if (with_solver) {
            atoms_opt = cmd->add_option("--atoms", atoms, "reward atoms per (s,a)");
            tol_opt = cmd->add_option("--tol", tol, "fixed-point sup-norm tolerance");
        }
    }

    void apply(ExperimentConfig& cfg) const {
        if (lambda_opt->count() > 0) cfg.lambdas = {lambda};
        if (alpha_opt->count() > 0) cfg.alpha = alpha;
        if (gamma_opt->count() > 0) cfg.gamma = gamma;
        if (grid_opt->count() > 0) cfg.grid_resolution = grid;
        if (atoms_opt != nullptr && atoms_opt->count() > 0) cfg.atoms = atoms;
        if (tol_opt != nullptr && tol_opt->count() > 0) cfg.solve_tolerance = tol;
    }
};

/// Exploration and episode-budget overrides shared by the training commands.
struct TrainFlags {
    int episodes = 0;
    int max_steps = 0;
    double eps_max = 0.0;
    double eps_min = 0.0;
    double eps_decay = 0.0;
    CLI::Option* episodes_opt = nullptr;
    CLI::Option* max_steps_opt = nullptr;
    CLI::Option* eps_max_opt = nullptr;
    CLI::Option* eps_min_opt = nullptr;
    CLI::Option* eps_decay_opt = nullptr;

    void attach(CLI::App* cmd) {
        episodes_opt = cmd->add_option("--episodes", episodes, "training episodes");
        max_steps_opt =
            cmd->add_option("--max-steps", max_steps, "per-episode decision cap");
        eps_max_opt = cmd->add_option("--eps-max", eps_max, "initial exploration rate");
        eps_min_opt = cmd->add_option("--eps-min", eps_min, "exploration floor");
        eps_decay_opt =
            cmd->add_option("--eps-decay", eps_decay, "per-episode exploration decay");
    }

    void apply(ExperimentConfig& cfg) const {
        if (episodes_opt->count() > 0) cfg.episodes = episodes;
        if (max_steps_opt->count() > 0) cfg.max_episode_steps = max_steps;
        if (eps_max_opt->count() > 0) cfg.exploration.eps_max = eps_max;
        if (eps_min_opt->count() > 0) cfg.exploration.eps_min = eps_min;
        if (eps_decay_opt->count() > 0) cfg.exploration.decay = eps_decay;
    }
};

nlohmann::json policy_to_json(const AugmentedPolicy& policy, int n_states, int n_eta) {
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < n_states; ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int d = 0; d < n_eta; ++d) {
            const auto [a, e] = policy.at(s, d);
            row.push_back({a, e});
        }
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json grid_to_json(const EtaGrid& grid) {
    return {{"lower", grid.lower}, {"upper", grid.upper}, {"points", grid.size()}};
}

void print_policy_report(const AugmentedModel& model, const AugmentedPolicy& policy) {
    std::cout << "greedy actions by state:\n";
    for (int s = 0; s < model.n_states(); ++s) {
        if (model.base.is_terminal(s)) continue;
        std::set<int> actions;
        for (int d = 0; d < model.n_eta(); ++d)
            actions.insert(policy.at(s, d).first);
        std::cout << "  s" << s << ": ";
        bool first = true;
        for (int a : actions) {
            std::cout << (first ? "" : "|") << 'a' << a;
            first = false;
        }
        if (actions.size() > 1) std::cout << " (eta-dependent)";
        std::cout << '\n';
    }
}

void print_trajectory(const AugmentedModel& model, const std::vector<TrajectoryStep>& traj) {
    std::cout << "greedy trajectory (most probable successors):";
    for (const TrajectoryStep& step : traj)
        std::cout << " s" << step.state << "(a" << step.action
                  << ",eta'=" << fmt(model.grid.value(step.eta_next)) << ")";
    std::cout << '\n';
}

struct SolveArgs {
    CommonFlags common;
    RiskFlags risk;
};

void run_solve(const SolveArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    cfg.agent = "exact";
    args.risk.apply(cfg);
    cfg.lambdas = {cfg.lambdas.front()};
    cfg.validate();
    const double lambda = cfg.lambdas.front();
    const EnvModel env = env_by_name(cfg.environment);
    const AugmentedModel model =
        augment_env(env, cfg.risk(lambda), cfg.grid_resolution, cfg.atoms);
    const SolveResult solved = value_iteration(model, cfg.solve_tolerance);

    std::cout << "environment " << env.name << ": " << env.n_states << " states, "
              << env.n_actions << " actions\n";
    std::cout << "lambda=" << fmt(lambda) << " alpha=" << fmt(cfg.alpha)
              << " gamma=" << fmt(cfg.gamma) << " grid points=" << model.n_eta()
              << " atoms=" << cfg.atoms << '\n';
    std::cout << "converged in " << solved.iterations << " sweeps, final gap "
              << fmt(solved.gaps.back()) << '\n';
    std::cout << "objective value: " << fmt(problem_value(model, solved.q)) << '\n';
    print_policy_report(model, solved.policy);
    print_trajectory(model, greedy_trajectory(model, solved.policy));

    if (args.common.out_opt->count() > 0) {
        nlohmann::json j;
        j["version"] = version_string;
        j["config"] = to_json(cfg);
        j["iterations"] = solved.iterations;
        j["final_gap"] = solved.gaps.back();
        j["problem_value"] = problem_value(model, solved.q);
        j["eta_grid"] = grid_to_json(model.grid);
        j["policy"] = policy_to_json(solved.policy, model.n_states(), model.n_eta());
        nlohmann::json traj = nlohmann::json::array();
        for (const TrajectoryStep& step : greedy_trajectory(model, solved.policy))
            traj.push_back({{"state", step.state},
                            {"eta_index", step.eta_index},
                            {"action", step.action},
                            {"eta_next", step.eta_next}});
        j["greedy_trajectory"] = traj;
        auto out = open_output_file(cfg.out_dir, "solve.json");
        out << j.dump(2) << '\n';
        std::cout << "wrote solve.json in " << cfg.out_dir << '\n';
    }
}

struct TrainDqnArgs {
    CommonFlags common;
    RiskFlags risk;
    TrainFlags train;
    std::vector<int> hidden;
    double learning_rate = 0.0;
    int minibatch = 0;
    int capacity = 0;
    int sync = 0;
    CLI::Option* hidden_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* minibatch_opt = nullptr;
    CLI::Option* capacity_opt = nullptr;
    CLI::Option* sync_opt = nullptr;
};

void print_single_run_summary(const SweepData& data) {
    const auto& r = data.summary.at("results").at(0);
    std::cout << "final window (" << r.at("window").get<int>()
              << " episodes): avg_action=" << fmt(r.at("avg_action_mean").get<double>())
              << " return=" << fmt(r.at("return_mean").get<double>())
              << " step_reward=" << fmt(r.at("step_reward_mean").get<double>())
              << " var_alpha=" << fmt(r.at("var_alpha").get<double>()) << '\n';
}

void run_train_dqn(const TrainDqnArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    cfg.agent = "dqn";
    args.risk.apply(cfg);
    args.train.apply(cfg);
    if (args.hidden_opt->count() > 0) cfg.hidden = args.hidden;
    if (args.lr_opt->count() > 0) cfg.learning_rate = args.learning_rate;
    if (args.minibatch_opt->count() > 0) cfg.minibatch = args.minibatch;
    if (args.capacity_opt->count() > 0) cfg.replay_capacity = args.capacity;
    if (args.sync_opt->count() > 0) cfg.target_sync = args.sync;
    cfg.lambdas = {cfg.lambdas.front()};
    cfg.n_runs = 1;
    cfg.validate();
    const double lambda = cfg.lambdas.front();
    const EnvModel env = env_by_name(cfg.environment);
    // Same trial seed a one-lambda one-run sweep would use.
    const uint64_t seed = derive_seed({cfg.master_seed, 0, 0});
    DqnResult result = train_dqn(env, cfg.dqn_config(lambda, seed));

    const SweepData data = single_run_data(cfg, std::move(result.episodes));
    write_sweep_files(data);
    auto model_out = open_output_file(cfg.out_dir, "model.txt");
    save_mlp(result.net, model_out);

    std::cout << "trained deep agent on " << env.name << ": lambda=" << fmt(lambda) << ", "
              << cfg.episodes << " episodes, trial seed " << seed << '\n';
    print_single_run_summary(data);
    std::cout << "wrote metrics.csv, aggregate.csv, summary.json, model.txt in "
              << cfg.out_dir << '\n';
}

struct TrainTabularArgs {
    CommonFlags common;
    RiskFlags risk;
    TrainFlags train;
    std::string step_mode;
    double alpha0 = 0.0;
    double tau = 0.0;
    long total_steps = 0;
    CLI::Option* step_mode_opt = nullptr;
    CLI::Option* alpha0_opt = nullptr;
    CLI::Option* tau_opt = nullptr;
    CLI::Option* total_steps_opt = nullptr;
};

void run_train_tabular(const TrainTabularArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    cfg.agent = "tabular";
    args.risk.apply(cfg);
    args.train.apply(cfg);
    if (args.step_mode_opt->count() > 0) {
        if (args.step_mode == "constant")
            cfg.step_size.mode = StepSizeSchedule::Mode::constant;
        else if (args.step_mode == "harmonic")
            cfg.step_size.mode = StepSizeSchedule::Mode::harmonic;
        else
            throw std::invalid_argument("--step-size must be constant or harmonic");
    }
    if (args.alpha0_opt->count() > 0) cfg.step_size.alpha0 = args.alpha0;
    if (args.tau_opt->count() > 0) cfg.step_size.tau = args.tau;
    cfg.lambdas = {cfg.lambdas.front()};
    cfg.n_runs = 1;
    cfg.validate();
    const double lambda = cfg.lambdas.front();
    const EnvModel env = env_by_name(cfg.environment);
    const uint64_t seed = derive_seed({cfg.master_seed, 0, 0});
    TabularConfig tab = cfg.tabular_config(lambda, seed);
    if (args.total_steps_opt->count() > 0) tab.max_total_steps = args.total_steps;
    TabularResult result = train_tabular(env, tab);

    const SweepData data = single_run_data(cfg, std::move(result.episodes));
    write_sweep_files(data);
    {
        nlohmann::json j;
        j["version"] = version_string;
        j["config"] = to_json(cfg);
        j["total_steps"] = result.total_steps;
        j["eta_grid"] = grid_to_json(result.grid);
        j["policy"] = policy_to_json(table_policy(result.q, env), env.n_states,
                                     result.grid.size());
        nlohmann::json visits = nlohmann::json::array();
        for (int s = 0; s < env.n_states; ++s) {
            nlohmann::json row = nlohmann::json::array();
            for (int d = 0; d < result.grid.size(); ++d)
                row.push_back(
                    result.state_visits[static_cast<size_t>(s) *
                                            static_cast<size_t>(result.grid.size()) +
                                        static_cast<size_t>(d)]);
            visits.push_back(row);
        }
        j["state_visits"] = visits;
        auto out = open_output_file(cfg.out_dir, "policy.json");
        out << j.dump(2) << '\n';
    }

    std::cout << "trained tabular agent on " << env.name << ": lambda=" << fmt(lambda)
              << ", " << data.trials.front().episodes.size() << " episodes, "
              << result.total_steps << " updates, trial seed " << seed << '\n';
    print_single_run_summary(data);
    std::cout << "wrote metrics.csv, aggregate.csv, summary.json, policy.json in "
              << cfg.out_dir << '\n';
}

struct SweepArgs {
    CommonFlags common;
    std::string agent;
    std::vector<double> lambdas;
    int episodes = 0;
    int runs = 0;
    int workers = 0;
    double alpha = 0.0;
    double gamma = 0.0;
    int grid = 0;
    CLI::Option* agent_opt = nullptr;
    CLI::Option* lambdas_opt = nullptr;
    CLI::Option* episodes_opt = nullptr;
    CLI::Option* runs_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* gamma_opt = nullptr;
    CLI::Option* grid_opt = nullptr;
};

void run_sweep_cmd(const SweepArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    if (args.agent_opt->count() > 0) cfg.agent = args.agent;
    if (args.lambdas_opt->count() > 0) cfg.lambdas = args.lambdas;
    if (args.episodes_opt->count() > 0) cfg.episodes = args.episodes;
    if (args.runs_opt->count() > 0) cfg.n_runs = args.runs;
    if (args.workers_opt->count() > 0) cfg.workers = args.workers;
    if (args.alpha_opt->count() > 0) cfg.alpha = args.alpha;
    if (args.gamma_opt->count() > 0) cfg.gamma = args.gamma;
    if (args.grid_opt->count() > 0) cfg.grid_resolution = args.grid;
    cfg.validate();
    const SweepData data = run_sweep(cfg);
    for (const auto& r : data.summary.at("results")) {
        if (cfg.agent == "exact") {
            std::cout << "lambda=" << fmt(r.at("lambda").get<double>())
                      << ": objective=" << fmt(r.at("problem_value").get<double>())
                      << " iterations=" << r.at("iterations").get<int>() << '\n';
        } else {
            std::cout << "lambda=" << fmt(r.at("lambda").get<double>())
                      << ": avg_action=" << fmt(r.at("avg_action_mean").get<double>())
                      << " return=" << fmt(r.at("return_mean").get<double>())
                      << " var_alpha=" << fmt(r.at("var_alpha").get<double>()) << '\n';
        }
    }
    if (cfg.agent == "exact")
        std::cout << "wrote summary.json in " << cfg.out_dir << '\n';
    else
        std::cout << "wrote metrics.csv, aggregate.csv, summary.json in " << cfg.out_dir
                  << '\n';
}

struct EvaluateArgs {
    CommonFlags common;
    RiskFlags risk;
    std::string policy = "greedy";
    std::vector<int> actions;
    CLI::Option* actions_opt = nullptr;
};

/// Pins one base action per state: the result is a one-action environment
/// whose augmented solve is the fixed-policy objective with the auxiliary
/// level still chosen optimally at every step.
EnvModel restrict_actions(const EnvModel& env, const std::vector<int>& actions) {
    if (actions.size() != static_cast<size_t>(env.n_states))
        throw std::invalid_argument("evaluate: need one action per state");
    EnvModel out;
    out.name = env.name + "+pinned";
    out.n_states = env.n_states;
    out.n_actions = 1;
    out.initial_state = env.initial_state;
    out.terminal = env.terminal;
    out.transition.resize(static_cast<size_t>(env.n_states));
    out.reward.resize(static_cast<size_t>(env.n_states));
    for (int s = 0; s < env.n_states; ++s) {
        const int a = actions[static_cast<size_t>(s)];
        if (a < 0 || a >= env.n_actions)
            throw std::invalid_argument("evaluate: action out of range for state " +
                                        std::to_string(s));
        out.transition[static_cast<size_t>(s)] = env.transition[env.sa_index(s, a)];
        out.reward[static_cast<size_t>(s)] = env.reward[env.sa_index(s, a)];
    }
    out.validate();
    return out;
}

void run_evaluate(const EvaluateArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    cfg.agent = "exact";
    args.risk.apply(cfg);
    cfg.lambdas = {cfg.lambdas.front()};
    cfg.validate();
    const double lambda = cfg.lambdas.front();
    const EnvModel env = env_by_name(cfg.environment);
    const RiskParams params = cfg.risk(lambda);

    std::string policy_name = args.policy;
    std::vector<int> actions;
    if (args.actions_opt->count() > 0) {
        actions = args.actions;
        policy_name = "custom";
    } else if (args.policy == "a0") {
        actions.assign(static_cast<size_t>(env.n_states), 0);
    } else if (args.policy == "a1") {
        actions.assign(static_cast<size_t>(env.n_states), 1);
    } else if (args.policy != "greedy") {
        throw std::invalid_argument("--policy must be a0, a1 or greedy");
    }

    double value = 0.0;
    int iterations = 0;
    if (policy_name == "greedy") {
        const AugmentedModel model =
            augment_env(env, params, cfg.grid_resolution, cfg.atoms);
        const SolveResult solved = value_iteration(model, cfg.solve_tolerance);
        value = problem_value(model, solved.q);
        iterations = solved.iterations;
    } else {
        const EnvModel pinned = restrict_actions(env, actions);
        // Same eta-grid as the unrestricted problem, for comparability.
        const auto [lo, hi] = env.reward_bounds();
        const AugmentedModel model =
            make_augmented_model(discretize_rewards(pinned, cfg.atoms),
                                 make_eta_grid(lo, hi, cfg.grid_resolution), params);
        const SolveResult solved = value_iteration(model, cfg.solve_tolerance);
        value = problem_value(model, solved.q);
        iterations = solved.iterations;
    }

    std::cout << "policy " << policy_name << " on " << env.name
              << ": objective=" << fmt(value) << " (lambda=" << fmt(lambda)
              << ", alpha=" << fmt(cfg.alpha) << ", gamma=" << fmt(cfg.gamma)
              << "), converged in " << iterations << " sweeps\n";

    if (args.common.out_opt->count() > 0) {
        nlohmann::json j;
        j["version"] = version_string;
        j["config"] = to_json(cfg);
        j["policy"] = policy_name;
        if (!actions.empty()) j["actions"] = actions;
        j["objective"] = value;
        j["iterations"] = iterations;
        auto out = open_output_file(cfg.out_dir, "evaluate.json");
        out << j.dump(2) << '\n';
        std::cout << "wrote evaluate.json in " << cfg.out_dir << '\n';
    }
}

struct ProbeArgs {
    CommonFlags common;
    RiskFlags risk;
    int pairs = 100;
};

int run_probe(const ProbeArgs& args) {
    ExperimentConfig cfg = args.common.resolve();
    cfg.agent = "exact";
    args.risk.apply(cfg);
    cfg.lambdas = {cfg.lambdas.front()};
    cfg.validate();
    if (args.pairs < 1) throw std::invalid_argument("--pairs must be >= 1");
    const EnvModel env = env_by_name(cfg.environment);
    const AugmentedModel model =
        augment_env(env, cfg.risk(cfg.lambdas.front()), cfg.grid_resolution, cfg.atoms);
    RngStream rng(cfg.master_seed);
    const double ratio = contraction_probe(model, args.pairs, rng);
    std::cout << "max empirical contraction ratio over " << args.pairs
              << " table pairs: " << fmt(ratio) << " (bound gamma=" << fmt(cfg.gamma)
              << ")\n";
    if (ratio > cfg.gamma + 1e-12) {
        std::cerr << "error: contraction bound violated\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(version_string) +
                 " - risk-averse Q-learning over an augmented action space"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    int exit_code = 0;

    auto solve_args = std::make_shared<SolveArgs>();
    CLI::App* solve_cmd =
        app.add_subcommand("solve", "exact fixed point and greedy-policy report");
    solve_args->common.attach(solve_cmd);
    solve_args->risk.attach(solve_cmd, true);
    solve_cmd->callback([solve_args] { run_solve(*solve_args); });

    auto dqn_args = std::make_shared<TrainDqnArgs>();
    CLI::App* dqn_cmd = app.add_subcommand("train-dqn", "train one deep agent run");
    dqn_args->common.attach(dqn_cmd);
    dqn_args->risk.attach(dqn_cmd, false);
    dqn_args->train.attach(dqn_cmd);
    dqn_args->hidden_opt = dqn_cmd->add_option("--hidden", dqn_args->hidden,
                                               "hidden layer widths (comma separated)")
                               ->delimiter(',');
    dqn_args->lr_opt = dqn_cmd->add_option("--lr", dqn_args->learning_rate, "step size");
    dqn_args->minibatch_opt =
        dqn_cmd->add_option("--minibatch", dqn_args->minibatch, "minibatch size");
    dqn_args->capacity_opt =
        dqn_cmd->add_option("--capacity", dqn_args->capacity, "replay buffer capacity");
    dqn_args->sync_opt = dqn_cmd->add_option(
        "--sync", dqn_args->sync, "gradient steps between target-network syncs");
    dqn_cmd->callback([dqn_args] { run_train_dqn(*dqn_args); });

    auto tab_args = std::make_shared<TrainTabularArgs>();
    CLI::App* tab_cmd = app.add_subcommand("train-tabular", "train one tabular agent run");
    tab_args->common.attach(tab_cmd);
    tab_args->risk.attach(tab_cmd, false);
    tab_args->train.attach(tab_cmd);
    tab_args->step_mode_opt = tab_cmd->add_option(
        "--step-size", tab_args->step_mode, "step-size schedule: constant or harmonic");
    tab_args->alpha0_opt =
        tab_cmd->add_option("--alpha0", tab_args->alpha0, "initial step size");
    tab_args->tau_opt =
        tab_cmd->add_option("--tau", tab_args->tau, "harmonic schedule time constant");
    tab_args->total_steps_opt = tab_cmd->add_option(
        "--steps", tab_args->total_steps, "total update budget (0 = episode count only)");
    tab_cmd->callback([tab_args] { run_train_tabular(*tab_args); });

    auto sweep_args = std::make_shared<SweepArgs>();
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "lambda sweep over independently seeded runs");
    sweep_args->common.attach(sweep_cmd);
    sweep_args->agent_opt = sweep_cmd->add_option(
        "--agent", sweep_args->agent, "agent kind: exact, tabular or dqn");
    sweep_args->lambdas_opt =
        sweep_cmd->add_option("--lambdas", sweep_args->lambdas,
                              "lambda values (comma separated)")
            ->delimiter(',');
    sweep_args->episodes_opt =
        sweep_cmd->add_option("--episodes", sweep_args->episodes, "episodes per run");
    sweep_args->runs_opt = sweep_cmd->add_option("--runs", sweep_args->runs, "runs per lambda");
    sweep_args->workers_opt = sweep_cmd->add_option(
        "--workers", sweep_args->workers, "concurrent trials (0 = hardware threads)");
    sweep_args->alpha_opt = sweep_cmd->add_option("--alpha", sweep_args->alpha, "tail level");
    sweep_args->gamma_opt =
        sweep_cmd->add_option("--gamma", sweep_args->gamma, "discount factor");
    sweep_args->grid_opt =
        sweep_cmd->add_option("--grid", sweep_args->grid, "eta-grid resolution");
    sweep_cmd->callback([sweep_args] { run_sweep_cmd(*sweep_args); });

    auto eval_args = std::make_shared<EvaluateArgs>();
    CLI::App* eval_cmd = app.add_subcommand(
        "evaluate", "objective of a fixed base policy (auxiliary level stays optimal)");
    eval_args->common.attach(eval_cmd);
    eval_args->risk.attach(eval_cmd, true);
    eval_cmd->add_option("--policy", eval_args->policy, "a0, a1 or greedy");
    eval_args->actions_opt =
        eval_cmd->add_option("--actions", eval_args->actions,
                             "explicit per-state actions (comma separated)")
            ->delimiter(',');
    eval_cmd->callback([eval_args] { run_evaluate(*eval_args); });

    auto probe_args = std::make_shared<ProbeArgs>();
    CLI::App* probe_cmd = app.add_subcommand(
        "probe-contraction", "empirical contraction factor of the Bellman operator");
    probe_args->common.attach(probe_cmd);
    probe_args->risk.attach(probe_cmd, true);
    probe_cmd->add_option("--pairs", probe_args->pairs, "random table pairs to probe");
    probe_cmd->callback([probe_args, &exit_code] { exit_code = run_probe(*probe_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return exit_code;
}
