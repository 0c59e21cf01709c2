#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "riskq/agent.hpp"
#include "riskq/env_io.hpp"
#include "riskq/exact.hpp"
#include "riskq/risk.hpp"
#include "riskq/version.hpp"

namespace riskq {

/// One experiment: an agent kind swept over a list of lambda values with
/// n_runs independently seeded trials each. The struct carries every knob of
/// every agent kind so a single config file describes the whole run and can
/// be echoed verbatim into each output for provenance.
struct ExperimentConfig {
    std::string environment = "chain10";
    std::string agent = "dqn"; // one of: exact, tabular, dqn
    std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 1.0};
    double alpha = 0.05;
    double gamma = 0.98;
    int grid_resolution = 20;
    int episodes = 2000;
    int n_runs = 10;
    uint64_t master_seed = 1;
    std::string out_dir = "out";
    int window = 50;         // trailing smoothing / reward-pool window
    int summary_window = 200; // final-window length for summary statistics
    int workers = 0;          // 0 = one per hardware thread
    ExplorationSchedule exploration;
    // deep agent
    int replay_capacity = 10000;
    int minibatch = 64;
    int target_sync = 100;
    std::vector<int> hidden = {64, 64};
    double learning_rate = 1e-3;
    int max_episode_steps = 200;
    // tabular agent
    StepSizeSchedule step_size;
    // exact solver
    int atoms = 64;
    double solve_tolerance = 1e-8;

    RiskParams risk(double lambda) const {
        RiskParams p;
        p.lambda = lambda;
        p.alpha = alpha;
        p.gamma = gamma;
        return p;
    }

    DqnConfig dqn_config(double lambda, uint64_t seed) const {
        DqnConfig c;
        c.episodes = episodes;
        c.replay_capacity = replay_capacity;
        c.minibatch = minibatch;
        c.target_sync = target_sync;
        c.hidden = hidden;
        c.learning_rate = learning_rate;
        c.grid_resolution = grid_resolution;
        c.max_episode_steps = max_episode_steps;
        c.risk = risk(lambda);
        c.exploration = exploration;
        c.seed = seed;
        return c;
    }

    TabularConfig tabular_config(double lambda, uint64_t seed) const {
        TabularConfig c;
        c.episodes = episodes;
        c.grid_resolution = grid_resolution;
        c.max_episode_steps = max_episode_steps;
        c.risk = risk(lambda);
        c.exploration = exploration;
        c.step_size = step_size;
        c.seed = seed;
        return c;
    }

    void validate() const {
        if (agent != "exact" && agent != "tabular" && agent != "dqn")
            throw std::invalid_argument("config: agent must be exact, tabular or dqn");
        if (environment.empty()) throw std::invalid_argument("config: environment is empty");
        if (lambdas.empty()) throw std::invalid_argument("config: lambdas is empty");
        for (double l : lambdas)
            if (!(l >= 0.0 && l <= 1.0))
                throw std::invalid_argument("config: lambda values must be in [0,1]");
        if (n_runs < 1) throw std::invalid_argument("config: n_runs must be >= 1");
        if (window < 1) throw std::invalid_argument("config: window must be >= 1");
        if (summary_window < 1)
            throw std::invalid_argument("config: summary_window must be >= 1");
        if (workers < 0) throw std::invalid_argument("config: workers must be >= 0");
        if (agent == "dqn") dqn_config(lambdas.front(), 0).validate();
        if (agent == "tabular") tabular_config(lambdas.front(), 0).validate();
        if (agent == "exact") {
            risk(lambdas.front()).validate();
            if (atoms < 2) throw std::invalid_argument("config: atoms must be >= 2");
            if (!(solve_tolerance > 0.0))
                throw std::invalid_argument("config: solve_tolerance must be positive");
            if (grid_resolution < 1)
                throw std::invalid_argument("config: grid_resolution must be >= 1");
        }
    }
};

namespace detail {
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const char* section) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument(std::string("config: unknown key '") + section +
                                        it.key() + "'");
    }
}
} // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["config_version"] = 1;
    j["environment"] = c.environment;
    j["agent"] = c.agent;
    j["lambdas"] = c.lambdas;
    j["alpha"] = c.alpha;
    j["gamma"] = c.gamma;
    j["grid_resolution"] = c.grid_resolution;
    j["episodes"] = c.episodes;
    j["n_runs"] = c.n_runs;
    j["master_seed"] = c.master_seed;
    j["out_dir"] = c.out_dir;
    j["window"] = c.window;
    j["summary_window"] = c.summary_window;
    j["workers"] = c.workers;
    j["exploration"] = {{"eps_max", c.exploration.eps_max},
                        {"eps_min", c.exploration.eps_min},
                        {"decay", c.exploration.decay}};
    j["dqn"] = {{"replay_capacity", c.replay_capacity},
                {"minibatch", c.minibatch},
                {"target_sync", c.target_sync},
                {"hidden", c.hidden},
                {"learning_rate", c.learning_rate},
                {"max_episode_steps", c.max_episode_steps}};
    j["tabular"] = {
        {"step_size",
         c.step_size.mode == StepSizeSchedule::Mode::constant ? "constant" : "harmonic"},
        {"alpha0", c.step_size.alpha0},
        {"tau", c.step_size.tau}};
    j["exact"] = {{"atoms", c.atoms}, {"solve_tolerance", c.solve_tolerance}};
    return j;
}

/// Parses a config object. Missing keys keep their defaults; unknown keys
/// fail fast with the offending name; config_version is mandatory.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    detail::check_keys(j,
                       {"config_version", "environment", "agent", "lambdas", "alpha", "gamma",
                        "grid_resolution", "episodes", "n_runs", "master_seed", "out_dir",
                        "window", "summary_window", "workers", "exploration", "dqn", "tabular",
                        "exact"},
                       "");
    if (!j.contains("config_version"))
        throw std::invalid_argument("config: missing config_version");
    if (j.at("config_version").get<int>() != 1)
        throw std::invalid_argument("config: unsupported config_version");
    ExperimentConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("environment", c.environment);
    get("agent", c.agent);
    get("lambdas", c.lambdas);
    get("alpha", c.alpha);
    get("gamma", c.gamma);
    get("grid_resolution", c.grid_resolution);
    get("episodes", c.episodes);
    get("n_runs", c.n_runs);
    get("master_seed", c.master_seed);
    get("out_dir", c.out_dir);
    get("window", c.window);
    get("summary_window", c.summary_window);
    get("workers", c.workers);
    if (j.contains("exploration")) {
        const auto& e = j.at("exploration");
        detail::check_keys(e, {"eps_max", "eps_min", "decay"}, "exploration.");
        if (e.contains("eps_max")) c.exploration.eps_max = e.at("eps_max").get<double>();
        if (e.contains("eps_min")) c.exploration.eps_min = e.at("eps_min").get<double>();
        if (e.contains("decay")) c.exploration.decay = e.at("decay").get<double>();
    }
    if (j.contains("dqn")) {
        const auto& d = j.at("dqn");
        detail::check_keys(d,
                           {"replay_capacity", "minibatch", "target_sync", "hidden",
                            "learning_rate", "max_episode_steps"},
                           "dqn.");
        if (d.contains("replay_capacity"))
            c.replay_capacity = d.at("replay_capacity").get<int>();
        if (d.contains("minibatch")) c.minibatch = d.at("minibatch").get<int>();
        if (d.contains("target_sync")) c.target_sync = d.at("target_sync").get<int>();
        if (d.contains("hidden")) c.hidden = d.at("hidden").get<std::vector<int>>();
        if (d.contains("learning_rate")) c.learning_rate = d.at("learning_rate").get<double>();
        if (d.contains("max_episode_steps"))
            c.max_episode_steps = d.at("max_episode_steps").get<int>();
    }
    if (j.contains("tabular")) {
        const auto& t = j.at("tabular");
        detail::check_keys(t, {"step_size", "alpha0", "tau"}, "tabular.");
        if (t.contains("step_size")) {
            const std::string mode = t.at("step_size").get<std::string>();
            if (mode == "constant")
                c.step_size.mode = StepSizeSchedule::Mode::constant;
            else if (mode == "harmonic")
                c.step_size.mode = StepSizeSchedule::Mode::harmonic;
            else
                throw std::invalid_argument(
                    "config: tabular.step_size must be constant or harmonic");
        }
        if (t.contains("alpha0")) c.step_size.alpha0 = t.at("alpha0").get<double>();
        if (t.contains("tau")) c.step_size.tau = t.at("tau").get<double>();
    }
    if (j.contains("exact")) {
        const auto& e = j.at("exact");
        detail::check_keys(e, {"atoms", "solve_tolerance"}, "exact.");
        if (e.contains("atoms")) c.atoms = e.at("atoms").get<int>();
        if (e.contains("solve_tolerance"))
            c.solve_tolerance = e.at("solve_tolerance").get<double>();
    }
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

/// One per-episode CSV row of a single trial.
struct MetricRow {
    int run = 0;
    int episode = 0;
    double lambda = 0.0;
    double epsilon = 0.0;
    double avg_action = 0.0;
    double episode_return = 0.0;
    double shaped_return = 0.0;
};

/// Across-run aggregate for one (lambda, episode): trailing-window smoothed
/// mean and population standard deviation of the action and return curves,
/// plus the empirical alpha-quantile of the raw per-step rewards pooled
/// across runs within the trailing window.
struct AggregateRow {
    int episode = 0;
    double lambda = 0.0;
    double action_mean = 0.0;
    double action_std = 0.0;
    double return_mean = 0.0;
    double return_std = 0.0;
    double var_alpha = 0.0;
};

/// Across-run aggregation of one lambda's trials. Runs are truncated to the
/// shortest episode count; window is the trailing smoothing length (1 =
/// no smoothing). Empty input gives empty output.
inline std::vector<AggregateRow> aggregate(const std::vector<std::vector<EpisodeRecord>>& runs,
                                           double lambda, double alpha, int window) {
    if (window < 1) throw std::invalid_argument("aggregate: window must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("aggregate: alpha must be in (0,1)");
    if (runs.empty()) return {};
    size_t n_eps = runs.front().size();
    for (const auto& r : runs) n_eps = std::min(n_eps, r.size());
    if (n_eps == 0) return {};
    const double n_runs = static_cast<double>(runs.size());

    std::vector<double> a_mean(n_eps), a_std(n_eps), r_mean(n_eps), r_std(n_eps);
    for (size_t k = 0; k < n_eps; ++k) {
        double sa = 0.0, sr = 0.0;
        for (const auto& run : runs) {
            sa += run[k].avg_action;
            sr += run[k].episode_return;
        }
        a_mean[k] = sa / n_runs;
        r_mean[k] = sr / n_runs;
        double va = 0.0, vr = 0.0;
        for (const auto& run : runs) {
            const double da = run[k].avg_action - a_mean[k];
            const double dr = run[k].episode_return - r_mean[k];
            va += da * da;
            vr += dr * dr;
        }
        a_std[k] = std::sqrt(va / n_runs);
        r_std[k] = std::sqrt(vr / n_runs);
    }

    std::vector<AggregateRow> out(n_eps);
    std::vector<double> pool;
    for (size_t k = 0; k < n_eps; ++k) {
        const size_t w = std::min(static_cast<size_t>(window), k + 1);
        const size_t from = k + 1 - w;
        auto trailing_mean = [&](const std::vector<double>& xs) {
            double s = 0.0;
            for (size_t j = from; j <= k; ++j) s += xs[j];
            return s / static_cast<double>(w);
        };
        AggregateRow& row = out[k];
        row.episode = static_cast<int>(k);
        row.lambda = lambda;
        row.action_mean = trailing_mean(a_mean);
        row.action_std = trailing_mean(a_std);
        row.return_mean = trailing_mean(r_mean);
        row.return_std = trailing_mean(r_std);
        pool.clear();
        for (size_t j = from; j <= k; ++j)
            for (const auto& run : runs)
                pool.insert(pool.end(), run[j].step_rewards.begin(),
                            run[j].step_rewards.end());
        row.var_alpha = pool.empty() ? 0.0 : var_lower(pool, alpha);
    }
    return out;
}

/// One trial's full episode series, tagged by its sweep coordinates.
struct TrialSeries {
    int lambda_index = 0;
    int run = 0;
    double lambda = 0.0;
    std::vector<EpisodeRecord> episodes;
};

/// Everything a sweep produces, before and independent of file output.
struct SweepData {
    ExperimentConfig config;
    std::vector<TrialSeries> trials;       // ordered by (lambda_index, run)
    std::vector<AggregateRow> aggregates;  // ordered by (lambda_index, episode)
    nlohmann::json summary;
};

/// Worker count resolution: the RISKQ_WORKERS environment variable beats the
/// config value; 0 means one worker per hardware thread.
inline int resolve_workers(int configured) {
    if (const char* env = std::getenv("RISKQ_WORKERS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    if (configured >= 1) return configured;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {
inline std::vector<EpisodeRecord> run_trial(const ExperimentConfig& config,
                                            const EnvModel& env, double lambda,
                                            uint64_t seed) {
    if (config.agent == "dqn") return train_dqn(env, config.dqn_config(lambda, seed)).episodes;
    return train_tabular(env, config.tabular_config(lambda, seed)).episodes;
}

/// Population standard deviation.
inline double std_dev(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

/// Final-window statistics of one lambda's trials for the run summary.
inline nlohmann::json summarize_lambda(const std::vector<std::vector<EpisodeRecord>>& runs,
                                       double lambda, double alpha, int summary_window) {
    size_t n_eps = runs.front().size();
    for (const auto& r : runs) n_eps = std::min(n_eps, r.size());
    const size_t w = std::min(static_cast<size_t>(summary_window), n_eps);
    const size_t from = n_eps - w;
    double action_sum = 0.0, return_sum = 0.0;
    std::vector<double> run_means;
    std::vector<double> pool;
    for (const auto& run : runs) {
        double own = 0.0;
        for (size_t k = from; k < n_eps; ++k) {
            action_sum += run[k].avg_action;
            return_sum += run[k].episode_return;
            own += run[k].episode_return;
            pool.insert(pool.end(), run[k].step_rewards.begin(), run[k].step_rewards.end());
        }
        run_means.push_back(own / static_cast<double>(w));
    }
    const double cells = static_cast<double>(w) * static_cast<double>(runs.size());
    // Mean over the window of the per-episode across-run deviation.
    double across_std_sum = 0.0;
    for (size_t k = from; k < n_eps; ++k) {
        std::vector<double> col;
        col.reserve(runs.size());
        for (const auto& run : runs) col.push_back(run[k].episode_return);
        across_std_sum += std_dev(col);
    }
    double step_sum = 0.0;
    for (double r : pool) step_sum += r;
    nlohmann::json j;
    j["lambda"] = lambda;
    j["episodes"] = n_eps;
    j["window"] = w;
    j["avg_action_mean"] = action_sum / cells;
    j["return_mean"] = return_sum / cells;
    j["return_std"] = across_std_sum / static_cast<double>(w);
    j["run_mean_return_std"] = std_dev(run_means);
    j["step_reward_mean"] = pool.empty() ? 0.0 : step_sum / static_cast<double>(pool.size());
    j["var_alpha"] = pool.empty() ? 0.0 : var_lower(pool, alpha);
    j["step_count"] = pool.size();
    return j;
}

/// Exact-solver sweep: no trials, one fixed-point solve per lambda.
inline nlohmann::json summarize_exact(const ExperimentConfig& config, const EnvModel& env) {
    nlohmann::json results = nlohmann::json::array();
    for (double lambda : config.lambdas) {
        const AugmentedModel model =
            augment_env(env, config.risk(lambda), config.grid_resolution, config.atoms);
        const SolveResult solved = value_iteration(model, config.solve_tolerance);
        nlohmann::json r;
        r["lambda"] = lambda;
        r["iterations"] = solved.iterations;
        r["final_gap"] = solved.gaps.back();
        r["problem_value"] = problem_value(model, solved.q);
        nlohmann::json traj = nlohmann::json::array();
        for (const TrajectoryStep& step : greedy_trajectory(model, solved.policy)) {
            traj.push_back({{"state", step.state},
                            {"eta_index", step.eta_index},
                            {"action", step.action},
                            {"eta_next", step.eta_next}});
        }
        r["greedy_trajectory"] = traj;
        results.push_back(r);
    }
    return results;
}
} // namespace detail

/// Runs the full sweep in memory: lambdas x runs trials (threaded, zero
/// shared mutable state, deterministic per-trial seeds), then aggregation
/// and the summary document. No files are touched.
inline SweepData run_sweep_data(const ExperimentConfig& config) {
    config.validate();
    const EnvModel env = env_by_name(config.environment);
    SweepData data;
    data.config = config;
    data.summary["version"] = version_string;
    data.summary["config"] = to_json(config);

    if (config.agent == "exact") {
        data.summary["results"] = detail::summarize_exact(config, env);
        return data;
    }

    const int n_lambdas = static_cast<int>(config.lambdas.size());
    const size_t n_trials =
        static_cast<size_t>(n_lambdas) * static_cast<size_t>(config.n_runs);
    data.trials.resize(n_trials);
    std::atomic<size_t> cursor{0};
    std::mutex error_lock;
    std::exception_ptr first_error;
    auto work = [&]() {
        for (;;) {
            const size_t i = cursor.fetch_add(1);
            if (i >= n_trials) return;
            {
                std::lock_guard<std::mutex> guard(error_lock);
                if (first_error) return;
            }
            const int li = static_cast<int>(i) / config.n_runs;
            const int run = static_cast<int>(i) % config.n_runs;
            try {
                TrialSeries& t = data.trials[i];
                t.lambda_index = li;
                t.run = run;
                t.lambda = config.lambdas[static_cast<size_t>(li)];
                const uint64_t seed = derive_seed(
                    {config.master_seed, static_cast<uint64_t>(li), static_cast<uint64_t>(run)});
                t.episodes = detail::run_trial(config, env, t.lambda, seed);
            } catch (...) {
                std::lock_guard<std::mutex> guard(error_lock);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const int n_workers =
        std::min<int>(resolve_workers(config.workers), static_cast<int>(n_trials));
    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    nlohmann::json results = nlohmann::json::array();
    for (int li = 0; li < n_lambdas; ++li) {
        std::vector<std::vector<EpisodeRecord>> runs;
        runs.reserve(static_cast<size_t>(config.n_runs));
        for (int run = 0; run < config.n_runs; ++run)
            runs.push_back(
                data.trials[static_cast<size_t>(li) * static_cast<size_t>(config.n_runs) +
                            static_cast<size_t>(run)]
                    .episodes);
        const double lambda = config.lambdas[static_cast<size_t>(li)];
        auto rows = aggregate(runs, lambda, config.alpha, config.window);
        data.aggregates.insert(data.aggregates.end(), rows.begin(), rows.end());
        results.push_back(
            detail::summarize_lambda(runs, lambda, config.alpha, config.summary_window));
    }
    data.summary["results"] = results;
    return data;
}

namespace detail {
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_provenance(std::ostream& out, const ExperimentConfig& config) {
    out << "# " << version_string << '\n';
    out << "# config: " << to_json(config).dump() << '\n';
}
} // namespace detail

inline void write_metrics_csv(std::ostream& out, const SweepData& data) {
    detail::write_provenance(out, data.config);
    out << "run,episode,lambda,epsilon,avg_action,episode_return,shaped_return\n";
    for (const TrialSeries& trial : data.trials) {
        for (const EpisodeRecord& rec : trial.episodes) {
            out << trial.run << ',' << rec.episode << ','
                << detail::format_double(trial.lambda) << ','
                << detail::format_double(rec.epsilon) << ','
                << detail::format_double(rec.avg_action) << ','
                << detail::format_double(rec.episode_return) << ','
                << detail::format_double(rec.shaped_return) << '\n';
        }
    }
}

inline void write_aggregate_csv(std::ostream& out, const SweepData& data) {
    detail::write_provenance(out, data.config);
    out << "episode,lambda,action_mean,action_std,return_mean,return_std,var_alpha\n";
    for (const AggregateRow& row : data.aggregates) {
        out << row.episode << ',' << detail::format_double(row.lambda) << ','
            << detail::format_double(row.action_mean) << ','
            << detail::format_double(row.action_std) << ','
            << detail::format_double(row.return_mean) << ','
            << detail::format_double(row.return_std) << ','
            << detail::format_double(row.var_alpha) << '\n';
    }
}

/// Creates data.config.out_dir and opens a file in it for writing.
inline std::ofstream open_output_file(const std::string& out_dir, const char* name) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory '" + out_dir +
                                 "': " + ec.message());
    std::ofstream out(fs::path(out_dir) / name);
    if (!out)
        throw std::runtime_error(std::string("cannot write '") + name + "' in '" + out_dir +
                                 "'");
    return out;
}

/// Writes a sweep's outputs under its config.out_dir: summary.json always;
/// metrics.csv and aggregate.csv whenever there are episode series.
inline void write_sweep_files(const SweepData& data) {
    if (!data.trials.empty()) {
        auto metrics = open_output_file(data.config.out_dir, "metrics.csv");
        write_metrics_csv(metrics, data);
        auto agg = open_output_file(data.config.out_dir, "aggregate.csv");
        write_aggregate_csv(agg, data);
    }
    auto summary = open_output_file(data.config.out_dir, "summary.json");
    summary << data.summary.dump(2) << '\n';
}

/// Runs the sweep and writes its output files (the exact solver emits only
/// the summary: it has no episode series).
inline SweepData run_sweep(const ExperimentConfig& config) {
    SweepData data = run_sweep_data(config);
    write_sweep_files(data);
    return data;
}

/// Wraps one pre-trained trial as a single-run sweep so stand-alone training
/// commands emit the same files a one-lambda one-run sweep would.
inline SweepData single_run_data(const ExperimentConfig& config,
                                 std::vector<EpisodeRecord> episodes) {
    if (config.lambdas.size() != 1 || config.n_runs != 1)
        throw std::invalid_argument("single_run_data: config must hold one lambda, one run");
    SweepData data;
    data.config = config;
    data.summary["version"] = version_string;
    data.summary["config"] = to_json(config);
    const double lambda = config.lambdas.front();
    TrialSeries trial;
    trial.lambda = lambda;
    trial.episodes = std::move(episodes);
    data.trials.push_back(std::move(trial));
    const std::vector<std::vector<EpisodeRecord>> runs{data.trials.front().episodes};
    data.aggregates = aggregate(runs, lambda, config.alpha, config.window);
    data.summary["results"] = nlohmann::json::array(
        {detail::summarize_lambda(runs, lambda, config.alpha, config.summary_window)});
    return data;
}

} // namespace riskq
