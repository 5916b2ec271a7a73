#pragma once

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "wcsearch/acquisition.hpp"
#include "wcsearch/error.hpp"
#include "wcsearch/gaussian_process.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/random.hpp"
#include "wcsearch/sampling.hpp"

namespace wcsearch {

template <class S>
concept Simulator = requires(S& sim, const ConfigurationPoint& p) {
    { sim.simulate(p) } -> std::convertible_to<std::vector<double>>;
};

// Stage 0 is Fixed Planning; stage i >= 1 is Adaptive Planning iteration i.
using Stage = std::size_t;

inline std::string stage_name(Stage s) { return s == 0 ? "FP" : "AP" + std::to_string(s); }

inline Stage parse_stage(const std::string& text) {
    if (text == "FP") return 0;
    if (text.size() > 2 && text.starts_with("AP")) {
        std::size_t value = 0;
        for (char c : text.substr(2)) {
            if (c < '0' || c > '9') throw ParseError("bad stage tag '" + text + "'");
            value = value * 10 + std::size_t(c - '0');
        }
        if (value > 0) return value;
    }
    throw ParseError("bad stage tag '" + text + "'");
}

struct SimulationRecord {
    std::uint64_t seed = 0;
    Stage stage = 0;
    ConfigurationPoint point;
    std::vector<double> responses;
};

struct BestSoFar {
    double oriented = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> record;  // index into RunState::records
};

struct RunState {
    std::uint64_t seed = 0;
    std::vector<SimulationRecord> records;
    std::vector<BestSoFar> best;                       // per response
    std::vector<std::vector<std::size_t>> violations;  // per response, record indices
    std::vector<std::string> faults;
    std::size_t completed_iterations = 0;
    bool failed = false;

    RunState() = default;
    RunState(const CircuitModel& model, std::uint64_t seed_)
        : seed(seed_), best(model.specs().size()), violations(model.specs().size()) {}
};

// Appends one simulation and updates best-so-far and violation lists.
inline void record_simulation(RunState& state, const CircuitModel& model, SimulationRecord rec) {
    const auto& specs = model.specs();
    if (rec.responses.size() != specs.size())
        throw SimulatorFault("simulator returned " + std::to_string(rec.responses.size()) + " responses, expected " +
                             std::to_string(specs.size()));
    std::vector<double> margins(specs.size());
    for (std::size_t r = 0; r < specs.size(); ++r) margins[r] = margin(specs[r], rec.responses[r]);
    const std::size_t index = state.records.size();
    state.records.push_back(std::move(rec));
    const auto& stored = state.records.back();
    for (std::size_t r = 0; r < specs.size(); ++r) {
        const double o = oriented(specs[r], stored.responses[r]);
        if (o < state.best[r].oriented) state.best[r] = {o, index};
        if (margins[r] <= 0.0) state.violations[r].push_back(index);
    }
}

struct RunConfig {
    std::size_t fp_budget = 100;
    std::size_t ap_iterations = 10;
    std::size_t eval_target = kDefaultEvaluationTarget;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double kappa = 2.0;
    RefineOptions refine{};
    std::size_t refine_seeds = 64;
    // Score the raw evaluation set alongside the refined points.
    bool union_pool = true;
    FitOptions fit{};
    KernelKind kernel = KernelKind::Matern52;
    double duplicate_radius = kDefaultDuplicateRadius;
    std::size_t jobs = 0;  // 0 = hardware concurrency

    void validate() const {
        if (fp_budget < 8) throw ValidationError("fp-budget must be >= 8");
        if (seeds.empty()) throw ValidationError("seeds must be non-empty");
        if (eval_target == 0) throw ValidationError("eval-target must be positive");
        if (!(kappa >= 0.0)) throw ValidationError("kappa must be non-negative");
        if (!(refine.step_size > 0.0)) throw ValidationError("gd step size must be positive");
        if (fit.restarts == 0) throw ValidationError("restarts must be >= 1");
    }
};

template <class F>
decltype(auto) with_kernel(KernelKind kind, F&& f) {
    if (kind == KernelKind::SquaredExp) return f(SquaredExp{});
    return f(Matern52{});
}

// Evaluation set reused by every AP iteration of one seed.
struct EvaluationContext {
    DesignSet design;
    Eigen::MatrixXd normalized;
};

inline EvaluationContext make_evaluation_context(const CircuitModel& model, const RunConfig& config,
                                                 std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 2);
    EvaluationContext ctx;
    ctx.design = evaluation_set(model, config.eval_target, rng);
    ctx.normalized = ctx.design.normalized(model);
    return ctx;
}

template <Simulator Sim>
RunState run_fixed_planning(const CircuitModel& model, Sim& simulator, const RunConfig& config, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 1);
    const DesignSet design = fixed_planning_set(model, config.fp_budget, rng);
    RunState state(model, seed);
    for (const auto& point : design.points) {
        try {
            record_simulation(state, model, {seed, 0, point, simulator.simulate(point)});
        } catch (const SimulatorFault& fault) {
            state.faults.push_back(std::string("FP: ") + fault.what());
            state.failed = true;
            return state;
        }
    }
    return state;
}

namespace detail {

template <class Kernel>
Eigen::VectorXd propose(const GaussianProcess<Kernel>& gp, const EvaluationContext& eval,
                        const std::vector<Eigen::VectorXd>& history, const RunConfig& config,
                        std::size_t continuous_dims) {
    const CandidatePool scored = score_points(gp, eval.normalized, config.kappa, Origin::Evaluation);
    std::vector<Eigen::VectorXd> seeds;
    for (auto i : top_by_score(scored, config.refine_seeds)) seeds.push_back(scored.candidates[i].x);
    RefineOptions refine = config.refine;
    refine.continuous_dims = continuous_dims;
    CandidatePool pool = refine_pool(gp, std::span<const Eigen::VectorXd>(seeds), refine, config.kappa);
    if (config.union_pool) pool.append(scored);
    try {
        return select_candidate(pool, history, config.kappa, config.duplicate_radius).x;
    } catch (const ExhaustionError&) {
        return select_candidate(scored, history, config.kappa, config.duplicate_radius).x;
    }
}

}  // namespace detail

// One AP round: fit a surrogate per response on every simulated point,
// propose one candidate per response, simulate them. A fault leaves the
// input state unchanged apart from the recorded fault.
template <Simulator Sim>
RunState run_adaptive_iteration(const CircuitModel& model, Sim& simulator, const RunState& state,
                                const EvaluationContext& eval, const RunConfig& config, Rng& rng) {
    if (state.records.size() < 2) throw InsufficientDataError("adaptive planning needs at least 2 simulated points");
    const Stage stage = state.completed_iterations + 1;
    const std::size_t nr = model.specs().size();
    const auto n = static_cast<Eigen::Index>(state.records.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(model.dimension()));
    std::vector<Eigen::VectorXd> history;
    history.reserve(state.records.size() + nr);
    for (Eigen::Index i = 0; i < n; ++i) {
        history.push_back(model.normalize(state.records[static_cast<std::size_t>(i)].point));
        x.row(i) = history.back();
    }

    RunState next = state;
    std::vector<ConfigurationPoint> chosen;
    try {
        for (std::size_t r = 0; r < nr; ++r) {
            Eigen::VectorXd y(n);
            for (Eigen::Index i = 0; i < n; ++i)
                y[i] = oriented(model.specs()[r], state.records[static_cast<std::size_t>(i)].responses[r]);
            const Eigen::VectorXd u = with_kernel(config.kernel, [&](auto kernel) {
                using K = decltype(kernel);
                const auto gp = GaussianProcess<K>::fit(x, y, config.fit, rng);
                return detail::propose(gp, eval, history, config, model.continuous_dims());
            });
            ConfigurationPoint p = model.denormalize(u);
            history.push_back(model.normalize(p));
            chosen.push_back(std::move(p));
        }
        for (const auto& p : chosen) record_simulation(next, model, {state.seed, stage, p, simulator.simulate(p)});
    } catch (const Error& e) {
        RunState unchanged = state;
        unchanged.faults.push_back(stage_name(stage) + ": " + e.what());
        unchanged.completed_iterations = stage;
        return unchanged;
    }
    next.completed_iterations = stage;
    return next;
}

template <Simulator Sim>
RunState run_seed(const CircuitModel& model, Sim& simulator, const RunConfig& config, std::uint64_t seed) {
    RunState state = run_fixed_planning(model, simulator, config, seed);
    if (state.failed || config.ap_iterations == 0) return state;
    const EvaluationContext eval = make_evaluation_context(model, config, seed);
    for (std::size_t it = 1; it <= config.ap_iterations; ++it) {
        Rng rng = Rng::stream(seed, 100 + it);
        state = run_adaptive_iteration(model, simulator, state, eval, config, rng);
    }
    return state;
}

struct RunResult {
    std::vector<RunState> seeds;  // in config.seeds order

    std::vector<const RunState*> completed() const {
        std::vector<const RunState*> out;
        for (const auto& s : seeds)
            if (!s.failed) out.push_back(&s);
        return out;
    }
};

// Runs every seed, up to `config.jobs` at a time.
template <Simulator Sim>
RunResult run(const CircuitModel& model, Sim& simulator, const RunConfig& config) {
    config.validate();
    RunResult result;
    result.seeds.resize(config.seeds.size());
    std::size_t jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, config.seeds.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
            try {
                result.seeds[i] = run_seed(model, simulator, config, config.seeds[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    if (result.completed().empty()) throw Error("every seed failed");
    return result;
}

struct ViolationSummary {
    std::string response;
    bool violated = false;
    std::optional<double> worst_value;
    std::optional<ConfigurationPoint> worst_point;
    std::optional<Stage> stage;
};

inline std::vector<ViolationSummary> detect_violation(const RunState& state, const CircuitModel& model) {
    std::vector<ViolationSummary> out;
    for (std::size_t r = 0; r < model.specs().size(); ++r) {
        const auto& spec = model.specs()[r];
        ViolationSummary v;
        v.response = spec.name;
        std::optional<std::size_t> worst;
        for (std::size_t i = 0; i < state.records.size(); ++i) {
            const double o = oriented(spec, state.records[i].responses[r]);
            if (!worst || o < oriented(spec, state.records[*worst].responses[r])) worst = i;
        }
        if (worst) {
            const auto& rec = state.records[*worst];
            v.worst_value = rec.responses[r];
            v.worst_point = rec.point;
            v.stage = rec.stage;
            v.violated = is_violation(spec, rec.responses[r]);
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace wcsearch
