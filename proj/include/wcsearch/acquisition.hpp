#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wcsearch/error.hpp"

namespace wcsearch {

// Lower confidence bound on the oriented response; lower is more likely to fail.
inline double lcb(double mean, double std, double kappa) {
    if (!(std >= 0.0)) throw ValidationError("lcb: standard deviation must be non-negative");
    if (!(kappa >= 0.0)) throw ValidationError("lcb: kappa must be non-negative");
    return mean - kappa * std;
}

enum class Origin { Evaluation, Refined };

struct Candidate {
    Eigen::VectorXd x;
    double mean = 0.0;
    double std = 0.0;
    double score = 0.0;
    Origin origin = Origin::Evaluation;
};

struct CandidatePool {
    std::vector<Candidate> candidates;

    std::size_t size() const noexcept { return candidates.size(); }
    bool empty() const noexcept { return candidates.empty(); }
    void append(const CandidatePool& other) {
        candidates.insert(candidates.end(), other.candidates.begin(), other.candidates.end());
    }
};

struct RefineOptions {
    std::size_t steps = 50;
    double step_size = 0.05;
    double min_improvement = 1e-9;
    double min_step = 1e-7;
    // Leading coordinates free to move; trailing (corner) coordinates stay put.
    std::size_t continuous_dims = std::numeric_limits<std::size_t>::max();
};

// Scores every row of `points` with the surrogate's mean/std and the LCB.
template <class Surrogate>
CandidatePool score_points(const Surrogate& model, const Eigen::MatrixXd& points, double kappa,
                           Origin origin = Origin::Evaluation) {
    Eigen::VectorXd mean, std;
    model.predict(points, mean, std);
    CandidatePool pool;
    pool.candidates.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        pool.candidates.push_back({points.row(i).transpose(), mean[i], std[i], lcb(mean[i], std[i], kappa), origin});
    return pool;
}

// Projected gradient descent on the posterior mean with backtracking: each
// step moves `step` along the normalized negative gradient, halving until the
// mean decreases. The mean never increases.
template <class Surrogate>
Eigen::VectorXd descend(const Surrogate& model, Eigen::VectorXd x, const RefineOptions& options) {
    const auto free = static_cast<Eigen::Index>(std::min<std::size_t>(options.continuous_dims, x.size()));
    double current = model.predict(x).mean;
    double step = options.step_size;
    for (std::size_t it = 0; it < options.steps; ++it) {
        Eigen::VectorXd grad = model.mean_gradient(x);
        grad.tail(x.size() - free).setZero();
        // Components pushing against the box have no feasible descent.
        for (Eigen::Index i = 0; i < free; ++i)
            if ((x[i] <= 0.0 && grad[i] > 0.0) || (x[i] >= 1.0 && grad[i] < 0.0)) grad[i] = 0.0;
        const double norm = grad.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) break;
        const Eigen::VectorXd dir = -grad / norm;
        bool accepted = false;
        double improvement = 0.0;
        while (step >= options.min_step) {
            Eigen::VectorXd trial = x + step * dir;
            trial.head(free) = trial.head(free).cwiseMax(0.0).cwiseMin(1.0);
            const double value = model.predict(trial).mean;
            if (value < current) {
                improvement = current - value;
                current = value;
                x = std::move(trial);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || improvement < options.min_improvement) break;
        step = std::min(2.0 * step, options.step_size);
    }
    return x;
}

// Descends every seed and scores the results. With steps = 0 the pool is
// the seeds themselves.
template <class Surrogate>
CandidatePool refine_pool(const Surrogate& model, std::span<const Eigen::VectorXd> seeds,
                          const RefineOptions& options, double kappa) {
    CandidatePool pool;
    pool.candidates.reserve(seeds.size());
    for (const auto& seed : seeds) {
        Eigen::VectorXd x = options.steps == 0 ? seed : descend(model, seed, options);
        const auto p = model.predict(x);
        pool.candidates.push_back({std::move(x), p.mean, p.std, lcb(p.mean, p.std, kappa), Origin::Refined});
    }
    return pool;
}

namespace detail {

inline bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Total order used for selection: score, then mean, then coordinates.
inline bool candidate_before(const Candidate& a, double score_a, const Candidate& b, double score_b) {
    if (score_a != score_b) return score_a < score_b;
    if (a.mean != b.mean) return a.mean < b.mean;
    return lexicographic_less(a.x, b.x);
}

inline bool near_any(const Eigen::VectorXd& x, std::span<const Eigen::VectorXd> history, double delta) {
    const double d2 = delta * delta;
    return std::any_of(history.begin(), history.end(),
                       [&](const Eigen::VectorXd& h) { return (h - x).squaredNorm() <= d2; });
}

}  // namespace detail

inline constexpr double kDefaultDuplicateRadius = 1e-6;

// Index of the lowest-LCB pool point farther than `delta` from every history
// point. Throws ExhaustionError when every point duplicates history.
inline std::size_t select_candidate_index(const CandidatePool& pool, std::span<const Eigen::VectorXd> history,
                                          double kappa, double delta = kDefaultDuplicateRadius) {
    if (pool.empty()) throw ValidationError("select_candidate: empty candidate pool");
    std::size_t best = pool.size();
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Candidate& c = pool.candidates[i];
        const double score = lcb(c.mean, c.std, kappa);
        if (best < pool.size() && !detail::candidate_before(c, score, pool.candidates[best], best_score)) continue;
        if (detail::near_any(c.x, history, delta)) continue;
        best = i;
        best_score = score;
    }
    if (best == pool.size())
        throw ExhaustionError("every candidate lies within " + std::to_string(delta) + " of a simulated point");
    return best;
}

inline const Candidate& select_candidate(const CandidatePool& pool, std::span<const Eigen::VectorXd> history,
                                         double kappa, double delta = kDefaultDuplicateRadius) {
    return pool.candidates[select_candidate_index(pool, history, kappa, delta)];
}

// Indices of the `count` lowest-LCB candidates, in selection order.
inline std::vector<std::size_t> top_by_score(const CandidatePool& pool, std::size_t count) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const auto& ca = pool.candidates[a];
                          const auto& cb = pool.candidates[b];
                          return detail::candidate_before(ca, ca.score, cb, cb.score);
                      });
    idx.resize(count);
    return idx;
}

}  // namespace wcsearch
