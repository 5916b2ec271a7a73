#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "wcsearch/error.hpp"
#include "wcsearch/format.hpp"
#include "wcsearch/kernel.hpp"
#include "wcsearch/random.hpp"

namespace wcsearch {

// ARD kernel hyperparameters, stored as logs so the optimizer works
// unconstrained.
struct KernelParams {
    Eigen::VectorXd log_lengthscales;
    double log_signal_variance = 0.0;
    double log_noise_variance = std::log(1e-8);

    static KernelParams make(const Eigen::VectorXd& lengthscales, double signal_variance, double noise_variance) {
        if ((lengthscales.array() <= 0.0).any() || !(signal_variance > 0.0) || !(noise_variance >= 0.0))
            throw ValidationError("kernel hyperparameters must be positive");
        return {lengthscales.array().log().matrix(), std::log(signal_variance), std::log(noise_variance)};
    }

    Eigen::Index dimension() const noexcept { return log_lengthscales.size(); }
    Eigen::VectorXd lengthscales() const { return log_lengthscales.array().exp().matrix(); }
    double signal_variance() const noexcept { return std::exp(log_signal_variance); }
    double noise_variance() const noexcept { return std::exp(log_noise_variance); }

    // [log l_1 .. log l_D, log signal variance, log noise variance]
    Eigen::VectorXd pack() const {
        Eigen::VectorXd theta(dimension() + 2);
        theta << log_lengthscales, log_signal_variance, log_noise_variance;
        return theta;
    }

    static KernelParams unpack(const Eigen::VectorXd& theta) {
        const Eigen::Index d = theta.size() - 2;
        return {theta.head(d), theta[d], theta[d + 1]};
    }
};

struct FitOptions {
    std::size_t restarts = 8;
    std::size_t max_iterations = 60;
    // Holds the noise variance at this value instead of fitting it.
    std::optional<double> fixed_noise_variance;
    double noise_floor = 1e-8;
    double min_lengthscale = 1e-2;
    double max_lengthscale = 20.0;
    double min_signal_variance = 1e-2;
    double max_signal_variance = 1e2;
    double max_noise_variance = 1.0;
};

struct Prediction {
    double mean = 0.0;
    double std = 0.0;
};

struct FitDiagnostics {
    std::vector<double> initial_lml;  // per restart, at its starting point
    std::vector<double> final_lml;    // per restart, best value reached
    double jitter = 0.0;
};

namespace detail {

inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

// Per-dimension squared differences between all pairs of rows.
struct SquaredDifferences {
    std::vector<Eigen::MatrixXd> per_dim;

    explicit SquaredDifferences(const Eigen::MatrixXd& x) {
        const Eigen::Index n = x.rows();
        per_dim.resize(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index d = 0; d < x.cols(); ++d) {
            auto& m = per_dim[static_cast<std::size_t>(d)];
            m.resize(n, n);
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double diff = x(i, d) - x(j, d);
                    m(i, j) = diff * diff;
                }
        }
    }

    Eigen::MatrixXd scaled(const Eigen::VectorXd& inv_l2) const {
        Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(per_dim.front().rows(), per_dim.front().cols());
        for (std::size_t d = 0; d < per_dim.size(); ++d) r2.noalias() += inv_l2[static_cast<Eigen::Index>(d)] * per_dim[d];
        return r2;
    }
};

struct Factorized {
    Eigen::MatrixXd lower;
    Eigen::VectorXd alpha;
    double jitter = 0.0;
    double lml = 0.0;
};

// Cholesky of (K + noise I), escalating diagonal jitter on failure.
inline Factorized factorize(const Eigen::MatrixXd& k_noisy, const Eigen::VectorXd& y) {
    const Eigen::Index n = k_noisy.rows();
    for (double jitter : kJitterLadder) {
        Eigen::MatrixXd a = k_noisy;
        a.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd lower = llt.matrixL();
        if (!(lower.diagonal().array() > 0.0).all()) continue;
        Factorized f;
        f.alpha = llt.solve(y);
        f.jitter = jitter;
        const double log_det = 2.0 * lower.diagonal().array().log().sum();
        f.lml = -0.5 * y.dot(f.alpha) - 0.5 * log_det - 0.5 * double(n) * std::log(2.0 * std::numbers::pi);
        f.lower = std::move(lower);
        if (std::isfinite(f.lml)) return f;
    }
    throw ConditioningError("kernel matrix is not positive definite even with diagonal jitter 1e-4");
}

template <class Kernel>
Eigen::MatrixXd kernel_from_r2(const Eigen::MatrixXd& r2, double signal_variance) {
    return r2.unaryExpr([signal_variance](double v) { return signal_variance * Kernel::value(v); });
}

// Log marginal likelihood and, when `grad` is set, its gradient with respect
// to the packed log-parameters.
template <class Kernel>
double evaluate_lml(const KernelParams& params, const SquaredDifferences& diffs, const Eigen::VectorXd& y,
                    Eigen::VectorXd* grad) {
    const Eigen::VectorXd inv_l2 = (-2.0 * params.log_lengthscales.array()).exp().matrix();
    const double sf2 = params.signal_variance();
    const double noise = params.noise_variance();
    const Eigen::MatrixXd r2 = diffs.scaled(inv_l2);
    const Eigen::MatrixXd k = kernel_from_r2<Kernel>(r2, sf2);
    Eigen::MatrixXd k_noisy = k;
    k_noisy.diagonal().array() += noise;
    const Factorized f = factorize(k_noisy, y);
    if (grad) {
        const Eigen::Index n = y.size();
        const Eigen::Index d = params.dimension();
        Eigen::MatrixXd k_inv = Eigen::MatrixXd::Identity(n, n);
        f.lower.triangularView<Eigen::Lower>().solveInPlace(k_inv);
        f.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(k_inv);
        Eigen::MatrixXd w = f.alpha * f.alpha.transpose() - k_inv;
        const Eigen::MatrixXd radial = r2.unaryExpr([](double v) { return Kernel::radial(v); });
        const Eigen::MatrixXd w_radial = w.cwiseProduct(radial);
        grad->resize(d + 2);
        for (Eigen::Index i = 0; i < d; ++i)
            (*grad)[i] = -0.5 * sf2 * inv_l2[i] * w_radial.cwiseProduct(diffs.per_dim[static_cast<std::size_t>(i)]).sum();
        (*grad)[d] = 0.5 * w.cwiseProduct(k).sum();
        (*grad)[d + 1] = 0.5 * noise * w.trace();
    }
    return f.lml;
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

// Exact Gaussian log marginal likelihood of `targets` (used as given, no
// standardization).
template <class Kernel = Matern52>
double log_marginal_likelihood(const KernelParams& params, const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets) {
    if (params.dimension() != inputs.cols()) throw ValidationError("hyperparameter dimension mismatch");
    return detail::evaluate_lml<Kernel>(params, detail::SquaredDifferences(inputs), targets, nullptr);
}

template <class Kernel = Matern52>
double log_marginal_likelihood(const KernelParams& params, const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets, Eigen::VectorXd& gradient) {
    if (params.dimension() != inputs.cols()) throw ValidationError("hyperparameter dimension mismatch");
    return detail::evaluate_lml<Kernel>(params, detail::SquaredDifferences(inputs), targets, &gradient);
}

// GP regression on standardized targets. Immutable after construction.
template <class Kernel = Matern52>
class GaussianProcess {
public:
    using kernel_type = Kernel;

    // Fits hyperparameters by maximizing the log marginal likelihood over
    // `options.restarts` starting points (the first deterministic, the rest
    // drawn from `rng`) using iRprop- on the log-parameters.
    static GaussianProcess fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                               const FitOptions& options, Rng& rng) {
        GaussianProcess gp(inputs, targets);
        const Eigen::Index dim = inputs.cols();
        if (gp.constant_) {
            gp.params_ = default_params(dim, options);
            return gp;
        }
        const detail::SquaredDifferences diffs(inputs);
        const Eigen::VectorXd lo = lower_bounds(dim, options);
        const Eigen::VectorXd hi = upper_bounds(dim, options);

        Eigen::VectorXd best_theta;
        double best_lml = -std::numeric_limits<double>::infinity();
        const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
        for (std::size_t r = 0; r < restarts; ++r) {
            Eigen::VectorXd theta = r == 0 ? default_params(dim, options).pack() : random_start(dim, options, rng);
            theta = theta.cwiseMax(lo).cwiseMin(hi);
            const auto [theta_r, start_lml, final_lml] = rprop(theta, lo, hi, diffs, gp.targets_, options);
            gp.diagnostics_.initial_lml.push_back(start_lml);
            gp.diagnostics_.final_lml.push_back(final_lml);
            if (final_lml > best_lml) {
                best_lml = final_lml;
                best_theta = theta_r;
            }
        }
        if (!best_theta.size()) throw ConditioningError("no restart produced a factorizable kernel matrix");
        gp.params_ = KernelParams::unpack(best_theta);
        gp.factor();
        gp.diagnostics_.jitter = gp.jitter_;
        return gp;
    }

    // Conditions on the data with the given hyperparameters, no fitting.
    static GaussianProcess with_params(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                       const KernelParams& params) {
        if (params.dimension() != inputs.cols()) throw ValidationError("hyperparameter dimension mismatch");
        GaussianProcess gp(inputs, targets);
        gp.params_ = params;
        if (!gp.constant_) gp.factor();
        return gp;
    }

    Eigen::Index dimension() const noexcept { return inputs_.cols(); }
    Eigen::Index size() const noexcept { return inputs_.rows(); }
    const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }
    const Eigen::VectorXd& standardized_targets() const noexcept { return targets_; }
    double target_mean() const noexcept { return mean_; }
    double target_std() const noexcept { return scale_; }
    const KernelParams& params() const noexcept { return params_; }
    const Eigen::MatrixXd& cholesky() const noexcept { return lower_; }
    const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
    bool is_constant() const noexcept { return constant_; }
    double jitter() const noexcept { return jitter_; }
    const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }

    // Log marginal likelihood of the standardized targets at the fitted params.
    double log_marginal_likelihood() const { return lml_; }

    Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dimension(x.size());
        if (constant_) return {mean_, 0.0};
        const Eigen::VectorXd ks = cross_kernel(x);
        const double mu = ks.dot(alpha_);
        const Eigen::VectorXd v = lower_.triangularView<Eigen::Lower>().solve(ks);
        const double var = std::max(0.0, params_.signal_variance() - v.squaredNorm());
        return {mean_ + scale_ * mu, scale_ * std::sqrt(var)};
    }

    // Row-wise prediction for every row of `points`.
    void predict(const Eigen::MatrixXd& points, Eigen::VectorXd& mean, Eigen::VectorXd& std) const {
        check_dimension(points.cols());
        const Eigen::Index m = points.rows();
        mean.resize(m);
        std.resize(m);
        if (constant_) {
            mean.setConstant(mean_);
            std.setZero();
            return;
        }
        const Eigen::VectorXd inv_l2 = (-2.0 * params_.log_lengthscales.array()).exp().matrix();
        const double sf2 = params_.signal_variance();
        const Eigen::Index n = inputs_.rows();
        Eigen::MatrixXd ks(n, m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double r2 = (inputs_.row(i) - points.row(j)).array().square().matrix().dot(inv_l2);
                ks(i, j) = sf2 * Kernel::value(r2);
            }
        mean = mean_ + scale_ * (ks.transpose() * alpha_).array();
        lower_.triangularView<Eigen::Lower>().solveInPlace(ks);
        std = (sf2 - ks.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).sqrt() * scale_;
    }

    // Gradient of the de-standardized posterior mean with respect to x.
    Eigen::VectorXd mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dimension(x.size());
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        if (constant_) return g;
        const Eigen::VectorXd inv_l2 = (-2.0 * params_.log_lengthscales.array()).exp().matrix();
        const double sf2 = params_.signal_variance();
        for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
            const Eigen::VectorXd diff = x - inputs_.row(i).transpose();
            const double r2 = diff.array().square().matrix().dot(inv_l2);
            g += (alpha_[i] * sf2 * Kernel::radial(r2)) * diff.cwiseProduct(inv_l2);
        }
        return scale_ * g;
    }

    // Training-set checksum over inputs and raw targets.
    std::uint64_t checksum() const noexcept {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        h = detail::fnv1a(h, inputs_.data(), sizeof(double) * static_cast<std::size_t>(inputs_.size()));
        for (Eigen::Index i = 0; i < targets_.size(); ++i) {
            const double raw = mean_ + scale_ * targets_[i];
            h = detail::fnv1a(h, &raw, sizeof raw);
        }
        return h;
    }

    // Audit dump: kernel, params, n and training-set checksum.
    void dump(std::ostream& os) const {
        os << "kernel = " << Kernel::name << '\n';
        os << "n = " << size() << '\n';
        os << "lengthscales =";
        for (Eigen::Index i = 0; i < params_.dimension(); ++i) os << ' ' << format_double(std::exp(params_.log_lengthscales[i]));
        os << '\n';
        os << "signal_variance = " << format_double(params_.signal_variance()) << '\n';
        os << "noise_variance = " << format_double(params_.noise_variance()) << '\n';
        os << "target_mean = " << format_double(mean_) << '\n';
        os << "target_std = " << format_double(scale_) << '\n';
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum()));
        os << "checksum = " << hex << '\n';
    }

private:
    GaussianProcess(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) : inputs_(inputs) {
        if (inputs.rows() != targets.size())
            throw ValidationError("inputs have " + std::to_string(inputs.rows()) + " rows but there are " +
                                  std::to_string(targets.size()) + " targets");
        if (inputs.rows() < 2) throw InsufficientDataError("a GP needs at least 2 training points");
        if (!targets.allFinite()) throw ValidationError("training targets must be finite");
        if (!inputs.allFinite()) throw ValidationError("training inputs must be finite");
        std::set<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
            const Eigen::VectorXd r = inputs.row(i).transpose();
            if (!rows.insert(std::vector<double>(r.data(), r.data() + r.size())).second)
                throw ValidationError("duplicate training input at row " + std::to_string(i));
        }
        mean_ = targets.mean();
        const double var = (targets.array() - mean_).square().mean();
        scale_ = std::sqrt(var);
        if (!(scale_ > 1e-12 * std::max(1.0, std::abs(mean_)))) {
            constant_ = true;
            scale_ = 1.0;
            targets_ = Eigen::VectorXd::Zero(targets.size());
        } else {
            targets_ = (targets.array() - mean_) / scale_;
        }
    }

    void check_dimension(Eigen::Index d) const {
        if (d != inputs_.cols())
            throw ValidationError("point has dimension " + std::to_string(d) + ", surrogate expects " +
                                  std::to_string(inputs_.cols()));
    }

    Eigen::VectorXd cross_kernel(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        const Eigen::VectorXd inv_l2 = (-2.0 * params_.log_lengthscales.array()).exp().matrix();
        const double sf2 = params_.signal_variance();
        Eigen::VectorXd ks(inputs_.rows());
        for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
            const double r2 = (inputs_.row(i).transpose() - x).array().square().matrix().dot(inv_l2);
            ks[i] = sf2 * Kernel::value(r2);
        }
        return ks;
    }

    void factor() {
        const detail::SquaredDifferences diffs(inputs_);
        const Eigen::VectorXd inv_l2 = (-2.0 * params_.log_lengthscales.array()).exp().matrix();
        Eigen::MatrixXd k = detail::kernel_from_r2<Kernel>(diffs.scaled(inv_l2), params_.signal_variance());
        k.diagonal().array() += params_.noise_variance();
        auto f = detail::factorize(k, targets_);
        lower_ = std::move(f.lower);
        alpha_ = std::move(f.alpha);
        jitter_ = f.jitter;
        lml_ = f.lml;
    }

    static KernelParams default_params(Eigen::Index dim, const FitOptions& o) {
        KernelParams p;
        p.log_lengthscales = Eigen::VectorXd::Constant(dim, std::log(0.5));
        p.log_signal_variance = 0.0;
        p.log_noise_variance = std::log(o.fixed_noise_variance ? std::max(*o.fixed_noise_variance, o.noise_floor)
                                                               : std::max(1e-4, o.noise_floor));
        return p;
    }

    static Eigen::VectorXd random_start(Eigen::Index dim, const FitOptions& o, Rng& rng) {
        KernelParams p = default_params(dim, o);
        for (Eigen::Index i = 0; i < dim; ++i) p.log_lengthscales[i] = rng.uniform(std::log(0.05), std::log(2.0));
        p.log_signal_variance = rng.uniform(std::log(0.2), std::log(5.0));
        if (!o.fixed_noise_variance)
            p.log_noise_variance = rng.uniform(std::log(std::max(o.noise_floor, 1e-8)), std::log(1e-2));
        return p.pack();
    }

    static Eigen::VectorXd lower_bounds(Eigen::Index dim, const FitOptions& o) {
        Eigen::VectorXd lo(dim + 2);
        lo.head(dim).setConstant(std::log(o.min_lengthscale));
        lo[dim] = std::log(o.min_signal_variance);
        lo[dim + 1] = std::log(o.fixed_noise_variance ? std::max(*o.fixed_noise_variance, o.noise_floor) : o.noise_floor);
        return lo;
    }

    static Eigen::VectorXd upper_bounds(Eigen::Index dim, const FitOptions& o) {
        Eigen::VectorXd hi(dim + 2);
        hi.head(dim).setConstant(std::log(o.max_lengthscale));
        hi[dim] = std::log(o.max_signal_variance);
        hi[dim + 1] = o.fixed_noise_variance ? std::log(std::max(*o.fixed_noise_variance, o.noise_floor))
                                             : std::log(o.max_noise_variance);
        return hi;
    }

    struct RpropResult {
        Eigen::VectorXd theta;
        double start_lml;
        double best_lml;
    };

    static RpropResult rprop(Eigen::VectorXd theta, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const detail::SquaredDifferences& diffs, const Eigen::VectorXd& y, const FitOptions& o) {
        constexpr double kGrow = 1.2, kShrink = 0.5, kMaxStep = 1.0, kMinStep = 1e-6;
        const double neg_inf = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd step = Eigen::VectorXd::Constant(theta.size(), 0.1);
        Eigen::VectorXd prev_grad = Eigen::VectorXd::Zero(theta.size());
        Eigen::VectorXd grad;
        Eigen::VectorXd best_theta = theta;
        double best = neg_inf;
        double start = neg_inf;
        for (std::size_t it = 0; it <= o.max_iterations; ++it) {
            double lml;
            try {
                lml = detail::evaluate_lml<Kernel>(KernelParams::unpack(theta), diffs, y, &grad);
            } catch (const ConditioningError&) {
                if (it == 0) return {best_theta, neg_inf, neg_inf};
                break;
            }
            if (it == 0) start = lml;
            if (lml > best) {
                best = lml;
                best_theta = theta;
            }
            if (it == o.max_iterations) break;
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                if (lo[i] == hi[i]) {
                    grad[i] = 0.0;
                    continue;
                }
                const double s = grad[i] * prev_grad[i];
                if (s > 0.0)
                    step[i] = std::min(step[i] * kGrow, kMaxStep);
                else if (s < 0.0) {
                    step[i] = std::max(step[i] * kShrink, kMinStep);
                    grad[i] = 0.0;
                }
                if (grad[i] > 0.0)
                    theta[i] += step[i];
                else if (grad[i] < 0.0)
                    theta[i] -= step[i];
                theta[i] = std::clamp(theta[i], lo[i], hi[i]);
            }
            prev_grad = grad;
            if ((step.array() <= 10 * kMinStep).all()) break;
        }
        return {best_theta, start, best};
    }

    Eigen::MatrixXd inputs_;
    Eigen::VectorXd targets_;
    double mean_ = 0.0;
    double scale_ = 1.0;
    bool constant_ = false;
    KernelParams params_;
    Eigen::MatrixXd lower_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
    double lml_ = 0.0;
    FitDiagnostics diagnostics_;
};

}  // namespace wcsearch
