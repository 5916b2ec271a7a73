#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "wcsearch/gaussian_process.hpp"

using namespace wcsearch;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Reference kernels written out directly from their radial definitions.
double matern52_ref(double r) { return (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r); }

double scaled_distance(const VectorXd& a, const VectorXd& b, const VectorXd& l) {
    return std::sqrt(((a - b).array() / l.array()).square().sum());
}

MatrixXd random_inputs(Eigen::Index n, Eigen::Index d, Rng& rng) {
    MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
    return x;
}

double smooth3(const VectorXd& x) { return std::sin(3.0 * x[0]) + 0.5 * x[1] * x[1] - std::cos(2.0 * x[2] + x[0]); }

}  // namespace

TEST(GaussianProcess, TwoPointClosedForm) {
    MatrixXd x(2, 1);
    x << 0.2, 0.7;
    VectorXd y(2);
    y << 1.0, -0.5;
    const double l = 0.3, sf2 = 1.3, noise = 1e-3;
    const auto gp = GaussianProcess<Matern52>::with_params(x, y, KernelParams::make(VectorXd::Constant(1, l), sf2, noise));

    // Standardization: mean 0.25, population std 0.75, so targets become +1 and -1.
    const double mu = 0.25, sd = 0.75;
    const double a = sf2 + noise;
    const double b = sf2 * matern52_ref(0.5 / l);
    const double det = a * a - b * b;
    for (double xs : {0.45, 0.0, 0.2, 1.0, 0.61}) {
        const double k1 = sf2 * matern52_ref(std::abs(xs - 0.2) / l);
        const double k2 = sf2 * matern52_ref(std::abs(xs - 0.7) / l);
        // [k1 k2] inv([[a b][b a]]) [1 -1]
        const double w1 = (a * k1 - b * k2) / det;
        const double w2 = (a * k2 - b * k1) / det;
        const double mean = mu + sd * (w1 - w2);
        const double var = sf2 - (k1 * w1 + k2 * w2);
        const auto p = gp.predict(VectorXd::Constant(1, xs));
        EXPECT_NEAR(p.mean, mean, 1e-8) << xs;
        EXPECT_NEAR(p.std, sd * std::sqrt(var), 1e-8) << xs;
    }
}

TEST(GaussianProcess, SymmetricTwoPointGradient) {
    MatrixXd x(2, 2);
    x << -0.3, 0.0, 0.3, 0.0;
    VectorXd y(2);
    y << -1.0, 1.0;
    const auto gp = GaussianProcess<Matern52>::with_params(x, y, KernelParams::make(VectorXd::Constant(2, 0.4), 1.0, 1e-6));
    const VectorXd g = gp.mean_gradient(VectorXd::Zero(2));
    EXPECT_GT(g[0], 0.0);
    EXPECT_NEAR(g[1], 0.0, 1e-14);
    // By symmetry the mean is odd in x0, so the origin has zero mean.
    EXPECT_NEAR(gp.predict(VectorXd::Zero(2)).mean, 0.0, 1e-12);
    // Slope along the data axis is largest at the origin.
    for (double t : {0.05, 0.1, 0.2}) {
        VectorXd p(2);
        p << t, 0.0;
        EXPECT_LT(gp.mean_gradient(p)[0], g[0]);
    }
}

TEST(GaussianProcess, NoiselessInterpolation) {
    MatrixXd x(20, 1);
    VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = (i + 0.5) / 20.0;
        y[i] = std::sin(2.0 * std::numbers::pi * x(i, 0)) + 0.3 * x(i, 0);
    }
    FitOptions opts;
    opts.fixed_noise_variance = opts.noise_floor;
    Rng rng(1);
    const auto gp = GaussianProcess<Matern52>::fit(x, y, opts, rng);
    for (int i = 0; i < 20; ++i) {
        const auto p = gp.predict(x.row(i).transpose());
        EXPECT_NEAR(p.mean, y[i], 1e-6);
        EXPECT_LE(p.std / gp.target_std(), 1e-4);
    }
}

TEST(GaussianProcess, SineHeldOutError) {
    MatrixXd x(20, 1);
    VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i / 19.0;
        y[i] = std::sin(2.0 * std::numbers::pi * x(i, 0));
    }
    Rng rng(4);
    const auto gp = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    double se = 0.0;
    int count = 0;
    for (double t = 0.1; t <= 0.9 + 1e-12; t += 0.01, ++count) {
        const double e = gp.predict(VectorXd::Constant(1, t)).mean - std::sin(2.0 * std::numbers::pi * t);
        se += e * e;
    }
    EXPECT_LT(std::sqrt(se / count), 0.05);
}

TEST(GaussianProcess, MeanGradientMatchesFiniteDifferences) {
    Rng rng(9);
    const MatrixXd x = random_inputs(30, 3, rng);
    VectorXd y(30);
    for (int i = 0; i < 30; ++i) y[i] = smooth3(x.row(i).transpose());
    const auto matern = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    const auto sqexp = GaussianProcess<SquaredExp>::fit(x, y, {}, rng);
    auto check = [&](const auto& gp) {
        double worst = 0.0;
        for (int probe = 0; probe < 100; ++probe) {
            VectorXd p(3);
            for (int j = 0; j < 3; ++j) p[j] = rng.uniform(-0.1, 1.1);
            const VectorXd g = gp.mean_gradient(p);
            for (int j = 0; j < 3; ++j) {
                const double h = 1e-5;
                VectorXd plus = p, minus = p;
                plus[j] += h;
                minus[j] -= h;
                const double fd = (gp.predict(plus).mean - gp.predict(minus).mean) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[j]) / std::max(1e-2, std::abs(fd)));
            }
        }
        EXPECT_LT(worst, 1e-4);
    };
    check(matern);
    check(sqexp);
}

TEST(GaussianProcess, LogMarginalLikelihoodClosedForms) {
    MatrixXd x = MatrixXd::Zero(1, 1);
    const auto p0 = KernelParams::make(VectorXd::Constant(1, 1.0), 1.0, 0.0);
    EXPECT_NEAR(log_marginal_likelihood<Matern52>(p0, x, VectorXd::Zero(1)), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
    const auto p1 = KernelParams::make(VectorXd::Constant(1, 1.0), 1.0, 1.0);
    EXPECT_NEAR(log_marginal_likelihood<Matern52>(p1, x, VectorXd::Ones(1)),
                -0.25 - 0.5 * std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(GaussianProcess, LogMarginalLikelihoodGradient) {
    Rng rng(21);
    const MatrixXd x = random_inputs(15, 2, rng);
    VectorXd y(15);
    for (int i = 0; i < 15; ++i) y[i] = std::sin(4 * x(i, 0)) * x(i, 1) + rng.uniform(-0.05, 0.05);
    KernelParams params;
    params.log_lengthscales = VectorXd(2);
    params.log_lengthscales << std::log(0.3), std::log(0.7);
    params.log_signal_variance = std::log(0.8);
    params.log_noise_variance = std::log(1e-2);
    VectorXd grad;
    log_marginal_likelihood<Matern52>(params, x, y, grad);
    const VectorXd theta = params.pack();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-5;
        VectorXd plus = theta, minus = theta;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (log_marginal_likelihood<Matern52>(KernelParams::unpack(plus), x, y) -
                           log_marginal_likelihood<Matern52>(KernelParams::unpack(minus), x, y)) /
                          (2 * h);
        EXPECT_LT(std::abs(fd - grad[i]) / std::max(1e-3, std::abs(fd)), 1e-4) << "param " << i;
    }
}

TEST(GaussianProcess, FitNeverWorseThanAnyStart) {
    Rng rng(8);
    const MatrixXd x = random_inputs(25, 3, rng);
    VectorXd y(25);
    for (int i = 0; i < 25; ++i) y[i] = smooth3(x.row(i).transpose());
    const auto gp = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    ASSERT_EQ(gp.diagnostics().initial_lml.size(), 8);
    for (double start : gp.diagnostics().initial_lml) EXPECT_GE(gp.log_marginal_likelihood(), start);
}

TEST(GaussianProcess, CholeskyReconstructsKernel) {
    Rng rng(13);
    const MatrixXd x = random_inputs(20, 2, rng);
    VectorXd y(20);
    for (int i = 0; i < 20; ++i) y[i] = x(i, 0) - 2 * x(i, 1) * x(i, 1);
    const auto gp = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    const auto& p = gp.params();
    const VectorXd l = p.lengthscales();
    MatrixXd k(20, 20);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            k(i, j) = p.signal_variance() * matern52_ref(scaled_distance(x.row(i).transpose(), x.row(j).transpose(), l));
    k.diagonal().array() += p.noise_variance() + gp.jitter();
    const MatrixXd rebuilt = gp.cholesky() * gp.cholesky().transpose();
    EXPECT_LT((rebuilt - k).norm() / k.norm(), 1e-8);
    // Posterior std at training points is bounded by the noise level.
    for (int i = 0; i < 20; ++i)
        EXPECT_LE(gp.predict(x.row(i).transpose()).std / gp.target_std(),
                  std::sqrt(p.noise_variance() + gp.jitter()) + 1e-6);
}

TEST(GaussianProcess, AffineTargetInvariance) {
    Rng data(3);
    const MatrixXd x = random_inputs(25, 2, data);
    VectorXd y(25);
    for (int i = 0; i < 25; ++i) y[i] = std::cos(3 * x(i, 0)) + x(i, 1);
    const VectorXd z = (5.0 * y.array() + 3.0).matrix();
    Rng ra(77), rb(77);
    const auto ga = GaussianProcess<Matern52>::fit(x, y, {}, ra);
    const auto gb = GaussianProcess<Matern52>::fit(x, z, {}, rb);
    for (int probe = 0; probe < 50; ++probe) {
        VectorXd p(2);
        p << data.uniform(), data.uniform();
        const auto a = ga.predict(p), b = gb.predict(p);
        EXPECT_NEAR(b.mean, 5.0 * a.mean + 3.0, 1e-8 * std::max(1.0, std::abs(b.mean)));
        EXPECT_NEAR(b.std, 5.0 * a.std, 1e-8);
    }
}

TEST(GaussianProcess, PriorReversionFarFromData) {
    Rng rng(5);
    const MatrixXd x = random_inputs(10, 2, rng);
    VectorXd y(10);
    for (int i = 0; i < 10; ++i) y[i] = x(i, 0) * 3 + x(i, 1);
    const auto gp = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    const double far = 1.0 + 40.0 * gp.params().lengthscales().maxCoeff();
    const auto p = gp.predict(VectorXd::Constant(2, far));
    EXPECT_NEAR(p.mean, gp.target_mean(), 1e-6);
    EXPECT_NEAR(p.std, std::sqrt(gp.params().signal_variance()) * gp.target_std(), 1e-6);
}

TEST(GaussianProcess, ConstantTargets) {
    Rng rng(1);
    const MatrixXd x = random_inputs(6, 2, rng);
    const VectorXd y = VectorXd::Constant(6, 4.25);
    const auto gp = GaussianProcess<Matern52>::fit(x, y, {}, rng);
    EXPECT_TRUE(gp.is_constant());
    EXPECT_TRUE((gp.standardized_targets().array() == 0.0).all());
    const auto p = gp.predict(VectorXd::Constant(2, 0.3));
    EXPECT_EQ(p.mean, 4.25);
    EXPECT_EQ(p.std, 0.0);
    EXPECT_TRUE(gp.mean_gradient(VectorXd::Constant(2, 0.3)).isZero());
}

TEST(GaussianProcess, DeterministicRefit) {
    Rng data(6);
    const MatrixXd x = random_inputs(15, 2, data);
    VectorXd y(15);
    for (int i = 0; i < 15; ++i) y[i] = smooth3(VectorXd::Constant(3, x(i, 0)) + VectorXd::Constant(3, x(i, 1)));
    Rng a(10), b(10);
    const auto ga = GaussianProcess<Matern52>::fit(x, y, {}, a);
    const auto gb = GaussianProcess<Matern52>::fit(x, y, {}, b);
    EXPECT_EQ(ga.params().pack(), gb.params().pack());
    std::ostringstream da, db;
    ga.dump(da);
    gb.dump(db);
    EXPECT_EQ(da.str(), db.str());
    EXPECT_NE(da.str().find("kernel = matern52"), std::string::npos);
    EXPECT_NE(da.str().find("n = 15"), std::string::npos);
}

TEST(GaussianProcess, InputErrors) {
    Rng rng(0);
    MatrixXd one(1, 1);
    one << 0.5;
    EXPECT_THROW(GaussianProcess<Matern52>::fit(one, VectorXd::Ones(1), {}, rng), InsufficientDataError);
    MatrixXd dup(2, 1);
    dup << 0.5, 0.5;
    EXPECT_THROW(GaussianProcess<Matern52>::fit(dup, VectorXd::Ones(2), {}, rng), ValidationError);
    MatrixXd two(2, 1);
    two << 0.1, 0.5;
    VectorXd bad(2);
    bad << 1.0, std::nan("");
    EXPECT_THROW(GaussianProcess<Matern52>::fit(two, bad, {}, rng), ValidationError);
    EXPECT_THROW(GaussianProcess<Matern52>::fit(two, VectorXd::Ones(3), {}, rng), ValidationError);
    VectorXd ok(2);
    ok << 0.0, 1.0;
    const auto gp = GaussianProcess<Matern52>::fit(two, ok, {}, rng);
    EXPECT_THROW(gp.predict(VectorXd::Zero(2)), ValidationError);
    EXPECT_THROW(gp.mean_gradient(VectorXd::Zero(3)), ValidationError);
}
