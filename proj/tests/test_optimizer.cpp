#include <doctest.h>

#include <random>

#include "hetrisk/errors.hpp"
#include "hetrisk/optimizer.hpp"

using namespace hetrisk;

namespace {

struct Instance {
    Eigen::MatrixXd cov, inv_cov;
    Eigen::VectorXd alpha;
};

Instance random_instance(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    Instance inst;
    inst.cov = a * a.transpose() + 0.5 * static_cast<double>(n) *
                                       Eigen::MatrixXd::Identity(n, n);
    inst.inv_cov = inst.cov.inverse();
    inst.alpha.resize(n);
    for (int i = 0; i < n; ++i) inst.alpha(i) = 0.02 * g(rng);
    return inst;
}

}  // namespace

TEST_CASE("weighted regression matches the frozen normal-equations oracle") {
    Eigen::VectorXd e(5), y2(5), z(5);
    e << 0.01, -0.02, 0.015, 0.005, -0.01;
    y2 << 0.5, -1.0, 0.25, 0.75, -0.5;
    z << 2.0, 1.0, 4.0, 0.5, 1.5;
    Eigen::MatrixXd y(5, 2);
    y.col(0).setOnes();
    y.col(1) = y2;
    const RegressionResult r =
        weighted_regression_residuals(e, ConstraintSet::create(y), z);
    const Eigen::VectorXd res_oracle =
        (Eigen::VectorXd(5) << -0.00458486407053637, -0.00216017634092579,
         0.00581925055106539, -0.01498897869213813, -0.00296840558412932)
            .finished();
    CHECK((r.residuals - res_oracle).cwiseAbs().maxCoeff() < 1e-16);
    const Eigen::VectorXd w =
        -r.weighted_residuals / r.weighted_residuals.lpNorm<1>();
    CHECK(w(0) == doctest::Approx(0.19696969696969696).epsilon(1e-13));
    CHECK(w(2) == doctest::Approx(-0.5).epsilon(1e-13));
}

TEST_CASE("weighted residuals are Z-orthogonal to the loadings") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const int n = 14, p = 3;
    Eigen::VectorXd e(n), z(n);
    Eigen::MatrixXd y(n, p);
    y.col(0).setOnes();
    for (int i = 0; i < n; ++i) {
        e(i) = g(rng);
        z(i) = 0.5 + std::abs(g(rng));
        for (int a = 1; a < p; ++a) y(i, a) = g(rng);
    }
    const RegressionResult r =
        weighted_regression_residuals(e, ConstraintSet::create(y), z);
    CHECK((y.transpose() * r.weighted_residuals).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed-form neutral weights match the frozen KKT oracle") {
    Eigen::MatrixXd gamma(4, 4);
    gamma << 1.0, 0.2, 0.1, 0.0,
        0.2, 1.2, 0.3, 0.1,
        0.1, 0.3, 0.9, 0.2,
        0.0, 0.1, 0.2, 1.1;
    Eigen::VectorXd e(4);
    e << 0.03, -0.01, 0.02, -0.04;
    const HoldingsVector h = optimize_unbounded(e, gamma.inverse());
    const Eigen::VectorXd oracle =
        (Eigen::VectorXd(4) << -0.23347107438016532, 0.15702479338842976,
         -0.2665289256198347, 0.3429752066115702)
            .finished();
    CHECK((h.weights - oracle).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(h.weights.sum()) < 1e-15);
    CHECK(h.weights.lpNorm<1>() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("closed-form solution solves the bordered KKT system") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const int n = 5 + static_cast<int>(seed);
        const Instance inst = random_instance(n, 200 + seed);
        const HoldingsVector h = optimize_unbounded(inst.alpha, inst.inv_cov);
        // Independent oracle: solve [Gamma 1; 1^T 0] [x mu] = [E 0].
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
        kkt.topLeftCorner(n, n) = inst.cov;
        kkt.topRightCorner(n, 1).setOnes();
        kkt.bottomLeftCorner(1, n).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
        rhs.head(n) = inst.alpha;
        const Eigen::VectorXd x = kkt.fullPivLu().solve(rhs).head(n);
        const Eigen::VectorXd w = -x / x.lpNorm<1>();
        CHECK((h.weights - w).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("constant expected returns project to zero alpha") {
    const Instance inst = random_instance(6, 8);
    CHECK_THROWS_AS(
        optimize_unbounded(Eigen::VectorXd::Constant(6, 0.01), inst.inv_cov),
        ZeroAlpha);
}

TEST_CASE("bounded optimizer reduces to the closed form when bounds never bind") {
    for (unsigned seed = 0; seed < 8; ++seed) {
        const int n = 6 + static_cast<int>(seed % 4);
        const Instance inst = random_instance(n, 300 + seed);
        const HoldingsVector free = optimize_unbounded(inst.alpha, inst.inv_cov);
        const Eigen::VectorXd wide = Eigen::VectorXd::Constant(n, 10.0);
        const HoldingsVector boxed =
            optimize_bounded(-inst.alpha, ConstraintSet::dollar_neutrality(n),
                             inst.inv_cov, wide, -wide, {});
        CHECK((free.weights - boxed.weights).cwiseAbs().maxCoeff() < 1e-5);
        CHECK(std::abs(boxed.weights.sum()) < 1e-9);
        CHECK(std::abs(boxed.weights.lpNorm<1>() - 1.0) < 1e-5);
    }
}

TEST_CASE("bounded optimizer respects tight asymmetric bounds") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const int n = 10;
        const Instance inst = random_instance(n, 400 + seed);
        std::mt19937_64 rng(500 + seed);
        std::uniform_real_distribution<double> u(0.08, 0.5);
        Eigen::VectorXd upper(n), lower(n);
        for (int i = 0; i < n; ++i) {
            upper(i) = u(rng);
            lower(i) = -u(rng);
        }
        const HoldingsVector h =
            optimize_bounded(-inst.alpha, ConstraintSet::dollar_neutrality(n),
                             inst.inv_cov, upper, lower, {});
        for (int i = 0; i < n; ++i) {
            CHECK(h.weights(i) <= upper(i) + 1e-9);
            CHECK(h.weights(i) >= lower(i) - 1e-9);
        }
        CHECK(std::abs(h.weights.sum()) < 1e-9);
        CHECK(std::abs(h.weights.lpNorm<1>() - 1.0) < 1e-5);
    }
}

TEST_CASE("bounded optimizer satisfies the KKT conditions at its solution") {
    // Stationarity on free coordinates, multiplier signs at the bounds.
    for (unsigned seed = 0; seed < 10; ++seed) {
        const int n = 9;
        const Instance inst = random_instance(n, 600 + seed);
        Eigen::MatrixXd y(n, 2);
        y.col(0).setOnes();
        std::mt19937_64 rng(700 + seed);
        std::normal_distribution<double> g;
        for (int i = 0; i < n; ++i) y(i, 1) = g(rng);
        const Eigen::VectorXd upper = Eigen::VectorXd::Constant(n, 0.2);
        const Eigen::VectorXd lower = -upper;
        const HoldingsVector h = optimize_bounded(
            -inst.alpha, ConstraintSet::create(y), inst.inv_cov, upper, lower, {});
        const Eigen::VectorXd& w = h.weights;
        CHECK((y.transpose() * w).cwiseAbs().maxCoeff() < 1e-8);

        // Recover the effective alpha scale c and the constraint multipliers
        // from the free coordinates, then check every coordinate.
        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i)
            if (w(i) < upper(i) - 1e-7 && w(i) > lower(i) + 1e-7) free_idx.push_back(i);
        REQUIRE(free_idx.size() >= 3);
        // gradient = Gamma w + c alpha + Y gamma = 0 on free coordinates;
        // unknowns (c, gamma) from least squares over the free rows.
        Eigen::MatrixXd a(free_idx.size(), 3);
        Eigen::VectorXd b(free_idx.size());
        const Eigen::VectorXd gw = inst.cov * w;
        for (std::size_t r = 0; r < free_idx.size(); ++r) {
            const int i = free_idx[r];
            a(static_cast<Eigen::Index>(r), 0) = inst.alpha(i);
            a(static_cast<Eigen::Index>(r), 1) = y(i, 0);
            a(static_cast<Eigen::Index>(r), 2) = y(i, 1);
            b(static_cast<Eigen::Index>(r)) = -gw(i);
        }
        const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);
        const Eigen::VectorXd grad =
            gw + sol(0) * inst.alpha + sol(1) * y.col(0) + sol(2) * y.col(1);
        for (int i = 0; i < n; ++i) {
            if (w(i) >= upper(i) - 1e-7)
                CHECK(grad(i) < 1e-6);  // pushing outward at the upper bound
            else if (w(i) <= lower(i) + 1e-7)
                CHECK(grad(i) > -1e-6);
            else
                CHECK(std::abs(grad(i)) < 1e-6);
        }
    }
}

TEST_CASE("diagonal-covariance optimization equals weighted regression") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const int n = 12;
        std::mt19937_64 rng(800 + seed);
        std::normal_distribution<double> g;
        Eigen::VectorXd alpha(n), var(n);
        Eigen::MatrixXd y(n, 2);
        y.col(0).setOnes();
        for (int i = 0; i < n; ++i) {
            alpha(i) = 0.02 * g(rng);
            var(i) = std::pow(0.01 + 0.03 * std::abs(g(rng)), 2);
            y(i, 1) = g(rng);
        }
        CHECK(regression_as_optimization_check(alpha, ConstraintSet::create(y), var) <
              1e-8);
    }
}

TEST_CASE("bound and constraint validation") {
    const Instance inst = random_instance(5, 13);
    const Eigen::VectorXd ub = Eigen::VectorXd::Constant(5, 0.3);
    Eigen::VectorXd bad_lower = Eigen::VectorXd::Constant(5, 0.1);  // > 0
    CHECK_THROWS_AS(optimize_bounded(-inst.alpha, ConstraintSet::dollar_neutrality(5),
                                     inst.inv_cov, ub, bad_lower, {}),
                    InfeasibleBounds);
    const Eigen::VectorXd tiny = Eigen::VectorXd::Constant(5, 0.05);
    CHECK_THROWS_AS(optimize_bounded(-inst.alpha, ConstraintSet::dollar_neutrality(5),
                                     inst.inv_cov, tiny, -tiny, {}),
                    InfeasibleBounds);  // sum of widths below gross target

    Eigen::MatrixXd dup(5, 2);
    dup.col(0).setOnes();
    dup.col(1).setOnes();
    CHECK_THROWS_AS(ConstraintSet::create(dup), RankDeficientLoadings);
    CHECK_THROWS_AS(ConstraintSet::create(Eigen::MatrixXd::Ones(2, 2)),
                    RankDeficientLoadings);  // p must stay below N
}
