#include "hetrisk/optimizer.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hetrisk/errors.hpp"

namespace hetrisk {

ConstraintSet ConstraintSet::create(Eigen::MatrixXd loadings) {
    const Eigen::Index n = loadings.rows();
    const Eigen::Index p = loadings.cols();
    if (p < 1) throw RankDeficientLoadings("empty constraint set");
    if (p >= n)
        throw RankDeficientLoadings("need p < N, got p = " + std::to_string(p) +
                                    ", N = " + std::to_string(n));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(loadings);
    qr.setThreshold(1e-10);
    if (qr.rank() < p)
        throw RankDeficientLoadings("rank " + std::to_string(qr.rank()) + " < p = " +
                                    std::to_string(p));
    return ConstraintSet{std::move(loadings)};
}

ConstraintSet ConstraintSet::dollar_neutrality(Eigen::Index n) {
    return ConstraintSet::create(Eigen::MatrixXd::Ones(n, 1));
}

RegressionResult weighted_regression_residuals(const Eigen::VectorXd& returns,
                                               const ConstraintSet& loadings,
                                               const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd& y = loadings.loadings;
    if (returns.size() != y.rows() || weights.size() != y.rows())
        throw DimensionMismatch("returns " + std::to_string(returns.size()) +
                                ", weights " + std::to_string(weights.size()) +
                                ", loadings rows " + std::to_string(y.rows()));
    if (weights.minCoeff() <= 0.0)
        throw InvalidSpec("regression weights must be positive");

    const Eigen::MatrixXd zy = weights.asDiagonal() * y;
    const Eigen::MatrixXd gram = y.transpose() * zy;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw RankDeficientLoadings("weighted normal equations are singular");
    const Eigen::VectorXd beta = ldlt.solve(zy.transpose() * returns);

    RegressionResult out;
    out.residuals = returns - y * beta;
    out.weighted_residuals = weights.cwiseProduct(out.residuals);
    return out;
}

HoldingsVector optimize_unbounded(const Eigen::VectorXd& alpha,
                                  const Eigen::MatrixXd& inv_cov,
                                  double investment_level) {
    const Eigen::Index n = alpha.size();
    if (inv_cov.rows() != n || inv_cov.cols() != n)
        throw DimensionMismatch("inv_cov is " + std::to_string(inv_cov.rows()) + "x" +
                                std::to_string(inv_cov.cols()) + " for N = " +
                                std::to_string(n));
    const Eigen::VectorXd ge = inv_cov * alpha;
    const Eigen::VectorXd g1 = inv_cov * Eigen::VectorXd::Ones(n);
    const double denom = g1.sum();  // 1^T Gamma^{-1} 1 > 0 for SPD Gamma
    Eigen::VectorXd h = -(ge - g1 * (ge.sum() / denom));

    const double gross = h.lpNorm<1>();
    if (gross <= 1e-12 * std::max(1.0, ge.lpNorm<1>()))
        throw ZeroAlpha("projected alpha vanishes (constant expected returns?)");
    HoldingsVector out;
    out.weights = h / gross;
    out.investment_level = investment_level;
    return out;
}

namespace {

// Primal active-set solve of
//   min 1/2 w' Gamma w - ret' w   s.t.   Y' w = 0,  lower <= w <= upper,
// expressed entirely through G = Gamma^{-1}. With pinned set B the KKT
// stationarity Gamma w = ret - Y gamma + mu (mu supported on B) gives
//   w = G ret - (G Y) gamma + G_{.B} mu_B,
// so only a (p + |B|)-sized system is solved per iteration, and mu_B is
// directly the bound multiplier used for the release test. Constraint
// columns with no support on the free set are deactivated, which mirrors
// how fully pinned indicator clusters drop out of the cross-section.
Eigen::VectorXd bounded_inner(const Eigen::VectorXd& ret, const Eigen::MatrixXd& load,
                              const Eigen::MatrixXd& w_load, const Eigen::MatrixXd& inv_cov,
                              const Eigen::VectorXd& upper, const Eigen::VectorXd& lower,
                              double tol) {
    const Eigen::Index n = load.rows();
    const Eigen::Index p = load.cols();
    const Eigen::VectorXd gr = inv_cov * ret;

    // state: 0 free, +1 at the upper bound, -1 at the lower bound.
    std::vector<signed char> state(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);  // feasible: lower <= 0 <= upper
    const int max_iter = 200 + 20 * static_cast<int>(n);

    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<Eigen::Index> pinned;
        for (Eigen::Index i = 0; i < n; ++i)
            if (state[static_cast<std::size_t>(i)] != 0) pinned.push_back(i);
        std::vector<Eigen::Index> take;
        for (Eigen::Index c = 0; c < p; ++c) {
            double support = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (state[static_cast<std::size_t>(i)] == 0) support += std::abs(load(i, c));
            if (support > 0.0) take.push_back(c);
        }

        const auto t = static_cast<Eigen::Index>(take.size());
        const auto b = static_cast<Eigen::Index>(pinned.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(t + b, t + b);
        Eigen::VectorXd rhs(t + b);
        for (Eigen::Index a = 0; a < t; ++a) {
            const Eigen::Index ca = take[static_cast<std::size_t>(a)];
            for (Eigen::Index c = 0; c < t; ++c)
                kkt(a, c) = load.col(ca).dot(w_load.col(take[static_cast<std::size_t>(c)]));
            for (Eigen::Index j = 0; j < b; ++j) {
                const Eigen::Index i = pinned[static_cast<std::size_t>(j)];
                kkt(a, t + j) = -w_load(i, ca);
                kkt(t + j, a) = w_load(i, ca);
            }
            rhs(a) = load.col(ca).dot(gr);
        }
        for (Eigen::Index j = 0; j < b; ++j) {
            const Eigen::Index i = pinned[static_cast<std::size_t>(j)];
            for (Eigen::Index j2 = 0; j2 < b; ++j2)
                kkt(t + j, t + j2) = -inv_cov(i, pinned[static_cast<std::size_t>(j2)]);
            rhs(t + j) = gr(i) -
                         (state[static_cast<std::size_t>(i)] > 0 ? upper(i) : lower(i));
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible())
            throw NonConvergence("reduced constraint system is singular");
        const Eigen::VectorXd sol = lu.solve(rhs);

        Eigen::VectorXd x = gr;
        for (Eigen::Index a = 0; a < t; ++a)
            x -= sol(a) * w_load.col(take[static_cast<std::size_t>(a)]);
        for (Eigen::Index j = 0; j < b; ++j)
            x += sol(t + j) * inv_cov.col(pinned[static_cast<std::size_t>(j)]);
        for (Eigen::Index j = 0; j < b; ++j) {
            const Eigen::Index i = pinned[static_cast<std::size_t>(j)];
            x(i) = state[static_cast<std::size_t>(i)] > 0 ? upper(i) : lower(i);
        }

        // Longest feasible step toward the subproblem solution.
        const Eigen::VectorXd q = x - w;
        double step = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (state[static_cast<std::size_t>(i)] != 0) continue;
            if (q(i) > 0.0)
                step = std::min(step, (upper(i) - w(i)) / q(i));
            else if (q(i) < 0.0)
                step = std::min(step, (lower(i) - w(i)) / q(i));
        }
        w += step * q;

        // Pin only coordinates the step drove into a bound; a coordinate
        // resting at a bound while moving inward stays free, otherwise a
        // just-released bound would be re-pinned forever.
        bool pinned_new = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& st = state[static_cast<std::size_t>(i)];
            if (st != 0) continue;
            if (q(i) > 0.0 && w(i) >= upper(i) - tol) {
                w(i) = upper(i);
                st = 1;
                pinned_new = true;
            } else if (q(i) < 0.0 && w(i) <= lower(i) + tol) {
                w(i) = lower(i);
                st = -1;
                pinned_new = true;
            }
        }
        if (step < 1.0 || pinned_new) continue;

        // Subproblem optimal for the current pinned set; release the bound
        // whose multiplier pushes hardest into the interior.
        if (b == 0) return w;
        const double eps = 1e-10 * std::max(1.0, sol.tail(b).cwiseAbs().maxCoeff());
        Eigen::Index worst = -1;
        double worst_viol = eps;
        for (Eigen::Index j = 0; j < b; ++j) {
            const Eigen::Index i = pinned[static_cast<std::size_t>(j)];
            const double mu = sol(t + j);
            const double viol = state[static_cast<std::size_t>(i)] > 0 ? mu : -mu;
            if (viol > worst_viol) {
                worst_viol = viol;
                worst = i;
            }
        }
        if (worst < 0) return w;
        state[static_cast<std::size_t>(worst)] = 0;
    }
    throw NonConvergence("active-set loop did not stabilize");
}

Eigen::VectorXd constrained_direction(const Eigen::VectorXd& alpha,
                                      const Eigen::MatrixXd& load,
                                      const Eigen::MatrixXd& w_load,
                                      const Eigen::MatrixXd& inv_cov) {
    const Eigen::MatrixXd gram = load.transpose() * w_load;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible())
        throw RankDeficientLoadings("constraints degenerate under Gamma^{-1} metric");
    const Eigen::VectorXd rhs = w_load.transpose() * alpha;
    return inv_cov * alpha - w_load * lu.solve(rhs);
}

}  // namespace

HoldingsVector optimize_bounded(const Eigen::VectorXd& alpha,
                                const ConstraintSet& constraints,
                                const Eigen::MatrixXd& inv_cov,
                                const Eigen::VectorXd& upper,
                                const Eigen::VectorXd& lower,
                                const BoundedOptions& options) {
    const Eigen::MatrixXd& load = constraints.loadings;
    const Eigen::Index n = load.rows();
    if (alpha.size() != n || upper.size() != n || lower.size() != n ||
        inv_cov.rows() != n || inv_cov.cols() != n)
        throw DimensionMismatch("inconsistent sizes in optimize_bounded");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(lower(i) <= 0.0 && 0.0 <= upper(i)))
            throw InfeasibleBounds("bounds must satisfy lower <= 0 <= upper at index " +
                                   std::to_string(i));
    if (upper.sum() - lower.sum() < 1.0)
        throw InfeasibleBounds("box too small to reach gross exposure 1");

    const Eigen::MatrixXd w_load = inv_cov * load;

    const Eigen::VectorXd x0 = constrained_direction(alpha, load, w_load, inv_cov);
    const double s0 = x0.lpNorm<1>();
    if (s0 <= 0.0) throw ZeroAlpha("constrained alpha direction vanishes");
    Eigen::VectorXd ret = alpha / s0;

    for (int outer = 0; outer < options.max_outer; ++outer) {
        const Eigen::VectorXd x =
            bounded_inner(ret, load, w_load, inv_cov, upper, lower, options.inner_tol);
        const double gross = x.lpNorm<1>();
        if (std::abs(gross - 1.0) < options.prec) {
            HoldingsVector out;
            out.weights = x;
            out.investment_level = options.investment_level;
            return out;
        }
        if (gross <= 0.0)
            throw InfeasibleBounds("gross exposure collapsed to zero under the bounds");
        ret /= gross;
    }
    throw NonConvergence("outer rescaling did not reach gross normalization after " +
                         std::to_string(options.max_outer) + " iterations");
}

double regression_as_optimization_check(const Eigen::VectorXd& alpha,
                                        const ConstraintSet& constraints,
                                        const Eigen::VectorXd& variances) {
    if (variances.minCoeff() <= 0.0) throw InvalidSpec("variances must be positive");
    const Eigen::Index n = alpha.size();

    // Regression path: weighted residuals, sign-flipped and normalized.
    const RegressionResult reg =
        weighted_regression_residuals(alpha, constraints, variances.cwiseInverse());
    const double gross = reg.weighted_residuals.lpNorm<1>();
    if (gross <= 0.0) throw ZeroAlpha("regression residuals vanish");
    const Eigen::VectorXd w_reg = -reg.weighted_residuals / gross;

    // Optimization path: bounded optimizer with a never-binding box and
    // Gamma = diag(variances).
    const Eigen::MatrixXd inv_cov =
        Eigen::MatrixXd(variances.cwiseInverse().asDiagonal());
    const Eigen::VectorXd wide = Eigen::VectorXd::Constant(n, 1e3);
    const HoldingsVector opt =
        optimize_bounded(-alpha, constraints, inv_cov, wide, -wide, {});

    return (w_reg - opt.weights).cwiseAbs().maxCoeff();
}

}  // namespace hetrisk
