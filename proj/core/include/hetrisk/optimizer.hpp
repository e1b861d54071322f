/**
 * @file optimizer.hpp
 * @brief Portfolio construction: weighted cross-sectional regression,
 *        closed-form Sharpe maximization under dollar neutrality, and the
 *        bounded optimizer with homogeneous linear constraints.
 */

#pragma once

#include <Eigen/Dense>

namespace hetrisk {

/// Homogeneous-constraint coefficients, one column per constraint.
struct ConstraintSet {
    Eigen::MatrixXd loadings;  ///< N x p, full column rank, p < N

    /// Validates rank (to 1e-10) and shape; throws RankDeficientLoadings.
    static ConstraintSet create(Eigen::MatrixXd loadings);
    /// The single dollar-neutrality (unit-column) constraint.
    static ConstraintSet dollar_neutrality(Eigen::Index n);

    Eigen::Index size() const { return loadings.cols(); }
};

/// Portfolio weights w_i = H_i / I with sum |w| = 1.
struct HoldingsVector {
    Eigen::VectorXd weights;
    double investment_level = 1.0;

    Eigen::VectorXd dollars() const { return investment_level * weights; }
};

/// Weighted-regression output: raw residuals and the weighted residuals
/// that serve as the holdings direction.
struct RegressionResult {
    Eigen::VectorXd residuals;           ///< eps = E - Y beta
    Eigen::VectorXd weighted_residuals;  ///< Z eps
};

/**
 * Residuals of the weighted cross-sectional regression of `returns` on the
 * constraint loadings with weights z > 0:
 *   eps~ = Z [E - Y (Y^T Z Y)^{-1} Y^T Z E].
 * The residuals are Z-orthogonal to the loadings columns.
 */
RegressionResult weighted_regression_residuals(const Eigen::VectorXd& returns,
                                               const ConstraintSet& loadings,
                                               const Eigen::VectorXd& weights);

/**
 * Closed-form Sharpe maximization under dollar neutrality:
 *   H ∝ -[G E - G 1 (1^T G E)/(1^T G 1)],  G = Gamma^{-1},
 * normalized to sum |H| = I. Throws ZeroAlpha when the projected alpha
 * vanishes (e.g. constant expected returns).
 */
HoldingsVector optimize_unbounded(const Eigen::VectorXd& alpha,
                                  const Eigen::MatrixXd& inv_cov,
                                  double investment_level = 1.0);

struct BoundedOptions {
    double prec = 1e-5;      ///< tolerance on | sum|w| - 1 |
    double inner_tol = 1e-6; ///< bound-pinning tolerance of the active-set loop
    int max_outer = 100;     ///< outer rescaling iterations before NonConvergence
    double investment_level = 1.0;
};

/**
 * Sharpe maximization with homogeneous linear constraints and box bounds
 * on the weights (lower <= 0 <= upper). Two-loop scheme: an inner
 * active-set loop pins coordinates at bounds and solves the reduced
 * constrained system; an outer loop rescales the alpha until the gross
 * normalization sum |w| = 1 holds to `prec`.
 *
 * The alpha enters as the linear objective direction: the unbounded,
 * unconstrained solution is Gamma^{-1} alpha. Pass -E for a
 * mean-reversion alpha on returns E.
 */
HoldingsVector optimize_bounded(const Eigen::VectorXd& alpha,
                                const ConstraintSet& constraints,
                                const Eigen::MatrixXd& inv_cov,
                                const Eigen::VectorXd& upper,
                                const Eigen::VectorXd& lower,
                                const BoundedOptions& options = {});

/**
 * Agreement between constrained optimization with Gamma = diag(variances)
 * and the weighted regression with z = 1/variances: returns the maximum
 * absolute difference between the two normalized holdings vectors.
 */
double regression_as_optimization_check(const Eigen::VectorXd& alpha,
                                        const ConstraintSet& constraints,
                                        const Eigen::VectorXd& variances);

}  // namespace hetrisk
