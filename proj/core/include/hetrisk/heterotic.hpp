/**
 * @file heterotic.hpp
 * @brief Heterotic risk model: per-cluster first principal components as
 *        loadings, with the nested (Russian-doll) factor covariance.
 *
 * At each level of the industry hierarchy the current correlation matrix is
 * reduced cluster-by-cluster to its first principal components; the induced
 * factor covariance is renormalized and fed to the next level. Unwinding the
 * recursion yields a positive-definite covariance that reproduces the
 * sample variances exactly, plus its factor-form inverse.
 */

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hetrisk/factor_model.hpp"
#include "hetrisk/hierarchy.hpp"
#include "hetrisk/returns_panel.hpp"

namespace hetrisk {

/// First principal component per cluster of a correlation matrix.
struct ClusterPC {
    Eigen::VectorXd entries;        ///< U_i, unit norm within each cluster
    Eigen::VectorXd eigenvalues;    ///< top eigenvalue per cluster
    std::vector<Eigen::Index> degenerate_clusters;  ///< clusters whose top eigenvalue is (numerically) repeated
};

/**
 * Extracts the first principal component of every diagonal block of `cor`
 * selected by the binary membership matrix (one 1 per row). Entries are
 * sign-normalized so each cluster's entry sum is >= 0; a singleton cluster
 * gets U = 1 with eigenvalue equal to its diagonal entry.
 */
ClusterPC cluster_first_pc(const Eigen::MatrixXd& cor,
                           const Eigen::MatrixXd& membership);

struct HeteroticOptions {
    bool market_factor = false;   ///< finish with a single top-level factor
    bool drop_singletons = false; ///< prune single-ticker clusters instead of the zeta = 1 fix
};

/**
 * Builds the nested heterotic model for the panel and hierarchy. Without
 * drop_singletons, single-ticker sub-industries keep their full variance as
 * specific risk and contribute nothing to the factor covariance diagonal,
 * which keeps the factor-form inverse well defined.
 *
 * Throws HierarchyMismatch when tickers disagree with the panel, and
 * SingularTopLevel when the final factor covariance is numerically singular
 * (use market_factor in that case).
 */
FactorModel build_heterotic_model(const ReturnsPanel& panel,
                                  const IndustryHierarchy& hierarchy,
                                  const HeteroticOptions& options = {});

/// Realized factor return series for each hierarchy level (clusters x dates).
std::vector<Eigen::MatrixXd> realized_factor_returns(
    const ReturnsPanel& panel, const IndustryHierarchy& hierarchy);

}  // namespace hetrisk
