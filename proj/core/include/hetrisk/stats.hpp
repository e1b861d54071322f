/**
 * @file stats.hpp
 * @brief Sample moments and symmetric eigendecomposition.
 *
 * Shared numerical services for the model builders: unbiased sample
 * covariance / correlation of a return panel, and a deterministic
 * symmetric eigendecomposition (sorted decreasingly, sign-normalized,
 * near-zero negative eigenvalues clamped).
 */

#pragma once

#include <Eigen/Dense>

#include "hetrisk/returns_panel.hpp"

namespace hetrisk {

/// Sample covariance C, its diagonal, and the correlation matrix Psi.
struct CovarianceResult {
    Eigen::MatrixXd cov;        ///< N x N, divisor M (unbiased)
    Eigen::VectorXd variances;  ///< diagonal of cov, all > 0
    Eigen::MatrixXd cor;        ///< unit diagonal, |entries| <= 1
};

/**
 * Unbiased sample covariance over the M+1 observations of the panel
 * (divisor M), with the derived correlation matrix.
 *
 * Throws ZeroVariance for a constant row and DegenerateRow when two rows
 * are perfectly correlated (|cor| within 1e-12 of 1).
 */
CovarianceResult sample_covariance(const ReturnsPanel& panel);

/// Eigendecomposition of a symmetric PSD matrix.
struct EigenSystem {
    Eigen::VectorXd eigenvalues;   ///< sorted decreasingly, >= 0 after clamping
    Eigen::MatrixXd eigenvectors;  ///< orthonormal columns, matching order
};

/**
 * Symmetric eigendecomposition with a deterministic output convention:
 * eigenvalues sorted decreasingly; each eigenvector flipped so its
 * largest-magnitude entry is positive; negative eigenvalues within
 * round-off of zero clamped to 0.
 *
 * Throws NotSymmetric when the asymmetry exceeds 1e-9 relative, and
 * NotPositiveSemiDefinite when an eigenvalue is negative beyond round-off.
 */
EigenSystem sym_eigen(const Eigen::MatrixXd& mat);

}  // namespace hetrisk
