/**
 * @file returns_panel.hpp
 * @brief Labeled N x (M+1) panel of return observations.
 */

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace hetrisk {

/**
 * A panel of return observations: one row per ticker, one column per date.
 *
 * Invariants checked at construction: at least 2 tickers, at least 2
 * observations, label counts match the value matrix, all entries finite.
 * Degeneracy across rows (constant rows, perfectly correlated pairs) is
 * diagnosed by sample_covariance(), which is the single entry point to
 * moment computation.
 */
struct ReturnsPanel {
    std::vector<std::string> tickers;  ///< N ticker identifiers
    std::vector<std::string> dates;    ///< M+1 date identifiers
    Eigen::MatrixXd values;            ///< N x (M+1) returns

    /// Number of tickers N.
    Eigen::Index num_tickers() const { return values.rows(); }
    /// Number of observations M+1.
    Eigen::Index num_obs() const { return values.cols(); }
    /// M = number of observations minus one (sample covariance divisor).
    Eigen::Index m() const { return values.cols() - 1; }

    /// Validating factory. Throws InvalidPanel on malformed input.
    static ReturnsPanel create(std::vector<std::string> tickers,
                               std::vector<std::string> dates,
                               Eigen::MatrixXd values);

    /// Panel restricted to the given row indices (order preserved).
    ReturnsPanel select_rows(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace hetrisk
