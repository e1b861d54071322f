/**
 * @file pc_model.hpp
 * @brief Principal-component risk model and the factor-count heuristic.
 *
 * The loadings are the leading eigenvectors of the sample correlation
 * matrix scaled by the square roots of their eigenvalues, so the factor
 * covariance is the identity and the model reproduces the sample
 * variances by construction. The number of factors K is fixed by a scan
 * over the specific-variance extremes unless overridden.
 */

#pragma once

#include <optional>
#include <vector>

#include "hetrisk/factor_model.hpp"
#include "hetrisk/returns_panel.hpp"

namespace hetrisk {

/// Six-number summary (R type-7 quantiles) of the specific variances.
struct Quantiles {
    double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

/// Result of the K-fixing scan, with per-k diagnostics.
struct KSelection {
    int k = 1;              ///< chosen K (early-termination scan)
    int full_scan_k = 1;    ///< argmin of |g(k)-1| over the full scan range
    std::vector<double> g;  ///< g(k) = sqrt(min xi~^2) + sqrt(max xi~^2), k = 1..
    std::vector<Quantiles> spec_var_per_k;  ///< xi~^2 summary for each scanned k
};

/**
 * Scans k = 1 .. min(N, M) - 1 for the k whose g(k) is closest to 1.
 * The scan stops as soon as |g(k) - 1| first increases and returns the
 * last k before the increase; the unconditional argmin is also reported.
 */
KSelection select_num_factors(const ReturnsPanel& panel);

/**
 * Builds the principal-component factor model.
 *
 * With use_correlation the eigenvectors are taken from the correlation
 * matrix and the result rescaled back to return units; otherwise the
 * covariance matrix is decomposed directly. k_override (1..M) bypasses
 * the selection heuristic; at K = M the model correlation equals the
 * sample correlation, which is singular, so no inverse is stored.
 */
FactorModel build_pc_model(const ReturnsPanel& panel, bool use_correlation = true,
                           std::optional<int> k_override = std::nullopt);

/// Type-7 quantile summary helper (shared with the CLI diagnostics).
Quantiles summarize(const Eigen::VectorXd& values);

}  // namespace hetrisk
