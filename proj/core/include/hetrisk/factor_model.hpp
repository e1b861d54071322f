/**
 * @file factor_model.hpp
 * @brief Factor risk model container, factor-form inversion, and the
 *        total-variance diagnostic.
 *
 * A model represents Gamma = diag(xi^2) + Omega Phi* Omega^T together with
 * its inverse, computed entirely through K x K inversions. The model
 * reproduces the source panel's variances on its diagonal.
 */

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "hetrisk/returns_panel.hpp"

namespace hetrisk {

/// Builder provenance recorded alongside the matrices.
struct ModelMeta {
    std::string kind;               ///< "pc" or "heterotic"
    int num_factors = 0;            ///< K
    bool use_correlation = true;    ///< pc builder option
    bool market_factor = false;     ///< heterotic builder option
    bool drop_singletons = false;   ///< heterotic builder option
    std::string covariance_divisor = "M";  ///< sample covariance convention
};

struct FactorModel {
    std::vector<std::string> tickers;
    Eigen::VectorXd spec_risk;  ///< xi_i, return units, >= 0
    Eigen::MatrixXd fac_load;   ///< N x K loadings Omega
    Eigen::MatrixXd fac_cov;    ///< K x K factor covariance Phi*
    Eigen::MatrixXd cov_mat;    ///< N x N model covariance Gamma
    Eigen::MatrixXd inv_cov;    ///< N x N inverse; empty when Gamma is singular
    ModelMeta meta;

    bool has_inverse() const { return inv_cov.size() > 0; }
};

/**
 * Factor-form inverse of diag(xi^2) + Omega Phi Omega^T:
 *
 *   Gamma^{-1} = Xi^{-1} - Xi^{-1} Omega Delta^{-1} Omega^T Xi^{-1},
 *   Delta = Phi^{-1} + Omega^T Xi^{-1} Omega,  Xi = diag(xi^2).
 *
 * Only K x K systems are solved. Throws ZeroSpecificRisk when some xi_i
 * vanishes and SingularFactorCovariance when Phi (or Delta) is singular.
 */
Eigen::MatrixXd factor_model_inverse(const Eigen::VectorXd& spec_risk,
                                     const Eigen::MatrixXd& fac_load,
                                     const Eigen::MatrixXd& fac_cov);

/// Diagnostics of the total-variance conditions T_ii = 0.
struct TotalVarianceCheck {
    double max_abs_diag = 0.0;  ///< max_i |T_ii|
    double trace = 0.0;         ///< Tr(T), zero for any loadings
};

/**
 * Computes T = 2 Q Psi Q^T - Q Psi - Psi Q^T where Q projects onto the
 * column space of the given (rescaled) loadings. T_ii = 0 is what makes a
 * candidate loadings matrix consistent with the observed variances; the
 * trace vanishes identically.
 */
TotalVarianceCheck total_variance_conditions(const Eigen::MatrixXd& loadings,
                                             const Eigen::MatrixXd& psi);

/// Total-variance check of a built model against its source panel.
TotalVarianceCheck verify_total_variance(const FactorModel& model,
                                         const ReturnsPanel& panel);

/// Serialize to the documented JSON schema (row-major matrices, explicit dims).
void save_model_json(const FactorModel& model, const std::filesystem::path& path);
std::string model_to_json(const FactorModel& model);
FactorModel load_model_json(const std::filesystem::path& path);
FactorModel model_from_json(const std::string& text);

}  // namespace hetrisk
