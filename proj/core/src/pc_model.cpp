#include "hetrisk/pc_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hetrisk/errors.hpp"
#include "hetrisk/stats.hpp"

namespace hetrisk {

namespace {

double quantile7(std::vector<double> sorted, double p) {
    const std::size_t n = sorted.size();
    const double h = (static_cast<double>(n) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Specific variances xi~^2(k) for k = 1..kmax, computed incrementally from
// the eigensystem of the unit-diagonal correlation matrix.
std::vector<Eigen::VectorXd> spec_var_path(const EigenSystem& es, Eigen::Index n,
                                           int kmax) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(kmax));
    Eigen::VectorXd sv = Eigen::VectorXd::Ones(n);
    for (int k = 1; k <= kmax; ++k) {
        sv -= es.eigenvalues(k - 1) *
              es.eigenvectors.col(k - 1).cwiseAbs2();
        out.push_back(sv.cwiseMax(0.0));
    }
    return out;
}

int scan_upper_bound(const ReturnsPanel& panel) {
    return std::max<int>(1, static_cast<int>(std::min(panel.num_tickers(),
                                                      panel.m())) - 1);
}

}  // namespace

Quantiles summarize(const Eigen::VectorXd& values) {
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    Quantiles q;
    q.min = v.front();
    q.q1 = quantile7(v, 0.25);
    q.median = quantile7(v, 0.5);
    q.mean = values.mean();
    q.q3 = quantile7(v, 0.75);
    q.max = v.back();
    return q;
}

KSelection select_num_factors(const ReturnsPanel& panel) {
    if (panel.m() < 2)
        throw TooFewObservations("need M >= 2, got M = " + std::to_string(panel.m()));
    const CovarianceResult cr = sample_covariance(panel);
    const EigenSystem es = sym_eigen(cr.cor);
    const int kmax = scan_upper_bound(panel);
    const auto path = spec_var_path(es, panel.num_tickers(), kmax);

    KSelection sel;
    double best_full = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    bool stopped = false;
    for (int k = 1; k <= kmax; ++k) {
        const Eigen::VectorXd& sv = path[static_cast<std::size_t>(k - 1)];
        const double g = std::sqrt(sv.minCoeff()) + std::sqrt(sv.maxCoeff());
        sel.g.push_back(g);
        sel.spec_var_per_k.push_back(summarize(sv));
        const double dist = std::abs(g - 1.0);
        if (dist < best_full) {
            best_full = dist;
            sel.full_scan_k = k;
        }
        if (!stopped) {
            if (dist > prev) {
                stopped = true;  // keep the last k before the increase
            } else {
                prev = dist;
                sel.k = k;
            }
        }
    }
    return sel;
}

FactorModel build_pc_model(const ReturnsPanel& panel, bool use_correlation,
                           std::optional<int> k_override) {
    if (panel.m() < 2)
        throw TooFewObservations("need M >= 2, got M = " + std::to_string(panel.m()));
    const Eigen::Index n = panel.num_tickers();
    const CovarianceResult cr = sample_covariance(panel);

    int k;
    if (k_override) {
        const int cap = static_cast<int>(std::min<Eigen::Index>(n, panel.m()));
        if (*k_override < 1 || *k_override > cap)
            throw InvalidSpec("k_override " + std::to_string(*k_override) +
                              " outside [1, " + std::to_string(cap) + "]");
        k = *k_override;
    } else {
        k = select_num_factors(panel).k;
    }

    // Work in normalized units: the decomposed matrix has the panel's
    // variances on its diagonal scaled to tv.
    const Eigen::MatrixXd& work = use_correlation ? cr.cor : cr.cov;
    const Eigen::VectorXd tv = use_correlation
                                   ? Eigen::VectorXd::Ones(n)
                                   : cr.variances;
    const EigenSystem es = sym_eigen(work);

    Eigen::MatrixXd load(n, k);
    for (int a = 0; a < k; ++a)
        load.col(a) = std::sqrt(es.eigenvalues(a)) * es.eigenvectors.col(a);
    const Eigen::VectorXd fac_var = load.cwiseAbs2().rowwise().sum();
    const Eigen::VectorXd spec_var = (tv - fac_var).cwiseMax(0.0);

    FactorModel m;
    m.tickers = panel.tickers;
    m.meta.kind = "pc";
    m.meta.num_factors = k;
    m.meta.use_correlation = use_correlation;
    m.fac_cov = Eigen::MatrixXd::Identity(k, k);
    m.spec_risk = spec_var.cwiseSqrt();
    m.fac_load = load;
    m.cov_mat = Eigen::MatrixXd(spec_var.asDiagonal()) + load * load.transpose();

    // At K = M (or K = N) the specific variances vanish and the model
    // covariance is the singular sample matrix; no inverse then.
    if (spec_var.minCoeff() > 1e-12 * tv.maxCoeff())
        m.inv_cov = factor_model_inverse(m.spec_risk, m.fac_load, m.fac_cov);

    if (use_correlation) {
        const Eigen::VectorXd sd = cr.variances.cwiseSqrt();
        m.spec_risk = sd.cwiseProduct(m.spec_risk);
        m.fac_load = sd.asDiagonal() * m.fac_load;
        m.cov_mat = sd.asDiagonal() * m.cov_mat * sd.asDiagonal();
        if (m.has_inverse()) {
            const Eigen::VectorXd inv_sd = sd.cwiseInverse();
            m.inv_cov = inv_sd.asDiagonal() * m.inv_cov * inv_sd.asDiagonal();
        }
    }
    return m;
}

}  // namespace hetrisk
