#include "hetrisk/heterotic.hpp"

#include <cmath>

#include "hetrisk/errors.hpp"
#include "hetrisk/stats.hpp"

namespace hetrisk {

namespace {

std::vector<Eigen::Index> assignment_from_membership(const Eigen::MatrixXd& membership) {
    std::vector<Eigen::Index> assign(static_cast<std::size_t>(membership.rows()), -1);
    for (Eigen::Index i = 0; i < membership.rows(); ++i) {
        for (Eigen::Index c = 0; c < membership.cols(); ++c) {
            const double v = membership(i, c);
            if (v == 0.0) continue;
            if (v != 1.0 || assign[static_cast<std::size_t>(i)] != -1)
                throw HierarchyMismatch("membership row " + std::to_string(i) +
                                        " is not a single-membership indicator");
            assign[static_cast<std::size_t>(i)] = c;
        }
        if (assign[static_cast<std::size_t>(i)] == -1)
            throw HierarchyMismatch("membership row " + std::to_string(i) +
                                    " belongs to no cluster");
    }
    return assign;
}

ClusterPC cluster_first_pc_impl(const Eigen::MatrixXd& cor,
                                const std::vector<Eigen::Index>& assign,
                                Eigen::Index num_clusters) {
    ClusterPC out;
    out.entries.resize(static_cast<Eigen::Index>(assign.size()));
    out.eigenvalues.resize(num_clusters);

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(num_clusters));
    for (std::size_t i = 0; i < assign.size(); ++i)
        members[static_cast<std::size_t>(assign[i])].push_back(static_cast<Eigen::Index>(i));

    for (Eigen::Index c = 0; c < num_clusters; ++c) {
        const auto& idx = members[static_cast<std::size_t>(c)];
        if (idx.empty()) throw EmptyCluster("cluster " + std::to_string(c));
        if (idx.size() == 1) {
            out.entries(idx[0]) = 1.0;
            out.eigenvalues(c) = cor(idx[0], idx[0]);
            continue;
        }
        const auto sz = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd block(sz, sz);
        for (Eigen::Index a = 0; a < sz; ++a)
            for (Eigen::Index b = 0; b < sz; ++b) block(a, b) = cor(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        const EigenSystem es = sym_eigen(block);
        Eigen::VectorXd u = es.eigenvectors.col(0);
        // Deterministic orientation: non-negative within-cluster sum; the
        // largest-entry-positive convention of sym_eigen breaks exact ties.
        if (u.sum() < -1e-12) u = -u;
        for (Eigen::Index a = 0; a < sz; ++a) out.entries(idx[static_cast<std::size_t>(a)]) = u(a);
        out.eigenvalues(c) = es.eigenvalues(0);
        if (sz > 1 &&
            es.eigenvalues(0) - es.eigenvalues(1) <= 1e-12 * std::max(1.0, es.eigenvalues(0)))
            out.degenerate_clusters.push_back(c);
    }
    return out;
}

Eigen::MatrixXd correlation_of(const Eigen::MatrixXd& cov) {
    const Eigen::VectorXd d = cov.diagonal();
    if (d.minCoeff() <= 0.0)
        throw SingularTopLevel("factor variance vanished while renormalizing");
    const Eigen::VectorXd inv_sd = d.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd cor = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    cor.diagonal().setOnes();
    return cor;
}

// Shared state of the downward recursion: loadings, per-level factor
// covariances, and per-cluster eigenvalues.
struct Recursion {
    std::vector<Eigen::MatrixXd> flm;   // level l: units x clusters, U entries
    std::vector<Eigen::MatrixXd> covs;  // covs[0] = stock cov, covs[l+1] = factor cov
    std::vector<ClusterPC> pcs;
};

Recursion run_recursion(const CovarianceResult& cr, const IndustryHierarchy& hier) {
    Recursion r;
    r.covs.push_back(cr.cov);
    Eigen::MatrixXd cor = cr.cor;
    for (std::size_t l = 0; l < hier.num_levels(); ++l) {
        const auto& assign = hier.assignment(l);
        const Eigen::Index k = hier.num_clusters(l);
        ClusterPC pc = cluster_first_pc_impl(cor, assign, k);
        Eigen::MatrixXd flm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assign.size()), k);
        for (std::size_t u = 0; u < assign.size(); ++u)
            flm(static_cast<Eigen::Index>(u), assign[u]) = pc.entries(static_cast<Eigen::Index>(u));
        Eigen::MatrixXd next = flm.transpose() * cor * flm;
        next = ((next + next.transpose()) / 2.0).eval();
        r.flm.push_back(std::move(flm));
        r.pcs.push_back(std::move(pc));
        r.covs.push_back(next);
        cor = correlation_of(r.covs.back());
    }
    return r;
}

}  // namespace

ClusterPC cluster_first_pc(const Eigen::MatrixXd& cor,
                           const Eigen::MatrixXd& membership) {
    if (membership.rows() != cor.rows() || cor.rows() != cor.cols())
        throw DimensionMismatch("cor " + std::to_string(cor.rows()) + "x" +
                                std::to_string(cor.cols()) + " vs membership rows " +
                                std::to_string(membership.rows()));
    const auto assign = assignment_from_membership(membership);
    return cluster_first_pc_impl(cor, assign, membership.cols());
}

FactorModel build_heterotic_model(const ReturnsPanel& panel,
                                  const IndustryHierarchy& hierarchy,
                                  const HeteroticOptions& options) {
    if (hierarchy.tickers() != panel.tickers)
        throw HierarchyMismatch("hierarchy tickers do not match panel tickers");
    for (std::size_t l = 1; l < hierarchy.num_levels(); ++l)
        if (hierarchy.num_clusters(l) > hierarchy.num_clusters(l - 1))
            throw HierarchyMismatch("level " + hierarchy.level_names()[l] +
                                    " is finer than the previous level");

    if (options.drop_singletons) {
        const auto singles = hierarchy.singleton_tickers();
        if (!singles.empty()) {
            std::vector<Eigen::Index> keep;
            std::size_t s = 0;
            for (Eigen::Index i = 0; i < panel.num_tickers(); ++i) {
                if (s < singles.size() && singles[s] == i)
                    ++s;
                else
                    keep.push_back(i);
            }
            HeteroticOptions sub = options;
            sub.drop_singletons = false;  // pruned universe has no singletons at level 0
            FactorModel m = build_heterotic_model(panel.select_rows(keep),
                                                  hierarchy.restrict_to(keep), sub);
            m.meta.drop_singletons = true;
            return m;
        }
    }

    const CovarianceResult cr = sample_covariance(panel);
    const Recursion rec = run_recursion(cr, hierarchy);
    const std::size_t levels = hierarchy.num_levels();

    Eigen::MatrixXd mod;
    if (!options.market_factor) {
        mod = rec.covs.back();
    } else {
        // One more 1-factor step: the market is the sole risk factor.
        const Eigen::MatrixXd top_cor = correlation_of(rec.covs.back());
        const EigenSystem es = sym_eigen(top_cor);
        Eigen::VectorXd y = es.eigenvectors.col(0);
        if (y.sum() < -1e-12) y = -y;
        Eigen::MatrixXd tilde = es.eigenvalues(0) * y * y.transpose();
        tilde.diagonal().setOnes();
        const Eigen::VectorXd tr = rec.covs.back().diagonal().cwiseSqrt();
        mod = tr.asDiagonal() * tilde * tr.asDiagonal();
    }
    {
        const EigenSystem top = sym_eigen(((mod + mod.transpose()) / 2.0).eval());
        const Eigen::Index p = top.eigenvalues.size();
        if (top.eigenvalues(p - 1) <= 1e-12 * std::max(1.0, top.eigenvalues(0)))
            throw SingularTopLevel(
                "final factor covariance is numerically singular; enable market_factor");
    }

    Eigen::MatrixXd fac_cov;
    Eigen::VectorXd spec_var;
    for (std::size_t l = levels; l-- > 0;) {
        fac_cov = mod;
        mod = rec.flm[l] * mod * rec.flm[l].transpose();
        spec_var = Eigen::VectorXd::Ones(mod.rows()) - mod.diagonal();
        mod.diagonal().setOnes();
        const Eigen::VectorXd tr = rec.covs[l].diagonal().cwiseSqrt();
        mod = tr.asDiagonal() * mod * tr.asDiagonal();
    }

    // Singleton fix (zeta = 1): full variance goes to specific risk and the
    // corresponding factor covariance diagonal entry is zeroed.
    const auto singleton_clusters = hierarchy.singleton_clusters();
    for (auto c : singleton_clusters) fac_cov(c, c) = 0.0;
    for (auto i : hierarchy.singleton_tickers()) spec_var(i) = 1.0;
    spec_var = spec_var.cwiseMax(0.0);

    const Eigen::VectorXd sd = cr.variances.cwiseSqrt();

    FactorModel m;
    m.tickers = panel.tickers;
    m.meta.kind = "heterotic";
    m.meta.num_factors = static_cast<int>(hierarchy.num_clusters(0));
    m.meta.market_factor = options.market_factor;
    m.meta.drop_singletons = options.drop_singletons;
    m.spec_risk = sd.cwiseProduct(spec_var.cwiseSqrt());
    m.fac_load = sd.asDiagonal() * rec.flm[0];
    m.fac_cov = fac_cov;
    m.cov_mat = ((mod + mod.transpose()) / 2.0).eval();

    // Inverse in correlation units, then conjugated back.
    for (Eigen::Index i = 0; i < spec_var.size(); ++i)
        if (!(spec_var(i) > 0.0))
            throw ZeroSpecificRisk("ticker " + panel.tickers[static_cast<std::size_t>(i)] +
                                   " has zero specific variance outside a singleton cluster");
    const Eigen::MatrixXd inv_tilde =
        factor_model_inverse(spec_var.cwiseSqrt(), rec.flm[0], fac_cov);
    const Eigen::VectorXd inv_sd = sd.cwiseInverse();
    m.inv_cov = inv_sd.asDiagonal() * inv_tilde * inv_sd.asDiagonal();
    return m;
}

std::vector<Eigen::MatrixXd> realized_factor_returns(
    const ReturnsPanel& panel, const IndustryHierarchy& hierarchy) {
    if (hierarchy.tickers() != panel.tickers)
        throw HierarchyMismatch("hierarchy tickers do not match panel tickers");
    const CovarianceResult cr = sample_covariance(panel);
    const Recursion rec = run_recursion(cr, hierarchy);

    std::vector<Eigen::MatrixXd> out;
    Eigen::MatrixXd normalized =
        cr.variances.cwiseSqrt().cwiseInverse().asDiagonal() * panel.values;
    for (std::size_t l = 0; l < hierarchy.num_levels(); ++l) {
        Eigen::MatrixXd f = rec.flm[l].transpose() * normalized;  // K_l x (M+1)
        normalized =
            rec.covs[l + 1].diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * f;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace hetrisk
