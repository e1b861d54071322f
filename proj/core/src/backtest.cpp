#include "hetrisk/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hetrisk/errors.hpp"
#include "hetrisk/heterotic.hpp"
#include "hetrisk/optimizer.hpp"
#include "hetrisk/parallel.hpp"
#include "hetrisk/pc_model.hpp"
#include "hetrisk/returns_panel.hpp"
#include "hetrisk/stats.hpp"

namespace hetrisk {

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v{Variant::reg_pc, Variant::reg_ind,
                                        Variant::reg_het, Variant::opt_pc,
                                        Variant::opt_het};
    return v;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::reg_pc: return "reg_pc";
        case Variant::reg_ind: return "reg_ind";
        case Variant::reg_het: return "reg_het";
        case Variant::opt_pc: return "opt_pc";
        case Variant::opt_het: return "opt_het";
    }
    return "unknown";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : all_variants())
        if (variant_name(v) == name) return v;
    throw InvalidSpec("unknown variant '" + name +
                      "' (expected reg_pc, reg_ind, reg_het, opt_pc or opt_het)");
}

void BacktestConfig::validate() const {
    if (lookback < 2) throw InvalidSpec("lookback must be at least 2");
    if (universe_size < 1) throw InvalidSpec("universe_size must be positive");
    if (rebalance_period < 1) throw InvalidSpec("rebalance_period must be positive");
    if (investment_level <= 0) throw InvalidSpec("investment_level must be positive");
    if (bound_fraction && !(*bound_fraction > 0.0 && *bound_fraction <= 1.0))
        throw InvalidSpec("bound_fraction must lie in (0, 1]");
}

Metrics compute_metrics(const Eigen::VectorXd& daily_pnl,
                        const Eigen::VectorXd& shares_traded,
                        double investment_level) {
    const Eigen::Index n = daily_pnl.size();
    if (n < 1 || shares_traded.size() != n)
        throw InvalidSpec("need matching nonempty P&L and shares series");
    if (investment_level <= 0) throw InvalidSpec("investment_level must be positive");
    const double mean = daily_pnl.mean();
    Metrics m;
    m.roc = 252.0 * mean / investment_level;
    const double var =
        n > 1 ? (daily_pnl.array() - mean).square().sum() / static_cast<double>(n - 1)
              : 0.0;
    if (!(var > 0.0)) throw ZeroVariancePnl("P&L series is constant");
    m.sharpe = std::sqrt(252.0) * mean / std::sqrt(var);
    const double shares = shares_traded.sum();
    if (!(shares > 0.0)) throw ZeroTradedShares("no shares traded");
    m.cps = 100.0 * daily_pnl.sum() / shares;
    return m;
}

Eigen::VectorXd BacktestReport::daily_pnl() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(days.size()));
    for (std::size_t i = 0; i < days.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = days[i].pnl;
    return v;
}

Eigen::VectorXd BacktestReport::shares_traded() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(days.size()));
    for (std::size_t i = 0; i < days.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = days[i].shares_traded;
    return v;
}

double BacktestReport::max_abs_net() const {
    double m = 0;
    for (const auto& d : days) m = std::max(m, std::abs(d.net_weight));
    return m;
}

double BacktestReport::max_abs_gross_error() const {
    double m = 0;
    for (const auto& d : days) m = std::max(m, std::abs(d.gross_error));
    return m;
}

long BacktestReport::total_bound_violations() const {
    long m = 0;
    for (const auto& d : days) m += d.bound_violations;
    return m;
}

namespace {

ReturnsPanel window_panel(const std::vector<std::string>& tickers,
                          const std::vector<std::string>& dates,
                          const Eigen::MatrixXd& returns_u, Eigen::Index first_col,
                          Eigen::Index ncols) {
    std::vector<std::string> wdates(
        dates.begin() + first_col + 1, dates.begin() + first_col + 1 + ncols);
    return ReturnsPanel::create(tickers, std::move(wdates),
                                returns_u.middleCols(first_col, ncols));
}

// Principal-component regression loadings with an intercept first column.
// Components beyond the numerical rank (eigenvalue below 1e-12 of the top
// one) are dropped; the count is further capped at M = observations - 1.
Eigen::MatrixXd pc_loadings_with_intercept(const CovarianceResult& cr,
                                           Eigen::Index m_obs) {
    const EigenSystem es = sym_eigen(cr.cor);
    Eigen::Index k = 0;
    while (k < es.eigenvalues.size() && k < m_obs &&
           es.eigenvalues(k) > 1e-12 * es.eigenvalues(0))
        ++k;
    const Eigen::VectorXd sd = cr.variances.cwiseSqrt();
    Eigen::MatrixXd y(cr.cor.rows(), k + 1);
    y.col(0).setOnes();
    for (Eigen::Index a = 0; a < k; ++a)
        y.col(a + 1) =
            std::sqrt(es.eigenvalues(a)) * sd.cwiseProduct(es.eigenvectors.col(a));
    return y;
}

// Per-cluster first-PC regression loadings with an intercept first column.
Eigen::MatrixXd het_loadings_with_intercept(const CovarianceResult& cr,
                                            const IndustryHierarchy& hier) {
    const ClusterPC pc = cluster_first_pc(cr.cor, hier.membership(0));
    const auto& assign = hier.assignment(0);
    const Eigen::VectorXd sd = cr.variances.cwiseSqrt();
    Eigen::MatrixXd y =
        Eigen::MatrixXd::Zero(cr.cor.rows(), hier.num_clusters(0) + 1);
    y.col(0).setOnes();
    for (Eigen::Index i = 0; i < cr.cor.rows(); ++i)
        y(i, assign[static_cast<std::size_t>(i)] + 1) = sd(i) * pc.entries(i);
    return y;
}

struct ReducedProblem {
    Eigen::MatrixXd loadings;         // surviving rows x surviving columns
    std::vector<Eigen::Index> rows;   // surviving universe-local rows
};

/**
 * Drops rows whose holdings are pinned to exactly zero by a
 * single-nonzero-row constraint column, together with those columns. The
 * solve on the reduction plus scattered zeros equals the full solution,
 * and it makes the zeros exact rather than roundoff-small.
 */
ReducedProblem reduce_singletons(const Eigen::MatrixXd& y,
                                 const std::vector<Eigen::Index>& zero_rows,
                                 const std::vector<Eigen::Index>& drop_cols) {
    const std::set<Eigen::Index> zr(zero_rows.begin(), zero_rows.end());
    const std::set<Eigen::Index> dc(drop_cols.begin(), drop_cols.end());
    ReducedProblem out;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        if (!zr.count(i)) out.rows.push_back(i);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        if (!dc.count(c)) cols.push_back(c);
    out.loadings.resize(static_cast<Eigen::Index>(out.rows.size()),
                        static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < out.rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            out.loadings(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                y(out.rows[a], cols[b]);
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        v(static_cast<Eigen::Index>(a)) = full(rows[a]);
    return v;
}

// Normalized regression weights -Z eps / sum|Z eps|; all-zero when the
// residuals vanish (e.g. zero alpha).
Eigen::VectorXd regression_weights(const Eigen::VectorXd& alpha,
                                   const Eigen::MatrixXd& y, const Eigen::VectorXd& z) {
    const RegressionResult r =
        weighted_regression_residuals(alpha, ConstraintSet::create(y), z);
    const double gross = r.weighted_residuals.lpNorm<1>();
    if (!(gross > 0.0)) return Eigen::VectorXd::Zero(alpha.size());
    return -r.weighted_residuals / gross;
}

struct IntervalModels {
    std::vector<Eigen::Index> rows;  // universe rows, ascending
    IndustryHierarchy hier;
    Eigen::VectorXd z;               // 1 / C_ii from the interval window
    Eigen::MatrixXd het_inv;         // opt_het
    Eigen::MatrixXd pc_inv;          // opt_pc
    Eigen::MatrixXd y_ind;           // reg_ind indicator columns
    Eigen::MatrixXd y_pc;            // reg_pc (interval-frozen variant)
    Eigen::MatrixXd y_het;           // reg_het (interval-frozen variant)
    std::vector<Eigen::Index> singleton_rows;   // universe-local
    std::vector<Eigen::Index> singleton_cols;   // sub-industry ids
};

}  // namespace

std::vector<BacktestReport> run_horserace(const PricePanel& prices,
                                          const IndustryHierarchy& hierarchy,
                                          const BacktestConfig& config,
                                          const std::vector<Variant>& variants) {
    config.validate();
    if (variants.empty()) throw InvalidSpec("no variants requested");
    if (hierarchy.tickers() != prices.tickers)
        throw HierarchyMismatch("hierarchy tickers do not match price panel tickers");
    const Eigen::Index t_days = prices.num_days();
    const Eigen::Index d = config.lookback;
    const Eigen::Index first_day = d + 1;  // earliest day with d prior return columns
    if (t_days <= first_day)
        throw InsufficientHistory("need more than " + std::to_string(first_day) +
                                  " price days, have " + std::to_string(t_days));

    const ReturnPanels rets = compute_returns(prices);
    const int threads = resolve_threads(config.threads);
    const auto wants = [&](Variant v) {
        return std::find(variants.begin(), variants.end(), v) != variants.end();
    };

    const Eigen::Index num_trade_days = t_days - first_day;
    std::vector<BacktestReport> reports(variants.size());
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        reports[vi].variant = variants[vi];
        reports[vi].days.resize(static_cast<std::size_t>(num_trade_days));
        reports[vi].universe_size = 0;
    }

    for (Eigen::Index s0 = first_day; s0 < t_days; s0 += config.rebalance_period) {
        const Eigen::Index s_end = std::min<Eigen::Index>(s0 + config.rebalance_period, t_days);

        IntervalModels im;
        im.rows = select_universe(prices, s0, static_cast<int>(d), config.universe_size).rows;
        std::sort(im.rows.begin(), im.rows.end());
        const auto n_u = static_cast<Eigen::Index>(im.rows.size());
        im.hier = hierarchy.restrict_to(im.rows);
        im.singleton_rows = im.hier.singleton_tickers();
        for (auto c : im.hier.singleton_clusters()) im.singleton_cols.push_back(c);

        std::vector<std::string> u_tickers(static_cast<std::size_t>(n_u));
        Eigen::MatrixXd r_u(n_u, rets.close_to_close.cols());
        Eigen::MatrixXd e_u(n_u, rets.overnight.cols());
        for (Eigen::Index a = 0; a < n_u; ++a) {
            const Eigen::Index i = im.rows[static_cast<std::size_t>(a)];
            u_tickers[static_cast<std::size_t>(a)] = prices.tickers[static_cast<std::size_t>(i)];
            r_u.row(a) = rets.close_to_close.row(i);
            e_u.row(a) = rets.overnight.row(i);
        }

        const ReturnsPanel interval_panel =
            window_panel(u_tickers, prices.dates, r_u, s0 - 1 - d, d);
        const CovarianceResult interval_cr = sample_covariance(interval_panel);
        im.z = interval_cr.variances.cwiseInverse();

        if (wants(Variant::opt_het))
            im.het_inv = build_heterotic_model(interval_panel, im.hier,
                                               {config.market_factor, false})
                             .inv_cov;
        if (wants(Variant::opt_pc)) {
            const int k = select_num_factors(interval_panel).k;
            const FactorModel m = build_pc_model(interval_panel, true, k);
            if (!m.has_inverse())
                throw SingularFactorCovariance(
                    "principal-component model has no inverse at K = " + std::to_string(k));
            im.pc_inv = m.inv_cov;
        }
        if (wants(Variant::reg_ind)) im.y_ind = im.hier.membership(0);
        if (!config.daily_loadings) {
            if (wants(Variant::reg_pc))
                im.y_pc = pc_loadings_with_intercept(interval_cr, interval_panel.m());
            if (wants(Variant::reg_het))
                im.y_het = het_loadings_with_intercept(interval_cr, im.hier);
        }

        const bool need_daily_cr =
            config.daily_loadings && (wants(Variant::reg_pc) || wants(Variant::reg_het));

        for (std::size_t vi = 0; vi < variants.size(); ++vi)
            reports[vi].universe_size =
                std::max(reports[vi].universe_size, static_cast<int>(n_u));

        parallel_for(s_end - s0, threads, [&](long offset) {
            const Eigen::Index s = s0 + offset;
            const std::string& date = prices.dates[static_cast<std::size_t>(s)];
            try {
                const Eigen::VectorXd alpha = e_u.col(s - 1);
                const bool zero_alpha = alpha.lpNorm<1>() <= 0.0;

                CovarianceResult daily_cr;
                if (need_daily_cr && !zero_alpha)
                    daily_cr = sample_covariance(
                        window_panel(u_tickers, prices.dates, r_u, s - 1 - d, d));

                // Per-day ADDV for the liquidity bounds, in weight units.
                Eigen::VectorXd upper, lower;
                if (config.bound_fraction) {
                    Eigen::VectorXd addv = Eigen::VectorXd::Zero(n_u);
                    for (Eigen::Index u = s - d; u < s; ++u)
                        for (Eigen::Index a = 0; a < n_u; ++a) {
                            const Eigen::Index i = im.rows[static_cast<std::size_t>(a)];
                            addv(a) += prices.volume(i, u) * prices.close(i, u);
                        }
                    addv /= static_cast<double>(d);
                    upper = (*config.bound_fraction / config.investment_level) * addv;
                    lower = -upper;
                }

                for (std::size_t vi = 0; vi < variants.size(); ++vi) {
                    const Variant v = variants[vi];
                    Eigen::VectorXd w = Eigen::VectorXd::Zero(n_u);
                    if (!zero_alpha) {
                        try {
                            switch (v) {
                                case Variant::reg_pc: {
                                    const Eigen::MatrixXd y =
                                        config.daily_loadings
                                            ? pc_loadings_with_intercept(daily_cr, d - 1)
                                            : im.y_pc;
                                    if (config.bound_fraction)
                                        w = optimize_bounded(
                                                -alpha, ConstraintSet::create(y),
                                                Eigen::MatrixXd(im.z.asDiagonal()), upper,
                                                lower, {})
                                                .weights;
                                    else
                                        w = regression_weights(alpha, y, im.z);
                                    break;
                                }
                                case Variant::reg_ind:
                                case Variant::reg_het: {
                                    Eigen::MatrixXd y;
                                    std::vector<Eigen::Index> drop_cols;
                                    if (v == Variant::reg_ind) {
                                        y = im.y_ind;
                                        drop_cols = im.singleton_cols;
                                    } else {
                                        y = config.daily_loadings
                                                ? het_loadings_with_intercept(daily_cr,
                                                                              im.hier)
                                                : im.y_het;
                                        // Intercept occupies column 0.
                                        for (auto c : im.singleton_cols)
                                            drop_cols.push_back(c + 1);
                                    }
                                    const ReducedProblem rp =
                                        reduce_singletons(y, im.singleton_rows, drop_cols);
                                    const Eigen::VectorXd a_r = gather(alpha, rp.rows);
                                    const Eigen::VectorXd z_r = gather(im.z, rp.rows);
                                    Eigen::VectorXd w_r;
                                    if (config.bound_fraction)
                                        w_r = optimize_bounded(
                                                  -a_r, ConstraintSet::create(rp.loadings),
                                                  Eigen::MatrixXd(z_r.asDiagonal()),
                                                  gather(upper, rp.rows),
                                                  gather(lower, rp.rows), {})
                                                  .weights;
                                    else
                                        w_r = regression_weights(a_r, rp.loadings, z_r);
                                    for (std::size_t a = 0; a < rp.rows.size(); ++a)
                                        w(rp.rows[a]) = w_r(static_cast<Eigen::Index>(a));
                                    break;
                                }
                                case Variant::opt_pc:
                                case Variant::opt_het: {
                                    const Eigen::MatrixXd& inv =
                                        v == Variant::opt_pc ? im.pc_inv : im.het_inv;
                                    if (config.bound_fraction)
                                        w = optimize_bounded(
                                                -alpha,
                                                ConstraintSet::dollar_neutrality(n_u), inv,
                                                upper, lower, {})
                                                .weights;
                                    else
                                        w = optimize_unbounded(alpha, inv).weights;
                                    break;
                                }
                            }
                        } catch (const ZeroAlpha&) {
                            w.setZero();
                        }
                    }

                    DayRecord rec;
                    rec.date = date;
                    rec.universe_rows = im.rows;
                    rec.holdings = config.investment_level * w;
                    const double gross = w.lpNorm<1>();
                    rec.net_weight = gross > 0.0 ? w.sum() : 0.0;
                    rec.gross_error = gross > 0.0 ? gross - 1.0 : 0.0;
                    if (config.bound_fraction && gross > 0.0)
                        for (Eigen::Index a = 0; a < n_u; ++a)
                            if (std::abs(w(a)) > upper(a) + 1e-9) ++rec.bound_violations;
                    for (Eigen::Index a = 0; a < n_u; ++a) {
                        const Eigen::Index i = im.rows[static_cast<std::size_t>(a)];
                        const double h = rec.holdings(a);
                        rec.pnl += h * (prices.close(i, s) / prices.open(i, s) - 1.0);
                        rec.shares_traded += 2.0 * std::abs(h) / prices.open(i, s);
                    }
                    reports[vi].days[static_cast<std::size_t>(s - first_day)] =
                        std::move(rec);
                }
            } catch (const Error& e) {
                throw Error("variant run failed on " + date + ": " + e.what());
            }
        });
    }

    for (auto& rep : reports) {
        const Eigen::VectorXd pnl = rep.daily_pnl();
        const Eigen::VectorXd shares = rep.shares_traded();
        // Lenient summary: degenerate metrics report as 0 so an all-zero
        // run still produces a well-formed report.
        rep.summary.roc = 252.0 * pnl.mean() / config.investment_level;
        if (pnl.size() > 1) {
            const double mean = pnl.mean();
            const double var = (pnl.array() - mean).square().sum() /
                               static_cast<double>(pnl.size() - 1);
            rep.summary.sharpe = var > 0.0 ? std::sqrt(252.0) * mean / std::sqrt(var) : 0.0;
        }
        const double total_shares = shares.sum();
        rep.summary.cps = total_shares > 0.0 ? 100.0 * pnl.sum() / total_shares : 0.0;
    }
    return reports;
}

void save_report_csv(const BacktestReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "date,pnl,shares_traded,net_weight,gross_error,bound_violations\n";
    char buf[160];
    for (const auto& d : report.days) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%ld\n",
                      d.date.c_str(), d.pnl, d.shares_traded, d.net_weight,
                      d.gross_error, d.bound_violations);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::string summary_to_json(const BacktestReport& report) {
    nlohmann::ordered_json j;
    j["variant"] = variant_name(report.variant);
    j["roc"] = report.summary.roc;
    j["sharpe"] = report.summary.sharpe;
    j["cps"] = report.summary.cps;
    j["days"] = report.days.size();
    j["universe_size"] = report.universe_size;
    return j.dump(2) + "\n";
}

void save_summary_json(const BacktestReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << summary_to_json(report);
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hetrisk
