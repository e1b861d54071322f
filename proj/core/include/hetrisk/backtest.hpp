/**
 * @file backtest.hpp
 * @brief Intraday mean-reversion horse race: liquidity-ranked universes,
 *        five portfolio-construction variants, daily P&L and summary
 *        metrics.
 *
 * Chronology: the portfolio for price day t is built from the overnight
 * return into day t's open (the alpha), a lookback window of close-to-close
 * returns ending at day t-1, and the trailing dollar-volume ranking. It is
 * established at day t's open and liquidated at the same day's close.
 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetrisk/hierarchy.hpp"
#include "hetrisk/prices.hpp"

namespace hetrisk {

/**
 * Portfolio-construction variants:
 *  - reg_pc:  weighted regression on principal-component loadings (all
 *             nonvanishing components) plus an intercept;
 *  - reg_ind: weighted regression on sub-industry indicator columns (the
 *             intercept is subsumed, the columns sum to 1 per row);
 *  - reg_het: weighted regression on per-cluster first-PC loadings plus an
 *             intercept;
 *  - opt_pc:  Sharpe optimization with the principal-component risk model
 *             (factor count from the selection heuristic);
 *  - opt_het: Sharpe optimization with the nested industry risk model.
 */
enum class Variant { reg_pc, reg_ind, reg_het, opt_pc, opt_het };

const std::vector<Variant>& all_variants();
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);  ///< throws InvalidSpec

struct BacktestConfig {
    int lookback = 21;              ///< d: ADDV window and return observations per window
    int universe_size = 2000;       ///< top tickers by ADDV
    int rebalance_period = 21;      ///< days between universe/weights/model refreshes
    double investment_level = 2e7;  ///< gross dollars, long plus short
    std::optional<double> bound_fraction = 0.01;  ///< |H| <= fraction * ADDV; nullopt: unbounded
    bool daily_loadings = true;     ///< recompute reg_pc / reg_het loadings daily
    bool market_factor = false;     ///< single top-level factor in the nested model
    int threads = 0;                ///< 0: HETRISK_THREADS env, then hardware default

    void validate() const;  ///< throws InvalidSpec
};

struct Metrics {
    double roc = 0;     ///< annualized return on capital
    double sharpe = 0;  ///< annualized Sharpe ratio
    double cps = 0;     ///< cents per share traded
};

/**
 * ROC = 252 * mean(pnl) / investment_level; Sharpe = sqrt(252) * mean/sd
 * (sd with divisor n-1); CPS = 100 * sum(pnl) / sum(shares). Throws
 * ZeroTradedShares when no shares traded and ZeroVariancePnl when the P&L
 * series is constant.
 */
Metrics compute_metrics(const Eigen::VectorXd& daily_pnl,
                        const Eigen::VectorXd& shares_traded,
                        double investment_level);

/// Per-day portfolio snapshot; holdings are dollars, aligned with rows.
struct DayRecord {
    std::string date;
    std::vector<Eigen::Index> universe_rows;  ///< rows into the price panel
    Eigen::VectorXd holdings;                 ///< dollars, one per universe row
    double pnl = 0;                           ///< currency
    double shares_traded = 0;
    double net_weight = 0;                    ///< sum w (dollar neutrality residual)
    double gross_error = 0;                   ///< sum |w| - 1
    long bound_violations = 0;                ///< |w| > bound + 1e-9 count
};

struct BacktestReport {
    Variant variant = Variant::reg_pc;
    std::vector<DayRecord> days;
    Metrics summary;  ///< degenerate metrics reported as 0 (see run_horserace)
    int universe_size = 0;

    Eigen::VectorXd daily_pnl() const;
    Eigen::VectorXd shares_traded() const;
    double max_abs_net() const;
    double max_abs_gross_error() const;
    long total_bound_violations() const;
};

/**
 * Runs the full protocol for the requested variants over one pass of the
 * price history. The universe, regression weights and risk models refresh
 * every rebalance_period days from strictly prior data; days within an
 * interval are evaluated concurrently and results do not depend on the
 * thread count.
 *
 * A zero-alpha day yields zero holdings and zero P&L. Degenerate summary
 * metrics (no shares traded, constant P&L) are reported as 0 instead of
 * propagating; all other per-day failures abort with the offending variant
 * and date named in the message.
 */
std::vector<BacktestReport> run_horserace(const PricePanel& prices,
                                          const IndustryHierarchy& hierarchy,
                                          const BacktestConfig& config,
                                          const std::vector<Variant>& variants);

/// Per-day CSV: date,pnl,shares_traded,net_weight,gross_error,bound_violations.
void save_report_csv(const BacktestReport& report, const std::filesystem::path& path);
/// Summary JSON: {variant, roc, sharpe, cps, days, universe_size}.
std::string summary_to_json(const BacktestReport& report);
void save_summary_json(const BacktestReport& report, const std::filesystem::path& path);

}  // namespace hetrisk
