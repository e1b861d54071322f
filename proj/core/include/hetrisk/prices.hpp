/**
 * @file prices.hpp
 * @brief Open/close/volume price panel, return construction, and
 *        ADDV-based universe selection.
 */

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace hetrisk {

/**
 * Daily price panel: one row per ticker, one column per date, dates
 * strictly ascending. Unadjusted and fully adjusted open/close prices must
 * share the same per-date adjustment factor (checked to 1e-6).
 */
struct PricePanel {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;  ///< strictly ascending
    Eigen::MatrixXd open, close;          ///< unadjusted, currency
    Eigen::MatrixXd adj_open, adj_close;  ///< adjusted, currency
    Eigen::MatrixXd volume;               ///< shares

    Eigen::Index num_tickers() const { return open.rows(); }
    Eigen::Index num_days() const { return open.cols(); }

    static PricePanel create(std::vector<std::string> tickers,
                             std::vector<std::string> dates, Eigen::MatrixXd open,
                             Eigen::MatrixXd close, Eigen::MatrixXd adj_open,
                             Eigen::MatrixXd adj_close, Eigen::MatrixXd volume);

    /// Long-format CSV: ticker,date,open,close,adj_open,adj_close,volume.
    static PricePanel load_csv(const std::filesystem::path& path);
    void save_csv(const std::filesystem::path& path) const;
};

/**
 * Log-returns from adjusted prices. Column j corresponds to date j+1 of the
 * panel: overnight(i, j) = ln(AO_{j+1} / AC_j), close_to_close(i, j) =
 * ln(AC_{j+1} / AC_j).
 */
struct ReturnPanels {
    Eigen::MatrixXd overnight;       ///< N x (T-1)
    Eigen::MatrixXd close_to_close;  ///< N x (T-1)
};

ReturnPanels compute_returns(const PricePanel& prices);

/// Universe chosen by trailing average daily dollar volume.
struct UniverseSelection {
    std::vector<Eigen::Index> rows;  ///< ticker rows, ADDV-descending
    Eigen::VectorXd addv;            ///< dollar volume per selected row
};

/**
 * Top `universe_size` tickers by ADDV over the `lookback` days strictly
 * preceding `day` (chronological index). Throws InsufficientHistory when
 * fewer than `lookback` prior days exist.
 */
UniverseSelection select_universe(const PricePanel& prices, Eigen::Index day,
                                  int lookback, int universe_size);

}  // namespace hetrisk
