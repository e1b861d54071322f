#include "hetrisk/returns_panel.hpp"

#include <cmath>

#include "hetrisk/errors.hpp"

namespace hetrisk {

ReturnsPanel ReturnsPanel::create(std::vector<std::string> tickers,
                                  std::vector<std::string> dates,
                                  Eigen::MatrixXd values) {
    if (values.rows() < 2)
        throw InvalidPanel("need at least 2 tickers, got " + std::to_string(values.rows()));
    if (values.cols() < 2)
        throw InvalidPanel("need at least 2 observations, got " + std::to_string(values.cols()));
    if (static_cast<Eigen::Index>(tickers.size()) != values.rows())
        throw InvalidPanel("ticker labels do not match row count");
    if (static_cast<Eigen::Index>(dates.size()) != values.cols())
        throw InvalidPanel("date labels do not match column count");
    if (!values.allFinite())
        throw InvalidPanel("panel contains missing or non-finite values");
    return ReturnsPanel{std::move(tickers), std::move(dates), std::move(values)};
}

ReturnsPanel ReturnsPanel::select_rows(const std::vector<Eigen::Index>& rows) const {
    std::vector<std::string> t;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), values.cols());
    t.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        t.push_back(tickers[static_cast<std::size_t>(rows[k])]);
        v.row(static_cast<Eigen::Index>(k)) = values.row(rows[k]);
    }
    return ReturnsPanel::create(std::move(t), dates, std::move(v));
}

}  // namespace hetrisk
