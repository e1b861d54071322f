#include "hetrisk/prices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hetrisk/errors.hpp"

namespace hetrisk {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

PricePanel PricePanel::create(std::vector<std::string> tickers,
                              std::vector<std::string> dates, Eigen::MatrixXd open,
                              Eigen::MatrixXd close, Eigen::MatrixXd adj_open,
                              Eigen::MatrixXd adj_close, Eigen::MatrixXd volume) {
    const Eigen::Index n = open.rows();
    const Eigen::Index t = open.cols();
    const auto check_shape = [&](const Eigen::MatrixXd& m, const char* name) {
        if (m.rows() != n || m.cols() != t)
            throw InvalidPanel(std::string(name) + " shape mismatch");
    };
    check_shape(close, "close");
    check_shape(adj_open, "adj_open");
    check_shape(adj_close, "adj_close");
    check_shape(volume, "volume");
    if (static_cast<Eigen::Index>(tickers.size()) != n ||
        static_cast<Eigen::Index>(dates.size()) != t)
        throw InvalidPanel("label counts do not match matrix shape");
    for (std::size_t j = 1; j < dates.size(); ++j)
        if (!(dates[j - 1] < dates[j]))
            throw InvalidPanel("dates not strictly ascending at " + dates[j]);
    if (open.minCoeff() <= 0.0 || close.minCoeff() <= 0.0 ||
        adj_open.minCoeff() <= 0.0 || adj_close.minCoeff() <= 0.0)
        throw InvalidPanel("prices must be positive");
    if (volume.minCoeff() < 0.0) throw InvalidPanel("volumes must be non-negative");

    // Same split/dividend factor for open and close within a ticker-date.
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < t; ++j) {
            const double fo = adj_open(i, j) / open(i, j);
            const double fc = adj_close(i, j) / close(i, j);
            if (std::abs(fo - fc) > 1e-6 * std::max(fo, fc))
                throw InvalidPanel("inconsistent adjustment factors for " +
                                   tickers[static_cast<std::size_t>(i)] + " on " +
                                   dates[static_cast<std::size_t>(j)]);
        }
    return PricePanel{std::move(tickers), std::move(dates), std::move(open),
                      std::move(close),   std::move(adj_open), std::move(adj_close),
                      std::move(volume)};
}

PricePanel PricePanel::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ticker,date,open,close,adj_open,adj_close,volume")
        throw ParseError(path.string() + ": unexpected header '" + line + "'");

    struct Row {
        double open, close, adj_open, adj_close, volume;
    };
    std::vector<std::string> tickers;
    std::unordered_map<std::string, Eigen::Index> ticker_id;
    std::map<std::string, Eigen::Index> date_id;  // ordered
    std::vector<std::tuple<Eigen::Index, std::string, Row>> rows;

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tk, date, f[5];
        if (!std::getline(ss, tk, ',') || !std::getline(ss, date, ','))
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad row");
        Row r{};
        double* vals[5] = {&r.open, &r.close, &r.adj_open, &r.adj_close, &r.volume};
        for (int c = 0; c < 5; ++c) {
            if (!std::getline(ss, f[c], ','))
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": expected 7 fields");
            try {
                *vals[c] = std::stod(f[c]);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": not a number: '" + f[c] + "'");
            }
        }
        auto [it, fresh] = ticker_id.emplace(tk, static_cast<Eigen::Index>(tickers.size()));
        if (fresh) tickers.push_back(tk);
        date_id.emplace(date, 0);
        rows.emplace_back(it->second, date, r);
    }
    if (rows.empty()) throw ParseError(path.string() + ": no data rows");

    std::vector<std::string> dates;
    for (auto& [date, id] : date_id) {
        id = static_cast<Eigen::Index>(dates.size());
        dates.push_back(date);
    }
    const auto n = static_cast<Eigen::Index>(tickers.size());
    const auto t = static_cast<Eigen::Index>(dates.size());
    Eigen::MatrixXd open(n, t), close(n, t), ao(n, t), ac(n, t), vol(n, t);
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(n, t);
    for (const auto& [i, date, r] : rows) {
        const Eigen::Index j = date_id.at(date);
        if (seen(i, j)++)
            throw ParseError(path.string() + ": duplicate row for " +
                             tickers[static_cast<std::size_t>(i)] + " " + date);
        open(i, j) = r.open;
        close(i, j) = r.close;
        ao(i, j) = r.adj_open;
        ac(i, j) = r.adj_close;
        vol(i, j) = r.volume;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < t; ++j)
            if (!seen(i, j))
                throw MissingPrice(tickers[static_cast<std::size_t>(i)] + " on " +
                                   dates[static_cast<std::size_t>(j)]);
    return create(std::move(tickers), std::move(dates), std::move(open),
                  std::move(close), std::move(ao), std::move(ac), std::move(vol));
}

void PricePanel::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "ticker,date,open,close,adj_open,adj_close,volume\n";
    for (Eigen::Index i = 0; i < num_tickers(); ++i)
        for (Eigen::Index j = 0; j < num_days(); ++j)
            out << tickers[static_cast<std::size_t>(i)] << ','
                << dates[static_cast<std::size_t>(j)] << ',' << fmt_double(open(i, j))
                << ',' << fmt_double(close(i, j)) << ',' << fmt_double(adj_open(i, j))
                << ',' << fmt_double(adj_close(i, j)) << ',' << fmt_double(volume(i, j))
                << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

ReturnPanels compute_returns(const PricePanel& prices) {
    const Eigen::Index n = prices.num_tickers();
    const Eigen::Index t = prices.num_days();
    if (t < 2) throw MissingPrice("need at least 2 consecutive days");
    ReturnPanels out;
    out.overnight.resize(n, t - 1);
    out.close_to_close.resize(n, t - 1);
    for (Eigen::Index j = 0; j + 1 < t; ++j) {
        out.overnight.col(j) =
            (prices.adj_open.col(j + 1).array() / prices.adj_close.col(j).array()).log();
        out.close_to_close.col(j) =
            (prices.adj_close.col(j + 1).array() / prices.adj_close.col(j).array()).log();
    }
    return out;
}

UniverseSelection select_universe(const PricePanel& prices, Eigen::Index day,
                                  int lookback, int universe_size) {
    if (lookback < 1 || universe_size < 1)
        throw InvalidSpec("lookback and universe_size must be positive");
    if (day < lookback || day > prices.num_days())
        throw InsufficientHistory("need " + std::to_string(lookback) +
                                  " days before index " + std::to_string(day));
    const Eigen::Index n = prices.num_tickers();
    Eigen::VectorXd addv = Eigen::VectorXd::Zero(n);
    for (Eigen::Index u = day - lookback; u < day; ++u)
        addv += prices.volume.col(u).cwiseProduct(prices.close.col(u));
    addv /= static_cast<double>(lookback);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return addv(a) > addv(b); });
    const auto take = std::min<std::size_t>(order.size(),
                                            static_cast<std::size_t>(universe_size));
    UniverseSelection sel;
    sel.rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    sel.addv.resize(static_cast<Eigen::Index>(take));
    for (std::size_t k = 0; k < take; ++k)
        sel.addv(static_cast<Eigen::Index>(k)) = addv(sel.rows[k]);
    return sel;
}

}  // namespace hetrisk
