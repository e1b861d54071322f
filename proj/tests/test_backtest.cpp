#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hetrisk/backtest.hpp"
#include "hetrisk/errors.hpp"
#include "hetrisk/prices.hpp"
#include "hetrisk/stats.hpp"
#include "hetrisk/synthetic.hpp"

using namespace hetrisk;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec(unsigned long long seed = 11) {
    SynthSpec s;
    s.num_tickers = 40;
    s.num_days = 70;
    s.num_sub_industries = 12;
    s.num_industries = 5;
    s.num_sectors = 2;
    s.seed = seed;
    return s;
}

BacktestConfig small_config() {
    BacktestConfig c;
    c.lookback = 10;
    c.universe_size = 30;
    c.rebalance_period = 10;
    c.investment_level = 1e6;
    c.threads = 2;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("returns are the log ratios of adjusted prices") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec());
    const ReturnPanels r = compute_returns(sp.prices);
    REQUIRE(r.overnight.cols() == sp.prices.num_days() - 1);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 5; ++j) {
            CHECK(r.overnight(i, j) ==
                  doctest::Approx(std::log(sp.prices.adj_open(i, j + 1) /
                                           sp.prices.adj_close(i, j)))
                      .epsilon(1e-15));
            CHECK(r.close_to_close(i, j) ==
                  doctest::Approx(std::log(sp.prices.adj_close(i, j + 1) /
                                           sp.prices.adj_close(i, j)))
                      .epsilon(1e-15));
        }
}

TEST_CASE("flat prices give zero returns, a doubled open gives ln 2") {
    const std::vector<std::string> t{"A"};
    const std::vector<std::string> d{"2020-01-01", "2020-01-02"};
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(1, 2, 10.0);
    Eigen::MatrixXd vol = Eigen::MatrixXd::Constant(1, 2, 100.0);
    const PricePanel p = PricePanel::create(t, d, flat, flat, flat, flat, vol);
    const ReturnPanels r = compute_returns(p);
    CHECK(r.overnight(0, 0) == 0.0);
    CHECK(r.close_to_close(0, 0) == 0.0);

    Eigen::MatrixXd open(1, 2), close(1, 2);
    open << 10.0, 20.0;
    close << 10.0, 20.0;
    const PricePanel q = PricePanel::create(t, d, open, close, open, close, vol);
    CHECK(compute_returns(q).overnight(0, 0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("universe selection matches a direct sort oracle") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(3));
    const int d = 10;
    const Eigen::Index day = 25;
    const UniverseSelection sel = select_universe(sp.prices, day, d, 15);
    REQUIRE(sel.rows.size() == 15);
    // Direct oracle: mean dollar volume over the window, descending.
    std::vector<std::pair<double, Eigen::Index>> ranked;
    for (Eigen::Index i = 0; i < sp.prices.num_tickers(); ++i) {
        double a = 0;
        for (Eigen::Index u = day - d; u < day; ++u)
            a += sp.prices.volume(i, u) * sp.prices.close(i, u);
        ranked.emplace_back(a / d, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        return x.first > y.first;
    });
    for (std::size_t k = 0; k < 15; ++k) {
        CHECK(sel.rows[k] == ranked[k].second);
        CHECK(sel.addv(static_cast<Eigen::Index>(k)) ==
              doctest::Approx(ranked[k].first).epsilon(1e-12));
    }
    CHECK(select_universe(sp.prices, day, d, 10000).rows.size() ==
          static_cast<std::size_t>(sp.prices.num_tickers()));
    CHECK_THROWS_AS(select_universe(sp.prices, 5, 10, 10), InsufficientHistory);
}

TEST_CASE("a zero-volume ticker ranks last") {
    const std::vector<std::string> t{"A", "B"};
    const std::vector<std::string> d{"2020-01-01", "2020-01-02", "2020-01-03"};
    Eigen::MatrixXd px = Eigen::MatrixXd::Constant(2, 3, 10.0);
    Eigen::MatrixXd vol(2, 3);
    vol << 0.0, 0.0, 0.0,
        100.0, 100.0, 100.0;
    const PricePanel p = PricePanel::create(t, d, px, px, px, px, vol);
    const UniverseSelection sel = select_universe(p, 2, 2, 2);
    CHECK(sel.rows.front() == 1);
    CHECK(sel.rows.back() == 0);
}

TEST_CASE("summary metrics match the frozen arithmetic oracle") {
    Eigen::VectorXd pnl(5), sh(5);
    pnl << 120.0, -40.0, 85.0, 10.0, -5.0;
    sh << 3000.0, 2500.0, 2600.0, 2800.0, 2700.0;
    const Metrics m = compute_metrics(pnl, sh, 1e4);
    CHECK(m.roc == doctest::Approx(0.8568).epsilon(1e-14));
    CHECK(m.sharpe == doctest::Approx(8.14372879736915).epsilon(1e-13));
    CHECK(m.cps == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("one day, 100 dollars at open 10, close 10.1 gives CPS 5") {
    // Direct arithmetic: P&L = 100 * (10.1/10 - 1) = 1 dollar over
    // 2 * 100 / 10 = 20 shares traded.
    const double h = 100.0, open = 10.0, close = 10.1;
    const double pnl = h * (close / open - 1.0);
    const double shares = 2.0 * h / open;
    CHECK(pnl == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(shares == 20.0);
    CHECK(100.0 * pnl / shares == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("degenerate metric inputs throw") {
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 7.0);
    Eigen::VectorXd sh = Eigen::VectorXd::Constant(4, 100.0);
    CHECK_THROWS_AS(compute_metrics(flat, sh, 1e4), ZeroVariancePnl);
    Eigen::VectorXd pnl(3);
    pnl << 1.0, -2.0, 3.0;
    CHECK_THROWS_AS(compute_metrics(pnl, Eigen::VectorXd::Zero(3), 1e4),
                    ZeroTradedShares);
}

TEST_CASE("price CSV round trip is byte identical") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(4));
    const fs::path p1 = fs::temp_directory_path() / "hetrisk_prices_1.csv";
    const fs::path p2 = fs::temp_directory_path() / "hetrisk_prices_2.csv";
    sp.prices.save_csv(p1);
    PricePanel::load_csv(p1).save_csv(p2);
    CHECK(slurp(p1) == slurp(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("price panel validation") {
    const std::vector<std::string> t{"A"};
    const std::vector<std::string> d{"2020-01-01", "2020-01-02"};
    Eigen::MatrixXd px = Eigen::MatrixXd::Constant(1, 2, 10.0);
    Eigen::MatrixXd vol = Eigen::MatrixXd::Constant(1, 2, 1.0);
    Eigen::MatrixXd bad_adj(1, 2);
    bad_adj << 10.0, 5.0;  // close adjusted, open not: inconsistent factor
    CHECK_THROWS_AS(PricePanel::create(t, d, px, px, px, bad_adj, vol), InvalidPanel);
    CHECK_THROWS_AS(PricePanel::create(t, {"2020-01-02", "2020-01-01"}, px, px, px,
                                       px, vol),
                    InvalidPanel);
    Eigen::MatrixXd neg = px;
    neg(0, 0) = -1.0;
    CHECK_THROWS_AS(PricePanel::create(t, d, neg, px, neg, px, vol), InvalidPanel);
}

TEST_CASE("an incomplete price grid is rejected") {
    const fs::path p = fs::temp_directory_path() / "hetrisk_gap.csv";
    {
        std::ofstream out(p);
        out << "ticker,date,open,close,adj_open,adj_close,volume\n"
            << "A,2020-01-01,10,10,10,10,100\n"
            << "A,2020-01-02,10,10,10,10,100\n"
            << "B,2020-01-01,10,10,10,10,100\n";  // B missing on 01-02
    }
    CHECK_THROWS_AS(PricePanel::load_csv(p), MissingPrice);
    fs::remove(p);
}

TEST_CASE("synthetic generation is deterministic and honors the spec") {
    const SynthSpec spec = small_spec(9);
    const SyntheticPanel a = generate_synthetic_panel(spec);
    const SyntheticPanel b = generate_synthetic_panel(spec);
    CHECK(a.prices.adj_close == b.prices.adj_close);
    CHECK(a.prices.volume == b.prices.volume);
    CHECK(a.hierarchy.tickers() == b.hierarchy.tickers());
    CHECK(a.hierarchy.num_clusters(0) == spec.num_sub_industries);
    CHECK(a.hierarchy.num_clusters(1) == spec.num_industries);
    CHECK(a.hierarchy.num_clusters(2) == spec.num_sectors);
    CHECK(a.prices.num_days() == spec.num_days);

    SynthSpec bad = spec;
    bad.num_days = 1;
    CHECK_THROWS_AS(generate_synthetic_panel(bad), InvalidSpec);
}

TEST_CASE("synthetic spec JSON round trip and unknown-key rejection") {
    const SynthSpec spec = small_spec(5);
    const SynthSpec back = SynthSpec::from_json(spec.to_json());
    CHECK(back.to_json() == spec.to_json());
    CHECK_THROWS_AS(SynthSpec::from_json("{\"num_tickerz\": 10}"), InvalidSpec);
    CHECK_THROWS_AS(SynthSpec::from_json("not json"), ParseError);
}

TEST_CASE("zero factor volatilities give weak cross-sectional correlation") {
    SynthSpec spec = small_spec(6);
    spec.sector_vol = spec.industry_vol = spec.sub_industry_vol = 0.0;
    spec.reversal_strength = 0.0;
    spec.num_days = 250;
    const SyntheticPanel sp = generate_synthetic_panel(spec);
    const ReturnPanels r = compute_returns(sp.prices);
    std::vector<std::string> dates(sp.prices.dates.begin() + 1, sp.prices.dates.end());
    const CovarianceResult cr = sample_covariance(
        ReturnsPanel::create(sp.prices.tickers, dates, r.close_to_close));
    double acc = 0;
    int cnt = 0;
    for (Eigen::Index i = 0; i < cr.cor.rows(); ++i)
        for (Eigen::Index j = i + 1; j < cr.cor.cols(); ++j) {
            acc += std::abs(cr.cor(i, j));
            ++cnt;
        }
    CHECK(acc / cnt < 3.0 / std::sqrt(250.0));
}

TEST_CASE("planted within-cluster correlation is recovered") {
    SynthSpec spec = small_spec(14);
    spec.num_days = 600;
    spec.idio_vol = 0.01;
    spec.sub_industry_vol = 0.01;  // within-sub correlation target 0.5
    spec.sector_vol = spec.industry_vol = 0.0;
    spec.reversal_strength = 0.0;
    spec.vol_dispersion = 0.0;
    const SyntheticPanel sp = generate_synthetic_panel(spec);
    const ReturnPanels r = compute_returns(sp.prices);
    std::vector<std::string> dates(sp.prices.dates.begin() + 1, sp.prices.dates.end());
    const CovarianceResult cr = sample_covariance(
        ReturnsPanel::create(sp.prices.tickers, dates, r.close_to_close));
    double acc = 0;
    int cnt = 0;
    const auto& assign = sp.hierarchy.assignment(0);
    for (Eigen::Index i = 0; i < cr.cor.rows(); ++i)
        for (Eigen::Index j = i + 1; j < cr.cor.cols(); ++j)
            if (assign[static_cast<std::size_t>(i)] == assign[static_cast<std::size_t>(j)]) {
                acc += cr.cor(i, j);
                ++cnt;
            }
    REQUIRE(cnt > 0);
    CHECK(std::abs(acc / cnt - 0.5) < 0.1);
}

TEST_CASE("horse race P&L equals a direct recomputation from holdings and fills") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(21));
    const auto reports =
        run_horserace(sp.prices, sp.hierarchy, small_config(), all_variants());
    REQUIRE(reports.size() == 5);
    for (const auto& rep : reports) {
        REQUIRE(!rep.days.empty());
        Eigen::Index s = static_cast<Eigen::Index>(small_config().lookback) + 1;
        for (const auto& day : rep.days) {
            CHECK(day.date == sp.prices.dates[static_cast<std::size_t>(s)]);
            double pnl = 0, shares = 0;
            for (std::size_t a = 0; a < day.universe_rows.size(); ++a) {
                const Eigen::Index i = day.universe_rows[a];
                const double h = day.holdings(static_cast<Eigen::Index>(a));
                pnl += h * (sp.prices.close(i, s) / sp.prices.open(i, s) - 1.0);
                shares += 2.0 * std::abs(h) / sp.prices.open(i, s);
            }
            CHECK(day.pnl == doctest::Approx(pnl).epsilon(1e-12));
            CHECK(day.shares_traded == doctest::Approx(shares).epsilon(1e-12));
            ++s;
        }
    }
}

TEST_CASE("every variant is neutral, normalized and within bounds daily") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(22));
    const BacktestConfig cfg = small_config();
    const auto reports = run_horserace(sp.prices, sp.hierarchy, cfg, all_variants());
    for (const auto& rep : reports) {
        CHECK(rep.max_abs_net() < 1e-8);
        CHECK(rep.max_abs_gross_error() < 1e-5);
        CHECK(rep.total_bound_violations() == 0);
    }
}

TEST_CASE("single-ticker sub-industry holdings are exactly zero for indicator variants") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(23));
    const BacktestConfig cfg = small_config();
    const auto reports = run_horserace(sp.prices, sp.hierarchy, cfg,
                                       {Variant::reg_ind, Variant::reg_het});
    bool saw_singleton = false;
    for (const auto& rep : reports)
        for (const auto& day : rep.days) {
            const auto hier = sp.hierarchy.restrict_to(day.universe_rows);
            for (const Eigen::Index local : hier.singleton_tickers()) {
                saw_singleton = true;
                CHECK(day.holdings(local) == 0.0);
            }
        }
    CHECK(saw_singleton);
}

TEST_CASE("results are independent of the thread count") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(24));
    BacktestConfig c1 = small_config();
    c1.threads = 1;
    BacktestConfig c4 = small_config();
    c4.threads = 4;
    const auto r1 = run_horserace(sp.prices, sp.hierarchy, c1, all_variants());
    const auto r4 = run_horserace(sp.prices, sp.hierarchy, c4, all_variants());
    for (std::size_t v = 0; v < r1.size(); ++v) {
        REQUIRE(r1[v].days.size() == r4[v].days.size());
        for (std::size_t s = 0; s < r1[v].days.size(); ++s) {
            CHECK(r1[v].days[s].pnl == r4[v].days[s].pnl);
            CHECK((r1[v].days[s].holdings - r4[v].days[s].holdings)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("tampering with future prices does not change earlier results") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(25));
    const BacktestConfig cfg = small_config();
    const auto base = run_horserace(sp.prices, sp.hierarchy, cfg, {Variant::opt_het});

    PricePanel tampered = sp.prices;
    const Eigen::Index cut = 40;  // corrupt everything from this day on
    for (Eigen::Index j = cut; j < tampered.num_days(); ++j) {
        tampered.open.col(j) *= 3.0;
        tampered.close.col(j) *= 3.0;
        tampered.adj_open.col(j) *= 3.0;
        tampered.adj_close.col(j) *= 3.0;
        tampered.volume.col(j) *= 7.0;
    }
    const auto mod = run_horserace(tampered, sp.hierarchy, cfg, {Variant::opt_het});
    const Eigen::Index first_day = cfg.lookback + 1;
    for (std::size_t s = 0; s + first_day < static_cast<std::size_t>(cut); ++s) {
        CHECK(base[0].days[s].pnl == mod[0].days[s].pnl);
        CHECK((base[0].days[s].holdings - mod[0].days[s].holdings)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}

TEST_CASE("zero overnight moves give zero holdings and zero P&L") {
    // Open equals the previous close everywhere: the alpha vanishes.
    const int n = 6, t = 30;
    std::vector<std::string> tickers, dates;
    for (int i = 0; i < n; ++i) tickers.push_back("Z" + std::to_string(i));
    Eigen::MatrixXd open(n, t), close(n, t), vol(n, t);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i) close(i, 0) = 20.0 + i;
    for (int j = 0; j < t; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "2021-02-%02d", j + 1);
        dates.push_back(std::string(buf));
        for (int i = 0; i < n; ++i) {
            open(i, j) = j == 0 ? close(i, 0) : close(i, j - 1);
            close(i, j) = open(i, j) * std::exp(0.01 * g(rng));
            vol(i, j) = 1000.0;
        }
    }
    const PricePanel prices =
        PricePanel::create(tickers, dates, open, close, open, close, vol);
    std::vector<std::string> sub{"a", "a", "b", "b", "c", "c"};
    std::vector<std::string> sec{"x", "x", "x", "x", "x", "x"};
    const IndustryHierarchy hier = IndustryHierarchy::from_labels(
        tickers, {sub, sec}, {"sub_industry", "sector"});
    BacktestConfig cfg;
    cfg.lookback = 5;
    cfg.universe_size = 6;
    cfg.rebalance_period = 5;
    cfg.investment_level = 1e4;
    cfg.bound_fraction = std::nullopt;
    cfg.threads = 1;
    const auto reports = run_horserace(prices, hier, cfg, {Variant::reg_ind});
    for (const auto& day : reports[0].days) {
        CHECK(day.holdings.cwiseAbs().maxCoeff() == 0.0);
        CHECK(day.pnl == 0.0);
    }
    CHECK(reports[0].summary.roc == 0.0);
    CHECK(reports[0].summary.sharpe == 0.0);
    CHECK(reports[0].summary.cps == 0.0);
}

TEST_CASE("report files are written with the documented shape") {
    const SyntheticPanel sp = generate_synthetic_panel(small_spec(26));
    const auto reports =
        run_horserace(sp.prices, sp.hierarchy, small_config(), {Variant::opt_pc});
    const fs::path csv = fs::temp_directory_path() / "hetrisk_rep.csv";
    const fs::path js = fs::temp_directory_path() / "hetrisk_rep.json";
    save_report_csv(reports[0], csv);
    save_summary_json(reports[0], js);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "date,pnl,shares_traded,net_weight,gross_error,bound_violations");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == reports[0].days.size());
    const std::string j = slurp(js);
    CHECK(j.find("\"variant\": \"opt_pc\"") != std::string::npos);
    CHECK(j.find("\"roc\"") != std::string::npos);
    CHECK(j.find("\"universe_size\"") != std::string::npos);
    fs::remove(csv);
    fs::remove(js);
}

TEST_CASE("variant names round trip and config validation rejects bad values") {
    for (Variant v : all_variants()) CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS_AS(variant_from_name("reg_foo"), InvalidSpec);
    BacktestConfig c;
    c.lookback = 1;
    CHECK_THROWS_AS(c.validate(), InvalidSpec);
    c = BacktestConfig{};
    c.bound_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidSpec);
}
