/**
 * Command line front end: synthetic data generation, model building,
 * one-shot optimization, the horse-race backtest, and model verification.
 *
 * Exit codes: 0 success, 2 for input problems (unreadable or malformed
 * files, bad configuration), 1 for computation failures.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hetrisk/backtest.hpp"
#include "hetrisk/errors.hpp"
#include "hetrisk/factor_model.hpp"
#include "hetrisk/heterotic.hpp"
#include "hetrisk/optimizer.hpp"
#include "hetrisk/parallel.hpp"
#include "hetrisk/pc_model.hpp"
#include "hetrisk/prices.hpp"
#include "hetrisk/stats.hpp"
#include "hetrisk/synthetic.hpp"

namespace fs = std::filesystem;
using namespace hetrisk;

namespace {

ReturnsPanel close_to_close_panel(const PricePanel& prices) {
    const ReturnPanels rets = compute_returns(prices);
    std::vector<std::string> dates(prices.dates.begin() + 1, prices.dates.end());
    return ReturnsPanel::create(prices.tickers, std::move(dates), rets.close_to_close);
}

/// key=value configuration file; '#' starts a comment, blank lines allowed.
std::map<std::string, std::string> read_kv_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": duplicate key '" + key + "'");
    }
    return kv;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InvalidSpec("config key '" + key + "': expected true/false, got '" + value + "'");
}

void apply_backtest_config(BacktestConfig& cfg, const fs::path& path) {
    auto kv = read_kv_config(path);
    const auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    try {
        if (auto v = take("lookback")) cfg.lookback = std::stoi(*v);
        if (auto v = take("universe_size")) cfg.universe_size = std::stoi(*v);
        if (auto v = take("rebalance_period")) cfg.rebalance_period = std::stoi(*v);
        if (auto v = take("investment_level")) cfg.investment_level = std::stod(*v);
        if (auto v = take("bound_fraction"))
            cfg.bound_fraction =
                *v == "none" ? std::nullopt : std::optional<double>(std::stod(*v));
        if (auto v = take("daily_loadings")) cfg.daily_loadings = parse_bool("daily_loadings", *v);
        if (auto v = take("market_factor")) cfg.market_factor = parse_bool("market_factor", *v);
        if (auto v = take("threads")) cfg.threads = std::stoi(*v);
    } catch (const std::invalid_argument&) {
        throw ParseError(path.string() + ": non-numeric value in config");
    }
    if (!kv.empty())
        throw InvalidSpec("unknown config key '" + kv.begin()->first + "' in " +
                          path.string());
}

Eigen::VectorXd load_alpha_csv(const fs::path& path,
                               const std::vector<std::string>& tickers) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ticker,alpha")
        throw ParseError(path.string() + ": expected header 'ticker,alpha'");
    std::map<std::string, double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad row");
        try {
            values[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": not a number");
        }
    }
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(tickers.size()));
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        const auto it = values.find(tickers[i]);
        if (it == values.end())
            throw InvalidSpec("alpha file has no entry for ticker " + tickers[i]);
        alpha(static_cast<Eigen::Index>(i)) = it->second;
    }
    return alpha;
}

void write_diagnostics_csv(const FactorModel& model, const fs::path& path) {
    // Specific-variance summary in correlation units, Table-style.
    Eigen::VectorXd spec_var(model.spec_risk.size());
    for (Eigen::Index i = 0; i < spec_var.size(); ++i) {
        const double total = model.cov_mat(i, i);
        spec_var(i) = total > 0.0 ? model.spec_risk(i) * model.spec_risk(i) / total : 0.0;
    }
    const Quantiles q = summarize(spec_var);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char buf[256];
    out << "kind,num_factors,min,q1,median,mean,q3,max\n";
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  model.meta.kind.c_str(), model.meta.num_factors, q.min, q.q1,
                  q.median, q.mean, q.q3, q.max);
    out << buf;
    if (!out) throw IoError("failed writing " + path.string());
}

int run_verify(const fs::path& model_path, const fs::path& prices_path) {
    const FactorModel model = load_model_json(model_path);
    const Eigen::Index n = model.cov_mat.rows();
    bool ok = true;
    const auto report = [&](const char* name, bool pass, double value) {
        std::printf("%-28s %s  (%.3g)\n", name, pass ? "ok" : "FAIL", value);
        ok = ok && pass;
    };

    const double asym = (model.cov_mat - model.cov_mat.transpose()).cwiseAbs().maxCoeff();
    report("covariance symmetric", asym < 1e-10, asym);
    const double min_diag = model.cov_mat.diagonal().minCoeff();
    report("variances positive", min_diag > 0.0, min_diag);

    Eigen::MatrixXd recon = model.fac_load * model.fac_cov * model.fac_load.transpose();
    recon.diagonal() += model.spec_risk.array().square().matrix();
    const double recon_err = (recon - model.cov_mat).cwiseAbs().maxCoeff() /
                             std::max(1.0, model.cov_mat.cwiseAbs().maxCoeff());
    report("factor form reconstructs", recon_err < 1e-10, recon_err);

    const EigenSystem es = sym_eigen(model.cov_mat);
    const double min_eig = es.eigenvalues(n - 1);
    if (model.has_inverse()) {
        report("positive definite", min_eig > 0.0, min_eig);
        const double inv_err =
            (model.cov_mat * model.inv_cov - Eigen::MatrixXd::Identity(n, n))
                .cwiseAbs()
                .maxCoeff();
        report("inverse consistent", inv_err < 1e-8, inv_err);
    } else {
        report("positive semi-definite", min_eig > -1e-10 * std::max(1.0, es.eigenvalues(0)),
               min_eig);
    }

    if (!prices_path.empty()) {
        const PricePanel prices = PricePanel::load_csv(prices_path);
        if (prices.tickers != model.tickers)
            throw InvalidSpec("price panel tickers do not match the model");
        const ReturnsPanel panel = close_to_close_panel(prices);
        const CovarianceResult cr = sample_covariance(panel);
        double max_rel = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            max_rel = std::max(max_rel,
                               std::abs(model.cov_mat(i, i) - cr.cov(i, i)) / cr.cov(i, i));
        report("total variance matched", max_rel < 1e-8, max_rel);
        const TotalVarianceCheck tv = verify_total_variance(model, panel);
        report("loadings diagonal exact", tv.max_abs_diag < 1e-8, tv.max_abs_diag);
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factor risk models: nested industry and principal-component "
                 "covariances, constrained Sharpe optimization, intraday backtests"};
    app.require_subcommand(1);
    app.fallthrough(true);  // global flags may follow the subcommand
    int threads = 0;
    app.add_option("--threads", threads,
                   "worker threads (default: HETRISK_THREADS env, then all cores)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic price panel");
    fs::path synth_spec_path, synth_out = ".";
    std::optional<unsigned long long> synth_seed;
    std::optional<int> synth_tickers, synth_days;
    synth->add_option("--spec", synth_spec_path, "JSON generator spec (defaults used if omitted)");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "override the spec seed");
    synth->add_option("--tickers", synth_tickers, "override the ticker count");
    synth->add_option("--days", synth_days, "override the day count");

    // build
    auto* build = app.add_subcommand("build", "build a risk model from prices");
    std::string build_kind = "heterotic";
    fs::path build_prices, build_hier, build_out = "model.json", build_diag;
    std::optional<int> build_k;
    bool build_use_cov = false, build_market = false, build_drop = false;
    build->add_option("--kind", build_kind, "pc or heterotic")
        ->check(CLI::IsMember({"pc", "heterotic"}));
    build->add_option("--prices", build_prices, "price CSV")->required();
    build->add_option("--hierarchy", build_hier, "classification CSV (heterotic)");
    build->add_option("--out", build_out, "model JSON output path");
    build->add_option("--diagnostics", build_diag, "specific-variance summary CSV");
    build->add_option("--k", build_k, "factor count override (pc)");
    build->add_flag("--use-cov", build_use_cov,
                    "decompose the covariance instead of the correlation (pc)");
    build->add_flag("--market-factor", build_market,
                    "single top-level factor (heterotic)");
    build->add_flag("--drop-singletons", build_drop,
                    "prune single-ticker clusters (heterotic)");

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Sharpe-optimal dollar-neutral weights");
    fs::path opt_model, opt_alpha, opt_out = "holdings.csv";
    std::optional<double> opt_bound;
    optimize->add_option("--model", opt_model, "model JSON")->required();
    optimize->add_option("--alpha", opt_alpha, "alpha CSV (ticker,alpha)")->required();
    optimize->add_option("--out", opt_out, "holdings CSV output path");
    optimize->add_option("--bound", opt_bound, "symmetric weight bound per name");

    // backtest
    auto* backtest = app.add_subcommand("backtest", "run the horse race");
    fs::path bt_prices, bt_hier, bt_config, bt_out = ".";
    std::string bt_variants = "all";
    BacktestConfig bt_cfg;
    std::optional<int> bt_lookback, bt_universe, bt_rebalance;
    std::optional<double> bt_invest;
    std::optional<std::string> bt_bounds;
    bool bt_interval_loadings = false, bt_market = false;
    backtest->add_option("--prices", bt_prices, "price CSV")->required();
    backtest->add_option("--hierarchy", bt_hier, "classification CSV")->required();
    backtest->add_option("--config", bt_config, "key=value config file");
    backtest->add_option("--out", bt_out, "output directory");
    backtest->add_option("--variants", bt_variants,
                         "comma list of reg_pc,reg_ind,reg_het,opt_pc,opt_het or 'all'");
    backtest->add_option("--lookback", bt_lookback, "observation and ADDV window");
    backtest->add_option("--universe-size", bt_universe, "top tickers by ADDV");
    backtest->add_option("--rebalance", bt_rebalance, "days between refreshes");
    backtest->add_option("--investment", bt_invest, "gross dollar investment level");
    backtest->add_option("--bounds", bt_bounds,
                         "holding bound as a fraction of ADDV, or 'none'");
    backtest->add_flag("--interval-loadings", bt_interval_loadings,
                       "freeze reg_pc/reg_het loadings per rebalance interval");
    backtest->add_flag("--market-factor", bt_market, "single top-level factor");

    // verify
    auto* verify = app.add_subcommand("verify", "check model invariants");
    fs::path verify_model, verify_prices;
    verify->add_option("--model", verify_model, "model JSON")->required();
    verify->add_option("--prices", verify_prices,
                       "price CSV for total-variance checks (optional)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            SynthSpec spec;
            if (!synth_spec_path.empty()) spec = SynthSpec::load_json(synth_spec_path);
            if (synth_seed) spec.seed = *synth_seed;
            if (synth_tickers) spec.num_tickers = *synth_tickers;
            if (synth_days) spec.num_days = *synth_days;
            spec.validate();
            const SyntheticPanel panel = generate_synthetic_panel(spec);
            fs::create_directories(synth_out);
            panel.prices.save_csv(synth_out / "prices.csv");
            panel.hierarchy.save_csv(synth_out / "hierarchy.csv");
            std::ofstream spec_out(synth_out / "spec.json", std::ios::binary);
            spec_out << spec.to_json();
            if (!spec_out) throw IoError("failed writing spec.json");
            std::cout << "wrote " << (synth_out / "prices.csv").string() << ", "
                      << (synth_out / "hierarchy.csv").string() << "\n";
        } else if (*build) {
            const PricePanel prices = PricePanel::load_csv(build_prices);
            const ReturnsPanel panel = close_to_close_panel(prices);
            FactorModel model;
            if (build_kind == "pc") {
                model = build_pc_model(panel, !build_use_cov, build_k);
            } else {
                if (build_hier.empty())
                    throw InvalidSpec("--hierarchy is required for --kind heterotic");
                const IndustryHierarchy hier = IndustryHierarchy::from_csv(build_hier);
                model = build_heterotic_model(panel, hier, {build_market, build_drop});
            }
            save_model_json(model, build_out);
            if (!build_diag.empty()) write_diagnostics_csv(model, build_diag);
            std::cout << "wrote " << build_out.string() << " (" << model.meta.kind
                      << ", " << model.meta.num_factors << " factors)\n";
        } else if (*optimize) {
            const FactorModel model = load_model_json(opt_model);
            if (!model.has_inverse())
                throw InvalidSpec("model has no inverse; rebuild with fewer factors");
            const Eigen::VectorXd alpha = load_alpha_csv(opt_alpha, model.tickers);
            const Eigen::Index n = alpha.size();
            Eigen::VectorXd w;
            if (opt_bound) {
                const Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, *opt_bound);
                w = optimize_bounded(-alpha, ConstraintSet::dollar_neutrality(n),
                                     model.inv_cov, ub, -ub, {})
                        .weights;
            } else {
                w = optimize_unbounded(alpha, model.inv_cov).weights;
            }
            std::ofstream out(opt_out, std::ios::binary);
            if (!out) throw IoError("cannot open " + opt_out.string() + " for writing");
            out << "ticker,weight\n";
            char buf[96];
            for (Eigen::Index i = 0; i < n; ++i) {
                std::snprintf(buf, sizeof(buf), "%s,%.17g\n",
                              model.tickers[static_cast<std::size_t>(i)].c_str(), w(i));
                out << buf;
            }
            if (!out) throw IoError("failed writing " + opt_out.string());
            std::cout << "wrote " << opt_out.string() << "\n";
        } else if (*backtest) {
            if (!bt_config.empty()) apply_backtest_config(bt_cfg, bt_config);
            if (bt_lookback) bt_cfg.lookback = *bt_lookback;
            if (bt_universe) bt_cfg.universe_size = *bt_universe;
            if (bt_rebalance) bt_cfg.rebalance_period = *bt_rebalance;
            if (bt_invest) bt_cfg.investment_level = *bt_invest;
            if (bt_bounds)
                bt_cfg.bound_fraction = *bt_bounds == "none"
                                            ? std::nullopt
                                            : std::optional<double>(std::stod(*bt_bounds));
            if (bt_interval_loadings) bt_cfg.daily_loadings = false;
            if (bt_market) bt_cfg.market_factor = true;
            if (threads > 0) bt_cfg.threads = threads;

            std::vector<Variant> variants;
            if (bt_variants == "all") {
                variants = all_variants();
            } else {
                std::stringstream ss(bt_variants);
                std::string name;
                while (std::getline(ss, name, ','))
                    variants.push_back(variant_from_name(name));
            }

            const PricePanel prices = PricePanel::load_csv(bt_prices);
            const IndustryHierarchy hier = IndustryHierarchy::from_csv(bt_hier);
            const auto reports = run_horserace(prices, hier, bt_cfg, variants);
            fs::create_directories(bt_out);
            for (const auto& rep : reports) {
                const std::string name = variant_name(rep.variant);
                save_report_csv(rep, bt_out / ("pnl_" + name + ".csv"));
                save_summary_json(rep, bt_out / ("summary_" + name + ".json"));
                std::printf("%-8s roc %8.2f%%  sharpe %7.2f  cps %6.2f  "
                            "net %.2e  gross_err %.2e  bound_viol %ld\n",
                            name.c_str(), 100.0 * rep.summary.roc, rep.summary.sharpe,
                            rep.summary.cps, rep.max_abs_net(),
                            rep.max_abs_gross_error(), rep.total_bound_violations());
            }
        } else if (*verify) {
            return run_verify(verify_model, verify_prices);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidSpec& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidPanel& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MissingPrice& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
