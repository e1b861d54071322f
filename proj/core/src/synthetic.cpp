#include "hetrisk/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "hetrisk/errors.hpp"

namespace hetrisk {

namespace {

using json = nlohmann::ordered_json;

std::chrono::sys_days parse_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw InvalidSpec("start_date must be YYYY-MM-DD, got '" + s + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) throw InvalidSpec("start_date '" + s + "' is not a calendar date");
    return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

std::vector<std::string> trading_dates(const std::string& start, int count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    std::chrono::sys_days day = parse_date(start);
    while (static_cast<int>(out.size()) < count) {
        const std::chrono::weekday wd{day};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday)
            out.push_back(format_date(day));
        day += std::chrono::days{1};
    }
    return out;
}

std::string padded(const char* prefix, int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
    return buf;
}

/// Nested assignment of `units` to `clusters`: the first `clusters` units
/// are pinned one per cluster so none is empty, the rest draw uniformly.
std::vector<int> nested_assignment(int units, int clusters, std::mt19937_64& rng) {
    std::vector<int> assign(static_cast<std::size_t>(units));
    std::uniform_int_distribution<int> pick(0, clusters - 1);
    for (int u = 0; u < units; ++u)
        assign[static_cast<std::size_t>(u)] = u < clusters ? u : pick(rng);
    return assign;
}

}  // namespace

void SynthSpec::validate() const {
    if (num_days < 2) throw InvalidSpec("num_days must be at least 2");
    if (num_sectors < 1 || num_industries <= num_sectors ||
        num_sub_industries <= num_industries || num_tickers <= num_sub_industries)
        throw InvalidSpec("cluster counts must nest strictly: N > sub_industries > "
                          "industries > sectors >= 1");
    if (sector_vol < 0 || industry_vol < 0 || sub_industry_vol < 0 || idio_vol <= 0)
        throw InvalidSpec("volatilities must be non-negative with idio_vol > 0");
    if (!(overnight_fraction > 0.0 && overnight_fraction < 1.0))
        throw InvalidSpec("overnight_fraction must lie in (0, 1)");
    if (reversal_strength < 0) throw InvalidSpec("reversal_strength must be non-negative");
    if (vol_dispersion < 0 || volume_dispersion < 0)
        throw InvalidSpec("dispersions must be non-negative");
    if (base_price <= 0 || base_volume <= 0)
        throw InvalidSpec("base_price and base_volume must be positive");
    parse_date(start_date);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("synthetic spec: ") + e.what());
    }
    SynthSpec s;
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            try {
                field = j.at(key).get<std::decay_t<decltype(field)>>();
            } catch (const json::exception& e) {
                throw ParseError(std::string("synthetic spec key '") + key + "': " + e.what());
            }
            j.erase(key);
        }
    };
    get("num_tickers", s.num_tickers);
    get("num_days", s.num_days);
    get("num_sub_industries", s.num_sub_industries);
    get("num_industries", s.num_industries);
    get("num_sectors", s.num_sectors);
    get("sector_vol", s.sector_vol);
    get("industry_vol", s.industry_vol);
    get("sub_industry_vol", s.sub_industry_vol);
    get("idio_vol", s.idio_vol);
    get("vol_dispersion", s.vol_dispersion);
    get("overnight_fraction", s.overnight_fraction);
    get("reversal_strength", s.reversal_strength);
    get("base_price", s.base_price);
    get("base_volume", s.base_volume);
    get("volume_dispersion", s.volume_dispersion);
    get("start_date", s.start_date);
    get("seed", s.seed);
    if (!j.empty())
        throw InvalidSpec("unknown synthetic spec key '" + j.begin().key() + "'");
    s.validate();
    return s;
}

SynthSpec SynthSpec::load_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string SynthSpec::to_json() const {
    json j;
    j["num_tickers"] = num_tickers;
    j["num_days"] = num_days;
    j["num_sub_industries"] = num_sub_industries;
    j["num_industries"] = num_industries;
    j["num_sectors"] = num_sectors;
    j["sector_vol"] = sector_vol;
    j["industry_vol"] = industry_vol;
    j["sub_industry_vol"] = sub_industry_vol;
    j["idio_vol"] = idio_vol;
    j["vol_dispersion"] = vol_dispersion;
    j["overnight_fraction"] = overnight_fraction;
    j["reversal_strength"] = reversal_strength;
    j["base_price"] = base_price;
    j["base_volume"] = base_volume;
    j["volume_dispersion"] = volume_dispersion;
    j["start_date"] = start_date;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

SyntheticPanel generate_synthetic_panel(const SynthSpec& spec) {
    spec.validate();
    const int n = spec.num_tickers;
    const int t = spec.num_days;
    const int nsub = spec.num_sub_industries;
    const int nind = spec.num_industries;
    const int nsec = spec.num_sectors;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Classification first, then static per-ticker attributes, then the
    // day-by-day shocks; the draw order is part of the determinism contract.
    const std::vector<int> sub_of_ticker = nested_assignment(n, nsub, rng);
    const std::vector<int> ind_of_sub = nested_assignment(nsub, nind, rng);
    const std::vector<int> sec_of_ind = nested_assignment(nind, nsec, rng);

    std::vector<std::string> tickers(static_cast<std::size_t>(n));
    std::vector<std::string> sub_labels(static_cast<std::size_t>(n));
    std::vector<std::string> ind_labels(static_cast<std::size_t>(n));
    std::vector<std::string> sec_labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        tickers[ui] = padded("T", i + 1, 5);
        const int sub = sub_of_ticker[ui];
        const int ind = ind_of_sub[static_cast<std::size_t>(sub)];
        const int sec = sec_of_ind[static_cast<std::size_t>(ind)];
        sub_labels[ui] = padded("SUB", sub + 1, 4);
        ind_labels[ui] = padded("IND", ind + 1, 3);
        sec_labels[ui] = padded("SEC", sec + 1, 2);
    }

    Eigen::VectorXd vol_mult(n), price0(n), volume_mult(n);
    for (int i = 0; i < n; ++i) {
        vol_mult(i) = std::exp(spec.vol_dispersion * gauss(rng));
        price0(i) = spec.base_price * std::exp(0.8 * gauss(rng));
        volume_mult(i) = std::exp(spec.volume_dispersion * gauss(rng));
    }

    Eigen::MatrixXd adj_open(n, t), adj_close(n, t), volume(n, t);
    const double sf = std::sqrt(spec.overnight_fraction);
    const double sg = std::sqrt(1.0 - spec.overnight_fraction);

    Eigen::VectorXd sec_shock(nsec), ind_shock(nind), sub_shock(nsub);
    Eigen::VectorXd prev_close = price0;
    for (int day = 0; day < t; ++day) {
        // Overnight leg.
        for (int c = 0; c < nsec; ++c) sec_shock(c) = gauss(rng);
        for (int c = 0; c < nind; ++c) ind_shock(c) = gauss(rng);
        for (int c = 0; c < nsub; ++c) sub_shock(c) = gauss(rng);
        Eigen::VectorXd o(n), o_idio(n);
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const int sub = sub_of_ticker[ui];
            const int ind = ind_of_sub[static_cast<std::size_t>(sub)];
            const int sec = sec_of_ind[static_cast<std::size_t>(ind)];
            const double idio = spec.idio_vol * gauss(rng);
            const double common = spec.sector_vol * sec_shock(sec) +
                                  spec.industry_vol * ind_shock(ind) +
                                  spec.sub_industry_vol * sub_shock(sub);
            o_idio(i) = vol_mult(i) * sf * idio;
            o(i) = vol_mult(i) * sf * common + o_idio(i);
        }
        // Intraday leg, with the planted reversal of the overnight
        // idiosyncratic move.
        for (int c = 0; c < nsec; ++c) sec_shock(c) = gauss(rng);
        for (int c = 0; c < nind; ++c) ind_shock(c) = gauss(rng);
        for (int c = 0; c < nsub; ++c) sub_shock(c) = gauss(rng);
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const int sub = sub_of_ticker[ui];
            const int ind = ind_of_sub[static_cast<std::size_t>(sub)];
            const int sec = sec_of_ind[static_cast<std::size_t>(ind)];
            const double idio = spec.idio_vol * gauss(rng);
            const double common = spec.sector_vol * sec_shock(sec) +
                                  spec.industry_vol * ind_shock(ind) +
                                  spec.sub_industry_vol * sub_shock(sub);
            d(i) = vol_mult(i) * sg * (common + idio) -
                   spec.reversal_strength * o_idio(i);
        }

        for (int i = 0; i < n; ++i) {
            const double ao = day == 0 ? prev_close(i) : prev_close(i) * std::exp(o(i));
            const double ac = ao * std::exp(d(i));
            adj_open(i, day) = ao;
            adj_close(i, day) = ac;
            prev_close(i) = ac;
            volume(i, day) = std::round(spec.base_volume * volume_mult(i) *
                                        std::exp(0.3 * gauss(rng)));
        }
    }

    SyntheticPanel out{
        PricePanel::create(tickers, trading_dates(spec.start_date, t), adj_open,
                           adj_close, adj_open, adj_close, volume),
        IndustryHierarchy::from_labels(tickers, {sub_labels, ind_labels, sec_labels},
                                       {"sub_industry", "industry", "sector"})};
    return out;
}

}  // namespace hetrisk
