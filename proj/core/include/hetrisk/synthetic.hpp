/**
 * @file synthetic.hpp
 * @brief Deterministic synthetic price panels with a nested industry
 *        structure and a planted overnight-reversal signal.
 */

#pragma once

#include <filesystem>
#include <string>

#include "hetrisk/hierarchy.hpp"
#include "hetrisk/prices.hpp"

namespace hetrisk {

/**
 * Generating process: each ticker carries a lognormal volatility multiplier
 * and belongs to one sub-industry nested in one industry nested in one
 * sector. Daily log-returns are sums of sector, industry, sub-industry and
 * idiosyncratic Gaussian shocks, split into an overnight and an intraday
 * leg. The intraday leg subtracts reversal_strength times the overnight
 * idiosyncratic shock, which plants a mean-reversion alpha in close-to-open
 * returns. Unadjusted prices equal adjusted prices (no splits).
 */
struct SynthSpec {
    int num_tickers = 100;
    int num_days = 60;
    int num_sub_industries = 20;  ///< must nest: N > sub > ind > sec >= 1
    int num_industries = 8;
    int num_sectors = 3;

    double sector_vol = 0.006;  ///< daily shock scales, log-return units
    double industry_vol = 0.005;
    double sub_industry_vol = 0.007;
    double idio_vol = 0.014;
    double vol_dispersion = 0.35;     ///< sigma of the per-ticker lognormal multiplier
    double overnight_fraction = 0.3;  ///< variance share of the overnight leg
    double reversal_strength = 0.5;   ///< planted intraday reversal of overnight idio moves

    double base_price = 40.0;
    double base_volume = 1.0e6;       ///< shares; per-ticker lognormal dispersion applies
    double volume_dispersion = 1.2;

    std::string start_date = "2020-01-06";  ///< first trading day, weekends skipped
    unsigned long long seed = 1;

    void validate() const;  ///< throws InvalidSpec

    static SynthSpec from_json(const std::string& text);
    static SynthSpec load_json(const std::filesystem::path& path);
    std::string to_json() const;
};

struct SyntheticPanel {
    PricePanel prices;
    IndustryHierarchy hierarchy;
};

/// Byte-identical output for identical specs (single-threaded generation).
SyntheticPanel generate_synthetic_panel(const SynthSpec& spec);

}  // namespace hetrisk
