/**
 * @file hierarchy.hpp
 * @brief Nested binary industry classification (ticker -> ... -> top level).
 *
 * Levels are ordered most granular first. Level 0 assigns every ticker to
 * exactly one cluster; level l assigns every level-(l-1) cluster to exactly
 * one level-l cluster. Malformed classifications (a cluster claimed by two
 * parents, unknown tickers, empty clusters) are rejected at construction.
 */

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace hetrisk {

class IndustryHierarchy {
public:
    /**
     * Builds from per-ticker label rows, one vector of labels per level
     * (most granular first), e.g. {sub_industry, industry, sector} columns.
     * Cluster ids are assigned in order of first appearance, which keeps
     * construction deterministic.
     */
    static IndustryHierarchy from_labels(
        std::vector<std::string> tickers,
        const std::vector<std::vector<std::string>>& label_columns,
        std::vector<std::string> level_names);

    /**
     * Reads the CSV "ticker,sub_industry,industry,sector" (header required;
     * any number >= 1 of level columns is accepted, most granular first).
     * Throws ParseError naming the offending row.
     */
    static IndustryHierarchy from_csv(const std::filesystem::path& path);

    std::size_t num_levels() const { return assign_.size(); }
    const std::vector<std::string>& tickers() const { return tickers_; }
    const std::vector<std::string>& level_names() const { return level_names_; }

    /// Number of clusters at level l.
    Eigen::Index num_clusters(std::size_t level) const {
        return static_cast<Eigen::Index>(labels_[level].size());
    }
    /// Cluster labels at level l, indexed by cluster id.
    const std::vector<std::string>& cluster_labels(std::size_t level) const {
        return labels_[level];
    }
    /**
     * Assignment at level l: maps each level-(l-1) unit (tickers for l = 0)
     * to its cluster id at level l.
     */
    const std::vector<Eigen::Index>& assignment(std::size_t level) const {
        return assign_[level];
    }
    /// Binary membership matrix for level l (units x clusters).
    Eigen::MatrixXd membership(std::size_t level) const;

    /// Tickers whose most-granular cluster contains only them.
    std::vector<Eigen::Index> singleton_tickers() const;
    /// Most-granular cluster ids of size one.
    std::vector<Eigen::Index> singleton_clusters() const;

    /// Hierarchy restricted to a ticker subset (clusters re-compacted).
    IndustryHierarchy restrict_to(const std::vector<Eigen::Index>& ticker_rows) const;

    /// Level-l cluster id of a ticker (composition of assignments).
    Eigen::Index ticker_cluster(Eigen::Index ticker, std::size_t level) const;

    void save_csv(const std::filesystem::path& path) const;

private:
    std::vector<std::string> tickers_;
    std::vector<std::string> level_names_;
    std::vector<std::vector<Eigen::Index>> assign_;  // per level
    std::vector<std::vector<std::string>> labels_;   // per level
};

}  // namespace hetrisk
