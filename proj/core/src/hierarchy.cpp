#include "hetrisk/hierarchy.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "hetrisk/errors.hpp"

namespace hetrisk {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

IndustryHierarchy IndustryHierarchy::from_labels(
    std::vector<std::string> tickers,
    const std::vector<std::vector<std::string>>& label_columns,
    std::vector<std::string> level_names) {
    const std::size_t n = tickers.size();
    const std::size_t levels = label_columns.size();
    if (levels == 0) throw HierarchyMismatch("no classification levels given");
    if (level_names.size() != levels)
        throw HierarchyMismatch("level name count does not match level count");
    for (const auto& col : label_columns)
        if (col.size() != n)
            throw HierarchyMismatch("label column length does not match ticker count");
    {
        std::unordered_map<std::string, int> seen;
        for (const auto& t : tickers)
            if (++seen[t] > 1) throw HierarchyMismatch("duplicate ticker " + t);
    }

    IndustryHierarchy h;
    h.tickers_ = std::move(tickers);
    h.level_names_ = std::move(level_names);
    h.assign_.resize(levels);
    h.labels_.resize(levels);

    // Level 0: ticker -> most granular cluster, ids by first appearance.
    std::unordered_map<std::string, Eigen::Index> id0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& lab = label_columns[0][i];
        auto [it, fresh] = id0.emplace(lab, static_cast<Eigen::Index>(h.labels_[0].size()));
        if (fresh) h.labels_[0].push_back(lab);
        h.assign_[0].push_back(it->second);
    }

    // Upper levels: every lower cluster must carry a single parent label.
    for (std::size_t l = 1; l < levels; ++l) {
        const std::size_t units = h.labels_[l - 1].size();
        std::vector<std::string> parent_label(units);
        std::vector<bool> set(units, false);
        // ticker -> its level-(l-1) cluster
        std::vector<Eigen::Index> cluster_of(n);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index c = h.assign_[0][i];
            for (std::size_t m = 1; m < l; ++m) c = h.assign_[m][static_cast<std::size_t>(c)];
            cluster_of[i] = c;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(cluster_of[i]);
            const std::string& lab = label_columns[l][i];
            if (!set[c]) {
                parent_label[c] = lab;
                set[c] = true;
            } else if (parent_label[c] != lab) {
                throw HierarchyMismatch(
                    h.level_names_[l - 1] + " '" + h.labels_[l - 1][c] +
                    "' maps to both '" + parent_label[c] + "' and '" + lab +
                    "' at level " + h.level_names_[l] + " (ticker " + h.tickers_[i] + ")");
            }
        }
        std::unordered_map<std::string, Eigen::Index> id;
        for (std::size_t c = 0; c < units; ++c) {
            auto [it, fresh] =
                id.emplace(parent_label[c], static_cast<Eigen::Index>(h.labels_[l].size()));
            if (fresh) h.labels_[l].push_back(parent_label[c]);
            h.assign_[l].push_back(it->second);
        }
    }
    return h;
}

IndustryHierarchy IndustryHierarchy::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "ticker")
        throw ParseError(path.string() + ": header must be ticker,<level>,...");
    std::vector<std::string> level_names(header.begin() + 1, header.end());

    std::vector<std::string> tickers;
    std::vector<std::vector<std::string>> cols(level_names.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        for (const auto& f : fields)
            if (f.empty())
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": empty field");
        tickers.push_back(fields[0]);
        for (std::size_t c = 0; c < level_names.size(); ++c)
            cols[c].push_back(fields[c + 1]);
    }
    if (tickers.empty()) throw ParseError(path.string() + ": no data rows");
    return from_labels(std::move(tickers), cols, std::move(level_names));
}

Eigen::MatrixXd IndustryHierarchy::membership(std::size_t level) const {
    const auto& a = assign_[level];
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()),
                                              num_clusters(level));
    for (std::size_t i = 0; i < a.size(); ++i) m(static_cast<Eigen::Index>(i), a[i]) = 1.0;
    return m;
}

std::vector<Eigen::Index> IndustryHierarchy::singleton_clusters() const {
    std::vector<int> count(static_cast<std::size_t>(num_clusters(0)), 0);
    for (auto c : assign_[0]) ++count[static_cast<std::size_t>(c)];
    std::vector<Eigen::Index> out;
    for (std::size_t c = 0; c < count.size(); ++c)
        if (count[c] == 1) out.push_back(static_cast<Eigen::Index>(c));
    return out;
}

std::vector<Eigen::Index> IndustryHierarchy::singleton_tickers() const {
    std::vector<int> count(static_cast<std::size_t>(num_clusters(0)), 0);
    for (auto c : assign_[0]) ++count[static_cast<std::size_t>(c)];
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < assign_[0].size(); ++i)
        if (count[static_cast<std::size_t>(assign_[0][i])] == 1)
            out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

Eigen::Index IndustryHierarchy::ticker_cluster(Eigen::Index ticker,
                                               std::size_t level) const {
    Eigen::Index c = assign_[0][static_cast<std::size_t>(ticker)];
    for (std::size_t l = 1; l <= level; ++l) c = assign_[l][static_cast<std::size_t>(c)];
    return c;
}

IndustryHierarchy IndustryHierarchy::restrict_to(
    const std::vector<Eigen::Index>& ticker_rows) const {
    std::vector<std::string> tickers;
    std::vector<std::vector<std::string>> cols(num_levels());
    for (auto i : ticker_rows) {
        tickers.push_back(tickers_[static_cast<std::size_t>(i)]);
        for (std::size_t l = 0; l < num_levels(); ++l)
            cols[l].push_back(labels_[l][static_cast<std::size_t>(ticker_cluster(i, l))]);
    }
    return from_labels(std::move(tickers), cols, level_names_);
}

void IndustryHierarchy::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "ticker";
    for (const auto& name : level_names_) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < tickers_.size(); ++i) {
        out << tickers_[i];
        for (std::size_t l = 0; l < num_levels(); ++l)
            out << ','
                << labels_[l][static_cast<std::size_t>(
                       ticker_cluster(static_cast<Eigen::Index>(i), l))];
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hetrisk
