#include "hetrisk/factor_model.hpp"

#include <fstream>

#include <json.hpp>

#include "hetrisk/errors.hpp"
#include "hetrisk/stats.hpp"

namespace hetrisk {

Eigen::MatrixXd factor_model_inverse(const Eigen::VectorXd& spec_risk,
                                     const Eigen::MatrixXd& fac_load,
                                     const Eigen::MatrixXd& fac_cov) {
    const Eigen::Index n = spec_risk.size();
    const Eigen::Index k = fac_load.cols();
    if (fac_load.rows() != n || fac_cov.rows() != k || fac_cov.cols() != k)
        throw DimensionMismatch("spec_risk " + std::to_string(n) + ", fac_load " +
                                std::to_string(fac_load.rows()) + "x" +
                                std::to_string(fac_load.cols()) + ", fac_cov " +
                                std::to_string(fac_cov.rows()) + "x" +
                                std::to_string(fac_cov.cols()));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(spec_risk(i) > 0.0))
            throw ZeroSpecificRisk("xi[" + std::to_string(i) + "] = " +
                                   std::to_string(spec_risk(i)));

    const Eigen::VectorXd inv_xi2 = spec_risk.array().square().inverse().matrix();
    if (k == 0)
        return Eigen::MatrixXd(inv_xi2.asDiagonal());

    Eigen::FullPivLU<Eigen::MatrixXd> phi_lu(fac_cov);
    if (!phi_lu.isInvertible())
        throw SingularFactorCovariance("factor covariance is singular");

    const Eigen::MatrixXd v = inv_xi2.asDiagonal() * fac_load;  // Xi^{-1} Omega
    const Eigen::MatrixXd delta =
        phi_lu.inverse() + fac_load.transpose() * v;
    Eigen::FullPivLU<Eigen::MatrixXd> delta_lu(delta);
    if (!delta_lu.isInvertible())
        throw SingularFactorCovariance("Delta = Phi^{-1} + Omega^T Xi^{-1} Omega is singular");

    Eigen::MatrixXd inv = Eigen::MatrixXd(inv_xi2.asDiagonal()) -
                          v * delta_lu.solve(v.transpose());
    return ((inv + inv.transpose()) / 2.0).eval();
}

TotalVarianceCheck total_variance_conditions(const Eigen::MatrixXd& loadings,
                                             const Eigen::MatrixXd& psi) {
    if (loadings.rows() != psi.rows() || psi.rows() != psi.cols())
        throw DimensionMismatch("loadings " + std::to_string(loadings.rows()) +
                                " rows vs psi " + std::to_string(psi.rows()));
    // Projector onto the loadings' column space; pseudo-inverse keeps the
    // check meaningful for rank-deficient candidates.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(loadings);
    const Eigen::MatrixXd q = loadings * cod.pseudoInverse();
    const Eigen::MatrixXd qpsi = q * psi;
    const Eigen::MatrixXd t =
        2.0 * qpsi * q.transpose() - qpsi - psi * q.transpose();
    TotalVarianceCheck out;
    out.max_abs_diag = t.diagonal().cwiseAbs().maxCoeff();
    out.trace = t.trace();
    return out;
}

TotalVarianceCheck verify_total_variance(const FactorModel& model,
                                         const ReturnsPanel& panel) {
    if (model.fac_load.rows() != panel.num_tickers())
        throw DimensionMismatch("model has " + std::to_string(model.fac_load.rows()) +
                                " tickers, panel has " +
                                std::to_string(panel.num_tickers()));
    const CovarianceResult cr = sample_covariance(panel);
    const Eigen::VectorXd inv_sd = cr.variances.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd rescaled = inv_sd.asDiagonal() * model.fac_load;
    return total_variance_conditions(rescaled, cr.cor);
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
    j["data"] = std::move(data);
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError("matrix data length does not match dimensions");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++];
    return m;
}

}  // namespace

std::string model_to_json(const FactorModel& model) {
    json j;
    j["schema"] = "hetrisk-factor-model-v1";
    j["meta"] = {{"kind", model.meta.kind},
                 {"num_factors", model.meta.num_factors},
                 {"use_correlation", model.meta.use_correlation},
                 {"market_factor", model.meta.market_factor},
                 {"drop_singletons", model.meta.drop_singletons},
                 {"covariance_divisor", model.meta.covariance_divisor}};
    j["tickers"] = model.tickers;
    j["spec_risk"] = std::vector<double>(model.spec_risk.data(),
                                         model.spec_risk.data() + model.spec_risk.size());
    j["fac_load"] = matrix_to_json(model.fac_load);
    j["fac_cov"] = matrix_to_json(model.fac_cov);
    j["cov_mat"] = matrix_to_json(model.cov_mat);
    j["has_inverse"] = model.has_inverse();
    if (model.has_inverse()) j["inv_cov"] = matrix_to_json(model.inv_cov);
    return j.dump(2) + "\n";
}

void save_model_json(const FactorModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << model_to_json(model);
    if (!out) throw IoError("failed writing " + path.string());
}

FactorModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    try {
        FactorModel m;
        m.tickers = j.at("tickers").get<std::vector<std::string>>();
        const auto sr = j.at("spec_risk").get<std::vector<double>>();
        m.spec_risk = Eigen::Map<const Eigen::VectorXd>(sr.data(),
                                                        static_cast<Eigen::Index>(sr.size()));
        m.fac_load = matrix_from_json(j.at("fac_load"));
        m.fac_cov = matrix_from_json(j.at("fac_cov"));
        m.cov_mat = matrix_from_json(j.at("cov_mat"));
        if (j.at("has_inverse").get<bool>()) m.inv_cov = matrix_from_json(j.at("inv_cov"));
        const auto& meta = j.at("meta");
        m.meta.kind = meta.at("kind").get<std::string>();
        m.meta.num_factors = meta.at("num_factors").get<int>();
        m.meta.use_correlation = meta.at("use_correlation").get<bool>();
        m.meta.market_factor = meta.at("market_factor").get<bool>();
        m.meta.drop_singletons = meta.at("drop_singletons").get<bool>();
        m.meta.covariance_divisor = meta.at("covariance_divisor").get<std::string>();
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
}

FactorModel load_model_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace hetrisk
