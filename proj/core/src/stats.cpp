#include "hetrisk/stats.hpp"

#include <cmath>

#include "hetrisk/errors.hpp"

namespace hetrisk {

CovarianceResult sample_covariance(const ReturnsPanel& panel) {
    const Eigen::Index n = panel.num_tickers();
    const Eigen::Index obs = panel.num_obs();
    const double divisor = static_cast<double>(obs - 1);  // divisor M

    const Eigen::VectorXd means = panel.values.rowwise().mean();
    const Eigen::MatrixXd centered = panel.values.colwise() - means;

    CovarianceResult out;
    out.cov = (centered * centered.transpose()) / divisor;
    out.cov = ((out.cov + out.cov.transpose()) / 2.0).eval();  // exact symmetry
    out.variances = out.cov.diagonal();

    // Constant rows: variance indistinguishable from rounding noise of the
    // row's magnitude.
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scale = panel.values.row(i).squaredNorm() / static_cast<double>(obs);
        if (out.variances(i) <= 0.0 || out.variances(i) < 1e-24 * std::max(scale, 1e-300))
            throw ZeroVariance("row " + panel.tickers[static_cast<std::size_t>(i)] +
                               " has (numerically) zero variance");
    }

    const Eigen::VectorXd inv_sd = out.variances.cwiseSqrt().cwiseInverse();
    out.cor = inv_sd.asDiagonal() * out.cov * inv_sd.asDiagonal();
    out.cor.diagonal().setOnes();

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (std::abs(out.cor(i, j)) >= 1.0 - 1e-12)
                throw DegenerateRow("rows " + panel.tickers[static_cast<std::size_t>(i)] +
                                    " and " + panel.tickers[static_cast<std::size_t>(j)] +
                                    " are perfectly correlated");
    return out;
}

EigenSystem sym_eigen(const Eigen::MatrixXd& mat) {
    if (mat.rows() != mat.cols())
        throw NotSymmetric("matrix is " + std::to_string(mat.rows()) + "x" +
                           std::to_string(mat.cols()));
    const double scale = std::max(1e-300, mat.cwiseAbs().maxCoeff());
    if ((mat - mat.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw NotSymmetric("asymmetry exceeds 1e-9 relative");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        (mat + mat.transpose()) / 2.0);
    if (solver.info() != Eigen::Success)
        throw NotSymmetric("eigendecomposition failed to converge");

    const Eigen::Index p = mat.rows();
    EigenSystem out;
    out.eigenvalues.resize(p);
    out.eigenvectors.resize(p, p);
    // Eigen returns increasing order; reverse to decreasing.
    for (Eigen::Index a = 0; a < p; ++a) {
        out.eigenvalues(a) = solver.eigenvalues()(p - 1 - a);
        out.eigenvectors.col(a) = solver.eigenvectors().col(p - 1 - a);
    }

    const double lambda_max = std::max(1.0, std::abs(out.eigenvalues(0)));
    for (Eigen::Index a = 0; a < p; ++a) {
        if (out.eigenvalues(a) < 0.0) {
            if (out.eigenvalues(a) < -1e-10 * lambda_max)
                throw NotPositiveSemiDefinite("eigenvalue " +
                                              std::to_string(out.eigenvalues(a)));
            out.eigenvalues(a) = 0.0;
        }
    }

    // Sign convention: largest-magnitude entry positive (first such entry on ties).
    for (Eigen::Index a = 0; a < p; ++a) {
        Eigen::Index imax = 0;
        out.eigenvectors.col(a).cwiseAbs().maxCoeff(&imax);
        if (out.eigenvectors(imax, a) < 0.0)
            out.eigenvectors.col(a) = -out.eigenvectors.col(a);
    }
    return out;
}

}  // namespace hetrisk
