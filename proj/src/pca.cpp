#include <algorithm>
#include <cmath>

#include "mbda/pca.hpp"

namespace mbda {

namespace {

struct EigenPairs {
  Eigen::VectorXd values;   // descending, clamped at 0
  Eigen::MatrixXd vectors;  // matching columns, sign-fixed
};

EigenPairs covariance_eigen(const Eigen::MatrixXd& x) {
  const double denom = static_cast<double>(x.rows() - 1);
  Eigen::MatrixXd cov = (x.transpose() * x) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("eigendecomposition failed");
  const Eigen::Index m = cov.rows();
  EigenPairs out{Eigen::VectorXd(m), Eigen::MatrixXd(m, m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    out.values(i) = std::max(0.0, solver.eigenvalues()(m - 1 - i));
    Eigen::VectorXd v = solver.eigenvectors().col(m - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.vectors.col(i) = v;
  }
  return out;
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& xcs, int components, PreprocessSpec spec) {
  const auto n = xcs.rows();
  const auto m = xcs.cols();
  if (n < 2) throw DataError("PCA needs at least two observations");
  const auto max_a = std::min<Eigen::Index>(n - 1, m);
  if (components < 1 || components > max_a)
    throw DataError("component count " + std::to_string(components) + " outside [1, " +
                    std::to_string(max_a) + "]");
  auto pairs = covariance_eigen(xcs);
  PcaModel model;
  model.components = components;
  model.loadings = pairs.vectors.leftCols(components);
  model.eigenvalues = pairs.values.head(max_a);
  model.n_cal = static_cast<std::size_t>(n);
  if (spec.columns.empty()) {
    for (Eigen::Index j = 0; j < m; ++j) {
      spec.columns.push_back("x" + std::to_string(j + 1));
      spec.kept.push_back(static_cast<std::size_t>(j));
    }
    spec.mean = Eigen::VectorXd::Zero(m);
    spec.scale = Eigen::VectorXd::Ones(m);
  }
  if (static_cast<Eigen::Index>(spec.kept.size()) != m)
    throw DataError("preprocessing spec does not match the data's column count");
  model.preprocess = std::move(spec);
  return model;
}

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& xcs) {
  if (xcs.cols() != model.loadings.rows())
    throw DataError("data has " + std::to_string(xcs.cols()) + " columns, model expects " +
                    std::to_string(model.loadings.rows()));
  return xcs * model.loadings;
}

Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& xcs) {
  return project(model, xcs) * model.loadings.transpose();
}

Statistics statistics(const PcaModel& model, const Eigen::MatrixXd& xcs) {
  Eigen::VectorXd lambda = model.score_variances();
  for (Eigen::Index a = 0; a < lambda.size(); ++a)
    if (!(lambda(a) > 0))
      throw DataError("score covariance is singular at component " + std::to_string(a + 1) +
                      "; choose fewer components");
  Eigen::MatrixXd t = project(model, xcs);
  Eigen::MatrixXd e = xcs - t * model.loadings.transpose();
  Statistics s;
  s.d = (t.array().square().rowwise() / lambda.transpose().array()).rowwise().sum();
  s.q = e.array().square().rowwise().sum();
  return s;
}

int default_k_folds(std::size_t columns) { return static_cast<int>(std::min<std::size_t>(columns, 10)); }

int max_curve_components(std::size_t rows, std::size_t columns, int k_folds) {
  const auto held = (columns + static_cast<std::size_t>(k_folds) - 1) / static_cast<std::size_t>(k_folds);
  const auto bound = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(rows) - 1,
                                              static_cast<std::ptrdiff_t>(columns - held));
  return static_cast<int>(std::max<std::ptrdiff_t>(bound, 0));
}

CurveReport selection_curves(const Eigen::MatrixXd& xcs, int max_components, int k_folds) {
  const auto n = static_cast<std::size_t>(xcs.rows());
  const auto m = static_cast<std::size_t>(xcs.cols());
  if (k_folds < 2 || static_cast<std::size_t>(k_folds) > m)
    throw DataError("k_folds must be in [2, " + std::to_string(m) + "]");
  if (max_components < 0 || max_components > max_curve_components(n, m, k_folds))
    throw DataError("max components " + std::to_string(max_components) + " exceeds " +
                    std::to_string(max_curve_components(n, m, k_folds)));

  CurveReport out;
  out.k_folds = k_folds;
  auto full = covariance_eigen(xcs);
  const double total = full.values.sum();
  const auto n_values = full.values.size();
  for (int a = 0; a <= max_components; ++a) {
    const double tail = a < n_values ? full.values.tail(n_values - a).sum() : 0.0;
    out.residual_variance.push_back(total > 0 ? tail / total : 0.0);
  }

  // Column-wise holdout: columns j with j % k == g form group g. Scores
  // from a model fitted without the group are orthogonal, so the least
  // squares fit of the held-out block grows one component at a time.
  const double ss_total = xcs.squaredNorm();
  std::vector<double> press(static_cast<std::size_t>(max_components) + 1, 0.0);
  for (int g = 0; g < k_folds; ++g) {
    std::vector<Eigen::Index> in, out_cols;
    for (std::size_t j = 0; j < m; ++j)
      (static_cast<int>(j % static_cast<std::size_t>(k_folds)) == g ? out_cols : in)
          .push_back(static_cast<Eigen::Index>(j));
    Eigen::MatrixXd x_in = xcs(Eigen::all, in);
    Eigen::MatrixXd x_out = xcs(Eigen::all, out_cols);
    double residual = x_out.squaredNorm();
    press[0] += residual;
    if (max_components == 0) continue;
    auto pairs = covariance_eigen(x_in);
    for (int a = 1; a <= max_components; ++a) {
      Eigen::VectorXd t = x_in * pairs.vectors.col(a - 1);
      const double tt = t.squaredNorm();
      if (tt > 1e-12 * std::max(1.0, ss_total)) residual -= (t.transpose() * x_out).squaredNorm() / tt;
      press[static_cast<std::size_t>(a)] += std::max(0.0, residual);
    }
  }
  for (double p : press) out.ckf.push_back(ss_total > 0 ? 1.0 - p / ss_total : 0.0);
  return out;
}

int choose_components(const CurveReport& curves, double relative_tolerance) {
  const int max_a = static_cast<int>(curves.ckf.size()) - 1;
  if (max_a < 1) throw DataError("curve report has no components to choose from");
  for (int a = 1; a < max_a; ++a) {
    const double gain = curves.ckf[static_cast<std::size_t>(a + 1)] - curves.ckf[static_cast<std::size_t>(a)];
    if (gain < relative_tolerance * std::abs(curves.ckf[static_cast<std::size_t>(a)])) return a;
  }
  return max_a;
}

}  // namespace mbda
