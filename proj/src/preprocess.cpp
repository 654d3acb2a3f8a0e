#include <cmath>

#include "mbda/pca.hpp"

namespace mbda {

std::string to_string(Preprocessing p) { return p == Preprocessing::kAutoscale ? "autoscale" : "mean-center"; }

Preprocessing preprocessing_from_string(const std::string& s) {
  if (s == "mean-center" || s == "center") return Preprocessing::kMeanCenter;
  if (s == "autoscale") return Preprocessing::kAutoscale;
  throw ConfigError("unknown preprocessing '" + s + "' (mean-center | autoscale)");
}

std::vector<std::string> PreprocessSpec::kept_names() const {
  std::vector<std::string> out;
  for (auto k : kept) out.push_back(columns[k]);
  return out;
}

Eigen::MatrixXd PreprocessSpec::apply(const Eigen::MatrixXd& full) const {
  if (static_cast<std::size_t>(full.cols()) != columns.size())
    throw DataError("expected " + std::to_string(columns.size()) + " columns, got " +
                    std::to_string(full.cols()));
  Eigen::MatrixXd out(full.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.col(jj) = (full.col(static_cast<Eigen::Index>(kept[j])).array() - mean(jj)) / scale(jj);
  }
  return out;
}

Eigen::MatrixXd PreprocessSpec::apply(const FeatureMatrix& m) const {
  if (m.columns() != columns) throw DataError("matrix columns do not match the model's columns");
  return apply(to_eigen(m));
}

Eigen::MatrixXd PreprocessSpec::invert(const Eigen::MatrixXd& processed) const {
  Eigen::MatrixXd out = processed;
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = out.col(j).array() * scale(j) + mean(j);
  return out;
}

Eigen::MatrixXd to_eigen(const FeatureMatrix& m) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(m.at(r, c));
  return x;
}

// Empty `columns` names them v0, v1, ...
Preprocessed preprocess(const Eigen::MatrixXd& x, const std::vector<std::string>& columns, Preprocessing mode) {
  if (x.rows() < 2) throw DataError("preprocessing needs at least two observations");
  if (!columns.empty() && static_cast<std::size_t>(x.cols()) != columns.size())
    throw DataError("column names do not match data");
  PreprocessSpec spec;
  spec.mode = mode;
  spec.columns = columns;
  if (spec.columns.empty())
    for (Eigen::Index j = 0; j < x.cols(); ++j) spec.columns.push_back("v" + std::to_string(j));
  std::vector<double> means, scales;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mu = x.col(j).mean();
    const double var = (x.col(j).array() - mu).square().sum() / (n - 1);
    if (!(var > 0)) {
      spec.dropped.push_back(spec.columns[static_cast<std::size_t>(j)]);
      continue;
    }
    spec.kept.push_back(static_cast<std::size_t>(j));
    means.push_back(mu);
    scales.push_back(mode == Preprocessing::kAutoscale ? std::sqrt(var) : 1.0);
  }
  spec.mean = Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
  spec.scale = Eigen::Map<Eigen::VectorXd>(scales.data(), static_cast<Eigen::Index>(scales.size()));
  Preprocessed out{spec.apply(x), std::move(spec)};
  return out;
}

Preprocessed preprocess(const FeatureMatrix& m, Preprocessing mode) {
  return preprocess(to_eigen(m), m.columns(), mode);
}

}  // namespace mbda
