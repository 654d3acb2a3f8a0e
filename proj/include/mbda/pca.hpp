#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbda/faac.hpp"

namespace mbda {

enum class Preprocessing { kMeanCenter, kAutoscale };

std::string to_string(Preprocessing p);
Preprocessing preprocessing_from_string(const std::string& s);

// Column transform learned on calibration data. Zero-variance columns are
// dropped; `kept` indexes the surviving input columns in order.
struct PreprocessSpec {
  Preprocessing mode = Preprocessing::kMeanCenter;
  std::vector<std::string> columns;
  std::vector<std::size_t> kept;
  std::vector<std::string> dropped;
  Eigen::VectorXd mean;   // length kept.size()
  Eigen::VectorXd scale;  // ones for mean-centering

  std::vector<std::string> kept_names() const;
  // Rows of `m` (full column set, same order as `columns`).
  Eigen::MatrixXd apply(const FeatureMatrix& m) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& full) const;
  // Back to the kept columns' original units.
  Eigen::MatrixXd invert(const Eigen::MatrixXd& processed) const;
};

struct Preprocessed {
  Eigen::MatrixXd data;
  PreprocessSpec spec;
};

Preprocessed preprocess(const Eigen::MatrixXd& x, const std::vector<std::string>& columns, Preprocessing mode);
Preprocessed preprocess(const FeatureMatrix& m, Preprocessing mode);
Eigen::MatrixXd to_eigen(const FeatureMatrix& m);

struct PcaModel {
  int components = 0;
  Eigen::MatrixXd loadings;     // M x A, orthonormal columns
  Eigen::VectorXd eigenvalues;  // min(N-1, M), descending
  PreprocessSpec preprocess;
  std::size_t n_cal = 0;

  // Diagonal of the score covariance (first A eigenvalues).
  Eigen::VectorXd score_variances() const { return eigenvalues.head(components); }
  double total_variance() const { return eigenvalues.sum(); }
  double residual_variance() const { return eigenvalues.tail(eigenvalues.size() - components).sum(); }
};

// Eigendecomposition of the sample covariance of already-preprocessed data.
// The largest-magnitude element of each loading column is made positive.
PcaModel fit_pca(const Eigen::MatrixXd& xcs, int components, PreprocessSpec spec = {});

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& xcs);
Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& xcs);

struct Statistics {
  Eigen::VectorXd d;  // Hotelling-type distance in the score space
  Eigen::VectorXd q;  // squared residual norm
};

Statistics statistics(const PcaModel& model, const Eigen::MatrixXd& xcs);

enum class LimitKind { kCalibration, kFuture };

struct ControlLimits {
  double alpha = 0.99;
  LimitKind kind = LimitKind::kCalibration;
  double ucl_d = 0;
  std::optional<double> ucl_q;  // undefined when the residual space is empty
  std::string note;
};

ControlLimits control_limits(const PcaModel& model, double alpha, LimitKind kind = LimitKind::kCalibration);

struct MsnmResult {
  Statistics stats;
  ControlLimits limits;
};

struct CurveReport {
  int k_folds = 0;
  std::vector<double> residual_variance;  // index A = 0..A_max
  std::vector<double> ckf;
};

CurveReport selection_curves(const Eigen::MatrixXd& xcs, int max_components, int k_folds);

// Smallest A >= 1 at which adding a component improves ckf by less than
// `relative_tolerance` of the current ckf value.
int choose_components(const CurveReport& curves, double relative_tolerance = 0.01);

int default_k_folds(std::size_t columns);
int max_curve_components(std::size_t rows, std::size_t columns, int k_folds);

nlohmann::json to_json(const PcaModel& model);
PcaModel model_from_json(const nlohmann::json& j);

// Plot payloads. Labels are bin labels; the first four characters give the
// year used for colouring.
nlohmann::json scores_payload(const PcaModel& model, const Eigen::MatrixXd& xcs,
                              const std::vector<std::string>& labels, int pc_x, int pc_y);
nlohmann::json loadings_payload(const PcaModel& model, int pc_x, int pc_y);
nlohmann::json biplot_payload(const PcaModel& model, const Eigen::MatrixXd& xcs,
                              const std::vector<std::string>& labels, int pc_x, int pc_y);
nlohmann::json msnm_payload(const MsnmResult& result, const std::vector<std::string>& labels);
nlohmann::json curves_payload(const CurveReport& curves);

}  // namespace mbda
