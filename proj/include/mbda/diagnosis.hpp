#pragma once

#include <string>
#include <vector>

#include "mbda/pca.hpp"

namespace mbda {

// Two sets of bin labels to contrast. With `rest_as_group2`, group2 is
// every label not in group1.
struct GroupSelection {
  std::vector<std::string> group1;
  std::vector<std::string> group2;
  bool rest_as_group2 = false;
};

// +1/|group1| on group1 rows, -1/|group2| on group2 rows, 0 elsewhere.
Eigen::VectorXd build_dummy(const GroupSelection& selection, const std::vector<std::string>& labels);

struct OmedaResult {
  std::vector<std::string> features;  // every model column, dropped ones included
  std::vector<double> bars;
  std::vector<std::string> warnings;

  // Indices ordered by descending |bar|, ties by feature name.
  std::vector<std::size_t> ranking() const;
};

// bar_m = sum_n w_n (2 x_nm - xhat_nm) xhat_nm with xhat the rank-A
// reconstruction of the preprocessed rows.
OmedaResult omeda(const PcaModel& model, const Eigen::MatrixXd& xcs, const Eigen::VectorXd& w);

struct TopRule {
  enum class Kind { kTopK, kFraction };
  Kind kind = Kind::kTopK;
  double value = 3;

  static TopRule top_k(int k) { return {Kind::kTopK, static_cast<double>(k)}; }
  static TopRule fraction(double f) { return {Kind::kFraction, f}; }
};

std::vector<std::string> top_features(const OmedaResult& result, const TopRule& rule);

nlohmann::json to_json(const OmedaResult& result);

}  // namespace mbda
