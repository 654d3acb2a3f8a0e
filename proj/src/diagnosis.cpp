#include <algorithm>
#include <cmath>
#include <set>

#include "mbda/diagnosis.hpp"

namespace mbda {

Eigen::VectorXd build_dummy(const GroupSelection& selection, const std::vector<std::string>& labels) {
  if (selection.group1.empty()) throw DataError("group1 must not be empty");
  std::set<std::string> known(labels.begin(), labels.end());
  std::set<std::string> g1(selection.group1.begin(), selection.group1.end());
  std::set<std::string> g2;
  for (const auto& l : g1)
    if (!known.count(l)) throw DataError("unknown bin label " + l);
  if (selection.rest_as_group2) {
    for (const auto& l : labels)
      if (!g1.count(l)) g2.insert(l);
  } else {
    for (const auto& l : selection.group2) {
      if (!known.count(l)) throw DataError("unknown bin label " + l);
      if (g1.count(l)) throw DataError("bin " + l + " is in both groups");
      g2.insert(l);
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (g1.count(labels[i]))
      w(r) = 1.0 / static_cast<double>(g1.size());
    else if (g2.count(labels[i]))
      w(r) = -1.0 / static_cast<double>(g2.size());
  }
  return w;
}

std::vector<std::size_t> OmedaResult::ranking() const {
  std::vector<std::size_t> idx(bars.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double x = std::abs(bars[a]), y = std::abs(bars[b]);
    if (x != y) return x > y;
    return features[a] < features[b];
  });
  return idx;
}

OmedaResult omeda(const PcaModel& model, const Eigen::MatrixXd& xcs, const Eigen::VectorXd& w) {
  if (w.size() != xcs.rows())
    throw DataError("dummy vector has " + std::to_string(w.size()) + " entries for " +
                    std::to_string(xcs.rows()) + " observations");
  const Eigen::MatrixXd xhat = reconstruct(model, xcs);
  const Eigen::VectorXd kept_bars = ((2.0 * xcs - xhat).array() * xhat.array()).matrix().transpose() * w;

  OmedaResult out;
  const auto& spec = model.preprocess;
  out.features = spec.columns;
  out.bars.assign(spec.columns.size(), 0.0);
  for (std::size_t j = 0; j < spec.kept.size(); ++j) out.bars[spec.kept[j]] = kept_bars(static_cast<Eigen::Index>(j));
  if (w.isZero(0.0)) out.warnings.push_back("dummy vector is all zero; bars are zero");
  return out;
}

std::vector<std::string> top_features(const OmedaResult& result, const TopRule& rule) {
  std::vector<std::string> out;
  const auto order = result.ranking();
  if (rule.kind == TopRule::Kind::kTopK) {
    const auto k = static_cast<std::size_t>(std::max(0.0, rule.value));
    for (std::size_t i = 0; i < order.size() && i < k; ++i) out.push_back(result.features[order[i]]);
    return out;
  }
  double peak = 0;
  for (double b : result.bars) peak = std::max(peak, std::abs(b));
  if (peak == 0) return out;
  for (auto i : order)
    if (std::abs(result.bars[i]) >= rule.value * peak) out.push_back(result.features[i]);
  return out;
}

nlohmann::json to_json(const OmedaResult& result) {
  nlohmann::json bars = nlohmann::json::array();
  const auto order = result.ranking();
  std::vector<std::size_t> rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  for (std::size_t i = 0; i < result.bars.size(); ++i)
    bars.push_back({{"feature", result.features[i]}, {"bar", result.bars[i]}, {"rank", rank[i]}});
  return {{"kind", "omeda"}, {"bars", bars}, {"warnings", result.warnings}};
}

}  // namespace mbda
