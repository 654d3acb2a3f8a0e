#include <cmath>

#include "mbda/pca.hpp"

using nlohmann::json;

namespace mbda {

namespace {

void check_pcs(const PcaModel& model, int pc_x, int pc_y) {
  for (int pc : {pc_x, pc_y})
    if (pc < 1 || pc > model.components)
      throw DataError("component " + std::to_string(pc) + " outside [1, " + std::to_string(model.components) + "]");
}

std::string year_of(const std::string& label) { return label.size() >= 4 ? label.substr(0, 4) : label; }

json score_points(const Eigen::MatrixXd& t, const std::vector<std::string>& labels, int pc_x, int pc_y) {
  if (static_cast<std::size_t>(t.rows()) != labels.size()) throw DataError("label count does not match rows");
  json points = json::array();
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    const auto& label = labels[static_cast<std::size_t>(r)];
    points.push_back({{"label", label}, {"year", year_of(label)}, {"x", t(r, pc_x - 1)}, {"y", t(r, pc_y - 1)}});
  }
  return points;
}

json loading_points(const PcaModel& model, int pc_x, int pc_y, bool biplot_scale) {
  const auto names = model.preprocess.kept_names();
  const double sx = biplot_scale ? std::sqrt(model.eigenvalues(pc_x - 1)) : 1.0;
  const double sy = biplot_scale ? std::sqrt(model.eigenvalues(pc_y - 1)) : 1.0;
  json points = json::array();
  for (Eigen::Index j = 0; j < model.loadings.rows(); ++j)
    points.push_back({{"label", names[static_cast<std::size_t>(j)]},
                      {"x", model.loadings(j, pc_x - 1) * sx},
                      {"y", model.loadings(j, pc_y - 1) * sy}});
  return points;
}

json explained(const PcaModel& model, int pc_x, int pc_y) {
  const double total = model.total_variance();
  auto frac = [&](int pc) { return total > 0 ? model.eigenvalues(pc - 1) / total : 0.0; };
  return json::array({frac(pc_x), frac(pc_y)});
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

json to_json(const PcaModel& model) {
  json loadings = json::array();
  for (Eigen::Index r = 0; r < model.loadings.rows(); ++r) loadings.push_back(vector_to_json(model.loadings.row(r).transpose()));
  const auto& p = model.preprocess;
  return {{"components", model.components},
          {"n_cal", model.n_cal},
          {"eigenvalues", vector_to_json(model.eigenvalues)},
          {"loadings", loadings},
          {"preprocess",
           {{"mode", to_string(p.mode)},
            {"columns", p.columns},
            {"kept", p.kept},
            {"dropped", p.dropped},
            {"mean", vector_to_json(p.mean)},
            {"scale", vector_to_json(p.scale)}}}};
}

PcaModel model_from_json(const json& j) {
  try {
    PcaModel model;
    j.at("components").get_to(model.components);
    j.at("n_cal").get_to(model.n_cal);
    model.eigenvalues = vector_from_json(j.at("eigenvalues"));
    const auto& rows = j.at("loadings");
    model.loadings.resize(static_cast<Eigen::Index>(rows.size()), model.components);
    for (std::size_t r = 0; r < rows.size(); ++r)
      model.loadings.row(static_cast<Eigen::Index>(r)) = vector_from_json(rows[r]).transpose();
    const auto& p = j.at("preprocess");
    model.preprocess.mode = preprocessing_from_string(p.at("mode").get<std::string>());
    p.at("columns").get_to(model.preprocess.columns);
    p.at("kept").get_to(model.preprocess.kept);
    p.at("dropped").get_to(model.preprocess.dropped);
    model.preprocess.mean = vector_from_json(p.at("mean"));
    model.preprocess.scale = vector_from_json(p.at("scale"));
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
}

json scores_payload(const PcaModel& model, const Eigen::MatrixXd& xcs, const std::vector<std::string>& labels,
                    int pc_x, int pc_y) {
  check_pcs(model, pc_x, pc_y);
  return {{"kind", "scores"},
          {"pcs", {pc_x, pc_y}},
          {"explained", explained(model, pc_x, pc_y)},
          {"points", score_points(project(model, xcs), labels, pc_x, pc_y)}};
}

json loadings_payload(const PcaModel& model, int pc_x, int pc_y) {
  check_pcs(model, pc_x, pc_y);
  return {{"kind", "loadings"},
          {"pcs", {pc_x, pc_y}},
          {"explained", explained(model, pc_x, pc_y)},
          {"points", loading_points(model, pc_x, pc_y, false)}};
}

json biplot_payload(const PcaModel& model, const Eigen::MatrixXd& xcs, const std::vector<std::string>& labels,
                    int pc_x, int pc_y) {
  check_pcs(model, pc_x, pc_y);
  return {{"kind", "biplot"},
          {"pcs", {pc_x, pc_y}},
          {"explained", explained(model, pc_x, pc_y)},
          {"scores", score_points(project(model, xcs), labels, pc_x, pc_y)},
          {"loadings", loading_points(model, pc_x, pc_y, true)}};
}

json msnm_payload(const MsnmResult& result, const std::vector<std::string>& labels) {
  const auto& s = result.stats;
  if (static_cast<std::size_t>(s.d.size()) != labels.size()) throw DataError("label count does not match rows");
  const auto& l = result.limits;
  json points = json::array();
  for (Eigen::Index i = 0; i < s.d.size(); ++i) {
    const auto& label = labels[static_cast<std::size_t>(i)];
    const bool flagged = s.d(i) > l.ucl_d || (l.ucl_q && s.q(i) > *l.ucl_q);
    points.push_back(
        {{"label", label}, {"year", year_of(label)}, {"d", s.d(i)}, {"q", s.q(i)}, {"flagged", flagged}});
  }
  return {{"kind", "msnm"},
          {"alpha", l.alpha},
          {"limit_kind", l.kind == LimitKind::kCalibration ? "calibration" : "future"},
          {"ucl_d", l.ucl_d},
          {"ucl_q", l.ucl_q ? json(*l.ucl_q) : json(nullptr)},
          {"note", l.note},
          {"points", points}};
}

json curves_payload(const CurveReport& curves) {
  json points = json::array();
  for (std::size_t a = 0; a < curves.ckf.size(); ++a)
    points.push_back({{"components", a}, {"residual_variance", curves.residual_variance[a]}, {"ckf", curves.ckf[a]}});
  return {{"kind", "curves"}, {"k_folds", curves.k_folds}, {"points", points}};
}

}  // namespace mbda
