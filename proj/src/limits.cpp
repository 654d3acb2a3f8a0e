#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "mbda/pca.hpp"

namespace mbda {

ControlLimits control_limits(const PcaModel& model, double alpha, LimitKind kind) {
  if (!(alpha > 0 && alpha < 1)) throw DataError("confidence level must be in (0,1)");
  const double n = static_cast<double>(model.n_cal);
  const double a = model.components;
  if (!(n > a + 1)) throw DataError("control limits need more calibration observations than A + 1");

  ControlLimits out;
  out.alpha = alpha;
  out.kind = kind;
  if (kind == LimitKind::kCalibration) {
    boost::math::beta_distribution<double> beta(a / 2.0, (n - a - 1.0) / 2.0);
    out.ucl_d = (n - 1.0) * (n - 1.0) / n * boost::math::quantile(beta, alpha);
  } else {
    boost::math::fisher_f_distribution<double> f(a, n - a);
    out.ucl_d = a * (n - 1.0) * (n + 1.0) / (n * (n - a)) * boost::math::quantile(f, alpha);
  }

  // Jackson-Mudholkar on the residual eigenvalues.
  double theta1 = 0, theta2 = 0, theta3 = 0;
  for (Eigen::Index i = model.components; i < model.eigenvalues.size(); ++i) {
    const double l = model.eigenvalues(i);
    theta1 += l;
    theta2 += l * l;
    theta3 += l * l * l;
  }
  const double scale = model.eigenvalues.size() > 0 ? model.eigenvalues(0) : 0.0;
  if (!(theta1 > 1e-12 * std::max(scale, 1e-300))) {
    out.note = "residual space is empty; Q limit undefined";
    return out;
  }
  const double h0 = 1.0 - 2.0 * theta1 * theta3 / (3.0 * theta2 * theta2);
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), alpha);
  const double base = z * std::sqrt(2.0 * theta2 * h0 * h0) / theta1 + 1.0 +
                      theta2 * h0 * (h0 - 1.0) / (theta1 * theta1);
  const double q = theta1 * std::pow(base, 1.0 / h0);
  if (!std::isfinite(q) || !(q > 0) || !(h0 > 0)) {
    out.note = "Jackson-Mudholkar approximation degenerate (h0 = " + std::to_string(h0) + ")";
    return out;
  }
  out.ucl_q = q;
  return out;
}

}  // namespace mbda
