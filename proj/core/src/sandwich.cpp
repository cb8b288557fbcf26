#include "pagarch/sandwich.hpp"

#include <cmath>
#include <limits>

namespace pagarch {

double condition_number(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 1.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s[0] / smin;
}

SandwichCovariance make_sandwich(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& omega,
                                 double n_obs) {
    if (gamma.rows() != gamma.cols() || omega.rows() != gamma.rows() || omega.cols() != gamma.cols()) {
        throw ValidationError("sandwich: gamma and omega must be square and of equal size");
    }
    if (!gamma.allFinite() || !omega.allFinite()) {
        throw NumericalError("sandwich: non-finite Hessian or score variance");
    }
    SandwichCovariance out;
    out.gamma = 0.5 * (gamma + gamma.transpose());
    out.omega = 0.5 * (omega + omega.transpose());
    out.n_obs = n_obs;
    out.condition_number = condition_number(out.gamma);
    if (!(out.condition_number <= kMaxConditionNumber)) {
        throw NumericalError("sandwich: Hessian is singular (condition number " +
                             std::to_string(out.condition_number) + ")");
    }
    const Eigen::MatrixXd g_inv = out.gamma.fullPivLu().inverse();
    const Eigen::MatrixXd s = g_inv * out.omega * g_inv;
    out.sigma = 0.5 * (s + s.transpose());
    return out;
}

}  // namespace pagarch
