#pragma once

// Small dense solvers used by the longitudinal planner.

#include <Eigen/Dense>
#include <optional>

namespace fcsim::qp {

/// Nonnegative least squares min ||A x - b||, x >= 0 (Lawson-Hanson active
/// set).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Least-distance problem min ||x|| subject to G x >= h, reduced to NNLS.
/// Empty when the constraints are inconsistent.
std::optional<Eigen::VectorXd> least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h);

/// min ||x||^2 subject to E x = e and G x <= g. Empty when infeasible.
std::optional<Eigen::VectorXd> min_norm(const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                                        const Eigen::MatrixXd& G, const Eigen::VectorXd& g);

}  // namespace fcsim::qp
