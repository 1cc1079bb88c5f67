#include "fcsim/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fcsim::qp {

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  const double tol = 10 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n)) * std::max(1.0, b.norm());
  const int max_outer = 3 * static_cast<int>(n) + 10;

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = 1;
    Eigen::VectorXd z;
    for (int inner = 0; inner <= n; ++inner) {
      solve_passive(z);
      double alpha = 2.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      if (alpha > 1.0) break;
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = 0;
          x(j) = 0.0;
        }
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) x(j) = passive[static_cast<std::size_t>(j)] ? z(j) : 0.0;
  }
  return x;
}

std::optional<Eigen::VectorXd> least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  const Eigen::Index n = G.cols(), m = G.rows();
  if (m == 0) return Eigen::VectorXd::Zero(n);
  // Lawson & Hanson: with E = [G^T; h^T] and f = e_{n+1}, the NNLS residual
  // r = E u - f gives x = -r(0..n-1) / r(n), provided r != 0.
  Eigen::MatrixXd E(n + 1, m);
  E.topRows(n) = G.transpose();
  E.row(n) = h.transpose();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n + 1);
  f(n) = 1.0;
  const Eigen::VectorXd u = nnls(E, f);
  const Eigen::VectorXd r = E * u - f;
  if (r.norm() < 1e-10 || r(n) > -1e-12) return std::nullopt;
  return Eigen::VectorXd(-r.head(n) / r(n));
}

std::optional<Eigen::VectorXd> min_norm(const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                                        const Eigen::MatrixXd& G, const Eigen::VectorXd& g) {
  const Eigen::Index n = E.cols();
  // Split x = x_p + Z z with x_p the minimum-norm solution of E x = e and
  // Z an orthonormal basis of null(E); then ||x||^2 = ||x_p||^2 + ||z||^2.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(E.transpose());
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::Index r = E.rows();
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
  // E = R^T Q1^T, so x_p = Q1 R^-T e.
  const Eigen::VectorXd y = R.transpose().triangularView<Eigen::Lower>().solve(e);
  const Eigen::VectorXd xp = Q.leftCols(r) * y;
  if ((E * xp - e).norm() > 1e-8 * std::max(1.0, e.norm())) return std::nullopt;
  const Eigen::MatrixXd Z = Q.rightCols(n - r);
  auto z = least_distance(-G * Z, -(g - G * xp));
  if (!z) return std::nullopt;
  return Eigen::VectorXd(xp + Z * *z);
}

}  // namespace fcsim::qp
