#include <algorithm>
#include <cmath>
#include <limits>

#include "ghiest/orientation_id.hpp"
#include "ghiest/stats.hpp"

namespace ghiest {

namespace {

// Unconstrained least squares restricted to the passive columns.
Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (passive[j]) cols.push_back(j);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  if (cols.empty()) return z;
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
  for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = s[static_cast<Eigen::Index>(k)];
  return z;
}

double huber_loss(const Eigen::VectorXd& r, double c) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double a = std::abs(r[i]);
    sum += a <= c ? 0.5 * a * a : c * (a - 0.5 * c);
  }
  return sum;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  if (a.rows() != b.size()) throw InputError("nnls: dimension mismatch");
  const Eigen::Index n = a.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * std::max<Eigen::Index>(n, 1));

  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  if (n == 0) return res;

  const double col_norm = a.cwiseAbs().colwise().sum().maxCoeff();
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * col_norm * static_cast<double>(std::max(a.rows(), n));

  std::vector<bool> passive(n, false);
  Eigen::VectorXd& x = res.x;
  Eigen::VectorXd w = a.transpose() * (b - a * x);

  int it = 0;
  while (true) {
    // Most positive dual among the active set.
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    if (best < 0) break;
    if (it >= max_iterations) {
      res.converged = false;
      break;
    }
    passive[best] = true;

    Eigen::VectorXd z = solve_passive(a, b, passive);
    if (z[best] <= 0.0) {
      // Column is numerically dependent on the passive set; leave it out.
      passive[best] = false;
      w[best] = 0.0;
      ++it;
      continue;
    }
    // Inner loop: step back toward feasibility.
    while (true) {
      ++it;
      double alpha = std::numeric_limits<double>::infinity();
      bool infeasible = false;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) {
          infeasible = true;
          alpha = std::min(alpha, x[j] / (x[j] - z[j]));
        }
      if (!infeasible) break;
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && x[j] <= tol * 1e-3) {
          passive[j] = false;
          x[j] = 0.0;
        }
      z = solve_passive(a, b, passive);
      if (it >= max_iterations) break;
    }
    x = z;
    w = a.transpose() * (b - a * x);
  }
  for (Eigen::Index j = 0; j < n; ++j) x[j] = std::max(x[j], 0.0);
  res.iterations = it;
  return res;
}

HuberIrlsResult huber_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const HuberIrlsOptions& opt) {
  HuberIrlsResult res;
  res.x = nnls(a, b).x;
  if (b.size() == 0) return res;

  Eigen::VectorXd r = b - a * res.x;
  std::vector<double> rv(r.data(), r.data() + r.size());
  const double mean_abs = b.cwiseAbs().mean();
  res.scale = std::max(mad(rv) / 0.6745, 1e-6 * mean_abs);
  if (!(res.scale > 0.0)) return res;  // b == 0
  const double c = opt.tuning * res.scale;
  res.objective.push_back(huber_loss(r, c));

  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::VectorXd sw(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double ar = std::abs(r[i]);
      sw[i] = std::sqrt(ar <= c ? 1.0 : c / ar);
    }
    const Eigen::MatrixXd aw = sw.asDiagonal() * a;
    const Eigen::VectorXd bw = sw.asDiagonal() * b;
    Eigen::VectorXd x = nnls(aw, bw).x;
    const double change = (x - res.x).norm();
    const double size = std::max(res.x.norm(), std::numeric_limits<double>::min());
    res.x = std::move(x);
    r = b - a * res.x;
    res.objective.push_back(huber_loss(r, c));
    res.iterations = it + 1;
    if (change <= opt.tolerance * size) break;
  }

  const double top = res.x.size() ? res.x.maxCoeff() : 0.0;
  for (Eigen::Index j = 0; j < res.x.size(); ++j)
    if (res.x[j] < opt.sparsity * top) res.x[j] = 0.0;
  return res;
}

}  // namespace ghiest
