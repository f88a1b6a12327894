#ifndef BPHLIFE_NUMERICS_HPP
#define BPHLIFE_NUMERICS_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "bphlife/errors.hpp"
#include "bphlife/generator.hpp"

namespace bphlife {

struct ExpmOptions {
  double tol = 1e-12;                  // absolute, max norm
  std::size_t max_terms = 10'000'000;  // cap on uniformization terms
};

// Poisson(mean) probabilities on [left, left + weights.size()), with both
// tails outside the window bounded by tail_tol / 2 each.
struct PoissonWindow {
  std::size_t left = 0;
  std::vector<double> weights;

  std::size_t right() const { return left + weights.size() - 1; }
};

// Weights start at the mode and are extended by the ratio recurrence in both
// directions, so nothing underflows for large means. Each tail is cut once a
// geometric bound on its remaining mass drops below tail_tol / 2.
inline PoissonWindow poisson_window(double mean, double tail_tol,
                                    std::size_t max_terms = 10'000'000) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ValidationError("Poisson mean must be finite and >= 0");
  if (!(tail_tol > 0.0)) throw ValidationError("tolerance must be > 0");
  PoissonWindow win;
  if (mean == 0.0) {
    win.weights = {1.0};
    return win;
  }
  const double half = 0.5 * tail_tol;
  const auto mode = static_cast<std::size_t>(std::floor(mean));
  const double w_mode =
      std::exp(-mean + static_cast<double>(mode) * std::log(mean) - std::lgamma(static_cast<double>(mode) + 1.0));

  std::vector<double> down;  // w[mode-1], w[mode-2], ...
  std::size_t k = mode;
  double w = w_mode;
  while (k > 0) {
    const double next = w * static_cast<double>(k) / mean;  // w[k-1]
    const double ratio = static_cast<double>(k - 1) / mean;
    if (ratio < 1.0 && next / (1.0 - ratio) <= half) break;
    down.push_back(next);
    w = next;
    --k;
  }
  win.left = k;

  std::vector<double> up{w_mode};  // w[mode], w[mode+1], ...
  k = mode;
  w = w_mode;
  for (;;) {
    const double next = w * mean / static_cast<double>(k + 1);  // w[k+1]
    const double ratio = mean / static_cast<double>(k + 2);
    if (ratio < 1.0 && next / (1.0 - ratio) <= half) break;
    up.push_back(next);
    w = next;
    ++k;
    if (k - win.left > max_terms) {
      std::ostringstream s;
      s << "uniformization needs more than " << max_terms << " terms (mean " << mean << ")";
      throw NumericalError(s.str());
    }
  }

  win.weights.assign(down.rbegin(), down.rend());
  win.weights.insert(win.weights.end(), up.begin(), up.end());
  // lgamma loses about mean * eps in relative accuracy at the mode, so
  // renormalise. The truncated tails are below tail_tol, which bounds the
  // bias this introduces.
  double total = 0.0;
  for (double x : win.weights) total += x;
  for (double& x : win.weights) x /= total;
  return win;
}

namespace detail {

inline void require_finite(const SparseMatrix& Q) {
  for (Eigen::Index r = 0; r < Q.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(Q, r); it; ++it)
      if (!std::isfinite(it.value())) throw NumericalError("matrix has a non-finite entry");
}

template <class Vec>
void require_finite_vector(const Vec& v) {
  if (!v.allFinite()) throw NumericalError("vector has a non-finite entry");
}

// Uniformization rate and the stochastic matrix I + Q / theta.
inline double uniformization_rate(const SparseMatrix& Q) {
  double theta = 0.0;
  for (Eigen::Index r = 0; r < Q.outerSize(); ++r) theta = std::max(theta, std::abs(Q.coeff(r, r)));
  return theta;
}

inline SparseMatrix uniformized(const SparseMatrix& Q, double theta) {
  SparseMatrix I(Q.rows(), Q.cols());
  I.setIdentity();
  SparseMatrix P = I + Q / theta;
  P.makeCompressed();
  return P;
}

inline void check_time(double t, const ExpmOptions& opt) {
  if (!std::isfinite(t) || t < 0.0) throw ValidationError("time must be finite and >= 0");
  if (!(opt.tol > 0.0)) throw ValidationError("tolerance must be > 0");
}

}  // namespace detail

// v * exp(Q t) for a row vector v, by uniformization.
inline Eigen::RowVectorXd expm_action_row(const Eigen::RowVectorXd& v, const SparseMatrix& Q,
                                          double t, const ExpmOptions& opt = {}) {
  detail::check_time(t, opt);
  if (Q.rows() != Q.cols() || v.size() != Q.rows())
    throw ValidationError("expm_action_row: dimension mismatch");
  detail::require_finite(Q);
  detail::require_finite_vector(v);
  if (t == 0.0) return v;
  const double theta = detail::uniformization_rate(Q);
  if (theta == 0.0) return v;

  // |v P^k|_inf <= |v|_1 because P is nonnegative and substochastic.
  const double scale = std::max(v.cwiseAbs().sum(), std::numeric_limits<double>::min());
  const PoissonWindow win = poisson_window(theta * t, opt.tol / scale, opt.max_terms);
  const SparseMatrix P = detail::uniformized(Q, theta);

  Eigen::RowVectorXd term = v;
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(v.size());
  for (std::size_t k = 0; k <= win.right(); ++k) {
    if (k >= win.left) acc += win.weights[k - win.left] * term;
    if (k < win.right()) term = term * P;
  }
  return acc;
}

// exp(Q t) * v for a column vector v, by uniformization.
inline Eigen::VectorXd expm_action(const SparseMatrix& Q, const Eigen::VectorXd& v, double t,
                                   const ExpmOptions& opt = {}) {
  detail::check_time(t, opt);
  if (Q.rows() != Q.cols() || v.size() != Q.rows())
    throw ValidationError("expm_action: dimension mismatch");
  detail::require_finite(Q);
  detail::require_finite_vector(v);
  if (t == 0.0) return v;
  const double theta = detail::uniformization_rate(Q);
  if (theta == 0.0) return v;

  // |P^k v|_inf <= |v|_inf.
  const double scale = std::max(v.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const PoissonWindow win = poisson_window(theta * t, opt.tol / scale, opt.max_terms);
  const SparseMatrix P = detail::uniformized(Q, theta);

  Eigen::VectorXd term = v;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(v.size());
  for (std::size_t k = 0; k <= win.right(); ++k) {
    if (k >= win.left) acc += win.weights[k - win.left] * term;
    if (k < win.right()) term = P * term;
  }
  return acc;
}

// v * exp(Q t) at each time of an ascending grid, stepping from one grid point
// to the next.
inline std::vector<Eigen::RowVectorXd> expm_action_row_grid(const Eigen::RowVectorXd& v,
                                                            const SparseMatrix& Q,
                                                            std::span<const double> times,
                                                            const ExpmOptions& opt = {}) {
  std::vector<Eigen::RowVectorXd> out;
  out.reserve(times.size());
  Eigen::RowVectorXd cur = v;
  double now = 0.0;
  for (double t : times) {
    if (!(t >= now)) throw ValidationError("time grid must be ascending and >= 0");
    cur = expm_action_row(cur, Q, t - now, opt);
    now = t;
    out.push_back(cur);
  }
  return out;
}

// x solving (delta I - Q) x = rhs, i.e. the discounted occupation
// integral of exp(Q t) rhs. Upper-triangular Q (the couple generator) is solved
// by back substitution; anything else goes through a sparse LU.
inline Eigen::VectorXd resolvent_solve(const SparseMatrix& Q, double delta, const Eigen::VectorXd& rhs) {
  if (!std::isfinite(delta) || delta < 0.0) throw ValidationError("force of interest must be finite and >= 0");
  if (Q.rows() != Q.cols() || rhs.size() != Q.rows())
    throw ValidationError("resolvent_solve: dimension mismatch");
  detail::require_finite(Q);
  detail::require_finite_vector(rhs);

  const Eigen::Index n = Q.rows();
  SparseMatrix I(n, n);
  I.setIdentity();
  SparseMatrix A = delta * I - Q;
  A.makeCompressed();

  bool upper = true;
  for (Eigen::Index r = 0; r < n && upper; ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
      if (it.col() < r) {
        upper = false;
        break;
      }

  Eigen::VectorXd x;
  if (upper) {
    for (Eigen::Index r = 0; r < n; ++r)
      if (!(A.coeff(r, r) > 0.0))
        throw NumericalError("resolvent is singular: a state has no outflow and no discounting");
    x = A.triangularView<Eigen::Upper>().solve(rhs);
  } else {
    Eigen::SparseMatrix<double> Acm = A;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(Acm);
    lu.factorize(Acm);
    if (lu.info() != Eigen::Success)
      throw NumericalError("resolvent is singular: some class of states is never absorbed");
    x = lu.solve(rhs);
  }

  const double rhs_norm = rhs.cwiseAbs().maxCoeff();
  const double residual = (A * x - rhs).cwiseAbs().maxCoeff();
  if (!x.allFinite() || residual > 1e-10 * std::max(rhs_norm, std::numeric_limits<double>::min()))
    throw NumericalError("resolvent solve failed its residual check");
  return x;
}

// Dense conveniences for small matrices.
inline Eigen::RowVectorXd expm_action_row(const Eigen::RowVectorXd& v, const Eigen::MatrixXd& Q, double t,
                                          const ExpmOptions& opt = {}) {
  return expm_action_row(v, SparseMatrix(Q.sparseView()), t, opt);
}
inline Eigen::VectorXd expm_action(const Eigen::MatrixXd& Q, const Eigen::VectorXd& v, double t,
                                   const ExpmOptions& opt = {}) {
  return expm_action(SparseMatrix(Q.sparseView()), v, t, opt);
}
inline Eigen::VectorXd resolvent_solve(const Eigen::MatrixXd& Q, double delta, const Eigen::VectorXd& rhs) {
  return resolvent_solve(SparseMatrix(Q.sparseView()), delta, rhs);
}

}  // namespace bphlife

#endif  // BPHLIFE_NUMERICS_HPP
