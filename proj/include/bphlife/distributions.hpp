#ifndef BPHLIFE_DISTRIBUTIONS_HPP
#define BPHLIFE_DISTRIBUTIONS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "bphlife/errors.hpp"
#include "bphlife/generator.hpp"
#include "bphlife/numerics.hpp"

namespace bphlife {

// Univariate phase-type law: absorption time of (initial, Q).
struct PhaseTypeRep {
  Eigen::RowVectorXd initial;
  SparseMatrix Q;
  Eigen::VectorXd exit;  // -Q 1

  Eigen::Index dim() const { return Q.rows(); }
};

inline PhaseTypeRep make_phase_type(Eigen::RowVectorXd initial, SparseMatrix Q) {
  if (Q.rows() != Q.cols() || initial.size() != Q.rows())
    throw ValidationError("phase-type representation: dimension mismatch");
  if ((initial.array() < 0.0).any() || initial.sum() > 1.0 + 1e-12)
    throw ValidationError("phase-type initial law must be nonnegative with mass <= 1");
  Eigen::VectorXd exit = -(Q * Eigen::VectorXd::Ones(Q.rows()));
  for (Eigen::Index k = 0; k < exit.size(); ++k) {
    if (exit[k] < -1e-12 * std::max(1.0, std::abs(Q.coeff(k, k))))
      throw ValidationError("not a sub-intensity matrix: positive row sum");
    exit[k] = std::max(exit[k], 0.0);
  }
  return {std::move(initial), std::move(Q), std::move(exit)};
}

struct MarginalReps {
  PhaseTypeRep husband;  // T_x: [[Q0, Q01], [0, Q1]]
  PhaseTypeRep wife;     // T_y: [[Q0, Q02], [0, Q2]]
};

inline MarginalReps marginal_reps(const BlockGenerator& g) {
  std::vector<Eigen::Index> husband_states(static_cast<std::size_t>(g.d0() + g.widower_dim()));
  std::iota(husband_states.begin(), husband_states.end(), Eigen::Index{0});

  std::vector<Eigen::Index> wife_states(static_cast<std::size_t>(g.d0()));
  std::iota(wife_states.begin(), wife_states.end(), Eigen::Index{0});
  for (Eigen::Index k = 0; k < g.widow_dim(); ++k) wife_states.push_back(g.widow_offset() + k);

  auto initial_on = [&](Eigen::Index n) {
    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Zero(n);
    pi.head(g.d0()) = g.joint_initial();
    return pi;
  };
  const auto nx = static_cast<Eigen::Index>(husband_states.size());
  const auto ny = static_cast<Eigen::Index>(wife_states.size());
  return {make_phase_type(initial_on(nx), principal_submatrix(g.Q, husband_states)),
          make_phase_type(initial_on(ny), principal_submatrix(g.Q, wife_states))};
}

// min(T_x, T_y), the joint-life status: (pi_0, Q0).
inline PhaseTypeRep minlife_rep(const BlockGenerator& g) {
  return make_phase_type(g.joint_initial(), g.joint_block());
}

namespace detail {
inline void check_nonnegative_time(double t, const char* what) {
  if (!std::isfinite(t) || t < 0.0) throw ValidationError(std::string(what) + " must be finite and >= 0");
}
}  // namespace detail

inline double ph_survival(const PhaseTypeRep& rep, double t, const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t, "t");
  return expm_action_row(rep.initial, rep.Q, t, opt).sum();
}

inline double ph_density(const PhaseTypeRep& rep, double t, const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t, "t");
  return expm_action_row(rep.initial, rep.Q, t, opt).dot(rep.exit);
}

inline std::vector<double> ph_survival_curve(const PhaseTypeRep& rep, std::span<const double> times,
                                             const ExpmOptions& opt = {}) {
  std::vector<double> out;
  out.reserve(times.size());
  for (const auto& w : expm_action_row_grid(rep.initial, rep.Q, times, opt)) out.push_back(w.sum());
  return out;
}

// P(T_x > t_x, T_y > t_y). The mask of the earlier deadline is applied first:
// g2 (husband alive) at t_x, g1 (wife alive) at t_y.
inline double bph_survival(const BlockGenerator& g, double t_x, double t_y, const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t_x, "t_x");
  detail::check_nonnegative_time(t_y, "t_y");
  const bool husband_first = t_x <= t_y;
  const double s = husband_first ? t_x : t_y;
  const double u = husband_first ? t_y : t_x;
  const Eigen::VectorXd& first = husband_first ? g.husband_alive : g.wife_alive;
  const Eigen::VectorXd& second = husband_first ? g.wife_alive : g.husband_alive;

  Eigen::RowVectorXd w = expm_action_row(g.initial, g.Q, s, opt);
  w = w.cwiseProduct(first.transpose());
  w = expm_action_row(w, g.Q, u - s, opt);
  return w.dot(second);
}

namespace detail {
// w * (Q diag(mask) - diag(mask) Q), entry by entry so structural zeros stay exact.
inline Eigen::RowVectorXd times_commutator(const Eigen::RowVectorXd& w, const SparseMatrix& Q,
                                           const Eigen::VectorXd& mask) {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(w.size());
  for (Eigen::Index a = 0; a < Q.outerSize(); ++a) {
    if (w[a] == 0.0) continue;
    for (SparseMatrix::InnerIterator it(Q, a); it; ++it) {
      const double jump = mask[it.col()] - mask[a];
      if (jump != 0.0) out[it.col()] += w[a] * it.value() * jump;
    }
  }
  return out;
}
}  // namespace detail

// Density of the absolutely continuous part at (t_x, t_y), t_x != t_y.
// For t_x > t_y (wife dies first):
//   pi exp(Q t_y) G1 exp(Q (t_x - t_y)) Q g2 1,  G1 = Q g1 - g1 Q,
// and the mirror image for t_y > t_x.
inline double bph_density(const BlockGenerator& g, double t_x, double t_y, const ExpmOptions& opt = {}) {
  if (!(t_x > 0.0) || !(t_y > 0.0) || !std::isfinite(t_x) || !std::isfinite(t_y))
    throw ValidationError("bph_density needs t_x, t_y > 0");
  if (t_x == t_y) throw ValidationError("bph_density is undefined on the diagonal; use singular_mass");
  const bool wife_first = t_x > t_y;
  const double s = wife_first ? t_y : t_x;
  const double u = wife_first ? t_x : t_y;
  const Eigen::VectorXd& first = wife_first ? g.wife_alive : g.husband_alive;
  const Eigen::VectorXd& second = wife_first ? g.husband_alive : g.wife_alive;

  Eigen::RowVectorXd w = expm_action_row(g.initial, g.Q, s, opt);
  w = detail::times_commutator(w, g.Q, first);
  w = expm_action_row(w, g.Q, u - s, opt);
  const Eigen::VectorXd tail = g.Q * second;
  return w.dot(tail);
}

// P(T_x = T_y > t) = pi exp(Q t) Q^{-1} g1 g2 Q 1.
inline double singular_mass(const BlockGenerator& g, double t, const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t, "t");
  // Q^{-1} (g1 g2 Q 1) = (-Q)^{-1} (joint-masked exit).
  const Eigen::VectorXd rhs = g.exit.cwiseProduct(g.wife_alive.cwiseProduct(g.husband_alive));
  const Eigen::VectorXd absorbed = resolvent_solve(g.Q, 0.0, rhs);
  return expm_action_row(g.initial, g.Q, t, opt).dot(absorbed);
}

// Force of mortality of the survivor at time t, given the spouse died at
// t_death:
//   [pi0 exp(Q0 t_d) Q0k exp(Qk (t - t_d)) qk] / [... 1]
// with k the survivor's widowed block and qk = -Qk 1.
inline double conditional_hazard(const BlockGenerator& g, Spouse survivor, double t_death, double t,
                                 const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t_death, "t_death");
  if (!std::isfinite(t) || !(t > t_death)) throw ValidationError("conditional_hazard needs t > t_death");
  const bool husband = survivor == Spouse::husband;
  const SparseMatrix link = husband ? g.joint_to_widower() : g.joint_to_widow();
  const SparseMatrix widowed = husband ? g.widower_block() : g.widow_block();
  const Eigen::VectorXd exit =
      husband ? g.exit.segment(g.widower_offset(), g.widower_dim()) : g.exit.segment(g.widow_offset(), g.widow_dim());

  const Eigen::RowVectorXd joint = expm_action_row(g.joint_initial(), g.joint_block(), t_death, opt);
  Eigen::RowVectorXd w = joint * link;
  // Only the direction matters; normalising keeps the absolute tolerance meaningful.
  const double entry = w.sum();
  if (!(entry > 0.0)) throw NumericalError("conditioning event has zero probability");
  w /= entry;
  w = expm_action_row(w, widowed, t - t_death, opt);
  const double alive = w.sum();
  if (!(alive > 0.0) || !std::isfinite(alive))
    throw NumericalError("conditional survival underflowed; hazard undefined");
  return w.dot(exit) / alive;
}

}  // namespace bphlife

#endif  // BPHLIFE_DISTRIBUTIONS_HPP
