#ifndef BPHLIFE_ACTUARIAL_HPP
#define BPHLIFE_ACTUARIAL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bphlife/distributions.hpp"
#include "bphlife/errors.hpp"
#include "bphlife/generator.hpp"
#include "bphlife/numerics.hpp"
#include "bphlife/params.hpp"

namespace bphlife {

// Continuous discounting. `delta` is the force of interest ln(1 + i) for an
// annual effective rate i.
struct DiscountSpec {
  double annual_rate = 0.0;
  double delta = 0.0;

  static DiscountSpec from_annual_rate(double i) {
    if (!std::isfinite(i) || !(i > -1.0)) throw ValidationError("annual interest rate must be > -1");
    return {i, std::log1p(i)};
  }
  // Override: set the force of interest directly.
  static DiscountSpec from_force(double delta) {
    if (!std::isfinite(delta)) throw ValidationError("force of interest must be finite");
    return {std::expm1(delta), delta};
  }
};

struct StateProbabilities {
  double p00 = 0.0;  // both alive
  double p_x = 0.0;  // husband alive
  double p_y = 0.0;  // wife alive
  double p01 = 0.0;  // husband alive, wife dead
  double p02 = 0.0;  // wife alive, husband dead
};

inline StateProbabilities state_probabilities(const BlockGenerator& g, double t, const ExpmOptions& opt = {}) {
  detail::check_nonnegative_time(t, "t");
  const auto marg = marginal_reps(g);
  StateProbabilities s;
  s.p00 = ph_survival(minlife_rep(g), t, opt);
  s.p_x = ph_survival(marg.husband, t, opt);
  s.p_y = ph_survival(marg.wife, t, opt);
  s.p01 = s.p_x - s.p00;
  s.p02 = s.p_y - s.p00;
  return s;
}

// Same quantities on an ascending time grid.
inline std::vector<StateProbabilities> state_probability_curves(const BlockGenerator& g,
                                                                std::span<const double> times,
                                                                const ExpmOptions& opt = {}) {
  const auto marg = marginal_reps(g);
  const auto p00 = ph_survival_curve(minlife_rep(g), times, opt);
  const auto px = ph_survival_curve(marg.husband, times, opt);
  const auto py = ph_survival_curve(marg.wife, times, opt);
  std::vector<StateProbabilities> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    out[k] = {p00[k], px[k], py[k], px[k] - p00[k], py[k] - p00[k]};
  return out;
}

// Continuous whole-life annuities paying 1 per year.
struct Annuities {
  double delta = 0.0;
  double a_joint = 0.0;  // while both alive
  double a_x = 0.0;      // while the husband is alive
  double a_y = 0.0;      // while the wife is alive
  double a_last = 0.0;   // while at least one is alive
  double a_rev = 0.0;    // to the wife after the husband's death
};

// Whole-life insurances paying 1 at the moment of the relevant death.
struct Insurances {
  double A_joint = 0.0;
  double A_x = 0.0;
  double A_y = 0.0;
  double A_last = 0.0;
};

// pi (delta I - Q)^{-1} 1 for a phase-type lifetime.
inline double annuity_value(const PhaseTypeRep& rep, double delta) {
  return rep.initial.dot(resolvent_solve(rep.Q, delta, Eigen::VectorXd::Ones(rep.dim())));
}

inline Annuities annuities(const BlockGenerator& g, const DiscountSpec& disc) {
  if (!(disc.delta > 0.0)) throw ValidationError("annuities need a positive force of interest");
  const auto marg = marginal_reps(g);
  Annuities a;
  a.delta = disc.delta;
  a.a_joint = annuity_value(minlife_rep(g), disc.delta);
  a.a_x = annuity_value(marg.husband, disc.delta);
  a.a_y = annuity_value(marg.wife, disc.delta);
  a.a_last = a.a_x + a.a_y - a.a_joint;
  a.a_rev = a.a_y - a.a_joint;
  return a;
}

inline Insurances insurances(const Annuities& a) {
  Insurances A;
  A.A_joint = 1.0 - a.delta * a.a_joint;
  A.A_x = 1.0 - a.delta * a.a_x;
  A.A_y = 1.0 - a.delta * a.a_y;
  A.A_last = A.A_x + A.A_y - A.A_joint;
  return A;
}

inline Insurances insurances(const BlockGenerator& g, const DiscountSpec& disc) {
  return insurances(annuities(g, disc));
}

struct ApvRow {
  DiscountSpec discount;
  Annuities annuity;
  Insurances insurance;
};

inline std::vector<ApvRow> apv_table(const BlockGenerator& g, std::span<const double> annual_rates) {
  std::vector<ApvRow> rows;
  rows.reserve(annual_rates.size());
  for (double r : annual_rates) {
    const auto disc = DiscountSpec::from_annual_rate(r);
    const auto a = annuities(g, disc);
    rows.push_back({disc, a, insurances(a)});
  }
  return rows;
}

// Law of the physiological age of a single life that is alive at a given
// real age: the chain 1 -> 2 -> ... -> n aging at lambda_in with death rate
// a + b k^c at age k, started at age 1 and conditioned on survival.
struct AgeDistribution {
  std::vector<double> probability;  // probability[k - 1] = P(age k)
  double mean = 0.0;
  int rounded_index = 1;            // nearest integer to the mean, in [1, n]
};

inline SparseMatrix single_life_aging_chain(const ModelParams& p, Sex sex) {
  const MortalityLaw law = p.law(sex);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k < p.n; ++k) {
    trips.emplace_back(k - 1, k - 1, -(p.lambda_in + law.rate(k)));
    trips.emplace_back(k - 1, k, p.lambda_in);
  }
  trips.emplace_back(p.n - 1, p.n - 1, -law.rate(p.n));
  SparseMatrix Q(p.n, p.n);
  Q.setFromTriplets(trips.begin(), trips.end());
  return Q;
}

inline AgeDistribution physiological_age_from_real_age(const ModelParams& params, Sex sex, double real_age) {
  if (!std::isfinite(real_age) || real_age < 0.0) throw ValidationError("real age must be finite and >= 0");
  ModelParams p = params;
  p.i = p.j = 1;
  validate_params(p);

  const SparseMatrix Q = single_life_aging_chain(p, sex);
  Eigen::RowVectorXd start = Eigen::RowVectorXd::Zero(p.n);
  start[0] = 1.0;

  ExpmOptions opt;
  Eigen::RowVectorXd w = expm_action_row(start, Q, real_age, opt);
  double mass = w.sum();
  if (std::isfinite(mass) && mass > 0.0 && mass < 1e-4) {
    // Tighten the absolute tolerance relative to the surviving mass.
    opt.tol = std::max(mass * 1e-12, 1e-300);
    w = expm_action_row(start, Q, real_age, opt);
    mass = w.sum();
  }
  if (!std::isfinite(mass) || mass < 1e-280)
    throw NumericalError("survival mass underflow: real age too large for the aging chain");

  AgeDistribution d;
  d.probability.resize(static_cast<std::size_t>(p.n));
  for (int k = 1; k <= p.n; ++k) {
    const double pr = std::max(w[k - 1], 0.0) / mass;
    d.probability[static_cast<std::size_t>(k - 1)] = pr;
    d.mean += k * pr;
  }
  d.rounded_index = std::clamp(static_cast<int>(std::lround(d.mean)), 1, p.n);
  return d;
}

struct IssueAges {
  int i = 1;
  int j = 1;
  AgeDistribution husband;
  AgeDistribution wife;
};

// Physiological issue ages (i, j) for a couple of real ages (x, y).
inline IssueAges issue_ages_from_real_ages(const ModelParams& p, double husband_real_age, double wife_real_age) {
  IssueAges out;
  out.husband = physiological_age_from_real_age(p, Sex::male, husband_real_age);
  out.wife = physiological_age_from_real_age(p, Sex::female, wife_real_age);
  out.i = out.husband.rounded_index;
  out.j = out.wife.rounded_index;
  return out;
}

}  // namespace bphlife

#endif  // BPHLIFE_ACTUARIAL_HPP
