#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bphlife/actuarial.hpp"
#include "oracles.hpp"

using namespace bphlife;

namespace {

ModelParams couple_at(int i, int j) {
  auto p = reference_couple_params();
  p.i = i;
  p.j = j;
  return p;
}

ModelParams small_couple() {
  ModelParams p;
  p.a_m = 0.03;
  p.b_m = 0.002;
  p.c_m = 1.5;
  p.a_f = 0.02;
  p.b_f = 0.001;
  p.c_f = 1.7;
  p.lambda_c = 0.01;
  p.lambda = 0.4;
  p.lambda_in = 1.0;
  p.lambda_rm = 0.5;
  p.lambda_rf = 0.7;
  p.lambda_wm = 2.0;
  p.lambda_wf = 1.5;
  p.n = 12;
  p.i = 3;
  p.j = 2;
  return p;
}

}  // namespace

TEST(Discount, ForceOfInterest) {
  const auto d = DiscountSpec::from_annual_rate(0.05);
  EXPECT_NEAR(d.delta, std::log(1.05), 1e-16);
  EXPECT_NEAR(DiscountSpec::from_force(d.delta).annual_rate, 0.05, 1e-15);
  EXPECT_THROW(DiscountSpec::from_annual_rate(-1.0), ValidationError);
  EXPECT_THROW(DiscountSpec::from_annual_rate(std::nan("")), ValidationError);
}

TEST(StateProbabilities, AtTimeZero) {
  const auto g = assemble_generator(couple_at(100, 84));
  const auto s = state_probabilities(g, 0.0);
  EXPECT_DOUBLE_EQ(s.p00, 1.0);
  EXPECT_DOUBLE_EQ(s.p_x, 1.0);
  EXPECT_DOUBLE_EQ(s.p_y, 1.0);
  EXPECT_DOUBLE_EQ(s.p01, 0.0);
  EXPECT_DOUBLE_EQ(s.p02, 0.0);
  EXPECT_THROW(state_probabilities(g, -1.0), ValidationError);
}

TEST(StateProbabilities, PartitionOfTheAliveEvent) {
  const auto g = assemble_generator(small_couple());
  const Eigen::MatrixXd Q(g.Q);
  for (double t : {0.5, 3.0, 12.0, 40.0}) {
    const auto s = state_probabilities(g, t);
    const double any_alive = (g.initial * oracle::expm_taylor(Q * t)).sum();
    EXPECT_NEAR(s.p00 + s.p01 + s.p02, any_alive, 1e-11) << t;
    EXPECT_GE(s.p01, -1e-12);
    EXPECT_GE(s.p02, -1e-12);
  }
}

TEST(StateProbabilities, CurvesMatchPointwise) {
  const auto g = assemble_generator(couple_at(100, 84));
  std::vector<double> grid;
  for (double t = 0.0; t <= 60.0; t += 2.5) grid.push_back(t);
  const auto curves = state_probability_curves(g, grid);
  ASSERT_EQ(curves.size(), grid.size());
  for (std::size_t k = 0; k < grid.size(); k += 6) {
    const auto s = state_probabilities(g, grid[k]);
    EXPECT_NEAR(curves[k].p00, s.p00, 1e-11);
    EXPECT_NEAR(curves[k].p01, s.p01, 1e-11);
    EXPECT_NEAR(curves[k].p02, s.p02, 1e-11);
  }
}

TEST(Annuities, MatchDiscountedSurvivalIntegrals) {
  const auto g = assemble_generator(small_couple());
  const Eigen::MatrixXd Q(g.Q);
  const double delta = std::log(1.05);
  const auto nodes = oracle::gauss_panels(0.0, 800.0, 4.0);
  double ax = 0.0, ay = 0.0, axy = 0.0, alast = 0.0;
  for (std::size_t k = 0; k < nodes.x.size(); ++k) {
    const Eigen::RowVectorXd w = g.initial * oracle::expm_taylor(Q * nodes.x[k]);
    const double v = nodes.w[k] * std::exp(-delta * nodes.x[k]);
    ax += v * w.dot(g.husband_alive);
    ay += v * w.dot(g.wife_alive);
    axy += v * w.dot(g.husband_alive.cwiseProduct(g.wife_alive));
    alast += v * w.sum();
  }
  const auto a = annuities(g, DiscountSpec::from_force(delta));
  EXPECT_NEAR(a.a_x, ax, 1e-8);
  EXPECT_NEAR(a.a_y, ay, 1e-8);
  EXPECT_NEAR(a.a_joint, axy, 1e-8);
  EXPECT_NEAR(a.a_last, alast, 1e-8);
  EXPECT_NEAR(a.a_rev, ay - axy, 1e-8);
}

TEST(Annuities, LastSurvivorIsTheWholeChain) {
  const auto g = assemble_generator(couple_at(100, 84));
  for (double rate : {0.05, 0.10, 0.15}) {
    const auto d = DiscountSpec::from_annual_rate(rate);
    const auto a = annuities(g, d);
    const double direct = g.initial.dot(resolvent_solve(g.Q, d.delta, Eigen::VectorXd::Ones(g.Q.rows())));
    EXPECT_NEAR(a.a_last, direct, 1e-9 * direct);
  }
}

TEST(Annuities, Ordering) {
  const auto g = assemble_generator(couple_at(100, 84));
  const auto a = annuities(g, DiscountSpec::from_annual_rate(0.05));
  EXPECT_GT(a.a_joint, 0.0);
  EXPECT_LE(a.a_joint, std::min(a.a_x, a.a_y));
  EXPECT_GE(a.a_last, std::max(a.a_x, a.a_y));
  EXPECT_LE(a.a_last, 1.0 / a.delta);
  EXPECT_GE(a.a_rev, 0.0);
}

TEST(Annuities, DecreaseWithInterest) {
  const auto g = assemble_generator(couple_at(100, 84));
  Annuities previous = annuities(g, DiscountSpec::from_annual_rate(0.01));
  for (double rate = 0.02; rate <= 0.3; rate += 0.01) {
    const auto a = annuities(g, DiscountSpec::from_annual_rate(rate));
    EXPECT_LT(a.a_joint, previous.a_joint);
    EXPECT_LT(a.a_x, previous.a_x);
    EXPECT_LT(a.a_y, previous.a_y);
    EXPECT_LT(a.a_last, previous.a_last);
    previous = a;
  }
}

TEST(Annuities, ExtremeDiscounting) {
  const auto g = assemble_generator(couple_at(100, 84));
  EXPECT_LT(annuities(g, DiscountSpec::from_force(1e3)).a_joint, 1e-2);
  const auto A = insurances(g, DiscountSpec::from_force(1e-8));
  EXPECT_NEAR(A.A_joint, 1.0, 1e-4);
  EXPECT_NEAR(A.A_x, 1.0, 1e-4);
  EXPECT_NEAR(A.A_y, 1.0, 1e-4);
  EXPECT_NEAR(A.A_last, 1.0, 1e-4);
  EXPECT_THROW(annuities(g, DiscountSpec::from_force(0.0)), ValidationError);
}

TEST(Insurances, MatchDiscountedDeathDensity) {
  const auto g = assemble_generator(small_couple());
  const auto m = marginal_reps(g);
  const double delta = 0.07;
  const auto nodes = oracle::gauss_panels(0.0, 800.0, 4.0);
  double Ax = 0.0, Axy = 0.0;
  for (std::size_t k = 0; k < nodes.x.size(); ++k) {
    const double v = nodes.w[k] * std::exp(-delta * nodes.x[k]);
    Ax += v * ph_density(m.husband, nodes.x[k]);
    Axy += v * ph_density(minlife_rep(g), nodes.x[k]);
  }
  const auto A = insurances(g, DiscountSpec::from_force(delta));
  EXPECT_NEAR(A.A_x, Ax, 1e-8);
  EXPECT_NEAR(A.A_joint, Axy, 1e-8);
  EXPECT_GE(A.A_joint, std::max(A.A_x, A.A_y));
  EXPECT_LE(A.A_last, std::min(A.A_x, A.A_y));
}

TEST(ApvTable, OneRowPerRate) {
  const auto g = assemble_generator(couple_at(100, 84));
  const std::vector<double> rates{0.05, 0.10, 0.15};
  const auto rows = apv_table(g, rates);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_DOUBLE_EQ(rows[k].discount.annual_rate, rates[k]);
    EXPECT_NEAR(rows[k].insurance.A_x, 1.0 - rows[k].discount.delta * rows[k].annuity.a_x, 1e-15);
  }
  const std::vector<double> bad{0.05, -1.5};
  EXPECT_THROW(apv_table(g, bad), ValidationError);
}

TEST(AgeDistribution, NewbornIsInTheFirstState) {
  const auto d = physiological_age_from_real_age(reference_couple_params(), Sex::female, 0.0);
  EXPECT_DOUBLE_EQ(d.probability[0], 1.0);
  EXPECT_DOUBLE_EQ(d.mean, 1.0);
  EXPECT_EQ(d.rounded_index, 1);
}

TEST(AgeDistribution, ConstantMortalityGivesShiftedPoisson) {
  auto p = reference_couple_params();
  p.b_f = 0.0;
  const auto d = physiological_age_from_real_age(p, Sex::female, 10.0);
  EXPECT_NEAR(d.mean, 1.0 + 10.0 * p.lambda_in, 0.01);
  EXPECT_NEAR(d.mean, 24.707, 0.01);
  EXPECT_EQ(d.rounded_index, 25);
  double total = 0.0;
  for (double x : d.probability) total += x;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(AgeDistribution, ReferenceCouple) {
  const auto ages = issue_ages_from_real_ages(reference_couple_params(), 42.0, 35.0);
  EXPECT_EQ(ages.i, 100);
  EXPECT_EQ(ages.j, 84);
  EXPECT_NEAR(ages.husband.mean, 99.775, 0.01);
  EXPECT_NEAR(ages.wife.mean, 83.95, 0.01);
}

TEST(AgeDistribution, RejectsBadAges) {
  EXPECT_THROW(physiological_age_from_real_age(reference_couple_params(), Sex::male, -1.0), ValidationError);
  EXPECT_THROW(physiological_age_from_real_age(reference_couple_params(), Sex::male, INFINITY), ValidationError);
}

TEST(StateProbabilities, AddUpWithBothDead) {
  const auto g = assemble_generator(couple_at(100, 84));
  for (double t : {5.0, 25.0, 60.0}) {
    const auto s = state_probabilities(g, t);
    const double both_dead = 1.0 - expm_action_row(g.initial, g.Q, t).sum();
    EXPECT_NEAR(s.p00 + s.p01 + s.p02 + both_dead, 1.0, 1e-10) << t;
  }
}
