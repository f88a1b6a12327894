#ifndef BPHLIFE_GENERATOR_HPP
#define BPHLIFE_GENERATOR_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bphlife/errors.hpp"
#include "bphlife/layout.hpp"
#include "bphlife/params.hpp"

namespace bphlife {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Square submatrix of `Q` on the given flat indices (kept in that order).
inline SparseMatrix principal_submatrix(const SparseMatrix& Q,
                                        const std::vector<Eigen::Index>& keep) {
  std::vector<Eigen::Index> where(static_cast<std::size_t>(Q.cols()), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) where[keep[k]] = static_cast<Eigen::Index>(k);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    for (SparseMatrix::InnerIterator it(Q, keep[r]); it; ++it) {
      const Eigen::Index c = where[it.col()];
      if (c >= 0) trips.emplace_back(static_cast<Eigen::Index>(r), c, it.value());
    }
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// Sub-intensity matrix of the couple chain in block form
//
//   Q = [ Q0  Q01  Q02 ]
//       [ 0   Q1   0   ]
//       [ 0   0    Q2  ]
//
// together with the exit vector, the initial law and the two survival masks.
// Immutable after assembly.
struct BlockGenerator {
  StateSpaceLayout layout;
  SparseMatrix Q;
  Eigen::VectorXd exit;         // q = -Q 1
  Eigen::RowVectorXd initial;   // unit mass on joint(1)
  Eigen::VectorXd wife_alive;     // g1: 1 off the wife-dead states
  Eigen::VectorXd husband_alive;  // g2: 1 off the husband-dead states

  Eigen::Index d0() const { return layout.d0(); }
  Eigen::Index widower_dim() const { return 2 * layout.d1(); }
  Eigen::Index widow_dim() const { return 2 * layout.d2(); }
  Eigen::Index widower_offset() const { return static_cast<Eigen::Index>(layout.widower_offset()); }
  Eigen::Index widow_offset() const { return static_cast<Eigen::Index>(layout.widow_offset()); }

  SparseMatrix joint_block() const { return Q.block(0, 0, d0(), d0()); }
  SparseMatrix joint_to_widower() const {
    return Q.block(0, widower_offset(), d0(), widower_dim());
  }
  SparseMatrix joint_to_widow() const {
    return Q.block(0, widow_offset(), d0(), widow_dim());
  }
  SparseMatrix widower_block() const {
    return Q.block(widower_offset(), widower_offset(), widower_dim(), widower_dim());
  }
  SparseMatrix widow_block() const {
    return Q.block(widow_offset(), widow_offset(), widow_dim(), widow_dim());
  }
  Eigen::RowVectorXd joint_initial() const { return initial.head(d0()); }
};

namespace detail {

// Row-sum round-off tolerated before a positive row sum counts as an error.
inline double row_tolerance(double diag) { return 1e-12 * std::max(1.0, std::abs(diag)); }

}  // namespace detail

// Lists every broken BlockGenerator invariant; empty when the generator is sound.
inline std::vector<std::string> generator_violations(const BlockGenerator& g) {
  std::vector<std::string> out;
  const auto& L = g.layout;
  const auto dim = static_cast<Eigen::Index>(L.dim());
  auto note = [&](Eigen::Index r, Eigen::Index c, const std::string& what) {
    std::ostringstream s;
    s << "(" << r << "," << c << "): " << what;
    out.push_back(s.str());
  };
  auto family = [&](Eigen::Index k) {
    switch (L.label(static_cast<std::size_t>(k)).block) {
      case Block::joint: return 0;
      case Block::widower_bereaved:
      case Block::widower_recovered: return 1;
      default: return 2;
    }
  };

  if (g.Q.rows() != dim || g.Q.cols() != dim) out.push_back("Q has wrong shape");
  if (g.exit.size() != dim || g.initial.size() != dim || g.wife_alive.size() != dim ||
      g.husband_alive.size() != dim) {
    out.push_back("vector length mismatch");
    return out;
  }
  for (Eigen::Index r = 0; r < dim; ++r) {
    double sum = 0.0;
    double diag = 0.0;
    for (SparseMatrix::InnerIterator it(g.Q, r); it; ++it) {
      const double v = it.value();
      if (!std::isfinite(v)) note(r, it.col(), "non-finite entry");
      if (it.col() == r) {
        diag = v;
        if (v > 0.0) note(r, r, "positive diagonal");
      } else {
        if (v < 0.0) note(r, it.col(), "negative off-diagonal");
        const int fr = family(r), fc = family(it.col());
        if (fr != 0 && fr != fc) note(r, it.col(), "breaks block-triangular structure");
      }
      sum += v;
    }
    if (g.exit[r] < 0.0) note(r, r, "negative exit rate");
    if (std::abs(sum + g.exit[r]) > detail::row_tolerance(diag)) note(r, r, "Q1 + q != 0");
  }
  if (std::abs(g.initial.sum() - 1.0) > 1e-15) out.push_back("initial law does not sum to 1");
  for (Eigen::Index k = g.d0(); k < dim; ++k)
    if (g.initial[k] != 0.0) note(k, k, "initial mass outside the joint block");
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double both = g.wife_alive[k] * g.husband_alive[k];
    if (both != (k < g.d0() ? 1.0 : 0.0)) note(k, k, "g1*g2 differs from the joint mask");
  }
  return out;
}

// Builds the sub-intensity matrix of the couple chain.
//
// Death of one spouse moves the survivor into the bereavement phase one
// physiological age up; recovery also moves one age up. The top joint state
// only carries the death rate of the spouse who has reached age n (both when
// i == j, in which case the survivor enters the top bereavement state). The
// top bereavement state has no recovery.
inline BlockGenerator assemble_generator(const ValidatedParams& vp, const StateSpaceLayout& L) {
  const ModelParams& p = vp.get();
  if (L.n() != p.n || L.i() != p.i || L.j() != p.j)
    throw ValidationError("layout does not match parameters");

  const int n = p.n, i = p.i, j = p.j;
  const int d0 = L.d0(), d1 = L.d1(), d2 = L.d2();
  const MortalityLaw wife = p.female();
  const MortalityLaw husband_joint = p.husband_joint();
  const MortalityLaw husband = p.male();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(3 * d0 + 6 * (d1 + d2)));
  auto set = [&](std::size_t r, std::size_t c, double v) {
    trips.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), v);
  };
  // Absorption rates are recorded as they are, not recovered from row sums,
  // so that a zero rate stays exactly zero.
  std::vector<double> absorb(L.dim(), 0.0);
  for (int l = 1; l <= d0; ++l) absorb[L.index(Block::joint, l)] = p.lambda_c;
  auto J = [&](int l) { return L.index(Block::joint, l); };
  auto WB = [&](int l) { return L.index(Block::widower_bereaved, l); };
  auto FB = [&](int l) { return L.index(Block::widow_bereaved, l); };

  // Q0, Q01, Q02.
  for (int l = 1; l < d0; ++l) {
    const double fw = wife.rate(j + l - 1);
    const double mh = husband_joint.rate(i + l - 1);
    set(J(l), J(l), -(p.lambda_c + fw + mh + p.lambda));
    set(J(l), J(l + 1), p.lambda);
    set(J(l), WB(l + 1), fw);
    set(J(l), FB(l + 1), mh);
  }
  if (i < j) {
    set(J(d0), J(d0), -(p.lambda_c + wife.rate(j + d0 - 1)));
    set(J(d0), WB(d0 + 1), wife.rate(n));
  } else if (i > j) {
    set(J(d0), J(d0), -(p.lambda_c + husband_joint.rate(i + d0 - 1)));
    set(J(d0), FB(d0 + 1), husband_joint.rate(n));
  } else {
    set(J(d0), J(d0), -(p.lambda_c + wife.rate(n) + husband_joint.rate(n)));
    set(J(d0), WB(d1), wife.rate(n));
    set(J(d0), FB(d2), husband_joint.rate(n));
  }

  // Q1 and Q2 share one shape.
  auto single_life = [&](Block bereaved, Block recovered, int d, int base,
                         const MortalityLaw& law, double recovery, double multiplier) {
    for (int l = 1; l < d; ++l) {
      const double mu = law.rate(base + l - 1);
      set(L.index(bereaved, l), L.index(bereaved, l), -(recovery + p.lambda_in + multiplier * mu));
      set(L.index(bereaved, l), L.index(bereaved, l + 1), p.lambda_in);
      set(L.index(bereaved, l), L.index(recovered, l + 1), recovery);
      set(L.index(recovered, l), L.index(recovered, l), -(p.lambda_in + mu));
      set(L.index(recovered, l), L.index(recovered, l + 1), p.lambda_in);
      absorb[L.index(bereaved, l)] = multiplier * mu;
      absorb[L.index(recovered, l)] = mu;
    }
    absorb[L.index(bereaved, d)] = multiplier * law.rate(n);
    absorb[L.index(recovered, d)] = law.rate(n);
    set(L.index(bereaved, d), L.index(bereaved, d), -multiplier * law.rate(n));
    set(L.index(recovered, d), L.index(recovered, d), -law.rate(n));
  };
  single_life(Block::widower_bereaved, Block::widower_recovered, d1, i, husband, p.lambda_rm,
              p.lambda_wm);
  single_life(Block::widow_bereaved, Block::widow_recovered, d2, j, wife, p.lambda_rf,
              p.lambda_wf);

  const auto dim = static_cast<Eigen::Index>(L.dim());
  BlockGenerator g{L, SparseMatrix(dim, dim), Eigen::VectorXd::Zero(dim),
                   Eigen::RowVectorXd::Zero(dim), Eigen::VectorXd::Ones(dim),
                   Eigen::VectorXd::Ones(dim)};
  g.Q.setFromTriplets(trips.begin(), trips.end());
  g.Q.prune(0.0);
  g.Q.makeCompressed();

  for (Eigen::Index r = 0; r < dim; ++r) {
    double sum = 0.0, diag = 0.0;
    for (SparseMatrix::InnerIterator it(g.Q, r); it; ++it) {
      sum += it.value();
      if (it.col() == r) diag = it.value();
    }
    if (sum > detail::row_tolerance(diag)) {
      std::ostringstream s;
      s << "positive row sum " << sum << " at state " << r;
      throw NumericalError(s.str());
    }
    if (std::abs(sum + absorb[static_cast<std::size_t>(r)]) > detail::row_tolerance(diag)) {
      std::ostringstream s;
      s << "row sum " << sum << " does not match the absorption rate at state " << r;
      throw NumericalError(s.str());
    }
    g.exit[r] = absorb[static_cast<std::size_t>(r)];
  }

  g.initial[0] = 1.0;
  g.wife_alive.segment(g.widower_offset(), g.widower_dim()).setZero();
  g.husband_alive.segment(g.widow_offset(), g.widow_dim()).setZero();

  if (auto bad = generator_violations(g); !bad.empty())
    throw NumericalError("assembled generator violates invariants: " + bad.front());
  return g;
}

inline BlockGenerator assemble_generator(const ValidatedParams& vp) {
  return assemble_generator(vp, build_layout(vp));
}

inline BlockGenerator assemble_generator(const ModelParams& p) {
  return assemble_generator(validate_params(p));
}

}  // namespace bphlife

#endif  // BPHLIFE_GENERATOR_HPP
