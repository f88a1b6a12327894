#ifndef BPHLIFE_SIMULATION_HPP
#define BPHLIFE_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <type_traits>
#include <variant>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bphlife/errors.hpp"
#include "bphlife/generator.hpp"

namespace bphlife {

// One simulated couple. Death times are +inf if the chain never absorbs.
struct CouplePath {
  double t_x = 0.0;  // husband's death time
  double t_y = 0.0;  // wife's death time
  bool simultaneous = false;       // common shock from the joint block
  bool husband_bereaved = false;   // husband outlived his wife
  bool wife_bereaved = false;      // wife outlived her husband
  bool husband_recovered = false;  // widower reached the recovered phase
  bool wife_recovered = false;     // widow reached the recovered phase
};

struct PathSample {
  std::uint64_t seed = 0;
  std::vector<CouplePath> paths;
};

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

// SplitMix64 finaliser; maps (seed, stream) to a well-mixed 64-bit seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

// Outgoing jumps of each transient state; target -1 is the absorbing state.
struct JumpTable {
  std::vector<double> total_rate;
  std::vector<std::size_t> begin;  // CSR offsets, size dim + 1
  std::vector<int> target;
  std::vector<double> cumulative;  // cumulative jump probability within a row
  std::vector<int> family;         // 0 joint, 1 widower, 2 widow
  std::vector<char> recovered;     // 1 on recovered-phase states
};

inline JumpTable jump_table(const BlockGenerator& g) {
  JumpTable jt;
  const auto dim = static_cast<std::size_t>(g.Q.rows());
  jt.total_rate.resize(dim);
  jt.begin.assign(dim + 1, 0);
  jt.family.resize(dim);
  jt.recovered.resize(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    const auto label = g.layout.label(s);
    switch (label.block) {
      case Block::joint: jt.family[s] = 0; break;
      case Block::widower_bereaved: jt.family[s] = 1; break;
      case Block::widower_recovered: jt.family[s] = 1; jt.recovered[s] = 1; break;
      case Block::widow_bereaved: jt.family[s] = 2; break;
      case Block::widow_recovered: jt.family[s] = 2; jt.recovered[s] = 1; break;
    }
    double total = 0.0;
    const std::size_t first = jt.target.size();
    for (SparseMatrix::InnerIterator it(g.Q, static_cast<Eigen::Index>(s)); it; ++it) {
      if (it.col() == static_cast<Eigen::Index>(s) || it.value() <= 0.0) continue;
      total += it.value();
      jt.target.push_back(static_cast<int>(it.col()));
      jt.cumulative.push_back(total);
    }
    const double exit = g.exit[static_cast<Eigen::Index>(s)];
    if (exit > 0.0) {
      total += exit;
      jt.target.push_back(-1);
      jt.cumulative.push_back(total);
    }
    for (std::size_t k = first; k < jt.cumulative.size(); ++k) jt.cumulative[k] /= total;
    if (jt.cumulative.size() > first) jt.cumulative.back() = 1.0;
    jt.total_rate[s] = total;
    jt.begin[s + 1] = jt.target.size();
  }
  return jt;
}

inline CouplePath simulate_one(const JumpTable& jt, const Eigen::RowVectorXd& initial, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr double inf = std::numeric_limits<double>::infinity();

  int state = 0;
  if (initial[0] != 1.0) {
    double u = unif(rng), acc = 0.0;
    for (Eigen::Index k = 0; k < initial.size(); ++k) {
      acc += initial[k];
      state = static_cast<int>(k);
      if (u < acc) break;
    }
  }

  CouplePath path{inf, inf};
  double t = 0.0;
  for (;;) {
    const auto s = static_cast<std::size_t>(state);
    const double rate = jt.total_rate[s];
    if (!(rate > 0.0)) break;  // trapped: remaining deaths never happen
    t += -std::log1p(-unif(rng)) / rate;
    const double u = unif(rng);
    std::size_t k = jt.begin[s];
    while (k + 1 < jt.begin[s + 1] && u >= jt.cumulative[k]) ++k;
    const int next = jt.target[k];
    const int from = jt.family[s];

    if (next < 0) {
      if (from == 0) {
        path.t_x = path.t_y = t;
        path.simultaneous = true;
      } else if (from == 1) {
        path.t_x = t;
      } else {
        path.t_y = t;
      }
      break;
    }
    const auto ns = static_cast<std::size_t>(next);
    const int to = jt.family[ns];
    if (from == 0 && to == 1) {
      path.t_y = t;
      path.husband_bereaved = true;
    } else if (from == 0 && to == 2) {
      path.t_x = t;
      path.wife_bereaved = true;
    }
    if (jt.recovered[ns]) (to == 1 ? path.husband_recovered : path.wife_recovered) = true;
    state = next;
  }
  return path;
}

}  // namespace detail

// Exact simulation of the couple chain: exponential holding times, then a jump
// chosen in proportion to the outgoing rates. Path k uses its own generator
// seeded from (seed, k), so results do not depend on the thread count.
inline PathSample simulate_paths(const BlockGenerator& g, std::size_t n_paths, std::uint64_t seed,
                                 int threads = 0) {
  if (n_paths < 1) throw ValidationError("simulate_paths needs n_paths >= 1");
  const auto jt = detail::jump_table(g);
  PathSample out{seed, std::vector<CouplePath>(n_paths)};
  const auto n = static_cast<std::int64_t>(n_paths);
#ifdef _OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
#else
  (void)threads;
#endif
  for (std::int64_t k = 0; k < n; ++k)
    out.paths[static_cast<std::size_t>(k)] =
        detail::simulate_one(jt, g.initial, stream_seed(seed, static_cast<std::uint64_t>(k)));
  return out;
}

// Per-path functionals.
struct SurvivalAt {
  double t_x = 0.0;
  double t_y = 0.0;
};
struct DiscountedJointAnnuity {  // (1 - exp(-delta min(T_x, T_y))) / delta
  double delta = 0.0;
};
struct SimultaneousFraction {};
struct BinProbability {  // P(T_x in [x_lo, x_hi), T_y in [y_lo, y_hi))
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
};
using Functional = std::variant<SurvivalAt, DiscountedJointAnnuity, SimultaneousFraction, BinProbability>;

inline double evaluate(const Functional& f, const CouplePath& p) {
  return std::visit(
      [&](const auto& fn) -> double {
        using F = std::decay_t<decltype(fn)>;
        if constexpr (std::is_same_v<F, SurvivalAt>) {
          return (p.t_x > fn.t_x && p.t_y > fn.t_y) ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<F, DiscountedJointAnnuity>) {
          return -std::expm1(-fn.delta * std::min(p.t_x, p.t_y)) / fn.delta;
        } else if constexpr (std::is_same_v<F, SimultaneousFraction>) {
          return p.simultaneous ? 1.0 : 0.0;
        } else {
          return (p.t_x >= fn.x_lo && p.t_x < fn.x_hi && p.t_y >= fn.y_lo && p.t_y < fn.y_hi) ? 1.0 : 0.0;
        }
      },
      f);
}

// Sample mean with standard error sd / sqrt(n) of any per-path functional.
template <class PerPath>
  requires std::invocable<PerPath&, const CouplePath&>
MonteCarloEstimate estimate_functional(const PathSample& sample, PerPath&& per_path) {
  const auto& paths = sample.paths;
  if (paths.empty()) throw ValidationError("estimate_functional needs at least one path");
  const auto n = static_cast<double>(paths.size());
  double mean = 0.0;
  for (const auto& p : paths) mean += per_path(p);
  mean /= n;
  double ss = 0.0;
  for (const auto& p : paths) {
    const double d = per_path(p) - mean;
    ss += d * d;
  }
  const double sd = paths.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n), paths.size(), sample.seed};
}

inline MonteCarloEstimate estimate_functional(const PathSample& sample, const Functional& f) {
  return estimate_functional(sample, [&](const CouplePath& p) { return evaluate(f, p); });
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("correlation needs two equal samples of size >= 2");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx, dy = y[k] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("correlation of a zero-variance sample");
  return sxy / std::sqrt(sxx * syy);
}

// Kendall's tau-b in O(n log n) (Knight's merge-sort count).
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("kendall tau needs two equal samples of size >= 2");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  auto tie_pairs = [](std::int64_t run) { return run * (run - 1) / 2; };
  std::int64_t ties_x = 0, ties_xy = 0;
  {
    std::int64_t run_x = 1, run_xy = 1;
    for (std::size_t k = 1; k < n; ++k) {
      const auto a = order[k - 1], b = order[k];
      if (x[a] == x[b]) {
        ++run_x;
        run_xy = (y[a] == y[b]) ? run_xy + 1 : (ties_xy += tie_pairs(run_xy), 1);
      } else {
        ties_x += tie_pairs(run_x);
        ties_xy += tie_pairs(run_xy);
        run_x = run_xy = 1;
      }
    }
    ties_x += tie_pairs(run_x);
    ties_xy += tie_pairs(run_xy);
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t a = lo, b = mid, o = lo;
      while (a < mid && b < hi) {
        if (ys[a] <= ys[b]) {
          buf[o++] = ys[a++];
        } else {
          swaps += static_cast<std::int64_t>(mid - a);
          buf[o++] = ys[b++];
        }
      }
      while (a < mid) buf[o++] = ys[a++];
      while (b < hi) buf[o++] = ys[b++];
    }
    ys.swap(buf);
  }

  std::int64_t ties_y = 0, run_y = 1;
  for (std::size_t k = 1; k < n; ++k) {
    if (ys[k] == ys[k - 1]) {
      ++run_y;
    } else {
      ties_y += tie_pairs(run_y);
      run_y = 1;
    }
  }
  ties_y += tie_pairs(run_y);

  const auto pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const double denom = std::sqrt(static_cast<double>(pairs - ties_x) * static_cast<double>(pairs - ties_y));
  if (!(denom > 0.0)) throw NumericalError("kendall tau of a sample with no untied pairs");
  return static_cast<double>(pairs - ties_x - ties_y + ties_xy - 2 * swaps) / denom;
}

struct CorrelationEstimate {
  MonteCarloEstimate pearson;
  MonteCarloEstimate kendall;
};

// Pearson and Kendall correlation of (T_x, T_y) with bootstrap standard
// errors. Paths with an infinite death time are not allowed.
inline CorrelationEstimate estimate_correlation(const PathSample& sample, int resamples = 200) {
  const std::size_t n = sample.paths.size();
  if (n < 1000) throw ValidationError("estimate_correlation needs at least 1000 paths");
  if (resamples < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = sample.paths[k].t_x;
    y[k] = sample.paths[k].t_y;
    if (!std::isfinite(x[k]) || !std::isfinite(y[k])) throw NumericalError("correlation of paths that never absorb");
  }

  CorrelationEstimate out;
  out.pearson = {pearson_correlation(x, y), 0.0, n, sample.seed};
  out.kendall = {kendall_tau_b(x, y), 0.0, n, sample.seed};

  std::mt19937_64 rng(stream_seed(sample.seed, 0xb0075u));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> bx(n), by(n), ps, ks;
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = pick(rng);
      bx[k] = x[idx];
      by[k] = y[idx];
    }
    ps.push_back(pearson_correlation(bx, by));
    ks.push_back(kendall_tau_b(bx, by));
  }
  auto sd = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double e : v) ss += (e - m) * (e - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  out.pearson.std_error = sd(ps);
  out.kendall.std_error = sd(ks);
  return out;
}

}  // namespace bphlife

#endif  // BPHLIFE_SIMULATION_HPP
