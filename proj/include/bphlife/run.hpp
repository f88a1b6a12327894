#ifndef BPHLIFE_RUN_HPP
#define BPHLIFE_RUN_HPP

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bphlife/actuarial.hpp"
#include "bphlife/config.hpp"
#include "bphlife/distributions.hpp"
#include "bphlife/generator.hpp"
#include "bphlife/simulation.hpp"

#ifndef BPHLIFE_VERSION
#define BPHLIFE_VERSION "0.0.0"
#endif

namespace bphlife {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2, kExitOracle = 3 };

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // relative to the output directory
  nlohmann::json manifest;
};

namespace detail {

// Probabilities and hazards: 10 significant digits.
inline std::string sig10(double x) {
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

// APVs: 6 decimal places.
inline std::string fixed6(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << x;
  return s.str();
}

// Clears round-off just outside [0, 1] before a probability is written.
inline double as_probability(double x) {
  if (x < 0.0 && x > -1e-12) return 0.0;
  if (x > 1.0 && x < 1.0 + 1e-12) return 1.0;
  return x;
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) { std::filesystem::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(root_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + (root_ / name).string(), {"output_dir"});
    out << content;
    if (!out) throw ValidationError("failed writing " + (root_ / name).string(), {"output_dir"});
    files_.push_back(name);
  }

  void write_curve(const std::string& name, const std::vector<double>& t, const std::vector<double>& v) {
    std::string body;
    for (std::size_t k = 0; k < t.size(); ++k) body += sig10(t[k]) + ' ' + sig10(v[k]) + '\n';
    write(name, body);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline nlohmann::json estimate_json(const MonteCarloEstimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}, {"n_paths", e.n_paths}};
}

inline void run_curves(const BlockGenerator& g, const RunConfig& cfg, OutputDir& out) {
  const auto t = cfg.grid.points();
  const auto curves = state_probability_curves(g, t);
  std::vector<double> p00, p01, p02, px, py;
  for (const auto& s : curves) {
    p00.push_back(as_probability(s.p00));
    p01.push_back(as_probability(s.p01));
    p02.push_back(as_probability(s.p02));
    px.push_back(as_probability(s.p_x));
    py.push_back(as_probability(s.p_y));
  }
  out.write_curve("p00.data", t, p00);
  out.write_curve("p01.data", t, p01);
  out.write_curve("p02.data", t, p02);
  out.write_curve("p_x.data", t, px);
  out.write_curve("p_y.data", t, py);
}

inline void run_apv(const BlockGenerator& g, const RunConfig& cfg, OutputDir& out) {
  std::string body = "rate,a_joint,a_x,a_y,a_last,a_rev,A_joint,A_x,A_y,A_last\n";
  for (const auto& row : apv_table(g, cfg.interest_rates)) {
    const auto& a = row.annuity;
    const auto& A = row.insurance;
    body += sig10(row.discount.annual_rate);
    for (double v : {a.a_joint, a.a_x, a.a_y, a.a_last, a.a_rev, A.A_joint, A.A_x, A.A_y, A.A_last})
      body += ',' + fixed6(v);
    body += '\n';
  }
  out.write("apv.csv", body);
}

inline void run_hazard(const BlockGenerator& g, const RunConfig& cfg, OutputDir& out) {
  std::vector<double> t;
  for (double x : cfg.grid.points())
    if (x > cfg.hazard_t_death) t.push_back(x);
  if (t.empty()) throw ValidationError("hazard needs grid points after hazard_t_death", {"grid_stop"});
  std::vector<double> mx, my;
  for (double x : t) {
    mx.push_back(conditional_hazard(g, Spouse::husband, cfg.hazard_t_death, x));
    my.push_back(conditional_hazard(g, Spouse::wife, cfg.hazard_t_death, x));
  }
  out.write_curve("mu_x_given_y.data", t, mx);
  out.write_curve("mu_y_given_x.data", t, my);
}

// Closed form vs Monte Carlo. Returns false if any check is outside 4 SE.
inline bool run_simulate(const BlockGenerator& g, const RunConfig& cfg, OutputDir& out, nlohmann::json& manifest) {
  struct Check {
    std::string name;
    MonteCarloEstimate mc;
    double exact;
  };
  const auto sample = simulate_paths(g, cfg.n_paths, cfg.seed);
  std::vector<Check> checks;
  const auto minlife = minlife_rep(g);
  for (double t : {10.0, 30.0, 50.0})
    checks.push_back({"p00(" + sig10(t) + ")", estimate_functional(sample, SurvivalAt{t, t}), ph_survival(minlife, t)});
  checks.push_back({"S(10,20)", estimate_functional(sample, SurvivalAt{10.0, 20.0}), bph_survival(g, 10.0, 20.0)});
  checks.push_back({"singular_mass(0)", estimate_functional(sample, SimultaneousFraction{}), singular_mass(g, 0.0)});
  for (double r : cfg.interest_rates) {
    if (!(r > 0.0)) continue;
    const auto d = DiscountSpec::from_annual_rate(r);
    checks.push_back({"a_joint(" + sig10(r) + ")", estimate_functional(sample, DiscountedJointAnnuity{d.delta}),
                      annuities(g, d).a_joint});
  }
  checks.push_back({"E[min(T_x,T_y)]",
                    estimate_functional(sample, [](const CouplePath& p) { return std::min(p.t_x, p.t_y); }),
                    g.joint_initial().dot(resolvent_solve(g.joint_block(), 0.0, Eigen::VectorXd::Ones(g.d0())))});

  bool all_ok = true;
  std::string body = "quantity,mc_value,mc_std_error,closed_form,z_score,agree\n";
  for (const auto& c : checks) {
    const double diff = c.mc.value - c.exact;
    const bool ok = std::abs(diff) <= 4.0 * c.mc.std_error;
    const double z = c.mc.std_error > 0.0 ? diff / c.mc.std_error : (diff == 0.0 ? 0.0 : INFINITY);
    all_ok = all_ok && ok;
    body += c.name + ',' + sig10(c.mc.value) + ',' + sig10(c.mc.std_error) + ',' + sig10(c.exact) + ',' +
            sig10(z) + ',' + (ok ? "true" : "false") + '\n';
  }
  out.write("simulate.csv", body);

  const std::size_t m = std::min(cfg.n_paths, cfg.correlation_paths);
  if (m >= 1000) {
    PathSample prefix{sample.seed, {sample.paths.begin(), sample.paths.begin() + static_cast<std::ptrdiff_t>(m)}};
    const auto corr = estimate_correlation(prefix);
    manifest["correlation"] = {{"pearson", estimate_json(corr.pearson)},
                               {"kendall", estimate_json(corr.kendall)},
                               {"pearson_in_range", corr.pearson.value >= -1.0 / 3.0 && corr.pearson.value <= 1.0}};
  }
  manifest["checks_passed"] = all_ok;
  return all_ok;
}

inline void run_agedist(const RunConfig& cfg, const IssueAges& ages, OutputDir& out) {
  auto table = [](const AgeDistribution& d) {
    std::vector<double> k, pr;
    for (std::size_t a = 0; a < d.probability.size(); ++a) {
      k.push_back(static_cast<double>(a + 1));
      pr.push_back(as_probability(d.probability[a]));
    }
    return std::pair{k, pr};
  };
  const auto [kh, ph] = table(ages.husband);
  const auto [kw, pw] = table(ages.wife);
  out.write_curve("agedist_husband.data", kh, ph);
  out.write_curve("agedist_wife.data", kw, pw);
  std::string body = "spouse,real_age,mean_physiological_age,issue_age\n";
  body += "husband," + sig10(*cfg.real_age_husband) + ',' + sig10(ages.husband.mean) + ',' + std::to_string(ages.i) + '\n';
  body += "wife," + sig10(*cfg.real_age_wife) + ',' + sig10(ages.wife.mean) + ',' + std::to_string(ages.j) + '\n';
  out.write("agedist.csv", body);
}

}  // namespace detail

// Runs one command and writes its files plus manifest_<command>.json into the
// configured output directory. Module errors propagate as exceptions; the
// returned exit code is kExitOracle when a Monte Carlo check fails.
inline RunResult run(const RunConfig& config, Command cmd, std::ostream& log) {
  RunConfig cfg = config;
  check_grid(cfg.grid);

  nlohmann::json manifest;
  manifest["tool"] = "bphlife";
  manifest["version"] = BPHLIFE_VERSION;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["command"] = to_string(cmd);
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["n_paths"] = cfg.n_paths;

  IssueAges ages;
  if (cfg.uses_real_ages()) {
    ages = issue_ages_from_real_ages(cfg.params, *cfg.real_age_husband, *cfg.real_age_wife);
    cfg.params.i = ages.i;
    cfg.params.j = ages.j;
    manifest["issue_ages"] = {{"i", ages.i},
                              {"j", ages.j},
                              {"source", "real_ages"},
                              {"real_age_husband", *cfg.real_age_husband},
                              {"real_age_wife", *cfg.real_age_wife},
                              {"mean_husband", ages.husband.mean},
                              {"mean_wife", ages.wife.mean}};
  } else {
    if (cmd == Command::agedist)
      throw ValidationError("agedist needs real_age_husband and real_age_wife", {"real_age_husband"});
    manifest["issue_ages"] = {{"i", cfg.params.i}, {"j", cfg.params.j}, {"source", "config"}};
  }
  manifest["joint_mortality"] =
      cfg.params.joint_mortality == JointMortality::shared_female ? "shared_female" : "sex_specific";

  const auto vp = validate_params(cfg.params);
  manifest["warnings"] = nlohmann::json::array();
  for (const auto& w : vp.warnings()) {
    manifest["warnings"].push_back(w.field + ": " + w.message);
    log << "warning: " << w.field << ": " << w.message << '\n';
  }
  const auto g = assemble_generator(vp);
  manifest["state_space"] = {{"dim", g.layout.dim()}, {"d0", g.layout.d0()}, {"d1", g.layout.d1()},
                             {"d2", g.layout.d2()}};

  detail::OutputDir out(cfg.output_dir);
  RunResult result;
  switch (cmd) {
    case Command::validate: {
      const auto bad = generator_violations(g);
      if (!bad.empty()) throw NumericalError("generator invariant violated: " + bad.front());
      log << "config valid: i=" << cfg.params.i << " j=" << cfg.params.j << " states=" << g.layout.dim() << '\n';
      break;
    }
    case Command::curves: detail::run_curves(g, cfg, out); break;
    case Command::apv: detail::run_apv(g, cfg, out); break;
    case Command::hazard: detail::run_hazard(g, cfg, out); break;
    case Command::simulate:
      if (!detail::run_simulate(g, cfg, out, manifest)) {
        result.exit_code = kExitOracle;
        log << "simulate: at least one Monte Carlo check is outside 4 standard errors\n";
      }
      break;
    case Command::agedist: detail::run_agedist(cfg, ages, out); break;
  }

  manifest["files"] = out.files();
  const std::string manifest_name = std::string("manifest_") + to_string(cmd) + ".json";
  out.write(manifest_name, manifest.dump(2) + '\n');
  for (const auto& f : out.files()) log << "wrote " << (std::filesystem::path(cfg.output_dir) / f).string() << '\n';
  result.files = out.files();
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace bphlife

#endif  // BPHLIFE_RUN_HPP
