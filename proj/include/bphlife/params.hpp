#ifndef BPHLIFE_PARAMS_HPP
#define BPHLIFE_PARAMS_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bphlife/errors.hpp"

namespace bphlife {

enum class Sex { male, female };
enum class Spouse { husband, wife };

// Force of mortality at physiological age k: a + b * k^c (per year).
struct MortalityLaw {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double rate(int k) const { return a + b * std::pow(static_cast<double>(k), c); }
};

// Which mortality law the husband follows while both spouses are alive.
//
// `sex_specific` uses (a_m, b_m, c_m) everywhere. `shared_female` makes the
// joint-status rates identical for both spouses, using the female law for the
// husband too; the male law then only applies once he is a widower.
enum class JointMortality { sex_specific, shared_female };

struct ModelParams {
  // Husband.
  double a_m = 0.0, b_m = 0.0, c_m = 0.0;
  // Wife.
  double a_f = 0.0, b_f = 0.0, c_f = 0.0;

  double lambda_c = 0.0;   // common shock, both die at once
  double lambda = 0.0;     // joint aging rate
  double lambda_in = 0.0;  // aging rate of a surviving single life
  double lambda_rm = 0.0;  // recovery from bereavement, widower
  double lambda_rf = 0.0;  // recovery from bereavement, widow
  double lambda_wm = 1.0;  // bereavement mortality multiplier, widower
  double lambda_wf = 1.0;  // bereavement mortality multiplier, widow

  int n = 1;  // maximum physiological age
  int i = 1;  // husband's physiological age at issue
  int j = 1;  // wife's physiological age at issue

  JointMortality joint_mortality = JointMortality::sex_specific;

  MortalityLaw male() const { return {a_m, b_m, c_m}; }
  MortalityLaw female() const { return {a_f, b_f, c_f}; }
  MortalityLaw law(Sex s) const { return s == Sex::male ? male() : female(); }

  // Husband's law inside the joint block.
  MortalityLaw husband_joint() const {
    return joint_mortality == JointMortality::shared_female ? female() : male();
  }
};

// Parameter set of the couple example (n = 200). Issue ages are left at 1;
// callers set i and j. Joint-status mortality is shared between the spouses,
// as that example assumes.
inline ModelParams reference_couple_params() {
  ModelParams p;
  p.a_f = 9.0987e-4;
  p.b_f = 1.8872e-15;
  p.c_f = 6.0;
  p.a_m = 9.0987e-4;
  p.b_m = 1.8872e-15;
  p.c_m = 6.5;
  p.lambda_c = 0.0002;
  p.lambda_in = 2.3707;
  p.lambda = 2.2;
  p.lambda_rf = 5.0;
  p.lambda_rm = 10.0;
  p.lambda_wf = 4.0;
  p.lambda_wm = 6.0;
  p.n = 200;
  p.joint_mortality = JointMortality::shared_female;
  return p;
}

struct ParamIssue {
  std::string field;
  std::string message;
};

class ValidatedParams;
ValidatedParams validate_params(const ModelParams& p);

// A ModelParams that passed validate_params. Only that function builds one.
class ValidatedParams {
 public:
  const ModelParams& get() const noexcept { return params_; }
  const ModelParams* operator->() const noexcept { return &params_; }
  const std::vector<ParamIssue>& warnings() const noexcept { return warnings_; }

 private:
  ValidatedParams(ModelParams p, std::vector<ParamIssue> w)
      : params_(p), warnings_(std::move(w)) {}
  friend ValidatedParams validate_params(const ModelParams& p);

  ModelParams params_;
  std::vector<ParamIssue> warnings_;
};

// Checks every field and throws one ValidationError listing all violations.
// Bereavement multipliers below 1 are reported as warnings only.
inline ValidatedParams validate_params(const ModelParams& p) {
  std::vector<ParamIssue> errors;
  std::vector<ParamIssue> warnings;

  auto nonneg = [&](const char* name, double v) {
    if (!std::isfinite(v))
      errors.push_back({name, "must be finite"});
    else if (v < 0.0)
      errors.push_back({name, "must be >= 0"});
  };
  nonneg("a_m", p.a_m);
  nonneg("b_m", p.b_m);
  nonneg("c_m", p.c_m);
  nonneg("a_f", p.a_f);
  nonneg("b_f", p.b_f);
  nonneg("c_f", p.c_f);
  nonneg("lambda_c", p.lambda_c);
  nonneg("lambda", p.lambda);
  nonneg("lambda_in", p.lambda_in);
  nonneg("lambda_rm", p.lambda_rm);
  nonneg("lambda_rf", p.lambda_rf);
  nonneg("lambda_wm", p.lambda_wm);
  nonneg("lambda_wf", p.lambda_wf);

  if (std::isfinite(p.lambda_wm) && p.lambda_wm >= 0.0 && p.lambda_wm < 1.0)
    warnings.push_back({"lambda_wm", "multiplier < 1 lowers widower mortality"});
  if (std::isfinite(p.lambda_wf) && p.lambda_wf >= 0.0 && p.lambda_wf < 1.0)
    warnings.push_back({"lambda_wf", "multiplier < 1 lowers widow mortality"});

  if (p.n < 1) {
    errors.push_back({"n", "must be >= 1"});
  } else {
    if (p.i < 1 || p.i > p.n) errors.push_back({"i", "must lie in [1, n]"});
    if (p.j < 1 || p.j > p.n) errors.push_back({"j", "must lie in [1, n]"});
  }

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid model parameters:";
    std::vector<std::string> fields;
    for (const auto& e : errors) {
      msg << ' ' << e.field << " (" << e.message << ");";
      fields.push_back(e.field);
    }
    throw ValidationError(msg.str(), std::move(fields));
  }
  return ValidatedParams(p, std::move(warnings));
}

}  // namespace bphlife

#endif  // BPHLIFE_PARAMS_HPP
