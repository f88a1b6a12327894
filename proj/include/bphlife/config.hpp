#ifndef BPHLIFE_CONFIG_HPP
#define BPHLIFE_CONFIG_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bphlife/errors.hpp"
#include "bphlife/params.hpp"

namespace bphlife {

enum class Command { validate, curves, apv, hazard, simulate, agedist };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::validate: return "validate";
    case Command::curves: return "curves";
    case Command::apv: return "apv";
    case Command::hazard: return "hazard";
    case Command::simulate: return "simulate";
    case Command::agedist: return "agedist";
  }
  return "?";
}

inline std::optional<Command> command_from_string(std::string_view s) {
  for (Command c : {Command::validate, Command::curves, Command::apv, Command::hazard, Command::simulate,
                    Command::agedist})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

// Evenly spaced times start, start + step, ... up to stop (inclusive).
struct TimeGrid {
  double start = 0.0;
  double stop = 60.0;
  double step = 0.5;

  std::vector<double> points() const {
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k) t[k] = start + static_cast<double>(k) * step;
    return t;
  }
};

inline void check_grid(const TimeGrid& g) {
  std::vector<std::string> bad;
  if (!std::isfinite(g.start) || g.start < 0.0) bad.push_back("grid_start");
  if (!std::isfinite(g.step) || !(g.step > 0.0)) bad.push_back("grid_step");
  if (!std::isfinite(g.stop) || g.stop < g.start) bad.push_back("grid_stop");
  if (!bad.empty()) throw ValidationError("grid needs 0 <= start <= stop and step > 0", bad);
  if ((g.stop - g.start) / g.step > 1e7) throw ValidationError("grid has more than 1e7 points", {"grid_step"});
}

struct RunConfig {
  ModelParams params;  // i, j are filled in from real ages when those are given
  std::optional<double> real_age_husband;
  std::optional<double> real_age_wife;
  std::optional<Command> command;
  TimeGrid grid;
  std::vector<double> interest_rates{0.05, 0.10, 0.15};
  std::string output_dir = "out";
  std::uint64_t seed = 42;
  std::size_t n_paths = 1'000'000;
  double hazard_t_death = 20.0;
  std::size_t correlation_paths = 100'000;

  bool uses_real_ages() const { return real_age_husband.has_value(); }
};

namespace detail {

// 1-based line of the first occurrence of "key" in the text, 0 if absent.
inline int line_of_key(std::string_view text, const std::string& key) {
  const std::string quoted = '"' + key + '"';
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  int line = 1;
  for (std::size_t k = 0; k < pos; ++k) line += text[k] == '\n';
  return line;
}

class FieldErrors {
 public:
  explicit FieldErrors(std::string_view text) : text_(text) {}

  void add(const std::string& field, const std::string& message) {
    const auto base = field.substr(0, field.find('['));
    const int line = line_of_key(text_, base);
    if (!first_) msg_ << "; ";
    first_ = false;
    if (line > 0) msg_ << "line " << line << ": ";
    msg_ << field << ": " << message;
    fields_.push_back(field);
  }
  bool empty() const { return fields_.empty(); }
  [[noreturn]] void raise(const std::string& prefix) const {
    throw ValidationError(prefix + ": " + msg_.str(), fields_);
  }

 private:
  std::string_view text_;
  std::ostringstream msg_;
  bool first_ = true;
  std::vector<std::string> fields_;
};

inline const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys{"a_m",       "b_m",    "c_m",       "a_f",       "b_f",
                                             "c_f",       "lambda_c", "lambda",  "lambda_in", "lambda_rm",
                                             "lambda_rf", "lambda_wm", "lambda_wf", "n"};
  return keys;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k(model_keys().begin(), model_keys().end());
    for (const char* extra : {"i", "j", "real_age_husband", "real_age_wife", "joint_mortality", "command",
                              "grid_start", "grid_stop", "grid_step", "interest_rates", "output_dir", "seed",
                              "n_paths", "hazard_t_death", "correlation_paths"})
      k.insert(extra);
    return k;
  }();
  return keys;
}

}  // namespace detail

// Parses the flat JSON config format documented in the README. Reports every
// problem it finds in one ValidationError whose fields() name the keys (array
// elements as "interest_rates[k]").
inline RunConfig parse_config(std::string_view text) {
  using nlohmann::json;
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      int line = 1, col = 1;
      for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      std::ostringstream s;
      s << "config is not valid JSON (line " << line << ", column " << col << ")";
      throw ValidationError(s.str(), {"<syntax>"});
    }
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object", {"<root>"});

  detail::FieldErrors errs(text);
  for (const auto& [key, value] : doc.items())
    if (!detail::known_keys().count(key)) errs.add(key, "unknown key");

  std::vector<std::string> missing;
  auto number = [&](const std::string& key) -> std::optional<double> {
    if (!doc.contains(key)) return std::nullopt;
    const auto& v = doc[key];
    if (!v.is_number()) {
      errs.add(key, "must be a number");
      return std::nullopt;
    }
    return v.get<double>();
  };
  auto integer = [&](const std::string& key) -> std::optional<std::int64_t> {
    const auto x = number(key);
    if (!x) return std::nullopt;
    if (*x != std::floor(*x) || std::abs(*x) > 9.0e15) {
      errs.add(key, "must be an integer");
      return std::nullopt;
    }
    return static_cast<std::int64_t>(*x);
  };

  RunConfig cfg;
  ModelParams& p = cfg.params;
  double* slots[] = {&p.a_m, &p.b_m, &p.c_m, &p.a_f, &p.b_f, &p.c_f, &p.lambda_c,
                     &p.lambda, &p.lambda_in, &p.lambda_rm, &p.lambda_rf, &p.lambda_wm, &p.lambda_wf};
  for (std::size_t k = 0; k < 13; ++k) {
    const auto& key = detail::model_keys()[k];
    if (!doc.contains(key)) {
      missing.push_back(key);
      continue;
    }
    if (auto v = number(key)) *slots[k] = *v;
  }
  if (!doc.contains("n")) {
    missing.push_back("n");
  } else if (auto v = integer("n")) {
    if (*v > 1'000'000) {
      errs.add("n", "must be <= 1000000");
    } else {
      p.n = static_cast<int>(std::max<std::int64_t>(*v, -1));
    }
  }

  const bool has_ij = doc.contains("i") || doc.contains("j");
  const bool has_real = doc.contains("real_age_husband") || doc.contains("real_age_wife");
  if (has_ij && has_real) {
    errs.add("i", "give either i and j or real_age_husband and real_age_wife, not both");
  } else if (has_real) {
    for (const char* key : {"real_age_husband", "real_age_wife"}) {
      if (!doc.contains(key)) {
        missing.push_back(key);
        continue;
      }
      if (auto v = number(key)) {
        if (!std::isfinite(*v) || *v < 0.0) errs.add(key, "must be >= 0");
        (std::string_view(key) == "real_age_husband" ? cfg.real_age_husband : cfg.real_age_wife) = *v;
      }
    }
  } else {
    for (const char* key : {"i", "j"}) {
      if (!doc.contains(key)) {
        missing.push_back(key);
        continue;
      }
      if (auto v = integer(key))
        (std::string_view(key) == "i" ? p.i : p.j) = static_cast<int>(std::clamp<std::int64_t>(*v, -1, 1'000'001));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("missing required field: " + list, missing);
  }

  if (doc.contains("joint_mortality")) {
    const auto& v = doc["joint_mortality"];
    if (v == "sex_specific") {
      p.joint_mortality = JointMortality::sex_specific;
    } else if (v == "shared_female") {
      p.joint_mortality = JointMortality::shared_female;
    } else {
      errs.add("joint_mortality", "must be \"sex_specific\" or \"shared_female\"");
    }
  }
  if (doc.contains("command")) {
    const auto& v = doc["command"];
    const auto c = v.is_string() ? command_from_string(v.get<std::string>()) : std::nullopt;
    if (c) {
      cfg.command = c;
    } else {
      errs.add("command", "must be one of validate, curves, apv, hazard, simulate, agedist");
    }
  }
  if (auto v = number("grid_start")) cfg.grid.start = *v;
  if (auto v = number("grid_stop")) cfg.grid.stop = *v;
  if (auto v = number("grid_step")) cfg.grid.step = *v;
  if (!(cfg.grid.step > 0.0)) errs.add("grid_step", "must be > 0");
  if (!(cfg.grid.start >= 0.0)) errs.add("grid_start", "must be >= 0");
  if (!(cfg.grid.stop >= cfg.grid.start)) errs.add("grid_stop", "must be >= grid_start");

  if (doc.contains("interest_rates")) {
    const auto& v = doc["interest_rates"];
    if (!v.is_array() || v.empty()) {
      errs.add("interest_rates", "must be a non-empty array of numbers");
    } else {
      cfg.interest_rates.clear();
      for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string name = "interest_rates[" + std::to_string(k) + "]";
        if (!v[k].is_number()) {
          errs.add(name, "must be a number");
          continue;
        }
        const double r = v[k].get<double>();
        if (!std::isfinite(r) || !(r > -1.0)) errs.add(name, "annual rate must be > -1");
        if (r == 0.0) errs.add(name, "annual rate must be nonzero (annuities need discounting)");
        cfg.interest_rates.push_back(r);
      }
    }
  }
  if (doc.contains("output_dir")) {
    if (doc["output_dir"].is_string() && !doc["output_dir"].get<std::string>().empty()) {
      cfg.output_dir = doc["output_dir"].get<std::string>();
    } else {
      errs.add("output_dir", "must be a non-empty string");
    }
  }
  if (auto v = integer("seed")) {
    if (*v < 0) {
      errs.add("seed", "must be >= 0");
    } else {
      cfg.seed = static_cast<std::uint64_t>(*v);
    }
  }
  if (auto v = integer("n_paths")) {
    if (*v < 1) {
      errs.add("n_paths", "must be >= 1");
    } else {
      cfg.n_paths = static_cast<std::size_t>(*v);
    }
  }
  if (auto v = integer("correlation_paths")) {
    if (*v < 1000) {
      errs.add("correlation_paths", "must be >= 1000");
    } else {
      cfg.correlation_paths = static_cast<std::size_t>(*v);
    }
  }
  if (auto v = number("hazard_t_death")) {
    if (!std::isfinite(*v) || *v < 0.0) errs.add("hazard_t_death", "must be >= 0");
    cfg.hazard_t_death = *v;
  }

  if (!errs.empty()) errs.raise("invalid config");

  // Model parameters are checked by the model itself. When real ages are
  // given, i and j are derived later, so check with placeholder ages.
  ModelParams probe = p;
  if (cfg.uses_real_ages()) probe.i = probe.j = 1;
  try {
    validate_params(probe);
  } catch (const ValidationError& e) {
    std::ostringstream s;
    s << e.what() << " [";
    for (std::size_t k = 0; k < e.fields().size(); ++k) {
      const int line = detail::line_of_key(text, e.fields()[k]);
      s << (k ? ", " : "") << e.fields()[k];
      if (line > 0) s << " at line " << line;
    }
    s << "]";
    throw ValidationError(s.str(), e.fields());
  }
  return cfg;
}

// The resolved config as JSON with a fixed key order. Used for the config
// hash, so the output directory is left out.
inline nlohmann::json canonical_json(const RunConfig& c) {
  nlohmann::json j;
  const ModelParams& p = c.params;
  j["a_m"] = p.a_m;
  j["b_m"] = p.b_m;
  j["c_m"] = p.c_m;
  j["a_f"] = p.a_f;
  j["b_f"] = p.b_f;
  j["c_f"] = p.c_f;
  j["lambda_c"] = p.lambda_c;
  j["lambda"] = p.lambda;
  j["lambda_in"] = p.lambda_in;
  j["lambda_rm"] = p.lambda_rm;
  j["lambda_rf"] = p.lambda_rf;
  j["lambda_wm"] = p.lambda_wm;
  j["lambda_wf"] = p.lambda_wf;
  j["n"] = p.n;
  if (c.uses_real_ages()) {
    j["real_age_husband"] = *c.real_age_husband;
    j["real_age_wife"] = *c.real_age_wife;
  } else {
    j["i"] = p.i;
    j["j"] = p.j;
  }
  j["joint_mortality"] = p.joint_mortality == JointMortality::shared_female ? "shared_female" : "sex_specific";
  j["grid_start"] = c.grid.start;
  j["grid_stop"] = c.grid.stop;
  j["grid_step"] = c.grid.step;
  j["interest_rates"] = c.interest_rates;
  j["seed"] = c.seed;
  j["n_paths"] = c.n_paths;
  j["hazard_t_death"] = c.hazard_t_death;
  j["correlation_paths"] = c.correlation_paths;
  return j;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << fnv1a(canonical_json(c).dump());
  return s.str();
}

}  // namespace bphlife

#endif  // BPHLIFE_CONFIG_HPP
