// Batch front end: bphlife <command> --config FILE [--out DIR] [--seed N]
// [--paths N] [--grid START:STOP:STEP]
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "bphlife/run.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::string grid;
};

void error_line(const char* kind, const std::string& message, const std::vector<std::string>& fields = {}) {
  nlohmann::json e{{"error", kind}, {"message", message}};
  if (!fields.empty()) e["fields"] = fields;
  std::cerr << e.dump() << '\n';
}

bphlife::TimeGrid parse_grid(const std::string& text) {
  bphlife::TimeGrid g;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> g.start >> c1 >> g.stop >> c2 >> g.step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof())
    throw bphlife::ValidationError("--grid expects START:STOP:STEP", {"grid"});
  bphlife::check_grid(g);
  return g;
}

int execute(const Options& opt, std::optional<bphlife::Command> cmd) {
  try {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) throw bphlife::ValidationError("cannot read config file " + opt.config_path, {"config"});
    std::stringstream buf;
    buf << in.rdbuf();
    auto cfg = bphlife::parse_config(buf.str());
    if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.paths) {
      if (*opt.paths < 1) throw bphlife::ValidationError("--paths must be >= 1", {"n_paths"});
      cfg.n_paths = *opt.paths;
    }
    if (!opt.grid.empty()) cfg.grid = parse_grid(opt.grid);
    if (!cmd) cmd = cfg.command;
    if (!cmd) throw bphlife::ValidationError("no command given on the command line or in the config", {"command"});
    return bphlife::run(cfg, *cmd, std::cout).exit_code;
  } catch (const bphlife::ValidationError& e) {
    error_line("validation", e.what(), e.fields());
    return bphlife::kExitValidation;
  } catch (const bphlife::NumericalError& e) {
    error_line("numerical", e.what());
    return bphlife::kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    error_line("validation", e.what(), {"output_dir"});
    return bphlife::kExitValidation;
  } catch (const std::bad_alloc&) {
    error_line("numerical", "out of memory");
    return bphlife::kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bivariate phase-type joint-life model of a couple"};
  app.set_version_flag("--version", BPHLIFE_VERSION);
  app.require_subcommand(1);

  Options opt;
  std::optional<bphlife::Command> chosen;
  auto add = [&](const char* name, const char* help, std::optional<bphlife::Command> cmd) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config_path, "JSON config file")->required();
    sub->add_option("-o,--out", opt.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", opt.seed, "random seed (overrides seed)");
    sub->add_option("--paths", opt.paths, "number of simulated paths (overrides n_paths)");
    sub->add_option("--grid", opt.grid, "time grid START:STOP:STEP (overrides grid_*)");
    sub->callback([&chosen, cmd] { chosen = cmd; });
  };
  add("validate", "check the config and the assembled generator", bphlife::Command::validate);
  add("curves", "state probability curves p00, p01, p02, p_x, p_y", bphlife::Command::curves);
  add("apv", "annuity and insurance present values per interest rate", bphlife::Command::apv);
  add("hazard", "survivor's force of mortality after the spouse's death", bphlife::Command::hazard);
  add("simulate", "Monte Carlo checks of the closed forms and correlation", bphlife::Command::simulate);
  add("agedist", "physiological age distribution given real ages", bphlife::Command::agedist);
  add("run", "run the command named in the config", std::nullopt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    error_line("usage", e.what());
    return bphlife::kExitValidation;
  }
  return execute(opt, chosen);
}
