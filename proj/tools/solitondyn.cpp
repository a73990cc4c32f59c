#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "solitondyn/classical.hpp"
#include "solitondyn/errors.hpp"
#include "solitondyn/harness.hpp"
#include "solitondyn/io.hpp"
#include "solitondyn/version.hpp"

using namespace solitondyn;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Source {
  std::string config;
  std::string scenario;

  void attach(CLI::App* app) {
    auto* c = app->add_option("--config", config, "Scenario config file")->check(CLI::ExistingFile);
    auto* s = app->add_option("--scenario", scenario, "Preset scenario name");
    c->excludes(s);
  }

  ScenarioConfig load() const {
    if (!config.empty()) return ScenarioConfig::from_file(config);
    if (!scenario.empty()) return ScenarioConfig::preset(scenario);
    throw Error(ErrorCategory::usage, "one of --config or --scenario is required");
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
}

fs::path make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

int report_failure(const std::string& category, const std::string& message) {
  std::cerr << "error-category: " << category << "\n" << "error: " << message << "\n";
  return category == "usage" ? kExitUsage : kExitFailure;
}

void cmd_groundstate(const ScenarioConfig& c, const std::string& out) {
  c.validate();
  GroundStateCache cache;
  const auto r = cache.get(c.params, ground_grid(c), c.ground_tol);
  const auto dir = make_dir(out);
  save_ground_state((dir / "ground_state.bin").string(), *r);
  const nlohmann::json meta = {{"scenario", c.name},
                               {"points", r->grid.points()},
                               {"extent", r->grid.extent()},
                               {"masses", r->masses},
                               {"energy", r->energy},
                               {"residual", r->residual},
                               {"multipliers", r->multipliers},
                               {"iterations", r->iterations}};
  write_file(dir / "ground_state.json", meta.dump(2) + "\n");
  std::cout << "energy " << r->energy << " residual " << r->residual << " iterations " << r->iterations << "\n";
}

void cmd_classical(const ScenarioConfig& c, double epsilon, std::optional<double> t_final, const std::string& out) {
  c.validate();
  GroundStateCache cache;
  const auto r = cache.get(c.params, ground_grid(c), c.ground_tol);
  MemberOverrides o;
  o.t_final = t_final;
  const auto plan = plan_member(c, *r, epsilon, o);
  const auto dir = make_dir(out);
  std::ofstream csv(dir / "trajectory.csv", std::ios::binary);
  write_trajectory_csv(csv, plan.predicted);
  if (!csv) throw Error(ErrorCategory::io, "cannot write trajectory.csv");
  const auto& last = plan.predicted.states.back();
  std::cout << "steps " << plan.steps << " t " << last.time << " energy drift "
            << std::abs(plan.predicted.energy.back() - plan.predicted.energy.front()) << "\n";
}

int cmd_evolve(const ScenarioConfig& base, double epsilon, const MemberOverrides& o, bool snapshot,
               const std::string& out) {
  ScenarioConfig c = base;
  c.epsilons = {epsilon};
  c.validate();
  SweepOptions so;
  so.member.overrides = o;
  so.member.keep_final_state = snapshot;
  so.workers = 1;
  const auto result = run_scenario(c, so);
  write_run(result, make_dir(out).string());
  const auto& m = result.members.front();
  if (!m.ok) return report_failure(m.error_category, m.error_message);
  std::cout << "eps " << m.epsilon << " steps " << m.steps << " error_h1_sup " << m.summary.error_h1_sup
            << " error_modulus_sup " << m.summary.error_modulus_sup << "\n";
  return 0;
}

int cmd_sweep(const ScenarioConfig& c, std::optional<double> t_final, int workers, bool robustness,
              const std::string& out) {
  SweepOptions so;
  so.member.overrides.t_final = t_final;
  so.workers = workers;
  const auto dir = make_dir(out);
  GroundStateCache cache;
  const auto result = run_scenario(c, cache, so);
  write_run(result, dir.string());
  std::cout << format_slopes(result);
  if (robustness) {
    const auto refined = run_scenario(refined_config(c), cache, so);
    const auto table = format_robustness(robustness_table(result.slopes, refined.slopes));
    write_file(dir / "robustness.txt", table);
    std::cout << table;
  }
  if (result.partial) {
    for (const auto& m : result.members)
      if (!m.ok) std::cerr << "member eps " << m.epsilon << " failed: " << m.error_category << ": " << m.error_message << "\n";
    std::cerr << "sweep partial\n";
  }
  return 0;
}

void cmd_fit(const std::string& in) {
  const auto result = load_run(in);
  const auto text = format_slopes(result);
  write_file(fs::path(in) / "slopes.txt", text);
  std::cout << text;
}

void cmd_report(const std::string& in) {
  const auto result = load_run(in);
  write_file(fs::path(in) / "summary.txt", format_summary(result));
  write_file(fs::path(in) / "plots.gp", format_plots(result));
  std::cout << format_summary(result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical soliton dynamics: ground states, evolution and epsilon sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Source gs_src, cl_src, ev_src, sw_src, ini_src;
  std::string out = "out";
  std::string in;
  double epsilon = 0.1;
  std::optional<double> t_final, dt, spacing;
  std::optional<int> records;
  int workers = 0;
  bool robustness = false;
  bool snapshot = false;

  auto* gs = app.add_subcommand("groundstate", "Solve the ground state and write ground_state.bin");
  gs_src.attach(gs);
  gs->add_option("--out", out, "Output directory")->required();

  auto* cl = app.add_subcommand("classical", "Integrate the classical trajectory only");
  cl_src.attach(cl);
  cl->add_option("--epsilon", epsilon, "Semiclassical parameter")->required()->check(CLI::PositiveNumber);
  cl->add_option("--t-final", t_final, "Final time (default T0/epsilon)")->check(CLI::NonNegativeNumber);
  cl->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("evolve", "Run a single epsilon with diagnostics");
  ev_src.attach(ev);
  ev->add_option("--epsilon", epsilon, "Semiclassical parameter")->required()->check(CLI::PositiveNumber);
  ev->add_option("--t-final", t_final, "Final time (default T0/epsilon)")->check(CLI::NonNegativeNumber);
  ev->add_option("--dt", dt, "Time step")->check(CLI::PositiveNumber);
  ev->add_option("--spacing", spacing, "Grid spacing")->check(CLI::PositiveNumber);
  ev->add_option("--records", records, "Diagnostic samples after t = 0")->check(CLI::PositiveNumber);
  ev->add_flag("--snapshot", snapshot, "Also write the final field");
  ev->add_option("--out", out, "Output directory")->required();

  auto* sw = app.add_subcommand("sweep", "Run the full epsilon sweep of a scenario");
  sw_src.attach(sw);
  sw->add_option("--t-final", t_final, "Common final time instead of T0/epsilon")->check(CLI::NonNegativeNumber);
  sw->add_option("--workers", workers, "Worker threads (default SOLITONDYN_WORKERS or cores)")
      ->check(CLI::NonNegativeNumber);
  sw->add_flag("--robustness", robustness, "Repeat with n doubled and dt halved and write robustness.txt");
  sw->add_option("--out", out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Re-fit slopes from a run directory");
  fit->add_option("--in", in, "Run directory")->required()->check(CLI::ExistingDirectory);

  auto* rep = app.add_subcommand("report", "Regenerate summary.txt and plots.gp of a run directory");
  rep->add_option("--in", in, "Run directory")->required()->check(CLI::ExistingDirectory);

  auto* ini = app.add_subcommand("config", "Print the complete config text of a scenario");
  ini_src.attach(ini);

  auto* list = app.add_subcommand("presets", "List the preset scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gs) cmd_groundstate(gs_src.load(), out);
    if (*cl) cmd_classical(cl_src.load(), epsilon, t_final, out);
    if (*ev) return cmd_evolve(ev_src.load(), epsilon, MemberOverrides{t_final, dt, spacing, records}, snapshot, out);
    if (*sw) return cmd_sweep(sw_src.load(), t_final, workers, robustness, out);
    if (*fit) cmd_fit(in);
    if (*rep) cmd_report(in);
    if (*ini) std::cout << ini_src.load().to_ini();
    if (*list)
      for (const auto& name : ScenarioConfig::preset_names()) std::cout << name << "\n";
  } catch (const Error& e) {
    return report_failure(std::string(category_name(e.category())), e.what());
  } catch (const std::exception& e) {
    return report_failure("internal", e.what());
  }
  return 0;
}
