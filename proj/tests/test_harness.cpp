#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "solitondyn/errors.hpp"
#include "solitondyn/harness.hpp"
#include "solitondyn/io.hpp"

using namespace solitondyn;
namespace fs = std::filesystem;

namespace {

ErrorCategory category_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("no error raised");
  return ErrorCategory::usage;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = fs::temp_directory_path() / ("solitondyn_" + name + "_" + std::to_string(stamp));
  fs::remove_all(dir);
  return dir;
}

const SlopeReport& find(const std::vector<SlopeReport>& v, const std::string& name) {
  for (const auto& s : v)
    if (s.name == name) return s;
  throw std::runtime_error("missing slope " + name);
}

ScenarioConfig short_harmonic() {
  auto c = ScenarioConfig::preset("harmonic");
  c.epsilons = {0.2, 0.1, 0.05};
  c.records = 4;
  return c;
}

SweepOptions short_run(double t_final) {
  SweepOptions o;
  o.member.overrides.t_final = t_final;
  o.workers = 1;
  return o;
}

}  // namespace

TEST_CASE("fast_size picks 7-smooth even sizes") {
  CHECK(fast_size(435) == 448);
  CHECK(fast_size(1001) == 1008);
  CHECK(fast_size(7) == 8);
  CHECK(fast_size(9) == 10);
  CHECK(fast_size(1024) == 1024);
}

TEST_CASE("fit_slopes on exact power laws") {
  const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  std::vector<double> sq, lin;
  for (double e : eps) {
    sq.push_back(e * e);
    lin.push_back(3.0 * e);
  }
  const auto a = fit_slopes("sq", eps, sq);
  CHECK(std::abs(a.slope - 2.0) < 1e-12);
  CHECK(std::abs(a.intercept) < 1e-12);
  CHECK(a.residual < 1e-12);
  CHECK(a.monotone);
  const auto b = fit_slopes("lin", eps, lin);
  CHECK(std::abs(b.slope - 1.0) < 1e-12);
  CHECK(std::abs(b.intercept - std::log(3.0)) < 1e-12);
}

TEST_CASE("fit_slopes drops points at the floor and flags non-monotone data") {
  const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  const std::vector<double> v{4e-2, 1e-2, 2.5e-3, 1e-6};
  const auto r = fit_slopes("floored", eps, v, 1e-5);
  CHECK(r.used == std::vector<bool>{true, true, true, false});
  CHECK(std::abs(r.slope - 2.0) < 1e-12);

  CHECK(category_of([&] { fit_slopes("few", eps, v, 5e-4); }) == ErrorCategory::insufficient_data);
  const auto t = try_fit_slopes("few", eps, v, 5e-4);
  CHECK(t.status == "insufficient-data");
  CHECK(std::isnan(t.slope));

  const auto bumpy = fit_slopes("bumpy", eps, {4e-2, 1e-2, 1.2e-2, 1e-3});
  CHECK_FALSE(bumpy.monotone);
}

TEST_CASE("empty epsilon list is a config error") {
  auto c = ScenarioConfig::preset("free");
  c.epsilons.clear();
  CHECK(category_of([&] { c.validate(); }) == ErrorCategory::config);
  CHECK(category_of([&] { run_scenario(c); }) == ErrorCategory::config);
  std::istringstream in("[sweep]\nscenario = free\nepsilons =\n");
  CHECK(category_of([&] { ScenarioConfig::from_ini(in); }) == ErrorCategory::config);
}

TEST_CASE("config text round-trips for every preset") {
  for (const auto& name : ScenarioConfig::preset_names()) {
    CAPTURE(name);
    const auto c = ScenarioConfig::preset(name);
    CHECK_NOTHROW(c.validate());
    std::istringstream in(c.to_ini());
    const auto back = ScenarioConfig::from_ini(in);
    CHECK(back.to_ini() == c.to_ini());
  }
}

TEST_CASE("config overrides a preset and rejects unknown keys") {
  std::istringstream in("[sweep]\nscenario = harmonic\nT0 = 0.5\nepsilons = 0.2, 0.1, 0.05\n");
  const auto c = ScenarioConfig::from_ini(in);
  CHECK(c.name == "harmonic");
  CHECK(c.T0 == 0.5);
  CHECK(c.epsilons == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(c.potentials.V.kind() == ScalarPotential::Kind::harmonic);

  std::istringstream bad_key("[grid]\nspacings = 0.1\n");
  CHECK(category_of([&] { ScenarioConfig::from_ini(bad_key); }) == ErrorCategory::config);
  std::istringstream bad_section("[gird]\nspacing = 0.1\n");
  CHECK(category_of([&] { ScenarioConfig::from_ini(bad_section); }) == ErrorCategory::config);
  std::istringstream bad_preset("[sweep]\nscenario = nope\n");
  CHECK(category_of([&] { ScenarioConfig::from_ini(bad_preset); }) == ErrorCategory::config);
}

TEST_CASE("containers round-trip bit-exactly") {
  const auto c = ScenarioConfig::preset("hartree1d");
  GroundStateCache cache;
  const auto r = cache.get(c.params, ground_grid(c), c.ground_tol);
  std::stringstream buf;
  write_ground_state(buf, *r);
  const auto back = read_ground_state(buf);
  CHECK(back.grid.points() == r->grid.points());
  CHECK(back.grid.extent() == r->grid.extent());
  CHECK(back.energy == r->energy);
  CHECK(back.masses == r->masses);
  CHECK(back.multipliers == r->multipliers);
  CHECK(back.params.beta == r->params.beta);
  bool same = true;
  for (std::size_t i = 0; i < r->profile[0].size(); ++i) same = same && back.profile[0][i] == r->profile[0][i];
  CHECK(same);

  VectorField f(SpectralGrid(2, 4.0, 8), 2);
  for (int j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < f[j].size(); ++i) f[j][i] = {std::sin(0.1 * i + j), std::cos(0.3 * i) / 3.0};
  std::stringstream snap;
  write_snapshot(snap, FieldState{f, 1.25, 17});
  const auto s = read_snapshot(snap);
  CHECK(s.time == 1.25);
  CHECK(s.step_index == 17);
  CHECK(s.field.components() == 2);
  CHECK(s.field.grid().dim() == 2);
  same = true;
  for (int j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < f[j].size(); ++i) same = same && s.field[j][i] == f[j][i];
  CHECK(same);

  std::stringstream junk("NOTACONTAINER");
  CHECK(category_of([&] { read_ground_state(junk); }) == ErrorCategory::io);
  std::stringstream wrong;
  write_snapshot(wrong, FieldState{f, 0.0, 0});
  CHECK(category_of([&] { read_ground_state(wrong); }) == ErrorCategory::io);
}

TEST_CASE("ground-state cache solves each key once") {
  const auto c = ScenarioConfig::preset("free");
  GroundStateCache cache;
  const auto a = cache.get(c.params, ground_grid(c), c.ground_tol);
  const auto b = cache.get(c.params, ground_grid(c), c.ground_tol);
  CHECK(a.get() == b.get());
  CHECK(cache.size() == 1);
  cache.get(c.params, ground_grid(c), 1e-8);
  CHECK(cache.size() == 2);
}

TEST_CASE("member plan follows the horizon and box rules") {
  const auto c = ScenarioConfig::preset("harmonic");
  GroundStateCache cache;
  const auto r = cache.get(c.params, ground_grid(c), c.ground_tol);
  for (double eps : {0.2, 0.05}) {
    const auto plan = plan_member(c, *r, eps);
    CHECK(plan.t_final == doctest::Approx(c.T0 / eps).epsilon(1e-14));
    CHECK(plan.dt <= c.dt);
    CHECK(plan.dt * plan.steps == doctest::Approx(plan.t_final).epsilon(1e-12));
    CHECK(plan.reach == doctest::Approx(0.5 / eps).epsilon(1e-3));
    CHECK(plan.grid.spacing() == doctest::Approx(c.spacing).epsilon(1e-14));
    CHECK(plan.grid.extent() >= 4.0 * (plan.reach + r->decay_radius(c.margin_level) + c.margin));
  }
}

TEST_CASE("free scenario keeps the exact soliton to t = 5") {
  const auto c = ScenarioConfig::preset("free");
  const auto res = run_scenario(c, short_run(5.0));
  CHECK_FALSE(res.partial);
  for (const auto& m : res.members) {
    CAPTURE(m.epsilon);
    CHECK(m.ok);
    CHECK(m.summary.final_time == doctest::Approx(5.0));
    CHECK(m.summary.error_h1_sup < 1e-5);
    CHECK(m.summary.mass_drift[0] < 1e-10);
    CHECK(m.summary.violations == 0);
  }
}

TEST_CASE("sweeps are reproducible and run directories reload") {
  const auto c = short_harmonic();
  const auto a = run_scenario(c, short_run(1.0));
  auto two = short_run(1.0);
  two.workers = 2;
  const auto b = run_scenario(c, two);
  const auto da = scratch_dir("run_a");
  const auto db = scratch_dir("run_b");
  write_run(a, da.string());
  write_run(b, db.string());
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    const auto name = csv_name(i, c.epsilons[i]);
    CHECK(fs::exists(da / name));
    CHECK(slurp(da / name) == slurp(db / name));
  }
  CHECK(slurp(da / "manifest.json") == slurp(db / "manifest.json"));
  CHECK(fs::exists(da / "ground_state.bin"));
  CHECK(fs::exists(da / "plots.gp"));
  const auto loaded = load_run(da.string());
  CHECK(format_slopes(loaded) == slurp(da / "slopes.txt"));
  CHECK(format_slopes(load_run(da.string())) == format_slopes(loaded));
  CHECK(loaded.members.size() == a.members.size());
  CHECK(loaded.members[1].summary.error_h1_sup == a.members[1].summary.error_h1_sup);
  CHECK(loaded.config.to_ini() == c.to_ini());
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("a failing member leaves the others intact") {
  auto c = short_harmonic();
  const auto full = run_scenario(c, short_run(1.0));
  c.max_points = 1200;
  const auto cut = run_scenario(c, short_run(1.0));
  REQUIRE(cut.members.size() == 3);
  CHECK(cut.partial);
  CHECK(cut.members[0].ok);
  CHECK(cut.members[1].ok);
  CHECK_FALSE(cut.members[2].ok);
  CHECK_FALSE(cut.members[2].error_category.empty());
  for (int i = 0; i < 2; ++i) {
    CHECK(cut.members[i].records.size() == full.members[i].records.size());
    CHECK(cut.members[i].summary.error_h1_sup == full.members[i].summary.error_h1_sup);
  }
  CHECK(find(cut.slopes, "error_h1_sup").status == "insufficient-data");
  const auto dir = scratch_dir("partial");
  write_run(cut, dir.string());
  const auto loaded = load_run(dir.string());
  CHECK(loaded.partial);
  CHECK(loaded.members[2].error_category == cut.members[2].error_category);
  fs::remove_all(dir);
}

TEST_CASE("worker count honours the environment") {
  ::setenv("SOLITONDYN_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("SOLITONDYN_WORKERS", "many", 1);
  CHECK(category_of([] { worker_count(); }) == ErrorCategory::config);
  ::unsetenv("SOLITONDYN_WORKERS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("robustness table marks slope changes against the tolerance") {
  SlopeReport a, b, c;
  a.name = b.name = "q";
  a.slope = 1.0;
  b.slope = 1.1;
  const auto rows = robustness_table({a}, {b});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].change == doctest::Approx(0.1));
  CHECK(rows[0].stable);
  b.slope = 1.2;
  CHECK_FALSE(robustness_table({a}, {b})[0].stable);
  const auto r = refined_config(ScenarioConfig::preset("harmonic"));
  CHECK(r.spacing == ScenarioConfig::preset("harmonic").spacing / 2);
  CHECK(r.dt == ScenarioConfig::preset("harmonic").dt / 2);
}

TEST_CASE("diagnostics CSV rejects malformed rows") {
  int dim = 0, comps = 0;
  std::istringstream empty("");
  CHECK(category_of([&] { read_diagnostics_csv(empty, dim, comps); }) == ErrorCategory::io);
  std::istringstream header("time,mass_1,com_1\n1,2,3\n");
  CHECK(category_of([&] { read_diagnostics_csv(header, dim, comps); }) == ErrorCategory::io);
}
