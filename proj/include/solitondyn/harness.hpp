#pragma once

#include <cstdint>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "solitondyn/diagnostics.hpp"
#include "solitondyn/evolution.hpp"

namespace solitondyn {

/// One scenario with its sweep. Every field maps to an INI key; see to_ini().
struct ScenarioConfig {
  std::string name = "free";

  // [grid]
  int dim = 1;
  double spacing = 0.09375;
  /// Points per axis of the grid the ground state is solved on.
  int ground_points = 1024;
  /// Room beyond the margin_level decay radius: L >= 4 (max|x_eps| + radius + margin).
  double margin = 1.0;
  double margin_level = 1e-12;
  std::size_t max_points = std::size_t{1} << 22;

  // [potentials]
  PotentialSet potentials;

  // [nonlinearity]
  NonlinearityParams params;
  double ground_tol = 1e-10;

  // [datum]
  /// Slow-frame position eps x_eps(0) and velocity xi(0).
  Vec position{};
  Vec velocity{};

  // [sweep]
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  double T0 = 1.0;
  double dt = 2e-3;
  std::uint64_t seed = 12345;

  // [diagnostics]
  /// Samples per run after t = 0.
  int records = 40;
  double sigma0 = 0.1;
  double trust_region = 0.5;
  double density_floor = kDensityFloor;
  double inequality_slack = 1e-12;
  /// Discretization floors of quantities taken at t = 0, of the error norms
  /// over a run, and of the center gap.
  double floor_initial = 1e-12;
  double floor_run = 1e-5;
  double floor_center = 1e-9;

  void validate() const;
  DiagnosticsOptions diagnostics_options(double cutoff_radius) const;

  /// free, harmonic, gaussian_well, magnetic2d, hartree1d, magnetic_hartree1d,
  /// coupled2, coupled2_decoupled.
  static ScenarioConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  /// Reads INI text. A `scenario` key in [sweep] picks the preset that the
  /// remaining keys override.
  static ScenarioConfig from_ini(std::istream& in);
  static ScenarioConfig from_file(const std::string& path);
  /// Complete INI text; from_ini(to_ini()) reproduces the config.
  std::string to_ini() const;
};

/// Ground states keyed by (params, grid, tol); each key is solved once.
/// Safe to share across threads.
class GroundStateCache {
 public:
  using Entry = std::shared_ptr<const GroundState>;

  Entry get(const NonlinearityParams& params, const SpectralGrid& grid, double tol);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<Entry>> entries_;
};

/// Grid of the ground-state solve.
SpectralGrid ground_grid(const ScenarioConfig& config);

/// Smallest n >= target of the form 2^a 3^b 5^c 7^d with n even.
int fast_size(int target);

struct MemberOverrides {
  std::optional<double> t_final;
  std::optional<double> dt;
  std::optional<double> spacing;
  std::optional<int> records;
};

/// Everything a single epsilon run needs, fixed before it starts.
struct MemberPlan {
  double epsilon = 0.0;
  SpectralGrid grid{1, 1.0, 2};
  double dt = 0.0;
  double t_final = 0.0;
  long steps = 0;
  long observer_stride = 1;
  double reach = 0.0;
  double cutoff_radius = 0.0;
  Trajectory predicted;
};

/// Box sized as L = n h >= 4 (max|x_eps(t)| + decay radius + margin) with h fixed.
MemberPlan plan_member(const ScenarioConfig& config, const GroundState& r, double epsilon,
                       const MemberOverrides& overrides = {});

/// Sup and t = 0 values of one run.
struct MemberSummary {
  double error_h1_sup = 0.0;
  std::vector<double> error_h1_sup_component;
  double error_modulus_sup = 0.0;
  std::vector<double> error_modulus_sup_component;
  /// max eps |y_eps - x_eps|.
  double center_gap_sup = 0.0;
  double omega_hat_sup = 0.0;
  double omega_sup = 0.0;
  double gamma_sup = 0.0;
  double omega0 = 0.0;
  double omega_hat0 = 0.0;
  /// |E(0) - E(r) - M H(0)|.
  double energy_expansion0 = 0.0;
  std::vector<double> mass_drift;
  /// max |E(t) - E(0)| / |E(0)|.
  double energy_drift = 0.0;
  long violations = 0;
  double min_energy_gap = 0.0;
  bool all_valid = true;
  std::optional<double> tstar;
  double final_time = 0.0;
  std::size_t samples = 0;
};

MemberSummary summarize(const std::vector<DiagnosticRecord>& records, double epsilon, double ground_energy,
                        double sigma0);

struct MemberResult {
  double epsilon = 0.0;
  bool ok = false;
  std::string error_category;
  std::string error_message;
  int dim = 1;
  int components = 1;
  double extent = 0.0;
  int points = 0;
  double dt = 0.0;
  long steps = 0;
  double t_final = 0.0;
  double cutoff_radius = 0.0;
  double ground_energy = 0.0;
  std::vector<double> ground_masses;
  double seconds = 0.0;
  std::vector<DiagnosticRecord> records;
  MemberSummary summary;
  std::optional<FieldState> final_state;
};

struct MemberOptions {
  MemberOverrides overrides;
  bool keep_final_state = false;
};

/// Runs one epsilon. Module errors are caught and recorded in the result.
MemberResult run_member(const ScenarioConfig& config, double epsilon, GroundStateCache& cache,
                        const MemberOptions& options = {});

struct SlopeReport {
  std::string name;
  std::vector<double> epsilons;
  std::vector<double> values;
  std::vector<bool> used;
  double floor = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  /// Root mean square of the log residuals.
  double residual = 0.0;
  bool monotone = true;
  /// "ok" or the category of the failure.
  std::string status = "ok";
};

/// Least squares on (log eps, log value) over points above 10 floor.
/// Throws insufficient-data with fewer than three usable points.
SlopeReport fit_slopes(const std::string& name, const std::vector<double>& epsilons,
                       const std::vector<double>& values, double floor = 0.0);

/// Same, with the failure recorded in status instead of thrown.
SlopeReport try_fit_slopes(const std::string& name, const std::vector<double>& epsilons,
                           const std::vector<double>& values, double floor = 0.0);

struct SweepOptions {
  MemberOptions member;
  /// 0 means SOLITONDYN_WORKERS or the physical core count.
  int workers = 0;
};

struct SweepResult {
  ScenarioConfig config;
  std::vector<MemberResult> members;
  bool partial = false;
  std::vector<SlopeReport> slopes;
  std::shared_ptr<const GroundState> ground_state;
};

/// Physical cores, or SOLITONDYN_WORKERS when set.
int worker_count();

std::vector<SlopeReport> sweep_slopes(const ScenarioConfig& config, const std::vector<MemberResult>& members);

SweepResult run_scenario(const ScenarioConfig& config, const SweepOptions& options = {});
SweepResult run_scenario(const ScenarioConfig& config, GroundStateCache& cache, const SweepOptions& options = {});

// Run directories.

std::string csv_name(std::size_t index, double epsilon);

/// manifest.json, one diagnostics CSV per member, ground_state.bin,
/// slopes.txt, summary.txt and plots.gp.
void write_run(const SweepResult& result, const std::string& dir);

/// Rebuilds members and slopes from a run directory's manifest and CSVs.
SweepResult load_run(const std::string& dir);

/// Fixed-format slope report; identical inputs give identical bytes.
std::string format_slopes(const SweepResult& result);
std::string format_summary(const SweepResult& result);
/// Gnuplot script for the slope plots and the per-member time series.
std::string format_plots(const SweepResult& result);

std::vector<DiagnosticRecord> read_diagnostics_csv(std::istream& in, int& dim, int& components);

/// Slopes of the base sweep against one with n doubled and dt halved.
struct RobustnessRow {
  std::string name;
  double base = 0.0;
  double refined = 0.0;
  double change = 0.0;
  bool stable = false;
};

std::vector<RobustnessRow> robustness_table(const std::vector<SlopeReport>& base,
                                            const std::vector<SlopeReport>& refined, double tolerance = 0.15);
ScenarioConfig refined_config(const ScenarioConfig& config);
std::string format_robustness(const std::vector<RobustnessRow>& rows);

/// Energy drift at dt and dt / 2 over the same horizon.
struct DriftStudy {
  double epsilon = 0.0;
  double t_final = 0.0;
  double drift_coarse = 0.0;
  double drift_fine = 0.0;
  double ratio = 0.0;
  std::vector<double> mass_drift;
};

DriftStudy energy_drift_study(const ScenarioConfig& config, double epsilon, double t_final, GroundStateCache& cache);

/// Identity residuals at sample strides s, 2s, 4s, ... from one run.
struct IdentityStudy {
  std::vector<long> decimations;
  std::vector<double> sample_dt;
  std::vector<double> max_continuity;
  std::vector<double> max_momentum;
  std::vector<double> continuity_orders;
  std::vector<double> momentum_orders;
  /// max_t |int q(t) - int q(0)|.
  double momentum_variation = 0.0;
};

IdentityStudy identity_study(const ScenarioConfig& config, double epsilon, double t_final, long decimation,
                             int levels, GroundStateCache& cache);

}  // namespace solitondyn
