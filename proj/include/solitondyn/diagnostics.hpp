#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "solitondyn/classical.hpp"
#include "solitondyn/evolution.hpp"
#include "solitondyn/ground_state.hpp"
#include "solitondyn/potentials.hpp"

namespace solitondyn {

inline constexpr double kDensityFloor = 1e-10;

struct EnergySplit {
  double potential = 0.0;
  double bound = 0.0;
  double kinetic = 0.0;
  double nonlocal = 0.0;
  double total = 0.0;

  double recombined() const noexcept { return potential + bound + kinetic + nonlocal; }
};

/// Total energy and its potential / bound-state / current / nonlocal split.
/// Points with |f_j| < floor * max|f_j| put their whole magnetic gradient
/// density into the bound part and nothing into the current part.
EnergySplit total_energy(const VectorField& f, const PotentialSet& pots, const NonlinearityParams& params,
                         double epsilon, double floor = kDensityFloor);

struct MagneticMomentum {
  /// density[j][axis] = Im(conj(f_j) (d_axis f_j - i A_axis(eps x) f_j)).
  std::vector<std::array<RealArray, kMaxDim>> density;
  std::array<RealArray, kMaxDim> total;
  std::vector<Vec> integrals;
  Vec total_integral{};
};

MagneticMomentum magnetic_momentum(const VectorField& f, const PotentialSet& pots, double epsilon);

/// ||(grad / i - A(eps x)) f_j||_{L2}.
std::vector<double> magnetic_gradient_norms(const VectorField& f, const PotentialSet& pots, double epsilon);

/// C-infinity bump: 1 for |y| <= radius, 0 for |y| >= 2 radius.
double cutoff(const Vec& y, int dim, double radius) noexcept;

inline constexpr double kPlateauTail = 1e-12;

/// Radius beyond which the profile holds at most `fraction` of its mass.
double mass_tail_radius(const GroundState& r, double fraction);

/// Plateau radius 2 max|eps x_eps(t)| + 5 eps l, with l the mass-tail radius at kPlateauTail.
double choose_cutoff_radius(const Trajectory& predicted, const GroundState& r, double epsilon);

/// Fixed family of test functions with certified C^3 norms at most one.
/// The C^3 norm is the sum over multi-indices of order <= 3 of sup |D^alpha phi|.
class TestDictionary {
 public:
  enum class Kind { gaussian, cosine, sine, windowed_coordinate };

  struct Member {
    Kind kind = Kind::gaussian;
    Vec center{};
    double width = 1.0;
    Vec wave{};
    int axis = 0;
    double amplitude = 1.0;
    /// Certified bound on the C^3 norm including the amplitude.
    double c3_bound = 0.0;
  };

  static constexpr const char* kVersion = "dictionary-v1";

  /// Gaussians on a unit lattice in [-2, 2]^N with widths 0.5, 1, 2; cosine and
  /// sine modes with wavenumbers 0.5, 1, 2 along each axis and the diagonal;
  /// Gaussian-windowed coordinates with widths 1, 2.
  static TestDictionary standard(int dim);

  int dim() const noexcept { return dim_; }
  const std::vector<Member>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

  double value(std::size_t member, const Vec& y) const noexcept;

  /// C^3 norm of the unit-amplitude member, from one-dimensional sup constants.
  static double unit_c3_norm(const Member& m, int dim) noexcept;

 private:
  int dim_ = 1;
  std::vector<Member> members_;
};

struct PiValues {
  Vec pi1{};
  double pi1_norm = 0.0;
  double pi2_sup = 0.0;
  std::size_t pi2_argmax = 0;
  Vec gamma_eps{};
  double gamma_eps_norm = 0.0;
  double rho_A = 0.0;
  double omega_hat = 0.0;
  double omega = 0.0;
  /// Fraction of the mass with |eps x| beyond the cutoff plateau.
  double mass_outside_plateau = 0.0;
};

/// Throws a cutoff error when more than 1e-10 of the mass lies outside the plateau.
PiValues pi_functionals(const VectorField& f, const ClassicalState& classical, const std::vector<double>& masses,
                        const TestDictionary& dictionary, const PotentialSet& pots, double cutoff_radius);

/// int x chi(eps x) |f|^2 dx / M.
Vec cutoff_center_of_mass(const VectorField& f, double epsilon, double cutoff_radius, double total_mass);

struct SolitonFit {
  Vec shift{};
  std::vector<double> phases;
  std::vector<double> residual_h1;
  double gamma_dist = 0.0;
  bool valid = true;
};

/// Strips exp(i(xi.x + A(eps x_eps).(x - x_eps))) from f and fits
/// exp(i theta_j) r_j(x - y) in H1. `r` must live on the field's grid.
/// valid is false when gamma_dist exceeds the trust region.
SolitonFit soliton_fit(const VectorField& f, const GroundState& r, const ClassicalState& classical,
                       const PotentialSet& pots, double trust_region = 0.5);

/// The modulated frame field used by soliton_fit.
VectorField demodulate(const VectorField& f, const ClassicalState& classical, const PotentialSet& pots);

/// ||f_j| - r_j(. - x_eps)||_{H1} per component.
std::vector<double> modulus_error(const VectorField& f, const GroundState& r, const ClassicalState& classical);

struct DiagnosticsOptions {
  double cutoff_radius = 1.0;
  double trust_region = 0.5;
  double sigma0 = 0.1;
  double floor = kDensityFloor;
  double inequality_slack = 1e-12;
};

struct InequalityChecks {
  /// rhs - lhs for ||grad|f_j||| <= ||(grad/i - A) f_j||, per component.
  std::vector<double> diamagnetic;
  /// M sum |P_j|^2 / m_j - |sum P_j|^2.
  double momentum_cs = 0.0;
  /// E^k - sum |P_j|^2/(2 m_j) - (1/2) sum int |p_j/|f_j| - P_j |f_j| / m_j|^2.
  double kinetic_lower = 0.0;
  double split_relative_error = 0.0;
  int violations = 0;
};

struct DiagnosticRecord {
  double time = 0.0;
  std::vector<double> masses;
  double energy_total = 0.0;
  EnergySplit energy_split;
  double hamiltonian = 0.0;
  Vec momentum_total{};
  Vec center_of_mass{};
  Vec classical_position{};
  Vec classical_velocity{};
  PiValues pi;
  double pi1_norm = 0.0;
  double pi2_norm = 0.0;
  double gamma_eps = 0.0;
  double rho_A = 0.0;
  double omega_hat = 0.0;
  double omega = 0.0;
  double gamma_dist = 0.0;
  std::vector<double> error_h1;
  std::vector<double> error_modulus;
  Vec fit_shift{};
  std::vector<double> fit_phases;
  bool decomposition_valid = true;
  double magnetic_gradient_norm = 0.0;
  /// Local energy of the demodulated field minus that of the ground state.
  double energy_gap = 0.0;
  InequalityChecks inequalities;
};

/// Everything fixed over a run.
struct DiagnosticsContext {
  DiagnosticsContext(const GroundState& r, const SpectralGrid& grid, PotentialSet pots, NonlinearityParams params,
                     double epsilon, DiagnosticsOptions options = {});

  GroundState ground_state;  // resampled on the field grid
  PotentialSet potentials;
  NonlinearityParams params;
  double epsilon;
  DiagnosticsOptions options;
  TestDictionary dictionary;
  double ground_energy;
};

DiagnosticRecord diagnose(const FieldState& state, const ClassicalState& classical, const DiagnosticsContext& ctx);

InequalityChecks check_inequalities(const VectorField& f, const PotentialSet& pots, double epsilon,
                                    const EnergySplit& split, double floor = kDensityFloor,
                                    double slack = 1e-12);

/// First time Omega or Gamma exceeds sigma0.
struct TStarMonitor {
  double sigma0 = 0.1;
  std::optional<double> first_violation;
  double max_omega = 0.0;
  double max_gamma = 0.0;

  void update(const DiagnosticRecord& rec);
};

/// Samples of one run taken at a uniform stride.
struct IdentitySample {
  double time = 0.0;
  std::vector<RealArray> density;
  std::vector<RealArray> current_divergence;
  Vec momentum{};
  Vec momentum_rhs{};
};

/// Densities, div p^A_j, int q^A and the right side of the momentum law.
IdentitySample identity_sample(const VectorField& f, double time, const PotentialSet& pots,
                               const NonlinearityParams& params, double epsilon);

struct IdentityResidual {
  double time = 0.0;
  double continuity = 0.0;
  double momentum = 0.0;
};

struct IdentityReport {
  std::vector<IdentityResidual> residuals;
  double sample_dt = 0.0;
  bool accuracy_warning = false;
  double max_continuity = 0.0;
  double max_momentum = 0.0;
};

/// Keeps a three-sample window and takes every `decimation`-th pushed sample.
class IdentityTracker {
 public:
  IdentityTracker(const SpectralGrid& grid, long decimation, double step_dt);

  void push(std::shared_ptr<const IdentitySample> sample);
  const IdentityReport& report() const noexcept { return report_; }
  long decimation() const noexcept { return decimation_; }

 private:
  SpectralGrid grid_;
  long decimation_;
  double step_dt_;
  long pushed_ = 0;
  std::vector<std::shared_ptr<const IdentitySample>> window_;
  IdentityReport report_;
};

/// Centered differences over a stored history (uniform spacing required).
IdentityReport identity_residuals(const SpectralGrid& grid, const std::vector<IdentitySample>& history,
                                  double step_dt);

struct QuadratureReport {
  std::vector<double> epsilons;
  /// single[i][e] = |int (g(eps x + y) - g(y)) r_i^2 dx|.
  std::vector<std::vector<double>> single;
  /// pair[i][j][e] = |iint (g(eps (x - z)) - g(0)) r_i^2(x) r_j^2(z) dx dz|.
  std::vector<std::vector<std::vector<double>>> pair;
  std::vector<double> single_slopes;
  Matrix pair_slopes;
  double min_slope = 0.0;
};

QuadratureReport quadrature_lemmas(const GroundState& r, const std::function<double(const Vec&)>& g, const Vec& y,
                                   const std::vector<double>& epsilons);

/// Least-squares slope of log y against log x; NaN with fewer than two positive pairs.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Fixed-order CSV of diagnostic records; the header names every column.
void write_diagnostics_header(std::ostream& out, int dim, int components);
void write_diagnostics_row(std::ostream& out, const DiagnosticRecord& rec, int dim);

/// Observer collecting records (and identity samples when trackers are given).
class DiagnosticRecorder {
 public:
  explicit DiagnosticRecorder(std::shared_ptr<const DiagnosticsContext> ctx);

  /// Adds an identity tracker taking every `decimation`-th observed sample.
  void track_identities(long decimation, double step_dt);

  Observer observer();

  const std::vector<DiagnosticRecord>& records() const noexcept { return records_; }
  const std::vector<IdentityTracker>& trackers() const noexcept { return trackers_; }
  const TStarMonitor& tstar() const noexcept { return tstar_; }

 private:
  void observe(const FieldState& state, const ClassicalState& classical);

  std::shared_ptr<const DiagnosticsContext> ctx_;
  std::vector<DiagnosticRecord> records_;
  std::vector<IdentityTracker> trackers_;
  TStarMonitor tstar_;
};

}  // namespace solitondyn
