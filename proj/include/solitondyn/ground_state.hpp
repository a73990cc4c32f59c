#pragma once

#include <cstdint>
#include <vector>

#include "solitondyn/grid.hpp"

namespace solitondyn {

using Matrix = std::vector<std::vector<double>>;

struct NonlinearityParams {
  int components = 1;
  double p = 1.0;
  std::vector<double> alpha{1.0};
  Matrix gamma{{0.0}};
  std::vector<double> beta{0.0};
  Matrix omega{{0.0}};

  static NonlinearityParams scalar(double p, double alpha = 1.0, double beta = 0.0);
  static NonlinearityParams coupled(double p, std::vector<double> alpha, Matrix gamma);

  bool has_nonlocal() const noexcept;
  void validate(int dim) const;
};

/// Local coupling factors |u|_j^{2p} = alpha_j |u_j|^{2p} + sum_{i!=j} gamma_ij |u_i|^{p+1}|u_j|^{p-1}.
/// moduli[j] holds |u_j| pointwise; |u_j| is floored at 1e-14 max|u_j| where it
/// enters with a negative power.
std::vector<RealArray> local_factors(const NonlinearityParams& params,
                                     const std::vector<RealArray>& moduli);

/// Pointwise density of sum alpha_j/(p+1)|u_j|^{2p+2} + sum_{i!=j} gamma_ij/(p+1)|u_i|^{p+1}|u_j|^{p+1}.
double local_potential_energy(const SpectralGrid& grid, const NonlinearityParams& params,
                              const std::vector<RealArray>& moduli);

std::vector<RealArray> moduli(const VectorField& f);

struct GroundState {
  SpectralGrid grid;
  std::vector<RealArray> profile;
  std::vector<double> masses;
  double total_mass = 0.0;
  double energy = 0.0;
  double residual = 0.0;
  std::vector<double> multipliers;
  std::vector<bool> near_zero;
  NonlinearityParams params;
  long iterations = 0;

  int components() const noexcept { return static_cast<int>(profile.size()); }
  VectorField field() const;
  /// Same profile on a grid with equal spacing (zero padded or cropped about the origin).
  GroundState on_grid(const SpectralGrid& target) const;
  /// Smallest radius beyond which every component is below rel * its maximum.
  double decay_radius(double rel = 1e-12) const;
};

double energy_E(const VectorField& u, const NonlinearityParams& params);

struct GroundStateOptions {
  double tol = 1e-10;
  long max_iterations = 200000;
  double initial_step = 1.0;
  /// Backtracking gives up below this step size.
  double min_step = 1e-8;
  /// Rescale masses until every multiplier equals 1.
  bool canonical = false;
  double multiplier_tol = 1e-11;
  int max_mass_updates = 40;
  /// Components with mass below this fraction of the total are flagged.
  double near_zero_fraction = 1e-6;
  /// Relative residual below which the |u| projection is no longer applied.
  double cone_release = 1e-7;
};

GroundState solve_ground_state(const NonlinearityParams& params, const std::vector<double>& target_masses,
                               const SpectralGrid& grid, const GroundStateOptions& options = {});

/// Canonical solve (multipliers 1) with initial mass guesses.
GroundState solve_canonical_ground_state(const NonlinearityParams& params, const SpectralGrid& grid,
                                         double tol = 1e-10);

/// Per-component multipliers lambda_j = (int |u|_j^{2p} u_j^2 - 1/2 |grad u_j|^2) / m_j.
std::vector<double> multipliers(const VectorField& u, const NonlinearityParams& params);

/// L2 norm of -1/2 Lap r_j + lambda_j r_j - |r|_j^{2p} r_j over all components.
double system_residual(const VectorField& r, const NonlinearityParams& params,
                       const std::vector<double>& lambda);
/// Residual of the system with lambda = 1.
double system_residual(const GroundState& r, const NonlinearityParams& params);

/// (1+p)^{1/(2p)} sech^{1/p}(sqrt(2) p x) sampled on a 1D grid.
RealArray closed_form_profile(double p, const SpectralGrid& grid);
double closed_form_mass(double p);

struct GammaFit {
  double value = 0.0;
  /// Center of the fitted profile: the minimizer is r(. - center), i.e. y = -center.
  Vec center{};
  std::vector<double> phases;
};

/// inf over y, theta of || U - (e^{i theta_j} r_j(. + y))_j ||^2_{H^1}.
GammaFit gamma_distance(const VectorField& U, const GroundState& r);

struct ProbeOptions {
  double scale = 1e-2;
  double gamma_cap = 0.5;
  double gamma_floor = 1e-12;
  double energy_tol = 1e-10;
  std::uint64_t seed = 12345;
};

struct ProbeResult {
  double max_ratio = 0.0;
  std::vector<double> ratios;
  int skipped = 0;
};

ProbeResult convexity_probe(const GroundState& r, const NonlinearityParams& params, int trials,
                            const ProbeOptions& options = {});

}  // namespace solitondyn
