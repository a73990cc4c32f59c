#pragma once

#include <functional>
#include <vector>

#include "solitondyn/classical.hpp"
#include "solitondyn/ground_state.hpp"
#include "solitondyn/potentials.hpp"

namespace solitondyn {

struct EvolutionConfig {
  EvolutionConfig(SpectralGrid grid, GroundState ground_state);

  double epsilon = 1.0;
  double dt = 1e-3;
  double t_final = 0.0;
  SpectralGrid grid;
  PotentialSet potentials;
  NonlinearityParams params;
  /// Initial position x0/eps and velocity xi0; epsilon is taken from this config.
  ClassicalState classical0;
  GroundState ground_state;

  /// Bound on dt * max|k|^2 / 2.
  double stability_constant = 10.0;
  /// Bound on max|A| * max|k| * dt.
  double advection_cfl = 0.5;
  double step_mass_tol = 1e-12;
  double run_mass_tol = 1e-10;
  /// Relative level the datum must fall below in the outer quarter of the box.
  double margin_level = 1e-12;
  long observer_stride = 1;

  long steps() const;
  void validate() const;
};

struct FieldState {
  VectorField field;
  double time = 0.0;
  long step_index = 0;
};

/// Moving soliton r_j(x - x0) exp(i[A(eps x0).(x - x0) + x.xi0]).
/// Throws domain-too-small if the translated profile is not below
/// margin_level * max in the outer quarter of the box.
VectorField build_initial_datum(const GroundState& r, const ClassicalState& classical0, const PotentialSet& pots,
                                double epsilon, const SpectralGrid& grid, double margin_level = 1e-12);

/// L_A f + V(eps x) f with spectral derivatives.
VectorField apply_magnetic_hamiltonian(const VectorField& f, const PotentialSet& pots, double epsilon);

/// Local and nonlocal nonlinear terms of the system.
VectorField nonlinear_rhs(const VectorField& f, const PotentialSet& pots, const NonlinearityParams& params,
                          double epsilon);

/// Sampled kernel Phi(eps x) in convolution form.
ComplexArray nonlocal_kernel(const PotentialSet& pots, double epsilon, const SpectralGrid& grid);

/// Center of mass of the total density.
Vec center_of_mass(const VectorField& f);

/// Strang splitting: multiplicative half step, derivative step, multiplicative half step.
class SplitStepper {
 public:
  explicit SplitStepper(const EvolutionConfig& config);

  /// Advances one dt. Checks per-step mass change and the domain exit rule.
  void step(FieldState& state) const;

  double dt() const noexcept { return dt_; }

  /// Start-of-run masses used for the drift check.
  void set_reference_masses(std::vector<double> masses) { reference_masses_ = std::move(masses); }

 private:
  void multiplicative(VectorField& f, double tau) const;
  void kinetic(VectorField& f, const ComplexArray& phase) const;
  void advect(VectorField& f) const;
  void advection_operator(const ComplexArray& in, ComplexArray& out) const;

  SpectralGrid grid_;
  NonlinearityParams params_;
  double dt_;
  double step_mass_tol_;
  double run_mass_tol_;
  Fft fft_;
  bool magnetic_;
  bool nonlocal_;
  RealArray static_potential_;  // V(eps x) + |A(eps x)|^2 / 2
  std::array<RealArray, kMaxDim> a_;
  ComplexArray half_kinetic_;
  ComplexArray full_kinetic_;
  ComplexArray kernel_hat_;
  std::vector<double> reference_masses_;
};

using Observer = std::function<void(const FieldState&, const ClassicalState&)>;

struct EvolutionResult {
  FieldState final_state;
  ClassicalState final_classical;
  long records = 0;
};

/// Runs to t_final, calling observers at step 0, every observer_stride
/// steps and at the final step, with the co-integrated classical state.
EvolutionResult evolve(const EvolutionConfig& config, const std::vector<Observer>& observers = {});

/// Same from an arbitrary starting field (used for reversal and restarts).
EvolutionResult evolve_from(const EvolutionConfig& config, FieldState start, const std::vector<Observer>& observers = {});

}  // namespace solitondyn
