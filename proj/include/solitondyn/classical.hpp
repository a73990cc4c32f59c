#pragma once

#include <iosfwd>
#include <vector>

#include "solitondyn/ground_state.hpp"
#include "solitondyn/potentials.hpp"

namespace solitondyn {

/// H_ij = d_i A_j - d_j A_i at y; identically zero in one dimension.
Mat magnetic_field(const VectorPotential& A, const Vec& y, int dim) noexcept;

/// Matrix action realizing xi x B: (xi x B)_l = -sum_i H_li xi_i.
Vec cross_field(const Vec& xi, const Mat& H, int dim) noexcept;

struct ClassicalState {
  Vec position{};
  Vec velocity{};
  double time = 0.0;
  double epsilon = 1.0;
};

/// State of the epsilon-free system, in slow time s = epsilon t.
struct UnscaledState {
  Vec position{};
  Vec velocity{};
  double time = 0.0;
};

UnscaledState to_unscaled(const ClassicalState& s) noexcept;
ClassicalState to_scaled(const UnscaledState& s, double epsilon) noexcept;

/// Force -eps grad V(eps x) - eps xi x B(eps x).
Vec classical_force(const ClassicalState& s, const PotentialSet& pots) noexcept;

/// One RK4 step. Throws blow-up if the result is not finite.
ClassicalState step_classical(const ClassicalState& s, const PotentialSet& pots, double dt);

struct HamiltonianValue {
  double kinetic = 0.0;
  double potential = 0.0;
  double nonlocal_const = 0.0;
  double total = 0.0;
};

/// -(Phi(0) / 2M) (sum beta_j m_j^2 + sum_{i!=j} omega_ij m_i m_j).
double nonlocal_constant(const PotentialSet& pots, const NonlinearityParams& params,
                         const std::vector<double>& masses);

HamiltonianValue hamiltonian(const ClassicalState& s, const PotentialSet& pots, const NonlinearityParams& params,
                             const std::vector<double>& masses);

struct Trajectory {
  int dim = 1;
  std::vector<ClassicalState> states;
  std::vector<double> energy;  // total Hamiltonian per state
};

/// Integrates `steps` steps of size dt, recording every `stride`-th state
/// (the initial and final states are always recorded).
Trajectory integrate_trajectory(const ClassicalState& start, const PotentialSet& pots, double dt, long steps,
                                const NonlinearityParams& params, const std::vector<double>& masses,
                                long stride = 1);

/// Columns t, x1..xN, xi1..xiN, H_total.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace solitondyn
