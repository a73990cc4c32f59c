#include "solitondyn/classical.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "solitondyn/errors.hpp"

namespace solitondyn {

Mat magnetic_field(const VectorPotential& A, const Vec& y, int dim) noexcept {
  Mat H{};
  if (dim < 2 || A.is_zero()) return H;
  const Mat J = A.jacobian(y, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) H[i][j] = J[j][i] - J[i][j];
  return H;
}

Vec cross_field(const Vec& xi, const Mat& H, int dim) noexcept {
  Vec out{};
  for (int l = 0; l < dim; ++l)
    for (int i = 0; i < dim; ++i) out[l] -= H[l][i] * xi[i];
  return out;
}

UnscaledState to_unscaled(const ClassicalState& s) noexcept {
  UnscaledState u;
  for (int d = 0; d < kMaxDim; ++d) {
    u.position[d] = s.epsilon * s.position[d];
    u.velocity[d] = s.velocity[d];
  }
  u.time = s.epsilon * s.time;
  return u;
}

ClassicalState to_scaled(const UnscaledState& s, double epsilon) noexcept {
  ClassicalState c;
  for (int d = 0; d < kMaxDim; ++d) {
    c.position[d] = s.position[d] / epsilon;
    c.velocity[d] = s.velocity[d];
  }
  c.time = s.time / epsilon;
  c.epsilon = epsilon;
  return c;
}

Vec classical_force(const ClassicalState& s, const PotentialSet& pots) noexcept {
  const int dim = pots.dim;
  const double eps = s.epsilon;
  Vec y{};
  for (int d = 0; d < dim; ++d) y[d] = eps * s.position[d];
  const Vec gv = pots.V.gradient(y, dim);
  const Vec lorentz = cross_field(s.velocity, magnetic_field(pots.A, y, dim), dim);
  Vec f{};
  for (int d = 0; d < dim; ++d) f[d] = -eps * gv[d] - eps * lorentz[d];
  return f;
}

namespace {

struct Derivative {
  Vec dx{};
  Vec dxi{};
};

Derivative rhs(const ClassicalState& s, const PotentialSet& pots) {
  return {s.velocity, classical_force(s, pots)};
}

ClassicalState advance(const ClassicalState& s, const Derivative& k, double h, int dim) {
  ClassicalState out = s;
  for (int d = 0; d < dim; ++d) {
    out.position[d] += h * k.dx[d];
    out.velocity[d] += h * k.dxi[d];
  }
  out.time += h;
  return out;
}

}  // namespace

ClassicalState step_classical(const ClassicalState& s, const PotentialSet& pots, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCategory::config, "time step must be positive");
  const int dim = pots.dim;
  const Derivative k1 = rhs(s, pots);
  const Derivative k2 = rhs(advance(s, k1, 0.5 * dt, dim), pots);
  const Derivative k3 = rhs(advance(s, k2, 0.5 * dt, dim), pots);
  const Derivative k4 = rhs(advance(s, k3, dt, dim), pots);
  ClassicalState out = s;
  for (int d = 0; d < dim; ++d) {
    out.position[d] += dt / 6.0 * (k1.dx[d] + 2.0 * k2.dx[d] + 2.0 * k3.dx[d] + k4.dx[d]);
    out.velocity[d] += dt / 6.0 * (k1.dxi[d] + 2.0 * k2.dxi[d] + 2.0 * k3.dxi[d] + k4.dxi[d]);
  }
  out.time = s.time + dt;
  for (int d = 0; d < dim; ++d)
    if (!std::isfinite(out.position[d]) || !std::isfinite(out.velocity[d]))
      throw StepError(ErrorCategory::blow_up, "classical state is not finite", -1, out.time);
  return out;
}

double nonlocal_constant(const PotentialSet& pots, const NonlinearityParams& params,
                         const std::vector<double>& masses) {
  if (!pots.nonlocal_enabled()) return 0.0;
  double total = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    total += masses[j];
    weighted += params.beta[j] * masses[j] * masses[j];
    for (std::size_t i = 0; i < masses.size(); ++i)
      if (i != j) weighted += params.omega[i][j] * masses[i] * masses[j];
  }
  if (weighted == 0.0) return 0.0;
  return -pots.Phi.value(Vec{}, pots.dim) / (2.0 * total) * weighted;
}

HamiltonianValue hamiltonian(const ClassicalState& s, const PotentialSet& pots, const NonlinearityParams& params,
                             const std::vector<double>& masses) {
  HamiltonianValue h;
  Vec y{};
  for (int d = 0; d < pots.dim; ++d) {
    h.kinetic += 0.5 * s.velocity[d] * s.velocity[d];
    y[d] = s.epsilon * s.position[d];
  }
  h.potential = pots.V.value(y, pots.dim);
  h.nonlocal_const = nonlocal_constant(pots, params, masses);
  h.total = h.kinetic + h.potential + h.nonlocal_const;
  return h;
}

Trajectory integrate_trajectory(const ClassicalState& start, const PotentialSet& pots, double dt, long steps,
                                const NonlinearityParams& params, const std::vector<double>& masses,
                                long stride) {
  if (stride < 1) throw Error(ErrorCategory::config, "trajectory stride must be at least 1");
  if (steps < 0) throw Error(ErrorCategory::config, "number of steps must be nonnegative");
  Trajectory traj;
  traj.dim = pots.dim;
  const double m0 = nonlocal_constant(pots, params, masses);
  auto record = [&](const ClassicalState& s) {
    traj.states.push_back(s);
    Vec y{};
    double kin = 0.0;
    for (int d = 0; d < pots.dim; ++d) {
      kin += 0.5 * s.velocity[d] * s.velocity[d];
      y[d] = s.epsilon * s.position[d];
    }
    traj.energy.push_back(kin + pots.V.value(y, pots.dim) + m0);
  };
  ClassicalState s = start;
  record(s);
  for (long k = 1; k <= steps; ++k) {
    try {
      s = step_classical(s, pots, dt);
    } catch (const StepError& e) {
      throw StepError(e.category(), "classical state is not finite", k, s.time + dt);
    }
    if (k % stride == 0 || k == steps) record(s);
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t";
  for (int d = 0; d < traj.dim; ++d) out << ",x" << d + 1;
  for (int d = 0; d < traj.dim; ++d) out << ",xi" << d + 1;
  out << ",H_total\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& s = traj.states[k];
    out << s.time;
    for (int d = 0; d < traj.dim; ++d) out << ',' << s.position[d];
    for (int d = 0; d < traj.dim; ++d) out << ',' << s.velocity[d];
    out << ',' << traj.energy[k] << '\n';
  }
}

}  // namespace solitondyn
