#include "solitondyn/evolution.hpp"

#include <cmath>
#include <sstream>

#include "solitondyn/errors.hpp"

namespace solitondyn {

namespace {

Vec scaled_point(const SpectralGrid& grid, std::size_t i, double epsilon) {
  Vec y = grid.point(i);
  for (int d = 0; d < grid.dim(); ++d) y[d] *= epsilon;
  return y;
}

GroundState profile_on(const GroundState& r, const SpectralGrid& grid) {
  if (r.grid.same_as(grid)) return r;
  if (r.grid.dim() != grid.dim() || std::abs(r.grid.spacing() - grid.spacing()) > 1e-12 * grid.spacing())
    throw Error(ErrorCategory::config, "ground state grid spacing differs from the evolution grid");
  return r.on_grid(grid);
}

}  // namespace

EvolutionConfig::EvolutionConfig(SpectralGrid g, GroundState gs)
    : grid(std::move(g)), ground_state(std::move(gs)) {
  potentials.dim = grid.dim();
  params = ground_state.params;
}

long EvolutionConfig::steps() const {
  const double ratio = t_final / dt;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
    throw Error(ErrorCategory::config, "t_final must be an integer multiple of dt");
  return n;
}

void EvolutionConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCategory::config, "epsilon must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCategory::config, "dt must be positive");
  if (!(t_final >= 0.0)) throw Error(ErrorCategory::config, "t_final must be nonnegative");
  if (observer_stride < 1) throw Error(ErrorCategory::config, "observer stride must be at least 1");
  if (potentials.dim != grid.dim()) throw Error(ErrorCategory::dimension, "potentials and grid disagree on dimension");
  params.validate(grid.dim());
  if (ground_state.components() != params.components)
    throw Error(ErrorCategory::config, "ground state and parameters disagree on the number of components");
  steps();
  potentials.validate(epsilon, grid);
  const double kmax = grid.max_wavenumber();
  if (dt * 0.5 * kmax * kmax > stability_constant) {
    std::ostringstream os;
    os << "dt * max|k|^2 / 2 = " << dt * 0.5 * kmax * kmax << " exceeds the stability constant "
       << stability_constant;
    throw Error(ErrorCategory::stability, os.str());
  }
  if (!potentials.A.is_zero()) {
    double amax = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec a = potentials.A.value(scaled_point(grid, i, epsilon), grid.dim());
      double s = 0.0;
      for (int d = 0; d < grid.dim(); ++d) s += a[d] * a[d];
      amax = std::max(amax, std::sqrt(s));
    }
    if (amax * kmax * dt > advection_cfl) {
      std::ostringstream os;
      os << "advection number max|A| max|k| dt = " << amax * kmax * dt << " exceeds " << advection_cfl;
      throw Error(ErrorCategory::stability, os.str());
    }
  }
}

VectorField build_initial_datum(const GroundState& r, const ClassicalState& c0, const PotentialSet& pots,
                                double epsilon, const SpectralGrid& grid, double margin_level) {
  const GroundState local = profile_on(r, grid);
  const int dim = grid.dim();
  Vec y0{};
  for (int d = 0; d < dim; ++d) y0[d] = epsilon * c0.position[d];
  const Vec a0 = pots.A.value(y0, dim);

  VectorField out(grid, local.components());
  const double quarter = 0.25 * grid.extent();
  for (int j = 0; j < local.components(); ++j) {
    const auto& profile = local.profile[static_cast<std::size_t>(j)];
    const bool at_origin = c0.position[0] == 0.0 && (dim < 2 || c0.position[1] == 0.0);
    const RealArray moved = at_origin ? profile : fourier_translate(grid, profile, c0.position);
    const double peak = max_abs(moved);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec x = grid.point(i);
      bool outer = false;
      for (int d = 0; d < dim; ++d) outer = outer || std::abs(x[d]) >= quarter;
      if (outer && std::abs(moved[i]) >= margin_level * peak) {
        std::ostringstream os;
        os << "soliton does not decay below " << margin_level << " of its peak within the outer quarter of the box";
        throw Error(ErrorCategory::domain_too_small, os.str());
      }
      double phase = 0.0;
      for (int d = 0; d < dim; ++d) phase += a0[d] * (x[d] - c0.position[d]) + x[d] * c0.velocity[d];
      out[j][i] = std::polar(moved[i], phase);
    }
  }
  return out;
}

VectorField apply_magnetic_hamiltonian(const VectorField& f, const PotentialSet& pots, double epsilon) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  VectorField out(grid, f.components());
  for (int j = 0; j < f.components(); ++j) {
    const ComplexArray lap = laplacian(grid, f[j]);
    const auto grad = gradient(grid, f[j]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec y = scaled_point(grid, i, epsilon);
      const Vec a = pots.A.value(y, dim);
      Complex adv = 0.0;
      double a2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        adv += a[d] * grad[static_cast<std::size_t>(d)][i];
        a2 += a[d] * a[d];
      }
      const double div = epsilon * pots.A.divergence(y, dim);
      const Complex I(0.0, 1.0);
      out[j][i] = -0.5 * lap[i] + I * adv + 0.5 * I * div * f[j][i] + (0.5 * a2 + pots.V.value(y, dim)) * f[j][i];
    }
  }
  return out;
}

ComplexArray nonlocal_kernel(const PotentialSet& pots, double epsilon, const SpectralGrid& grid) {
  RealArray k(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) k[i] = pots.Phi.value(scaled_point(grid, i, epsilon), grid.dim());
  return convolution_kernel(grid, k);
}

namespace {

// W_j = Phi(eps .) * (beta_j |f_j|^2 + sum_{i!=j} omega_ij |f_i|^2)
std::vector<RealArray> nonlocal_potentials(const SpectralGrid& grid, const NonlinearityParams& params,
                                           const ComplexArray& kernel_hat, const std::vector<RealArray>& mod) {
  const std::size_t m = mod.size();
  std::vector<RealArray> out;
  for (std::size_t j = 0; j < m; ++j) {
    RealArray density(grid.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = i == j ? params.beta[j] : params.omega[i][j];
      if (w == 0.0) continue;
      any = true;
      for (std::size_t x = 0; x < density.size(); ++x) density[x] += w * mod[i][x] * mod[i][x];
    }
    out.push_back(any ? convolve_with(grid, kernel_hat, density) : RealArray(grid.size(), 0.0));
  }
  return out;
}

}  // namespace

VectorField nonlinear_rhs(const VectorField& f, const PotentialSet& pots, const NonlinearityParams& params,
                          double epsilon) {
  const SpectralGrid& grid = f.grid();
  const auto mod = moduli(f);
  const auto local = local_factors(params, mod);
  std::vector<RealArray> nonlocal;
  if (pots.nonlocal_enabled() && params.has_nonlocal())
    nonlocal = nonlocal_potentials(grid, params, nonlocal_kernel(pots, epsilon, grid), mod);
  VectorField out(grid, f.components());
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double w = nonlocal.empty() ? 0.0 : nonlocal[uj][i];
      out[j][i] = (local[uj][i] + w) * f[j][i];
    }
  }
  return out;
}

Vec center_of_mass(const VectorField& f) {
  const SpectralGrid& grid = f.grid();
  Vec c{};
  double total = 0.0;
  for (int j = 0; j < f.components(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double rho = std::norm(f[j][i]);
      total += rho;
      for (int d = 0; d < grid.dim(); ++d) c[d] += grid.x_axis(i, d) * rho;
    }
  if (total > 0.0)
    for (int d = 0; d < grid.dim(); ++d) c[d] /= total;
  return c;
}

SplitStepper::SplitStepper(const EvolutionConfig& config)
    : grid_(config.grid),
      params_(config.params),
      dt_(config.dt),
      step_mass_tol_(config.step_mass_tol),
      run_mass_tol_(config.run_mass_tol),
      fft_(config.grid),
      magnetic_(!config.potentials.A.is_zero()),
      nonlocal_(config.potentials.nonlocal_enabled() && config.params.has_nonlocal()) {
  const std::size_t n = grid_.size();
  const int dim = grid_.dim();
  const auto& pots = config.potentials;
  static_potential_.resize(n);
  for (int d = 0; d < dim; ++d) a_[static_cast<std::size_t>(d)].assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec y = scaled_point(grid_, i, config.epsilon);
    const Vec a = pots.A.value(y, dim);
    double a2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      a_[static_cast<std::size_t>(d)][i] = a[d];
      a2 += a[d] * a[d];
    }
    static_potential_[i] = pots.V.value(y, dim) + 0.5 * a2;
  }
  half_kinetic_.resize(n);
  full_kinetic_.resize(n);
  for (std::size_t q = 0; q < n; ++q) {
    const double k2 = grid_.k_squared(q);
    half_kinetic_[q] = std::polar(1.0, -0.25 * k2 * dt_);
    full_kinetic_[q] = std::polar(1.0, -0.5 * k2 * dt_);
  }
  if (nonlocal_) kernel_hat_ = nonlocal_kernel(pots, config.epsilon, grid_);
}

void SplitStepper::multiplicative(VectorField& f, double tau) const {
  const auto mod = moduli(f);
  const auto local = local_factors(params_, mod);
  std::vector<RealArray> nonlocal;
  if (nonlocal_) nonlocal = nonlocal_potentials(grid_, params_, kernel_hat_, mod);
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      double w = static_potential_[i] - local[uj][i];
      if (nonlocal_) w -= nonlocal[uj][i];
      f[j][i] *= std::polar(1.0, -tau * w);
    }
  }
}

void SplitStepper::kinetic(VectorField& f, const ComplexArray& phase) const {
  ComplexArray hat(grid_.size());
  for (int j = 0; j < f.components(); ++j) {
    fft_.forward(f[j].data(), hat.data());
    for (std::size_t q = 0; q < hat.size(); ++q) hat[q] *= phase[q];
    fft_.inverse(hat.data(), f[j].data());
  }
}

// B f = (A.grad f + div(A f)) / 2, skew-adjoint on the grid.
void SplitStepper::advection_operator(const ComplexArray& in, ComplexArray& out) const {
  const std::size_t n = grid_.size();
  const int dim = grid_.dim();
  const Complex I(0.0, 1.0);
  ComplexArray hat(n), work(n), acc(n, 0.0);
  fft_.forward(in.data(), hat.data());
  out.assign(n, 0.0);
  for (int d = 0; d < dim; ++d) {
    const auto& a = a_[static_cast<std::size_t>(d)];
    for (std::size_t q = 0; q < n; ++q) work[q] = I * grid_.k_axis(q, d) * hat[q];
    fft_.inverse(work.data(), work.data());
    for (std::size_t i = 0; i < n; ++i) out[i] += 0.5 * a[i] * work[i];
    for (std::size_t i = 0; i < n; ++i) work[i] = a[i] * in[i];
    fft_.forward(work.data(), work.data());
    for (std::size_t q = 0; q < n; ++q) acc[q] += I * grid_.k_axis(q, d) * work[q];
  }
  fft_.inverse(acc.data(), acc.data());
  for (std::size_t i = 0; i < n; ++i) out[i] += 0.5 * acc[i];
}

// Explicit midpoint rule for d/dt f = B f over one dt.
void SplitStepper::advect(VectorField& f) const {
  const std::size_t n = grid_.size();
  ComplexArray b(n), mid(n);
  for (int j = 0; j < f.components(); ++j) {
    advection_operator(f[j], b);
    for (std::size_t i = 0; i < n; ++i) mid[i] = f[j][i] + 0.5 * dt_ * b[i];
    advection_operator(mid, b);
    for (std::size_t i = 0; i < n; ++i) f[j][i] += dt_ * b[i];
  }
}

void SplitStepper::step(FieldState& state) const {
  VectorField& f = state.field;
  std::vector<double> before;
  for (int j = 0; j < f.components(); ++j) before.push_back(l2_norm_sq(grid_, f[j]));

  multiplicative(f, 0.5 * dt_);
  if (magnetic_) {
    kinetic(f, half_kinetic_);
    advect(f);
    kinetic(f, half_kinetic_);
  } else {
    kinetic(f, full_kinetic_);
  }
  multiplicative(f, 0.5 * dt_);

  state.step_index += 1;
  state.time = static_cast<double>(state.step_index) * dt_;

  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const double after = l2_norm_sq(grid_, f[j]);
    if (!std::isfinite(after))
      throw StepError(ErrorCategory::blow_up, "field is not finite", state.step_index, state.time);
    const double scale = before[uj] > 0.0 ? before[uj] : 1.0;
    const double change = std::abs(after - before[uj]) / scale;
    if (change > step_mass_tol_) {
      std::ostringstream os;
      os << "component " << j << " mass changed by " << change << " (relative) in one step";
      throw StepError(ErrorCategory::conservation, os.str(), state.step_index, state.time);
    }
    if (uj < reference_masses_.size() && reference_masses_[uj] > 0.0) {
      const double drift = std::abs(after - reference_masses_[uj]) / reference_masses_[uj];
      if (drift > run_mass_tol_) {
        std::ostringstream os;
        os << "component " << j << " mass drifted by " << drift << " (relative) since the start";
        throw StepError(ErrorCategory::conservation, os.str(), state.step_index, state.time);
      }
    }
  }
  const Vec c = center_of_mass(f);
  const double limit = 0.5 * grid_.extent() - 0.125 * grid_.extent();
  for (int d = 0; d < grid_.dim(); ++d)
    if (std::abs(c[d]) > limit) {
      std::ostringstream os;
      os << "soliton center " << c[d] << " on axis " << d << " is within L/8 of the box edge";
      throw StepError(ErrorCategory::domain_exit, os.str(), state.step_index, state.time);
    }
}

EvolutionResult evolve_from(const EvolutionConfig& config, FieldState start, const std::vector<Observer>& observers) {
  config.validate();
  const long steps = config.steps();
  SplitStepper stepper(config);
  std::vector<double> masses;
  for (int j = 0; j < start.field.components(); ++j) masses.push_back(l2_norm_sq(config.grid, start.field[j]));
  stepper.set_reference_masses(masses);

  ClassicalState classical = config.classical0;
  classical.epsilon = config.epsilon;
  classical.time = start.time;

  EvolutionResult result{std::move(start), classical, 0};
  FieldState& state = result.final_state;
  auto notify = [&] {
    for (const auto& obs : observers) obs(state, classical);
    ++result.records;
  };
  notify();
  for (long k = 1; k <= steps; ++k) {
    stepper.step(state);
    try {
      classical = step_classical(classical, config.potentials, config.dt);
    } catch (const StepError& e) {
      throw StepError(e.category(), "classical state is not finite", state.step_index, state.time);
    }
    classical.time = state.time;
    if (k % config.observer_stride == 0 || k == steps) notify();
  }
  result.final_classical = classical;
  return result;
}

EvolutionResult evolve(const EvolutionConfig& config, const std::vector<Observer>& observers) {
  config.validate();
  FieldState start{build_initial_datum(config.ground_state, config.classical0, config.potentials, config.epsilon,
                                       config.grid, config.margin_level),
                   0.0, 0};
  return evolve_from(config, std::move(start), observers);
}

}  // namespace solitondyn
