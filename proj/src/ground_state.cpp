#include "solitondyn/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "solitondyn/errors.hpp"

namespace solitondyn {

NonlinearityParams NonlinearityParams::scalar(double p, double alpha, double beta) {
  NonlinearityParams params;
  params.p = p;
  params.alpha = {alpha};
  params.beta = {beta};
  return params;
}

NonlinearityParams NonlinearityParams::coupled(double p, std::vector<double> alpha, Matrix gamma) {
  NonlinearityParams params;
  params.components = static_cast<int>(alpha.size());
  params.p = p;
  params.alpha = std::move(alpha);
  params.gamma = std::move(gamma);
  params.beta.assign(static_cast<std::size_t>(params.components), 0.0);
  params.omega.assign(static_cast<std::size_t>(params.components),
                      std::vector<double>(static_cast<std::size_t>(params.components), 0.0));
  return params;
}

bool NonlinearityParams::has_nonlocal() const noexcept {
  for (double b : beta)
    if (b != 0.0) return true;
  for (const auto& row : omega)
    for (double w : row)
      if (w != 0.0) return true;
  return false;
}

void NonlinearityParams::validate(int dim) const {
  const auto m = static_cast<std::size_t>(components);
  if (components < 1) throw Error(ErrorCategory::config, "need at least one component");
  if (!(p > 0.0) || !(p < 2.0 / dim)) {
    std::ostringstream os;
    os << "exponent p=" << p << " outside (0, 2/N) for N=" << dim;
    throw Error(ErrorCategory::config, os.str());
  }
  if (alpha.size() != m || beta.size() != m || gamma.size() != m || omega.size() != m)
    throw Error(ErrorCategory::config, "coefficient arrays must have one entry per component");
  for (std::size_t i = 0; i < m; ++i) {
    if (alpha[i] < 0.0 || beta[i] < 0.0) throw Error(ErrorCategory::config, "coefficients must be nonnegative");
    if (gamma[i].size() != m || omega[i].size() != m)
      throw Error(ErrorCategory::config, "coupling matrices must be m x m");
    if (gamma[i][i] != 0.0 || omega[i][i] != 0.0)
      throw Error(ErrorCategory::config, "coupling matrices must have zero diagonal");
    for (std::size_t j = 0; j < m; ++j) {
      if (gamma[i][j] < 0.0 || omega[i][j] < 0.0)
        throw Error(ErrorCategory::config, "couplings must be nonnegative");
      if (gamma[i][j] != gamma[j][i] || omega[i][j] != omega[j][i])
        throw Error(ErrorCategory::config, "coupling matrices must be symmetric");
    }
  }
}

namespace {

double power(double base, double exponent) {
  if (exponent == 1.0) return base;
  if (exponent == 2.0) return base * base;
  if (exponent == 0.0) return 1.0;
  return std::pow(base, exponent);
}

}  // namespace

std::vector<RealArray> local_factors(const NonlinearityParams& params, const std::vector<RealArray>& mod) {
  const std::size_t m = mod.size();
  const std::size_t n = mod.front().size();
  const double p = params.p;
  std::vector<RealArray> out(m, RealArray(n, 0.0));
  bool coupled = false;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (params.gamma[i][j] != 0.0) coupled = true;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = params.alpha[j];
    if (a != 0.0)
      for (std::size_t x = 0; x < n; ++x) out[j][x] = a * power(mod[j][x], 2.0 * p);
  }
  if (!coupled) return out;
  std::vector<RealArray> pow_p1(m, RealArray(n));
  std::vector<double> floor(m);
  for (std::size_t j = 0; j < m; ++j) {
    floor[j] = 1e-14 * max_abs(mod[j]);
    for (std::size_t x = 0; x < n; ++x) pow_p1[j][x] = power(mod[j][x], p + 1.0);
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (floor[j] == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const double g = params.gamma[i][j];
      if (i == j || g == 0.0) continue;
      for (std::size_t x = 0; x < n; ++x)
        out[j][x] += g * pow_p1[i][x] * power(std::max(mod[j][x], floor[j]), p - 1.0);
    }
  }
  return out;
}

double local_potential_energy(const SpectralGrid& grid, const NonlinearityParams& params,
                              const std::vector<RealArray>& mod) {
  const std::size_t m = mod.size();
  const std::size_t n = mod.front().size();
  const double p = params.p;
  double s = 0.0;
  std::vector<RealArray> pow_p1(m, RealArray(n));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t x = 0; x < n; ++x) pow_p1[j][x] = power(mod[j][x], p + 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x) acc += pow_p1[j][x] * pow_p1[j][x];
    s += params.alpha[j] * acc;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == j || params.gamma[i][j] == 0.0) continue;
      double cross = 0.0;
      for (std::size_t x = 0; x < n; ++x) cross += pow_p1[i][x] * pow_p1[j][x];
      s += params.gamma[i][j] * cross;
    }
  }
  return s * grid.cell_volume() / (p + 1.0);
}

std::vector<RealArray> moduli(const VectorField& f) {
  std::vector<RealArray> out;
  for (int j = 0; j < f.components(); ++j) {
    RealArray a(f[j].size());
    for (std::size_t x = 0; x < a.size(); ++x) a[x] = std::abs(f[j][x]);
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

double gradient_norm_sq_hat(const SpectralGrid& grid, const ComplexArray& fh) {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double k2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) k2 += grid.k_axis(i, d) * grid.k_axis(i, d);
    s += k2 * std::norm(fh[i]);
  }
  return s * grid.cell_volume() / static_cast<double>(grid.size());
}

double gradient_norm_sq(const SpectralGrid& grid, const ComplexArray& f) {
  return gradient_norm_sq_hat(grid, Fft(grid).forward(f));
}

}  // namespace

double energy_E(const VectorField& u, const NonlinearityParams& params) {
  double kinetic = 0.0;
  for (int j = 0; j < u.components(); ++j) kinetic += 0.5 * gradient_norm_sq(u.grid(), u[j]);
  return kinetic - local_potential_energy(u.grid(), params, moduli(u));
}

std::vector<double> multipliers(const VectorField& u, const NonlinearityParams& params) {
  const auto mod = moduli(u);
  const auto factors = local_factors(params, mod);
  std::vector<double> lambda;
  for (int j = 0; j < u.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    double nl = 0.0;
    for (std::size_t x = 0; x < mod[uj].size(); ++x) nl += factors[uj][x] * mod[uj][x] * mod[uj][x];
    nl *= u.grid().cell_volume();
    const double mass = l2_norm_sq(u.grid(), u[j]);
    lambda.push_back((nl - 0.5 * gradient_norm_sq(u.grid(), u[j])) / mass);
  }
  return lambda;
}

double system_residual(const VectorField& r, const NonlinearityParams& params,
                       const std::vector<double>& lambda) {
  const auto factors = local_factors(params, moduli(r));
  double s = 0.0;
  for (int j = 0; j < r.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const ComplexArray lap = laplacian(r.grid(), r[j]);
    for (std::size_t x = 0; x < lap.size(); ++x)
      s += std::norm(-0.5 * lap[x] + lambda[uj] * r[j][x] - factors[uj][x] * r[j][x]);
  }
  return std::sqrt(s * r.grid().cell_volume());
}

double system_residual(const GroundState& r, const NonlinearityParams& params) {
  return system_residual(r.field(), params, std::vector<double>(static_cast<std::size_t>(r.components()), 1.0));
}

RealArray closed_form_profile(double p, const SpectralGrid& grid) {
  if (grid.dim() != 1) throw Error(ErrorCategory::dimension, "closed form profile is one-dimensional");
  RealArray r(grid.size());
  const double amp = std::pow(1.0 + p, 1.0 / (2.0 * p));
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = grid.x_axis(i, 0);
    r[i] = amp * std::pow(1.0 / std::cosh(std::numbers::sqrt2 * p * x), 1.0 / p);
  }
  return r;
}

double closed_form_mass(double p) {
  // int sech^{2/p}(c x) dx = B(1/2, 1/p)/c with c = sqrt(2) p
  const double a = 1.0 / p;
  const double beta = std::exp(std::lgamma(0.5) + std::lgamma(a) - std::lgamma(0.5 + a));
  return std::pow(1.0 + p, 1.0 / p) * beta / (std::numbers::sqrt2 * p);
}

VectorField GroundState::field() const { return VectorField::from_real(grid, profile); }

GroundState GroundState::on_grid(const SpectralGrid& target) const {
  GroundState out = *this;
  out.grid = target;
  for (auto& c : out.profile) c = embed(grid, c, target);
  return out;
}

double GroundState::decay_radius(double rel) const {
  double radius = 0.0;
  for (const auto& c : profile) {
    const double cutoff = rel * max_abs(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (std::abs(c[i]) <= cutoff) continue;
      double r2 = 0.0;
      for (int d = 0; d < grid.dim(); ++d) r2 += grid.x_axis(i, d) * grid.x_axis(i, d);
      radius = std::max(radius, std::sqrt(r2));
    }
  }
  return radius;
}

namespace {

struct FlowState {
  std::vector<ComplexArray> u;      // real-valued samples stored as complex
  std::vector<ComplexArray> u_hat;  // transforms
  std::vector<ComplexArray> g_hat;  // constrained gradient
  std::vector<double> lambda;
  double energy = 0.0;
  double residual = 0.0;
  double weighted_residual = 0.0;  // in the preconditioner norm
};

void normalize_masses(const SpectralGrid& grid, std::vector<ComplexArray>& u,
                      const std::vector<double>& targets, bool cone) {
  for (std::size_t j = 0; j < u.size(); ++j) {
    for (auto& v : u[j]) v = cone ? Complex(std::abs(v)) : Complex(v.real());
    const double mass = l2_norm_sq(grid, u[j]);
    if (!(mass > 0.0)) throw Error(ErrorCategory::degenerate_minimizer, "component collapsed to zero mass");
    const double s = std::sqrt(targets[j] / mass);
    for (auto& v : u[j]) v *= s;
  }
}

std::vector<RealArray> real_parts(const std::vector<ComplexArray>& u) {
  std::vector<RealArray> out;
  for (const auto& c : u) {
    RealArray a(c.size());
    for (std::size_t x = 0; x < a.size(); ++x) a[x] = c[x].real();
    out.push_back(std::move(a));
  }
  return out;
}

// Fills transforms, energy, multipliers and the gradient -Lap/2 u + lambda u - F u.
void evaluate(const SpectralGrid& grid, const NonlinearityParams& params, const std::vector<double>& targets,
              FlowState& st) {
  const Fft fft(grid);
  const std::size_t m = st.u.size();
  const std::size_t n = grid.size();
  const double vol = grid.cell_volume();
  const auto values = real_parts(st.u);
  auto mod = values;
  for (auto& c : mod)
    for (auto& v : c) v = std::abs(v);
  const auto factors = local_factors(params, mod);
  st.u_hat.assign(m, ComplexArray(n));
  st.g_hat.assign(m, ComplexArray(n));
  st.lambda.assign(m, 0.0);
  double kinetic = 0.0, res_sq = 0.0, weighted_sq = 0.0;
  ComplexArray work(n);
  for (std::size_t j = 0; j < m; ++j) {
    fft.forward(st.u[j].data(), st.u_hat[j].data());
    const double grad_sq = gradient_norm_sq_hat(grid, st.u_hat[j]);
    kinetic += 0.5 * grad_sq;
    double nl = 0.0;
    for (std::size_t x = 0; x < n; ++x) nl += factors[j][x] * mod[j][x] * mod[j][x];
    st.lambda[j] = (nl * vol - 0.5 * grad_sq) / targets[j];
    for (std::size_t x = 0; x < n; ++x) work[x] = (st.lambda[j] - factors[j][x]) * values[j][x];
    fft.forward(work.data(), st.g_hat[j].data());
    for (std::size_t q = 0; q < n; ++q) {
      st.g_hat[j][q] += 0.5 * grid.k_squared(q) * st.u_hat[j][q];
      res_sq += std::norm(st.g_hat[j][q]);
      weighted_sq += std::norm(st.g_hat[j][q]) / (1.0 + 0.5 * grid.k_squared(q));
    }
  }
  st.weighted_residual = std::sqrt(weighted_sq);
  st.energy = kinetic - local_potential_energy(grid, params, mod);
  st.residual = std::sqrt(res_sq * vol / static_cast<double>(n));
}

struct FlowOutcome {
  std::vector<RealArray> profile;
  std::vector<double> lambda;
  double residual = 0.0;
  double energy = 0.0;
  long iterations = 0;
};

// Preconditioned projected gradient flow: u <- P(u - tau K g), g the
// constrained energy gradient, K = (1 + |k|^2/2)^{-1}, P the per-component
// mass projection onto the nonnegative cone. Close to convergence the cone
// projection is dropped: sign changes at the level of the spectral truncation
// error are part of the discrete solution. Once energy differences reach
// roundoff the step is accepted only if the residual drops.
FlowOutcome run_flow(const NonlinearityParams& params, const std::vector<double>& targets,
                     const SpectralGrid& grid, std::vector<ComplexArray> start,
                     const GroundStateOptions& options) {
  const std::size_t m = targets.size();
  const std::size_t n = grid.size();
  const Fft fft(grid);

  FlowState st;
  st.u = std::move(start);
  bool cone = true;
  normalize_masses(grid, st.u, targets, cone);
  evaluate(grid, params, targets, st);

  double tau = options.initial_step;
  const double tau_max = options.initial_step;
  ComplexArray work(n);

  for (long iter = 0; iter <= options.max_iterations; ++iter) {
    if (st.residual < options.tol) {
      FlowOutcome out;
      out.profile = real_parts(st.u);
      out.lambda = st.lambda;
      out.residual = st.residual;
      out.energy = st.energy;
      out.iterations = iter;
      return out;
    }
    if (iter == options.max_iterations) break;
    if (cone && st.residual < options.cone_release * std::sqrt(std::accumulate(targets.begin(), targets.end(), 0.0)))
      cone = false;

    while (true) {
      FlowState trial;
      trial.u.assign(m, ComplexArray(n));
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t q = 0; q < n; ++q)
          work[q] = st.u_hat[j][q] - tau * st.g_hat[j][q] / (1.0 + 0.5 * grid.k_squared(q));
        fft.inverse(work.data(), trial.u[j].data());
      }
      normalize_masses(grid, trial.u, targets, cone);
      evaluate(grid, params, targets, trial);
      const double noise = 1e-13 * (1.0 + std::abs(st.energy));
      const bool decreased = trial.energy < st.energy - noise;
      const bool flat = std::abs(trial.energy - st.energy) <= noise && trial.weighted_residual < st.weighted_residual;
      if (decreased || flat) {
        st = std::move(trial);
        tau = std::min(tau * 1.25, tau_max);
        break;
      }
      tau *= 0.5;
      if (tau < options.min_step) {
        const double increase = trial.energy - st.energy;
        std::ostringstream os;
        os << "energy increased by " << increase << " at the minimum step size (residual " << st.residual << ")";
        if (increase > 1e-10) throw Error(ErrorCategory::step_size, os.str());
        throw ConvergenceError("gradient flow stalled: " + os.str(), st.residual);
      }
    }
  }
  std::ostringstream os;
  os << "gradient flow did not converge in " << options.max_iterations << " iterations";
  throw ConvergenceError(os.str(), st.residual);
}

std::vector<ComplexArray> gaussian_start(const SpectralGrid& grid, std::size_t m) {
  ComplexArray g(grid.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double r2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) r2 += grid.x_axis(i, d) * grid.x_axis(i, d);
    g[i] = std::exp(-0.5 * r2);
  }
  const double s = 1.0 / std::sqrt(l2_norm_sq(grid, g));
  for (auto& v : g) v *= s;
  return std::vector<ComplexArray>(m, g);
}

GroundState assemble(const NonlinearityParams& params, const SpectralGrid& grid, FlowOutcome flow,
                     const GroundStateOptions& options) {
  GroundState gs{grid, std::move(flow.profile), {}, 0.0, 0.0, 0.0, std::move(flow.lambda), {}, params,
                 flow.iterations};
  for (const auto& c : gs.profile) gs.masses.push_back(l2_norm_sq(grid, c));
  for (double mj : gs.masses) gs.total_mass += mj;
  gs.energy = energy_E(gs.field(), params);
  gs.residual = system_residual(gs.field(), params, gs.multipliers);
  for (double mj : gs.masses) gs.near_zero.push_back(mj < options.near_zero_fraction * gs.total_mass);
  return gs;
}

}  // namespace

GroundState solve_ground_state(const NonlinearityParams& params, const std::vector<double>& target_masses,
                               const SpectralGrid& grid, const GroundStateOptions& options) {
  params.validate(grid.dim());
  if (static_cast<int>(target_masses.size()) != params.components)
    throw Error(ErrorCategory::config, "need one target mass per component");
  for (double mj : target_masses)
    if (!(mj > 0.0)) throw Error(ErrorCategory::config, "target masses must be positive");
  if (!(options.tol > 0.0)) throw Error(ErrorCategory::config, "tolerance must be positive");

  std::vector<double> targets = target_masses;
  FlowOutcome flow = run_flow(params, targets, grid, gaussian_start(grid, targets.size()), options);
  if (!options.canonical) return assemble(params, grid, std::move(flow), options);

  const double exponent = 0.5 * grid.dim() - 1.0 / params.p;
  for (int update = 0; update < options.max_mass_updates; ++update) {
    double worst = 0.0;
    for (double l : flow.lambda) worst = std::max(worst, std::abs(l - 1.0));
    if (worst < options.multiplier_tol) {
      GroundState gs = assemble(params, grid, std::move(flow), options);
      gs.residual = system_residual(gs, params);
      return gs;
    }
    double total = 0.0;
    for (double t : targets) total += t;
    std::vector<ComplexArray> start(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (!(flow.lambda[j] > 0.0))
        throw Error(ErrorCategory::degenerate_minimizer, "nonpositive multiplier during mass iteration");
      targets[j] *= std::pow(flow.lambda[j], exponent);
      if (targets[j] < 1e-12 * total)
        throw Error(ErrorCategory::degenerate_minimizer, "component mass collapsed during mass iteration");
      start[j] = ComplexArray(flow.profile[j].begin(), flow.profile[j].end());
    }
    flow = run_flow(params, targets, grid, std::move(start), options);
  }
  double worst = 0.0;
  for (double l : flow.lambda) worst = std::max(worst, std::abs(l - 1.0));
  throw ConvergenceError("mass iteration did not reach unit multipliers", worst);
}

GroundState solve_canonical_ground_state(const NonlinearityParams& params, const SpectralGrid& grid,
                                         double tol) {
  GroundStateOptions options;
  options.tol = tol;
  options.canonical = true;
  const double guess = grid.dim() == 1 ? closed_form_mass(params.p) : 1.0;
  std::vector<double> masses;
  for (int j = 0; j < params.components; ++j) {
    const double a = params.alpha[static_cast<std::size_t>(j)];
    // scalar scaling law: mass of the alpha-problem is alpha^{-1/p} times the unit one
    masses.push_back(a > 0.0 ? guess * std::pow(a, -1.0 / params.p) : guess);
  }
  return solve_ground_state(params, masses, grid, options);
}

namespace {

struct CorrelationTerms {
  std::vector<ComplexArray> g;  // per component, Fourier-space weights
  double scale = 1.0;
};

// c_j(y) = <r_j(. + y), U_j>_{H^1} as a trigonometric sum in y.
struct Correlation {
  const SpectralGrid& grid;
  const CorrelationTerms& terms;

  struct Eval {
    std::vector<Complex> c;
    std::vector<std::array<Complex, kMaxDim>> dc;
    std::vector<std::array<std::array<Complex, kMaxDim>, kMaxDim>> ddc;
  };

  Eval evaluate(const Vec& y, bool derivatives) const {
    const std::size_t m = terms.g.size();
    const int dim = grid.dim();
    const int n = grid.points();
    std::array<std::vector<Complex>, kMaxDim> phase;
    for (int d = 0; d < dim; ++d) {
      phase[static_cast<std::size_t>(d)].resize(static_cast<std::size_t>(n));
      for (int q = 0; q < n; ++q)
        phase[static_cast<std::size_t>(d)][static_cast<std::size_t>(q)] =
            std::polar(1.0, -grid.wavenumbers()[static_cast<std::size_t>(q)] * y[static_cast<std::size_t>(d)]);
    }
    Eval e;
    e.c.assign(m, Complex{});
    e.dc.assign(m, {});
    e.ddc.assign(m, {});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto idx = dim == 1 ? std::array<int, kMaxDim>{static_cast<int>(i), 0} : grid.multi_index(i);
      Complex ph = phase[0][static_cast<std::size_t>(idx[0])];
      if (dim > 1) ph *= phase[1][static_cast<std::size_t>(idx[1])];
      for (std::size_t j = 0; j < m; ++j) {
        const Complex t = terms.g[j][i] * ph;
        e.c[j] += t;
        if (!derivatives) continue;
        for (int a = 0; a < dim; ++a) {
          const double ka = grid.k_full_axis(i, a);
          e.dc[j][static_cast<std::size_t>(a)] += Complex(0.0, -ka) * t;
          for (int b = 0; b < dim; ++b)
            e.ddc[j][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += -ka * grid.k_full_axis(i, b) * t;
        }
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      e.c[j] *= terms.scale;
      for (auto& v : e.dc[j]) v *= terms.scale;
      for (auto& row : e.ddc[j])
        for (auto& v : row) v *= terms.scale;
    }
    return e;
  }

  double objective(const Eval& e) const {
    double s = 0.0;
    for (const auto& c : e.c) s += std::abs(c);
    return s;
  }
};

Vec wrap(const SpectralGrid& grid, Vec y) {
  const double L = grid.extent();
  for (int d = 0; d < grid.dim(); ++d) {
    double& v = y[static_cast<std::size_t>(d)];
    v = std::fmod(v + 0.5 * L, L);
    if (v < 0.0) v += L;
    v -= 0.5 * L;
  }
  return y;
}

}  // namespace

GammaFit gamma_distance(const VectorField& U, const GroundState& r) {
  if (!U.grid().same_as(r.grid)) throw Error(ErrorCategory::dimension, "field and profile grids differ");
  if (U.components() != r.components()) throw Error(ErrorCategory::dimension, "component counts differ");
  const SpectralGrid& grid = U.grid();
  const std::size_t n = grid.size();
  const std::size_t m = static_cast<std::size_t>(U.components());
  const int dim = grid.dim();
  const Fft fft(grid);
  const double parseval = grid.cell_volume() / static_cast<double>(n);

  CorrelationTerms terms;
  terms.scale = parseval;
  double norms = 0.0;
  ComplexArray summed(n);
  for (std::size_t j = 0; j < m; ++j) {
    const ComplexArray uh = fft.forward(U[static_cast<int>(j)]);
    const ComplexArray rh = fft.forward(ComplexArray(r.profile[j].begin(), r.profile[j].end()));
    ComplexArray g(n);
    for (std::size_t q = 0; q < n; ++q) {
      double w = 1.0;
      for (int d = 0; d < dim; ++d) w += grid.k_axis(q, d) * grid.k_axis(q, d);
      g[q] = w * std::conj(rh[q]) * uh[q];
      norms += w * (std::norm(uh[q]) + std::norm(rh[q])) * parseval;
    }
    terms.g.push_back(std::move(g));
  }

  // Grid scan: sum_j |c_j(m h)| from one forward transform per component.
  RealArray score(n, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const ComplexArray c = fft.forward(terms.g[j]);
    for (std::size_t i = 0; i < n; ++i) score[i] += std::abs(c[i]) * parseval;
  }
  const std::size_t best = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
  const auto bidx = grid.multi_index(best);
  const int np = grid.points();
  Vec y{};
  for (int d = 0; d < dim; ++d) {
    // quadratic interpolation along each axis around the discrete maximum
    auto neighbour = [&](int delta) {
      auto idx = bidx;
      idx[static_cast<std::size_t>(d)] = (idx[static_cast<std::size_t>(d)] + delta + np) % np;
      std::size_t flat = 0;
      for (int e = 0; e < dim; ++e) flat = flat * static_cast<std::size_t>(np) + static_cast<std::size_t>(idx[static_cast<std::size_t>(e)]);
      return score[flat];
    };
    const double fm = neighbour(-1), f0 = score[best], fp = neighbour(1);
    const double denom = fm - 2.0 * f0 + fp;
    const double offset = denom < 0.0 ? 0.5 * (fm - fp) / denom : 0.0;
    y[static_cast<std::size_t>(d)] = (bidx[static_cast<std::size_t>(d)] + std::clamp(offset, -0.5, 0.5)) * grid.spacing();
  }

  // Newton polish on the exact trigonometric objective.
  const Correlation corr{grid, terms};
  auto eval = corr.evaluate(y, true);
  double obj = corr.objective(eval);
  for (int iter = 0; iter < 30; ++iter) {
    std::array<double, kMaxDim> grad{};
    Mat hess{};
    for (std::size_t j = 0; j < m; ++j) {
      const Complex c = eval.c[j];
      const double a = std::abs(c);
      if (a == 0.0) continue;
      std::array<double, kMaxDim> rd{};
      for (int p = 0; p < dim; ++p) rd[static_cast<std::size_t>(p)] = std::real(std::conj(c) * eval.dc[j][static_cast<std::size_t>(p)]);
      for (int p = 0; p < dim; ++p) {
        const auto up = static_cast<std::size_t>(p);
        grad[up] += rd[up] / a;
        for (int q = 0; q < dim; ++q) {
          const auto uq = static_cast<std::size_t>(q);
          hess[up][uq] += (std::real(std::conj(eval.dc[j][up]) * eval.dc[j][uq]) +
                           std::real(std::conj(c) * eval.ddc[j][up][uq])) / a -
                          rd[up] * rd[uq] / (a * a * a);
        }
      }
    }
    Vec step{};
    if (dim == 1) {
      step[0] = hess[0][0] < 0.0 ? -grad[0] / hess[0][0] : 0.0;
    } else {
      const double det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
      if (hess[0][0] < 0.0 && det > 0.0) {
        step[0] = -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det;
        step[1] = -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det;
      }
    }
    double len = 0.0;
    for (int d = 0; d < dim; ++d) {
      step[static_cast<std::size_t>(d)] = std::clamp(step[static_cast<std::size_t>(d)], -grid.spacing(), grid.spacing());
      len = std::max(len, std::abs(step[static_cast<std::size_t>(d)]));
    }
    if (len < 1e-14 * grid.extent()) break;
    bool improved = false;
    for (int halving = 0; halving < 20; ++halving) {
      Vec trial = y;
      for (int d = 0; d < dim; ++d) trial[static_cast<std::size_t>(d)] += step[static_cast<std::size_t>(d)];
      auto trial_eval = corr.evaluate(trial, true);
      const double trial_obj = corr.objective(trial_eval);
      if (trial_obj >= obj) {
        y = trial;
        eval = std::move(trial_eval);
        obj = trial_obj;
        improved = true;
        break;
      }
      for (auto& s : step) s *= 0.5;
    }
    if (!improved) break;
  }

  GammaFit fit;
  const Vec yw = wrap(grid, y);
  for (int d = 0; d < dim; ++d) fit.center[static_cast<std::size_t>(d)] = -yw[static_cast<std::size_t>(d)];
  fit.center = wrap(grid, fit.center);
  for (std::size_t j = 0; j < m; ++j) fit.phases.push_back(std::arg(eval.c[j]));
  fit.value = std::max(0.0, norms - 2.0 * obj);
  return fit;
}

ProbeResult convexity_probe(const GroundState& r, const NonlinearityParams& params, int trials,
                            const ProbeOptions& options) {
  if (trials < 1) throw Error(ErrorCategory::config, "need at least one trial");
  const SpectralGrid& grid = r.grid;
  const std::size_t n = grid.size();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ProbeResult result;
  const double base_energy = energy_E(r.field(), params);
  for (int t = 0; t < trials; ++t) {
    VectorField U = r.field();
    for (int j = 0; j < U.components(); ++j) {
      ComplexArray eta(n);
      for (int term = 0; term < 4; ++term) {
        const Complex coeff(normal(rng), normal(rng));
        Vec c{};
        for (int d = 0; d < grid.dim(); ++d) c[static_cast<std::size_t>(d)] = 4.0 * uniform(rng) - 2.0;
        const double width = 0.3 + 1.2 * uniform(rng);
        for (std::size_t i = 0; i < n; ++i) {
          double r2 = 0.0;
          for (int d = 0; d < grid.dim(); ++d) {
            const double dx = grid.x_axis(i, d) - c[static_cast<std::size_t>(d)];
            r2 += dx * dx;
          }
          eta[i] += coeff * std::exp(-0.5 * r2 / (width * width));
        }
      }
      const double eta_norm = std::sqrt(h1_norm_sq(grid, eta));
      const double r_norm = std::sqrt(h1_norm_sq(grid, U[j]));
      const double s = options.scale * r_norm / eta_norm;
      for (std::size_t i = 0; i < n; ++i) U[j][i] += s * eta[i];
      const double mass = l2_norm_sq(grid, U[j]);
      const double fix = std::sqrt(r.masses[static_cast<std::size_t>(j)] / mass);
      for (auto& v : U[j]) v *= fix;
    }
    const GammaFit fit = gamma_distance(U, r);
    const double gap = energy_E(U, params) - base_energy;
    if (gap < -options.energy_tol) {
      std::ostringstream os;
      os << "perturbation lowered the energy by " << -gap << " at equal mass";
      throw Error(ErrorCategory::minimality_violation, os.str());
    }
    if (fit.value < options.gamma_floor || fit.value > options.gamma_cap || gap <= 0.0) {
      ++result.skipped;
      continue;
    }
    const double ratio = fit.value / gap;
    result.ratios.push_back(ratio);
    result.max_ratio = std::max(result.max_ratio, ratio);
  }
  return result;
}

}  // namespace solitondyn
