#include "solitondyn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "solitondyn/errors.hpp"

namespace solitondyn {

namespace {

constexpr Complex I{0.0, 1.0};

// One-dimensional sup constants of exp(-u^2/2) and its first three derivatives.
const double kGaussSup[4] = {1.0, std::exp(-0.5), 1.0,
                             std::sqrt(3.0 - std::sqrt(6.0)) * std::sqrt(6.0) * std::exp(-(3.0 - std::sqrt(6.0)) / 2.0)};
// Same for u exp(-u^2/2).
const double kWindowSup[4] = {std::exp(-0.5), 1.0, kGaussSup[3], 3.0};
constexpr double kCertifyMargin = 1.0 + 1e-12;

Vec scaled(const SpectralGrid& grid, std::size_t i, double epsilon) {
  Vec y = grid.point(i);
  for (auto& c : y) c *= epsilon;
  return y;
}

double norm(const Vec& v, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
  return std::sqrt(s);
}

std::vector<RealArray> densities(const VectorField& f) {
  std::vector<RealArray> out;
  for (int j = 0; j < f.components(); ++j) {
    RealArray r(f[j].size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::norm(f[j][i]);
    out.push_back(std::move(r));
  }
  return out;
}

RealArray total_density(const VectorField& f) {
  RealArray r(f.grid().size(), 0.0);
  for (int j = 0; j < f.components(); ++j)
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += std::norm(f[j][i]);
  return r;
}

std::array<RealArray, kMaxDim> sampled_A(const SpectralGrid& grid, const PotentialSet& pots, double epsilon) {
  std::array<RealArray, kMaxDim> a;
  const int dim = grid.dim();
  for (int d = 0; d < dim; ++d) a[static_cast<std::size_t>(d)].assign(grid.size(), 0.0);
  if (pots.A.is_zero()) return a;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec v = pots.A.value(scaled(grid, i, epsilon), dim);
    for (int d = 0; d < dim; ++d) a[static_cast<std::size_t>(d)][i] = v[static_cast<std::size_t>(d)];
  }
  return a;
}

// d_axis f_j - i A_axis f_j
std::vector<std::array<ComplexArray, kMaxDim>> covariant_gradient(const VectorField& f,
                                                                   const std::array<RealArray, kMaxDim>& a) {
  const int dim = f.grid().dim();
  const auto grad = gradient(f);
  std::vector<std::array<ComplexArray, kMaxDim>> out(static_cast<std::size_t>(f.components()));
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    // a real component has a real derivative
    const bool real = std::all_of(f[j].begin(), f[j].end(), [](const Complex& v) { return v.imag() == 0.0; });
    for (int d = 0; d < dim; ++d) {
      const auto ud = static_cast<std::size_t>(d);
      ComplexArray g = grad[uj][ud];
      if (real)
        for (auto& v : g) v = v.real();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= I * a[ud][i] * f[j][i];
      out[uj][ud] = std::move(g);
    }
  }
  return out;
}

double nonlocal_energy(const VectorField& f, const PotentialSet& pots, const NonlinearityParams& params,
                       double epsilon) {
  if (!pots.nonlocal_enabled() || !params.has_nonlocal()) return 0.0;
  const SpectralGrid& grid = f.grid();
  const ComplexArray kernel = nonlocal_kernel(pots, epsilon, grid);
  const auto rho = densities(f);
  const std::size_t m = rho.size();
  std::vector<RealArray> conv;
  for (const auto& r : rho) conv.push_back(convolve_with(grid, kernel, r));
  double e = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += conv[j][i] * rho[j][i];
    e += params.beta[j] * s * grid.cell_volume();
    for (std::size_t k = 0; k < m; ++k) {
      if (k == j || params.omega[k][j] == 0.0) continue;
      double c = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) c += conv[k][i] * rho[j][i];
      e += params.omega[k][j] * c * grid.cell_volume();
    }
  }
  return -0.5 * e;
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

ComplexArray as_complex(const RealArray& r) { return ComplexArray(r.begin(), r.end()); }

// Multi-indices of order <= 3 in dim variables.
std::vector<std::array<int, kMaxDim>> multi_indices(int dim) {
  std::vector<std::array<int, kMaxDim>> out;
  for (int a = 0; a <= 3; ++a) {
    if (dim == 1) {
      out.push_back({a, 0});
      continue;
    }
    for (int b = 0; a + b <= 3; ++b) out.push_back({a, b});
  }
  return out;
}

}  // namespace

EnergySplit total_energy(const VectorField& f, const PotentialSet& pots, const NonlinearityParams& params,
                         double epsilon, double floor) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  const auto a = sampled_A(grid, pots, epsilon);
  const auto D = covariant_gradient(f, a);

  double magnetic = 0.0, modulus = 0.0, current = 0.0;
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const double threshold = floor * max_abs(f[j]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Complex v = f[j][i];
      const double amp = std::abs(v);
      double mag2 = 0.0, re2 = 0.0, im2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const Complex w = std::conj(v) * D[uj][static_cast<std::size_t>(d)][i];
        mag2 += std::norm(D[uj][static_cast<std::size_t>(d)][i]);
        re2 += w.real() * w.real();
        im2 += w.imag() * w.imag();
      }
      magnetic += mag2;
      if (amp > threshold && amp > 0.0) {
        modulus += re2 / (amp * amp);
        current += im2 / (amp * amp);
      } else {
        modulus += mag2;
      }
    }
  }

  const double local = local_potential_energy(grid, params, moduli(f));
  EnergySplit s;
  if (!pots.V.is_zero()) {
    const RealArray rho = total_density(f);
    double e = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) e += pots.V.value(scaled(grid, i, epsilon), dim) * rho[i];
    s.potential = e * dv;
  }
  s.bound = 0.5 * modulus * dv - local;
  s.kinetic = 0.5 * current * dv;
  s.nonlocal = nonlocal_energy(f, pots, params, epsilon);
  s.total = 0.5 * magnetic * dv + s.potential - local + s.nonlocal;
  return s;
}

MagneticMomentum magnetic_momentum(const VectorField& f, const PotentialSet& pots, double epsilon) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  const auto a = sampled_A(grid, pots, epsilon);
  const auto D = covariant_gradient(f, a);
  MagneticMomentum out;
  for (int d = 0; d < dim; ++d) out.total[static_cast<std::size_t>(d)].assign(grid.size(), 0.0);
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    std::array<RealArray, kMaxDim> p;
    Vec integral{};
    for (int d = 0; d < dim; ++d) {
      const auto ud = static_cast<std::size_t>(d);
      p[ud].resize(grid.size());
      double s = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        p[ud][i] = (std::conj(f[j][i]) * D[uj][ud][i]).imag();
        out.total[ud][i] += p[ud][i];
        s += p[ud][i];
      }
      integral[ud] = s * dv;
      out.total_integral[ud] += integral[ud];
    }
    out.density.push_back(std::move(p));
    out.integrals.push_back(integral);
  }
  return out;
}

std::vector<double> magnetic_gradient_norms(const VectorField& f, const PotentialSet& pots, double epsilon) {
  const SpectralGrid& grid = f.grid();
  const auto D = covariant_gradient(f, sampled_A(grid, pots, epsilon));
  std::vector<double> out;
  for (int j = 0; j < f.components(); ++j) {
    double s = 0.0;
    for (int d = 0; d < grid.dim(); ++d) s += l2_norm_sq(grid, D[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)]);
    out.push_back(std::sqrt(s));
  }
  return out;
}

double cutoff(const Vec& y, int dim, double radius) noexcept {
  const double r = norm(y, dim);
  return smooth_step((2.0 * radius - r) / radius);
}

double choose_cutoff_radius(const Trajectory& predicted, const GroundState& r, double epsilon) {
  double reach = 0.0;
  for (const auto& s : predicted.states) reach = std::max(reach, epsilon * norm(s.position, predicted.dim));
  return 2.0 * reach + 5.0 * epsilon * mass_tail_radius(r, kPlateauTail);
}

double mass_tail_radius(const GroundState& r, double fraction) {
  const SpectralGrid& g = r.grid;
  std::vector<std::pair<double, double>> shells(g.size());
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double r2 = 0.0;
    for (int d = 0; d < g.dim(); ++d) r2 += g.x_axis(i, d) * g.x_axis(i, d);
    double rho = 0.0;
    for (const auto& c : r.profile) rho += c[i] * c[i];
    shells[i] = {std::sqrt(r2), rho};
    total += rho;
  }
  std::sort(shells.begin(), shells.end());
  double outside = 0.0;
  for (std::size_t i = shells.size(); i-- > 0;) {
    outside += shells[i].second;
    if (outside > fraction * total) return shells[i].first;
  }
  return 0.0;
}

double TestDictionary::unit_c3_norm(const Member& m, int dim) noexcept {
  double total = 0.0;
  for (const auto& alpha : multi_indices(dim)) {
    double term = 1.0;
    for (int d = 0; d < dim; ++d) {
      const int k = alpha[static_cast<std::size_t>(d)];
      switch (m.kind) {
        case Kind::gaussian:
          term *= kGaussSup[k] / std::pow(m.width, k);
          break;
        case Kind::cosine:
        case Kind::sine:
          term *= std::pow(std::abs(m.wave[static_cast<std::size_t>(d)]), k);
          break;
        case Kind::windowed_coordinate:
          term *= d == m.axis ? kWindowSup[k] * m.width / std::pow(m.width, k) : kGaussSup[k] / std::pow(m.width, k);
          break;
      }
    }
    total += term;
  }
  return total;
}

TestDictionary TestDictionary::standard(int dim) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCategory::dimension, "dictionary dimension must be 1 or 2");
  TestDictionary dict;
  dict.dim_ = dim;
  auto add = [&](Member m) {
    const double unit = unit_c3_norm(m, dim) * kCertifyMargin;
    m.amplitude = 1.0 / unit;
    m.c3_bound = m.amplitude * unit;
    dict.members_.push_back(m);
  };
  const int lo = -2, hi = 2;
  for (double w : {0.5, 1.0, 2.0}) {
    for (int a = lo; a <= hi; ++a) {
      if (dim == 1) {
        add({Kind::gaussian, {double(a), 0.0}, w, {}, 0, 1.0, 0.0});
        continue;
      }
      for (int b = lo; b <= hi; ++b) add({Kind::gaussian, {double(a), double(b)}, w, {}, 0, 1.0, 0.0});
    }
  }
  std::vector<Vec> directions{{1.0, 0.0}};
  if (dim == 2) {
    directions.push_back({0.0, 1.0});
    directions.push_back({1.0, 1.0});
  }
  for (double k : {0.5, 1.0, 2.0}) {
    for (const Vec& e : directions) {
      const Vec wave{k * e[0], k * e[1]};
      add({Kind::cosine, {}, 1.0, wave, 0, 1.0, 0.0});
      add({Kind::sine, {}, 1.0, wave, 0, 1.0, 0.0});
    }
  }
  for (double w : {1.0, 2.0})
    for (int axis = 0; axis < dim; ++axis) add({Kind::windowed_coordinate, {}, w, {}, axis, 1.0, 0.0});
  return dict;
}

double TestDictionary::value(std::size_t member, const Vec& y) const noexcept {
  const Member& m = members_[member];
  switch (m.kind) {
    case Kind::gaussian: {
      double q = 0.0;
      for (int d = 0; d < dim_; ++d) {
        const double u = (y[static_cast<std::size_t>(d)] - m.center[static_cast<std::size_t>(d)]) / m.width;
        q += u * u;
      }
      return m.amplitude * std::exp(-0.5 * q);
    }
    case Kind::cosine:
    case Kind::sine: {
      double phase = 0.0;
      for (int d = 0; d < dim_; ++d) phase += m.wave[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
      return m.amplitude * (m.kind == Kind::cosine ? std::cos(phase) : std::sin(phase));
    }
    case Kind::windowed_coordinate: {
      double q = 0.0;
      for (int d = 0; d < dim_; ++d) q += y[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
      return m.amplitude * y[static_cast<std::size_t>(m.axis)] * std::exp(-0.5 * q / (m.width * m.width));
    }
  }
  return 0.0;
}

PiValues pi_functionals(const VectorField& f, const ClassicalState& classical, const std::vector<double>& masses,
                        const TestDictionary& dictionary, const PotentialSet& pots, double cutoff_radius) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  if (dictionary.dim() != dim) throw Error(ErrorCategory::dimension, "dictionary dimension differs from the grid");
  if (!(cutoff_radius > 0.0)) throw Error(ErrorCategory::config, "cutoff radius must be positive");
  const double eps = classical.epsilon;
  const double dv = grid.cell_volume();
  const double M = std::accumulate(masses.begin(), masses.end(), 0.0);
  const RealArray rho = total_density(f);
  const MagneticMomentum mom = magnetic_momentum(f, pots, eps);

  PiValues out;
  Vec yc{};
  for (int d = 0; d < dim; ++d) yc[static_cast<std::size_t>(d)] = eps * classical.position[static_cast<std::size_t>(d)];

  for (int d = 0; d < dim; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    out.pi1[ud] = mom.total_integral[ud] - M * classical.velocity[ud];
  }
  out.pi1_norm = norm(out.pi1, dim);

  // Pairing with A itself.
  double aq = 0.0;
  if (!pots.A.is_zero()) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec a = pots.A.value(scaled(grid, i, eps), dim);
      for (int d = 0; d < dim; ++d) aq += a[static_cast<std::size_t>(d)] * mom.total[static_cast<std::size_t>(d)][i];
    }
    aq *= dv;
    const Vec ac = pots.A.value(yc, dim);
    for (int d = 0; d < dim; ++d) aq -= M * ac[static_cast<std::size_t>(d)] * classical.velocity[static_cast<std::size_t>(d)];
  }
  out.rho_A = std::abs(aq);

  // Points carrying the density; the rest sit below 1e-18 of the peak.
  const double peak = max_abs(rho);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (rho[i] > 1e-18 * peak) support.push_back(i);
  std::vector<Vec> ys;
  ys.reserve(support.size());
  for (std::size_t i : support) ys.push_back(scaled(grid, i, eps));

  for (std::size_t m = 0; m < dictionary.size(); ++m) {
    double s = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) s += dictionary.value(m, ys[k]) * rho[support[k]];
    const double v = std::abs(s * dv - M * dictionary.value(m, yc));
    if (v > out.pi2_sup) {
      out.pi2_sup = v;
      out.pi2_argmax = m;
    }
  }

  Vec moment{};
  double total = 0.0, outside = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    const double w = rho[support[k]];
    const double chi = cutoff(ys[k], dim, cutoff_radius);
    for (int d = 0; d < dim; ++d) moment[static_cast<std::size_t>(d)] += ys[k][static_cast<std::size_t>(d)] * chi * w;
    total += w;
    if (norm(ys[k], dim) >= cutoff_radius) outside += w;
  }
  for (int d = 0; d < dim; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    out.gamma_eps[ud] = M * yc[ud] - moment[ud] * dv;
  }
  out.gamma_eps_norm = norm(out.gamma_eps, dim);
  out.mass_outside_plateau = total > 0.0 ? outside / total : 0.0;
  if (out.mass_outside_plateau > 1e-10) {
    std::ostringstream os;
    os << "cutoff radius " << cutoff_radius << " leaves mass fraction " << out.mass_outside_plateau
       << " outside the plateau";
    throw Error(ErrorCategory::cutoff, os.str());
  }

  out.omega_hat = out.pi1_norm + out.pi2_sup + out.gamma_eps_norm;
  out.omega = out.omega_hat + out.rho_A;
  return out;
}

Vec cutoff_center_of_mass(const VectorField& f, double epsilon, double cutoff_radius, double total_mass) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  const RealArray rho = total_density(f);
  Vec c{};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (rho[i] == 0.0) continue;
    const Vec x = grid.point(i);
    const double w = rho[i] * cutoff(scaled(grid, i, epsilon), dim, cutoff_radius);
    for (int d = 0; d < dim; ++d) c[static_cast<std::size_t>(d)] += x[static_cast<std::size_t>(d)] * w;
  }
  for (int d = 0; d < dim; ++d) c[static_cast<std::size_t>(d)] *= grid.cell_volume() / total_mass;
  return c;
}

VectorField demodulate(const VectorField& f, const ClassicalState& classical, const PotentialSet& pots) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  Vec yc{};
  for (int d = 0; d < dim; ++d) yc[static_cast<std::size_t>(d)] = classical.epsilon * classical.position[static_cast<std::size_t>(d)];
  const Vec a = pots.A.value(yc, dim);
  VectorField out = f;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.point(i);
    double phase = 0.0;
    for (int d = 0; d < dim; ++d) {
      const auto ud = static_cast<std::size_t>(d);
      phase += classical.velocity[ud] * x[ud] + a[ud] * (x[ud] - classical.position[ud]);
    }
    const Complex rot = std::polar(1.0, -phase);
    for (int j = 0; j < f.components(); ++j) out[j][i] *= rot;
  }
  return out;
}

SolitonFit soliton_fit(const VectorField& f, const GroundState& r, const ClassicalState& classical,
                       const PotentialSet& pots, double trust_region) {
  if (!f.grid().same_as(r.grid)) throw Error(ErrorCategory::dimension, "ground state must live on the field grid");
  const VectorField psi = demodulate(f, classical, pots);
  const GammaFit g = gamma_distance(psi, r);
  const SpectralGrid& grid = f.grid();
  SolitonFit fit;
  fit.shift = g.center;
  fit.phases = g.phases;
  for (int j = 0; j < f.components(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const RealArray moved = fourier_translate(grid, r.profile[uj], g.center);
    const Complex rot = std::polar(1.0, g.phases[uj]);
    ComplexArray w(grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = psi[j][i] - rot * moved[i];
    const double res = std::sqrt(h1_norm_sq(grid, w));
    fit.residual_h1.push_back(res);
    fit.gamma_dist += res * res;
  }
  fit.valid = fit.gamma_dist <= trust_region;
  return fit;
}

std::vector<double> modulus_error(const VectorField& f, const GroundState& r, const ClassicalState& classical) {
  if (!f.grid().same_as(r.grid)) throw Error(ErrorCategory::dimension, "ground state must live on the field grid");
  const SpectralGrid& grid = f.grid();
  const bool at_origin = classical.position[0] == 0.0 && classical.position[1] == 0.0;
  std::vector<double> out;
  for (int j = 0; j < f.components(); ++j) {
    const auto& profile = r.profile[static_cast<std::size_t>(j)];
    const RealArray moved = at_origin ? profile : fourier_translate(grid, profile, classical.position);
    ComplexArray w(grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::abs(f[j][i]) - moved[i];
    out.push_back(std::sqrt(h1_norm_sq(grid, w)));
  }
  return out;
}

InequalityChecks check_inequalities(const VectorField& f, const PotentialSet& pots, double epsilon,
                                    const EnergySplit& split, double floor, double slack) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  const std::size_t m = static_cast<std::size_t>(f.components());
  InequalityChecks out;

  const auto magnetic = magnetic_gradient_norms(f, pots, epsilon);
  for (std::size_t j = 0; j < m; ++j) {
    RealArray mod(grid.size());
    for (std::size_t i = 0; i < mod.size(); ++i) mod[i] = std::abs(f[static_cast<int>(j)][i]);
    const auto g = gradient(grid, as_complex(mod));
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += l2_norm_sq(grid, g[static_cast<std::size_t>(d)]);
    const double margin = magnetic[j] - std::sqrt(s);
    out.diamagnetic.push_back(margin);
    if (margin < -slack * (1.0 + magnetic[j])) ++out.violations;
  }

  const MagneticMomentum mom = magnetic_momentum(f, pots, epsilon);
  std::vector<double> mass(m);
  double M = 0.0, weighted = 0.0, half_sq = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    mass[j] = l2_norm_sq(grid, f[static_cast<int>(j)]);
    M += mass[j];
    const double p2 = std::pow(norm(mom.integrals[j], dim), 2);
    weighted += p2 / mass[j];
    half_sq += 0.5 * p2 / mass[j];
  }
  const double q2 = std::pow(norm(mom.total_integral, dim), 2);
  out.momentum_cs = M * weighted - q2;
  if (out.momentum_cs < -slack * (1.0 + M * weighted)) ++out.violations;

  double lhs = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double threshold = floor * max_abs(f[static_cast<int>(j)]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double amp = std::abs(f[static_cast<int>(j)][i]);
      if (!(amp > threshold) || amp == 0.0) continue;
      for (int d = 0; d < dim; ++d) {
        const auto ud = static_cast<std::size_t>(d);
        const double v = mom.density[j][ud][i] / amp - mom.integrals[j][ud] / mass[j] * amp;
        lhs += v * v;
      }
    }
  }
  lhs *= 0.5 * dv;
  out.kinetic_lower = split.kinetic - half_sq - lhs;
  if (out.kinetic_lower < -slack * (1.0 + std::abs(split.kinetic))) ++out.violations;

  const double scale = std::abs(split.potential) + std::abs(split.bound) + std::abs(split.kinetic) +
                       std::abs(split.nonlocal);
  out.split_relative_error = scale > 0.0 ? std::abs(split.recombined() - split.total) / scale : 0.0;
  if (out.split_relative_error > 1e-10) ++out.violations;
  return out;
}

DiagnosticsContext::DiagnosticsContext(const GroundState& r, const SpectralGrid& grid, PotentialSet pots,
                                       NonlinearityParams p, double eps, DiagnosticsOptions opts)
    : ground_state(r.grid.same_as(grid) ? r : r.on_grid(grid)),
      potentials(std::move(pots)),
      params(std::move(p)),
      epsilon(eps),
      options(opts),
      dictionary(TestDictionary::standard(grid.dim())),
      ground_energy(energy_E(ground_state.field(), params)) {}

DiagnosticRecord diagnose(const FieldState& state, const ClassicalState& classical, const DiagnosticsContext& ctx) {
  if (std::abs(state.time - classical.time) > 1e-9 * std::max(1.0, std::abs(state.time)))
    throw Error(ErrorCategory::config, "classical state is not time-aligned with the field");
  const VectorField& f = state.field;
  const SpectralGrid& grid = f.grid();
  const double eps = ctx.epsilon;
  const auto& gs = ctx.ground_state;

  DiagnosticRecord rec;
  rec.time = state.time;
  for (int j = 0; j < f.components(); ++j) rec.masses.push_back(l2_norm_sq(grid, f[j]));
  rec.energy_split = total_energy(f, ctx.potentials, ctx.params, eps, ctx.options.floor);
  rec.energy_total = rec.energy_split.total;
  rec.hamiltonian = hamiltonian(classical, ctx.potentials, ctx.params, gs.masses).total;
  rec.momentum_total = magnetic_momentum(f, ctx.potentials, eps).total_integral;
  rec.center_of_mass = cutoff_center_of_mass(f, eps, ctx.options.cutoff_radius, gs.total_mass);
  rec.classical_position = classical.position;
  rec.classical_velocity = classical.velocity;

  rec.pi = pi_functionals(f, classical, gs.masses, ctx.dictionary, ctx.potentials, ctx.options.cutoff_radius);
  rec.pi1_norm = rec.pi.pi1_norm;
  rec.pi2_norm = rec.pi.pi2_sup;
  rec.gamma_eps = rec.pi.gamma_eps_norm;
  rec.rho_A = rec.pi.rho_A;
  rec.omega_hat = rec.pi.omega_hat;
  rec.omega = rec.pi.omega;

  const SolitonFit fit = soliton_fit(f, gs, classical, ctx.potentials, ctx.options.trust_region);
  rec.gamma_dist = fit.gamma_dist;
  rec.error_h1 = fit.residual_h1;
  rec.fit_shift = fit.shift;
  rec.fit_phases = fit.phases;
  rec.decomposition_valid = fit.valid;
  rec.error_modulus = modulus_error(f, gs, classical);

  double g2 = 0.0;
  for (double v : magnetic_gradient_norms(f, ctx.potentials, eps)) g2 += v * v;
  rec.magnetic_gradient_norm = std::sqrt(g2);
  rec.energy_gap = energy_E(demodulate(f, classical, ctx.potentials), ctx.params) - ctx.ground_energy;

  rec.inequalities = check_inequalities(f, ctx.potentials, eps, rec.energy_split, ctx.options.floor,
                                        ctx.options.inequality_slack);
  if (rec.energy_gap < -1e-9) ++rec.inequalities.violations;
  return rec;
}

void TStarMonitor::update(const DiagnosticRecord& rec) {
  max_omega = std::max(max_omega, rec.omega);
  max_gamma = std::max(max_gamma, rec.gamma_dist);
  if (!first_violation && (rec.omega > sigma0 || rec.gamma_dist > sigma0)) first_violation = rec.time;
}

IdentitySample identity_sample(const VectorField& f, double time, const PotentialSet& pots,
                               const NonlinearityParams& params, double epsilon) {
  const SpectralGrid& grid = f.grid();
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  IdentitySample s;
  s.time = time;
  s.density = densities(f);
  const MagneticMomentum mom = magnetic_momentum(f, pots, epsilon);
  for (int j = 0; j < f.components(); ++j) {
    std::vector<ComplexArray> p;
    for (int d = 0; d < dim; ++d) p.push_back(as_complex(mom.density[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)]));
    const ComplexArray div = divergence(grid, p);
    RealArray r(div.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = div[i].real();
    s.current_divergence.push_back(std::move(r));
  }
  s.momentum = mom.total_integral;

  // Lorentz and potential forces.
  const RealArray rho = total_density(f);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec y = scaled(grid, i, epsilon);
    if (!pots.V.is_constant()) {
      const Vec gv = pots.V.gradient(y, dim);
      for (int d = 0; d < dim; ++d) s.momentum_rhs[static_cast<std::size_t>(d)] -= epsilon * gv[static_cast<std::size_t>(d)] * rho[i];
    }
    if (dim == 2 && !pots.A.is_zero()) {
      const Mat H = magnetic_field(pots.A, y, dim);
      for (int l = 0; l < dim; ++l)
        for (int k = 0; k < dim; ++k)
          s.momentum_rhs[static_cast<std::size_t>(l)] +=
              epsilon * H[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] * mom.total[static_cast<std::size_t>(k)][i];
    }
  }

  for (int d = 0; d < dim; ++d) s.momentum_rhs[static_cast<std::size_t>(d)] *= dv;

  // Interaction forces: sum beta_j iint eps grad Phi(eps(x - z)) rho_j(z) rho_j(x), and the omega cross terms.
  if (pots.nonlocal_enabled() && params.has_nonlocal()) {
    const std::size_t m = s.density.size();
    for (int d = 0; d < dim; ++d) {
      RealArray k(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i)
        k[i] = epsilon * pots.Phi.gradient(scaled(grid, i, epsilon), dim)[static_cast<std::size_t>(d)];
      const ComplexArray kh = convolution_kernel(grid, k);
      std::vector<RealArray> conv;
      for (const auto& r : s.density) conv.push_back(convolve_with(grid, kh, r));
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t src = 0; src < m; ++src) {
          const double w = src == j ? params.beta[j] : params.omega[src][j];
          if (w == 0.0) continue;
          double c = 0.0;
          for (std::size_t i = 0; i < grid.size(); ++i) c += conv[src][i] * s.density[j][i];
          total += w * c * dv;
        }
      }
      s.momentum_rhs[static_cast<std::size_t>(d)] += total;
    }
  }
  return s;
}

namespace {

std::optional<IdentityResidual> centered_residual(const SpectralGrid& grid, const IdentitySample& a,
                                                  const IdentitySample& b, const IdentitySample& c) {
  const double d1 = b.time - a.time, d2 = c.time - b.time;
  if (!(d1 > 0.0) || std::abs(d1 - d2) > 1e-9 * d1) return std::nullopt;
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  IdentityResidual r;
  r.time = b.time;
  double cont = 0.0;
  for (std::size_t j = 0; j < b.density.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = (c.density[j][i] - a.density[j][i]) / (2.0 * d1) + b.current_divergence[j][i];
      cont += v * v;
    }
  r.continuity = std::sqrt(cont * dv);
  double mom = 0.0;
  for (int d = 0; d < dim; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    const double v = (c.momentum[ud] - a.momentum[ud]) / (2.0 * d1) - b.momentum_rhs[ud];
    mom += v * v;
  }
  r.momentum = std::sqrt(mom);
  return r;
}

void append(IdentityReport& rep, const IdentityResidual& r, double sample_dt, double step_dt) {
  rep.residuals.push_back(r);
  rep.sample_dt = sample_dt;
  rep.accuracy_warning = rep.accuracy_warning || sample_dt > 10.0 * step_dt * (1.0 + 1e-9);
  rep.max_continuity = std::max(rep.max_continuity, r.continuity);
  rep.max_momentum = std::max(rep.max_momentum, r.momentum);
}

}  // namespace

IdentityTracker::IdentityTracker(const SpectralGrid& grid, long decimation, double step_dt)
    : grid_(grid), decimation_(decimation), step_dt_(step_dt) {
  if (decimation < 1) throw Error(ErrorCategory::config, "decimation must be at least 1");
}

void IdentityTracker::push(std::shared_ptr<const IdentitySample> sample) {
  const long index = pushed_++;
  if (index % decimation_ != 0) return;
  window_.push_back(std::move(sample));
  if (window_.size() > 3) window_.erase(window_.begin());
  if (window_.size() < 3) return;
  if (auto r = centered_residual(grid_, *window_[0], *window_[1], *window_[2]))
    append(report_, *r, window_[1]->time - window_[0]->time, step_dt_);
}

IdentityReport identity_residuals(const SpectralGrid& grid, const std::vector<IdentitySample>& history,
                                  double step_dt) {
  IdentityReport rep;
  for (std::size_t k = 1; k + 1 < history.size(); ++k) {
    const auto r = centered_residual(grid, history[k - 1], history[k], history[k + 1]);
    if (!r) throw Error(ErrorCategory::config, "identity history is not uniformly sampled");
    append(rep, *r, history[k].time - history[k - 1].time, step_dt);
  }
  if (rep.residuals.empty()) throw Error(ErrorCategory::insufficient_data, "need at least three samples");
  return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

QuadratureReport quadrature_lemmas(const GroundState& r, const std::function<double(const Vec&)>& g, const Vec& y,
                                   const std::vector<double>& epsilons) {
  const SpectralGrid& grid = r.grid;
  const int dim = grid.dim();
  const double dv = grid.cell_volume();
  const std::size_t m = static_cast<std::size_t>(r.components());
  QuadratureReport rep;
  rep.epsilons = epsilons;
  rep.single.assign(m, std::vector<double>(epsilons.size(), 0.0));
  rep.pair.assign(m, std::vector<std::vector<double>>(m, std::vector<double>(epsilons.size(), 0.0)));
  std::vector<RealArray> sq(m);
  for (std::size_t j = 0; j < m; ++j) {
    sq[j].resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) sq[j][i] = r.profile[j][i] * r.profile[j][i];
  }
  const double g0 = g(Vec{});
  const double gy = g(y);
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    const double eps = epsilons[e];
    RealArray shifted(grid.size()), kernel(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Vec z = scaled(grid, i, eps);
      kernel[i] = g(z) - g0;
      for (int d = 0; d < dim; ++d) z[static_cast<std::size_t>(d)] += y[static_cast<std::size_t>(d)];
      shifted[i] = g(z) - gy;
    }
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) s += shifted[k] * sq[i][k];
      rep.single[i][e] = std::abs(s * dv);
    }
    const ComplexArray kh = convolution_kernel(grid, kernel);
    for (std::size_t j = 0; j < m; ++j) {
      const RealArray conv = convolve_with(grid, kh, sq[j]);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) s += conv[k] * sq[i][k];
        rep.pair[i][j][e] = std::abs(s * dv);
      }
    }
  }
  rep.min_slope = std::numeric_limits<double>::infinity();
  rep.pair_slopes.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    rep.single_slopes.push_back(loglog_slope(epsilons, rep.single[i]));
    if (std::isfinite(rep.single_slopes.back())) rep.min_slope = std::min(rep.min_slope, rep.single_slopes.back());
    for (std::size_t j = 0; j < m; ++j) {
      rep.pair_slopes[i][j] = loglog_slope(epsilons, rep.pair[i][j]);
      if (std::isfinite(rep.pair_slopes[i][j])) rep.min_slope = std::min(rep.min_slope, rep.pair_slopes[i][j]);
    }
  }
  return rep;
}

void write_diagnostics_header(std::ostream& out, int dim, int components) {
  auto vec = [&](const char* name) {
    for (int d = 1; d <= dim; ++d) out << ',' << name << d;
  };
  auto per = [&](const char* name) {
    for (int j = 1; j <= components; ++j) out << ',' << name << j;
  };
  out << 't';
  per("mass");
  out << ",E,E_pot,E_b,E_k,E_nl,H";
  vec("q");
  vec("com");
  vec("x");
  vec("xi");
  out << ",pi1,pi2,gamma_eps,rho_A,omega_hat,omega,Gamma";
  per("err_h1_");
  per("err_mod_");
  vec("y");
  per("theta");
  out << ",valid,grad_norm,energy_gap,violations\n";
}

void write_diagnostics_row(std::ostream& out, const DiagnosticRecord& rec, int dim) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out.precision(17);
  auto vec = [&](const Vec& v) {
    for (int d = 0; d < dim; ++d) out << ',' << v[static_cast<std::size_t>(d)];
  };
  auto per = [&](const std::vector<double>& v) {
    for (double x : v) out << ',' << x;
  };
  out << rec.time;
  per(rec.masses);
  const auto& s = rec.energy_split;
  out << ',' << rec.energy_total << ',' << s.potential << ',' << s.bound << ',' << s.kinetic << ',' << s.nonlocal
      << ',' << rec.hamiltonian;
  vec(rec.momentum_total);
  vec(rec.center_of_mass);
  vec(rec.classical_position);
  vec(rec.classical_velocity);
  out << ',' << rec.pi1_norm << ',' << rec.pi2_norm << ',' << rec.gamma_eps << ',' << rec.rho_A << ','
      << rec.omega_hat << ',' << rec.omega << ',' << rec.gamma_dist;
  per(rec.error_h1);
  per(rec.error_modulus);
  vec(rec.fit_shift);
  per(rec.fit_phases);
  out << ',' << (rec.decomposition_valid ? 1 : 0) << ',' << rec.magnetic_gradient_norm << ',' << rec.energy_gap << ','
      << rec.inequalities.violations << '\n';
  out.flags(flags);
  out.precision(prec);
}

DiagnosticRecorder::DiagnosticRecorder(std::shared_ptr<const DiagnosticsContext> ctx)
    : ctx_(std::move(ctx)) {
  tstar_.sigma0 = ctx_->options.sigma0;
}

void DiagnosticRecorder::track_identities(long decimation, double step_dt) {
  trackers_.emplace_back(ctx_->ground_state.grid, decimation, step_dt);
}

Observer DiagnosticRecorder::observer() {
  return [this](const FieldState& state, const ClassicalState& classical) { observe(state, classical); };
}

void DiagnosticRecorder::observe(const FieldState& state, const ClassicalState& classical) {
  records_.push_back(diagnose(state, classical, *ctx_));
  tstar_.update(records_.back());
  if (trackers_.empty()) return;
  auto sample = std::make_shared<const IdentitySample>(
      identity_sample(state.field, state.time, ctx_->potentials, ctx_->params, ctx_->epsilon));
  for (auto& t : trackers_) t.push(sample);
}

}  // namespace solitondyn
