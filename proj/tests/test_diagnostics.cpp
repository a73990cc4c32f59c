#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "solitondyn/diagnostics.hpp"
#include "solitondyn/errors.hpp"

using namespace solitondyn;

namespace {

constexpr double pi = std::numbers::pi;

GroundState soliton(const SpectralGrid& g, double p = 1.0) {
  GroundState gs{g, {closed_form_profile(p, g)}, {}, 0.0, 0.0, 0.0, {1.0}, {false},
                 NonlinearityParams::scalar(p), 0};
  gs.masses = {l2_norm_sq(g, gs.profile[0])};
  gs.total_mass = gs.masses[0];
  return gs;
}

VectorField field_of(const SpectralGrid& g, const std::function<Complex(const Vec&)>& f) {
  VectorField out(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) out[0][i] = f(g.point(i));
  return out;
}

double moment2(const GroundState& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    const double x = r.grid.point(i)[0];
    s += x * x * r.profile[0][i] * r.profile[0][i];
  }
  return s * r.grid.cell_volume();
}

const NonlinearityParams cubic = NonlinearityParams::scalar(1.0);

}  // namespace

TEST_CASE("energy split on closed-form fields") {
  const SpectralGrid g(1, 40.0, 512);
  PotentialSet pots;
  SUBCASE("zero field") {
    const VectorField z(g, 1);
    const auto s = total_energy(z, pots, cubic, 0.1);
    CHECK(s.total == 0.0);
    CHECK(s.potential == 0.0);
    CHECK(s.bound == 0.0);
    CHECK(s.kinetic == 0.0);
    CHECK(s.nonlocal == 0.0);
  }
  SUBCASE("real gaussian in a harmonic well") {
    // f = exp(-x^2/2): int |f'|^2 = sqrt(pi)/2, int f^4 = sqrt(pi/2), int x^2 f^2 = sqrt(pi)/2
    const double eps = 0.3;
    pots.V = ScalarPotential::harmonic(1.0, 1.0);
    const auto f = field_of(g, [](const Vec& x) { return Complex(std::exp(-0.5 * x[0] * x[0])); });
    const auto s = total_energy(f, pots, cubic, eps);
    const double expect_pot = std::sqrt(pi) + 0.5 * eps * eps * std::sqrt(pi) / 2;
    CHECK(s.potential == doctest::Approx(expect_pot).epsilon(1e-12));
    CHECK(s.kinetic == 0.0);
    CHECK(s.bound == doctest::Approx(std::sqrt(pi) / 4 - 0.5 * std::sqrt(pi / 2)).epsilon(1e-12));
    CHECK(s.potential + s.bound == doctest::Approx(s.total).epsilon(1e-14));
  }
  SUBCASE("boosted gaussian carries current energy") {
    const double k = 0.7;
    const auto f = field_of(g, [&](const Vec& x) { return std::exp(-0.5 * x[0] * x[0]) * std::polar(1.0, k * x[0]); });
    const auto s = total_energy(f, pots, cubic, 0.1);
    CHECK(s.kinetic == doctest::Approx(0.5 * k * k * std::sqrt(pi)).epsilon(1e-10));
    CHECK(s.bound == doctest::Approx(std::sqrt(pi) / 4 - 0.5 * std::sqrt(pi / 2)).epsilon(1e-10));
    CHECK(std::abs(s.recombined() - s.total) < 1e-12 * std::abs(s.total));
    // a constant A equal to the boost removes the current
    pots.A = VectorPotential::constant({k, 0.0});
    const auto t = total_energy(f, pots, cubic, 0.1);
    CHECK(std::abs(t.kinetic) < 1e-10);
    CHECK(t.total == doctest::Approx(std::sqrt(pi) / 4 - 0.5 * std::sqrt(pi / 2)).epsilon(1e-10));
  }
  SUBCASE("nonlocal gaussian kernel") {
    // iint a exp(-eps^2 (x-y)^2 / 2) exp(-x^2) exp(-y^2) = a pi / sqrt(1 + eps^2)
    const double eps = 0.4, a = 0.8, beta = 1.5;
    pots.Phi = ScalarPotential::gaussian(0.0, a, 1.0);
    const auto hartree = NonlinearityParams::scalar(1.0, 1.0, beta);
    const auto f = field_of(g, [](const Vec& x) { return Complex(std::exp(-0.5 * x[0] * x[0])); });
    const auto s = total_energy(f, pots, hartree, eps);
    CHECK(s.nonlocal == doctest::Approx(-0.5 * beta * a * pi / std::sqrt(1 + eps * eps)).epsilon(1e-12));
    pots.Phi = ScalarPotential::constant(2.0);
    const double m = std::sqrt(pi);
    CHECK(total_energy(f, pots, hartree, eps).nonlocal == doctest::Approx(-0.5 * beta * 2.0 * m * m).epsilon(1e-12));
  }
}

TEST_CASE("initial energy matches the particle energy up to second order") {
  // harmonic V and A = 0: E(0) - E(r) - M H(0) = eps^2/2 int z^2 r^2 exactly
  const SpectralGrid g(1, 192.0, 2048);
  const auto r = soliton(g);
  const double Er = energy_E(r.field(), cubic);
  PotentialSet pots;
  pots.V = ScalarPotential::harmonic(1.0, 1.0);
  const double m2 = moment2(r);
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025}, dev;
  for (double e : eps) {
    const ClassicalState c{{0.2 / e, 0.0}, {0.3, 0.0}, 0.0, e};
    const auto f = build_initial_datum(r, c, pots, e, g);
    const double E = total_energy(f, pots, cubic, e).total;
    const double H = hamiltonian(c, pots, cubic, r.masses).total;
    const double d = E - Er - r.total_mass * H;
    CHECK(d == doctest::Approx(0.5 * e * e * m2).epsilon(1e-9));
    dev.push_back(std::abs(d));
  }
  CHECK(loglog_slope(eps, dev) >= 1.9);
}

TEST_CASE("magnetic momentum") {
  const SpectralGrid g(1, 96.0, 1024);
  const auto r = soliton(g);
  PotentialSet pots;
  const auto f = r.field();
  const auto zero = magnetic_momentum(f, pots, 0.1);
  for (double v : zero.density[0][0]) CHECK(v == 0.0);

  pots.A = VectorPotential::gaussian_gradient(0.5, 1.0, {0.2, 0.0});
  const auto real = magnetic_momentum(f, pots, 0.3);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec y{0.3 * g.point(i)[0], 0.0};
    worst = std::max(worst, std::abs(real.density[0][0][i] + pots.A.value(y, 1)[0] * std::pow(r.profile[0][i], 2)));
  }
  CHECK(worst < 1e-15);

  PotentialSet free;
  const double xi = 0.65;
  VectorField b(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) b[0][i] = r.profile[0][i] * std::polar(1.0, xi * g.point(i)[0]);
  const auto mb = magnetic_momentum(b, free, 0.1);
  CHECK(mb.total_integral[0] == doctest::Approx(r.total_mass * xi).epsilon(1e-12));

  // |int q| <= ||f|| ||(grad/i - A) f||
  const auto shaped = magnetic_momentum(b, pots, 0.3);
  const double bound = std::sqrt(r.total_mass) * magnetic_gradient_norms(b, pots, 0.3)[0];
  CHECK(std::abs(shaped.total_integral[0]) <= bound);
}

TEST_CASE("momentum defect of the initial datum") {
  // int q - M xi0 = M A(x0) - int r^2(z) A(eps z + x0) dz, of order eps^2
  const SpectralGrid g(1, 192.0, 2048);
  const auto r = soliton(g);
  PotentialSet pots;
  pots.V = ScalarPotential::constant(1.0);
  pots.A = VectorPotential::gaussian_gradient(0.3, 1.0, {0.1, 0.0});
  const double x0 = 0.2, xi0 = 0.4;
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025}, dev;
  for (double e : eps) {
    const ClassicalState c{{x0 / e, 0.0}, {xi0, 0.0}, 0.0, e};
    const auto f = build_initial_datum(r, c, pots, e, g);
    const double pi1 = magnetic_momentum(f, pots, e).total_integral[0] - r.total_mass * xi0;
    double oracle = r.total_mass * pots.A.value({x0, 0.0}, 1)[0];
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double z = g.point(i)[0];
      s += r.profile[0][i] * r.profile[0][i] * pots.A.value({e * z + x0, 0.0}, 1)[0];
    }
    oracle -= s * g.cell_volume();
    CHECK(pi1 == doctest::Approx(oracle).epsilon(1e-8));
    dev.push_back(std::abs(pi1));
  }
  const double slope = loglog_slope(eps, dev);
  CHECK(slope >= 1.9);
  MESSAGE("momentum defect slope " << slope);
}

TEST_CASE("test dictionary certificates") {
  for (int dim : {1, 2}) {
    const auto dict = TestDictionary::standard(dim);
    CHECK(dict.size() > 10);
    for (const auto& m : dict.members()) CHECK(m.c3_bound <= 1.0);
  }
  // finite-difference sup of every derivative up to order three
  auto sampled_norm = [](const TestDictionary& dict, std::size_t k, double span, double step) {
    const int dim = dict.dim();
    const double h = 1e-3;
    const int n = static_cast<int>(2 * span / step);
    double total = 0.0;
    for (int a = 0; a <= 3; ++a) {
      for (int b = 0; a + b <= 3; ++b) {
        if (dim == 1 && b > 0) continue;
        // central difference weights for orders 0..3
        const std::vector<std::vector<double>> w{{1.0}, {-0.5, 0.0, 0.5}, {1.0, -2.0, 1.0}, {-0.5, 1.0, 0.0, -1.0, 0.5}};
        auto stencil = [&](int order, int s) { return w[order][static_cast<std::size_t>(s)]; };
        auto half = [&](int order) { return order == 0 ? 0 : (order == 3 ? 2 : 1); };
        double sup = 0.0;
        for (int i = 0; i <= n; ++i) {
          for (int j = 0; j <= (dim == 2 ? n : 0); ++j) {
            const Vec y{-span + i * step, dim == 2 ? -span + j * step : 0.0};
            double v = 0.0;
            for (int s = -half(a); s <= half(a); ++s) {
              for (int t = -half(b); t <= half(b); ++t) {
                const double c = stencil(a, s + half(a)) * stencil(b, t + half(b));
                if (c == 0.0) continue;
                v += c * dict.value(k, {y[0] + s * h, y[1] + t * h});
              }
            }
            sup = std::max(sup, std::abs(v) / std::pow(h, a + b));
          }
        }
        total += sup;
      }
    }
    return total;
  };
  const auto d1 = TestDictionary::standard(1);
  for (std::size_t k = 0; k < d1.size(); ++k) {
    const double s = sampled_norm(d1, k, 14.0, 0.002);
    CHECK(s <= d1.members()[k].c3_bound * (1 + 1e-5));
    CHECK(s >= 0.995 * d1.members()[k].c3_bound);
  }
  const auto d2 = TestDictionary::standard(2);
  // one member of each kind in two dimensions
  std::vector<std::size_t> picks;
  for (auto kind : {TestDictionary::Kind::gaussian, TestDictionary::Kind::cosine, TestDictionary::Kind::sine,
                    TestDictionary::Kind::windowed_coordinate}) {
    for (std::size_t k = 0; k < d2.size(); ++k)
      if (d2.members()[k].kind == kind) {
        picks.push_back(k);
        break;
      }
  }
  picks.push_back(d2.size() - 1);
  for (std::size_t k : picks) {
    const double s = sampled_norm(d2, k, 7.0, 0.02);
    CHECK(s <= d2.members()[k].c3_bound * (1 + 1e-5));
    CHECK(s >= 0.98 * d2.members()[k].c3_bound);
  }
}

TEST_CASE("pi functionals of the initial datum") {
  const SpectralGrid g(1, 192.0, 2048);
  const auto r = soliton(g);
  const auto dict = TestDictionary::standard(1);
  PotentialSet pots;
  pots.V = ScalarPotential::constant(1.0);
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025}, pi2, omega;
  for (double e : eps) {
    const ClassicalState c{{0.0, 0.0}, {0.5, 0.0}, 0.0, e};
    const auto f = build_initial_datum(r, c, pots, e, g);
    const auto v = pi_functionals(f, c, r.masses, dict, pots, 3.0);
    CHECK(v.pi1_norm < 1e-11);
    CHECK(v.gamma_eps_norm < 1e-12);
    CHECK(v.rho_A == 0.0);
    CHECK(v.omega == doctest::Approx(v.omega_hat).epsilon(1e-15));
    CHECK(v.omega_hat == doctest::Approx(v.pi1_norm + v.pi2_sup + v.gamma_eps_norm).epsilon(1e-15));
    pi2.push_back(v.pi2_sup);
    omega.push_back(v.omega);
  }
  CHECK(loglog_slope(eps, pi2) >= 1.9);
  CHECK(loglog_slope(eps, omega) >= 1.9);
}

TEST_CASE("pi functionals with a magnetic pairing") {
  const SpectralGrid g(1, 192.0, 2048);
  const auto r = soliton(g);
  const auto dict = TestDictionary::standard(1);
  PotentialSet pots;
  pots.V = ScalarPotential::constant(1.0);
  const double a = 0.25, e = 0.1;
  pots.A = VectorPotential::constant({a, 0.0});
  const ClassicalState c{{5.0, 0.0}, {0.3, 0.0}, 0.0, e};
  VectorField f = build_initial_datum(r, c, pots, e, g);
  // perturb the current so the pairing is nonzero
  for (std::size_t i = 0; i < g.size(); ++i) f[0][i] *= std::polar(1.0, 0.05 * g.point(i)[0]);
  const auto v = pi_functionals(f, c, r.masses, dict, pots, 3.0);
  // for constant A the pairing is a times the momentum defect
  CHECK(v.rho_A == doctest::Approx(std::abs(a * v.pi1[0])).epsilon(1e-10));
  CHECK(v.pi1[0] == doctest::Approx(0.05 * r.total_mass).epsilon(1e-9));
  CHECK(v.omega == doctest::Approx(v.omega_hat + v.rho_A).epsilon(1e-15));
}

TEST_CASE("pi2 vanishes for concentrated densities") {
  const SpectralGrid g(1, 96.0, 4096);
  const auto dict = TestDictionary::standard(1);
  PotentialSet pots;
  const double e = 0.5, M = 2.0;
  const ClassicalState c{{1.5, 0.0}, {0.0, 0.0}, 0.0, e};
  double prev = 1e300;
  std::vector<double> sig{1.0, 0.5, 0.25, 0.125}, vals;
  for (double s : sig) {
    auto f = field_of(g, [&](const Vec& x) { return Complex(std::exp(-std::pow(x[0] - 1.5, 2) / (4 * s * s))); });
    const double scale = std::sqrt(M / l2_norm_sq(g, f[0]));
    for (auto& v : f[0]) v *= scale;
    const double p = pi_functionals(f, c, {M}, dict, pots, 6.0).pi2_sup;
    CHECK(p < prev);
    prev = p;
    vals.push_back(p);
  }
  CHECK(vals.back() < vals.front() / 40);
  MESSAGE("concentrated pi2 " << vals.front() << " -> " << vals.back());
}

TEST_CASE("cutoff plateau") {
  const SpectralGrid g(1, 128.0, 2048);
  const auto r = soliton(g);
  const auto dict = TestDictionary::standard(1);
  PotentialSet pots;
  const double e = 0.1;
  const ClassicalState c{{4.0, 0.0}, {0.0, 0.0}, 0.0, e};
  const auto f = build_initial_datum(r, c, pots, e, g);
  const double rho = 0.4 + 5 * e * r.decay_radius(1e-2);
  const auto a = pi_functionals(f, c, r.masses, dict, pots, rho);
  const auto b = pi_functionals(f, c, r.masses, dict, pots, 2 * rho);
  CHECK(std::abs(a.gamma_eps[0] - b.gamma_eps[0]) < 1e-12);
  CHECK_THROWS_AS(pi_functionals(f, c, r.masses, dict, pots, 0.5), Error);
  try {
    pi_functionals(f, c, r.masses, dict, pots, 0.5);
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::cutoff);
  }
  CHECK(cutoff({0.0, 0.0}, 2, 1.0) == 1.0);
  CHECK(cutoff({0.6, 0.8}, 2, 1.0) == 1.0);
  CHECK(cutoff({1.5, 1.5}, 2, 1.0) == 0.0);
  const double mid = cutoff({1.5, 0.0}, 1, 1.0);
  CHECK(mid == doctest::Approx(0.5).epsilon(1e-15));

  // tail mass of 2 sech^2(sqrt(2) x) beyond R is 2 exp(-2 sqrt(2) R) of the total
  const double tail = std::log(2.0 / kPlateauTail) / (2.0 * std::sqrt(2.0));
  CHECK(std::abs(mass_tail_radius(r, kPlateauTail) - tail) < 2 * g.spacing());
  Trajectory traj;
  traj.dim = 1;
  traj.states = {{{3.0, 0.0}, {}, 0.0, e}, {{-10.0, 0.0}, {}, 1.0, e}};
  CHECK(std::abs(choose_cutoff_radius(traj, r, e) - (2.0 + 5 * e * tail)) < 10 * e * g.spacing());
}

TEST_CASE("soliton fit on the manifold") {
  const SpectralGrid g(1, 96.0, 1024);
  const auto r = soliton(g);
  PotentialSet pots;
  pots.V = ScalarPotential::constant(1.0);
  pots.A = VectorPotential::gaussian_gradient(0.3, 1.0);
  const double e = 0.2;
  const ClassicalState c{{3.3, 0.0}, {0.4, 0.0}, 0.0, e};
  const auto f = build_initial_datum(r, c, pots, e, g);
  const auto fit = soliton_fit(f, r, c, pots);
  CHECK(fit.residual_h1[0] < 1e-10);
  CHECK(fit.shift[0] == doctest::Approx(3.3).epsilon(1e-10));
  CHECK(std::abs(fit.phases[0]) < 1e-10);
  CHECK(fit.valid);
  CHECK(modulus_error(f, r, c)[0] < 1e-10);

  VectorField rotated = f;
  const double theta = 0.9;
  for (auto& v : rotated[0]) v *= std::polar(1.0, theta);
  const auto rfit = soliton_fit(rotated, r, c, pots);
  CHECK(rfit.phases[0] == doctest::Approx(theta).epsilon(1e-10));
  CHECK(rfit.residual_h1[0] < 1e-10);
  CHECK(rfit.shift[0] == doctest::Approx(3.3).epsilon(1e-10));

  // a scaled copy is Gamma = ||r||_{H1}^2 away, outside the trust region
  VectorField doubled = f;
  for (auto& v : doubled[0]) v *= 2.0;
  const auto dfit = soliton_fit(doubled, r, c, pots);
  CHECK(dfit.gamma_dist == doctest::Approx(h1_norm_sq(g, ComplexArray(r.profile[0].begin(), r.profile[0].end()))).epsilon(1e-9));
  CHECK_FALSE(dfit.valid);
}

TEST_CASE("soliton fit for a decoupled pair") {
  const SpectralGrid g(1, 192.0, 2048);
  const auto params = NonlinearityParams::coupled(1.0, {1.0, 1.0}, {{0.0, 0.0}, {0.0, 0.0}});
  const auto gs = solve_ground_state(params, {1.5, 2.5}, g);
  PotentialSet pots;
  const ClassicalState c{{-2.0, 0.0}, {0.1, 0.0}, 0.0, 0.1};
  VectorField f = build_initial_datum(gs, c, pots, 0.1, g);
  for (auto& v : f[0]) v *= std::polar(1.0, 0.3);
  for (auto& v : f[1]) v *= std::polar(1.0, -1.1);
  const auto fit = soliton_fit(f, gs, c, pots);
  CHECK(fit.phases[0] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(fit.phases[1] == doctest::Approx(-1.1).epsilon(1e-10));
  CHECK(fit.shift[0] == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(fit.gamma_dist < 1e-20);
}

TEST_CASE("inequality suite on structured fields") {
  const SpectralGrid g(2, 24.0, 96);
  PotentialSet pots;
  pots.dim = 2;
  pots.V = ScalarPotential::harmonic(1.0, 1.0);
  pots.A = VectorPotential::gaussian_vortex(0.4, 1.5);
  const double e = 0.5;
  VectorField f(g, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.point(i);
    const double r2 = x[0] * x[0] + x[1] * x[1];
    f[0][i] = std::exp(-r2 / 4) * std::polar(1.0, 0.3 * x[0] + 0.1 * x[0] * x[1]);
    f[1][i] = (1.0 + 0.5 * x[1]) * std::exp(-r2 / 3) * std::polar(1.0, -0.2 * x[1] * x[1]);
  }
  const auto params = NonlinearityParams::coupled(0.5, {1.0, 0.7}, {{0.0, 0.2}, {0.2, 0.0}});
  const auto split = total_energy(f, pots, params, e);
  const auto chk = check_inequalities(f, pots, e, split);
  CHECK(chk.violations == 0);
  CHECK(chk.split_relative_error < 1e-12);
  CHECK(chk.momentum_cs >= 0.0);
  for (double m : chk.diamagnetic) CHECK(m > 0.0);
  // an understated current energy is caught
  EnergySplit bad = split;
  bad.kinetic -= 1e-3;
  CHECK(check_inequalities(f, pots, e, bad).violations >= 2);
}

TEST_CASE("identity residuals") {
  SUBCASE("linear flow of one Fourier mode") {
    const SpectralGrid g(1, 2 * pi, 64);
    PotentialSet pots;
    const NonlinearityParams none = NonlinearityParams::scalar(1.0, 0.0);
    const int k = 3;
    std::vector<IdentitySample> hist;
    for (int n = 0; n < 5; ++n) {
      const double t = 0.1 * n;
      const auto f = field_of(g, [&](const Vec& x) { return std::polar(1.0, k * x[0] - 0.5 * k * k * t); });
      hist.push_back(identity_sample(f, t, pots, none, 1.0));
    }
    const auto rep = identity_residuals(g, hist, 0.005);
    CHECK(rep.residuals.size() == 3);
    CHECK(rep.max_continuity < 1e-8);
    CHECK(rep.max_momentum < 1e-8);
    CHECK(rep.accuracy_warning);
    hist[2].time += 0.01;
    CHECK_THROWS_AS(identity_residuals(g, hist, 0.01), Error);
  }
  SUBCASE("free soliton keeps its momentum") {
    const SpectralGrid g(1, 96.0, 1024);
    EvolutionConfig cfg(g, soliton(g));
    cfg.potentials.V = ScalarPotential::constant(1.0);
    cfg.epsilon = 0.1;
    cfg.dt = 1e-2;
    cfg.t_final = 2.0;
    cfg.observer_stride = 5;
    cfg.classical0 = {{0.0, 0.0}, {0.5, 0.0}, 0.0, 0.1};
    IdentityTracker tracker(g, 1, cfg.dt);
    evolve(cfg, {[&](const FieldState& s, const ClassicalState&) {
      tracker.push(std::make_shared<const IdentitySample>(
          identity_sample(s.field, s.time, cfg.potentials, cfg.params, cfg.epsilon)));
    }});
    CHECK(tracker.report().residuals.size() == 39);
    CHECK(tracker.report().max_momentum < 1e-8);
    CHECK_FALSE(tracker.report().accuracy_warning);
  }
}

TEST_CASE("momentum law in a uniform magnetic field") {
  // validates the sign of the Lorentz term against the field equation
  const SpectralGrid g(2, 48.0, 192);
  const auto params = NonlinearityParams::scalar(0.5);
  const auto gs = solve_canonical_ground_state(params, g);
  EvolutionConfig cfg(g, gs);
  cfg.potentials.V = ScalarPotential::harmonic(1.0, 0.5);
  cfg.potentials.A = VectorPotential::uniform_field(0.5, false);
  cfg.epsilon = 0.2;
  cfg.dt = 2e-3;
  cfg.t_final = 0.4;
  cfg.margin_level = 1e-6;
  cfg.observer_stride = 10;
  cfg.classical0 = {{0.5, 0.0}, {0.0, 0.6}, 0.0, 0.2};
  std::vector<IdentityTracker> trackers{{g, 1, cfg.dt}, {g, 2, cfg.dt}};
  double force = 0.0;
  evolve(cfg, {[&](const FieldState& s, const ClassicalState&) {
    auto sample = std::make_shared<const IdentitySample>(
        identity_sample(s.field, s.time, cfg.potentials, cfg.params, cfg.epsilon));
    force = std::max(force, std::hypot(sample->momentum_rhs[0], sample->momentum_rhs[1]));
    for (auto& t : trackers) t.push(sample);
  }});
  const double fine = trackers[0].report().max_momentum;
  const double coarse = trackers[1].report().max_momentum;
  MESSAGE("force " << force << " residuals " << fine << " " << coarse);
  CHECK(force > 0.05);
  CHECK(fine < 1e-3 * force);
  CHECK(coarse / fine > 3.5);
  const double cfine = trackers[0].report().max_continuity;
  const double ccoarse = trackers[1].report().max_continuity;
  CHECK(ccoarse / cfine > 3.5);
}

TEST_CASE("quadrature lemmas") {
  const SpectralGrid g(1, 40.0, 1024);
  const auto r = soliton(g);
  const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  const auto flat = quadrature_lemmas(r, [](const Vec&) { return 1.7; }, {0.3, 0.0}, eps);
  for (double d : flat.single[0]) CHECK(d == 0.0);
  for (double d : flat.pair[0][0]) CHECK(d == 0.0);
  // linear g, windowed far outside the soliton support
  auto linear = [](const Vec& y) { return (2.0 * y[0] - 0.5) * std::exp(-std::pow(y[0] / 50.0, 8)); };
  const auto lin = quadrature_lemmas(r, linear, {0.3, 0.0}, eps);
  for (double d : lin.single[0]) CHECK(d < 1e-10);
  auto gauss = [](const Vec& y) { return std::exp(-y[0] * y[0]); };
  const auto rep = quadrature_lemmas(r, gauss, {0.4, 0.0}, eps);
  CHECK(rep.single_slopes[0] >= 1.9);
  CHECK(rep.pair_slopes[0][0] >= 1.9);
  CHECK(rep.min_slope >= 1.9);
  MESSAGE("quadrature slopes " << rep.single_slopes[0] << " " << rep.pair_slopes[0][0]);
}

TEST_CASE("log-log slope") {
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0}) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::isnan(loglog_slope({1.0, 2.0}, {0.0, 1.0})));
  CHECK(std::isnan(loglog_slope({1.0}, {1.0})));
}

TEST_CASE("recorder, csv and the T* monitor") {
  const SpectralGrid g(1, 96.0, 1024);
  const auto r = soliton(g);
  EvolutionConfig cfg(g, r);
  cfg.potentials.V = ScalarPotential::harmonic(1.0, 1.0);
  cfg.epsilon = 0.1;
  cfg.dt = 1e-2;
  cfg.t_final = 1.0;
  cfg.observer_stride = 20;
  cfg.classical0 = {{3.0, 0.0}, {0.2, 0.0}, 0.0, 0.1};
  const auto traj = integrate_trajectory(cfg.classical0, cfg.potentials, cfg.dt, 100, cfg.params, r.masses);
  DiagnosticsOptions opt;
  opt.cutoff_radius = choose_cutoff_radius(traj, r, cfg.epsilon);
  auto ctx = std::make_shared<const DiagnosticsContext>(r, g, cfg.potentials, cfg.params, cfg.epsilon, opt);
  DiagnosticRecorder rec(ctx);
  rec.track_identities(1, cfg.dt);
  evolve(cfg, {rec.observer()});
  REQUIRE(rec.records().size() == 6);
  const auto& first = rec.records().front();
  CHECK(first.gamma_dist < 1e-20);
  CHECK(std::abs(first.energy_gap) < 1e-12);
  CHECK(first.inequalities.violations == 0);
  CHECK(first.center_of_mass[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(first.omega == doctest::Approx(first.omega_hat).epsilon(1e-15));
  for (const auto& x : rec.records()) {
    CHECK(x.inequalities.violations == 0);
    CHECK(x.energy_gap >= -1e-9);
    CHECK(x.masses[0] == doctest::Approx(r.masses[0]).epsilon(1e-10));
    CHECK(x.decomposition_valid);
  }
  CHECK_FALSE(rec.tstar().first_violation.has_value());
  CHECK(rec.trackers()[0].report().residuals.size() == 4);

  std::ostringstream os;
  write_diagnostics_header(os, 1, 1);
  for (const auto& x : rec.records()) write_diagnostics_row(os, x, 1);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  const auto columns = std::count(line.begin(), line.end(), ',');
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == columns);
    ++rows;
  }
  CHECK(rows == 6);

  TStarMonitor strict;
  strict.sigma0 = 1e-300;
  for (const auto& x : rec.records()) strict.update(x);
  REQUIRE(strict.first_violation.has_value());
  CHECK(*strict.first_violation == 0.0);

  const ClassicalState late{{3.0, 0.0}, {0.2, 0.0}, 0.5, 0.1};
  CHECK_THROWS_AS(diagnose(FieldState{r.field(), 0.0, 0}, late, *ctx), Error);
}
