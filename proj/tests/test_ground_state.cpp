#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "solitondyn/errors.hpp"
#include "solitondyn/ground_state.hpp"

using namespace solitondyn;

namespace {

// Closed form and its exact second derivative, for a substitution check that
// does not touch the spectral machinery.
struct SechProfile {
  double p;
  double amp() const { return std::pow(1.0 + p, 1.0 / (2.0 * p)); }
  double c() const { return std::numbers::sqrt2 * p; }
  double value(double x) const { return amp() * std::pow(1.0 / std::cosh(c() * x), 1.0 / p); }
  double second(double x) const {
    const double a = 1.0 / p, s = 1.0 / std::cosh(c() * x), t = std::tanh(c() * x);
    return amp() * a * c() * c() * std::pow(s, a) * (a * t * t - s * s);
  }
};

SpectralGrid oracle_grid() { return SpectralGrid(1, 40.0, 1024); }

GroundState closed_form_state(double p, const SpectralGrid& g) {
  GroundState gs{g, {closed_form_profile(p, g)}, {}, 0.0, 0.0, 0.0, {1.0}, {false},
                 NonlinearityParams::scalar(p), 0};
  gs.masses = {l2_norm_sq(g, gs.profile[0])};
  gs.total_mass = gs.masses[0];
  return gs;
}

double h1_distance(const SpectralGrid& g, const RealArray& a, const RealArray& b) {
  ComplexArray d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return std::sqrt(h1_norm_sq(g, d));
}

}  // namespace

TEST_CASE("closed form solves the profile equation by substitution") {
  for (double p : {0.5, 1.0, 1.5}) {
    const SechProfile s{p};
    double worst = 0.0;
    for (int i = -2000; i <= 2000; ++i) {
      const double x = i * 0.005;
      const double r = s.value(x);
      worst = std::max(worst, std::abs(-0.5 * s.second(x) + r - std::pow(r, 2 * p + 1)));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("closed form mass matches quadrature") {
  for (double p : {0.5, 1.0, 1.5}) {
    const SechProfile s{p};
    double q = 0.0;
    const int fine = 400000;
    for (int i = 0; i < fine; ++i) {
      const double x = -30.0 + (i + 0.5) * 60.0 / fine;
      q += s.value(x) * s.value(x) * 60.0 / fine;
    }
    CHECK(closed_form_mass(p) == doctest::Approx(q).epsilon(1e-9));
  }
  CHECK(closed_form_mass(1.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("energy functional") {
  const auto g = oracle_grid();
  const auto params = NonlinearityParams::scalar(1.0);
  CHECK(energy_E(VectorField(g, 1), params) == 0.0);
  // analytic: int u'^2 = 4 sqrt2/3, int u^4 = 8 sqrt2/3
  const auto u = VectorField::from_real(g, {closed_form_profile(1.0, g)});
  CHECK(energy_E(u, params) == doctest::Approx(-2.0 * std::sqrt(2.0) / 3.0).epsilon(1e-10));

  auto coupled = NonlinearityParams::coupled(1.0, {1.0, 1.0}, {{0.0, 0.0}, {0.0, 0.0}});
  RealArray other = closed_form_profile(1.0, g);
  for (auto& v : other) v *= 0.7;
  const auto pair = VectorField::from_real(g, {closed_form_profile(1.0, g), other});
  const auto e1 = energy_E(VectorField::from_real(g, {closed_form_profile(1.0, g)}), params);
  const auto e2 = energy_E(VectorField::from_real(g, {other}), params);
  CHECK(energy_E(pair, coupled) == doctest::Approx(e1 + e2).epsilon(1e-13));
}

TEST_CASE("system residual") {
  const SpectralGrid fine(1, 40.0, 2048);
  const auto params = NonlinearityParams::scalar(1.0);
  CHECK(system_residual(closed_form_state(1.0, fine), params) < 1e-8);
  CHECK(system_residual(closed_form_state(0.5, fine), NonlinearityParams::scalar(0.5)) < 1e-8);
  GroundState zero = closed_form_state(1.0, fine);
  zero.profile[0].assign(fine.size(), 0.0);
  CHECK(system_residual(zero, params) == 0.0);
  GroundState bump = closed_form_state(1.0, fine);
  for (std::size_t i = 0; i < fine.size(); ++i) bump.profile[0][i] = std::exp(-fine.point(i)[0] * fine.point(i)[0]);
  CHECK(system_residual(bump, params) > 1e-2);
}

TEST_CASE("solver reproduces the closed form at fixed mass") {
  const auto g = oracle_grid();
  const auto params = NonlinearityParams::scalar(1.0);
  const auto gs = solve_ground_state(params, {2.0 * std::sqrt(2.0)}, g);
  const auto exact = closed_form_profile(1.0, g);
  double linf = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) linf = std::max(linf, std::abs(gs.profile[0][i] - exact[i]));
  CHECK(linf < 1e-6);
  CHECK(gs.masses[0] == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(gs.multipliers[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(gs.residual < 1e-9);
  CHECK(gs.energy == doctest::Approx(-2.0 * std::sqrt(2.0) / 3.0).epsilon(1e-9));
}

TEST_CASE("canonical solver matches the closed form for several exponents") {
  const auto g = oracle_grid();
  for (double p : {0.5, 1.0, 1.5}) {
    CAPTURE(p);
    const auto params = NonlinearityParams::scalar(p);
    const auto start = std::chrono::steady_clock::now();
    const auto gs = solve_canonical_ground_state(params, g);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 30.0);
    const auto exact = closed_form_profile(p, g);
    CHECK(h1_distance(g, gs.profile[0], exact) < 1e-5);
    CHECK(std::abs(gs.multipliers[0] - 1.0) < 1e-10);
    CHECK(system_residual(gs, params) < 1e-8);

    const auto& r = gs.profile[0];
    double asym = 0.0, moment = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) {
      asym += std::pow(r[i] - r[g.size() - i], 2);
      moment += g.point(i)[0] * r[i] * r[i];
    }
    CHECK(std::sqrt(asym * g.spacing() / gs.masses[0]) < 1e-8);
    CHECK(std::abs(moment * g.spacing()) < 1e-10);

    // multiply by r and by x r' and integrate
    const auto fld = gs.field();
    const auto dr = gradient(g, fld[0]);
    double grad2 = 0.0, mass = 0.0, pow_int = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      grad2 += std::norm(dr[0][i]);
      mass += r[i] * r[i];
      pow_int += std::pow(r[i], 2 * p + 2);
    }
    grad2 *= g.spacing();
    mass *= g.spacing();
    pow_int *= g.spacing();
    CHECK(std::abs(0.5 * grad2 + mass - pow_int) < 1e-8);
    CHECK(std::abs(0.25 * grad2 - 0.5 * mass + pow_int / (2 * p + 2)) < 1e-8);
  }
}

TEST_CASE("decoupled pair equals two scalar copies") {
  const auto g = oracle_grid();
  const auto params = NonlinearityParams::coupled(1.0, {1.0, 1.0}, {{0.0, 0.0}, {0.0, 0.0}});
  const auto gs = solve_ground_state(params, {2.0 * std::sqrt(2.0), 2.0 * std::sqrt(2.0)}, g);
  const auto exact = closed_form_profile(1.0, g);
  for (int j = 0; j < 2; ++j) CHECK(h1_distance(g, gs.profile[static_cast<std::size_t>(j)], exact) < 1e-5);
  CHECK_FALSE(gs.near_zero[0]);
}

TEST_CASE("weakly coupled canonical pair has unit multipliers") {
  const SpectralGrid g(1, 40.0, 512);
  const auto params = NonlinearityParams::coupled(1.0, {1.0, 0.8}, {{0.0, 0.2}, {0.2, 0.0}});
  const auto gs = solve_canonical_ground_state(params, g);
  for (double l : gs.multipliers) CHECK(std::abs(l - 1.0) < 1e-10);
  CHECK(system_residual(gs, params) < 1e-8);
  CHECK(gs.masses[0] < gs.masses[1]);
}

TEST_CASE("solver input validation") {
  const auto g = oracle_grid();
  CHECK_THROWS_AS(solve_ground_state(NonlinearityParams::scalar(2.5), {1.0}, g), Error);
  CHECK_THROWS_AS(solve_ground_state(NonlinearityParams::scalar(1.0), {-1.0}, g), Error);
  GroundStateOptions tight;
  tight.max_iterations = 3;
  CHECK_THROWS_AS(solve_ground_state(NonlinearityParams::scalar(1.0), {2.0}, g, tight), ConvergenceError);
}

TEST_CASE("gamma distance on the soliton manifold") {
  const SpectralGrid g(1, 40.0, 512);
  auto r = closed_form_state(1.0, g);
  const double theta = 0.83;
  const int shift_points = 17;
  ComplexArray u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    u[i] = std::polar(1.0, theta) * r.profile[0][(i + shift_points) % g.size()];
  const auto fit = gamma_distance(VectorField(g, {u}), r);
  CHECK(fit.value < 1e-10);
  CHECK(fit.center[0] == doctest::Approx(-shift_points * g.spacing()).epsilon(1e-9));
  CHECK(fit.phases[0] == doctest::Approx(theta).epsilon(1e-10));

  const auto self = gamma_distance(r.field(), r);
  CHECK(self.value < 1e-10);
  CHECK(std::abs(self.center[0]) < 1e-9);
  CHECK(std::abs(self.phases[0]) < 1e-12);

  // off-grid shift recovered by the continuous refinement
  const auto off = fourier_translate(g, r.profile[0], Vec{1.2345, 0.0});
  const auto fit_off = gamma_distance(VectorField::from_real(g, {off}), r);
  CHECK(fit_off.center[0] == doctest::Approx(1.2345).epsilon(1e-9));
  CHECK(fit_off.value < 1e-10);
}

TEST_CASE("gamma distance of a small orthogonal perturbation") {
  const SpectralGrid g(1, 40.0, 256);
  auto r = closed_form_state(1.0, g);
  // odd times i: orthogonal in H^1 to phase and translation directions at the optimum
  ComplexArray pert(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.point(i)[0];
    pert[i] = Complex(std::exp(-0.5 * (x - 1.0) * (x - 1.0)) - std::exp(-0.5 * (x + 1.0) * (x + 1.0)), 0.0) * 0.0 +
              Complex(x * x * std::exp(-0.5 * x * x), 0.0);
  }
  // make it H^1-orthogonal to r (radial direction stays, so project it out)
  const ComplexArray rc(r.profile[0].begin(), r.profile[0].end());
  const Complex proj = h1_inner(g, rc, pert) / h1_inner(g, rc, rc);
  for (std::size_t i = 0; i < g.size(); ++i) pert[i] -= proj * rc[i];
  const double delta = 1e-3;
  ComplexArray u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = rc[i] + delta * pert[i];
  const auto fit = gamma_distance(VectorField(g, {u}), r);
  const double expected = delta * delta * h1_norm_sq(g, pert);
  CHECK(fit.value == doctest::Approx(expected).epsilon(0.1));

  // direct lattice scan over shifts and phases
  double best = 1e300;
  for (int s = -20; s <= 20; ++s) {
    const auto shifted = fourier_translate(g, r.profile[0], Vec{-s * 1e-4, 0.0});
    for (int t = -20; t <= 20; ++t) {
      const double th = t * 1e-4;
      ComplexArray d(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = u[i] - std::polar(1.0, th) * shifted[i];
      best = std::min(best, h1_norm_sq(g, d));
    }
  }
  CHECK(fit.value <= best * (1.0 + 1e-6));
  CHECK(fit.value == doctest::Approx(best).epsilon(0.05));
}

TEST_CASE("convexity probe") {
  const SpectralGrid g(1, 40.0, 512);
  const auto params = NonlinearityParams::scalar(1.0);
  const auto gs = solve_canonical_ground_state(params, g);
  const auto result = convexity_probe(gs, params, 100);
  CHECK(result.ratios.size() + static_cast<std::size_t>(result.skipped) == 100);
  CHECK(result.ratios.size() > 80);
  for (double r : result.ratios) CHECK(std::isfinite(r));
  CHECK(result.max_ratio > 0.0);
  CHECK(result.max_ratio < 50.0);
  MESSAGE("convexity probe max ratio " << result.max_ratio);
}

TEST_CASE("two dimensional canonical profile is radial") {
  const SpectralGrid g(2, 48.0, 256);
  const auto params = NonlinearityParams::scalar(0.5);
  const auto gs = solve_canonical_ground_state(params, g);
  CHECK(std::abs(gs.multipliers[0] - 1.0) < 1e-10);
  CHECK(system_residual(gs, params) < 1e-8);
  // swap of axes and reflection leave the profile unchanged
  const std::size_t n = g.points();
  double asym = 0.0;
  for (std::size_t a = 1; a < n; ++a)
    for (std::size_t b = 1; b < n; ++b) {
      const double v = gs.profile[0][a * n + b];
      asym = std::max(asym, std::abs(v - gs.profile[0][b * n + a]));
      asym = std::max(asym, std::abs(v - gs.profile[0][(n - a) * n + b]));
    }
  CHECK(asym < 1e-9);
  // tail ~ exp(-sqrt2 r)
  CHECK(gs.decay_radius() > 15.0);
  CHECK(gs.decay_radius() < 23.0);
  MESSAGE("2D mass " << gs.masses[0] << " iterations " << gs.iterations);
}
