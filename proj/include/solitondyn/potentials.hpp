#pragma once

#include <string>

#include "solitondyn/grid.hpp"

namespace solitondyn {

/// Analytic scalar field on R^N with exact first and second derivatives.
class ScalarPotential {
 public:
  enum class Kind { zero, constant, harmonic, gaussian };

  ScalarPotential() = default;

  static ScalarPotential zero();
  static ScalarPotential constant(double value);
  /// offset + omega^2 |y - center|^2 / 2
  static ScalarPotential harmonic(double offset, double omega, const Vec& center = {});
  /// base + amplitude * exp(-|y - center|^2 / (2 width^2))
  static ScalarPotential gaussian(double base, double amplitude, double width, const Vec& center = {});

  Kind kind() const noexcept { return kind_; }
  double base() const noexcept { return base_; }
  double amplitude() const noexcept { return amplitude_; }
  double width() const noexcept { return width_; }
  const Vec& center() const noexcept { return center_; }
  bool is_zero() const noexcept { return kind_ == Kind::zero; }
  bool is_constant() const noexcept { return kind_ == Kind::zero || kind_ == Kind::constant; }

  double value(const Vec& y, int dim) const noexcept;
  Vec gradient(const Vec& y, int dim) const noexcept;
  Mat hessian(const Vec& y, int dim) const noexcept;

  std::string describe() const;

 private:
  Kind kind_ = Kind::zero;
  double base_ = 0.0;
  double amplitude_ = 0.0;
  double width_ = 1.0;
  Vec center_{};
};

/// Analytic vector potential. jacobian()[i][k] = d A_i / d y_k.
class VectorPotential {
 public:
  enum class Kind { zero, constant, uniform_field, gaussian_vortex, gaussian_gradient };

  VectorPotential() = default;

  static VectorPotential zero();
  static VectorPotential constant(const Vec& value);
  /// Uniform field b in the plane: symmetric gauge (-b y2/2, b y1/2) or
  /// Landau gauge (-b y2, 0), both about center.
  static VectorPotential uniform_field(double b, bool landau_gauge, const Vec& center = {});
  /// amplitude * (-(y2-c2), y1-c1) * exp(-|y-c|^2/(2 width^2))
  static VectorPotential gaussian_vortex(double amplitude, double width, const Vec& center = {});
  /// Pure gauge: grad of amplitude * exp(-|y-c|^2/(2 width^2)).
  static VectorPotential gaussian_gradient(double amplitude, double width, const Vec& center = {});

  /// -A, used for time reversal.
  VectorPotential negated() const noexcept;

  Kind kind() const noexcept { return kind_; }
  bool is_zero() const noexcept { return kind_ == Kind::zero; }
  double strength() const noexcept { return strength_; }
  const Vec& offset() const noexcept { return offset_; }
  double width() const noexcept { return width_; }
  const Vec& center() const noexcept { return center_; }
  bool landau_gauge() const noexcept { return landau_; }

  Vec value(const Vec& y, int dim) const noexcept;
  Mat jacobian(const Vec& y, int dim) const noexcept;
  double divergence(const Vec& y, int dim) const noexcept;
  /// Second derivatives of component i: result[k][l] = d^2 A_i / dy_k dy_l.
  Mat hessian(int component, const Vec& y, int dim) const noexcept;

  std::string describe() const;

 private:
  Kind kind_ = Kind::zero;
  double strength_ = 0.0;
  Vec offset_{};
  double width_ = 1.0;
  Vec center_{};
  bool landau_ = false;
};

struct PotentialSet {
  int dim = 1;
  ScalarPotential V;
  VectorPotential A;
  ScalarPotential Phi;

  bool nonlocal_enabled() const noexcept { return !Phi.is_zero(); }
  /// Checks V > 0 and Phi > 0 at the given points in the scaled frame, and grad Phi(0) = 0.
  void validate(double epsilon, const SpectralGrid& grid) const;
};

/// sup over the box [lo, hi] of |A| + |DA| + |D^2 A| (Frobenius norms), sampled.
double vector_potential_c2_norm(const VectorPotential& A, int dim, const Vec& lo, const Vec& hi,
                                int samples_per_axis = 41);

}  // namespace solitondyn
