#include "solitondyn/potentials.hpp"

#include <cmath>
#include <sstream>

#include "solitondyn/errors.hpp"

namespace solitondyn {

namespace {

struct Bump {
  Vec d{};
  double w2 = 1.0;
  double g = 1.0;
};

Bump bump(const Vec& y, const Vec& center, double width, int dim) {
  Bump b;
  b.w2 = width * width;
  double r2 = 0.0;
  for (int k = 0; k < dim; ++k) {
    b.d[k] = y[k] - center[k];
    r2 += b.d[k] * b.d[k];
  }
  b.g = std::exp(-0.5 * r2 / b.w2);
  return b;
}

double delta(int a, int b) { return a == b ? 1.0 : 0.0; }

// First, second and third partial derivatives of the unit Gaussian bump.
double dg(const Bump& b, int k) { return -b.d[k] / b.w2 * b.g; }

double ddg(const Bump& b, int k, int l) {
  return (b.d[k] * b.d[l] / (b.w2 * b.w2) - delta(k, l) / b.w2) * b.g;
}

double dddg(const Bump& b, int i, int k, int l) {
  const double w4 = b.w2 * b.w2;
  return ((delta(i, l) * b.d[k] + delta(k, l) * b.d[i] + delta(i, k) * b.d[l]) / w4 -
          b.d[i] * b.d[k] * b.d[l] / (w4 * b.w2)) *
         b.g;
}

}  // namespace

ScalarPotential ScalarPotential::zero() { return {}; }

ScalarPotential ScalarPotential::constant(double value) {
  ScalarPotential v;
  v.kind_ = Kind::constant;
  v.base_ = value;
  return v;
}

ScalarPotential ScalarPotential::harmonic(double offset, double omega, const Vec& center) {
  ScalarPotential v;
  v.kind_ = Kind::harmonic;
  v.base_ = offset;
  v.amplitude_ = omega;
  v.center_ = center;
  return v;
}

ScalarPotential ScalarPotential::gaussian(double base, double amplitude, double width,
                                          const Vec& center) {
  if (!(width > 0.0)) throw Error(ErrorCategory::config, "gaussian width must be positive");
  ScalarPotential v;
  v.kind_ = Kind::gaussian;
  v.base_ = base;
  v.amplitude_ = amplitude;
  v.width_ = width;
  v.center_ = center;
  return v;
}

double ScalarPotential::value(const Vec& y, int dim) const noexcept {
  switch (kind_) {
    case Kind::zero: return 0.0;
    case Kind::constant: return base_;
    case Kind::harmonic: {
      double r2 = 0.0;
      for (int k = 0; k < dim; ++k) r2 += (y[k] - center_[k]) * (y[k] - center_[k]);
      return base_ + 0.5 * amplitude_ * amplitude_ * r2;
    }
    case Kind::gaussian: return base_ + amplitude_ * bump(y, center_, width_, dim).g;
  }
  return 0.0;
}

Vec ScalarPotential::gradient(const Vec& y, int dim) const noexcept {
  Vec g{};
  switch (kind_) {
    case Kind::zero:
    case Kind::constant: break;
    case Kind::harmonic:
      for (int k = 0; k < dim; ++k) g[k] = amplitude_ * amplitude_ * (y[k] - center_[k]);
      break;
    case Kind::gaussian: {
      const Bump b = bump(y, center_, width_, dim);
      for (int k = 0; k < dim; ++k) g[k] = amplitude_ * dg(b, k);
      break;
    }
  }
  return g;
}

Mat ScalarPotential::hessian(const Vec& y, int dim) const noexcept {
  Mat h{};
  switch (kind_) {
    case Kind::zero:
    case Kind::constant: break;
    case Kind::harmonic:
      for (int k = 0; k < dim; ++k) h[k][k] = amplitude_ * amplitude_;
      break;
    case Kind::gaussian: {
      const Bump b = bump(y, center_, width_, dim);
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) h[k][l] = amplitude_ * ddg(b, k, l);
      break;
    }
  }
  return h;
}

std::string ScalarPotential::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::zero: os << "zero"; break;
    case Kind::constant: os << "constant(" << base_ << ")"; break;
    case Kind::harmonic:
      os << "harmonic(offset=" << base_ << ", omega=" << amplitude_ << ", center=(" << center_[0]
         << "," << center_[1] << "))";
      break;
    case Kind::gaussian:
      os << "gaussian(base=" << base_ << ", amplitude=" << amplitude_ << ", width=" << width_
         << ", center=(" << center_[0] << "," << center_[1] << "))";
      break;
  }
  return os.str();
}

VectorPotential VectorPotential::zero() { return {}; }

VectorPotential VectorPotential::constant(const Vec& value) {
  VectorPotential a;
  a.kind_ = Kind::constant;
  a.offset_ = value;
  return a;
}

VectorPotential VectorPotential::uniform_field(double b, bool landau_gauge, const Vec& center) {
  VectorPotential a;
  a.kind_ = Kind::uniform_field;
  a.strength_ = b;
  a.landau_ = landau_gauge;
  a.center_ = center;
  return a;
}

VectorPotential VectorPotential::gaussian_vortex(double amplitude, double width, const Vec& center) {
  if (!(width > 0.0)) throw Error(ErrorCategory::config, "gaussian width must be positive");
  VectorPotential a;
  a.kind_ = Kind::gaussian_vortex;
  a.strength_ = amplitude;
  a.width_ = width;
  a.center_ = center;
  return a;
}

VectorPotential VectorPotential::gaussian_gradient(double amplitude, double width,
                                                   const Vec& center) {
  if (!(width > 0.0)) throw Error(ErrorCategory::config, "gaussian width must be positive");
  VectorPotential a;
  a.kind_ = Kind::gaussian_gradient;
  a.strength_ = amplitude;
  a.width_ = width;
  a.center_ = center;
  return a;
}

Vec VectorPotential::value(const Vec& y, int dim) const noexcept {
  Vec a{};
  switch (kind_) {
    case Kind::zero: break;
    case Kind::constant:
      for (int k = 0; k < dim; ++k) a[k] = offset_[k];
      break;
    case Kind::uniform_field: {
      if (dim < 2) break;
      const double d1 = y[0] - center_[0];
      const double d2 = y[1] - center_[1];
      if (landau_) {
        a[0] = -strength_ * d2;
      } else {
        a[0] = -0.5 * strength_ * d2;
        a[1] = 0.5 * strength_ * d1;
      }
      break;
    }
    case Kind::gaussian_vortex: {
      if (dim < 2) break;
      const Bump b = bump(y, center_, width_, dim);
      a[0] = -strength_ * b.d[1] * b.g;
      a[1] = strength_ * b.d[0] * b.g;
      break;
    }
    case Kind::gaussian_gradient: {
      const Bump b = bump(y, center_, width_, dim);
      for (int k = 0; k < dim; ++k) a[k] = strength_ * dg(b, k);
      break;
    }
  }
  return a;
}

Mat VectorPotential::jacobian(const Vec& y, int dim) const noexcept {
  Mat j{};
  switch (kind_) {
    case Kind::zero:
    case Kind::constant: break;
    case Kind::uniform_field:
      if (dim < 2) break;
      if (landau_) {
        j[0][1] = -strength_;
      } else {
        j[0][1] = -0.5 * strength_;
        j[1][0] = 0.5 * strength_;
      }
      break;
    case Kind::gaussian_vortex: {
      if (dim < 2) break;
      const Bump b = bump(y, center_, width_, dim);
      for (int k = 0; k < 2; ++k) {
        j[0][k] = -strength_ * (delta(k, 1) * b.g + b.d[1] * dg(b, k));
        j[1][k] = strength_ * (delta(k, 0) * b.g + b.d[0] * dg(b, k));
      }
      break;
    }
    case Kind::gaussian_gradient: {
      const Bump b = bump(y, center_, width_, dim);
      for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) j[i][k] = strength_ * ddg(b, i, k);
      break;
    }
  }
  return j;
}

double VectorPotential::divergence(const Vec& y, int dim) const noexcept {
  const Mat j = jacobian(y, dim);
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += j[k][k];
  return s;
}

Mat VectorPotential::hessian(int component, const Vec& y, int dim) const noexcept {
  Mat h{};
  switch (kind_) {
    case Kind::zero:
    case Kind::constant:
    case Kind::uniform_field: break;
    case Kind::gaussian_vortex: {
      if (dim < 2) break;
      const Bump b = bump(y, center_, width_, dim);
      // A_0 = -s d1 g, A_1 = s d0 g
      const int other = component == 0 ? 1 : 0;
      const double sign = component == 0 ? -1.0 : 1.0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          h[k][l] = sign * strength_ *
                    (delta(k, other) * dg(b, l) + delta(l, other) * dg(b, k) + b.d[other] * ddg(b, k, l));
      break;
    }
    case Kind::gaussian_gradient: {
      const Bump b = bump(y, center_, width_, dim);
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) h[k][l] = strength_ * dddg(b, component, k, l);
      break;
    }
  }
  return h;
}

std::string VectorPotential::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::zero: os << "zero"; break;
    case Kind::constant: os << "constant(" << offset_[0] << "," << offset_[1] << ")"; break;
    case Kind::uniform_field:
      os << "uniform_field(b=" << strength_ << ", gauge=" << (landau_ ? "landau" : "symmetric")
         << ", center=(" << center_[0] << "," << center_[1] << "))";
      break;
    case Kind::gaussian_vortex:
      os << "gaussian_vortex(amplitude=" << strength_ << ", width=" << width_ << ", center=("
         << center_[0] << "," << center_[1] << "))";
      break;
    case Kind::gaussian_gradient:
      os << "gaussian_gradient(amplitude=" << strength_ << ", width=" << width_ << ", center=("
         << center_[0] << "," << center_[1] << "))";
      break;
  }
  return os.str();
}

VectorPotential VectorPotential::negated() const noexcept {
  VectorPotential a = *this;
  a.strength_ = -strength_;
  for (auto& v : a.offset_) v = -v;
  return a;
}

void PotentialSet::validate(double epsilon, const SpectralGrid& grid) const {
  if (grid.dim() != dim) throw Error(ErrorCategory::dimension, "potentials and grid disagree on dimension");
  // Both kinds with a minimum have it either at the center (harmonic, wells)
  // or at the far field (bumps); checking the sampled box covers both.
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vec y = grid.point(i);
    for (int k = 0; k < dim; ++k) y[k] *= epsilon;
    if (!(V.value(y, dim) > 0.0))
      throw Error(ErrorCategory::config, "V must be positive on the truncated domain");
    if (nonlocal_enabled() && !(Phi.value(y, dim) > 0.0))
      throw Error(ErrorCategory::config, "Phi must be positive on the truncated domain");
  }
  if (nonlocal_enabled()) {
    const Vec g = Phi.gradient(Vec{}, dim);
    for (int k = 0; k < dim; ++k)
      if (std::abs(g[k]) > 1e-14) throw Error(ErrorCategory::config, "Phi must have zero gradient at the origin");
  }
}

double vector_potential_c2_norm(const VectorPotential& A, int dim, const Vec& lo, const Vec& hi,
                                int samples_per_axis) {
  double best = 0.0;
  const int n1 = samples_per_axis;
  const int n2 = dim > 1 ? samples_per_axis : 1;
  for (int a = 0; a < n1; ++a) {
    for (int b = 0; b < n2; ++b) {
      Vec y{};
      y[0] = lo[0] + (hi[0] - lo[0]) * a / std::max(1, n1 - 1);
      if (dim > 1) y[1] = lo[1] + (hi[1] - lo[1]) * b / std::max(1, n2 - 1);
      const Vec v = A.value(y, dim);
      const Mat j = A.jacobian(y, dim);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        s0 += v[i] * v[i];
        const Mat h = A.hessian(i, y, dim);
        for (int k = 0; k < dim; ++k) {
          s1 += j[i][k] * j[i][k];
          for (int l = 0; l < dim; ++l) s2 += h[k][l] * h[k][l];
        }
      }
      best = std::max(best, std::sqrt(s0) + std::sqrt(s1) + std::sqrt(s2));
    }
  }
  return best;
}

}  // namespace solitondyn
