#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace solitondyn {

inline constexpr int kMaxDim = 2;

using Complex = std::complex<double>;
using RealArray = std::vector<double>;
using ComplexArray = std::vector<Complex>;
using Vec = std::array<double, kMaxDim>;
using Mat = std::array<Vec, kMaxDim>;

/// Periodic box [-L/2, L/2)^N sampled with n points per axis.
///
/// Samples are stored row-major with axis 0 slowest. Grid point i on an axis
/// sits at -L/2 + i*h, so the origin is index n/2.
class SpectralGrid {
 public:
  static constexpr std::size_t kDefaultMaxPoints = std::size_t{1} << 24;

  SpectralGrid(int dim, double extent, int points, std::size_t max_points = kDefaultMaxPoints);

  /// Grid with L = n*h for a prescribed spacing.
  static SpectralGrid with_spacing(int dim, double spacing, int points);

  int dim() const noexcept { return dim_; }
  double extent() const noexcept { return extent_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return size_; }
  double cell_volume() const noexcept { return cell_volume_; }

  /// Angular wavenumbers 2*pi*k/L in FFT order; the Nyquist entry is -pi/h.
  const RealArray& wavenumbers() const noexcept { return wavenumbers_; }
  /// Same as wavenumbers() with the Nyquist entry zeroed, used for odd derivatives.
  const RealArray& derivative_wavenumbers() const noexcept { return derivative_wavenumbers_; }
  double max_wavenumber() const noexcept;

  double coordinate(int i) const noexcept { return -0.5 * extent_ + i * spacing_; }
  std::array<int, kMaxDim> multi_index(std::size_t flat) const noexcept;
  Vec point(std::size_t flat) const noexcept;

  /// |k|^2 at a flat Fourier index (full wavenumbers).
  double k_squared(std::size_t flat) const noexcept { return tables_->k_squared[flat]; }
  /// Derivative wavenumber along an axis at a flat Fourier index.
  double k_axis(std::size_t flat, int axis) const noexcept {
    return tables_->k_axis[static_cast<std::size_t>(axis)][flat];
  }
  /// Full (Nyquist-signed) wavenumber along an axis at a flat Fourier index.
  double k_full_axis(std::size_t flat, int axis) const noexcept {
    return tables_->k_full_axis[static_cast<std::size_t>(axis)][flat];
  }
  /// Coordinate along an axis at a flat sample index.
  double x_axis(std::size_t flat, int axis) const noexcept {
    return tables_->x_axis[static_cast<std::size_t>(axis)][flat];
  }

  bool same_as(const SpectralGrid& other) const noexcept;

 private:
  int dim_;
  double extent_;
  int points_;
  double spacing_;
  std::size_t size_;
  double cell_volume_;
  RealArray wavenumbers_;
  RealArray derivative_wavenumbers_;

  struct FlatTables {
    RealArray k_squared;
    std::array<RealArray, kMaxDim> k_axis;
    std::array<RealArray, kMaxDim> k_full_axis;
    std::array<RealArray, kMaxDim> x_axis;
  };
  std::shared_ptr<const FlatTables> tables_;
};

/// m complex components sampled on a grid.
class VectorField {
 public:
  VectorField(const SpectralGrid& grid, int components);
  VectorField(const SpectralGrid& grid, std::vector<ComplexArray> components);

  const SpectralGrid& grid() const noexcept { return grid_; }
  int components() const noexcept { return static_cast<int>(data_.size()); }

  ComplexArray& operator[](int j) { return data_[static_cast<std::size_t>(j)]; }
  const ComplexArray& operator[](int j) const { return data_[static_cast<std::size_t>(j)]; }

  static VectorField from_real(const SpectralGrid& grid, const std::vector<RealArray>& components);

 private:
  SpectralGrid grid_;
  std::vector<ComplexArray> data_;
};

/// Thin handle over cached FFTW plans for one grid shape. Cheap to copy.
/// Transforms may run in place (in == out).
class Fft {
 public:
  explicit Fft(const SpectralGrid& grid);

  void forward(const Complex* in, Complex* out) const;
  /// Normalized inverse (divides by the point count).
  void inverse(const Complex* in, Complex* out) const;

  ComplexArray forward(const ComplexArray& in) const;
  ComplexArray inverse(const ComplexArray& in) const;

 private:
  void* forward_plan_;
  void* inverse_plan_;
  void* forward_in_place_;
  void* inverse_in_place_;
  std::size_t size_;
};

std::string fft_backend_version();

// Spectral calculus and quadrature.

/// result[j][axis] = d f_j / d x_axis.
std::vector<std::vector<ComplexArray>> gradient(const VectorField& f);
std::vector<ComplexArray> gradient(const SpectralGrid& grid, const ComplexArray& f);
ComplexArray laplacian(const SpectralGrid& grid, const ComplexArray& f);
ComplexArray divergence(const SpectralGrid& grid, const std::vector<ComplexArray>& v);

Complex l2_inner(const VectorField& f, const VectorField& g);
Complex l2_inner(const SpectralGrid& grid, const ComplexArray& f, const ComplexArray& g);
double l2_norm_sq(const SpectralGrid& grid, const ComplexArray& f);
double l2_norm_sq(const SpectralGrid& grid, const RealArray& f);
double integrate(const SpectralGrid& grid, const RealArray& f);

double h1_norm_sq(const VectorField& f);
double h1_norm_sq(const SpectralGrid& grid, const ComplexArray& f);
/// <f, g>_{H^1} = int conj(f) g + conj(grad f).grad g.
Complex h1_inner(const SpectralGrid& grid, const ComplexArray& f, const ComplexArray& g);

/// (a*b)(x) = h^N sum_y a(x - y) b(y) with x - y wrapped into the box.
RealArray convolve_periodic(const SpectralGrid& grid, const RealArray& a, const RealArray& b);
/// Same with a precomputed transform of the kernel from convolution_kernel().
RealArray convolve_with(const SpectralGrid& grid, const ComplexArray& kernel_hat,
                        const RealArray& b);
ComplexArray convolution_kernel(const SpectralGrid& grid, const RealArray& a);

/// Band-limited translation: returns f(x - shift).
ComplexArray fourier_translate(const SpectralGrid& grid, const ComplexArray& f, const Vec& shift);
RealArray fourier_translate(const SpectralGrid& grid, const RealArray& f, const Vec& shift);

/// Copies a field onto a grid with the same spacing, keeping the origin fixed.
/// Samples outside the target are dropped, new samples are zero.
ComplexArray embed(const SpectralGrid& from, const ComplexArray& f, const SpectralGrid& to);
RealArray embed(const SpectralGrid& from, const RealArray& f, const SpectralGrid& to);

double max_abs(const ComplexArray& f);
double max_abs(const RealArray& f);

}  // namespace solitondyn
