#include "solitondyn/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

#include "solitondyn/errors.hpp"

namespace solitondyn {

namespace {

void require_same_grid(const SpectralGrid& a, const SpectralGrid& b) {
  if (!a.same_as(b)) throw Error(ErrorCategory::dimension, "fields live on different grids");
}

void require_size(const SpectralGrid& grid, std::size_t size) {
  if (size != grid.size()) throw Error(ErrorCategory::dimension, "sample count does not match grid");
}

}  // namespace

SpectralGrid::SpectralGrid(int dim, double extent, int points, std::size_t max_points)
    : dim_(dim), extent_(extent), points_(points) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCategory::dimension, "grid dimension must be 1 or 2");
  if (!(extent > 0.0) || !std::isfinite(extent))
    throw Error(ErrorCategory::dimension, "grid extent must be positive");
  if (points < 2 || points % 2 != 0)
    throw Error(ErrorCategory::dimension, "points per axis must be a positive even integer");
  size_ = 1;
  for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(points);
  if (size_ > max_points) {
    std::ostringstream os;
    os << "grid of " << size_ << " points exceeds the memory budget of " << max_points;
    throw Error(ErrorCategory::dimension, os.str());
  }
  spacing_ = extent / points;
  cell_volume_ = std::pow(spacing_, dim);
  wavenumbers_.resize(static_cast<std::size_t>(points));
  derivative_wavenumbers_.resize(static_cast<std::size_t>(points));
  const double dk = 2.0 * std::numbers::pi / extent;
  for (int i = 0; i < points; ++i) {
    const int k = i < points / 2 ? i : i - points;
    wavenumbers_[static_cast<std::size_t>(i)] = dk * k;
    derivative_wavenumbers_[static_cast<std::size_t>(i)] = (i == points / 2) ? 0.0 : dk * k;
  }
  auto tables = std::make_shared<FlatTables>();
  tables->k_squared.assign(size_, 0.0);
  for (int d = 0; d < dim; ++d) {
    tables->k_axis[static_cast<std::size_t>(d)].resize(size_);
    tables->k_full_axis[static_cast<std::size_t>(d)].resize(size_);
    tables->x_axis[static_cast<std::size_t>(d)].resize(size_);
  }
  for (std::size_t flat = 0; flat < size_; ++flat) {
    const auto idx = multi_index(flat);
    for (int d = 0; d < dim; ++d) {
      const auto ud = static_cast<std::size_t>(d);
      const auto q = static_cast<std::size_t>(idx[ud]);
      tables->k_axis[ud][flat] = derivative_wavenumbers_[q];
      tables->k_full_axis[ud][flat] = wavenumbers_[q];
      tables->x_axis[ud][flat] = coordinate(idx[ud]);
      tables->k_squared[flat] += wavenumbers_[q] * wavenumbers_[q];
    }
  }
  tables_ = std::move(tables);
}

SpectralGrid SpectralGrid::with_spacing(int dim, double spacing, int points) {
  return SpectralGrid(dim, spacing * points, points);
}

double SpectralGrid::max_wavenumber() const noexcept { return std::numbers::pi / spacing_; }

std::array<int, kMaxDim> SpectralGrid::multi_index(std::size_t flat) const noexcept {
  std::array<int, kMaxDim> idx{};
  for (int d = dim_ - 1; d >= 0; --d) {
    idx[static_cast<std::size_t>(d)] = static_cast<int>(flat % static_cast<std::size_t>(points_));
    flat /= static_cast<std::size_t>(points_);
  }
  return idx;
}

Vec SpectralGrid::point(std::size_t flat) const noexcept {
  Vec x{};
  for (int d = 0; d < dim_; ++d) x[static_cast<std::size_t>(d)] = x_axis(flat, d);
  return x;
}

bool SpectralGrid::same_as(const SpectralGrid& other) const noexcept {
  return dim_ == other.dim_ && points_ == other.points_ &&
         std::abs(extent_ - other.extent_) <= 1e-12 * extent_;
}

VectorField::VectorField(const SpectralGrid& grid, int components) : grid_(grid) {
  if (components < 1) throw Error(ErrorCategory::dimension, "a field needs at least one component");
  data_.assign(static_cast<std::size_t>(components), ComplexArray(grid.size()));
}

VectorField::VectorField(const SpectralGrid& grid, std::vector<ComplexArray> components)
    : grid_(grid), data_(std::move(components)) {
  if (data_.empty()) throw Error(ErrorCategory::dimension, "a field needs at least one component");
  for (const auto& c : data_) require_size(grid_, c.size());
}

VectorField VectorField::from_real(const SpectralGrid& grid, const std::vector<RealArray>& components) {
  std::vector<ComplexArray> data;
  data.reserve(components.size());
  for (const auto& c : components) data.emplace_back(c.begin(), c.end());
  return VectorField(grid, std::move(data));
}

// FFTW planning is not thread-safe; plans are made once per shape and reused
// through the new-array execute interface, which is.
namespace {

struct PlanCache {
  std::mutex mutex;
  std::map<std::tuple<int, int, int, bool>, fftw_plan> plans;

  fftw_plan get(int dim, int n, int sign, bool in_place) {
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_tuple(dim, n, sign, in_place);
    if (auto it = plans.find(key); it != plans.end()) return it->second;
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    auto* in = fftw_alloc_complex(total);
    auto* out = in_place ? in : fftw_alloc_complex(total);
    std::array<int, kMaxDim> dims{};
    for (int d = 0; d < dim; ++d) dims[static_cast<std::size_t>(d)] = n;
    fftw_plan plan = fftw_plan_dft(dim, dims.data(), in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    if (!in_place) fftw_free(out);
    plans.emplace(key, plan);
    return plan;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

Fft::Fft(const SpectralGrid& grid)
    : forward_plan_(plan_cache().get(grid.dim(), grid.points(), FFTW_FORWARD, false)),
      inverse_plan_(plan_cache().get(grid.dim(), grid.points(), FFTW_BACKWARD, false)),
      forward_in_place_(plan_cache().get(grid.dim(), grid.points(), FFTW_FORWARD, true)),
      inverse_in_place_(plan_cache().get(grid.dim(), grid.points(), FFTW_BACKWARD, true)),
      size_(grid.size()) {}

void Fft::forward(const Complex* in, Complex* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(in == out ? forward_in_place_ : forward_plan_),
                   reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

void Fft::inverse(const Complex* in, Complex* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(in == out ? inverse_in_place_ : inverse_plan_),
                   reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  const double scale = 1.0 / static_cast<double>(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] *= scale;
}

ComplexArray Fft::forward(const ComplexArray& in) const {
  ComplexArray out(in.size());
  forward(in.data(), out.data());
  return out;
}

ComplexArray Fft::inverse(const ComplexArray& in) const {
  ComplexArray out(in.size());
  inverse(in.data(), out.data());
  return out;
}

std::string fft_backend_version() { return fftw_version; }

std::vector<ComplexArray> gradient(const SpectralGrid& grid, const ComplexArray& f) {
  require_size(grid, f.size());
  const Fft fft(grid);
  const ComplexArray fh = fft.forward(f);
  std::vector<ComplexArray> out;
  ComplexArray work(grid.size());
  for (int axis = 0; axis < grid.dim(); ++axis) {
    for (std::size_t i = 0; i < grid.size(); ++i) work[i] = Complex(0.0, grid.k_axis(i, axis)) * fh[i];
    out.push_back(fft.inverse(work));
  }
  return out;
}

std::vector<std::vector<ComplexArray>> gradient(const VectorField& f) {
  std::vector<std::vector<ComplexArray>> out;
  for (int j = 0; j < f.components(); ++j) out.push_back(gradient(f.grid(), f[j]));
  return out;
}

ComplexArray laplacian(const SpectralGrid& grid, const ComplexArray& f) {
  require_size(grid, f.size());
  const Fft fft(grid);
  ComplexArray fh = fft.forward(f);
  for (std::size_t i = 0; i < grid.size(); ++i) fh[i] *= -grid.k_squared(i);
  return fft.inverse(fh);
}

ComplexArray divergence(const SpectralGrid& grid, const std::vector<ComplexArray>& v) {
  if (static_cast<int>(v.size()) != grid.dim())
    throw Error(ErrorCategory::dimension, "divergence needs one component per axis");
  const Fft fft(grid);
  ComplexArray acc(grid.size());
  for (int axis = 0; axis < grid.dim(); ++axis) {
    require_size(grid, v[static_cast<std::size_t>(axis)].size());
    const ComplexArray vh = fft.forward(v[static_cast<std::size_t>(axis)]);
    for (std::size_t i = 0; i < grid.size(); ++i) acc[i] += Complex(0.0, grid.k_axis(i, axis)) * vh[i];
  }
  return fft.inverse(acc);
}

Complex l2_inner(const SpectralGrid& grid, const ComplexArray& f, const ComplexArray& g) {
  require_size(grid, f.size());
  require_size(grid, g.size());
  Complex s{};
  for (std::size_t i = 0; i < f.size(); ++i) s += std::conj(f[i]) * g[i];
  return s * grid.cell_volume();
}

Complex l2_inner(const VectorField& f, const VectorField& g) {
  require_same_grid(f.grid(), g.grid());
  if (f.components() != g.components())
    throw Error(ErrorCategory::dimension, "component counts differ");
  Complex s{};
  for (int j = 0; j < f.components(); ++j) s += l2_inner(f.grid(), f[j], g[j]);
  return s;
}

double l2_norm_sq(const SpectralGrid& grid, const ComplexArray& f) {
  require_size(grid, f.size());
  double s = 0.0;
  for (const auto& v : f) s += std::norm(v);
  return s * grid.cell_volume();
}

double l2_norm_sq(const SpectralGrid& grid, const RealArray& f) {
  require_size(grid, f.size());
  double s = 0.0;
  for (double v : f) s += v * v;
  return s * grid.cell_volume();
}

double integrate(const SpectralGrid& grid, const RealArray& f) {
  require_size(grid, f.size());
  double s = 0.0;
  for (double v : f) s += v;
  return s * grid.cell_volume();
}

Complex h1_inner(const SpectralGrid& grid, const ComplexArray& f, const ComplexArray& g) {
  require_size(grid, f.size());
  require_size(grid, g.size());
  const Fft fft(grid);
  const ComplexArray fh = fft.forward(f);
  const ComplexArray gh = fft.forward(g);
  Complex s{};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double w = 1.0;
    for (int axis = 0; axis < grid.dim(); ++axis) {
      const double k = grid.k_axis(i, axis);
      w += k * k;
    }
    s += w * std::conj(fh[i]) * gh[i];
  }
  return s * grid.cell_volume() / static_cast<double>(grid.size());
}

double h1_norm_sq(const SpectralGrid& grid, const ComplexArray& f) {
  return h1_inner(grid, f, f).real();
}

double h1_norm_sq(const VectorField& f) {
  double s = 0.0;
  for (int j = 0; j < f.components(); ++j) s += h1_norm_sq(f.grid(), f[j]);
  return s;
}

// Physical index i holds x_i = -L/2 + i h. A plain circular convolution of
// the sample arrays pairs x_a + x_b = x_{a+b} - L/2, so the result is read
// back with an offset of n/2 per axis.
ComplexArray convolution_kernel(const SpectralGrid& grid, const RealArray& a) {
  require_size(grid, a.size());
  const Fft fft(grid);
  ComplexArray ac(a.begin(), a.end());
  ComplexArray ah = fft.forward(ac);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto idx = grid.multi_index(i);
    int parity = 0;
    for (int d = 0; d < grid.dim(); ++d) parity += idx[static_cast<std::size_t>(d)];
    // shifting by n/2 in index space multiplies mode q by (-1)^q
    if (parity % 2 != 0) ah[i] = -ah[i];
    ah[i] *= grid.cell_volume();
  }
  return ah;
}

RealArray convolve_with(const SpectralGrid& grid, const ComplexArray& kernel_hat, const RealArray& b) {
  require_size(grid, b.size());
  require_size(grid, kernel_hat.size());
  const Fft fft(grid);
  ComplexArray bc(b.begin(), b.end());
  ComplexArray bh = fft.forward(bc);
  for (std::size_t i = 0; i < grid.size(); ++i) bh[i] *= kernel_hat[i];
  const ComplexArray c = fft.inverse(bh);
  RealArray out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = c[i].real();
  return out;
}

RealArray convolve_periodic(const SpectralGrid& grid, const RealArray& a, const RealArray& b) {
  return convolve_with(grid, convolution_kernel(grid, a), b);
}

ComplexArray fourier_translate(const SpectralGrid& grid, const ComplexArray& f, const Vec& shift) {
  require_size(grid, f.size());
  const Fft fft(grid);
  ComplexArray fh = fft.forward(f);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double phase = 0.0;
    for (int d = 0; d < grid.dim(); ++d) phase += grid.k_full_axis(i, d) * shift[static_cast<std::size_t>(d)];
    fh[i] *= std::polar(1.0, -phase);
  }
  return fft.inverse(fh);
}

RealArray fourier_translate(const SpectralGrid& grid, const RealArray& f, const Vec& shift) {
  const ComplexArray c = fourier_translate(grid, ComplexArray(f.begin(), f.end()), shift);
  RealArray out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

namespace {

template <typename T>
std::vector<T> embed_impl(const SpectralGrid& from, const std::vector<T>& f, const SpectralGrid& to) {
  require_size(from, f.size());
  if (from.dim() != to.dim() || std::abs(from.spacing() - to.spacing()) > 1e-12 * from.spacing())
    throw Error(ErrorCategory::dimension, "embedding needs grids of equal dimension and spacing");
  const int offset = (to.points() - from.points()) / 2;
  std::vector<T> out(to.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    const auto idx = from.multi_index(i);
    std::size_t flat = 0;
    bool inside = true;
    for (int d = 0; d < from.dim(); ++d) {
      const int t = idx[static_cast<std::size_t>(d)] + offset;
      if (t < 0 || t >= to.points()) {
        inside = false;
        break;
      }
      flat = flat * static_cast<std::size_t>(to.points()) + static_cast<std::size_t>(t);
    }
    if (inside) out[flat] = f[i];
  }
  return out;
}

}  // namespace

ComplexArray embed(const SpectralGrid& from, const ComplexArray& f, const SpectralGrid& to) {
  return embed_impl(from, f, to);
}

RealArray embed(const SpectralGrid& from, const RealArray& f, const SpectralGrid& to) {
  return embed_impl(from, f, to);
}

double max_abs(const ComplexArray& f) {
  double m = 0.0;
  for (const auto& v : f) m = std::max(m, std::abs(v));
  return m;
}

double max_abs(const RealArray& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace solitondyn
