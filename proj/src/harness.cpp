#include "solitondyn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "solitondyn/errors.hpp"
#include "solitondyn/io.hpp"
#include "solitondyn/version.hpp"

namespace solitondyn {

namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kRunFormat = "solitondyn-run/1";
constexpr const char* kMarginPolicy =
    "L = n h >= 4 (max_t |x_eps(t)|_inf + R + margin) with h fixed, where R is the radius beyond which the "
    "profile is below margin_level of its peak; the datum is checked against margin_level on the outer quarter "
    "of the box, and a run stops with domain-exit when the center of mass leaves |x_d| <= 3L/8";

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_short(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end == text.c_str() || *end != '\0')
    throw Error(ErrorCategory::config, "key '" + key + "': '" + text + "' is not a number");
  return v;
}

long parse_long(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end == text.c_str() || *end != '\0')
    throw Error(ErrorCategory::config, "key '" + key + "': '" + text + "' is not an integer");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (text.find_first_not_of(" \t") == std::string::npos) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(key, item));
  return out;
}

Matrix parse_matrix(const std::string& key, const std::string& text) {
  Matrix out;
  for (const auto& row : split(text, ';')) out.push_back(parse_list(key, row));
  return out;
}

Vec parse_vec(const std::string& key, const std::string& text) {
  const auto v = parse_list(key, text);
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    throw Error(ErrorCategory::config, "key '" + key + "' needs one or two components");
  Vec out{};
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = v[d];
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

std::string vec_text(const Vec& v, int dim) {
  return list_text(std::vector<double>(v.begin(), v.begin() + dim));
}

std::string matrix_text(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "; " : "") + list_text(m[i]);
  return out;
}

class Section {
 public:
  Section(const pt::ptree& root, const std::string& name, std::set<std::string> known) : name_(name) {
    if (const auto child = root.get_child_optional(name)) {
      for (const auto& [key, value] : *child) {
        if (!known.count(key)) throw Error(ErrorCategory::config, "unknown key '" + key + "' in [" + name + "]");
        values_[key] = value.get_value<std::string>();
      }
    }
  }

  std::optional<std::string> text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  void get(const std::string& key, double& out) const {
    if (auto t = text(key)) out = parse_double(qualified(key), *t);
  }
  void get(const std::string& key, int& out) const {
    if (auto t = text(key)) out = static_cast<int>(parse_long(qualified(key), *t));
  }
  void get(const std::string& key, std::size_t& out) const {
    if (auto t = text(key)) {
      const long v = parse_long(qualified(key), *t);
      if (v < 0) throw Error(ErrorCategory::config, "key '" + qualified(key) + "' must be nonnegative");
      out = static_cast<std::size_t>(v);
    }
  }
  void get(const std::string& key, std::string& out) const {
    if (auto t = text(key)) out = *t;
  }
  void get(const std::string& key, std::vector<double>& out) const {
    if (auto t = text(key)) out = parse_list(qualified(key), *t);
  }
  void get(const std::string& key, Matrix& out) const {
    if (auto t = text(key)) out = parse_matrix(qualified(key), *t);
  }
  void get(const std::string& key, Vec& out) const {
    if (auto t = text(key)) out = parse_vec(qualified(key), *t);
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

const char* scalar_kind(ScalarPotential::Kind k) {
  switch (k) {
    case ScalarPotential::Kind::zero: return "zero";
    case ScalarPotential::Kind::constant: return "constant";
    case ScalarPotential::Kind::harmonic: return "harmonic";
    case ScalarPotential::Kind::gaussian: return "gaussian";
  }
  return "zero";
}

const char* vector_kind(VectorPotential::Kind k) {
  switch (k) {
    case VectorPotential::Kind::zero: return "zero";
    case VectorPotential::Kind::constant: return "constant";
    case VectorPotential::Kind::uniform_field: return "uniform_field";
    case VectorPotential::Kind::gaussian_vortex: return "gaussian_vortex";
    case VectorPotential::Kind::gaussian_gradient: return "gaussian_gradient";
  }
  return "zero";
}

// Harmonic potentials store omega in the amplitude slot.
ScalarPotential read_scalar(const Section& s, const std::string& prefix, const ScalarPotential& current) {
  std::string kind = scalar_kind(current.kind());
  double base = current.base(), amplitude = current.amplitude(), width = current.width();
  Vec center = current.center();
  s.get(prefix, kind);
  s.get(prefix + "_base", base);
  s.get(prefix + "_amplitude", amplitude);
  s.get(prefix + "_width", width);
  s.get(prefix + "_omega", amplitude);
  s.get(prefix + "_center", center);
  if (kind == "zero") return ScalarPotential::zero();
  if (kind == "constant") return ScalarPotential::constant(base);
  if (kind == "harmonic") return ScalarPotential::harmonic(base, amplitude, center);
  if (kind == "gaussian") return ScalarPotential::gaussian(base, amplitude, width, center);
  throw Error(ErrorCategory::config, "unknown potential kind '" + kind + "' for " + prefix);
}

VectorPotential read_vector(const Section& s, const VectorPotential& current) {
  std::string kind = vector_kind(current.kind());
  double strength = current.strength(), width = current.width();
  Vec center = current.center(), value = current.offset();
  std::string gauge = current.landau_gauge() ? "landau" : "symmetric";
  s.get("A", kind);
  s.get("A_strength", strength);
  s.get("A_width", width);
  s.get("A_center", center);
  s.get("A_value", value);
  s.get("A_gauge", gauge);
  if (gauge != "landau" && gauge != "symmetric") throw Error(ErrorCategory::config, "A_gauge is landau or symmetric");
  if (kind == "zero") return VectorPotential::zero();
  if (kind == "constant") return VectorPotential::constant(value);
  if (kind == "uniform_field") return VectorPotential::uniform_field(strength, gauge == "landau", center);
  if (kind == "gaussian_vortex") return VectorPotential::gaussian_vortex(strength, width, center);
  if (kind == "gaussian_gradient") return VectorPotential::gaussian_gradient(strength, width, center);
  throw Error(ErrorCategory::config, "unknown vector potential kind '" + kind + "'");
}

void write_scalar(std::ostream& os, const std::string& prefix, const ScalarPotential& v, int dim) {
  os << prefix << " = " << scalar_kind(v.kind()) << '\n';
  switch (v.kind()) {
    case ScalarPotential::Kind::zero: break;
    case ScalarPotential::Kind::constant: os << prefix << "_base = " << fmt(v.base()) << '\n'; break;
    case ScalarPotential::Kind::harmonic:
      os << prefix << "_base = " << fmt(v.base()) << '\n'
         << prefix << "_omega = " << fmt(v.amplitude()) << '\n'
         << prefix << "_center = " << vec_text(v.center(), dim) << '\n';
      break;
    case ScalarPotential::Kind::gaussian:
      os << prefix << "_base = " << fmt(v.base()) << '\n'
         << prefix << "_amplitude = " << fmt(v.amplitude()) << '\n'
         << prefix << "_width = " << fmt(v.width()) << '\n'
         << prefix << "_center = " << vec_text(v.center(), dim) << '\n';
      break;
  }
}

void write_vector(std::ostream& os, const VectorPotential& a, int dim) {
  os << "A = " << vector_kind(a.kind()) << '\n';
  switch (a.kind()) {
    case VectorPotential::Kind::zero: break;
    case VectorPotential::Kind::constant: os << "A_value = " << vec_text(a.offset(), dim) << '\n'; break;
    case VectorPotential::Kind::uniform_field:
      os << "A_strength = " << fmt(a.strength()) << '\n'
         << "A_gauge = " << (a.landau_gauge() ? "landau" : "symmetric") << '\n'
         << "A_center = " << vec_text(a.center(), dim) << '\n';
      break;
    case VectorPotential::Kind::gaussian_vortex:
    case VectorPotential::Kind::gaussian_gradient:
      os << "A_strength = " << fmt(a.strength()) << '\n'
         << "A_width = " << fmt(a.width()) << '\n'
         << "A_center = " << vec_text(a.center(), dim) << '\n';
      break;
  }
}

ScenarioConfig base_1d(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.dim = 1;
  c.spacing = 0.09375;
  c.ground_points = 1024;
  c.potentials.dim = 1;
  c.potentials.V = ScalarPotential::constant(1.0);
  c.params = NonlinearityParams::scalar(1.0);
  return c;
}

double norm(const Vec& v, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += v[d] * v[d];
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  if (name == "free") {
    auto c = base_1d(name);
    c.velocity = {0.3, 0.0};
    c.dt = 1e-3;
    return c;
  }
  if (name == "harmonic") {
    auto c = base_1d(name);
    c.potentials.V = ScalarPotential::harmonic(1.0, 1.0);
    c.position = {0.5, 0.0};
    return c;
  }
  if (name == "gaussian_well") {
    auto c = base_1d(name);
    c.potentials.V = ScalarPotential::gaussian(1.0, -0.5, 1.0);
    c.position = {0.5, 0.0};
    return c;
  }
  if (name == "hartree1d") {
    auto c = base_1d(name);
    c.potentials.V = ScalarPotential::harmonic(1.0, 1.0);
    c.potentials.Phi = ScalarPotential::gaussian(0.0, 1.0, 1.0);
    c.params = NonlinearityParams::scalar(1.0, 1.0, 0.5);
    c.position = {0.5, 0.0};
    return c;
  }
  if (name == "magnetic_hartree1d") {
    auto c = preset("hartree1d");
    c.name = name;
    c.potentials.A = VectorPotential::gaussian_gradient(0.3, 1.0, Vec{0.2, 0.0});
    return c;
  }
  if (name == "magnetic2d") {
    ScenarioConfig c;
    c.name = name;
    c.dim = 2;
    c.spacing = 0.1875;
    c.ground_points = 256;
    c.potentials.dim = 2;
    c.potentials.V = ScalarPotential::constant(1.0);
    c.potentials.A = VectorPotential::gaussian_vortex(0.016, 1.0, Vec{0.5, -0.3});
    c.params = NonlinearityParams::scalar(0.5);
    c.velocity = {0.0, 0.1};
    c.T0 = 0.25;
    c.dt = 0.0025;
    c.records = 10;
    c.floor_run = 3e-5;
    c.margin = 0.5;
    return c;
  }
  if (name == "coupled2" || name == "coupled2_decoupled") {
    auto c = base_1d(name);
    const double g = name == "coupled2" ? 0.1 : 0.0;
    c.params = NonlinearityParams::coupled(1.0, {1.0, 0.8}, Matrix{{0.0, g}, {g, 0.0}});
    c.potentials.V = ScalarPotential::gaussian(1.0, -0.5, 1.0);
    c.position = {0.5, 0.0};
    return c;
  }
  throw Error(ErrorCategory::config, "unknown scenario '" + name + "'");
}

std::vector<std::string> ScenarioConfig::preset_names() {
  return {"free",      "harmonic",           "gaussian_well", "hartree1d",
          "magnetic2d", "magnetic_hartree1d", "coupled2",      "coupled2_decoupled"};
}

void ScenarioConfig::validate() const {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCategory::dimension, "dimension must be 1 or 2");
  if (potentials.dim != dim) throw Error(ErrorCategory::dimension, "potentials and grid disagree on dimension");
  if (!(spacing > 0.0)) throw Error(ErrorCategory::config, "grid spacing must be positive");
  if (ground_points < 8 || ground_points % 2) throw Error(ErrorCategory::config, "ground_points must be even and >= 8");
  if (!(margin >= 0.0)) throw Error(ErrorCategory::config, "margin must be nonnegative");
  if (!(margin_level > 0.0 && margin_level < 1.0)) throw Error(ErrorCategory::config, "margin_level must lie in (0, 1)");
  params.validate(dim);
  if (!(ground_tol > 0.0)) throw Error(ErrorCategory::config, "ground_tol must be positive");
  if (epsilons.empty()) throw Error(ErrorCategory::config, "epsilon list is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw Error(ErrorCategory::config, "epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw Error(ErrorCategory::config, "epsilons must be descending");
  }
  if (!(T0 > 0.0)) throw Error(ErrorCategory::config, "T0 must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCategory::config, "dt must be positive");
  if (records < 1) throw Error(ErrorCategory::config, "records must be at least 1");
  if (!(sigma0 > 0.0)) throw Error(ErrorCategory::config, "sigma0 must be positive");
  if (!(trust_region > 0.0)) throw Error(ErrorCategory::config, "trust_region must be positive");
  if (!(floor_initial >= 0.0) || !(floor_run >= 0.0) || !(floor_center >= 0.0))
    throw Error(ErrorCategory::config, "floors must be nonnegative");
}

DiagnosticsOptions ScenarioConfig::diagnostics_options(double cutoff_radius) const {
  DiagnosticsOptions o;
  o.cutoff_radius = cutoff_radius;
  o.trust_region = trust_region;
  o.sigma0 = sigma0;
  o.floor = density_floor;
  o.inequality_slack = inequality_slack;
  return o;
}

ScenarioConfig ScenarioConfig::from_ini(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCategory::config, std::string("bad config: ") + e.what());
  }
  const std::set<std::string> sections{"grid", "potentials", "nonlinearity", "datum", "sweep", "diagnostics"};
  for (const auto& [key, child] : root) {
    if (!sections.count(key)) throw Error(ErrorCategory::config, "unknown section [" + key + "]");
    (void)child;
  }

  const Section sweep(root, "sweep", {"scenario", "epsilons", "T0", "dt", "seed"});
  std::string scenario = "free";
  sweep.get("scenario", scenario);
  ScenarioConfig c = preset(scenario);
  sweep.get("epsilons", c.epsilons);
  sweep.get("T0", c.T0);
  sweep.get("dt", c.dt);
  sweep.get("seed", c.seed);

  const Section grid(root, "grid", {"dim", "spacing", "ground_points", "margin", "margin_level", "max_points"});
  grid.get("dim", c.dim);
  grid.get("spacing", c.spacing);
  grid.get("ground_points", c.ground_points);
  grid.get("margin", c.margin);
  grid.get("margin_level", c.margin_level);
  grid.get("max_points", c.max_points);

  std::set<std::string> pkeys;
  for (const char* p : {"V", "Phi"})
    for (const char* s : {"", "_base", "_amplitude", "_width", "_omega", "_center"}) pkeys.insert(std::string(p) + s);
  for (const char* s : {"A", "A_strength", "A_width", "A_center", "A_value", "A_gauge"}) pkeys.insert(s);
  const Section pots(root, "potentials", pkeys);
  c.potentials.dim = c.dim;
  c.potentials.V = read_scalar(pots, "V", c.potentials.V);
  c.potentials.Phi = read_scalar(pots, "Phi", c.potentials.Phi);
  c.potentials.A = read_vector(pots, c.potentials.A);

  const Section nl(root, "nonlinearity", {"components", "p", "alpha", "gamma", "beta", "omega", "ground_tol"});
  nl.get("components", c.params.components);
  nl.get("p", c.params.p);
  nl.get("alpha", c.params.alpha);
  nl.get("gamma", c.params.gamma);
  nl.get("beta", c.params.beta);
  nl.get("omega", c.params.omega);
  nl.get("ground_tol", c.ground_tol);

  const Section datum(root, "datum", {"position", "velocity"});
  datum.get("position", c.position);
  datum.get("velocity", c.velocity);

  const Section diag(root, "diagnostics", {"records", "sigma0", "trust_region", "density_floor", "inequality_slack",
                                           "floor_initial", "floor_run", "floor_center"});
  diag.get("records", c.records);
  diag.get("sigma0", c.sigma0);
  diag.get("trust_region", c.trust_region);
  diag.get("density_floor", c.density_floor);
  diag.get("inequality_slack", c.inequality_slack);
  diag.get("floor_initial", c.floor_initial);
  diag.get("floor_run", c.floor_run);
  diag.get("floor_center", c.floor_center);

  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot read " + path);
  return from_ini(in);
}

std::string ScenarioConfig::to_ini() const {
  std::ostringstream os;
  os << "[sweep]\n"
     << "scenario = " << name << '\n'
     << "epsilons = " << list_text(epsilons) << '\n'
     << "T0 = " << fmt(T0) << '\n'
     << "dt = " << fmt(dt) << '\n'
     << "seed = " << seed << "\n\n"
     << "[grid]\n"
     << "dim = " << dim << '\n'
     << "spacing = " << fmt(spacing) << '\n'
     << "ground_points = " << ground_points << '\n'
     << "margin = " << fmt(margin) << '\n'
     << "margin_level = " << fmt(margin_level) << '\n'
     << "max_points = " << max_points << "\n\n"
     << "[potentials]\n";
  write_scalar(os, "V", potentials.V, dim);
  write_vector(os, potentials.A, dim);
  write_scalar(os, "Phi", potentials.Phi, dim);
  os << "\n[nonlinearity]\n"
     << "components = " << params.components << '\n'
     << "p = " << fmt(params.p) << '\n'
     << "alpha = " << list_text(params.alpha) << '\n'
     << "gamma = " << matrix_text(params.gamma) << '\n'
     << "beta = " << list_text(params.beta) << '\n'
     << "omega = " << matrix_text(params.omega) << '\n'
     << "ground_tol = " << fmt(ground_tol) << "\n\n"
     << "[datum]\n"
     << "position = " << vec_text(position, dim) << '\n'
     << "velocity = " << vec_text(velocity, dim) << "\n\n"
     << "[diagnostics]\n"
     << "records = " << records << '\n'
     << "sigma0 = " << fmt(sigma0) << '\n'
     << "trust_region = " << fmt(trust_region) << '\n'
     << "density_floor = " << fmt(density_floor) << '\n'
     << "inequality_slack = " << fmt(inequality_slack) << '\n'
     << "floor_initial = " << fmt(floor_initial) << '\n'
     << "floor_run = " << fmt(floor_run) << '\n'
     << "floor_center = " << fmt(floor_center) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// ground states and planning

GroundStateCache::Entry GroundStateCache::get(const NonlinearityParams& params, const SpectralGrid& grid, double tol) {
  const std::string key = ground_state_key(params, grid, tol);
  std::promise<Entry> promise;
  std::shared_future<Entry> future;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      future = promise.get_future().share();
      entries_.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const GroundState>(solve_canonical_ground_state(params, grid, tol)));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

std::size_t GroundStateCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

SpectralGrid ground_grid(const ScenarioConfig& config) {
  return SpectralGrid(config.dim, config.ground_points * config.spacing, config.ground_points, config.max_points);
}

int fast_size(int target) {
  for (int n = std::max(2, target);; ++n) {
    if (n % 2) continue;
    int m = n;
    for (int f : {2, 3, 5, 7})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

MemberPlan plan_member(const ScenarioConfig& config, const GroundState& r, double epsilon,
                       const MemberOverrides& overrides) {
  if (!(epsilon > 0.0)) throw Error(ErrorCategory::config, "epsilon must be positive");
  MemberPlan plan;
  plan.epsilon = epsilon;
  plan.t_final = overrides.t_final.value_or(config.T0 / epsilon);
  const double dt_max = overrides.dt.value_or(config.dt);
  plan.steps = plan.t_final > 0.0 ? static_cast<long>(std::ceil(plan.t_final / dt_max - 1e-9)) : 0;
  plan.dt = plan.steps > 0 ? plan.t_final / static_cast<double>(plan.steps) : dt_max;
  const int records = overrides.records.value_or(config.records);
  plan.observer_stride = std::max(1L, plan.steps / std::max(1, records));

  ClassicalState start{{}, config.velocity, 0.0, epsilon};
  for (int d = 0; d < config.dim; ++d) start.position[d] = config.position[d] / epsilon;
  const long stride = std::max(1L, plan.steps / 4000);
  plan.predicted = integrate_trajectory(start, config.potentials, plan.dt, plan.steps, config.params, r.masses, stride);
  for (const auto& s : plan.predicted.states)
    for (int d = 0; d < config.dim; ++d) plan.reach = std::max(plan.reach, std::abs(s.position[d]));

  const double h = overrides.spacing.value_or(config.spacing);
  const double radius = r.decay_radius(config.margin_level);
  const double needed = 4.0 * (plan.reach + radius + config.margin);
  const int n = fast_size(static_cast<int>(std::ceil(needed / h - 1e-9)));
  plan.grid = SpectralGrid(config.dim, n * h, n, config.max_points);
  plan.cutoff_radius = choose_cutoff_radius(plan.predicted, r, epsilon);
  return plan;
}

// ---------------------------------------------------------------------------
// members

MemberSummary summarize(const std::vector<DiagnosticRecord>& records, double epsilon, double ground_energy,
                        double sigma0) {
  MemberSummary s;
  s.samples = records.size();
  if (records.empty()) return s;
  const auto& first = records.front();
  const std::size_t m = first.masses.size();
  s.error_h1_sup_component.assign(m, 0.0);
  s.error_modulus_sup_component.assign(m, 0.0);
  s.mass_drift.assign(m, 0.0);
  s.min_energy_gap = first.energy_gap;
  TStarMonitor tstar;
  tstar.sigma0 = sigma0;
  const int dim = static_cast<int>(kMaxDim);
  for (const auto& r : records) {
    for (std::size_t j = 0; j < m; ++j) {
      s.error_h1_sup_component[j] = std::max(s.error_h1_sup_component[j], r.error_h1[j]);
      s.error_modulus_sup_component[j] = std::max(s.error_modulus_sup_component[j], r.error_modulus[j]);
      if (first.masses[j] > 0.0)
        s.mass_drift[j] = std::max(s.mass_drift[j], std::abs(r.masses[j] - first.masses[j]) / first.masses[j]);
    }
    Vec gap{};
    for (int d = 0; d < dim; ++d) gap[d] = r.fit_shift[d] - r.classical_position[d];
    s.center_gap_sup = std::max(s.center_gap_sup, epsilon * norm(gap, dim));
    s.omega_hat_sup = std::max(s.omega_hat_sup, r.omega_hat);
    s.omega_sup = std::max(s.omega_sup, r.omega);
    s.gamma_sup = std::max(s.gamma_sup, r.gamma_dist);
    const double e0 = std::abs(first.energy_total);
    s.energy_drift = std::max(s.energy_drift, std::abs(r.energy_total - first.energy_total) / (e0 > 0.0 ? e0 : 1.0));
    s.violations += r.inequalities.violations;
    s.min_energy_gap = std::min(s.min_energy_gap, r.energy_gap);
    s.all_valid = s.all_valid && r.decomposition_valid;
    tstar.update(r);
  }
  for (std::size_t j = 0; j < m; ++j) {
    s.error_h1_sup = std::max(s.error_h1_sup, s.error_h1_sup_component[j]);
    s.error_modulus_sup = std::max(s.error_modulus_sup, s.error_modulus_sup_component[j]);
  }
  s.omega0 = first.omega;
  s.omega_hat0 = first.omega_hat;
  const double mass = std::accumulate(first.masses.begin(), first.masses.end(), 0.0);
  s.energy_expansion0 = std::abs(first.energy_total - ground_energy - mass * first.hamiltonian);
  s.tstar = tstar.first_violation;
  s.final_time = records.back().time;
  return s;
}

MemberResult run_member(const ScenarioConfig& config, double epsilon, GroundStateCache& cache,
                        const MemberOptions& options) {
  MemberResult out;
  out.epsilon = epsilon;
  out.dim = config.dim;
  out.components = config.params.components;
  const auto start = std::chrono::steady_clock::now();
  std::shared_ptr<DiagnosticRecorder> recorder;
  try {
    const auto r0 = cache.get(config.params, ground_grid(config), config.ground_tol);
    const MemberPlan plan = plan_member(config, *r0, epsilon, options.overrides);
    out.extent = plan.grid.extent();
    out.points = plan.grid.points();
    out.dt = plan.dt;
    out.steps = plan.steps;
    out.t_final = plan.t_final;
    out.cutoff_radius = plan.cutoff_radius;

    EvolutionConfig ec(plan.grid, r0->on_grid(plan.grid));
    ec.epsilon = epsilon;
    ec.dt = plan.dt;
    ec.t_final = plan.t_final;
    ec.potentials = config.potentials;
    ec.params = config.params;
    ec.classical0 = plan.predicted.states.front();
    ec.margin_level = config.margin_level;
    ec.observer_stride = plan.observer_stride;

    auto ctx = std::make_shared<const DiagnosticsContext>(ec.ground_state, plan.grid, config.potentials,
                                                          config.params, epsilon,
                                                          config.diagnostics_options(plan.cutoff_radius));
    out.ground_energy = ctx->ground_energy;
    out.ground_masses = ec.ground_state.masses;
    recorder = std::make_shared<DiagnosticRecorder>(ctx);
    auto result = evolve(ec, {recorder->observer()});
    if (options.keep_final_state) out.final_state = std::move(result.final_state);
    out.ok = true;
  } catch (const Error& e) {
    out.error_category = std::string(category_name(e.category()));
    out.error_message = e.what();
  } catch (const std::exception& e) {
    out.error_category = "internal";
    out.error_message = e.what();
  }
  if (recorder) out.records = recorder->records();
  out.summary = summarize(out.records, epsilon, out.ground_energy, config.sigma0);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// slopes

SlopeReport fit_slopes(const std::string& name, const std::vector<double>& epsilons, const std::vector<double>& values,
                       double floor) {
  if (epsilons.size() != values.size())
    throw Error(ErrorCategory::config, "slope fit for " + name + ": epsilons and values differ in length");
  SlopeReport rep;
  rep.name = name;
  rep.epsilons = epsilons;
  rep.values = values;
  rep.floor = floor;
  rep.used.assign(values.size(), false);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool ok = epsilons[i] > 0.0 && std::isfinite(values[i]) && values[i] > 0.0 && values[i] > 10.0 * floor;
    rep.used[i] = ok;
    if (ok) pts.emplace_back(std::log(epsilons[i]), std::log(values[i]));
  }
  if (pts.size() < 3) {
    std::ostringstream os;
    os << "slope fit for " << name << " has " << pts.size() << " points above 10x the floor " << floor
       << ", needs 3";
    throw Error(ErrorCategory::insufficient_data, os.str());
  }
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCategory::insufficient_data, "slope fit for " + name + " needs distinct epsilons");
  rep.slope = sxy / sxx;
  rep.intercept = my - rep.slope * mx;
  double ss = 0.0;
  for (const auto& [x, y] : pts) {
    const double e = y - (rep.intercept + rep.slope * x);
    ss += e * e;
  }
  rep.residual = std::sqrt(ss / n);
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].second > pts[i - 1].second)) rep.monotone = false;
  return rep;
}

SlopeReport try_fit_slopes(const std::string& name, const std::vector<double>& epsilons,
                           const std::vector<double>& values, double floor) {
  try {
    return fit_slopes(name, epsilons, values, floor);
  } catch (const Error& e) {
    SlopeReport rep;
    rep.name = name;
    rep.epsilons = epsilons;
    rep.values = values;
    rep.floor = floor;
    rep.used.assign(values.size(), false);
    for (std::size_t i = 0; i < values.size(); ++i)
      rep.used[i] = std::isfinite(values[i]) && values[i] > 10.0 * floor && values[i] > 0.0;
    rep.slope = rep.intercept = rep.residual = std::numeric_limits<double>::quiet_NaN();
    rep.status = std::string(category_name(e.category()));
    return rep;
  }
}

std::vector<SlopeReport> sweep_slopes(const ScenarioConfig& config, const std::vector<MemberResult>& members) {
  std::vector<const MemberResult*> ok;
  for (const auto& m : members)
    if (m.ok) ok.push_back(&m);
  std::vector<double> eps;
  for (const auto* m : ok) eps.push_back(m->epsilon);
  auto collect = [&](auto&& get) {
    std::vector<double> v;
    for (const auto* m : ok) v.push_back(get(m->summary));
    return v;
  };
  std::vector<SlopeReport> out;
  auto add = [&](const std::string& name, double floor, auto&& get) {
    out.push_back(try_fit_slopes(name, eps, collect(get), floor));
  };
  add("energy_expansion0", config.floor_initial, [](const MemberSummary& s) { return s.energy_expansion0; });
  add("omega0", config.floor_initial, [](const MemberSummary& s) { return s.omega0; });
  add("omega_hat0", config.floor_initial, [](const MemberSummary& s) { return s.omega_hat0; });
  add("error_h1_sup", config.floor_run, [](const MemberSummary& s) { return s.error_h1_sup; });
  add("error_modulus_sup", config.floor_run, [](const MemberSummary& s) { return s.error_modulus_sup; });
  if (config.params.components > 1) {
    for (int j = 0; j < config.params.components; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const std::string tag = "_" + std::to_string(j + 1);
      add("error_h1_sup" + tag, config.floor_run, [uj](const MemberSummary& s) {
        return uj < s.error_h1_sup_component.size() ? s.error_h1_sup_component[uj] : 0.0;
      });
      add("error_modulus_sup" + tag, config.floor_run, [uj](const MemberSummary& s) {
        return uj < s.error_modulus_sup_component.size() ? s.error_modulus_sup_component[uj] : 0.0;
      });
    }
  }
  add("center_gap_sup", config.floor_center, [](const MemberSummary& s) { return s.center_gap_sup; });
  add("omega_hat_sup", config.floor_run, [](const MemberSummary& s) { return s.omega_hat_sup; });
  add("omega_sup", config.floor_run, [](const MemberSummary& s) { return s.omega_sup; });
  return out;
}

// ---------------------------------------------------------------------------
// sweeps

int worker_count() {
  if (const char* env = std::getenv("SOLITONDYN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw Error(ErrorCategory::config, std::string("SOLITONDYN_WORKERS must be a positive integer, got '") + env + "'");
  }
  std::set<std::pair<int, int>> cores;
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  int physical = 0;
  while (std::getline(info, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, line.find_last_not_of(" \t", colon - 1) + 1);
    const int value = std::atoi(line.c_str() + colon + 1);
    if (key == "physical id") physical = value;
    if (key == "core id") cores.emplace(physical, value);
  }
  if (!cores.empty()) return static_cast<int>(cores.size());
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

SweepResult run_scenario(const ScenarioConfig& config, const SweepOptions& options) {
  GroundStateCache cache;
  return run_scenario(config, cache, options);
}

SweepResult run_scenario(const ScenarioConfig& config, GroundStateCache& cache, const SweepOptions& options) {
  config.validate();
  SweepResult result;
  result.config = config;
  const std::size_t n = config.epsilons.size();
  result.members.resize(n);
  const int workers = std::max(1, std::min<int>(options.workers > 0 ? options.workers : worker_count(),
                                                static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++)
      result.members[i] = run_member(config, config.epsilons[i], cache, options.member);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& m : result.members) result.partial = result.partial || !m.ok;
  try {
    result.ground_state = cache.get(config.params, ground_grid(config), config.ground_tol);
  } catch (const Error&) {
    result.ground_state = nullptr;
  }
  result.slopes = sweep_slopes(config, result.members);
  return result;
}

// ---------------------------------------------------------------------------
// run directories

std::string csv_name(std::size_t index, double epsilon) {
  std::ostringstream os;
  os << "diagnostics_" << index << "_eps" << fmt_short(epsilon) << ".csv";
  return os.str();
}

namespace {

json member_json(const MemberResult& m, std::size_t index) {
  json g = {{"dim", m.dim}, {"extent", m.extent}, {"points", m.points}};
  return {{"index", index},
          {"epsilon", m.epsilon},
          {"status", m.ok ? "ok" : "failed"},
          {"error_category", m.error_category},
          {"error_message", m.error_message},
          {"csv", csv_name(index, m.epsilon)},
          {"components", m.components},
          {"grid", g},
          {"dt", m.dt},
          {"steps", m.steps},
          {"t_final", m.t_final},
          {"cutoff_radius", m.cutoff_radius},
          {"ground_energy", m.ground_energy},
          {"ground_masses", m.ground_masses}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

void write_run(const SweepResult& result, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir + ": " + ec.message());

  json members = json::array();
  for (std::size_t i = 0; i < result.members.size(); ++i) {
    const auto& m = result.members[i];
    members.push_back(member_json(m, i));
    std::ofstream csv(root / csv_name(i, m.epsilon), std::ios::binary);
    if (!csv) throw Error(ErrorCategory::io, "cannot write " + (root / csv_name(i, m.epsilon)).string());
    write_diagnostics_header(csv, m.dim, m.components);
    for (const auto& r : m.records) write_diagnostics_row(csv, r, m.dim);
    if (m.final_state) save_snapshot((root / ("final_" + std::to_string(i) + ".bin")).string(), *m.final_state);
  }
  const json manifest = {{"format", kRunFormat},
                         {"library_version", kVersion},
                         {"fft_backend", fft_backend_version()},
                         {"dictionary", TestDictionary::kVersion},
                         {"scenario", result.config.name},
                         {"T0", result.config.T0},
                         {"seed", result.config.seed},
                         {"epsilons", result.config.epsilons},
                         {"config_ini", result.config.to_ini()},
                         {"margin_policy", kMarginPolicy},
                         {"worker_env", "SOLITONDYN_WORKERS"},
                         {"partial", result.partial},
                         {"ground_state", result.ground_state ? "ground_state.bin" : ""},
                         {"members", members}};
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  if (result.ground_state) save_ground_state((root / "ground_state.bin").string(), *result.ground_state);
  write_text(root / "slopes.txt", format_slopes(result));
  write_text(root / "summary.txt", format_summary(result));
  write_text(root / "plots.gp", format_plots(result));
}

std::vector<DiagnosticRecord> read_diagnostics_csv(std::istream& in, int& dim, int& components) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCategory::io, "empty diagnostics file");
  const auto header = split(line, ',');
  dim = 0;
  components = 0;
  for (const auto& h : header) {
    if (h.rfind("mass", 0) == 0) ++components;
    if (h.rfind("com", 0) == 0) ++dim;
  }
  if (dim < 1 || dim > kMaxDim || components < 1) throw Error(ErrorCategory::io, "unrecognized diagnostics header");
  const std::size_t expected = 1 + components + 6 + 4 * dim + 7 + 3 * components + dim + 4;
  if (header.size() != expected) throw Error(ErrorCategory::io, "unexpected diagnostics column count");
  std::vector<DiagnosticRecord> out;
  const auto m = static_cast<std::size_t>(components);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != expected) throw Error(ErrorCategory::io, "diagnostics row has the wrong column count");
    std::size_t k = 0;
    auto next = [&] {
      const std::string& t = cells[k++];
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0') throw Error(ErrorCategory::io, "bad number '" + t + "' in diagnostics");
      return v;
    };
    auto vec = [&] {
      Vec v{};
      for (int d = 0; d < dim; ++d) v[d] = next();
      return v;
    };
    auto per = [&] {
      std::vector<double> v(m);
      for (auto& x : v) x = next();
      return v;
    };
    DiagnosticRecord r;
    r.time = next();
    r.masses = per();
    r.energy_total = next();
    r.energy_split.potential = next();
    r.energy_split.bound = next();
    r.energy_split.kinetic = next();
    r.energy_split.nonlocal = next();
    r.energy_split.total = r.energy_total;
    r.hamiltonian = next();
    r.momentum_total = vec();
    r.center_of_mass = vec();
    r.classical_position = vec();
    r.classical_velocity = vec();
    r.pi1_norm = next();
    r.pi2_norm = next();
    r.gamma_eps = next();
    r.rho_A = next();
    r.omega_hat = next();
    r.omega = next();
    r.gamma_dist = next();
    r.error_h1 = per();
    r.error_modulus = per();
    r.fit_shift = vec();
    r.fit_phases = per();
    r.decomposition_valid = next() != 0.0;
    r.magnetic_gradient_norm = next();
    r.energy_gap = next();
    r.inequalities.violations = static_cast<int>(next());
    out.push_back(std::move(r));
  }
  return out;
}

SweepResult load_run(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw Error(ErrorCategory::io, "no manifest.json in " + dir);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, std::string("bad manifest: ") + e.what());
  }
  SweepResult result;
  try {
    std::istringstream ini(manifest.at("config_ini").get<std::string>());
    result.config = ScenarioConfig::from_ini(ini);
    for (const auto& jm : manifest.at("members")) {
      MemberResult m;
      m.epsilon = jm.at("epsilon").get<double>();
      m.ok = jm.at("status").get<std::string>() == "ok";
      m.error_category = jm.at("error_category").get<std::string>();
      m.error_message = jm.at("error_message").get<std::string>();
      m.components = jm.at("components").get<int>();
      m.dim = jm.at("grid").at("dim").get<int>();
      m.extent = jm.at("grid").at("extent").get<double>();
      m.points = jm.at("grid").at("points").get<int>();
      m.dt = jm.at("dt").get<double>();
      m.steps = jm.at("steps").get<long>();
      m.t_final = jm.at("t_final").get<double>();
      m.cutoff_radius = jm.at("cutoff_radius").get<double>();
      m.ground_energy = jm.at("ground_energy").get<double>();
      m.ground_masses = jm.at("ground_masses").get<std::vector<double>>();
      std::ifstream csv(root / jm.at("csv").get<std::string>());
      if (!csv) throw Error(ErrorCategory::io, "missing " + jm.at("csv").get<std::string>());
      int dim = 0, comps = 0;
      m.records = read_diagnostics_csv(csv, dim, comps);
      m.summary = summarize(m.records, m.epsilon, m.ground_energy, result.config.sigma0);
      result.partial = result.partial || !m.ok;
      result.members.push_back(std::move(m));
    }
    const std::string gs = manifest.value("ground_state", "");
    if (!gs.empty() && fs::exists(root / gs))
      result.ground_state = std::make_shared<const GroundState>(load_ground_state((root / gs).string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, std::string("bad manifest: ") + e.what());
  }
  result.slopes = sweep_slopes(result.config, result.members);
  return result;
}

std::string format_slopes(const SweepResult& result) {
  std::ostringstream os;
  os << "# solitondyn slope report\n"
     << "scenario " << result.config.name << '\n'
     << "T0 " << fmt_short(result.config.T0) << '\n'
     << "partial " << yes_no(result.partial) << '\n';
  for (const auto& m : result.members) {
    os << "member eps " << fmt_short(m.epsilon) << " status " << (m.ok ? "ok" : "failed");
    if (!m.ok) os << " category " << m.error_category;
    os << '\n';
  }
  for (const auto& s : result.slopes) {
    os << "\nquantity " << s.name << '\n' << "  floor " << fmt_short(s.floor) << '\n';
    for (std::size_t i = 0; i < s.values.size(); ++i)
      os << "  eps " << fmt_short(s.epsilons[i]) << " value " << fmt_short(s.values[i]) << " used "
         << yes_no(s.used[i]) << '\n';
    os << "  status " << s.status << '\n';
    if (s.status == "ok")
      os << "  slope " << fmt_short(s.slope) << " intercept " << fmt_short(s.intercept) << " residual "
         << fmt_short(s.residual) << " monotone " << yes_no(s.monotone) << '\n';
  }
  return os.str();
}

std::string format_summary(const SweepResult& result) {
  std::ostringstream os;
  os << "# solitondyn run summary\n"
     << "scenario " << result.config.name << "\n"
     << "T0 " << fmt_short(result.config.T0) << " (horizon T0/eps)\n"
     << "partial " << yes_no(result.partial) << "\n\n";
  os << std::left << std::setw(10) << "eps" << std::setw(8) << "status" << std::setw(8) << "points" << std::setw(13)
     << "t_final" << std::setw(17) << "err_h1_sup" << std::setw(17) << "err_mod_sup" << std::setw(17)
     << "omega_hat_sup" << std::setw(17) << "mass_drift" << std::setw(17) << "energy_drift" << std::setw(11)
     << "violations" << "t_star\n";
  for (const auto& m : result.members) {
    const auto& s = m.summary;
    const double drift = s.mass_drift.empty() ? 0.0 : *std::max_element(s.mass_drift.begin(), s.mass_drift.end());
    os << std::setw(10) << fmt_short(m.epsilon) << std::setw(8) << (m.ok ? "ok" : m.error_category) << std::setw(8)
       << m.points << std::setw(13) << fmt_short(s.final_time) << std::setw(17) << fmt_short(s.error_h1_sup)
       << std::setw(17) << fmt_short(s.error_modulus_sup) << std::setw(17) << fmt_short(s.omega_hat_sup)
       << std::setw(17) << fmt_short(drift) << std::setw(17) << fmt_short(s.energy_drift) << std::setw(11)
       << s.violations << (s.tstar ? fmt_short(*s.tstar) : "none") << '\n';
  }
  os << '\n';
  for (const auto& s : result.slopes) {
    os << std::setw(22) << s.name << ' ';
    if (s.status == "ok")
      os << "slope " << fmt_short(s.slope) << (s.monotone ? "" : " (non-monotone)") << '\n';
    else
      os << s.status << '\n';
  }
  return os.str();
}

std::string format_plots(const SweepResult& result) {
  std::ostringstream os;
  os << "# gnuplot script; run with: gnuplot plots.gp\n"
     << "set terminal pngcairo size 900,600\n"
     << "set datafile separator ','\n"
     << "set logscale xy\n"
     << "set xlabel 'epsilon'\n"
     << "set key left top\n";
  for (const auto& s : result.slopes) {
    os << "\n$" << s.name << " << EOD\n";
    for (std::size_t i = 0; i < s.values.size(); ++i)
      if (s.values[i] > 0.0) os << fmt(s.epsilons[i]) << ',' << fmt(s.values[i]) << '\n';
    os << "EOD\n"
       << "set output 'slope_" << s.name << ".png'\n"
       << "set ylabel '" << s.name << "'\n";
    if (s.status == "ok")
      os << "plot $" << s.name << " using 1:2 with linespoints title 'measured', exp(" << fmt(s.intercept) << ")*x**"
         << fmt(s.slope) << " title 'fit slope " << fmt_short(s.slope) << "'\n";
    else
      os << "plot $" << s.name << " using 1:2 with linespoints title 'measured (" << s.status << ")'\n";
  }
  os << "\nunset logscale\nset logscale y\nset xlabel 't'\nset key autotitle columnhead\n";
  for (std::size_t i = 0; i < result.members.size(); ++i) {
    const auto& m = result.members[i];
    const std::string csv = csv_name(i, m.epsilon);
    os << "set output 'errors_" << i << ".png'\n"
       << "set ylabel 'error'\n"
       << "plot '" << csv << "' using 't':'err_h1_1' with lines, '' using 't':'err_mod_1' with lines, '' using "
       << "'t':'omega_hat' with lines\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// studies

ScenarioConfig refined_config(const ScenarioConfig& config) {
  ScenarioConfig c = config;
  c.spacing = 0.5 * config.spacing;
  c.ground_points = 2 * config.ground_points;
  c.dt = 0.5 * config.dt;
  return c;
}

std::vector<RobustnessRow> robustness_table(const std::vector<SlopeReport>& base,
                                            const std::vector<SlopeReport>& refined, double tolerance) {
  std::vector<RobustnessRow> rows;
  for (const auto& b : base) {
    if (b.status != "ok") continue;
    for (const auto& r : refined) {
      if (r.name != b.name || r.status != "ok") continue;
      RobustnessRow row;
      row.name = b.name;
      row.base = b.slope;
      row.refined = r.slope;
      row.change = std::abs(r.slope - b.slope);
      row.stable = row.change < tolerance;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_robustness(const std::vector<RobustnessRow>& rows) {
  std::ostringstream os;
  os << "# slope stability under n -> 2n, dt -> dt/2\n"
     << std::left << std::setw(22) << "quantity" << std::setw(17) << "base" << std::setw(17) << "refined"
     << std::setw(17) << "change" << "stable\n";
  for (const auto& r : rows)
    os << std::setw(22) << r.name << std::setw(17) << fmt_short(r.base) << std::setw(17) << fmt_short(r.refined)
       << std::setw(17) << fmt_short(r.change) << yes_no(r.stable) << '\n';
  return os.str();
}

DriftStudy energy_drift_study(const ScenarioConfig& config, double epsilon, double t_final, GroundStateCache& cache) {
  DriftStudy s;
  s.epsilon = epsilon;
  s.t_final = t_final;
  MemberOptions coarse;
  coarse.overrides.t_final = t_final;
  coarse.overrides.dt = config.dt;
  MemberOptions fine = coarse;
  fine.overrides.dt = 0.5 * config.dt;
  auto run = [&](const MemberOptions& o) {
    auto m = run_member(config, epsilon, cache, o);
    if (!m.ok)
      throw Error(category_from_name(m.error_category).value_or(ErrorCategory::config),
                  "drift study run failed: " + m.error_message);
    return m;
  };
  const auto a = run(coarse);
  const auto b = run(fine);
  s.drift_coarse = a.summary.energy_drift;
  s.drift_fine = b.summary.energy_drift;
  s.ratio = s.drift_fine > 0.0 ? s.drift_coarse / s.drift_fine : std::numeric_limits<double>::infinity();
  s.mass_drift = a.summary.mass_drift;
  for (std::size_t j = 0; j < s.mass_drift.size() && j < b.summary.mass_drift.size(); ++j)
    s.mass_drift[j] = std::max(s.mass_drift[j], b.summary.mass_drift[j]);
  return s;
}

IdentityStudy identity_study(const ScenarioConfig& config, double epsilon, double t_final, long decimation,
                             int levels, GroundStateCache& cache) {
  if (decimation < 1 || levels < 2) throw Error(ErrorCategory::config, "identity study needs decimation >= 1, levels >= 2");
  const auto r0 = cache.get(config.params, ground_grid(config), config.ground_tol);
  MemberOverrides ov;
  ov.t_final = t_final;
  const MemberPlan plan = plan_member(config, *r0, epsilon, ov);
  EvolutionConfig ec(plan.grid, r0->on_grid(plan.grid));
  ec.epsilon = epsilon;
  ec.dt = plan.dt;
  ec.t_final = plan.t_final;
  ec.potentials = config.potentials;
  ec.params = config.params;
  ec.classical0 = plan.predicted.states.front();
  ec.margin_level = config.margin_level;
  ec.observer_stride = 1;

  IdentityStudy study;
  std::vector<IdentityTracker> trackers;
  for (int l = 0; l < levels; ++l) {
    const long d = decimation << l;
    study.decimations.push_back(d);
    study.sample_dt.push_back(static_cast<double>(d) * plan.dt);
    trackers.emplace_back(plan.grid, d, plan.dt);
  }
  Vec q0{};
  bool first = true;
  Observer obs = [&](const FieldState& state, const ClassicalState&) {
    auto sample = std::make_shared<const IdentitySample>(
        identity_sample(state.field, state.time, config.potentials, config.params, epsilon));
    if (first) {
      q0 = sample->momentum;
      first = false;
    }
    Vec dq{};
    for (int d = 0; d < config.dim; ++d) dq[d] = sample->momentum[d] - q0[d];
    study.momentum_variation = std::max(study.momentum_variation, norm(dq, config.dim));
    for (auto& t : trackers) t.push(sample);
  };
  evolve(ec, {obs});
  for (const auto& t : trackers) {
    study.max_continuity.push_back(t.report().max_continuity);
    study.max_momentum.push_back(t.report().max_momentum);
  }
  for (int l = 1; l < levels; ++l) {
    const auto u = static_cast<std::size_t>(l);
    study.continuity_orders.push_back(std::log2(study.max_continuity[u] / study.max_continuity[u - 1]));
    study.momentum_orders.push_back(std::log2(study.max_momentum[u] / study.max_momentum[u - 1]));
  }
  return study;
}

}  // namespace solitondyn
