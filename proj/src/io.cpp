#include "solitondyn/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "solitondyn/errors.hpp"

namespace solitondyn {

namespace {

using nlohmann::json;

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw Error(ErrorCategory::io, "truncated container");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return v;
}

void put_doubles(std::ostream& out, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_doubles(std::istream& in, double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_u64(in));
}

json grid_json(const SpectralGrid& g) {
  return {{"dim", g.dim()}, {"extent", g.extent()}, {"points", g.points()}};
}

SpectralGrid grid_from(const json& j) {
  return SpectralGrid(j.at("dim").get<int>(), j.at("extent").get<double>(), j.at("points").get<int>());
}

json params_json(const NonlinearityParams& p) {
  return {{"components", p.components}, {"p", p.p},       {"alpha", p.alpha},
          {"gamma", p.gamma},           {"beta", p.beta}, {"omega", p.omega}};
}

NonlinearityParams params_from(const json& j) {
  NonlinearityParams p;
  p.components = j.at("components").get<int>();
  p.p = j.at("p").get<double>();
  p.alpha = j.at("alpha").get<std::vector<double>>();
  p.gamma = j.at("gamma").get<Matrix>();
  p.beta = j.at("beta").get<std::vector<double>>();
  p.omega = j.at("omega").get<Matrix>();
  return p;
}

void write_container(std::ostream& out, const json& header) {
  const std::string text = header.dump();
  out.write(kContainerMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json read_container_header(std::istream& in, const char* kind) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kContainerMagic, 8) != 0) throw Error(ErrorCategory::io, "not a solitondyn container");
  const std::uint64_t length = get_u64(in);
  if (length > (std::uint64_t{1} << 30)) throw Error(ErrorCategory::io, "container header too long");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error(ErrorCategory::io, "truncated container header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, std::string("bad container header: ") + e.what());
  }
  if (header.value("kind", "") != kind)
    throw Error(ErrorCategory::io, "container holds '" + header.value("kind", "") + "', expected '" + kind + "'");
  return header;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot read " + path);
  return in;
}

}  // namespace

void write_ground_state(std::ostream& out, const GroundState& r) {
  std::vector<int> near_zero(r.near_zero.begin(), r.near_zero.end());
  const json header = {{"kind", "ground_state"},
                       {"grid", grid_json(r.grid)},
                       {"params", params_json(r.params)},
                       {"components", r.components()},
                       {"masses", r.masses},
                       {"total_mass", r.total_mass},
                       {"energy", r.energy},
                       {"residual", r.residual},
                       {"multipliers", r.multipliers},
                       {"near_zero", near_zero},
                       {"iterations", r.iterations}};
  write_container(out, header);
  for (const auto& c : r.profile) put_doubles(out, c.data(), c.size());
  if (!out) throw Error(ErrorCategory::io, "write failed");
}

GroundState read_ground_state(std::istream& in) {
  const json h = read_container_header(in, "ground_state");
  try {
    const SpectralGrid grid = grid_from(h.at("grid"));
    GroundState r{grid, {}, {}, 0.0, 0.0, 0.0, {}, {}, params_from(h.at("params")), 0};
    const int m = h.at("components").get<int>();
    r.profile.assign(static_cast<std::size_t>(m), RealArray(grid.size()));
    for (auto& c : r.profile) get_doubles(in, c.data(), c.size());
    r.masses = h.at("masses").get<std::vector<double>>();
    r.total_mass = h.at("total_mass").get<double>();
    r.energy = h.at("energy").get<double>();
    r.residual = h.at("residual").get<double>();
    r.multipliers = h.at("multipliers").get<std::vector<double>>();
    for (int z : h.at("near_zero").get<std::vector<int>>()) r.near_zero.push_back(z != 0);
    r.iterations = h.at("iterations").get<long>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, std::string("bad ground-state header: ") + e.what());
  }
}

void save_ground_state(const std::string& path, const GroundState& r) {
  auto out = open_out(path);
  write_ground_state(out, r);
}

GroundState load_ground_state(const std::string& path) {
  auto in = open_in(path);
  return read_ground_state(in);
}

void write_snapshot(std::ostream& out, const FieldState& state) {
  const auto& f = state.field;
  const json header = {{"kind", "snapshot"},
                       {"grid", grid_json(f.grid())},
                       {"components", f.components()},
                       {"time", state.time},
                       {"step_index", state.step_index}};
  write_container(out, header);
  for (int j = 0; j < f.components(); ++j)
    put_doubles(out, reinterpret_cast<const double*>(f[j].data()), 2 * f[j].size());
  if (!out) throw Error(ErrorCategory::io, "write failed");
}

FieldState read_snapshot(std::istream& in) {
  const json h = read_container_header(in, "snapshot");
  try {
    const SpectralGrid grid = grid_from(h.at("grid"));
    VectorField f(grid, h.at("components").get<int>());
    for (int j = 0; j < f.components(); ++j)
      get_doubles(in, reinterpret_cast<double*>(f[j].data()), 2 * f[j].size());
    return FieldState{std::move(f), h.at("time").get<double>(), h.at("step_index").get<long>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, std::string("bad snapshot header: ") + e.what());
  }
}

void save_snapshot(const std::string& path, const FieldState& state) {
  auto out = open_out(path);
  write_snapshot(out, state);
}

FieldState load_snapshot(const std::string& path) {
  auto in = open_in(path);
  return read_snapshot(in);
}

std::string ground_state_key(const NonlinearityParams& params, const SpectralGrid& grid, double tol) {
  const json key = {{"params", params_json(params)}, {"grid", grid_json(grid)}, {"tol", tol}};
  return key.dump();
}

}  // namespace solitondyn
