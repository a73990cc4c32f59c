#pragma once

#include <iosfwd>
#include <string>

#include "solitondyn/evolution.hpp"
#include "solitondyn/ground_state.hpp"

namespace solitondyn {

/// Container layout: 8-byte magic, u64 header length, JSON header, then the
/// sample arrays as raw little-endian doubles in header order. Scalars in the
/// header are written in shortest round-trip form, so reading is bit-exact.
inline constexpr char kContainerMagic[9] = "SDYNBIN1";

void write_ground_state(std::ostream& out, const GroundState& r);
GroundState read_ground_state(std::istream& in);
void save_ground_state(const std::string& path, const GroundState& r);
GroundState load_ground_state(const std::string& path);

/// Field snapshot: grid, time, step index and complex samples.
void write_snapshot(std::ostream& out, const FieldState& state);
FieldState read_snapshot(std::istream& in);
void save_snapshot(const std::string& path, const FieldState& state);
FieldState load_snapshot(const std::string& path);

/// Stable text key of the parameters and grid, used for ground-state caching.
std::string ground_state_key(const NonlinearityParams& params, const SpectralGrid& grid, double tol);

}  // namespace solitondyn
