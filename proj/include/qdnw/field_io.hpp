#pragma once

#include <iosfwd>
#include <string>

#include "qdnw/wavesolver.hpp"

namespace qdnw {

/// Binary layout, little-endian:
///   8 bytes  magic "QDNWGF01"
///   uint32   version (1)
///   uint32   ndim (1 + d: time first)
///   ndim x float64  steps (dt, dx, dy)
///   ndim x uint64   counts (levels, nodes per axis)
///   ndim x float64  origins (0, lower corner)
///   values   float64, row-major with time slowest
void write_field_binary(const std::string& path, const GridField& f);
GridField read_field_binary(const std::string& path);

/// CSV rows t, x[, y], value; every `stride`-th time level.
void write_field_csv(std::ostream& os, const GridField& f, int stride = 1);

}  // namespace qdnw
