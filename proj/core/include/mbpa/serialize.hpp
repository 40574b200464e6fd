#pragma once

#include <filesystem>

#include "mbpa/memory.hpp"
#include "mbpa/net.hpp"
#include "mbpa/param_vector.hpp"

namespace mbpa {

// Parameter file: magic "MBPA", version u32, layout descriptor, then the
// values as little-endian f64. All integers little-endian.
void save_params(const ParamVector& params, const std::filesystem::path& path);
ParamVector load_params(const std::filesystem::path& path);

// Memory file: magic "MBPM", version u32, key-dim u64, capacity u64,
// count u64, epsilon f64, task kind u32, then entries in insertion order
// (key f64s, value i64 class-id or f64 scalar, insert-index u64).
void save_memory(const EpisodicMemory& mem, const std::filesystem::path& path);
EpisodicMemory load_memory(const std::filesystem::path& path);

}  // namespace mbpa
