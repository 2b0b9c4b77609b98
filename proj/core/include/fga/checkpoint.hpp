#pragma once

#include <string>

#include "fga/model.hpp"

namespace fga {

/// Binary checkpoint layout (all integers little-endian u32):
///   magic "FGAW" | version | spec length + ModelSpec JSON | tensor count |
///   per tensor: name length + name | rank | dims[] | float64 data.
/// Round trips are bitwise exact; loading validates magic, version and the
/// name/shape map against the embedded spec.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace fga
