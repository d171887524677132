// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <string>

#include "splatjoint/scene.hpp"

namespace splatjoint {

/// Scene container format: `<path>/manifest.json` + `<path>/blobs.bin`.
/// Byte layout is documented in docs/format.md. Blob payloads are
/// little-endian float32 / int32 / uint32; writes are deterministic.
inline constexpr int kSceneFormatVersion = 1;

void save_scene(const SceneState& state, const std::string& path);

/// Throws FormatError on bad magic/version/structure and DimensionError when
/// declared dims disagree with blob payloads.
SceneState load_scene(const std::string& path);

}  // namespace splatjoint
