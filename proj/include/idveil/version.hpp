#pragma once

namespace idveil {

// Library version, recorded in run metadata and checkpoints.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace idveil
