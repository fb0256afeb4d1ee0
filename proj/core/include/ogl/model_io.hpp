#pragma once

#include <string>

#include "ogl/tuner.hpp"

namespace ogl::model_io {

/// Writes the model with its scaler block. Paths ending in ".json" get a
/// human-readable JSON document; anything else gets the binary OGLM format.
/// Both round-trip parameters bit-for-bit. Returns the byte count written
/// (also stored into the model's serialized_bytes by save_mtune's caller via
/// load). Throws std::runtime_error on I/O failure.
long long save_mtune(const tuner::MtuneModel& model, const std::string& path);

/// Reads either format back, filling serialized_bytes with the file size.
/// Throws std::runtime_error on unknown magic/format, version mismatch, or
/// corrupt content.
tuner::MtuneModel load_mtune(const std::string& path);

}  // namespace ogl::model_io
