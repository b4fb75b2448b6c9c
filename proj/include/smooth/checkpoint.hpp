#pragma once

#include <string>

#include "smooth/model.hpp"

namespace smooth {

// Binary checkpoint container ("SMCK", little-endian, format version 1).
// Doubles are stored as raw IEEE-754 bytes so save -> load -> save is
// byte-identical.

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

std::string serialize_model(const Model& m);
Model deserialize_model(const std::string& bytes);

}  // namespace smooth
