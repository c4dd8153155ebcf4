#pragma once

#include <filesystem>
#include <variant>

#include "sseg/volume.hpp"

namespace sseg {

// Volume container: a UTF-8 text header next to a raw little-endian payload.
// Header lines, in order:
//   dims = nx ny nz
//   spacing = sx sy sz
//   origin = ox oy oz
//   dtype = float32|uint8
//   data = <payload path relative to the header>
// Payload is row-major with x fastest. Round-trips are bit-exact.

using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

void store_volume(const ScalarVolume& vol, const std::filesystem::path& header_path);
void store_volume(const LabelVolume& vol, const std::filesystem::path& header_path);

AnyVolume load_volume(const std::filesystem::path& header_path);

// Typed loaders; throw ParseError when the file holds the other dtype.
ScalarVolume load_scalar_volume(const std::filesystem::path& header_path);
LabelVolume load_label_volume(const std::filesystem::path& header_path);

}  // namespace sseg
