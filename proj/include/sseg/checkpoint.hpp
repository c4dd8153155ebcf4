#pragma once

#include <filesystem>

#include "sseg/network.hpp"

namespace sseg {

// Binary model container: "SSEGCKPT" magic, format version, config echo,
// training round, then every parameter vector (including batch-norm running
// stats) as a named float32 little-endian tensor in param_views order.
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);

// Throws IoError if unreadable, ParseError on magic/version/name/shape
// mismatches.
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace sseg
