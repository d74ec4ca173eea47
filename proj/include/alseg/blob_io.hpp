#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace alseg::io {

/// Raw little-endian float32 tensor blobs.
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);
void append_f32(std::vector<char>& buffer, float v);
std::vector<float> read_f32_blob(const std::filesystem::path& path);

}  // namespace alseg::io
