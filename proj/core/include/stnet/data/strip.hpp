#pragma once

#include <string>

#include "stnet/data/clip.hpp"

namespace stnet {

/// Frames side by side, left to right, in one 16-bit grayscale PNG of size
/// (frames*side) x side. Labels live in the manifest, not in the image.
std::string encode_strip(const Clip& clip);
Clip decode_strip(const std::string& bytes);

void strip_write(const Clip& clip, const std::string& path);
Clip strip_read(const std::string& path);

}  // namespace stnet
