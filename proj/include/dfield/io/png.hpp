#pragma once

#include <string>

#include "dfield/scene/image.hpp"

namespace dfield {

// 8-bit RGB; values are clamped to [0, 1] and rounded to the nearest level.
void write_png(const std::string& path, const Image& image);
// 8-bit grayscale, 255 marks foreground.
void write_png(const std::string& path, const Mask& mask);

// Any 8-bit PNG is converted to RGB (gray is replicated, alpha dropped).
// ValidationError when the file is missing or not a readable PNG.
Image read_png_image(const std::string& path);
// Pixels >= 128 in the first channel are foreground.
Mask read_png_mask(const std::string& path);

}  // namespace dfield
