#pragma once

#include <string>

#include "occm/render.hpp"

namespace occm {

// Binary PPM (P6, maxval 255).
void write_ppm(const RasterImage& image, const std::string& path);
RasterImage read_ppm(const std::string& path);

// Binary PGM (P5); true pixels stored as 255, false as 0.
void write_pgm(const BinaryMask& mask, const std::string& path);
BinaryMask read_pgm(const std::string& path);

// Bilinear resample to side x side. Channels rounded half-up.
RasterImage resize_image(const RasterImage& image, int side);

}  // namespace occm
