#include "occm/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace occm {

namespace {

void write_header(std::ofstream& out, const char* magic, int w, int h) {
  out << magic << "\n" << w << " " << h << "\n255\n";
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_header(std::ifstream& in, const std::string& path) {
  PnmHeader h;
  in >> h.magic;
  auto next_int = [&](int& v) {
    // skip whitespace and '#' comments
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
      } else {
        break;
      }
    }
    if (!(in >> v)) throw IoError("malformed PNM header in " + path);
  };
  next_int(h.width);
  next_int(h.height);
  next_int(h.maxval);
  in.get();  // single whitespace before raster
  if (h.width < 1 || h.height < 1 || h.maxval != 255)
    throw IoError("unsupported PNM format in " + path);
  return h;
}

}  // namespace

void write_ppm(const RasterImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, "P6", image.width, image.height);
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed: " + path);
}

RasterImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P6") throw IoError("not a P6 PPM: " + path);
  RasterImage img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw IoError("truncated PPM raster: " + path);
  return img;
}

void write_pgm(const BinaryMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, "P5", mask.width, mask.height);
  std::vector<std::uint8_t> raw(mask.bits.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.bits[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

BinaryMask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P5") throw IoError("not a P5 PGM: " + path);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h.width) * h.height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("truncated PGM raster: " + path);
  BinaryMask mask(h.width, h.height);
  for (std::size_t i = 0; i < raw.size(); ++i) mask.bits[i] = raw[i] >= 128 ? 1 : 0;
  return mask;
}

RasterImage resize_image(const RasterImage& image, int side) {
  if (side < 1) throw InvalidInputError("resize_image: side must be >= 1");
  if (image.width < 1 || image.height < 1) throw InvalidInputError("resize_image: empty image");
  if (image.width == side && image.height == side) return image;

  RasterImage out(side, side);
  const double sx = static_cast<double>(image.width) / side;
  const double sy = static_cast<double>(image.height) / side;
  for (int y = 0; y < side; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    const double fy = std::clamp(src_y, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < side; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const double fx = std::clamp(src_x, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v00 = image.at(x0, y0)[c];
        const double v10 = image.at(x1, y0)[c];
        const double v01 = image.at(x0, y1)[c];
        const double v11 = image.at(x1, y1)[c];
        const double v = (1 - wy) * ((1 - wx) * v00 + wx * v10) +
                         wy * ((1 - wx) * v01 + wx * v11);
        out.at(x, y)[c] = static_cast<std::uint8_t>(std::floor(v + 0.5));
      }
    }
  }
  return out;
}

}  // namespace occm
