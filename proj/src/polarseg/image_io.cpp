#include "polarseg/image_io.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <string>

#include "polarseg/error.hpp"
#include "polarseg/io_util.hpp"

namespace polarseg {

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t header_number(std::istream& is, const std::filesystem::path& path) {
  const std::string tok = header_token(is);
  try {
    return std::stoull(tok);
  } catch (const std::exception&) {
    fail(ErrorCode::Io, path.string() + ": bad PGM header field '" + tok + "'");
  }
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
  if (header_token(is) != "P5") fail(ErrorCode::Io, path.string() + ": not a binary PGM (P5)");
  GrayImage img;
  img.width = header_number(is, path);
  img.height = header_number(is, path);
  const std::size_t maxval = header_number(is, path);
  if (maxval != 255) fail(ErrorCode::Io, path.string() + ": only maxval 255 is supported");
  img.pixels.resize(img.width * img.height);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) fail(ErrorCode::Io, path.string() + ": truncated pixel data");
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_atomically(path, [&](std::ostream& os) {
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()),
             static_cast<std::streamsize>(image.pixels.size()));
  });
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_atomically(path, [&](std::ostream& os) {
    os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()),
             static_cast<std::streamsize>(image.pixels.size()));
  });
}

BitMask mask_from_gray(const GrayImage& image) {
  std::vector<std::uint8_t> bits(image.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = image.pixels[i] ? 1 : 0;
  return BitMask(image.height, image.width, std::move(bits));
}

GrayImage gray_from_mask(const BitMask& mask) {
  GrayImage img{mask.height(), mask.width(), {}};
  img.pixels.reserve(mask.bits().size());
  for (auto b : mask.bits()) img.pixels.push_back(b ? 255 : 0);
  return img;
}

BitMask read_mask_pgm(const std::filesystem::path& path) { return mask_from_gray(read_pgm(path)); }

void write_mask_pgm(const std::filesystem::path& path, const BitMask& mask) {
  write_pgm(path, gray_from_mask(mask));
}

}  // namespace polarseg
