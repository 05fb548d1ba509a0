#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "polarseg/polar_codec.hpp"

namespace polarseg {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
};

// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Foreground is any nonzero pixel; written back as 255.
BitMask mask_from_gray(const GrayImage& image);
GrayImage gray_from_mask(const BitMask& mask);

BitMask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const BitMask& mask);

}  // namespace polarseg
