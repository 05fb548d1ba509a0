#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polarseg/synthetic.hpp"

namespace polarseg {

// Seed of scene `index` in a dataset generated from `base`.
std::uint64_t scene_seed(std::uint64_t base, std::uint64_t index);

std::vector<SyntheticScene> generate_scenes(std::uint64_t base_seed, std::size_t count,
                                            const SceneConfig& config);

// Layout:
//   <dir>/manifest.json             {"seed", "count", "height", "width", "palette", "scenes"}
//   <dir>/scene_00000/image.pgm     the three colour planes stacked vertically
//   <dir>/scene_00000/inst_<k>.pgm  one mask per instance
//   <dir>/scene_00000/meta.json     {"seed", "classes"}
// The directory is assembled under a temporary name and renamed into place.
void write_dataset(const std::filesystem::path& dir, std::uint64_t base_seed,
                   const SceneConfig& config, const std::vector<SyntheticScene>& scenes);

std::vector<SyntheticScene> read_dataset(const std::filesystem::path& dir);

}  // namespace polarseg
