#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polarseg/autodiff.hpp"

namespace polarseg::ad {

// Flat checkpoint file:
//   8 bytes  magic "PSEGCKPT"
//   u32 LE   format version
//   u64 LE   manifest length, then the manifest as text, one line per
//            parameter: "<name> <d0,d1,...> <offset in doubles>"
//   raw little-endian doubles of every parameter in manifest order
inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
};

std::vector<ManifestEntry> make_manifest(const ParameterStore& params);
std::size_t manifest_total(const std::vector<ManifestEntry>& manifest);

// Written to a temporary sibling and renamed into place.
void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Fails with CheckpointMismatch unless names and shapes agree exactly. With
// skip_unknown, stored parameters the model lacks are ignored (loading a
// training checkpoint into a model built without its training-only branch).
void load_checkpoint(ParameterStore& params, const std::filesystem::path& path,
                     bool skip_unknown = false);

}  // namespace polarseg::ad
