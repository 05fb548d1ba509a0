#include "polarseg/dataset.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "polarseg/error.hpp"
#include "polarseg/image_io.hpp"
#include "polarseg/io_util.hpp"

namespace polarseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string scene_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", index);
  return buf;
}

GrayImage planes_to_gray(const ad::Tensor& image) {
  GrayImage g;
  g.height = image.dim(0) * image.dim(1);
  g.width = image.dim(2);
  g.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(image[i] * 255.0));
  return g;
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

}  // namespace

std::uint64_t scene_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 of the pair
  std::uint64_t z = base * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<SyntheticScene> generate_scenes(std::uint64_t base_seed, std::size_t count,
                                            const SceneConfig& config) {
  std::vector<SyntheticScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(scene_seed(base_seed, i), config));
  return out;
}

void write_dataset(const fs::path& dir, std::uint64_t base_seed, const SceneConfig& config,
                   const std::vector<SyntheticScene>& scenes) {
  build_directory_atomically(dir, [&](const fs::path& tmp) {
    json manifest;
    manifest["seed"] = base_seed;
    manifest["count"] = scenes.size();
    manifest["height"] = config.height;
    manifest["width"] = config.width;
    json palette = json::array();
    for (auto k : config.palette) palette.push_back(shape_name(k));
    manifest["palette"] = palette;
    json names = json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto& s = scenes[i];
      const fs::path sd = tmp / scene_dir_name(i);
      fs::create_directories(sd);
      write_pgm(sd / "image.pgm", planes_to_gray(s.image));
      json meta;
      meta["seed"] = s.seed;
      json classes = json::array();
      for (std::size_t k = 0; k < s.instances.size(); ++k) {
        write_mask_pgm(sd / ("inst_" + std::to_string(k) + ".pgm"), s.instances[k].mask);
        classes.push_back(s.instances[k].class_id);
      }
      meta["classes"] = classes;
      write_text_atomically(sd / "meta.json", meta.dump() + "\n");
      names.push_back(scene_dir_name(i));
    }
    manifest["scenes"] = names;
    write_text_atomically(tmp / "manifest.json", manifest.dump(1) + "\n");
  });
}

std::vector<SyntheticScene> read_dataset(const fs::path& dir) {
  const json manifest = parse_json(dir / "manifest.json");
  std::vector<SyntheticScene> out;
  try {
    const std::size_t H = manifest.at("height").get<std::size_t>();
    const std::size_t W = manifest.at("width").get<std::size_t>();
    for (const auto& name : manifest.at("scenes")) {
      const fs::path sd = dir / name.get<std::string>();
      const json meta = parse_json(sd / "meta.json");
      SyntheticScene s;
      s.seed = meta.at("seed").get<std::uint64_t>();
      const GrayImage g = read_pgm(sd / "image.pgm");
      if (g.height != 3 * H || g.width != W)
        fail(ErrorCode::DimensionMismatch, (sd / "image.pgm").string() + " does not match the manifest size");
      s.image = ad::Tensor({3, H, W});
      for (std::size_t i = 0; i < g.pixels.size(); ++i) s.image[i] = g.pixels[i] / 255.0;
      const auto classes = meta.at("classes").get<std::vector<std::size_t>>();
      for (std::size_t k = 0; k < classes.size(); ++k) {
        BitMask m = read_mask_pgm(sd / ("inst_" + std::to_string(k) + ".pgm"));
        if (m.height() != H || m.width() != W)
          fail(ErrorCode::DimensionMismatch, sd.string() + ": instance mask size differs from the image");
        s.instances.push_back({classes[k], std::move(m)});
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, (dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

}  // namespace polarseg
