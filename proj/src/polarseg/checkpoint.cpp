#include "polarseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "polarseg/error.hpp"
#include "polarseg/io_util.hpp"

namespace polarseg::ad {

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return to_little(v);
}

std::string manifest_text(const std::vector<ManifestEntry>& manifest) {
  std::ostringstream os;
  for (const auto& e : manifest) {
    os << e.name << ' ';
    for (std::size_t i = 0; i < e.shape.size(); ++i) os << (i ? "," : "") << e.shape[i];
    os << ' ' << e.offset << '\n';
  }
  return os.str();
}

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& where) {
  std::vector<ManifestEntry> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string dims;
    if (!(ls >> e.name >> dims >> e.offset))
      fail(ErrorCode::CheckpointMismatch, where + ": malformed manifest line '" + line + "'");
    std::istringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ',')) e.shape.push_back(std::stoull(d));
    out.push_back(std::move(e));
  }
  return out;
}

std::ifstream open_checked(const std::filesystem::path& path, std::string& manifest) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    fail(ErrorCode::CheckpointMismatch, path.string() + " is not a checkpoint");
  const auto version = read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    fail(ErrorCode::CheckpointMismatch,
         path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = read_le<std::uint64_t>(is);
  manifest.resize(len);
  is.read(manifest.data(), static_cast<std::streamsize>(len));
  if (!is) fail(ErrorCode::Io, path.string() + ": truncated manifest");
  return is;
}

}  // namespace

std::vector<ManifestEntry> make_manifest(const ParameterStore& params) {
  std::vector<ManifestEntry> out;
  std::size_t offset = 0;
  for (const auto& p : params.all()) {
    out.push_back({p.name, p.value.shape(), offset});
    offset += p.value.size();
  }
  return out;
}

std::size_t manifest_total(const std::vector<ManifestEntry>& manifest) {
  std::size_t n = 0;
  for (const auto& e : manifest) n += numel(e.shape);
  return n;
}

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path) {
  const std::string text = manifest_text(make_manifest(params));
  write_atomically(path, [&](std::ostream& os) {
    os.write(kCheckpointMagic, 8);
    write_le<std::uint32_t>(os, kCheckpointVersion);
    write_le<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params.all())
      for (double v : p.value.values()) write_le<double>(os, v);
  });
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::string text;
  open_checked(path, text);
  return parse_manifest(text, path.string());
}

void load_checkpoint(ParameterStore& params, const std::filesystem::path& path, bool skip_unknown) {
  std::string text;
  auto is = open_checked(path, text);
  const auto stored = parse_manifest(text, path.string());
  const auto expected = make_manifest(params);
  if (!skip_unknown && stored.size() != expected.size())
    fail(ErrorCode::CheckpointMismatch,
         path.string() + ": checkpoint has " + std::to_string(stored.size()) +
             " parameters, model has " + std::to_string(expected.size()));

  std::size_t matched = 0;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    Parameter* p = params.find(stored[i].name);
    const bool out_of_order = !skip_unknown && (stored[i].name != expected[i].name);
    if (out_of_order || (!p && !skip_unknown))
      fail(ErrorCode::CheckpointMismatch,
           path.string() + ": parameter " + stored[i].name + " does not match model parameter " +
               expected[i].name);
    if (!p) {
      for (std::size_t k = 0; k < numel(stored[i].shape); ++k) read_le<double>(is);
      continue;
    }
    if (p->value.shape() != stored[i].shape)
      fail(ErrorCode::CheckpointMismatch,
           path.string() + ": parameter " + stored[i].name + shape_string(stored[i].shape) +
               " does not match the model's " + shape_string(p->value.shape()));
    for (double& v : p->value.storage()) v = read_le<double>(is);
    ++matched;
  }
  if (!is) fail(ErrorCode::Io, path.string() + ": truncated parameter data");
  if (matched != expected.size())
    fail(ErrorCode::CheckpointMismatch, path.string() + ": checkpoint lacks " +
                                            std::to_string(expected.size() - matched) + " model parameters");
}

}  // namespace polarseg::ad
