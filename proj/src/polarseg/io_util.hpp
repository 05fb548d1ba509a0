#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

namespace polarseg {

// Writes through a temporary sibling file and renames it over `path`, so
// readers never observe a partial file.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);
void write_text_atomically(const std::filesystem::path& path, const std::string& text);

// Populates a fresh temporary directory next to `dir`, then renames it into
// place (replacing any previous contents of `dir`).
void build_directory_atomically(const std::filesystem::path& dir,
                                const std::function<void(const std::filesystem::path&)>& fill);

std::string read_text(const std::filesystem::path& path);

}  // namespace polarseg
