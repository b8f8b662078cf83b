#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "utfe/data/pgm.hpp"
#include "utfe/data/preprocess.hpp"
#include "utfe/data/synthetic.hpp"
#include "utfe/io.hpp"

namespace utfe::data {

inline constexpr const char* kManifestName = "manifest.tsv";

inline std::string numbered_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%06zu.pgm", index);
  return buf;
}

/// Writes numbered PGM files plus a manifest of "filename<TAB>seed" lines.
inline void write_corpus(const std::filesystem::path& dir, const std::vector<Image>& images,
                         const std::vector<std::uint64_t>& seeds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  std::ostringstream manifest;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string name = numbered_name(i);
    save_pgm(images[i].pixels, dir / name);
    manifest << name << '\t' << (i < seeds.size() ? seeds[i] : 0) << '\n';
  }
  write_text_atomic(dir / kManifestName, manifest.str());
}

/// Files of a corpus directory: the manifest order when one exists,
/// otherwise every *.pgm sorted by name.
inline std::vector<std::filesystem::path> corpus_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  const auto manifest = dir / kManifestName;
  if (std::filesystem::exists(manifest)) {
    std::istringstream in(read_text(manifest));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      files.push_back(dir / line.substr(0, tab));
    }
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  }
  return files;
}

/// Loads every image of a corpus; frames not already at the target size
/// are resampled over the full frame.
inline std::vector<Image> load_corpus(const std::filesystem::path& dir, std::size_t height = kImageHeight,
                                      std::size_t width = kImageWidth) {
  std::vector<Image> images;
  for (const auto& file : corpus_files(dir)) {
    Image img = load_pgm(file);
    if (img.height() != height || img.width() != width) img = preprocess(img, full_frame(img), height, width);
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace utfe::data
