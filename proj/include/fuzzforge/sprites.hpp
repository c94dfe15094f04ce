#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuzzforge/error.hpp"
#include "fuzzforge/raster.hpp"

namespace fuzzforge {

struct sprite {
  raster pixels;
  std::vector<std::string> tags;
  int source_frame = 0;
  std::string source_path;
  int offset_x = 0;  // crop offset inside the raw frame
  int offset_y = 0;

  int width() const noexcept { return pixels.width(); }
  int height() const noexcept { return pixels.height(); }
};

struct sprite_catalog {
  std::vector<sprite> sprites;
  std::string manifest_path;
  std::size_t skipped_empty = 0;

  bool empty() const noexcept { return sprites.empty(); }
  std::size_t size() const noexcept { return sprites.size(); }
};

/// Minimal sub-raster holding every pixel with alpha > threshold.
inline sprite trim_sprite(const raster& raw, std::uint8_t alpha_threshold = 0) {
  if (raw.empty()) throw error(errc::invalid_argument, "cannot trim an empty raster");
  int x0 = raw.width(), y0 = raw.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < raw.height(); ++y)
    for (int x = 0; x < raw.width(); ++x)
      if (raw.at(x, y).a > alpha_threshold) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw error(errc::empty_sprite, "no pixel above the alpha threshold");
  sprite s;
  s.pixels = raw.crop(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  s.offset_x = x0;
  s.offset_y = y0;
  return s;
}

inline std::vector<int> sample_frames(int frame_count, int stride) {
  if (stride < 1) throw error(errc::invalid_stride, "stride must be >= 1");
  if (frame_count < 0) throw error(errc::invalid_argument, "negative frame count");
  std::vector<int> out;
  for (int i = 0; i < frame_count; i += stride) out.push_back(i);
  return out;
}

/// Underscore-separated tokens of a directory name, e.g. "cone_orange" -> {cone, orange}.
inline std::vector<std::string> parse_tags(const std::string& dir_name) {
  std::vector<std::string> tags;
  std::string cur;
  for (char c : dir_name) {
    if (c == '_') {
      if (!cur.empty()) tags.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tags.push_back(cur);
  return tags;
}

namespace detail {

// Sort key for frame files: the last run of digits in the stem, then the full name.
inline std::pair<long long, std::string> frame_key(const std::filesystem::path& p) {
  const std::string stem = p.stem().string();
  long long number = -1;
  auto end = stem.find_last_of("0123456789");
  if (end != std::string::npos) {
    auto begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    number = std::stoll(stem.substr(begin, std::min<std::size_t>(end - begin + 1, 18)));
  }
  return {number, p.filename().string()};
}

inline bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

}  // namespace detail

/// Frame files of one sequence directory in frame order.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw error(errc::io_error, dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : it)
    if (entry.is_regular_file() && detail::is_png(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return detail::frame_key(a) < detail::frame_key(b);
  });
  return files;
}

/// Trimmed, stride-sampled sprites from every sequence directory. Roots are
/// visited in lexicographic order; frames that trim to nothing are counted and skipped.
inline sprite_catalog build_catalog(std::vector<std::filesystem::path> roots, int stride,
                                    std::uint8_t alpha_threshold = 0) {
  if (stride < 1) throw error(errc::invalid_stride, "stride must be >= 1");
  std::sort(roots.begin(), roots.end());
  sprite_catalog catalog;
  for (const auto& root : roots) {
    const auto frames = list_frames(root);
    const auto tags = parse_tags(root.filename().empty() ? root.parent_path().filename().string()
                                                         : root.filename().string());
    for (int idx : sample_frames(static_cast<int>(frames.size()), stride)) {
      const auto& path = frames[static_cast<std::size_t>(idx)];
      try {
        sprite s = trim_sprite(read_png(path), alpha_threshold);
        s.tags = tags;
        s.source_frame = idx;
        s.source_path = path.string();
        catalog.sprites.push_back(std::move(s));
      } catch (const error& e) {
        if (e.code() != errc::empty_sprite) throw;
        ++catalog.skipped_empty;
      }
    }
  }
  return catalog;
}

/// Writes each sprite as a PNG under `out_dir` and a JSON manifest listing
/// {path, frame, width, height, tags}; paths are relative to the manifest.
inline void write_catalog(sprite_catalog& catalog, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "sprites", ec);
  if (ec) throw error(errc::io_error, out_dir.string() + ": " + ec.message());
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  char name[32];
  for (std::size_t i = 0; i < catalog.sprites.size(); ++i) {
    auto& s = catalog.sprites[i];
    std::snprintf(name, sizeof name, "sprite_%06zu.png", i);
    const std::string rel = std::string("sprites/") + name;
    write_png(s.pixels, out_dir / rel);
    list.push_back({{"path", rel},
                    {"frame", s.source_frame},
                    {"width", s.width()},
                    {"height", s.height()},
                    {"tags", s.tags}});
  }
  const auto manifest = out_dir / "catalog.json";
  std::ofstream os(manifest, std::ios::binary);
  if (!os) throw error(errc::io_error, manifest.string());
  os << list.dump(2) << '\n';
  catalog.manifest_path = manifest.string();
}

inline sprite_catalog read_catalog(const std::filesystem::path& manifest) {
  std::ifstream is(manifest, std::ios::binary);
  if (!is) throw error(errc::io_error, manifest.string());
  nlohmann::json list;
  try {
    list = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, manifest.string() + ": " + e.what());
  }
  sprite_catalog catalog;
  catalog.manifest_path = manifest.string();
  const auto base = manifest.parent_path();
  try {
    for (const auto& item : list) {
      sprite s;
      const std::string rel = item.at("path").get<std::string>();
      s.pixels = read_png(base / rel);
      s.source_path = rel;
      s.source_frame = item.at("frame").get<int>();
      s.tags = item.at("tags").get<std::vector<std::string>>();
      if (s.width() != item.at("width").get<int>() || s.height() != item.at("height").get<int>())
        throw error(errc::dimension_mismatch, rel + ": size differs from catalog entry");
      catalog.sprites.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, manifest.string() + ": " + e.what());
  }
  return catalog;
}

}  // namespace fuzzforge
