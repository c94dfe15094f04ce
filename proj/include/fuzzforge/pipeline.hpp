#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuzzforge/compositor_m2.hpp"
#include "fuzzforge/curation.hpp"
#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/error.hpp"
#include "fuzzforge/frame.hpp"
#include "fuzzforge/geometry.hpp"
#include "fuzzforge/raster.hpp"
#include "fuzzforge/rng.hpp"
#include "fuzzforge/scene_m1.hpp"
#include "fuzzforge/sprites.hpp"

namespace fuzzforge {

namespace fs = std::filesystem;

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string content_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Configuration ---------------------------------------------------------------

struct output_config {
  fs::path root = "out";
  bool json = true;
  bool yolo = false;
  bool coco = false;
};

struct compositor_config {
  image_size size{640, 480};
  std::string backgrounds = "procedural";  // a directory of PNGs, or "procedural"
  randomizer_params randomizer;
  m2_options options;
};

struct sprite_config {
  std::vector<fs::path> roots;
  int stride = 12;
  std::uint8_t alpha_threshold = 0;
  fs::path catalog;  // catalog.json written by prep-sprites
};

struct curation_config {
  double tau = 0.05;
  std::size_t k = 0;  // 0 keeps every deduplicated item
  split_spec split;
  diversity_rule rule = diversity_rule::farthest_point;
};

struct mixtures_config {
  std::vector<std::string> specs;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct pipeline_config {
  std::uint64_t master_seed = 0;
  sprite_config sprites;
  scene_config scene;
  texture_filter scene_filter = texture_filter::nearest;
  std::string scene_backgrounds = "procedural";
  compositor_config compositor;
  curation_config curation;
  mixtures_config mixtures;
  output_config output;
  std::string digest = content_digest("");
};

namespace detail {

inline vec3 vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw error(errc::parse_error, "expected [x, y, z], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline aabb aabb_from(const nlohmann::json& j) { return {vec3_from(j.at("min")), vec3_from(j.at("max"))}; }

inline interval interval_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw error(errc::parse_error, "expected [lo, hi], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

inline int_interval int_interval_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw error(errc::parse_error, "expected [lo, hi], got " + j.dump());
  return {j[0].get<int>(), j[1].get<int>()};
}

inline image_size size_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw error(errc::parse_error, "expected [width, height], got " + j.dump());
  return {j[0].get<int>(), j[1].get<int>()};
}

inline fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace detail

/// Parses the JSON pipeline configuration. Relative paths inside it resolve
/// against `base_dir`.
inline pipeline_config parse_config(const std::string& text, const fs::path& base_dir = {},
                                    const std::string& source = "<config>") {
  const auto j = detail::parse_json(text, source);
  pipeline_config c;
  c.digest = content_digest(text);
  try {
    c.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("sprites")) {
      const auto& s = j["sprites"];
      for (const auto& r : s.value("roots", std::vector<std::string>{}))
        c.sprites.roots.push_back(detail::resolve(base_dir, r));
      c.sprites.stride = s.value("stride", 12);
      c.sprites.alpha_threshold = static_cast<std::uint8_t>(s.value("alpha_threshold", 0));
      if (s.contains("catalog")) c.sprites.catalog = detail::resolve(base_dir, s["catalog"].get<std::string>());
    }
    if (j.contains("scene")) {
      const auto& s = j["scene"];
      auto& sc = c.scene;
      if (s.contains("camera_region")) sc.camera_region = detail::aabb_from(s["camera_region"]);
      if (s.contains("yaw_range_deg")) {
        const auto r = detail::interval_from(s["yaw_range_deg"]);
        sc.yaw_range = {r.lo * M_PI / 180, r.hi * M_PI / 180};
      }
      sc.pitch_fixed = s.value("pitch_fixed", true);
      sc.pitch_value = s.value("pitch_deg", 0.0) * M_PI / 180;
      if (s.contains("pitch_range_deg")) {
        const auto r = detail::interval_from(s["pitch_range_deg"]);
        sc.pitch_range = {r.lo * M_PI / 180, r.hi * M_PI / 180};
      }
      for (const auto& t : s.value("track_targets", nlohmann::json::array())) sc.track_targets.push_back(detail::vec3_from(t));
      sc.fov_vertical = s.value("fov_vertical_deg", 60.0) * M_PI / 180;
      if (s.contains("image_size")) sc.size = detail::size_from(s["image_size"]);
      if (s.contains("placement_region")) sc.placement_region = detail::aabb_from(s["placement_region"]);
      if (s.contains("flame_count_range")) sc.flame_count_range = detail::int_interval_from(s["flame_count_range"]);
      if (s.contains("flame_size_range")) sc.flame_size_range = detail::interval_from(s["flame_size_range"]);
      const std::string orient = s.value("orientation", std::string("fixed"));
      if (orient == "face_camera")
        sc.orientation = face_camera{};
      else if (orient == "fixed")
        sc.orientation = fixed_orientation{s.contains("normal") ? normalized(detail::vec3_from(s["normal"])) : vec3{0, 0, -1}};
      else
        throw error(errc::parse_error, "scene.orientation must be 'fixed' or 'face_camera'");
      const std::string bg = s.value("backgrounds", std::string("procedural"));
      c.scene_backgrounds = bg == "procedural" ? bg : detail::resolve(base_dir, bg).string();
      sc.background_ref = c.scene_backgrounds;
      const std::string filter = s.value("filter", std::string("nearest"));
      if (filter != "nearest" && filter != "bilinear") throw error(errc::parse_error, "scene.filter must be nearest or bilinear");
      c.scene_filter = filter == "bilinear" ? texture_filter::bilinear : texture_filter::nearest;
      sc.validate();
    }
    if (j.contains("compositor")) {
      const auto& s = j["compositor"];
      auto& cc = c.compositor;
      if (s.contains("image_size")) cc.size = detail::size_from(s["image_size"]);
      const std::string bg = s.value("backgrounds", std::string("procedural"));
      cc.backgrounds = bg == "procedural" ? bg : detail::resolve(base_dir, bg).string();
      if (s.contains("count_range")) cc.randomizer.count = detail::int_interval_from(s["count_range"]);
      if (s.contains("height_fraction")) cc.randomizer.height_fraction = detail::interval_from(s["height_fraction"]);
      cc.randomizer.min_visible_fraction = s.value("min_visible_fraction", 0.25);
      cc.randomizer.max_retries = s.value("max_retries", 100);
      cc.options.alpha_annot_threshold = static_cast<std::uint8_t>(s.value("alpha_threshold", 0));
    }
    if (j.contains("curation")) {
      const auto& s = j["curation"];
      c.curation.tau = s.value("tau", 0.05);
      c.curation.k = s.value("k", std::size_t{0});
      if (s.contains("split")) {
        const auto r = s["split"].get<std::vector<double>>();
        if (r.size() != 3) throw error(errc::parse_error, "curation.split needs three ratios");
        c.curation.split.train = r[0];
        c.curation.split.val = r[1];
        c.curation.split.test = r[2];
      }
      c.curation.split.seed = s.value("seed", std::uint64_t{0});
      const std::string rule = s.value("rule", std::string("fps"));
      if (rule != "fps" && rule != "mean") throw error(errc::parse_error, "curation.rule must be fps or mean");
      c.curation.rule = rule == "mean" ? diversity_rule::mean_distance : diversity_rule::farthest_point;
    }
    if (j.contains("mixtures")) {
      const auto& s = j["mixtures"];
      c.mixtures.specs = s.value("specs", std::vector<std::string>{});
      if (s.contains("seeds")) c.mixtures.seeds = s["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (j.contains("output")) {
      const auto& s = j["output"];
      if (s.contains("root")) c.output.root = detail::resolve(base_dir, s["root"].get<std::string>());
      if (s.contains("formats")) {
        c.output.json = c.output.yolo = c.output.coco = false;
        for (const auto& f : s["formats"].get<std::vector<std::string>>()) {
          if (f == "json") c.output.json = true;
          else if (f == "yolo") c.output.yolo = true;
          else if (f == "coco") c.output.coco = true;
          else throw error(errc::parse_error, "unknown output format '" + f + "'");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, source + ": " + e.what());
  }
  return c;
}

inline pipeline_config read_config(const fs::path& path) {
  return parse_config(detail::read_text(path), path.parent_path(), path.string());
}

// Worker pool ---------------------------------------------------------------

/// Runs task(i) for i in [0, count) on `jobs` threads. Tasks must be independent;
/// the first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline unsigned default_jobs() {
  if (const char* env = std::getenv("FUZZFORGE_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

// Frame generation ------------------------------------------------------------

inline std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu", index);
  return buf;
}

/// Background PNGs of a directory in name order; empty for "procedural".
inline std::vector<fs::path> list_backgrounds(const std::string& ref) {
  if (ref == "procedural" || ref.empty()) return {};
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ref, ec))
    if (e.is_regular_file() && detail::is_png(e.path())) files.push_back(e.path());
  if (ec) throw error(errc::io_error, ref + ": " + ec.message());
  if (files.empty()) throw error(errc::io_error, ref + ": no background PNGs");
  std::sort(files.begin(), files.end());
  return files;
}

inline raster pick_background(const std::vector<fs::path>& backgrounds, image_size size, rng_stream& rng) {
  if (backgrounds.empty()) return procedural_background(size, rng);
  return read_png(backgrounds[rng.index(backgrounds.size())]);
}

inline generated_frame generate_m2_frame(const pipeline_config& config, const sprite_catalog& sprites,
                                         const std::vector<fs::path>& backgrounds, std::uint64_t seed,
                                         std::size_t index) {
  rng_stream rng(seed, index);
  const raster bg = pick_background(backgrounds, config.compositor.size, rng);
  const auto overlays =
      randomize_overlays({bg.width(), bg.height()}, sprites, config.compositor.randomizer, rng);
  generated_frame f = compose(bg, overlays, sprites, config.compositor.options);
  f.seeds = {seed, index};
  return f;
}

inline generated_frame generate_m1_frame(const pipeline_config& config, const sprite_catalog& sprites,
                                         const std::vector<fs::path>& backgrounds, std::uint64_t seed,
                                         std::size_t index, std::vector<billboard_trace>* trace = nullptr) {
  rng_stream rng(seed, index);
  const camera_pose camera = sample_camera(config.scene, rng);
  const auto placements = place_billboards(config.scene, sprites, rng);
  const raster bg = pick_background(backgrounds, config.scene.size, rng);
  generated_frame f = render_m1(camera, placements, sprites, bg, {config.scene_filter, 0}, trace);
  f.seeds = {seed, index};
  return f;
}

struct generation_summary {
  std::size_t frames = 0;
  std::size_t boxes = 0;
  std::size_t skipped = 0;
};

/// One M1 annotation paired with the tight box of the same billboard's painted pixels.
struct annotation_pair {
  std::string image;
  std::size_t m1_index;
  std::optional<std::size_t> m2_index;
  bool fully_visible;
};

/// Generates `count` frames into `out`: images/, labels/ (frame JSON), yolo/,
/// manifest.json and coco.json. M1 runs can also write the pixel-tight
/// annotations of the same frames (alpha/) and the pairing between the two.
inline generation_summary generate_dataset(const pipeline_config& config, method_tag method, std::size_t count,
                                           std::uint64_t seed, unsigned jobs, const fs::path& out,
                                           bool paired = false) {
  if (config.sprites.catalog.empty())
    throw error(errc::invalid_argument, "config needs sprites.catalog (run prep-sprites first)");
  const sprite_catalog sprites = read_catalog(config.sprites.catalog);
  if (sprites.empty()) throw error(errc::empty_catalog, config.sprites.catalog.string() + " lists no sprites");
  const auto backgrounds =
      list_backgrounds(method == method_tag::m1 ? config.scene_backgrounds : config.compositor.backgrounds);

  for (const char* sub : {"images", "labels", "yolo", "alpha"}) {
    if ((std::string(sub) == "yolo" && !config.output.yolo) || (std::string(sub) == "alpha" && !paired)) continue;
    std::error_code ec;
    fs::create_directories(out / sub, ec);
    if (ec) throw error(errc::io_error, (out / sub).string() + ": " + ec.message());
  }

  std::vector<annotation_record> records(count);
  std::vector<std::vector<annotation_pair>> pairs(count);
  std::vector<std::size_t> skipped(count, 0);
  parallel_for(count, jobs, [&](std::size_t i) {
    const std::string name = frame_name(i);
    std::vector<billboard_trace> trace;
    const generated_frame f = method == method_tag::m1
                                  ? generate_m1_frame(config, sprites, backgrounds, seed, i, paired ? &trace : nullptr)
                                  : generate_m2_frame(config, sprites, backgrounds, seed, i);
    const std::string image_name = name + ".png";
    write_png(f.image, out / "images" / image_name);
    annotation_record rec = f.to_record(image_name);
    if (config.output.json) write_frame_json(rec, out / "labels" / (name + ".json"));
    if (config.output.yolo) write_yolo(rec, out / "yolo" / (name + ".txt"));
    if (paired) {
      annotation_record alpha{image_name, rec.size, {}, data_origin::synthetic};
      std::size_t m1 = 0;
      for (const auto& tr : trace) {
        if (!tr.box) continue;
        annotation_pair p{image_name, m1++, std::nullopt, tr.fully_visible};
        if (tr.alpha_box) {
          p.m2_index = alpha.objects.size();
          alpha.objects.push_back({0, *tr.alpha_box});
        }
        pairs[i].push_back(p);
      }
      write_frame_json(alpha, out / "alpha" / (name + ".json"));
    }
    skipped[i] = f.skipped;
    records[i] = std::move(rec);
  });

  dataset_manifest manifest;
  manifest.origin = data_origin::synthetic;
  manifest.prov = {seed, method, config.digest, std::nullopt};
  manifest.records = std::move(records);
  write_manifest(manifest, out / "manifest.json");
  if (config.output.coco) export_coco(manifest, out / "coco.json");
  if (paired) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& frame_pairs : pairs)
      for (const auto& p : frame_pairs)
        arr.push_back({{"image", p.image},
                       {"m1", p.m1_index},
                       {"m2", p.m2_index ? nlohmann::ordered_json(*p.m2_index) : nlohmann::ordered_json(nullptr)},
                       {"fully_visible", p.fully_visible}});
    detail::write_text(out / "pairing.json", arr.dump(1) + "\n");
  }

  generation_summary s;
  s.frames = count;
  for (const auto& r : manifest.records) s.boxes += r.objects.size();
  for (auto k : skipped) s.skipped += k;
  return s;
}

// Visualization and comparison ------------------------------------------------

/// Draws a 2-pixel outline for every box. Boxes are never clipped: one that
/// leaves the image is an error.
inline raster overlay(const raster& image, const annotation_record& record, rgba color = {255, 0, 0, 255}) {
  if (image.width() != record.size.width || image.height() != record.size.height)
    throw error(errc::dimension_mismatch, record.image_name + ": image size differs from annotation");
  raster out = image;
  for (const auto& o : record.objects) {
    const bbox& b = o.box;
    if (b.x_min() < -box_bounds_tolerance || b.y_min() < -box_bounds_tolerance ||
        b.x_max() > image.width() + box_bounds_tolerance || b.y_max() > image.height() + box_bounds_tolerance)
      throw error(errc::dimension_mismatch, record.image_name + ": box outside image");
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x_min())));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y_min())));
    const int x1 = std::min(image.width(), static_cast<int>(std::ceil(b.x_max())));
    const int y1 = std::min(image.height(), static_cast<int>(std::ceil(b.y_max())));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if (x < x0 + 2 || x >= x1 - 2 || y < y0 + 2 || y >= y1 - 2) out.at(x, y) = color;
  }
  return out;
}

struct diff_stats {
  std::size_t pairs = 0;          // pairs with both boxes present
  std::size_t unmatched = 0;      // M1 boxes whose billboard painted nothing
  std::size_t fully_visible = 0;  // pairs whose quad lies entirely in view
  double mean_iou = 0;
  double min_iou = 0;
  std::size_t containment_violations = 0;  // among fully visible pairs
};

/// Pixel cover of a box: corners rounded outward to whole pixels.
inline bbox pixel_cover(const bbox& b) {
  return bbox::from_corners(std::floor(b.x_min()), std::floor(b.y_min()), std::ceil(b.x_max()), std::ceil(b.y_max()));
}

inline diff_stats diff_annotations(const std::vector<annotation_record>& m1, const std::vector<annotation_record>& m2,
                                   const std::vector<annotation_pair>& pairing) {
  auto find = [](const std::vector<annotation_record>& set, const std::string& name) -> const annotation_record& {
    for (const auto& r : set)
      if (r.image_name == name) return r;
    throw error(errc::pairing_mismatch, "no annotation for " + name);
  };
  diff_stats s;
  double sum = 0;
  s.min_iou = 1.0;
  for (const auto& p : pairing) {
    const auto& a = find(m1, p.image);
    if (p.m1_index >= a.objects.size()) throw error(errc::pairing_mismatch, p.image + ": M1 index out of range");
    if (!p.m2_index) {
      ++s.unmatched;
      continue;
    }
    const auto& b = find(m2, p.image);
    if (*p.m2_index >= b.objects.size()) throw error(errc::pairing_mismatch, p.image + ": M2 index out of range");
    const bbox& quad_box = a.objects[p.m1_index].box;
    const bbox& alpha_box = b.objects[*p.m2_index].box;
    const double v = iou(quad_box, alpha_box);
    sum += v;
    s.min_iou = std::min(s.min_iou, v);
    ++s.pairs;
    if (p.fully_visible) {
      ++s.fully_visible;
      if (!pixel_cover(quad_box).contains(alpha_box)) ++s.containment_violations;
    }
  }
  if (s.pairs) s.mean_iou = sum / static_cast<double>(s.pairs);
  else s.min_iou = 0;
  return s;
}

inline std::vector<annotation_pair> read_pairing(const fs::path& path) {
  const auto j = detail::parse_json(detail::read_text(path), path.string());
  std::vector<annotation_pair> out;
  try {
    for (const auto& p : j) {
      annotation_pair ap{p.at("image").get<std::string>(), p.at("m1").get<std::size_t>(), std::nullopt,
                         p.value("fully_visible", false)};
      if (!p.at("m2").is_null()) ap.m2_index = p.at("m2").get<std::size_t>();
      out.push_back(ap);
    }
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, path.string() + ": " + e.what());
  }
  return out;
}

/// Frame-JSON annotations of every *.json file in a directory, in name order.
inline std::vector<annotation_record> read_annotation_dir(const fs::path& dir) {
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  if (ec) throw error(errc::io_error, dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<annotation_record> out;
  for (const auto& f : files) out.push_back(read_frame_json(f));
  return out;
}

}  // namespace fuzzforge
