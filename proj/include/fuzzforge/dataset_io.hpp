#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuzzforge/error.hpp"
#include "fuzzforge/geometry.hpp"

namespace fuzzforge {

enum class data_origin { real, synthetic, mixed };
enum class split_kind { train, val, test, unsplit };
enum class method_tag { none, m1, m2 };

inline const char* to_string(data_origin o) {
  switch (o) {
    case data_origin::real: return "real";
    case data_origin::synthetic: return "synthetic";
    case data_origin::mixed: return "mixed";
  }
  return "?";
}
inline const char* to_string(split_kind s) {
  switch (s) {
    case split_kind::train: return "train";
    case split_kind::val: return "val";
    case split_kind::test: return "test";
    case split_kind::unsplit: return "unsplit";
  }
  return "?";
}
inline const char* to_string(method_tag m) {
  switch (m) {
    case method_tag::none: return "none";
    case method_tag::m1: return "M1";
    case method_tag::m2: return "M2";
  }
  return "?";
}

struct annotation_object {
  int class_id = 0;
  bbox box;
};

struct annotation_record {
  std::string image_name;
  image_size size;
  std::vector<annotation_object> objects;
  data_origin origin = data_origin::synthetic;
};

struct mixture_info {
  std::string name;
  int n_real = 0;
  int n_synth = 0;
  std::uint64_t seed = 0;
};

struct provenance {
  std::uint64_t master_seed = 0;
  method_tag method = method_tag::none;
  std::string config_digest;
  std::optional<mixture_info> mixture;
};

struct dataset_manifest {
  std::vector<annotation_record> records;
  data_origin origin = data_origin::synthetic;
  split_kind split = split_kind::unsplit;
  provenance prov;
};

struct detection_record {
  std::string image_name;
  int class_id = 0;
  double confidence = 0;
  bbox box;
};

/// Containment tolerance for boxes computed from clipped corners.
inline constexpr double box_bounds_tolerance = 1e-9;

inline void validate(const annotation_record& r) {
  if (r.size.width <= 0 || r.size.height <= 0)
    throw error(errc::invalid_argument, r.image_name + ": image size must be positive");
  for (const auto& o : r.objects) {
    if (o.class_id != 0) throw error(errc::invalid_argument, r.image_name + ": class id must be 0");
    const bbox& b = o.box;
    if (b.x_min() < -box_bounds_tolerance || b.y_min() < -box_bounds_tolerance ||
        b.x_max() > r.size.width + box_bounds_tolerance ||
        b.y_max() > r.size.height + box_bounds_tolerance)
      throw error(errc::invalid_argument, r.image_name + ": box outside image");
  }
}

inline void validate(const dataset_manifest& m) {
  std::set<std::string> names;
  for (const auto& r : m.records) {
    validate(r);
    if (!names.insert(r.image_name).second)
      throw error(errc::invalid_argument, "duplicate image name " + r.image_name);
  }
}

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string object_json(const annotation_object& o) {
  return "{\"class\":" + std::to_string(o.class_id) + ",\"cx\":" + fixed6(o.box.cx()) +
         ",\"cy\":" + fixed6(o.box.cy()) + ",\"h\":" + fixed6(o.box.h()) +
         ",\"w\":" + fixed6(o.box.w()) + "}";
}

inline std::string record_json(const annotation_record& r, bool with_origin) {
  std::string s = "{\"height\":" + std::to_string(r.size.height) + ",\"image\":" + quoted(r.image_name) +
                  ",\"objects\":[";
  for (std::size_t i = 0; i < r.objects.size(); ++i) {
    if (i) s += ',';
    s += object_json(r.objects[i]);
  }
  s += "]";
  if (with_origin) s += ",\"origin\":" + quoted(to_string(r.origin));
  s += ",\"width\":" + std::to_string(r.size.width) + "}";
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw error(errc::io_error, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw error(errc::io_error, "write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw error(errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline nlohmann::json parse_json(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw error(errc::parse_error, source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                       " (offset " + std::to_string(e.byte) + "): " + e.what());
  }
}

template <class Enum, std::size_t N>
Enum enum_from(const std::string& s, const Enum (&values)[N], const char* what) {
  for (Enum v : values)
    if (s == to_string(v)) return v;
  throw error(errc::parse_error, std::string("unknown ") + what + " '" + s + "'");
}

inline annotation_record record_from(const nlohmann::json& j, data_origin fallback) {
  annotation_record r;
  r.image_name = j.at("image").get<std::string>();
  r.size = {j.at("width").get<int>(), j.at("height").get<int>()};
  for (const auto& o : j.at("objects"))
    r.objects.push_back({o.at("class").get<int>(),
                         bbox(o.at("cx").get<double>(), o.at("cy").get<double>(),
                              o.at("w").get<double>(), o.at("h").get<double>())});
  r.origin = fallback;
  if (j.contains("origin"))
    r.origin = enum_from(j.at("origin").get<std::string>(),
                         {data_origin::real, data_origin::synthetic, data_origin::mixed}, "origin");
  return r;
}

}  // namespace detail

// Per-frame annotation JSON -------------------------------------------------

inline std::string frame_json(const annotation_record& record) {
  validate(record);
  return detail::record_json(record, false) + "\n";
}

inline void write_frame_json(const annotation_record& record, const std::filesystem::path& path) {
  detail::write_text(path, frame_json(record));
}

inline annotation_record parse_frame_json(const std::string& text, const std::string& source = "<frame>") {
  const auto j = detail::parse_json(text, source);
  try {
    return detail::record_from(j, data_origin::synthetic);
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, source + ": " + e.what());
  }
}

inline annotation_record read_frame_json(const std::filesystem::path& path) {
  return parse_frame_json(detail::read_text(path), path.string());
}

// YOLO text -----------------------------------------------------------------

inline std::string yolo_text(const annotation_record& record) {
  validate(record);
  std::string s;
  const double W = record.size.width, H = record.size.height;
  for (const auto& o : record.objects) {
    s += std::to_string(o.class_id) + " " + detail::fixed6(o.box.cx() / W) + " " +
         detail::fixed6(o.box.cy() / H) + " " + detail::fixed6(o.box.w() / W) + " " +
         detail::fixed6(o.box.h() / H) + "\n";
  }
  return s;
}

inline void write_yolo(const annotation_record& record, const std::filesystem::path& path) {
  detail::write_text(path, yolo_text(record));
}

// Dataset manifests ---------------------------------------------------------

inline std::string manifest_json(const dataset_manifest& m) {
  validate(m);
  std::string s = "{\n\"origin\":" + detail::quoted(to_string(m.origin)) + ",\n\"provenance\":{";
  s += "\"config_digest\":" + detail::quoted(m.prov.config_digest) +
       ",\"master_seed\":" + std::to_string(m.prov.master_seed) +
       ",\"method\":" + detail::quoted(to_string(m.prov.method));
  if (m.prov.mixture) {
    const auto& mx = *m.prov.mixture;
    s += ",\"mixture\":{\"n_real\":" + std::to_string(mx.n_real) + ",\"n_synth\":" +
         std::to_string(mx.n_synth) + ",\"name\":" + detail::quoted(mx.name) +
         ",\"seed\":" + std::to_string(mx.seed) + "}";
  }
  s += "},\n\"records\":[";
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    s += i ? ",\n" : "\n";
    s += detail::record_json(m.records[i], true);
  }
  s += "\n],\n\"split\":" + detail::quoted(to_string(m.split)) + "\n}\n";
  return s;
}

inline void write_manifest(const dataset_manifest& m, const std::filesystem::path& path) {
  detail::write_text(path, manifest_json(m));
}

inline dataset_manifest parse_manifest(const std::string& text, const std::string& source = "<manifest>") {
  const auto j = detail::parse_json(text, source);
  dataset_manifest m;
  try {
    m.origin = detail::enum_from(j.at("origin").get<std::string>(),
                                 {data_origin::real, data_origin::synthetic, data_origin::mixed}, "origin");
    m.split = detail::enum_from(j.at("split").get<std::string>(),
                                {split_kind::train, split_kind::val, split_kind::test, split_kind::unsplit},
                                "split");
    const auto& p = j.at("provenance");
    m.prov.master_seed = p.at("master_seed").get<std::uint64_t>();
    m.prov.config_digest = p.at("config_digest").get<std::string>();
    m.prov.method = detail::enum_from(p.at("method").get<std::string>(),
                                      {method_tag::none, method_tag::m1, method_tag::m2}, "method");
    if (p.contains("mixture")) {
      const auto& mx = p.at("mixture");
      m.prov.mixture = mixture_info{mx.at("name").get<std::string>(), mx.at("n_real").get<int>(),
                                    mx.at("n_synth").get<int>(), mx.at("seed").get<std::uint64_t>()};
    }
    for (const auto& r : j.at("records")) m.records.push_back(detail::record_from(r, m.origin));
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, source + ": " + e.what());
  }
  validate(m);
  return m;
}

inline dataset_manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_text(path), path.string());
}

// COCO export ---------------------------------------------------------------

/// images/annotations/categories with ids assigned 1.. in manifest order and
/// bbox as [x_min, y_min, w, h].
inline std::string coco_json(const dataset_manifest& m) {
  validate(m);
  std::string images, anns;
  int ann_id = 1;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const int image_id = static_cast<int>(i) + 1;
    images += std::string(i ? ",\n" : "\n") + "{\"file_name\":" + detail::quoted(r.image_name) +
              ",\"height\":" + std::to_string(r.size.height) + ",\"id\":" + std::to_string(image_id) +
              ",\"width\":" + std::to_string(r.size.width) + "}";
    for (const auto& o : r.objects) {
      anns += std::string(ann_id > 1 ? ",\n" : "\n") + "{\"area\":" + detail::fixed6(o.box.area()) +
              ",\"bbox\":[" + detail::fixed6(o.box.x_min()) + "," + detail::fixed6(o.box.y_min()) + "," +
              detail::fixed6(o.box.w()) + "," + detail::fixed6(o.box.h()) +
              "],\"category_id\":" + std::to_string(o.class_id) + ",\"id\":" + std::to_string(ann_id) +
              ",\"image_id\":" + std::to_string(image_id) + ",\"iscrowd\":0}";
      ++ann_id;
    }
  }
  return "{\n\"annotations\":[" + anns + "\n],\n\"categories\":[{\"id\":0,\"name\":\"fire\"}],\n\"images\":[" +
         images + "\n]\n}\n";
}

inline void export_coco(const dataset_manifest& m, const std::filesystem::path& path) {
  detail::write_text(path, coco_json(m));
}

inline dataset_manifest parse_coco(const std::string& text, const std::string& source = "<coco>") {
  const auto j = detail::parse_json(text, source);
  dataset_manifest m;
  try {
    std::vector<int> ids;
    for (const auto& img : j.at("images")) {
      annotation_record r;
      r.image_name = img.at("file_name").get<std::string>();
      r.size = {img.at("width").get<int>(), img.at("height").get<int>()};
      ids.push_back(img.at("id").get<int>());
      m.records.push_back(std::move(r));
    }
    for (const auto& a : j.at("annotations")) {
      const int image_id = a.at("image_id").get<int>();
      std::size_t k = 0;
      while (k < ids.size() && ids[k] != image_id) ++k;
      if (k == ids.size()) throw error(errc::unknown_image, "annotation references image id " + std::to_string(image_id));
      const auto& b = a.at("bbox");
      const double x = b.at(0).get<double>(), y = b.at(1).get<double>();
      const double w = b.at(2).get<double>(), h = b.at(3).get<double>();
      m.records[k].objects.push_back({a.at("category_id").get<int>(), bbox(x + w / 2, y + h / 2, w, h)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, source + ": " + e.what());
  }
  return m;
}

inline dataset_manifest import_coco(const std::filesystem::path& path) {
  return parse_coco(detail::read_text(path), path.string());
}

// Detections ----------------------------------------------------------------

/// JSON array of {"image","class","confidence","cx","cy","w","h"}.
inline std::vector<detection_record> parse_detections(const std::string& text,
                                                      const std::string& source = "<detections>") {
  const auto j = detail::parse_json(text, source);
  if (!j.is_array()) throw error(errc::parse_error, source + ": expected a JSON array");
  std::vector<detection_record> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& d = j[i];
    double conf, cx, cy, w, h;
    std::string image;
    int cls;
    try {
      image = d.at("image").get<std::string>();
      cls = d.value("class", 0);
      conf = d.at("confidence").get<double>();
      cx = d.at("cx").get<double>();
      cy = d.at("cy").get<double>();
      w = d.at("w").get<double>();
      h = d.at("h").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw error(errc::parse_error, source + ": detection " + std::to_string(i) + ": " + e.what());
    }
    if (!(conf >= 0.0 && conf <= 1.0))
      throw error(errc::invalid_confidence,
                  source + ": detection " + std::to_string(i) + " has confidence " + std::to_string(conf));
    if (!(w > 0) || !(h > 0))
      throw error(errc::invalid_argument, source + ": detection " + std::to_string(i) + " has zero area");
    out.push_back({image, cls, conf, bbox(cx, cy, w, h)});
  }
  return out;
}

inline std::vector<detection_record> read_detections(const std::filesystem::path& path) {
  return parse_detections(detail::read_text(path), path.string());
}

inline std::string detections_json(const std::vector<detection_record>& dets) {
  std::string s = "[";
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& d = dets[i];
    s += std::string(i ? ",\n" : "\n") + "{\"class\":" + std::to_string(d.class_id) +
         ",\"confidence\":" + detail::fixed6(d.confidence) + ",\"cx\":" + detail::fixed6(d.box.cx()) +
         ",\"cy\":" + detail::fixed6(d.box.cy()) + ",\"h\":" + detail::fixed6(d.box.h()) +
         ",\"image\":" + detail::quoted(d.image_name) + ",\"w\":" + detail::fixed6(d.box.w()) + "}";
  }
  return s + (dets.empty() ? "]\n" : "\n]\n");
}

inline void write_detections(const std::vector<detection_record>& dets, const std::filesystem::path& path) {
  detail::write_text(path, detections_json(dets));
}

}  // namespace fuzzforge
