#include <gtest/gtest.h>

#include <sstream>

#include "fuzzforge/cli.hpp"
#include "test_support.hpp"

using namespace fuzzforge;
using testing_support::temp_dir;

namespace {

struct result {
  int code;
  std::string out, err;
};

result cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "fuzzforge");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A workspace with a prepared sprite catalog and a small config.
class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    testing_support::write_flame_sequence(tmp / "frames" / "burst_cone_orange", 24);
    ASSERT_EQ(cli_run({"prep-sprites", "--roots", (tmp / "frames" / "burst_cone_orange").string(), "--stride", "3",
                       "--out", (tmp / "catalog").string()})
                  .code,
              0);
    detail::write_text(tmp / "config.json", R"({
  "master_seed": 11,
  "sprites": {"catalog": "catalog/catalog.json"},
  "scene": {"image_size": [160, 120], "camera_region": {"min": [-0.5, -0.2, 0], "max": [0.5, 0.2, 0]},
            "yaw_range_deg": [-5, 5], "placement_region": {"min": [-1.5, -0.8, 5], "max": [1.5, 0.8, 9]}},
  "compositor": {"image_size": [96, 64], "count_range": [1, 3]},
  "output": {"root": "out", "formats": ["json", "yolo", "coco"]}
})");
  }

  std::string path(const std::string& p) const { return (tmp / p).string(); }

  temp_dir tmp;
};

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli_run({"no-such-command"}).code, 2);
  EXPECT_EQ(cli_run({}).code, 2);
  const auto r = cli_run({"split", "--out", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--manifest"), std::string::npos) << r.err;
  EXPECT_EQ(cli_run({"eval", "--detections", "a", "--truth", "b", "--mode", "bogus"}).code, 2);
}

TEST(Cli, DomainErrorExitsOne) {
  const auto r = cli_run({"eval", "--detections", "/nonexistent/d.json", "--truth", "/nonexistent/t.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(Workspace, PrepSpritesWritesCatalog) {
  const auto cat = read_catalog(tmp / "catalog" / "catalog.json");
  EXPECT_EQ(cat.size(), 8u);
  EXPECT_EQ(cat.sprites[0].tags, (std::vector<std::string>{"burst", "cone", "orange"}));
}

TEST_F(Workspace, GenM2IsDeterministicAcrossRunsAndJobs) {
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "12", "--seed",
                     "7", "--out", "a"})
                .code,
            0);
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "12", "--seed",
                     "7", "--out", "b"})
                .code,
            0);
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "--jobs", "4", "gen-m2", "--config", "config.json", "--count",
                     "12", "--seed", "7", "--out", "c"})
                .code,
            0);
  const auto a = testing_support::snapshot(tmp / "a");
  EXPECT_EQ(a.size(), 12u * 3 + 2);  // images, labels, yolo, manifest, coco
  EXPECT_EQ(a, testing_support::snapshot(tmp / "b"));
  EXPECT_EQ(a, testing_support::snapshot(tmp / "c"));
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "12", "--seed",
                     "8", "--out", "d"})
                .code,
            0);
  EXPECT_NE(a, testing_support::snapshot(tmp / "d"));

  const auto m = read_manifest(tmp / "a" / "manifest.json");
  EXPECT_EQ(m.prov.method, method_tag::m2);
  EXPECT_EQ(m.prov.master_seed, 7u);
  EXPECT_EQ(m.prov.config_digest, content_digest(detail::read_text(tmp / "config.json")));
  EXPECT_EQ(m.records.size(), 12u);
}

TEST_F(Workspace, GenM2UsesConfigSeedAndOutputRoot) {
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "2"}).code, 0);
  EXPECT_EQ(read_manifest(tmp / "out" / "manifest.json").prov.master_seed, 11u);
}

TEST_F(Workspace, GenM1PairedHasNoContainmentViolations) {
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m1", "--config", "config.json", "--count", "20", "--out",
                     "m1", "--paired"})
                .code,
            0);
  const auto r = cli_run({"diff-annotations", "--m1", path("m1/labels"), "--m2", path("m1/alpha"), "--pairing",
                          path("m1/pairing.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["containment_violations"], 0);
  EXPECT_GT(j["fully_visible_pairs"].get<int>(), 5);
  EXPECT_LE(j["mean_iou"].get<double>(), 1.0);
  EXPECT_EQ(read_manifest(tmp / "m1" / "manifest.json").prov.method, method_tag::m1);
}

TEST_F(Workspace, EvalPerfectSelfDetections) {
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "6"}).code, 0);
  const auto truth = read_manifest(tmp / "out" / "manifest.json");
  std::vector<detection_record> dets;
  for (const auto& r : truth.records)
    for (const auto& o : r.objects) dets.push_back({r.image_name, 0, 1.0, o.box});
  write_detections(dets, tmp / "dets.json");
  const auto r = cli_run({"eval", "--detections", path("dets.json"), "--truth", path("out/manifest.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = parse_report(r.out);
  EXPECT_EQ(rep.ap, 1.0);
  EXPECT_EQ(rep.ap50, 1.0);
  EXPECT_DOUBLE_EQ(rep.fitness, 1.0);
}

TEST_F(Workspace, SplitMixCurateChain) {
  ASSERT_EQ(cli_run({"--root", tmp.path().string(), "gen-m2", "--config", "config.json", "--count", "30"}).code, 0);
  const auto before = testing_support::snapshot(tmp / "out");
  auto r = cli_run({"--root", tmp.path().string(), "split", "--manifest", "out/manifest.json", "--ratios",
                    "0.6,0.2,0.2", "--seed", "3", "--out", "parts"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_manifest(tmp / "parts" / "train.json").records.size(), 18u);
  EXPECT_EQ(read_manifest(tmp / "parts" / "val.json").split, split_kind::val);
  EXPECT_EQ(testing_support::snapshot(tmp / "out"), before);  // inputs untouched

  dataset_manifest real = read_manifest(tmp / "parts" / "train.json");
  for (auto& rec : real.records) rec.image_name = "real_" + rec.image_name;
  real.origin = data_origin::real;
  write_manifest(real, tmp / "real.json");
  r = cli_run({"--root", tmp.path().string(), "mix", "--real", "real.json", "--synth", "parts/train.json", "--spec",
               "R5_S10", "--seed", "2", "--out", "mix.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mix = read_manifest(tmp / "mix.json");
  EXPECT_EQ(mix.records.size(), 15u);
  EXPECT_EQ(mix.prov.mixture->name, "R5_S10");
  EXPECT_EQ(cli_run({"--root", tmp.path().string(), "mix", "--real", "real.json", "--synth", "parts/train.json",
                     "--spec", "R50_S10", "--out", "bad.json"})
                .code,
            1);

  r = cli_run({"--root", tmp.path().string(), "curate", "--manifest", "out/manifest.json", "--images", "out/images",
               "--tau", "0", "--k", "5", "--out", "curated.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_manifest(tmp / "curated.json").records.size(), 5u);
  r = cli_run({"--root", tmp.path().string(), "dedup", "--manifest", "out/manifest.json", "--images", "out/images",
               "--out", "dedup.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(read_manifest(tmp / "dedup.json").records.size(), 30u);
  EXPECT_EQ(cli_run({"dedup", "--out", path("x.json")}).code, 2);
}

TEST(Cli, DedupFromEmbeddingsFile) {
  temp_dir tmp;
  const std::vector<embedding> items = {{{1, 0}, "a", false}, {{1, 0}, "b", false}, {{0, 1}, "c", false}};
  write_embeddings(items, tmp / "e.json");
  const auto r = cli_run({"dedup", "--embeddings", (tmp / "e.json").string(), "--tau", "0", "--out",
                          (tmp / "kept.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(detail::read_text(tmp / "kept.json")), nlohmann::json({"a", "c"}));
}

TEST(Cli, MixSuiteWritesFiftyFive) {
  temp_dir tmp;
  dataset_manifest real, synth;
  real.origin = data_origin::real;
  for (int i = 0; i < 1000; ++i) {
    real.records.push_back({"r" + std::to_string(i), {8, 8}, {}, data_origin::real});
    synth.records.push_back({"s" + std::to_string(i), {8, 8}, {}, data_origin::synthetic});
  }
  write_manifest(real, tmp / "real.json");
  write_manifest(synth, tmp / "synth.json");
  const auto r = cli_run({"--root", tmp.path().string(), "mix", "--real", "real.json", "--synth", "synth.json",
                          "--spec", "suite", "--seed", "1", "2", "3", "4", "5", "--out", "suite"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing_support::snapshot(tmp / "suite").size(), 55u);
  EXPECT_EQ(read_manifest(tmp / "suite" / "R500_S500_seed3.json").records.size(), 1000u);
}

TEST(Cli, BudgetPrintsFrontier) {
  const auto r = cli_run({"budget", "--c-real", "2", "--c-synth", "1", "--c-total", "1000", "--step", "250"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "n_real,n_synth\n0,1000\n250,500\n500,0\n");
  EXPECT_EQ(cli_run({"budget", "--c-real", "2", "--c-synth", "1", "--c-total", "10", "--step", "0"}).code, 1);
}

TEST(Cli, ReportRendersTable) {
  temp_dir tmp;
  detail::write_text(tmp / "r1.json", report_json({{}, 0.2, 0.40, 0.22, false}));
  detail::write_text(tmp / "table.json", R"({"test_sets": ["RealRareFire"], "rows": [
    {"name": "R500_S500", "reports": {"RealRareFire": ["r1.json",
      {"ap": 0.2, "ap50": 0.446, "fitness": 0.2, "ap_per_threshold": [0,0,0,0,0,0,0,0,0,0]}]}}]})");
  auto r = cli_run({"report", "--input", (tmp / "table.json").string(), "--metrics", "AP50"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("**42.30 ± 3.25**"), std::string::npos) << r.out;
  r = cli_run({"report", "--input", (tmp / "table.json").string(), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 5), "name,");
}

TEST(Overlay, Examples) {
  const raster img(20, 20, {0, 0, 0, 255});
  annotation_record rec{"a.png", {20, 20}, {}, data_origin::synthetic};
  EXPECT_EQ(overlay(img, rec), img);

  rec.objects.push_back({0, bbox::from_corners(5, 5, 15, 12)});
  const raster out = overlay(img, rec);
  int changed = 0;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool inside = x >= 5 && x < 15 && y >= 5 && y < 12;
      const bool strip = inside && (x < 7 || x >= 13 || y < 7 || y >= 10);
      EXPECT_EQ(out.at(x, y) != img.at(x, y), strip) << x << "," << y;
      changed += strip;
    }
  EXPECT_EQ(changed, 10 * 7 - 6 * 3);

  rec.objects = {{0, bbox::from_corners(15, 5, 25, 10)}};
  try {
    overlay(img, rec);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::dimension_mismatch);
  }
  rec.objects.clear();
  EXPECT_THROW(overlay(raster(10, 20), rec), error);
}

TEST(Overlay, CommandWritesPng) {
  temp_dir tmp;
  write_png(raster(20, 20, {0, 0, 0, 255}), tmp / "img.png");
  write_frame_json({"img.png", {20, 20}, {{0, bbox(10, 10, 6, 6)}}, data_origin::synthetic}, tmp / "img.json");
  const auto r = cli_run({"--root", tmp.path().string(), "overlay", "--image", "img.png", "--annotation", "img.json",
                          "--out", "vis.png"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_png(tmp / "vis.png").at(7, 7).r, 255);
}

TEST(DiffAnnotations, IouExamples) {
  const camera_pose cam({0, 0, 0}, 0, 0, 500, {500, 500}, {1000, 1000});
  const std::vector<placement> pl = {{billboard({0, 0, 10}, 2, 2, fixed_orientation{{0, 0, -1}}), 0}};
  auto diff_for = [&](const sprite& s) {
    sprite_catalog cat;
    cat.sprites.push_back(s);
    std::vector<billboard_trace> trace;
    const auto f = render_m1(cam, pl, cat, raster(1000, 1000), {}, &trace);
    const annotation_record m1 = f.to_record("f.png");
    const annotation_record m2{"f.png", {1000, 1000}, {{0, *trace[0].alpha_box}}, data_origin::synthetic};
    return diff_annotations({m1}, {m2}, {{"f.png", 0, 0, trace[0].fully_visible}});
  };
  const auto full = diff_for(testing_support::opaque_sprite(8, 8));
  EXPECT_NEAR(full.mean_iou, 1.0, 1e-12);
  EXPECT_EQ(full.containment_violations, 0u);

  // untrimmed sprite opaque only in the central half of each axis
  sprite centre;
  centre.pixels = raster(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) centre.pixels.at(x, y) = {255, 200, 0, 255};
  const auto quarter = diff_for(centre);
  EXPECT_NEAR(quarter.mean_iou, 0.25, 1e-12);
  EXPECT_EQ(quarter.min_iou, quarter.mean_iou);
  EXPECT_EQ(quarter.containment_violations, 0u);
  EXPECT_EQ(quarter.fully_visible, 1u);
}

TEST(DiffAnnotations, PairingMismatch) {
  const annotation_record a{"a.png", {10, 10}, {{0, bbox(5, 5, 2, 2)}}, data_origin::synthetic};
  try {
    diff_annotations({a}, {a}, {{"b.png", 0, 0, true}});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::pairing_mismatch);
  }
  EXPECT_THROW(diff_annotations({a}, {a}, {{"a.png", 3, 0, true}}), error);
}

TEST(Config, ParsesSectionsAndRejectsBadValues) {
  const auto c = parse_config(R"({"master_seed": 5, "scene": {"orientation": "face_camera", "fov_vertical_deg": 90,
    "track_targets": [[1, 0, 4]], "pitch_fixed": false}, "curation": {"tau": 0.1, "k": 7, "split": [0.8, 0.1, 0.1],
    "rule": "mean"}, "mixtures": {"specs": ["R1_S1"], "seeds": [9]}})",
                              "/base");
  EXPECT_EQ(c.master_seed, 5u);
  EXPECT_TRUE(std::holds_alternative<face_camera>(c.scene.orientation));
  EXPECT_NEAR(c.scene.fov_vertical, M_PI / 2, 1e-12);
  EXPECT_EQ(c.scene.track_targets.size(), 1u);
  EXPECT_EQ(c.curation.k, 7u);
  EXPECT_EQ(c.curation.rule, diversity_rule::mean_distance);
  EXPECT_EQ(c.mixtures.seeds, (std::vector<std::uint64_t>{9}));
  EXPECT_THROW(parse_config(R"({"scene": {"orientation": "sideways"}})"), error);
  EXPECT_THROW(parse_config(R"({"scene": {"flame_count_range": [0, 2]}})"), error);
  EXPECT_THROW(parse_config(R"({"output": {"formats": ["voc"]}})"), error);
  EXPECT_NE(parse_config("{}").digest, parse_config("{ }").digest);
}

TEST(ParallelFor, CoversEveryIndexOnceAndPropagatesErrors) {
  std::vector<std::atomic<int>> hits(500);
  parallel_for(500, 6, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) {
                 if (i == 17) throw error(errc::io_error, "boom");
               }),
               error);
}
