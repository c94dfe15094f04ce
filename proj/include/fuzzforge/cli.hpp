#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fuzzforge/curation.hpp"
#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/error.hpp"
#include "fuzzforge/metrics.hpp"
#include "fuzzforge/mixtures.hpp"
#include "fuzzforge/pipeline.hpp"
#include "fuzzforge/sprites.hpp"

namespace fuzzforge::cli {

namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_domain = 1;
inline constexpr int exit_usage = 2;

namespace detail {

inline std::vector<double> parse_ratios(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
  if (out.size() != 3) throw CLI::ValidationError("--ratios", "expected three comma-separated ratios");
  return out;
}

inline std::vector<embedding> embed_manifest(const dataset_manifest& m, const fs::path& images, unsigned jobs) {
  std::vector<embedding> out(m.records.size());
  parallel_for(m.records.size(), jobs, [&](std::size_t i) {
    out[i] = embed(read_png(images / m.records[i].image_name), m.records[i].image_name);
  });
  return out;
}

}  // namespace detail

/// Entry point shared by the fuzzforge binary and the tests. Exit status: 0 on
/// success, 1 on a domain error, 2 on a usage error. args[0] is the program
/// name. Logs go to `err`, data to files or `out`.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic fire dataset generation and detection evaluation"};
  app.require_subcommand(1);
  fs::path root = ".";
  unsigned jobs = default_jobs();
  app.add_option("--root", root, "Dataset root that relative paths resolve against");
  app.add_option("--jobs", jobs, "Worker threads (default: $FUZZFORGE_JOBS or 1)")->check(CLI::PositiveNumber);

  auto at_root = [&](const fs::path& p) { return p.is_absolute() ? p : root / p; };
  auto load_config = [&](const std::string& path) {
    return path.empty() ? pipeline_config{} : read_config(at_root(path));
  };

  // prep-sprites
  auto* prep = app.add_subcommand("prep-sprites", "Trim and sample flame frame sequences into a sprite catalog");
  std::vector<std::string> prep_roots;
  int prep_stride = 12, prep_alpha = 0;
  std::string prep_out;
  prep->add_option("--roots", prep_roots, "Frame sequence directories")->required();
  prep->add_option("--stride", prep_stride, "Keep one frame every N");
  prep->add_option("--alpha-threshold", prep_alpha, "Alpha above this counts as coloured")->check(CLI::Range(0, 254));
  prep->add_option("--out", prep_out, "Output directory for sprites/ and catalog.json")->required();

  // gen-m1 / gen-m2
  std::string gen_config, gen_out;
  std::size_t gen_count = 10;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false, gen_paired = false;
  auto add_gen = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--config", gen_config, "Pipeline config (JSON)");
    c->add_option("--count", gen_count, "Number of frames");
    c->add_option("--seed", gen_seed, "Master seed (overrides the config)")->each([&](const std::string&) { gen_seed_set = true; });
    c->add_option("--out", gen_out, "Output directory (default: config output.root)");
    return c;
  };
  auto* gen1 = add_gen("gen-m1", "Method 1: project 3D billboards and annotate by corner projection");
  gen1->add_flag("--paired", gen_paired, "Also write pixel-tight annotations and a pairing file");
  auto* gen2 = add_gen("gen-m2", "Method 2: composite sprites in 2D with pixel-exact annotations");

  // dedup / curate
  std::string cur_manifest, cur_images, cur_embeddings, cur_out, cur_rule = "fps", cur_config;
  double cur_tau = -1;
  std::size_t cur_k = 0;
  auto add_cur = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--manifest", cur_manifest, "Dataset manifest whose images are embedded");
    c->add_option("--images", cur_images, "Directory holding the manifest's images");
    c->add_option("--embeddings", cur_embeddings, "Precomputed embeddings (JSON array of {image, vector})");
    c->add_option("--tau", cur_tau, "Near-duplicate distance threshold (default 0.05)");
    c->add_option("--config", cur_config, "Pipeline config supplying curation defaults");
    c->add_option("--out", cur_out, "Output file")->required();
    return c;
  };
  auto* dedup_cmd = add_cur("dedup", "Remove exact and near duplicates by embedding distance");
  auto* curate_cmd = add_cur("curate", "Deduplicate, then select the k most diverse items");
  curate_cmd->add_option("--k", cur_k, "Number of items to select (0 keeps all)");
  curate_cmd->add_option("--rule", cur_rule, "fps or mean")->check(CLI::IsMember({"fps", "mean"}));

  // split
  auto* split_cmd = app.add_subcommand("split", "Shuffle and split a manifest into train/val/test");
  std::string split_manifest, split_out, split_ratios = "0.714,0.143,0.143";
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--manifest", split_manifest)->required();
  split_cmd->add_option("--ratios", split_ratios, "train,val,test");
  split_cmd->add_option("--seed", split_seed);
  split_cmd->add_option("--out", split_out, "Output directory")->required();

  // mix
  auto* mix_cmd = app.add_subcommand("mix", "Build R{m}_S{n} training mixtures");
  std::string mix_real, mix_synth, mix_spec, mix_out;
  std::vector<std::uint64_t> mix_seeds{0};
  mix_cmd->add_option("--real", mix_real, "Real pool manifest")->required();
  mix_cmd->add_option("--synth", mix_synth, "Synthetic pool manifest")->required();
  mix_cmd->add_option("--spec", mix_spec, "Mixture name such as R500_S500, or 'suite'")->required();
  mix_cmd->add_option("--seed", mix_seeds, "Seed(s); the suite uses every seed given");
  mix_cmd->add_option("--out", mix_out, "Output manifest (directory for the suite)")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth");
  std::string eval_dets, eval_truth, eval_out, eval_mode = "coco101";
  eval_cmd->add_option("--detections", eval_dets)->required();
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth manifest")->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON (stdout when omitted)");
  eval_cmd->add_option("--mode", eval_mode, "coco101 or area")->check(CLI::IsMember({"coco101", "area"}));

  // report
  auto* report_cmd = app.add_subcommand("report", "Render multi-seed comparison tables");
  std::string report_input, report_format = "markdown", report_out;
  std::vector<std::string> report_metrics{"AP50", "AP"};
  report_cmd->add_option("--input", report_input, "Table description JSON")->required();
  report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"markdown", "csv"}));
  report_cmd->add_option("--metrics", report_metrics)->check(CLI::IsMember({"AP50", "AP", "Fitness"}));
  report_cmd->add_option("--out", report_out, "Output file (stdout when omitted)");

  // overlay
  auto* overlay_cmd = app.add_subcommand("overlay", "Draw annotation boxes onto an image");
  std::string ov_image, ov_annotation, ov_out;
  overlay_cmd->add_option("--image", ov_image)->required();
  overlay_cmd->add_option("--annotation", ov_annotation, "Frame JSON")->required();
  overlay_cmd->add_option("--out", ov_out)->required();

  // diff-annotations
  auto* diff_cmd = app.add_subcommand("diff-annotations", "Compare projected-quad boxes with pixel-tight boxes");
  std::string diff_m1, diff_m2, diff_pairing, diff_out;
  diff_cmd->add_option("--m1", diff_m1, "Directory of Method 1 frame JSON")->required();
  diff_cmd->add_option("--m2", diff_m2, "Directory of pixel-tight frame JSON")->required();
  diff_cmd->add_option("--pairing", diff_pairing)->required();
  diff_cmd->add_option("--out", diff_out, "Stats JSON (stdout when omitted)");

  // budget
  auto* budget_cmd = app.add_subcommand("budget", "Enumerate (n_real, n_synth) pairs within cost and time budgets");
  budget_params bp;
  long long budget_step = 250;
  long long budget_cap = -1;
  budget_cmd->add_option("--c-real", bp.c_real)->required();
  budget_cmd->add_option("--c-synth", bp.c_synth)->required();
  budget_cmd->add_option("--c-total", bp.c_total)->required();
  budget_cmd->add_option("--t-real", bp.t_real);
  budget_cmd->add_option("--t-synth", bp.t_synth);
  budget_cmd->add_option("--t-total", bp.t_total, "Time budget (default: non-binding)");
  budget_cmd->add_option("--step", budget_step);
  budget_cmd->add_option("--n-synth-max", budget_cap, "Cap on counts (default 10 x the larger budget)");

  std::vector<std::string> argv_store = std::move(args);
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  }

  auto emit = [&](const std::string& path, const std::string& text) {
    if (path.empty())
      out << text;
    else
      fuzzforge::detail::write_text(at_root(path), text);
  };

  try {
    if (*prep) {
      std::vector<fs::path> roots;
      for (const auto& r : prep_roots) roots.push_back(at_root(r));
      auto catalog = build_catalog(roots, prep_stride, static_cast<std::uint8_t>(prep_alpha));
      write_catalog(catalog, at_root(prep_out));
      err << "prep-sprites: " << catalog.size() << " sprites, " << catalog.skipped_empty << " empty frames skipped\n";
    } else if (*gen1 || *gen2) {
      const pipeline_config config = load_config(gen_config);
      const fs::path dest = gen_out.empty() ? config.output.root : at_root(gen_out);
      const std::uint64_t seed = gen_seed_set ? gen_seed : config.master_seed;
      const auto s = generate_dataset(config, *gen1 ? method_tag::m1 : method_tag::m2, gen_count, seed, jobs, dest,
                                      *gen1 && gen_paired);
      err << (*gen1 ? "gen-m1: " : "gen-m2: ") << s.frames << " frames, " << s.boxes << " boxes, " << s.skipped
          << " skipped\n";
    } else if (*dedup_cmd || *curate_cmd) {
      const pipeline_config config = load_config(cur_config);
      const double tau = cur_tau >= 0 ? cur_tau : config.curation.tau;
      std::vector<embedding> items;
      std::optional<dataset_manifest> manifest;
      if (!cur_manifest.empty()) manifest = read_manifest(at_root(cur_manifest));
      if (!cur_embeddings.empty()) {
        items = read_embeddings(at_root(cur_embeddings));
      } else if (manifest && !cur_images.empty()) {
        items = detail::embed_manifest(*manifest, at_root(cur_images), jobs);
      } else {
        throw CLI::ValidationError("--embeddings", "give --embeddings, or --manifest together with --images");
      }
      auto kept = dedup(items, tau);
      std::vector<std::size_t> chosen = kept;
      if (*curate_cmd) {
        const std::size_t k = cur_k ? cur_k : (config.curation.k ? config.curation.k : kept.size());
        std::vector<embedding> pool;
        for (auto i : kept) pool.push_back(items[i]);
        const auto rule = cur_rule == "mean" ? diversity_rule::mean_distance : diversity_rule::farthest_point;
        chosen.clear();
        for (auto i : select_diverse(pool, k, rule)) chosen.push_back(kept[i]);
      }
      err << (*curate_cmd ? "curate: " : "dedup: ") << items.size() << " items, " << kept.size() << " after dedup, "
          << chosen.size() << " selected\n";
      if (manifest) {
        std::map<std::string, const annotation_record*> by_name;
        for (const auto& r : manifest->records) by_name[r.image_name] = &r;
        dataset_manifest result = *manifest;
        result.records.clear();
        for (auto i : chosen) {
          auto it = by_name.find(items[i].image_name);
          if (it == by_name.end()) throw error(errc::unknown_image, items[i].image_name + " is not in the manifest");
          result.records.push_back(*it->second);
        }
        write_manifest(result, at_root(cur_out));
      } else {
        nlohmann::ordered_json names = nlohmann::ordered_json::array();
        for (auto i : chosen) names.push_back(items[i].image_name);
        fuzzforge::detail::write_text(at_root(cur_out), names.dump(1) + "\n");
      }
    } else if (*split_cmd) {
      const auto r = detail::parse_ratios(split_ratios);
      split_spec spec{r[0], r[1], r[2], split_seed};
      const auto parts = split(read_manifest(at_root(split_manifest)), spec);
      const fs::path dir = at_root(split_out);
      write_manifest(parts.train, dir / "train.json");
      write_manifest(parts.val, dir / "val.json");
      write_manifest(parts.test, dir / "test.json");
      err << "split: " << parts.train.records.size() << "/" << parts.val.records.size() << "/"
          << parts.test.records.size() << "\n";
    } else if (*mix_cmd) {
      const auto real = read_manifest(at_root(mix_real));
      const auto synth = read_manifest(at_root(mix_synth));
      if (mix_spec == "suite") {
        const fs::path dir = at_root(mix_out);
        const auto suite = strategy_suite(real, synth, mix_seeds);
        for (const auto& e : suite)
          write_manifest(e.manifest, dir / (e.spec.name() + "_seed" + std::to_string(e.spec.seed()) + ".json"));
        err << "mix: " << suite.size() << " manifests\n";
      } else {
        if (mix_seeds.size() != 1) throw CLI::ValidationError("--seed", "a single mixture takes exactly one seed");
        const auto spec = mixture_spec::parse(mix_spec, mix_seeds.front());
        write_manifest(build_mixture(real, synth, spec), at_root(mix_out));
      }
    } else if (*eval_cmd) {
      const auto rep = evaluate(read_detections(at_root(eval_dets)), read_manifest(at_root(eval_truth)),
                                eval_mode == "area" ? ap_mode::area : ap_mode::coco101);
      emit(eval_out, report_json(rep));
      if (rep.undefined) err << "eval: no truths and no detections; AP reported as 0\n";
    } else if (*report_cmd) {
      const fs::path input = at_root(report_input);
      const auto j = fuzzforge::detail::parse_json(fuzzforge::detail::read_text(input), input.string());
      std::vector<std::string> test_sets;
      std::vector<table_row> rows;
      try {
        test_sets = j.at("test_sets").get<std::vector<std::string>>();
        for (const auto& row : j.at("rows")) {
          table_row tr{row.at("name").get<std::string>(), {}};
          for (const auto& t : test_sets) {
            std::vector<eval_report> reps;
            for (const auto& item : row.at("reports").at(t)) {
              if (item.is_string()) {
                const fs::path p = fuzzforge::detail::resolve(input.parent_path(), item.get<std::string>());
                reps.push_back(parse_report(fuzzforge::detail::read_text(p), p.string()));
              } else {
                reps.push_back(parse_report(item.dump(), input.string()));
              }
            }
            tr.per_test_set.push_back(aggregate_seeds(reps));
          }
          rows.push_back(std::move(tr));
        }
      } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, input.string() + ": " + e.what());
      }
      std::vector<metric> metrics;
      for (const auto& m : report_metrics)
        metrics.push_back(m == "AP50" ? metric::ap50 : m == "AP" ? metric::ap : metric::fitness);
      emit(report_out, render_table(test_sets, rows, metrics,
                                    report_format == "csv" ? table_format::csv : table_format::markdown));
    } else if (*overlay_cmd) {
      const auto img = read_png(at_root(ov_image));
      write_png(overlay(img, read_frame_json(at_root(ov_annotation))), at_root(ov_out));
    } else if (*diff_cmd) {
      const auto s = diff_annotations(read_annotation_dir(at_root(diff_m1)), read_annotation_dir(at_root(diff_m2)),
                                      read_pairing(at_root(diff_pairing)));
      nlohmann::ordered_json j;
      j["pairs"] = s.pairs;
      j["unmatched"] = s.unmatched;
      j["fully_visible_pairs"] = s.fully_visible;
      j["mean_iou"] = s.mean_iou;
      j["min_iou"] = s.min_iou;
      j["containment_violations"] = s.containment_violations;
      emit(diff_out, j.dump(2) + "\n");
    } else if (*budget_cmd) {
      if (budget_cmd->count("--t-total") == 0) {
        // Without a time budget the time constraint never binds.
        bp.t_real = bp.t_synth = 0;
        bp.t_total = 0;
      }
      const long long cap =
          budget_cap >= 0 ? budget_cap : static_cast<long long>(10 * std::max(bp.c_total, bp.t_total));
      std::string csv = "n_real,n_synth\n";
      for (auto [r, s] : budget_frontier(bp, budget_step, cap)) csv += std::to_string(r) + "," + std::to_string(s) + "\n";
      out << csv;
    }
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const fuzzforge::error& e) {
    err << "error: " << e.what() << "\n";
    return exit_domain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_domain;
  }
  return exit_ok;
}

}  // namespace fuzzforge::cli
