// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 internal error; every non-zero exit writes a message to `err`.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trigsim/intensity.hpp"
#include "trigsim/kitti.hpp"
#include "trigsim/materials.hpp"
#include "trigsim/poison.hpp"
#include "trigsim/trigger.hpp"
#include "trigsim/version.hpp"

namespace trigsim::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct CommandResult {
  int exit_code = kOk;
  std::optional<std::filesystem::path> report_path;
};

namespace detail {

inline std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(kitti::read_file_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_report(const std::filesystem::path& path, const nlohmann::ordered_json& report) {
  kitti::write_file_text(path, report.dump(2) + "\n");
}

inline std::vector<MaterialSpec> database(const std::string& db_path) {
  return db_path.empty() ? builtin_database() : load_material_database(db_path);
}

// Trigger overrides shared by `trigger synth` and `poison run`.
struct TriggerFlags {
  std::optional<double> w, h, s;
  std::optional<int> m_l;
  std::optional<std::string> material;
  std::optional<std::string> intensity;
  std::optional<double> fixed_value;
  std::optional<std::uint64_t> intensity_seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--w", w, "Trigger width (m)");
    cmd->add_option("--h", h, "Trigger height (m)");
    cmd->add_option("--s", s, "Density scale constant");
    cmd->add_option("--m-l", m_l, "Minimum points per axis");
    cmd->add_option("--material", material, "Trigger material name");
    cmd->add_option("--intensity", intensity, "Intensity mode: brdf, fixed, random, none");
    cmd->add_option("--fixed-value", fixed_value, "Intensity for --intensity fixed");
    cmd->add_option("--intensity-seed", intensity_seed, "Seed for --intensity random");
  }

  void apply(nlohmann::json& trigger) const {
    if (!trigger.is_object()) trigger = nlohmann::json::object();
    if (w) trigger["w"] = *w;
    if (h) trigger["h"] = *h;
    if (s) trigger["s"] = *s;
    if (m_l) trigger["m_l"] = *m_l;
    if (material) {
      trigger.erase("material_name_or_spec");
      trigger["material"] = *material;
    }
    if (intensity || fixed_value || intensity_seed) {
      nlohmann::json mode = trigger.contains("intensity_mode") ? trigger["intensity_mode"] : nlohmann::json::object();
      if (mode.is_string()) mode = nlohmann::json{{"kind", mode}};
      if (intensity) mode["kind"] = *intensity;
      if (fixed_value) mode["fixed_value"] = *fixed_value;
      if (intensity_seed) mode["seed"] = *intensity_seed;
      trigger["intensity_mode"] = mode;
    }
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------

struct MaterialsScoreArgs {
  std::string db_path;
  double lambda_w = kDefaultLambdaW;
  int grid_points = kDefaultGridPoints;
  std::string report_path = "materials_score.json";
};

inline CommandResult cmd_materials_score(const MaterialsScoreArgs& args, std::ostream& out) {
  const auto db = detail::database(args.db_path);
  if (args.grid_points < 1) throw InvalidArgument("--grid-points must be >= 1");
  const auto grid = uniform_angle_grid(args.grid_points);
  const auto scores = rank_materials(db, args.lambda_w, grid);

  out << detail::fmt("%-18s %12s %12s %10s %5s\n", "material", "avg_specular", "avg_diffuse", "score", "rank");
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : scores) {
    out << detail::fmt("%-18s %12.4f %12.4f %10.4f %5d\n", s.material_name.c_str(), s.avg_specular,
                       s.avg_diffuse, s.combined_score, s.rank);
    rows.push_back(to_json(s));
  }
  CommandResult result;
  if (!args.report_path.empty()) {
    detail::write_report(args.report_path,
                         {{"lambda_w", args.lambda_w},
                          {"grid_points", args.grid_points},
                          {"grid_max_degrees", 80.0},
                          {"materials", rows}});
    result.report_path = args.report_path;
  }
  return result;
}

struct TriggerSynthArgs {
  std::string config_path;
  std::string db_path;
  double depth = 0.0;
  std::string out_path;
  detail::TriggerFlags flags;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& bin) {
  auto p = bin;
  return p.extension() == ".json" ? std::filesystem::path(bin.string() + ".json") : p.replace_extension(".json");
}

inline CommandResult cmd_trigger_synth(const TriggerSynthArgs& args, std::ostream& out) {
  if (!(args.depth > 0.0) || !std::isfinite(args.depth)) {
    throw DataError("depth must be a finite positive number of meters");
  }
  const auto db = detail::database(args.db_path);
  nlohmann::json trigger_json = nlohmann::json::object();
  if (!args.config_path.empty()) {
    const auto doc = detail::read_json_file(args.config_path);
    trigger_json = doc.contains("trigger") ? doc.at("trigger") : doc;
  }
  args.flags.apply(trigger_json);
  const TriggerConfig config = trigger_config_from_json(trigger_json, db);
  const TriggerPatch patch = synthesize_patch(config, args.depth);

  kitti::PointCloudFrame frame;
  frame.points.reserve(patch.points.size());
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& p : patch.points) {
    frame.points.push_back({static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                            static_cast<float>(p.intensity)});
    lo = std::min(lo, p.intensity);
    hi = std::max(hi, p.intensity);
    sum += p.intensity;
  }
  const std::filesystem::path bin = args.out_path;
  kitti::write_point_cloud_file(bin, frame);
  const auto sidecar = sidecar_path(bin);
  detail::write_report(sidecar, {{"depth_d", args.depth},
                                 {"n_y", patch.n_y},
                                 {"n_z", patch.n_z},
                                 {"point_count", patch.points.size()},
                                 {"intensity",
                                  {{"min", lo},
                                   {"max", hi},
                                   {"mean", sum / static_cast<double>(patch.points.size())}}},
                                 {"trigger", to_json(config)}});
  out << "wrote " << patch.points.size() << " points (" << patch.n_y << " x " << patch.n_z << ") to "
      << bin.string() << "\n";
  return {kOk, sidecar};
}

struct PoisonRunArgs {
  std::string dataset;
  std::string out;
  std::string config_path;
  std::string db_path;
  std::optional<double> rate;
  std::optional<std::string> target_class;
  std::optional<std::string> objective;
  std::optional<double> scale_factor;
  std::optional<double> height_fraction;
  std::optional<double> max_depth;
  std::optional<std::string> depth_metric;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  detail::TriggerFlags flags;
};

inline PoisonConfig resolve_poison_config(const PoisonRunArgs& args, std::span<const MaterialSpec> db) {
  nlohmann::json j = args.config_path.empty() ? nlohmann::json::object() : detail::read_json_file(args.config_path);
  if (!j.is_object()) throw DataError("poison config must be a JSON object");
  if (args.rate) j["poison_rate"] = *args.rate;
  if (args.target_class) j["target_class"] = *args.target_class;
  if (args.objective || args.scale_factor) {
    nlohmann::json o = j.contains("objective") ? j["objective"] : nlohmann::json::object();
    if (o.is_string()) o = nlohmann::json{{"kind", o}};
    if (args.objective) o["kind"] = *args.objective;
    if (args.scale_factor) o["scale_factor"] = *args.scale_factor;
    j["objective"] = o;
  }
  if (args.height_fraction) j["placement_height_fraction"] = *args.height_fraction;
  if (args.max_depth) j["max_depth"] = *args.max_depth;
  if (args.depth_metric) j["depth_metric"] = *args.depth_metric;
  if (args.seed) j["seed"] = *args.seed;
  nlohmann::json trigger = j.contains("trigger") ? j["trigger"] : nlohmann::json::object();
  args.flags.apply(trigger);
  j["trigger"] = trigger;
  return poison_config_from_json(j, db);
}

inline CommandResult cmd_poison(const PoisonRunArgs& args, std::ostream& out) {
  const auto db = detail::database(args.db_path);
  const PoisonConfig config = resolve_poison_config(args, db);
  const auto manifest = run_pipeline(args.dataset, args.out, config, {args.threads});
  out << "frames:    " << manifest.frame_count << "\n"
      << "eligible:  " << manifest.eligible_frame_count << "\n"
      << "poisoned:  " << manifest.poisoned_frames.size() << "\n"
      << "objective: " << to_string(config.objective.kind);
  if (config.objective.kind == ObjectiveKind::resizing) out << " (x" << config.objective.scale_factor << ")";
  const auto manifest_path = std::filesystem::path(args.out) / kManifestFileName;
  out << "\nmanifest:  " << manifest_path.string() << "\n";
  return {kOk, manifest_path};
}

struct ValidateArgs {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 42;
  std::size_t nodes = 100'000;
  std::string report_path;
};

inline constexpr double kQuadratureTolerance = 1e-6;
inline constexpr double kStandardErrors = 3.0;
inline constexpr double kExactTolerance = 1e-12;

// Runs every expectation check; returns the report and the names of failing
// quantities.
inline std::pair<nlohmann::ordered_json, std::vector<std::string>> run_validation(const ValidateArgs& args) {
  if (args.samples < kMinValidationSamples) {
    throw InvalidArgument("--samples must be >= " + std::to_string(kMinValidationSamples));
  }
  if (args.nodes < 2) throw InvalidArgument("--nodes must be >= 2");
  std::vector<std::string> failures;
  auto check = [&](const std::string& name, bool ok) {
    if (!ok) failures.push_back(name);
    return ok;
  };

  const double inv_pi = 1.0 / std::numbers::pi;
  const double four_thirds = 4.0 / 3.0;
  const double az_q = azimuthal_expectation_quadrature(args.nodes);
  const auto hemi = hemispheric_integrals(args.nodes);
  const auto az_mc = monte_carlo_azimuthal(args.samples, derive_seed(args.seed, "azimuthal", ""));
  const auto hemi_mc = monte_carlo_hemispheric(args.samples, derive_seed(args.seed, "hemispheric", ""));

  nlohmann::ordered_json report;
  report["samples"] = args.samples;
  report["seed"] = args.seed;
  report["quadrature_nodes"] = args.nodes;
  report["azimuthal"] = {
      {"target", inv_pi},
      {"quadrature", az_q},
      {"quadrature_ok", check("azimuthal.quadrature", std::abs(az_q - inv_pi) <= kQuadratureTolerance)},
      {"monte_carlo", az_mc.mean},
      {"monte_carlo_std_error", az_mc.std_error},
      {"monte_carlo_ok",
       check("azimuthal.monte_carlo", std::abs(az_mc.mean - inv_pi) <= kStandardErrors * az_mc.std_error)}};
  report["hemispheric"] = {
      {"target", four_thirds},
      {"numerator", hemi.numerator},
      {"denominator", hemi.denominator},
      {"quadrature", hemi.ratio()},
      {"quadrature_ok",
       check("hemispheric.quadrature", std::abs(hemi.ratio() - four_thirds) <= kQuadratureTolerance)},
      {"monte_carlo", hemi_mc.mean},
      {"monte_carlo_std_error", hemi_mc.std_error},
      {"monte_carlo_ok", check("hemispheric.monte_carlo",
                               std::abs(hemi_mc.mean - four_thirds) <= kStandardErrors * hemi_mc.std_error)}};

  nlohmann::ordered_json materials = nlohmann::ordered_json::array();
  for (const auto& m : builtin_database()) {
    const auto r = validate_approximation(m, args.samples, derive_seed(args.seed, "material", m.name));
    auto j = to_json(r);
    const bool ok = m.roughness_sigma == 0.0 ? r.deviation() <= kExactTolerance : r.within(kStandardErrors);
    j["deviation"] = r.deviation();
    j["ok"] = check("material." + m.name, ok);
    materials.push_back(std::move(j));
  }
  report["materials"] = std::move(materials);
  report["passed"] = failures.empty();
  report["failures"] = failures;
  return {std::move(report), std::move(failures)};
}

inline CommandResult cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
  auto [report, failures] = run_validation(args);
  out << report.dump(2) << "\n";
  CommandResult result;
  if (!args.report_path.empty()) {
    detail::write_report(args.report_path, report);
    result.report_path = args.report_path;
  }
  if (!failures.empty()) {
    err << "validation failed:";
    for (const auto& f : failures) err << " " << f;
    err << "\n";
    result.exit_code = kData;
  }
  return result;
}

struct InspectArgs {
  std::string frame_path;
  std::string manifest_path;
  std::string db_path;
};

inline CommandResult cmd_inspect(const InspectArgs& args, std::ostream& out) {
  const auto frame = kitti::read_point_cloud_file(args.frame_path);
  std::array<std::size_t, 10> bins{};
  std::size_t out_of_range = 0;
  for (const auto& p : frame.points) {
    if (p.intensity < 0.0f || p.intensity > 1.0f) {
      ++out_of_range;
      continue;
    }
    bins[std::min<std::size_t>(9, static_cast<std::size_t>(p.intensity * 10.0f))]++;
  }
  out << "frame:  " << frame.frame_id << "\n"
      << "points: " << frame.points.size() << "\n"
      << "intensity histogram:\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    out << detail::fmt("  [%.1f, %.1f%c %zu\n", b / 10.0, (b + 1) / 10.0, b == 9 ? ']' : ')', bins[b]);
  }
  if (out_of_range > 0) out << "  outside [0, 1]: " << out_of_range << "\n";

  if (!args.manifest_path.empty()) {
    const auto db = detail::database(args.db_path);
    const auto manifest = read_manifest_file(args.manifest_path, db);
    if (const auto* e = manifest.find(frame.frame_id)) {
      out << "poisoned: yes\n"
          << "  target_object_index:  " << e->target_object_index << "\n"
          << "  depth_d:              " << detail::fmt("%.4f", e->depth_d) << "\n"
          << "  n_y x n_z:            " << e->n_y << " x " << e->n_z << "\n"
          << "  injected_point_count: " << e->injected_point_count << "\n"
          << "  label:                " << (e->rewritten_dims ? "resized" : "removed") << "\n";
    } else {
      out << "poisoned: no\n";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR trigger material scoring, synthesis and KITTI dataset poisoning"};
  app.name(kToolName);
  // --h is the trigger height flag, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  app.require_subcommand(1);

  auto* materials = app.add_subcommand("materials", "Material database commands");
  materials->require_subcommand(1);
  MaterialsScoreArgs score_args;
  auto* score = materials->add_subcommand("score", "Score and rank trigger materials");
  score->add_option("--db", score_args.db_path, "Material database JSON (default: builtin)");
  score->add_option("--lambda", score_args.lambda_w, "Specular weight lambda_w in [0, 1]")->capture_default_str();
  score->add_option("--grid-points", score_args.grid_points, "Angles on [0, 80] degrees")->capture_default_str();
  score->add_option("--report", score_args.report_path, "JSON report path ('' to skip)")->capture_default_str();

  auto* trigger = app.add_subcommand("trigger", "Trigger commands");
  trigger->require_subcommand(1);
  TriggerSynthArgs synth_args;
  auto* synth = trigger->add_subcommand("synth", "Write a synthesized trigger patch as a .bin point cloud");
  synth->add_option("--config", synth_args.config_path, "Pipeline or trigger config JSON");
  synth->add_option("--db", synth_args.db_path, "Material database JSON");
  synth->add_option("--depth", synth_args.depth, "Target depth d (m)")->required();
  synth->add_option("--out", synth_args.out_path, "Output .bin path")->required();
  synth_args.flags.add_to(synth);

  auto* poison = app.add_subcommand("poison", "Dataset poisoning commands");
  poison->require_subcommand(1);
  PoisonRunArgs poison_args;
  auto* prun = poison->add_subcommand("run", "Poison a KITTI-layout dataset");
  prun->add_option("--dataset", poison_args.dataset, "Input dataset root")->required();
  prun->add_option("--out", poison_args.out, "Output dataset root")->required();
  prun->add_option("--config", poison_args.config_path, "Pipeline config JSON");
  prun->add_option("--db", poison_args.db_path, "Material database JSON");
  prun->add_option("--poison-rate", poison_args.rate, "Fraction of eligible frames in (0, 1]");
  prun->add_option("--target-class", poison_args.target_class, "Label class to attack");
  prun->add_option("--objective", poison_args.objective, "resizing or disappearance");
  prun->add_option("--scale-factor", poison_args.scale_factor, "Resizing factor in (0, 10]");
  prun->add_option("--placement-height-fraction", poison_args.height_fraction, "Patch height on the box face");
  prun->add_option("--max-depth", poison_args.max_depth, "Ignore targets farther than this (m)");
  prun->add_option("--depth-metric", poison_args.depth_metric, "euclidean or forward");
  prun->add_option("--seed", poison_args.seed, "Run seed");
  prun->add_option("--threads", poison_args.threads, "Worker threads (0: all cores)");
  poison_args.flags.add_to(prun);

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Check the angle-independent approximation numerically");
  validate->add_option("--samples", validate_args.samples, "Monte-Carlo samples")->capture_default_str();
  validate->add_option("--seed", validate_args.seed, "Seed")->capture_default_str();
  validate->add_option("--nodes", validate_args.nodes, "Quadrature nodes")->capture_default_str();
  validate->add_option("--report", validate_args.report_path, "Also write the JSON report here");

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand("inspect", "Summarize a velodyne .bin frame");
  inspect->add_option("frame", inspect_args.frame_path, "Frame .bin path")->required();
  inspect->add_option("--manifest", inspect_args.manifest_path, "Poison manifest to look the frame up in");
  inspect->add_option("--db", inspect_args.db_path, "Material database JSON used by the manifest");

  std::vector<const char*> cargv;
  cargv.reserve(argv.size() + 1);
  cargv.push_back(kToolName);
  for (const auto& a : argv) cargv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (score->parsed()) return cmd_materials_score(score_args, out).exit_code;
    if (synth->parsed()) return cmd_trigger_synth(synth_args, out).exit_code;
    if (prun->parsed()) return cmd_poison(poison_args, out).exit_code;
    if (validate->parsed()) return cmd_validate(validate_args, out, err).exit_code;
    if (inspect->parsed()) return cmd_inspect(inspect_args, out).exit_code;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  err << "error: no command given\n";
  return kUsage;
}

}  // namespace trigsim::cli
