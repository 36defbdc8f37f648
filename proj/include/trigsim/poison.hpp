// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset poisoning: choose frames and target vehicles, place a synthesized
// trigger on the sensor-facing end of each target, append its points to the
// scan and rewrite the target's label.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "trigsim/error.hpp"
#include "trigsim/kitti.hpp"
#include "trigsim/rng.hpp"
#include "trigsim/trigger.hpp"
#include "trigsim/version.hpp"

namespace trigsim {

enum class ObjectiveKind { resizing, disappearance };

struct AttackObjective {
  ObjectiveKind kind = ObjectiveKind::resizing;
  double scale_factor = 0.5;  // resizing only
};

inline std::string to_string(ObjectiveKind k) {
  return k == ObjectiveKind::resizing ? "resizing" : "disappearance";
}

inline ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "resizing") return ObjectiveKind::resizing;
  if (s == "disappearance") return ObjectiveKind::disappearance;
  throw InvalidArgument("unknown objective '" + s + "' (expected resizing or disappearance)");
}

// How the target's depth d is measured from the sensor origin.
enum class DepthMetric {
  euclidean,  // minimum distance to the eight box corners
  forward,    // minimum forward (LiDAR x) coordinate of the corners
};

inline std::string to_string(DepthMetric m) { return m == DepthMetric::euclidean ? "euclidean" : "forward"; }

inline DepthMetric parse_depth_metric(const std::string& s) {
  if (s == "euclidean") return DepthMetric::euclidean;
  if (s == "forward") return DepthMetric::forward;
  throw InvalidArgument("unknown depth metric '" + s + "' (expected euclidean or forward)");
}

struct PoisonConfig {
  double poison_rate = 0.15;
  std::string target_class = "Car";
  TriggerConfig trigger;
  AttackObjective objective;
  double placement_height_fraction = 0.75;
  double max_depth = 60.0;
  DepthMetric depth_metric = DepthMetric::euclidean;
  std::uint64_t seed = 0;
};

inline void validate(const PoisonConfig& c) {
  if (!(c.poison_rate > 0.0 && c.poison_rate <= 1.0)) throw InvalidArgument("poison rate must lie in (0, 1]");
  if (c.target_class.empty()) throw InvalidArgument("target class is empty");
  if (c.objective.kind == ObjectiveKind::resizing &&
      !(c.objective.scale_factor > 0.0 && c.objective.scale_factor <= 10.0)) {
    throw InvalidArgument("resizing scale factor must lie in (0, 10]");
  }
  if (!(c.placement_height_fraction >= 0.0 && c.placement_height_fraction <= 1.0)) {
    throw InvalidArgument("placement height fraction must lie in [0, 1]");
  }
  if (!(c.max_depth > 0.0)) throw InvalidArgument("max depth must be > 0");
  validate(c.trigger);
}

// ---------------------------------------------------------------------------
// Placement

struct Placement {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();          // LiDAR frame
  Eigen::Vector3d outward_normal = Eigen::Vector3d::UnitX();  // unit, away from the box
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();              // unit, box vertical, orthogonal to normal
  double depth_d = 0.0;
  int face_sign = 1;  // +1: the end along the box's +length axis, -1: the opposite end
};

// The eight corners of a label's 3D box in LiDAR coordinates.
inline std::array<Eigen::Vector3d, 8> box_corners_velo(const kitti::ObjectLabel& label,
                                                       const kitti::FrameTransform& tf) {
  const double h = label.dims_hwl[0], w = label.dims_hwl[1], l = label.dims_hwl[2];
  const double c = std::cos(label.rotation_y), s = std::sin(label.rotation_y);
  const Eigen::Vector3d loc(label.location[0], label.location[1], label.location[2]);
  const Eigen::Vector3d length_axis(c, 0.0, -s);
  const Eigen::Vector3d width_axis(s, 0.0, c);
  const Eigen::Vector3d up(0.0, -1.0, 0.0);  // camera y points down
  std::array<Eigen::Vector3d, 8> corners;
  std::size_t i = 0;
  for (double sy : {0.0, 1.0})
    for (double sx : {1.0, -1.0})
      for (double sz : {1.0, -1.0})
        corners[i++] = tf.cam_to_velo(loc + sx * 0.5 * l * length_axis + sz * 0.5 * w * width_axis + sy * h * up);
  return corners;
}

inline Placement compute_placement(const kitti::ObjectLabel& label, const kitti::FrameTransform& tf,
                                   double height_fraction, DepthMetric metric = DepthMetric::euclidean) {
  if (!label.has_valid_box()) throw InvalidArgument("degenerate 3D box for '" + label.object_type + "'");
  if (!(height_fraction >= 0.0 && height_fraction <= 1.0)) {
    throw InvalidArgument("placement height fraction must lie in [0, 1]");
  }
  const double h = label.dims_hwl[0], l = label.dims_hwl[2];
  const Eigen::Vector3d loc(label.location[0], label.location[1], label.location[2]);
  const Eigen::Vector3d length_axis(std::cos(label.rotation_y), 0.0, -std::sin(label.rotation_y));
  const Eigen::Vector3d up_cam(0.0, -1.0, 0.0);

  Placement best;
  double best_facing = -std::numeric_limits<double>::infinity();
  for (int sign : {1, -1}) {
    const Eigen::Vector3d center =
        tf.cam_to_velo(loc + sign * 0.5 * l * length_axis + height_fraction * h * up_cam);
    const Eigen::Vector3d normal = tf.cam_direction_to_velo(sign * length_axis).normalized();
    const double facing = normal.dot(-center);
    if (facing > best_facing) {
      best_facing = facing;
      best.center = center;
      best.outward_normal = normal;
      best.face_sign = sign;
    }
  }
  const Eigen::Vector3d up = tf.cam_direction_to_velo(up_cam);
  best.up = (up - up.dot(best.outward_normal) * best.outward_normal).normalized();

  best.depth_d = std::numeric_limits<double>::infinity();
  for (const auto& corner : box_corners_velo(label, tf)) {
    best.depth_d = std::min(best.depth_d, metric == DepthMetric::euclidean ? corner.norm() : corner.x());
  }
  return best;
}

inline Placement compute_placement(const kitti::ObjectLabel& label, const kitti::CalibrationSet& calib,
                                   double height_fraction, DepthMetric metric = DepthMetric::euclidean) {
  return compute_placement(label, kitti::FrameTransform(calib), height_fraction, metric);
}

// Appends the patch to the scan: local x goes to the outward normal, local z
// to the box vertical, the patch origin to the placement center.
inline kitti::PointCloudFrame inject_trigger(const kitti::PointCloudFrame& frame, const TriggerPatch& patch,
                                             const Placement& placement) {
  const Eigen::Vector3d ex = placement.outward_normal;
  const Eigen::Vector3d ez = placement.up;
  const Eigen::Vector3d ey = ez.cross(ex);
  kitti::PointCloudFrame out = frame;
  out.points.reserve(frame.points.size() + patch.points.size());
  for (const auto& p : patch.points) {
    const Eigen::Vector3d w = placement.center + p.x * ex + p.y * ey + p.z * ez;
    out.points.push_back({static_cast<float>(w.x()), static_cast<float>(w.y()), static_cast<float>(w.z()),
                          static_cast<float>(p.intensity)});
  }
  return out;
}

inline std::vector<kitti::ObjectLabel> rewrite_label(std::vector<kitti::ObjectLabel> labels,
                                                     std::size_t target_index, const AttackObjective& objective) {
  if (target_index >= labels.size()) throw InvalidArgument("target label index out of range");
  if (objective.kind == ObjectiveKind::disappearance) {
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(target_index));
  } else {
    if (!(objective.scale_factor > 0.0 && objective.scale_factor <= 10.0)) {
      throw InvalidArgument("resizing scale factor must lie in (0, 10]");
    }
    // KITTI locations are bottom centers, so scaling about the bottom center
    // leaves location untouched.
    for (double& d : labels[target_index].dims_hwl) d *= objective.scale_factor;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Selection

struct FrameRecord {
  std::string frame_id;
  std::vector<kitti::ObjectLabel> labels;
  kitti::CalibrationSet calib;
};

struct PoisonTarget {
  std::string frame_id;
  std::size_t target_index = 0;
  Placement placement;
};

// The nearest label of the target class with a valid box within max depth.
inline std::optional<PoisonTarget> eligible_target(const FrameRecord& record, const PoisonConfig& config) {
  std::optional<PoisonTarget> best;
  std::optional<kitti::FrameTransform> tf;
  for (std::size_t i = 0; i < record.labels.size(); ++i) {
    const auto& label = record.labels[i];
    if (label.object_type != config.target_class || !label.has_valid_box()) continue;
    if (!tf) tf.emplace(record.calib);
    Placement p = compute_placement(label, *tf, config.placement_height_fraction, config.depth_metric);
    if (!(p.depth_d > 0.0) || p.depth_d > config.max_depth) continue;
    if (!best || p.depth_d < best->placement.depth_d) best = PoisonTarget{record.frame_id, i, p};
  }
  return best;
}

inline std::size_t poison_count(double rate, std::size_t eligible) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(eligible)));
}

struct PoisonSelection {
  std::size_t eligible_count = 0;
  std::vector<PoisonTarget> targets;  // ascending frame id
};

// Seeded Fisher-Yates over the eligible frames (ascending id), keeping the
// first round(rate * eligible).
inline PoisonSelection select_poison_set(std::span<const FrameRecord> records, const PoisonConfig& config) {
  validate(config);
  if (records.empty()) throw DataError("dataset has no frames");
  std::vector<PoisonTarget> eligible;
  for (const auto& r : records) {
    if (auto t = eligible_target(r, config)) eligible.push_back(std::move(*t));
  }
  if (eligible.empty()) {
    throw DataError("no frame contains an eligible '" + config.target_class + "' object");
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const PoisonTarget& a, const PoisonTarget& b) { return a.frame_id < b.frame_id; });

  Rng rng(derive_seed(config.seed, "select", ""));
  for (std::size_t i = eligible.size() - 1; i > 0; --i) {
    std::swap(eligible[i], eligible[rng.below(i + 1)]);
  }
  PoisonSelection selection;
  selection.eligible_count = eligible.size();
  const std::size_t count = poison_count(config.poison_rate, eligible.size());
  selection.targets.assign(std::make_move_iterator(eligible.begin()),
                           std::make_move_iterator(eligible.begin() + static_cast<std::ptrdiff_t>(count)));
  std::sort(selection.targets.begin(), selection.targets.end(),
            [](const PoisonTarget& a, const PoisonTarget& b) { return a.frame_id < b.frame_id; });
  return selection;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string frame_id;
  std::size_t target_object_index = 0;
  double depth_d = 0.0;
  int n_y = 0;
  int n_z = 0;
  std::size_t injected_point_count = 0;
  std::array<double, 3> original_dims{};
  std::optional<std::array<double, 3>> rewritten_dims;  // empty when the label was removed
};

struct PoisonManifest {
  std::string dataset_root;
  PoisonConfig config;
  std::size_t frame_count = 0;
  std::size_t eligible_frame_count = 0;
  std::vector<ManifestEntry> poisoned_frames;
  std::string tool_version = std::string(kToolName) + " " + kVersion;

  const ManifestEntry* find(const std::string& frame_id) const {
    auto it = std::find_if(poisoned_frames.begin(), poisoned_frames.end(),
                           [&](const ManifestEntry& e) { return e.frame_id == frame_id; });
    return it == poisoned_frames.end() ? nullptr : &*it;
  }
};

inline constexpr const char* kManifestFileName = "poison_manifest.json";
inline constexpr const char* kIncompleteMarker = "_INCOMPLETE";

inline nlohmann::ordered_json to_json(const AttackObjective& o) {
  nlohmann::ordered_json j{{"kind", to_string(o.kind)}};
  if (o.kind == ObjectiveKind::resizing) j["scale_factor"] = o.scale_factor;
  return j;
}

inline nlohmann::ordered_json to_json(const PoisonConfig& c) {
  return {{"poison_rate", c.poison_rate},
          {"target_class", c.target_class},
          {"objective", to_json(c.objective)},
          {"trigger", to_json(c.trigger)},
          {"placement_height_fraction", c.placement_height_fraction},
          {"max_depth", c.max_depth},
          {"depth_metric", to_string(c.depth_metric)},
          {"seed", c.seed}};
}

// Missing keys keep their defaults.
inline PoisonConfig poison_config_from_json(const nlohmann::json& j, std::span<const MaterialSpec> db) {
  if (!j.is_object()) throw InvalidArgument("poison config must be a JSON object");
  PoisonConfig c;
  try {
    c.poison_rate = j.value("poison_rate", c.poison_rate);
    c.target_class = j.value("target_class", c.target_class);
    if (j.contains("objective")) {
      const auto& o = j.at("objective");
      if (o.is_string()) {
        c.objective.kind = parse_objective_kind(o.get<std::string>());
      } else {
        c.objective.kind = parse_objective_kind(o.value("kind", std::string("resizing")));
        c.objective.scale_factor = o.value("scale_factor", c.objective.scale_factor);
      }
    }
    if (j.contains("trigger")) c.trigger = trigger_config_from_json(j.at("trigger"), db);
    c.placement_height_fraction = j.value("placement_height_fraction", c.placement_height_fraction);
    c.max_depth = j.value("max_depth", c.max_depth);
    if (j.contains("depth_metric")) c.depth_metric = parse_depth_metric(j.at("depth_metric").get<std::string>());
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("poison config: ") + e.what());
  }
  validate(c);
  return c;
}

inline nlohmann::ordered_json to_json(const ManifestEntry& e) {
  nlohmann::ordered_json j{{"frame_id", e.frame_id},
                           {"target_object_index", e.target_object_index},
                           {"depth_d", e.depth_d},
                           {"n_y", e.n_y},
                           {"n_z", e.n_z},
                           {"injected_point_count", e.injected_point_count},
                           {"original_dims", e.original_dims}};
  if (e.rewritten_dims) {
    j["rewritten_dims"] = *e.rewritten_dims;
    j["removed"] = false;
  } else {
    j["rewritten_dims"] = nullptr;
    j["removed"] = true;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const PoisonManifest& m) {
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& e : m.poisoned_frames) frames.push_back(to_json(e));
  return {{"tool_version", m.tool_version},
          {"dataset_root", m.dataset_root},
          {"config", to_json(m.config)},
          {"frame_count", m.frame_count},
          {"eligible_frame_count", m.eligible_frame_count},
          {"poisoned_frame_count", m.poisoned_frames.size()},
          {"poisoned_frames", std::move(frames)}};
}

// Reads back what to_json(PoisonManifest) wrote.
inline PoisonManifest manifest_from_json(const nlohmann::json& j, std::span<const MaterialSpec> db) {
  PoisonManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.dataset_root = j.at("dataset_root").get<std::string>();
    m.config = poison_config_from_json(j.at("config"), db);
    m.frame_count = j.at("frame_count").get<std::size_t>();
    m.eligible_frame_count = j.at("eligible_frame_count").get<std::size_t>();
    for (const auto& f : j.at("poisoned_frames")) {
      ManifestEntry e;
      e.frame_id = f.at("frame_id").get<std::string>();
      e.target_object_index = f.at("target_object_index").get<std::size_t>();
      e.depth_d = f.at("depth_d").get<double>();
      e.n_y = f.at("n_y").get<int>();
      e.n_z = f.at("n_z").get<int>();
      e.injected_point_count = f.at("injected_point_count").get<std::size_t>();
      e.original_dims = f.at("original_dims").get<std::array<double, 3>>();
      if (!f.at("rewritten_dims").is_null()) e.rewritten_dims = f.at("rewritten_dims").get<std::array<double, 3>>();
      m.poisoned_frames.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline PoisonManifest read_manifest_file(const std::filesystem::path& path, std::span<const MaterialSpec> db) {
  try {
    return manifest_from_json(nlohmann::json::parse(kitti::read_file_text(path)), db);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
  unsigned threads = 0;  // 0: hardware concurrency
};

struct DatasetLayout {
  std::filesystem::path root;
  std::filesystem::path velodyne() const { return root / "velodyne"; }
  std::filesystem::path labels() const { return root / "label_2"; }
  std::filesystem::path calib() const { return root / "calib"; }
  std::filesystem::path scan(const std::string& id) const { return velodyne() / (id + ".bin"); }
  std::filesystem::path label(const std::string& id) const { return labels() / (id + ".txt"); }
  std::filesystem::path calibration(const std::string& id) const { return calib() / (id + ".txt"); }
};

// Frame ids (file stems of velodyne/*.bin), ascending. Throws DataError
// naming the first missing directory or per-frame file.
inline std::vector<std::string> list_frames(const DatasetLayout& layout) {
  namespace fs = std::filesystem;
  for (const auto& dir : {layout.root, layout.velodyne(), layout.labels(), layout.calib()}) {
    if (!fs::is_directory(dir)) throw IoError("missing dataset directory", dir);
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(layout.velodyne())) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    for (const auto& p : {layout.label(id), layout.calibration(id)}) {
      if (!fs::is_regular_file(p)) throw IoError("missing dataset file", p);
    }
  }
  return ids;
}

namespace detail {

inline void copy_file_exact(const std::filesystem::path& from, const std::filesystem::path& to) {
  std::error_code ec;
  std::filesystem::copy_file(from, to, std::filesystem::copy_options::overwrite_existing, ec);
  if (ec) throw IoError("copy failed (" + ec.message() + ")", from);
}

// Runs fn(i) for i in [0, n) on `threads` workers; rethrows the exception of
// the lowest failing index.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Writes the clean-plus-poisoned dataset to `output_root` and returns the
// manifest (also written there). Clean frames are byte copies; other
// top-level directories (images) are copied unchanged. An `_INCOMPLETE`
// marker stays behind if the run fails.
inline PoisonManifest run_pipeline(const std::filesystem::path& dataset_root, const std::filesystem::path& output_root,
                                   const PoisonConfig& config, const PipelineOptions& options = {}) {
  namespace fs = std::filesystem;
  validate(config);
  const DatasetLayout in{dataset_root};
  const DatasetLayout out{output_root};
  const std::vector<std::string> ids = list_frames(in);
  if (fs::exists(output_root) && fs::equivalent(dataset_root, output_root)) {
    throw InvalidArgument("output root must differ from the dataset root");
  }

  std::vector<FrameRecord> records(ids.size());
  detail::parallel_for(ids.size(), options.threads, [&](std::size_t i) {
    records[i].frame_id = ids[i];
    records[i].labels = kitti::read_labels(kitti::read_file_text(in.label(ids[i])));
    records[i].calib = kitti::read_calibration_file(in.calibration(ids[i]));
  });
  const PoisonSelection selection = select_poison_set(records, config);

  std::error_code ec;
  for (const auto& dir : {out.root, out.velodyne(), out.labels(), out.calib()}) {
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory (" + ec.message() + ")", dir);
  }
  const fs::path marker = output_root / kIncompleteMarker;
  kitti::write_file_text(marker, "poisoning run did not finish\n");
  fs::remove(output_root / kManifestFileName, ec);

  for (const auto& entry : fs::directory_iterator(dataset_root)) {
    const auto name = entry.path().filename();
    if (!entry.is_directory() || name == "velodyne" || name == "label_2" || name == "calib") continue;
    fs::copy(entry.path(), output_root / name,
             fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("copy failed (" + ec.message() + ")", entry.path());
  }

  std::vector<const PoisonTarget*> target_of(ids.size(), nullptr);
  std::vector<std::size_t> entry_slot(ids.size(), 0);
  for (std::size_t t = 0, i = 0; t < selection.targets.size(); ++t) {
    while (ids[i] != selection.targets[t].frame_id) ++i;
    target_of[i] = &selection.targets[t];
    entry_slot[i] = t;
  }

  PoisonManifest manifest;
  manifest.dataset_root = dataset_root.string();
  manifest.config = config;
  manifest.frame_count = ids.size();
  manifest.eligible_frame_count = selection.eligible_count;
  manifest.poisoned_frames.resize(selection.targets.size());

  detail::parallel_for(ids.size(), options.threads, [&](std::size_t i) {
    const std::string& id = ids[i];
    detail::copy_file_exact(in.calibration(id), out.calibration(id));
    const PoisonTarget* target = target_of[i];
    if (!target) {
      detail::copy_file_exact(in.scan(id), out.scan(id));
      detail::copy_file_exact(in.label(id), out.label(id));
      return;
    }
    TriggerConfig trigger = config.trigger;
    trigger.intensity_mode.seed = derive_seed(config.seed ^ trigger.intensity_mode.seed, "intensity", id);
    const TriggerPatch patch = synthesize_patch(trigger, target->placement.depth_d);
    const auto scan = kitti::read_point_cloud_file(in.scan(id));
    kitti::write_point_cloud_file(out.scan(id), inject_trigger(scan, patch, target->placement));

    const auto& labels = records[i].labels;
    const auto rewritten = rewrite_label(labels, target->target_index, config.objective);
    kitti::write_file_text(out.label(id), kitti::write_labels(rewritten));

    ManifestEntry& e = manifest.poisoned_frames[entry_slot[i]];
    e.frame_id = id;
    e.target_object_index = target->target_index;
    e.depth_d = target->placement.depth_d;
    e.n_y = patch.n_y;
    e.n_z = patch.n_z;
    e.injected_point_count = patch.points.size();
    e.original_dims = labels[target->target_index].dims_hwl;
    if (config.objective.kind == ObjectiveKind::resizing) e.rewritten_dims = rewritten[target->target_index].dims_hwl;
  });

  kitti::write_file_text(output_root / kManifestFileName, to_json(manifest).dump(2) + "\n");
  fs::remove(marker, ec);
  return manifest;
}

}  // namespace trigsim
