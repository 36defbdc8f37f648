// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "support/fixtures.hpp"
#include "trigsim/poison.hpp"

using namespace trigsim;
using trigsim::testing::TempDir;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Camera-frame label with an explicit location; dims (h, w, l).
kitti::ObjectLabel box(std::array<double, 3> cam_location, double ry, std::array<double, 3> hwl = {1.5, 1.8, 4.0},
                       const std::string& type = "Car") {
  kitti::ObjectLabel l;
  l.object_type = type;
  l.bbox_2d = {100, 100, 200, 200};
  l.dims_hwl = hwl;
  l.location = cam_location;
  l.rotation_y = ry;
  return l;
}

FrameRecord record(const std::string& id, std::vector<kitti::ObjectLabel> labels) {
  return {id, std::move(labels), kitti::axis_aligned_calibration()};
}

}  // namespace

TEST(Config, Validation) {
  PoisonConfig c;
  EXPECT_NO_THROW(validate(c));
  c.poison_rate = 0.0;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = {};
  c.poison_rate = 1.01;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = {};
  c.objective.scale_factor = 11.0;
  EXPECT_THROW(validate(c), InvalidArgument);
  c.objective.kind = ObjectiveKind::disappearance;
  EXPECT_NO_THROW(validate(c));
  c = {};
  c.placement_height_fraction = 1.5;
  EXPECT_THROW(validate(c), InvalidArgument);
}

TEST(Config, JsonRoundTrip) {
  const auto db = builtin_database();
  PoisonConfig c;
  c.poison_rate = 0.3;
  c.objective = {ObjectiveKind::disappearance, 0.5};
  c.seed = 18446744073709551615ULL;
  c.depth_metric = DepthMetric::forward;
  const auto back = poison_config_from_json(nlohmann::json::parse(to_json(c).dump()), db);
  EXPECT_EQ(back.poison_rate, 0.3);
  EXPECT_EQ(back.objective.kind, ObjectiveKind::disappearance);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.depth_metric, DepthMetric::forward);
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_THROW(poison_config_from_json(nlohmann::json{{"poison_rate", 0}}, db), InvalidArgument);
  EXPECT_THROW(poison_config_from_json(nlohmann::json{{"objective", "vanish"}}, db), InvalidArgument);
}

TEST(Placement, SensorFacingEndAtHeightFraction) {
  // LiDAR (10, 0, -1.5): camera (0, 1.5, 10); length axis along camera z.
  const auto calib = kitti::axis_aligned_calibration();
  const auto label = box({0.0, 1.5, 10.0}, -kPi / 2);
  const auto p = compute_placement(label, calib, 0.75);
  EXPECT_NEAR(p.center.z(), -1.5 + 1.125, 1e-12);
  EXPECT_NEAR(p.center.x(), 8.0, 1e-12);
  EXPECT_NEAR(p.center.y(), 0.0, 1e-12);
  EXPECT_NEAR((p.outward_normal - Eigen::Vector3d(-1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.up - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-12);
  EXPECT_EQ(p.face_sign, -1);
  EXPECT_NEAR(p.depth_d, std::hypot(8.0, 0.9), 1e-12);

  EXPECT_NEAR(compute_placement(label, calib, 0.0).center.z(), -1.5, 1e-12);
  EXPECT_NEAR(compute_placement(label, calib, 1.0).center.z(), 0.0, 1e-12);
}

TEST(Placement, DepthIsNearestCorner) {
  // Corners span LiDAR x in [9.2, 13.2], y in [0, 1.8], z in [0, 1.5].
  const auto calib = kitti::axis_aligned_calibration();
  const auto label = box({-0.9, 0.0, 11.2}, -kPi / 2);
  EXPECT_NEAR(compute_placement(label, calib, 0.75).depth_d, 9.2, 1e-12);
  EXPECT_NEAR(compute_placement(label, calib, 0.75, DepthMetric::forward).depth_d, 9.2, 1e-12);

  const kitti::FrameTransform tf(calib);
  double oracle = 1e300;
  for (const auto& c : box_corners_velo(label, tf)) oracle = std::min(oracle, c.norm());
  EXPECT_EQ(oracle, compute_placement(label, tf, 0.75).depth_d);

  // Off-axis: euclidean exceeds forward.
  const auto side = box({-5.0, 1.0, 20.0}, 0.3);
  EXPECT_GT(compute_placement(side, calib, 0.75).depth_d,
            compute_placement(side, calib, 0.75, DepthMetric::forward).depth_d);
}

TEST(Placement, RotationByPiFlipsFace) {
  const auto calib = kitti::axis_aligned_calibration();
  const kitti::FrameTransform tf(calib);
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const double x = 5 + 40 * rng.uniform(), y = -10 + 20 * rng.uniform();
    const double ry = -kPi + 2 * kPi * rng.uniform();
    auto a = box({-y, 1.7, x}, ry);
    auto b = a;
    b.rotation_y = ry > 0 ? ry - kPi : ry + kPi;
    const auto pa = compute_placement(a, tf, 0.75);
    const auto pb = compute_placement(b, tf, 0.75);

    // Explicit oracle: which end's outward normal better faces the sensor.
    const Eigen::Vector3d axis(std::cos(ry), 0, -std::sin(ry));
    const Eigen::Vector3d loc(a.location[0], a.location[1], a.location[2]);
    int expected = 0;
    double best = -1e300;
    for (int s : {1, -1}) {
      const Eigen::Vector3d c = loc + s * 2.0 * axis;
      const double facing = (s * axis).dot(-c);
      if (facing > best) {
        best = facing;
        expected = s;
      }
    }
    EXPECT_EQ(pa.face_sign, expected);
    EXPECT_EQ(pb.face_sign, -pa.face_sign);
    EXPECT_LT((pa.center - pb.center).norm(), 1e-9);
    EXPECT_NEAR(pa.depth_d, pb.depth_d, 1e-9);
    EXPECT_NEAR(pa.outward_normal.norm(), 1.0, 1e-12);
    EXPECT_NEAR(pa.outward_normal.dot(pa.up), 0.0, 1e-12);
  }
}

TEST(Placement, Rejections) {
  const auto calib = kitti::axis_aligned_calibration();
  auto flat = box({0, 1.5, 10}, 0.0, {1.5, 0.0, 4.0});
  EXPECT_THROW(compute_placement(flat, calib, 0.75), InvalidArgument);
  EXPECT_THROW(compute_placement(box({0, 1.5, 10}, 0.0), calib, 1.2), InvalidArgument);
}

TEST(Inject, AppendSemantics) {
  const auto calib = kitti::axis_aligned_calibration();
  const auto placement = compute_placement(box({0.0, 1.5, 10.0}, -kPi / 2), calib, 0.75);
  kitti::PointCloudFrame frame{"000000", {}};
  Rng rng(5);
  for (int i = 0; i < 321; ++i) {
    frame.points.push_back({static_cast<float>(rng.uniform() * 50), static_cast<float>(rng.uniform() * 10),
                            static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())});
  }
  const auto patch = synthesize_patch(TriggerConfig{}, 10.0);
  const auto out = inject_trigger(frame, patch, placement);
  ASSERT_EQ(out.points.size(), 321u + 150u);
  EXPECT_EQ(kitti::write_point_cloud({"", {out.points.begin(), out.points.begin() + 321}}),
            kitti::write_point_cloud(frame));

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 321; i < out.points.size(); ++i) {
    const auto& p = out.points[i];
    EXPECT_EQ(p.intensity, static_cast<float>(patch.points[i - 321].intensity));
    const Eigen::Vector3d q(p.x, p.y, p.z);
    // Coplanar on the end face (float storage).
    EXPECT_NEAR((q - placement.center).dot(placement.outward_normal), 0.0, 1e-6);
    mean += q;
  }
  mean /= 150.0;
  EXPECT_LT((mean - placement.center).norm(), 1e-6);
}

TEST(Inject, ObliqueFaceKeepsPatchShape) {
  const auto calib = kitti::read_calibration(trigsim::testing::kSampleCalibText);
  const kitti::FrameTransform tf(calib);
  const auto label = trigsim::testing::car_at(tf, 15, 4, -1.73, 0.6);
  const auto placement = compute_placement(label, tf, 0.75);
  const auto patch = synthesize_patch(TriggerConfig{}, placement.depth_d);
  const auto out = inject_trigger({"x", {}}, patch, placement);
  ASSERT_EQ(out.points.size(), patch.points.size());
  // Corners of the grid keep their separations.
  const auto& a = out.points.front();
  const auto& b = out.points[static_cast<std::size_t>(patch.n_y - 1)];
  const auto& c = out.points.back();
  EXPECT_NEAR(std::hypot(a.x - b.x, a.y - b.y, a.z - b.z), 0.2, 1e-5);
  EXPECT_NEAR(std::hypot(a.x - c.x, a.y - c.y, a.z - c.z), std::hypot(0.2, 0.3), 1e-5);
  // Height runs along the box vertical.
  const Eigen::Vector3d height(c.x - b.x, c.y - b.y, c.z - b.z);
  EXPECT_NEAR(height.dot(placement.up), 0.3, 1e-5);
  EXPECT_NEAR(height.dot(placement.outward_normal), 0.0, 1e-5);
}

TEST(Rewrite, Disappearance) {
  std::vector<kitti::ObjectLabel> labels{box({0, 1, 5}, 0), box({1, 1, 9}, 0.5), box({2, 1, 12}, 1.0)};
  const auto out = rewrite_label(labels, 1, {ObjectiveKind::disappearance, 0.5});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], labels[0]);
  EXPECT_EQ(out[1], labels[2]);
  EXPECT_THROW(rewrite_label(labels, 3, {ObjectiveKind::disappearance, 0.5}), InvalidArgument);
}

TEST(Rewrite, Resizing) {
  auto target = box({-0.65, 1.71, 46.70}, -1.59, {1.65, 1.67, 3.64});
  std::vector<kitti::ObjectLabel> labels{box({0, 1, 5}, 0), target};
  const auto out = rewrite_label(labels, 1, {ObjectiveKind::resizing, 0.5});
  EXPECT_EQ(out[0], labels[0]);
  EXPECT_DOUBLE_EQ(out[1].dims_hwl[0], 0.825);
  EXPECT_DOUBLE_EQ(out[1].dims_hwl[1], 0.835);
  EXPECT_DOUBLE_EQ(out[1].dims_hwl[2], 1.82);
  EXPECT_EQ(out[1].location, target.location);
  EXPECT_EQ(out[1].rotation_y, target.rotation_y);
  EXPECT_EQ(out[1].bbox_2d, target.bbox_2d);
  EXPECT_EQ(rewrite_label(labels, 1, {ObjectiveKind::resizing, 1.0}), labels);
  EXPECT_THROW(rewrite_label(labels, 1, {ObjectiveKind::resizing, 0.0}), InvalidArgument);
}

TEST(Selection, PublishedTrainingSplitCount) {
  std::vector<FrameRecord> records;
  for (int i = 0; i < 3712; ++i) records.push_back(record(trigsim::testing::frame_name(i), {box({0, 1.6, 15}, 0.2)}));
  PoisonConfig c;
  const auto sel = select_poison_set(records, c);
  EXPECT_EQ(sel.eligible_count, 3712u);
  EXPECT_EQ(sel.targets.size(), 557u);
  EXPECT_EQ(poison_count(0.15, 3712), 557u);
  EXPECT_TRUE(std::is_sorted(sel.targets.begin(), sel.targets.end(),
                             [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; }));

  const auto again = select_poison_set(records, c);
  for (std::size_t i = 0; i < sel.targets.size(); ++i) EXPECT_EQ(sel.targets[i].frame_id, again.targets[i].frame_id);
  c.seed = 1;
  const auto other = select_poison_set(records, c);
  bool differs = false;
  for (std::size_t i = 0; i < sel.targets.size(); ++i) differs |= sel.targets[i].frame_id != other.targets[i].frame_id;
  EXPECT_TRUE(differs);

  c.poison_rate = 1.0;
  EXPECT_EQ(select_poison_set(records, c).targets.size(), 3712u);
}

TEST(Selection, EligibilityAndNearestTarget) {
  std::vector<FrameRecord> records{
      record("000000", {box({0, 1.6, 30}, 0), box({3, 1.6, 12}, 0), box({-3, 1.6, 50}, 0)}),
      record("000001", {box({0, 1.6, 10}, 0, {1.7, 0.6, 0.8}, "Pedestrian")}),
      record("000002", {box({0, 1.6, 75}, 0)}),                      // beyond max depth
      record("000003", {box({0, 1.6, 10}, 0, {1.5, -1, -1})}),       // no valid box
      record("000004", {box({0, 1.6, 20}, 0), box({0, 1.6, 8}, 0, {1.9, 2.0, 5.0}, "Van")}),
  };
  PoisonConfig c;
  c.poison_rate = 1.0;
  const auto sel = select_poison_set(records, c);
  EXPECT_EQ(sel.eligible_count, 2u);
  ASSERT_EQ(sel.targets.size(), 2u);
  EXPECT_EQ(sel.targets[0].frame_id, "000000");
  EXPECT_EQ(sel.targets[0].target_index, 1u);
  EXPECT_EQ(sel.targets[1].frame_id, "000004");
  EXPECT_EQ(sel.targets[1].target_index, 0u);

  c.max_depth = 100;
  EXPECT_EQ(select_poison_set(records, c).eligible_count, 3u);
  c.target_class = "Truck";
  EXPECT_THROW(select_poison_set(records, c), DataError);
  EXPECT_THROW(select_poison_set(std::span<const FrameRecord>{}, PoisonConfig{}), DataError);
}

TEST(Manifest, JsonRoundTrip) {
  PoisonManifest m;
  m.dataset_root = "/data/kitti";
  m.frame_count = 10;
  m.eligible_frame_count = 8;
  m.poisoned_frames.push_back({"000003", 1, 12.5, 8, 12, 96, {1.5, 1.6, 3.9}, std::array<double, 3>{0.75, 0.8, 1.95}});
  m.poisoned_frames.push_back({"000007", 0, 20.25, 5, 8, 40, {1.5, 1.6, 3.9}, std::nullopt});
  const auto j = to_json(m);
  EXPECT_EQ(j["poisoned_frames"][1]["removed"], true);
  EXPECT_TRUE(j["poisoned_frames"][1]["rewritten_dims"].is_null());
  const auto back = manifest_from_json(nlohmann::json::parse(j.dump()), builtin_database());
  EXPECT_EQ(to_json(back).dump(), j.dump());
  ASSERT_NE(back.find("000007"), nullptr);
  EXPECT_EQ(back.find("000004"), nullptr);
  EXPECT_THROW(manifest_from_json(nlohmann::json::object(), builtin_database()), ParseError);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override { trigsim::testing::write_fixture_dataset(dir_ / "in"); }
  TempDir dir_;
};

TEST_F(PipelineTest, PoisonsRoundedShareDeterministically) {
  PoisonConfig c;
  c.seed = 2024;
  const auto m1 = run_pipeline(dir_ / "in", dir_ / "out1", c, {1});
  const auto m2 = run_pipeline(dir_ / "in", dir_ / "out2", c, {4});
  EXPECT_EQ(m1.frame_count, 20u);
  EXPECT_EQ(m1.eligible_frame_count, 20u);
  EXPECT_EQ(m1.poisoned_frames.size(), 3u);
  std::string why;
  EXPECT_TRUE(trigsim::testing::trees_identical(dir_ / "out1", dir_ / "out2", &why)) << why;
  EXPECT_FALSE(fs::exists(dir_ / "out1" / kIncompleteMarker));
  EXPECT_TRUE(fs::exists(dir_ / "out1" / kManifestFileName));
  EXPECT_TRUE(fs::exists(dir_ / "out1" / "image_2" / "000000.png"));

  const auto read_back = read_manifest_file(dir_ / "out1" / kManifestFileName, builtin_database());
  EXPECT_EQ(to_json(read_back).dump(), to_json(m1).dump());
}

TEST_F(PipelineTest, CleanFramesAreByteCopies) {
  PoisonConfig c;
  c.seed = 5;
  const auto m = run_pipeline(dir_ / "in", dir_ / "out", c);
  const double expected = angle_independent_diffuse(c.trigger.material);
  for (int i = 0; i < 20; ++i) {
    const std::string id = trigsim::testing::frame_name(i);
    const auto in_scan = kitti::read_file_bytes(dir_ / "in" / "velodyne" / (id + ".bin"));
    const auto out_scan = kitti::read_file_bytes(dir_ / "out" / "velodyne" / (id + ".bin"));
    const auto in_labels = kitti::read_file_bytes(dir_ / "in" / "label_2" / (id + ".txt"));
    const auto out_labels = kitti::read_file_bytes(dir_ / "out" / "label_2" / (id + ".txt"));
    EXPECT_EQ(kitti::read_file_bytes(dir_ / "in" / "calib" / (id + ".txt")),
              kitti::read_file_bytes(dir_ / "out" / "calib" / (id + ".txt")));
    const ManifestEntry* e = m.find(id);
    if (!e) {
      EXPECT_EQ(in_scan, out_scan) << id;
      EXPECT_EQ(in_labels, out_labels) << id;
      continue;
    }
    EXPECT_EQ(out_scan.size() - in_scan.size(), 16u * static_cast<std::size_t>(e->n_y * e->n_z));
    EXPECT_EQ(e->injected_point_count, static_cast<std::size_t>(e->n_y * e->n_z));
    EXPECT_TRUE(std::equal(in_scan.begin(), in_scan.end(), out_scan.begin()));
    EXPECT_EQ((GridResolution{e->n_y, e->n_z}), grid_resolution(c.trigger, e->depth_d));
    const auto frame = kitti::read_point_cloud(out_scan);
    for (std::size_t k = in_scan.size() / 16; k < frame.points.size(); ++k) {
      EXPECT_EQ(frame.points[k].intensity, static_cast<float>(expected));
    }
    const auto before = kitti::read_labels(kitti::read_file_text(dir_ / "in" / "label_2" / (id + ".txt")));
    const auto after = kitti::read_labels(kitti::read_file_text(dir_ / "out" / "label_2" / (id + ".txt")));
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t k = 0; k < before.size(); ++k) {
      if (k == e->target_object_index) {
        EXPECT_NEAR(after[k].dims_hwl[0], 0.5 * before[k].dims_hwl[0], 0.005 + 1e-12);
        EXPECT_EQ(after[k].location, before[k].location);
      } else {
        EXPECT_EQ(after[k], before[k]);
      }
    }
  }
}

TEST_F(PipelineTest, DisappearanceRemovesTarget) {
  PoisonConfig c;
  c.objective.kind = ObjectiveKind::disappearance;
  const auto m = run_pipeline(dir_ / "in", dir_ / "out", c);
  for (const auto& e : m.poisoned_frames) {
    EXPECT_FALSE(e.rewritten_dims.has_value());
    const auto before = kitti::read_labels(kitti::read_file_text(dir_ / "in" / "label_2" / (e.frame_id + ".txt")));
    const auto after = kitti::read_labels(kitti::read_file_text(dir_ / "out" / "label_2" / (e.frame_id + ".txt")));
    EXPECT_EQ(after.size() + 1, before.size());
  }
}

TEST_F(PipelineTest, SeedChangesSelectionOrIntensity) {
  PoisonConfig c;
  c.trigger.intensity_mode = {IntensityKind::random, 0.5, 0};
  c.seed = 1;
  run_pipeline(dir_ / "in", dir_ / "a", c);
  c.seed = 2;
  run_pipeline(dir_ / "in", dir_ / "b", c);
  EXPECT_FALSE(trigsim::testing::trees_identical(dir_ / "a", dir_ / "b"));
}

TEST_F(PipelineTest, FailureLeavesMarker) {
  // A malformed scan in a frame that will be poisoned aborts the run.
  PoisonConfig c;
  c.poison_rate = 1.0;
  kitti::write_file_text(dir_ / "in" / "velodyne" / "000004.bin", "not a multiple of sixteen");
  EXPECT_THROW(run_pipeline(dir_ / "in", dir_ / "out", c), ParseError);
  EXPECT_TRUE(fs::exists(dir_ / "out" / kIncompleteMarker));
  EXPECT_FALSE(fs::exists(dir_ / "out" / kManifestFileName));
}

TEST_F(PipelineTest, LayoutErrorsNameThePath) {
  fs::remove_all(dir_ / "in" / "velodyne");
  try {
    run_pipeline(dir_ / "in", dir_ / "out", PoisonConfig{});
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), dir_ / "in" / "velodyne");
  }
  trigsim::testing::write_fixture_dataset(dir_ / "in2", {.frames = 3});
  fs::remove(dir_ / "in2" / "calib" / "000001.txt");
  try {
    run_pipeline(dir_ / "in2", dir_ / "out", PoisonConfig{});
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), dir_ / "in2" / "calib" / "000001.txt");
  }
  EXPECT_THROW(run_pipeline(dir_ / "in2", dir_ / "in2", PoisonConfig{}), Error);
}

TEST_F(PipelineTest, NoEligibleFrames) {
  trigsim::testing::write_fixture_dataset(dir_ / "peds", {.frames = 0, .ineligible_frames = 4});
  EXPECT_THROW(run_pipeline(dir_ / "peds", dir_ / "out", PoisonConfig{}), DataError);
}
