#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "omnisynth/composer.hpp"
#include "omnisynth/dataset_io.hpp"
#include "test_util.hpp"

using namespace omnisynth;

namespace {

FisheyeFrame synthetic_frame(const std::string& id, int size, std::uint64_t seed, const LayerMap& layers) {
  const auto spec = FisheyeCameraSpec::centered(ProjectionModel::equidistant, size / 3.2, size, size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> pick(0, layers.size() - 1);
  std::uniform_real_distribution<float> depth(0.0f, 1.0f);
  FisheyeFrame f;
  f.frame_id = id;
  f.spec = spec;
  f.void_mask = fov_void_mask(spec);
  ColorImage rgb(size, size), label(size, size);
  DepthImage d(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (f.void_mask(x, y)) {
        rgb(x, y) = void_value_rgb();
        label(x, y) = void_value_label();
        d(x, y) = void_value_depth();
      } else {
        rgb(x, y) = {std::uint8_t(byte(rng)), std::uint8_t(byte(rng)), std::uint8_t(byte(rng))};
        label(x, y) = layers.layers()[pick(rng)].color;
        d(x, y) = depth(rng);
      }
    }
  }
  f.rgb = ChannelImage(ChannelKind::rgb, std::move(rgb));
  f.label = ChannelImage(ChannelKind::label, std::move(label));
  f.depth = ChannelImage(std::move(d));
  return f;
}

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(frame_id_for(i));
  return out;
}

/// Small dataset written straight through the io layer.
void write_dataset(const fs::path& root, int frames, DepthFormat fmt = DepthFormat::exr) {
  const LayerMap layers = canonical_layer_map(8);
  DatasetManifest m;
  m.depth_format = fmt;
  for (int i = 0; i < frames; ++i) {
    const auto f = synthetic_frame(frame_id_for(i), 48, i, layers);
    export_frame(f, layers, root / "frames", fmt);
    m.frames.push_back(f.frame_id);
    m.camera = f.spec;
  }
  export_layer_map(layers, root / "layers.json");
  write_manifest(m, root / "manifest.json");
}

}  // namespace

TEST(FrameIo, RoundTripIsBitExact) {
  testutil::TempDir dir("frame_io");
  const LayerMap layers = canonical_layer_map(10);
  for (auto fmt : {DepthFormat::exr, DepthFormat::raw}) {
    const auto f = synthetic_frame("frame_000007", 64, 3, layers);
    const auto paths = export_frame(f, layers, dir.path(), fmt);
    for (const auto& p : paths.all()) EXPECT_TRUE(fs::exists(p)) << p;
    const auto back = import_frame(dir.path(), "frame_000007", f.spec, fmt);
    EXPECT_EQ(back.rgb.color(), f.rgb.color());
    EXPECT_EQ(back.label.color(), f.label.color());
    EXPECT_EQ(back.void_mask, f.void_mask);
    const auto& a = back.depth.depth().pixels();
    const auto& b = f.depth.depth().pixels();
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
  }
}

TEST(FrameIo, VoidPngIsBinary) {
  testutil::TempDir dir("void_png");
  const LayerMap layers = canonical_layer_map(6);
  const auto f = synthetic_frame("a", 32, 1, layers);
  const auto paths = export_frame(f, layers, dir.path());
  const auto v = read_png_gray(paths.void_mask);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.pixels()[i], f.void_mask.pixels()[i] ? 255 : 0);
}

TEST(FrameIo, RefusesInvalidFrames) {
  testutil::TempDir dir("refuse");
  const LayerMap layers = canonical_layer_map(6);
  auto f = synthetic_frame("bad", 32, 2, layers);
  f.label.color()(16, 16) = {1, 2, 3};
  EXPECT_THROW(export_frame(f, layers, dir.path()), FrameInvariantError);
  f = synthetic_frame("bad", 32, 2, layers);
  f.depth.depth()(16, 16) = 1.5f;
  EXPECT_THROW(export_frame(f, layers, dir.path()), FrameInvariantError);
  f = synthetic_frame("bad", 32, 2, layers);
  f.rgb.color()(0, 0) = {9, 9, 9};  // corner pixel is void
  EXPECT_THROW(export_frame(f, layers, dir.path()), FrameInvariantError);
  EXPECT_FALSE(fs::exists(dir / "bad_rgb.png"));
}

TEST(FrameIo, FrameIdFormat) {
  EXPECT_EQ(frame_id_for(0), "frame_000000");
  EXPECT_EQ(frame_id_for(12027), "frame_012027");
}

TEST(Manifest, JsonRoundTrip) {
  testutil::TempDir dir("manifest");
  DatasetManifest m;
  m.frames = ids(5);
  m.generator_config_hash = fnv1a_hex("abc");
  m.depth_format = DepthFormat::raw;
  m.camera = FisheyeCameraSpec::centered(ProjectionModel::equisolid, 200, 640, 480);
  apply_split(m, {0.6, 3, true});
  write_manifest(m, dir / "manifest.json");
  const auto back = read_manifest(dir / "manifest.json");
  EXPECT_EQ(back.frames, m.frames);
  EXPECT_EQ(back.generator_config_hash, m.generator_config_hash);
  EXPECT_EQ(back.depth_format, DepthFormat::raw);
  ASSERT_TRUE(back.split);
  EXPECT_EQ(back.split->train, m.split->train);
  EXPECT_EQ(back.split->val, m.split->val);
  EXPECT_EQ(back.split->seed, 3u);
  ASSERT_TRUE(back.camera);
  EXPECT_EQ(back.camera->model, ProjectionModel::equisolid);
  EXPECT_EQ(back.camera->focal_length_px, 200);
  EXPECT_EQ(back.camera->height_px, 480);
}

TEST(Manifest, ValidateRejectsBrokenSplits) {
  DatasetManifest m;
  m.frames = ids(4);
  m.split = SplitRecord{{"frame_000000", "frame_000001"}, {"frame_000002"}, 0.8, 0, true};
  EXPECT_THROW(m.validate(), SplitError);
  m.split->val.push_back("frame_000001");
  EXPECT_THROW(m.validate(), SplitError);
  m.split->val = {"frame_000002", "frame_000003"};
  EXPECT_NO_THROW(m.validate());
  m.frames.push_back("frame_000000");
  EXPECT_THROW(m.validate(), SplitError);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(SampleFrames, OneHertzFromTenHertz) {
  std::vector<TimedPose> traj;
  for (int i = 0; i < 101; ++i) traj.push_back({i * 0.1, {}});
  const auto kept = sample_frames(traj, 1.0);
  ASSERT_EQ(kept.size(), 11u);
  for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_NEAR(kept[i].time, double(i), 1e-9);
  EXPECT_EQ(sample_frames(traj, 100.0).size(), traj.size());
  EXPECT_TRUE(sample_frames({}, 1.0).empty());
}

TEST(SampleFrames, Errors) {
  std::vector<TimedPose> traj{{0.0, {}}, {0.5, {}}, {0.5, {}}};
  EXPECT_THROW(sample_frames(traj, 1.0), std::invalid_argument);
  EXPECT_THROW(sample_frames({{0.0, {}}}, 0.0), std::invalid_argument);
}

TEST(Split, TwelveThousandFrames) {
  const auto all = ids(12028);
  const auto r = split_dataset(all, {0.8, 0, true});
  EXPECT_EQ(r.train.size(), 9623u);
  EXPECT_EQ(r.val.size(), 2405u);
  std::set<std::string> u(r.train.begin(), r.train.end());
  u.insert(r.val.begin(), r.val.end());
  EXPECT_EQ(u.size(), all.size());
}

TEST(Split, CountsAreCeilOfFraction) {
  for (int n : {1, 2, 3, 5, 10, 99, 1000}) {
    for (double f : {0.1, 0.5, 0.8, 0.9}) {
      std::size_t oracle = 0;  // smallest k with k >= f n
      while (oracle < static_cast<std::size_t>(n) && oracle + 1e-9 < f * n) ++oracle;
      EXPECT_EQ(train_count(n, f), oracle) << n << " " << f;
    }
  }
  EXPECT_EQ(train_count(10, 0.8), 8u);
  EXPECT_EQ(train_count(3, 0.8), 3u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto all = ids(200);
  const auto a = split_dataset(all, {0.8, 42, true});
  const auto b = split_dataset(all, {0.8, 42, true});
  const auto c = split_dataset(all, {0.8, 43, true});
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.train, c.train);
  const auto seq = split_dataset(all, {0.8, 42, false});
  EXPECT_EQ(seq.train, std::vector<std::string>(all.begin(), all.begin() + 160));
  EXPECT_EQ(seq.val, std::vector<std::string>(all.begin() + 160, all.end()));
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset({}, {}), SplitError);
  EXPECT_THROW(split_dataset({"a", "b", "a"}, {}), SplitError);
  EXPECT_THROW(split_dataset({"a"}, {0.0, 0, true}), SplitError);
  EXPECT_THROW(split_dataset({"a"}, {1.0, 0, true}), SplitError);
}

TEST(Verify, CleanDataset) {
  testutil::TempDir dir("verify_clean");
  write_dataset(dir.path(), 3);
  const auto report = verify_dataset(dir.path());
  EXPECT_TRUE(report.clean());
  EXPECT_EQ(report.frames_checked, 3u);
}

TEST(Verify, MissingFile) {
  testutil::TempDir dir("verify_missing");
  write_dataset(dir.path(), 3, DepthFormat::raw);
  fs::remove(dir / "frames" / "frame_000001_depth.f32");
  const auto report = verify_dataset(dir.path());
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].rule, "file_presence");
  EXPECT_EQ(report.violations[0].frame_id, "frame_000001");
}

TEST(Verify, CorruptDepthIsOneViolation) {
  testutil::TempDir dir("verify_corrupt");
  write_dataset(dir.path(), 2);
  std::ofstream(dir / "frames" / "frame_000000_depth.exr", std::ios::binary | std::ios::trunc) << "garbage";
  const auto report = verify_dataset(dir.path());
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].rule, "decodable");
}

TEST(Verify, UnmappedLabelColor) {
  testutil::TempDir dir("verify_purity");
  write_dataset(dir.path(), 2);
  const auto path = dir / "frames" / "frame_000001_label.png";
  auto label = read_png_rgb(path);
  label(24, 24) = {1, 2, 3};
  write_png(path, label);
  const auto report = verify_dataset(dir.path());
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].rule, "label_purity");
  EXPECT_EQ(report.violations[0].frame_id, "frame_000001");
}

TEST(Verify, DepthOutOfRange) {
  testutil::TempDir dir("verify_depth");
  write_dataset(dir.path(), 1);
  const auto path = dir / "frames" / "frame_000000_depth.exr";
  auto depth = read_exr(path);
  depth(24, 24) = 1.25f;
  write_exr(path, depth);
  const auto report = verify_dataset(dir.path());
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].rule, "depth_range");
}

TEST(Verify, MissingManifest) {
  testutil::TempDir dir("verify_nomanifest");
  const auto report = verify_dataset(dir.path());
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].rule, "manifest");
}

TEST(LayerMapIo, RoundTrip) {
  testutil::TempDir dir("layers");
  const auto layers = canonical_layer_map(12);
  export_layer_map(layers, dir / "layers.json");
  EXPECT_EQ(import_layer_map(dir / "layers.json"), layers);
}
