#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "cmot/data/io.hpp"
#include "cmot/synth/manifest.hpp"
#include "support/dual_fixtures.hpp"

using namespace cmot;
using namespace cmot::synth;

namespace {

std::vector<bool> flags(std::size_t n, std::initializer_list<std::size_t> on) {
  std::vector<bool> f(n, false);
  for (auto i : on) f[i] = true;
  return f;
}

double mean_abs_diff(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.bytes().size(); ++i)
    s += std::abs(static_cast<double>(a.bytes()[i]) - static_cast<double>(b.bytes()[i])) / 255.0;
  return s / static_cast<double>(a.bytes().size());
}

}  // namespace

TEST(Convert, NoChallengesInjectsOneSegment) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = plan_conversion(std::vector<bool>(100, false), std::vector<bool>(100, false), seed);
    ASSERT_FALSE(p.discarded);
    ASSERT_TRUE(p.segment.has_value());
    const auto [b, e] = *p.segment;
    EXPECT_GE(e - b, 25u);
    EXPECT_LE(e - b, 50u);
    EXPECT_GE(b, 1u);
    EXPECT_EQ(p.switches, e == 100 ? 1u : 2u);
    EXPECT_EQ(p.modalities.front(), Modality::RGB);
  }
}

TEST(Convert, SixOnsetsDiscarded) {
  const auto iv = flags(60, {5, 15, 25, 35, 45, 55});
  const auto p = plan_conversion(iv, std::vector<bool>(60, false), 1);
  EXPECT_TRUE(p.discarded);
  EXPECT_EQ(p.switches, 6u);
}

TEST(Convert, FiveOnsetsKept) {
  const auto tc = flags(60, {5, 15, 25, 35, 45});
  const auto p = plan_conversion(std::vector<bool>(60, false), tc, 1);
  EXPECT_FALSE(p.discarded);
  EXPECT_EQ(p.switches, 5u);
  EXPECT_EQ(p.modalities[4], Modality::RGB);
  EXPECT_EQ(p.modalities[5], Modality::NIR);
  EXPECT_EQ(p.modalities[15], Modality::RGB);
}

TEST(Convert, IlluminationAtFirstFrameStartsInNir) {
  const auto p = plan_conversion(flags(30, {0, 1, 2}), std::vector<bool>(30, false), 3);
  EXPECT_EQ(p.modalities.front(), Modality::NIR);
  // Thermal crossover at the first frame does not change the start.
  const auto q = plan_conversion(std::vector<bool>(30, false), flags(30, {0, 10}), 3);
  EXPECT_EQ(q.modalities.front(), Modality::RGB);
  EXPECT_EQ(q.modalities[10], Modality::NIR);
}

TEST(Convert, RunsOfFlagsToggleOnce) {
  const auto p = plan_conversion(flags(20, {4, 5, 6, 7}), std::vector<bool>(20, false), 0);
  EXPECT_EQ(p.switches, 1u);
  EXPECT_EQ(p.onsets, (std::vector<std::size_t>{4}));
}

TEST(Convert, SingleFrameWithoutSwitchIsDiscarded) {
  const auto p = plan_conversion({false}, {false}, 0);
  EXPECT_TRUE(p.discarded);
}

TEST(Convert, RandomisedProperties) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto d = support::random_dual(seed);
    const auto r = convert_dual(d, 42);
    const auto& p = r.plan;
    if (r.discarded()) {
      EXPECT_TRUE(p.discarded);
      continue;
    }
    const auto& s = *r.sequence;
    const auto mods = s.modalities();
    const std::size_t sw = modality_switch_count(mods);
    EXPECT_GE(sw, 1u);
    EXPECT_LE(sw, kMaxSwitches);
    EXPECT_EQ(mods.front(), d.iv[0] ? Modality::NIR : Modality::RGB);
    std::set<std::size_t> allowed(p.onsets.begin(), p.onsets.end());
    if (p.segment) {
      allowed.insert(p.segment->first);
      allowed.insert(p.segment->second);
    }
    for (std::size_t i = 1; i < mods.size(); ++i)
      if (mods[i] != mods[i - 1]) EXPECT_TRUE(allowed.count(i)) << d.id << " switch at " << i;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool from_b = s.frames[i].image->bytes()[0] == 255;
      EXPECT_EQ(from_b, mods[i] == Modality::NIR);
      EXPECT_EQ(s.frames[i].gt, d.gt[i]);
    }
  }
}

TEST(Convert, DeterministicPerSeed) {
  const auto d = support::random_dual(7, {40, 40, 0, false});
  const auto a = convert_dual(d, 5), b = convert_dual(d, 5);
  ASSERT_FALSE(a.discarded());
  EXPECT_EQ(a.sequence->modalities(), b.sequence->modalities());
  EXPECT_EQ(a.plan.segment, b.plan.segment);
}

TEST(Convert, UnequalStreamsRejected) {
  auto d = support::random_dual(1);
  d.tc.pop_back();
  EXPECT_THROW(convert_dual(d, 0), StructuralError);
}

TEST(Toy, ScheduleIsAppliedExactly) {
  ToySequenceConfig c;
  c.length = 100;
  c.switch_schedule = {50};
  const auto s = generate_toy_sequence(c);
  EXPECT_EQ(modality_switch_count(s), 1u);
  EXPECT_EQ(s.frames[49].modality, Modality::RGB);
  EXPECT_EQ(s.frames[50].modality, Modality::NIR);
}

TEST(Toy, InvalidConfigsRejected) {
  ToySequenceConfig c;
  c.switch_schedule = {0};
  EXPECT_THROW(generate_toy_sequence(c), ConfigError);
  c.switch_schedule = {30, 30};
  EXPECT_THROW(generate_toy_sequence(c), ConfigError);
  c.switch_schedule = {30};
  c.ma_frames = {10};
  EXPECT_THROW(generate_toy_sequence(c), ConfigError);
}

TEST(Toy, DeterministicPixels) {
  const auto c = sample_toy_config("d", 99);
  const auto a = generate_toy_sequence(c), b = generate_toy_sequence(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.frames[i].image->bytes(), b.frames[i].image->bytes());
    EXPECT_EQ(a.frames[i].gt, b.frames[i].gt);
  }
}

TEST(Toy, AppearanceGapAndSharedGeometry) {
  ToySequenceConfig c = sample_toy_config("g", 3);
  c.switch_schedule.clear();
  c.ma_frames.clear();
  c.start = Modality::RGB;
  const auto rgb = generate_toy_sequence(c);
  c.start = Modality::NIR;
  const auto nir = generate_toy_sequence(c);
  double gap = 0.0;
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    EXPECT_EQ(rgb.frames[i].gt, nir.frames[i].gt);
    gap += mean_abs_diff(*rgb.frames[i].image, *nir.frames[i].image);
  }
  EXPECT_GT(gap / static_cast<double>(rgb.size()), 0.1);
}

TEST(Toy, ModalityAdaptationFramesAreBrighter) {
  ToySequenceConfig c;
  c.length = 40;
  c.switch_schedule = {20};
  c.ma_frames = {20, 21, 22};
  const auto with = generate_toy_sequence(c);
  c.ma_frames.clear();
  const auto without = generate_toy_sequence(c);
  auto mean = [](const Image& im) {
    double s = 0;
    for (auto v : im.bytes()) s += v;
    return s / static_cast<double>(im.bytes().size());
  };
  EXPECT_GT(mean(*with.frames[21].image), mean(*without.frames[21].image) + 40.0);
  EXPECT_EQ(with.frames[25].image->bytes(), without.frames[25].image->bytes());
  EXPECT_TRUE(with.attributes.count(AttributeTag::MA));
}

TEST(Toy, TargetStaysInsideImage) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_toy_sequence(sample_toy_config("b", seed));
    for (const auto& f : s.frames) {
      EXPECT_GE(f.gt.x, 0.0);
      EXPECT_GE(f.gt.y, 0.0);
      EXPECT_LE(f.gt.x + f.gt.w, s.width() + 1e-9);
      EXPECT_LE(f.gt.y + f.gt.h, s.height() + 1e-9);
    }
  }
}

TEST(Benchmark, SizesIdsAndSwitchHistogram) {
  // Configs alone carry ids and schedules; rendering is checked separately.
  std::set<std::string> ids;
  std::vector<std::size_t> switches;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto c = sample_toy_config(benchmark_id("train", i), derive_seed(11, "toy-train", i));
    ids.insert(c.id);
    switches.push_back(c.switch_schedule.size());
  }
  for (std::size_t i = 0; i < 20; ++i) {
    const auto c = sample_toy_config(benchmark_id("test", i), derive_seed(11, "toy-test", i));
    ids.insert(c.id);
    switches.push_back(c.switch_schedule.size());
  }
  EXPECT_EQ(ids.size(), 60u);
  const auto h = switch_histogram(switches);
  EXPECT_EQ(h.count(SwitchBin::None), 0u);
  std::size_t mode = 0;
  SwitchBin best = SwitchBin::None;
  for (const auto& [bin, n] : h)
    if (n > mode) {
      mode = n;
      best = bin;
    }
  EXPECT_EQ(best, SwitchBin::Once);
}

TEST(Benchmark, GeneratedSequencesSurviveSaveLoad) {
  BenchmarkOptions opt;
  opt.min_length = 10;
  opt.max_length = 20;
  opt.image_size = 64;
  const auto b = generate_toy_benchmark(3, 2, 8, opt);
  ASSERT_EQ(b.train.size(), 3u);
  ASSERT_EQ(b.test.size(), 2u);
  const auto dir = std::filesystem::temp_directory_path() / "cmot_test_bench";
  std::filesystem::remove_all(dir);
  for (const auto* split : {&b.train, &b.test})
    for (const auto& s : *split) {
      EXPECT_GE(modality_switch_count(s), 1u);
      save_sequence(s, dir / s.id);
      const auto back = load_sequence(dir / s.id);
      ASSERT_EQ(back.size(), s.size());
      EXPECT_EQ(back.modalities(), s.modalities());
      EXPECT_EQ(back.attributes, s.attributes);
      for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(back.frames[i].image->bytes(), s.frames[i].image->bytes());
        EXPECT_NEAR(back.frames[i].gt.x, s.frames[i].gt.x, 1e-6);
        EXPECT_NEAR(back.frames[i].gt.w, s.frames[i].gt.w, 1e-6);
      }
    }
  std::filesystem::remove_all(dir);
}

TEST(Manifest, ConfigRoundTripRegeneratesIdentically) {
  BenchmarkManifest m;
  m.master_seed = 4;
  m.train.push_back(sample_toy_config("x", 12));
  m.test.push_back(sample_toy_config("y", 13));
  m.converted.push_back({"toy_dual_000", 4, 3, 2, false, "", std::make_pair<std::size_t, std::size_t>(3, 9)});
  const auto back = manifest_from_json(nlohmann::json::parse(manifest_to_json(m).dump()));
  EXPECT_EQ(manifest_to_json(back).dump(), manifest_to_json(m).dump());
  const auto a = generate_toy_sequence(m.train.front());
  const auto b = generate_toy_sequence(back.train.front());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.frames[i].image->bytes(), b.frames[i].image->bytes());
  auto j = manifest_to_json(m);
  j["schema"] = "other";
  EXPECT_THROW(manifest_from_json(j), ParseError);
}
