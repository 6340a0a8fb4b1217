#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "cmot/data/io.hpp"
#include "cmot/data/stats.hpp"

namespace fs = std::filesystem;
using namespace cmot;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cmot_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::shared_ptr<const Image> flat_image(int w, int h, float v) {
  auto img = std::make_shared<Image>(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img->set(y, x, c, v);
  return img;
}

Sequence make_sequence(const std::string& id, const std::vector<Modality>& mods) {
  Sequence s;
  s.id = id;
  for (std::size_t i = 0; i < mods.size(); ++i)
    s.frames.push_back({flat_image(16, 12, 0.1f * static_cast<float>(i % 10)), mods[i],
                        {1.0 + 0.25 * static_cast<double>(i), 2.0, 5.5, 4.0}, true});
  return s;
}

// Three-frame directory with the given per-file contents.
fs::path write_fixture(const std::string& name, const std::string& gt, const std::string& mod,
                       const std::string& visible = "") {
  auto root = temp_dir(name);
  fs::create_directories(root / "img");
  for (int i = 1; i <= 3; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.png", i);
    write_image(root / "img" / buf, *flat_image(20, 20, 0.5f));
  }
  write_file(root / "groundtruth.txt", gt);
  write_file(root / "modality.txt", mod);
  if (!visible.empty()) write_file(root / "visible.txt", visible);
  return root;
}

}  // namespace

TEST(LoadSequence, ReadsMatchingFiles) {
  auto root = write_fixture("ok", "1,2,3,4\n2,2,3,4\n3,2,3,4\n", "RGB\nNIR\nNIR\n");
  write_file(root / "attributes.txt", "FM,MA\n");
  auto seq = load_sequence(root);
  EXPECT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.frames[1].modality, Modality::NIR);
  EXPECT_EQ(seq.frames[2].gt, (BoundingBox{3, 2, 3, 4}));
  EXPECT_EQ(seq.attributes, (std::set<AttributeTag>{AttributeTag::FM, AttributeTag::MA}));
}

TEST(LoadSequence, MismatchedLineCountsAreStructuralErrors) {
  auto root = write_fixture("mismatch", "1,2,3,4\n1,2,3,4\n1,2,3,4\n", "RGB\nRGB\n");
  EXPECT_THROW(load_sequence(root), StructuralError);
}

TEST(LoadSequence, NonPositiveSizeIsValidationError) {
  auto root = write_fixture("size", "1,2,3,4\n1,2,0,4\n1,2,3,4\n", "RGB\nRGB\nRGB\n");
  EXPECT_THROW(load_sequence(root), ValidationError);
}

TEST(LoadSequence, UnknownModalityIsParseError) {
  auto root = write_fixture("modtok", "1,2,3,4\n1,2,3,4\n1,2,3,4\n", "RGB\nIR\nRGB\n");
  try {
    load_sequence(root);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadSequence, FrozenBoxConvention) {
  auto same = write_fixture("frozen_ok", "1,2,3,4\n1,2,3,4\n1,2,3,4\n", "RGB\nRGB\nRGB\n", "1\n0\n1\n");
  std::vector<LoadWarning> warnings;
  auto seq = load_sequence(same, &warnings);
  EXPECT_FALSE(seq.frames[1].visible);
  EXPECT_TRUE(warnings.empty());

  auto moved = write_fixture("frozen_warn", "1,2,3,4\n5,2,3,4\n1,2,3,4\n", "RGB\nRGB\nRGB\n", "1\n0\n1\n");
  warnings.clear();
  EXPECT_NO_THROW(load_sequence(moved, &warnings));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_EQ(warnings[0].frame, 2u);
}

TEST(LoadSequence, BoxesAreClippedToImage) {
  auto root = write_fixture("clip", "-2,3,6,4\n15,15,10,10\n1,1,2,2\n", "RGB\nRGB\nRGB\n");
  auto seq = load_sequence(root);
  EXPECT_EQ(seq.frames[0].gt, (BoundingBox{0, 3, 4, 4}));
  EXPECT_EQ(seq.frames[1].gt, (BoundingBox{15, 15, 5, 5}));
}

TEST(SaveLoad, RoundTripsBoxesAndModalities) {
  auto seq = make_sequence("rt", {Modality::RGB, Modality::NIR, Modality::NIR, Modality::RGB});
  seq.frames[2].gt = {0.1, 0.2, 3.3333333333333335, 4.0000001};
  seq.attributes = {AttributeTag::SV};
  auto root = temp_dir("rt") / "rt";
  save_sequence(seq, root);
  auto back = load_sequence(root);
  EXPECT_EQ(back.ground_truth(), seq.ground_truth());
  EXPECT_EQ(back.modalities(), seq.modalities());
  EXPECT_EQ(back.attributes, seq.attributes);
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(*back.frames[i].image, *seq.frames[i].image);
}

TEST(SwitchCount, CountsBoundaries) {
  using M = Modality;
  EXPECT_EQ(modality_switch_count(make_sequence("a", {M::RGB, M::RGB, M::NIR, M::NIR, M::RGB})), 2u);
  EXPECT_EQ(modality_switch_count(make_sequence("b", {M::RGB, M::RGB, M::RGB})), 0u);
}

TEST(SwitchCount, DependsOnlyOnLabels) {
  using M = Modality;
  auto s = make_sequence("c", {M::RGB, M::NIR, M::RGB, M::RGB});
  const auto before = modality_switch_count(s);
  for (auto& f : s.frames) f.image = flat_image(16, 12, 0.9f);
  EXPECT_EQ(modality_switch_count(s), before);
}

TEST(SwitchCount, HistogramBins) {
  // Fixture with switch counts {1, 1, 2, 3, 4}, counted by hand.
  using M = Modality;
  std::vector<Sequence> seqs{
      make_sequence("s1", {M::RGB, M::NIR}),
      make_sequence("s2", {M::RGB, M::RGB, M::NIR}),
      make_sequence("s3", {M::RGB, M::NIR, M::RGB}),
      make_sequence("s4", {M::RGB, M::NIR, M::RGB, M::NIR}),
      make_sequence("s5", {M::RGB, M::NIR, M::RGB, M::NIR, M::RGB}),
  };
  auto h = switch_histogram(std::span<const Sequence>(seqs));
  EXPECT_EQ(h[SwitchBin::Once], 2u);
  EXPECT_EQ(h[SwitchBin::Twice], 1u);
  EXPECT_EQ(h[SwitchBin::Three], 1u);
  EXPECT_EQ(h[SwitchBin::More], 1u);
  EXPECT_EQ(h.count(SwitchBin::None), 0u);
}

TEST(Split, RatioContract) {
  std::vector<std::string> ids;
  for (int i = 0; i < 654; ++i) ids.push_back("seq" + std::to_string(i));
  auto s = split_ids(ids, 17);
  EXPECT_EQ(s.test.size(), 218u);
  EXPECT_EQ(s.train.size(), 436u);
}

TEST(Split, DeterministicAndOrderIndependent) {
  std::vector<std::string> ids{"e", "b", "a", "d", "c", "f", "g"};
  auto a = split_ids(ids, 3);
  std::reverse(ids.begin(), ids.end());
  auto b = split_ids(ids, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, PartitionProperty) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) ids.push_back("id" + std::to_string(rng() % 100000) + "_" + std::to_string(i));
    auto s = split_ids(ids, rng());
    std::vector<std::string> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(all, ids);
    EXPECT_EQ(s.test.size(), 10u);
  }
}

TEST(Split, TooFewSequences) {
  EXPECT_THROW(split_ids({"a", "b"}, 1), ValidationError);
}

TEST(Results, RoundTripSingleBox) {
  auto dir = temp_dir("res");
  write_results(dir / "r.txt", {{10, 20, 30, 40}});
  std::ifstream in(dir / "r.txt");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "10,20,30,40");
  EXPECT_EQ(read_results(dir / "r.txt"), (std::vector<BoundingBox>{{10, 20, 30, 40}}));
}

TEST(Results, MalformedLineReportsLineNumber) {
  auto dir = temp_dir("bad");
  write_file(dir / "r.txt", "a,b,c,d\n");
  try {
    read_results(dir / "r.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  write_file(dir / "r2.txt", "1,2,3,4\n1,2,3\n");
  try {
    read_results(dir / "r2.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Results, RandomRoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-500.0, 2000.0), size(0.001, 800.0);
  std::vector<BoundingBox> boxes;
  for (int i = 0; i < 1000; ++i) boxes.push_back({pos(rng), pos(rng), size(rng), size(rng)});
  auto dir = temp_dir("prop");
  write_results(dir / "r.txt", boxes);
  auto back = read_results(dir / "r.txt");
  ASSERT_EQ(back.size(), boxes.size());
  double worst = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    worst = std::max({worst, std::abs(back[i].x - boxes[i].x), std::abs(back[i].y - boxes[i].y),
                      std::abs(back[i].w - boxes[i].w), std::abs(back[i].h - boxes[i].h)});
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Results, EmptyListRejected) {
  EXPECT_THROW(write_results(temp_dir("empty") / "r.txt", {}), ValidationError);
}
