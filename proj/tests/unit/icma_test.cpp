#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "hcma/error.hpp"
#include "hcma/icma.hpp"

namespace {

using namespace hcma::icma;
using hcma::Matrix;
namespace ad = hcma::ad;

std::vector<Embedding> random_units(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (double& x : v) x = g(rng);
    out.push_back(Embedding::unit(std::move(v)));
  }
  return out;
}

std::vector<Embedding> basis(std::size_t n) {
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    out.push_back(Embedding::unit(v));
  }
  return out;
}

TEST(Classify, SelfSimilarityMaximal) {
  const auto bank = basis(4);
  EXPECT_EQ(classify_by_text(bank[2], bank), 2);
}

TEST(Classify, TwoDimensional) {
  const auto bank = basis(2);
  EXPECT_EQ(classify_by_text(Embedding::unit({1, 0}), bank), 0);
}

TEST(Classify, TiesGoToLowestIndex) {
  const auto bank = basis(3);
  EXPECT_EQ(classify_by_text(Embedding::unit({0, 1, 1}), bank), 1);
  EXPECT_EQ(classify_by_text(Embedding::unit({1, 1, 1}), bank), 0);
}

TEST(Classify, MatchesBruteForceArgmax) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto bank = random_units(6, 8, rng);
    const auto f = random_units(1, 8, rng).front();
    int best = 0;
    double best_s = -1e300;
    for (std::size_t k = 0; k < bank.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < 8; ++i) s += f.values[i] * bank[k].values[i];
      if (s > best_s) {
        best_s = s;
        best = static_cast<int>(k);
      }
    }
    EXPECT_EQ(classify_by_text(f, bank), best);
    EXPECT_EQ(classify_rows(hcma::encoders::stack({f}), hcma::encoders::stack(bank))[0], best);
  }
}

TEST(Classify, Errors) {
  EXPECT_THROW(classify_by_text(Embedding::unit({1, 0}), {}), hcma::ContractError);
  const auto bank = basis(3);
  EXPECT_THROW(classify_by_text(Embedding::unit({1, 0}), bank), hcma::DimensionMismatchError);
}

TEST(TextProbabilities, RowsSumToOne) {
  std::mt19937_64 rng(2);
  const Matrix f = hcma::encoders::stack(random_units(5, 4, rng));
  const Matrix bank = hcma::encoders::stack(random_units(3, 4, rng));
  const Matrix p = text_probabilities(f, bank, 0.1);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (double v : p.row_span(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Indicator, TableRows) {
  EXPECT_EQ(AlignmentIndicator::parse("o"), AlignmentIndicator::object_only());
  EXPECT_EQ(AlignmentIndicator::parse("v,l"), AlignmentIndicator::object_view());
  EXPECT_EQ(AlignmentIndicator::parse("OV"), AlignmentIndicator::object_view());
  EXPECT_EQ(AlignmentIndicator::parse("s, g"), AlignmentIndicator::object_scene());
  EXPECT_EQ(AlignmentIndicator::parse("OVS"), AlignmentIndicator::object_view_scene());
  EXPECT_EQ(AlignmentIndicator::object_view_scene().to_string(), "v,s,a");
}

TEST(Indicator, RejectsOtherCombinations) {
  EXPECT_THROW(AlignmentIndicator::parse("o,v"), hcma::InvalidIndicatorError);
  EXPECT_THROW(AlignmentIndicator::parse("v,l,a"), hcma::InvalidIndicatorError);
  EXPECT_THROW(AlignmentIndicator::parse("x"), hcma::InvalidIndicatorError);
  EXPECT_THROW(AlignmentIndicator::parse(""), hcma::InvalidIndicatorError);
}

TEST(IntraObject, SameCategoryTwoPositives) {
  const auto bank = basis(4);
  const std::vector<Embedding> imgs{bank[1], bank[1]};
  const BatchPair p = build_intra_object_pairs(imgs, imgs, imgs, bank);
  ASSERT_EQ(p.point_text.size(), 2u);
  EXPECT_EQ(p.point_text.positive_count(0), 2u);
  EXPECT_EQ(p.point_text.positive_count(1), 2u);
  EXPECT_EQ(p.point_image.positive_count(0), 2u);
}

TEST(IntraObject, DistinctCategoriesSingletons) {
  const auto bank = basis(4);
  const std::vector<Embedding> imgs{bank[0], bank[3]};
  const BatchPair p = build_intra_object_pairs(imgs, imgs, imgs, bank);
  EXPECT_EQ(p.point_text.positive_count(0), 1u);
  EXPECT_EQ(p.point_text.positive_count(1), 1u);
  EXPECT_EQ(p.point_text.anchor_keys, (std::vector<int>{0, 3}));
}

TEST(IntraObject, KeyHistogramMatchesRecount) {
  std::mt19937_64 rng(17);
  const auto bank = basis(3);
  std::vector<Embedding> imgs;
  std::map<int, int> want;
  for (int i = 0; i < 8; ++i) {
    const int c = static_cast<int>(rng() % 3);
    ++want[c];
    std::vector<double> v = bank[c].values;
    for (double& x : v) x += 0.1 * std::uniform_real_distribution<double>(0, 1)(rng);
    imgs.push_back(Embedding::unit(v));
  }
  const auto pts = random_units(8, 3, rng);
  const BatchPair p = build_intra_object_pairs(pts, imgs, imgs, bank);
  std::map<int, int> got;
  for (int k : p.point_image.anchor_keys) ++got[k];
  EXPECT_EQ(got, want);
  for (std::size_t b = 0; b < 8; ++b) {
    EXPECT_EQ(p.point_image.positive_count(b),
              static_cast<std::size_t>(want[p.point_image.anchor_keys[b]]));
  }
}

TEST(IntraObject, EmptyGivesEmptyBatches) {
  const BatchPair p = build_intra_object_pairs({}, {}, {}, basis(2));
  EXPECT_TRUE(p.point_text.empty());
  EXPECT_TRUE(p.point_image.empty());
}

TEST(IntraObject, ExcludingSelfDropsLoneAnchors) {
  const auto bank = basis(4);
  const std::vector<Embedding> imgs{bank[0], bank[0], bank[2]};
  const BatchPair p = build_intra_object_pairs(imgs, imgs, imgs, bank, {0.1, false});
  ASSERT_EQ(p.point_image.size(), 2u);
  EXPECT_EQ(p.point_image.positive_count(0), 1u);
  EXPECT_FALSE(p.point_image.allowed(0, 0));
  EXPECT_TRUE(p.point_image.positive(0, 1));
  EXPECT_NO_THROW(p.point_image.validate());
}

TEST(IntraScene, OneSceneAllPositive) {
  std::mt19937_64 rng(1);
  const auto f = random_units(4, 5, rng);
  const std::vector<std::string> labels(4, "s0");
  const BatchPair p = build_intra_scene_pairs(f, f, f, labels);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(p.point_text.positive_count(b), 4u);
}

TEST(IntraScene, TwoScenesSingletons) {
  std::mt19937_64 rng(2);
  const auto f = random_units(2, 5, rng);
  const std::vector<std::string> labels{"a", "b"};
  const BatchPair p = build_intra_scene_pairs(f, f, f, labels);
  EXPECT_EQ(p.point_image.positive_count(0), 1u);
  EXPECT_EQ(p.point_image.positive_count(1), 1u);
}

TEST(IntraScene, FourScenesThreeViews) {
  std::mt19937_64 rng(3);
  const auto f = random_units(12, 5, rng);
  std::vector<std::string> labels;
  for (int i = 0; i < 12; ++i) labels.push_back("scene" + std::to_string(i % 4));
  const BatchPair p = build_intra_scene_pairs(f, f, f, labels);
  for (std::size_t b = 0; b < 12; ++b) {
    EXPECT_EQ(p.point_text.positive_count(b), 3u);
    EXPECT_EQ(p.point_image.positive_count(b), 3u);
  }
}

TEST(Concat, SinglePartIsIdentity) {
  const Embedding e = Embedding::unit({0.6, 0.8});
  const std::vector<Embedding> parts{e};
  EXPECT_EQ(concat_levels(parts).values, e.values);
}

TEST(Concat, TwoEqualParts) {
  const Embedding e = Embedding::unit({0.6, 0.8});
  const std::vector<Embedding> parts{e, e};
  const Embedding c = concat_levels(parts);
  ASSERT_EQ(c.dim(), 4u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(c.values[i], e.values[i] / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c.values[i + 2], e.values[i] / std::sqrt(2.0), 1e-15);
  }
}

TEST(Concat, RandomPartsProportional) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Embedding> parts;
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
      std::vector<double> v(5);
      for (double& x : v) {
        x = g(rng);
        sq += x * x;
      }
      parts.push_back({v, false});
    }
    const Embedding c = concat_levels(parts);
    double n = 0.0;
    for (double x : c.values) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(c.values[5 * k + i], parts[k].values[i] / std::sqrt(sq), 1e-12);
      }
    }
  }
  const std::vector<Embedding> bad{Embedding::unit({1, 0}), Embedding::unit({1, 0, 0})};
  EXPECT_THROW(concat_levels(bad), hcma::DimensionMismatchError);
}

struct Levels {
  LevelFeatures object, view, scene;
  InterInputs in;
  std::vector<int> keys;
};

Levels random_levels(std::uint64_t seed, std::size_t d = 4) {
  std::mt19937_64 rng(seed);
  auto rows = [&](std::size_t n) { return ad::constant(hcma::encoders::stack(random_units(n, d, rng))); };
  Levels l;
  l.object = {rows(6), rows(6), rows(6), {}};
  l.view = {rows(3), rows(3), rows(3), {}};
  l.scene = {rows(2), rows(2), rows(2), {}};
  l.in.view_of = {0, 0, 1, 1, 2, 2};
  l.in.scene_of = {0, 0, 0, 1, 1, 1};
  l.keys = {0, 1, 0, 2, 1, 1};
  return l;
}

// Point the inputs at the levels once the struct has its final address.
void wire(Levels& l) {
  l.in.object = &l.object;
  l.in.view = &l.view;
  l.in.scene = &l.scene;
}

TEST(Inter, DimensionsPerKind) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Levels l = random_levels(seed);
    wire(l);
    EXPECT_EQ(build_inter_pairs(InterKind::kLocal, l.in, l.keys, {}).point_text.anchors.cols(), 8u);
    EXPECT_EQ(build_inter_pairs(InterKind::kGlobal, l.in, l.keys, {}).point_image.anchors.cols(), 8u);
    EXPECT_EQ(build_inter_pairs(InterKind::kAll, l.in, l.keys, {}).point_text.candidates.cols(), 12u);
  }
}

TEST(Inter, SharedViewKeepsObjectGrouping) {
  Levels l = random_levels(5);
  wire(l);
  l.in.view_of.assign(6, 0);
  l.in.scene = nullptr;
  const BatchPair inter = build_inter_pairs(InterKind::kLocal, l.in, l.keys, {});
  const BatchPair intra = make_pairs(l.object, l.keys, {});
  EXPECT_EQ(inter.point_text.anchor_keys, intra.point_text.anchor_keys);
  EXPECT_EQ(inter.point_text.positive_mask(), intra.point_text.positive_mask());
  EXPECT_EQ(inter.point_image.positive_mask(), intra.point_image.positive_mask());
}

TEST(Inter, MissingLevelIsConfigError) {
  Levels l = random_levels(6);
  wire(l);
  l.in.scene = nullptr;
  EXPECT_THROW(build_inter_pairs(InterKind::kAll, l.in, l.keys, {}), hcma::ConfigError);
  EXPECT_THROW(build_inter_pairs(InterKind::kGlobal, l.in, l.keys, {}), hcma::ConfigError);
  EXPECT_NO_THROW(build_inter_pairs(InterKind::kLocal, l.in, l.keys, {}));
}

TEST(Batch, ValidateRejectsBadTemperature) {
  const auto bank = basis(2);
  BatchPair p = build_intra_object_pairs(bank, bank, bank, bank);
  p.point_text.tau = 0.0;
  EXPECT_THROW(p.point_text.validate(), hcma::ContractError);
}

TEST(Batch, PositiveRelationSymmetric) {
  std::mt19937_64 rng(9);
  const auto f = random_units(9, 4, rng);
  std::vector<std::string> labels;
  for (int i = 0; i < 9; ++i) labels.push_back(std::to_string(rng() % 3));
  const BatchPair p = build_intra_scene_pairs(f, f, f, labels);
  const auto& b = p.point_image;
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(b.positive(i, j), b.positive(j, i));
  }
}

}  // namespace
