#include <gtest/gtest.h>

#include <chrono>

#include "cmot/marmot/gradcheck.hpp"

using namespace cmot;
using namespace cmot::marmot;

namespace {
constexpr Shape4 kShape{2, 4, 2, 2};
}

TEST(GradCheck, EnsembleBelowTighterBound) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = gradient_check(CheckedOp::Ensemble, kShape, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_GT(r.checked, 100u);
  }
}

TEST(GradCheck, BranchAndBlockBelowBound) {
  for (auto op : {CheckedOp::Branch, CheckedOp::Marmot}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto r = gradient_check(op, kShape, seed);
      EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
    }
  }
}

TEST(GradCheck, PureRelativeErrorAlsoSmall) {
  GradCheckOptions opt;
  opt.denominator_floor = 1e-6;
  for (auto op : {CheckedOp::Branch, CheckedOp::Ensemble, CheckedOp::Marmot}) {
    auto r = gradient_check(op, kShape, 5, opt);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  }
}

TEST(GradCheck, ZeroBranchIsResidualIdentity) {
  GradCheckOptions opt;
  opt.zero_branch_weights = true;
  opt.include_params = false;
  auto r = gradient_check(CheckedOp::Branch, kShape, 7, opt);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.checked, kShape.size());
}

TEST(GradCheck, TrainModeNormalisation) {
  GradCheckOptions opt;
  opt.mode = nn::Mode::Train;
  for (auto op : {CheckedOp::Branch, CheckedOp::Marmot}) {
    auto r = gradient_check(op, Shape4{3, 4, 2, 2}, 11, opt);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  }
}

TEST(GradCheck, FinishesQuickly) {
  const auto t0 = std::chrono::steady_clock::now();
  for (auto op : {CheckedOp::Branch, CheckedOp::Ensemble, CheckedOp::Marmot})
    gradient_check(op, kShape, 1);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
}
