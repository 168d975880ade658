// Copyright 2026 The reftrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <set>
#include <string>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "reftrack/plant.h"
#include "reftrack/refgen.h"

namespace reftrack {
namespace {

using ::testing::HasSubstr;

std::vector<Trajectory> Default48(std::uint64_t seed) {
  const PlantConfig c = PlantConfig::Default();
  return GenerateCycles(CycleSpec::Default(), 48, seed, c.PositionMin(), c.PositionMax());
}

TEST(GenerateCyclesTest, FortyEightCyclesOfAboutTwentySeconds) {
  const auto trajs = Default48(1);
  ASSERT_EQ(trajs.size(), 48u);
  std::set<std::string> ids;
  for (const Trajectory& t : trajs) {
    EXPECT_GE(t.points.size(), 380u);
    EXPECT_LE(t.points.size(), 420u);
    EXPECT_EQ(t.dt, kControlPeriod);
    ids.insert(t.id);
  }
  EXPECT_EQ(ids.size(), 48u);
  EXPECT_EQ(trajs[7].id, "cycle-007");
}

TEST(GenerateCyclesTest, ZeroJitterCyclesAreIdentical) {
  CycleSpec spec = CycleSpec::Default();
  spec.keypoint_jitter = 0.0;
  spec.duration_jitter = 0.0;
  const PlantConfig c = PlantConfig::Default();
  const auto trajs = GenerateCycles(spec, 2, 5, c.PositionMin(), c.PositionMax());
  ASSERT_EQ(trajs.size(), 2u);
  EXPECT_EQ(trajs[0].points.size(), trajs[1].points.size());
  EXPECT_EQ(trajs[0].points, trajs[1].points);
}

TEST(GenerateCyclesTest, SameSeedIsBitIdentical) {
  const auto a = Default48(9), b = Default48(9), c = Default48(10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].points, b[i].points);
    EXPECT_EQ(a[i].id, b[i].id);
  }
  EXPECT_NE(a[0].points, c[0].points);
}

TEST(GenerateCyclesTest, SmoothAndWithinLimits) {
  const PlantConfig c = PlantConfig::Default();
  const JointVector lo = c.PositionMin(), hi = c.PositionMax();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const Trajectory& t : Default48(seed)) {
      EXPECT_NO_THROW(t.Validate(0.05));
      for (std::size_t i = 0; i < t.points.size(); ++i) {
        ASSERT_TRUE((t.points[i].array() >= lo.array()).all());
        ASSERT_TRUE((t.points[i].array() <= hi.array()).all());
        if (i >= 2) {
          const JointVector d2 = t.points[i] - 2.0 * t.points[i - 1] + t.points[i - 2];
          ASSERT_LE(d2.cwiseAbs().maxCoeff(), 0.01) << t.id << " step " << i;
        }
      }
      // The cycle closes on its start.
      EXPECT_EQ(t.points.front(), t.points.back());
    }
  }
}

TEST(GenerateCyclesTest, RetimesFastPhases) {
  CycleSpec spec = CycleSpec::Default();
  spec.durations = {0.5, 0.5, 0.5, 0.5};
  const PlantConfig c = PlantConfig::Default();
  const auto trajs = GenerateCycles(spec, 3, 2, c.PositionMin(), c.PositionMax());
  for (const Trajectory& t : trajs) EXPECT_NO_THROW(t.Validate(spec.max_step));
}

TEST(GenerateCyclesTest, InfeasibleKeypointNamed) {
  CycleSpec spec = CycleSpec::Default();
  spec.keypoints[3][kBoom] = 0.95;  // limit 1.0 with 0.1 jitter
  const PlantConfig c = PlantConfig::Default();
  try {
    GenerateCycles(spec, 1, 0, c.PositionMin(), c.PositionMax());
    FAIL() << "expected std::invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_THAT(e.what(), HasSubstr("dump"));
  }
  EXPECT_THROW(GenerateCycles(CycleSpec::Default(), 0, 0, c.PositionMin(), c.PositionMax()),
               std::invalid_argument);
}

TEST(SplitTrajectoriesTest, FortyEight) {
  const auto trajs = Default48(1);
  const auto [train, test] = SplitTrajectories(trajs, 40, 8, 3);
  ASSERT_EQ(train.size(), 40u);
  ASSERT_EQ(test.size(), 8u);
  std::set<std::string> ids;
  for (const auto& t : train) ids.insert(t.id);
  for (const auto& t : test) EXPECT_EQ(ids.count(t.id), 0u) << t.id;
  for (const auto& t : test) ids.insert(t.id);
  EXPECT_EQ(ids.size(), 48u);
}

TEST(SplitTrajectoriesTest, EmptyTestSetAndDeterminism) {
  const auto trajs = Default48(1);
  const auto [train, test] = SplitTrajectories(trajs, 48, 0, 3);
  EXPECT_EQ(train.size(), 48u);
  EXPECT_TRUE(test.empty());
  const auto a = SplitTrajectories(trajs, 40, 8, 11);
  const auto b = SplitTrajectories(trajs, 40, 8, 11);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(a.second[i].id, b.second[i].id);
  EXPECT_THROW(SplitTrajectories(trajs, 40, 7, 0), std::invalid_argument);
}

}  // namespace
}  // namespace reftrack
