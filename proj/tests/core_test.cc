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


#include <random>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "reftrack/core.h"

namespace reftrack {
namespace {

Observation Obs(double v) {
  Observation o;
  o.q.setConstant(v);
  o.qdot.setConstant(-v);
  return o;
}

TEST(PadHistoryTest, SingleEntryFillsWindow) {
  const std::vector<Observation> prefix = {Obs(0.3)};
  const auto padded = PadHistory<Observation>(prefix, 20);
  ASSERT_EQ(padded.size(), 21u);
  for (const Observation& o : padded) EXPECT_EQ(o, Obs(0.3));
}

TEST(PadHistoryTest, FullPrefixUnchanged) {
  std::vector<int> prefix(21);
  for (int i = 0; i < 21; ++i) prefix[i] = i;
  EXPECT_EQ(PadHistory<int>(prefix, 20), prefix);
}

TEST(PadHistoryTest, LeadingSlotsRepeatFirst) {
  const std::vector<int> prefix = {7, 8};
  EXPECT_EQ(PadHistory<int>(prefix, 3), (std::vector<int>{7, 7, 7, 8}));
}

TEST(PadHistoryTest, Errors) {
  const std::vector<int> empty;
  EXPECT_THROW(PadHistory<int>(empty, 3), std::invalid_argument);
  const std::vector<int> one = {1};
  EXPECT_THROW(PadHistory<int>(one, 0), std::invalid_argument);
}

TEST(HistoryWindowTest, ShiftDropsOldest) {
  const std::vector<Observation> obs = {Obs(1), Obs(2), Obs(3)};
  const std::vector<JointVector> refs = {JointVector::Constant(1), JointVector::Constant(2),
                                         JointVector::Constant(3)};
  const HistoryWindow w = HistoryWindow::FromPrefix(obs, refs, 2);
  const HistoryWindow s = w.Shifted(Obs(4), JointVector::Constant(4));
  ASSERT_EQ(s.h(), 2);
  EXPECT_EQ(s.obs()[0], Obs(2));
  EXPECT_EQ(s.obs()[2], Obs(4));
  EXPECT_EQ(s.refs()[0], JointVector::Constant(2));
  EXPECT_EQ(s.refs()[2], JointVector::Constant(4));
}

TEST(HistoryWindowTest, RepeatedShiftReachesFixedPoint) {
  const std::vector<Observation> obs = {Obs(1), Obs(2)};
  const std::vector<JointVector> refs = {JointVector::Zero(), JointVector::Ones()};
  HistoryWindow w = HistoryWindow::FromPrefix(obs, refs, 4);
  for (int i = 0; i < 5; ++i) w = w.Shifted(Obs(9), JointVector::Constant(9));
  for (const Observation& o : w.obs()) EXPECT_EQ(o, Obs(9));
  for (const JointVector& r : w.refs()) EXPECT_EQ(r, JointVector::Constant(9));
}

// Padding the first entry and shifting in every later one must reproduce the
// trailing h + 1 raw entries without drift.
TEST(HistoryWindowTest, PadThenShiftMatchesRawTail) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const int h = 6;
  std::vector<Observation> obs(40);
  std::vector<JointVector> refs(40);
  for (int t = 0; t < 40; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      obs[t].q[j] = n01(rng);
      obs[t].qdot[j] = n01(rng);
      refs[t][j] = n01(rng);
    }
  }
  HistoryWindow w = HistoryWindow::FromPrefix(std::span(obs).first(1),
                                              std::span(refs).first(1), h);
  for (int t = 1; t < 40; ++t) {
    w = w.Shifted(obs[t], refs[t]);
    const HistoryWindow direct = HistoryWindow::FromPrefix(
        std::span(obs).first(t + 1), std::span(refs).first(t + 1), h);
    ASSERT_EQ(w, direct) << "t=" << t;
  }
}

TEST(FlattenInputsTest, Dimensions) {
  EXPECT_EQ(ModelInputDim(20), 256);
  EXPECT_EQ(PolicyInputDim(20), 332);
  EXPECT_EQ(ModelInputDim(1), 28);

  const std::vector<Observation> obs = {Obs(0.1)};
  const std::vector<JointVector> refs = {JointVector::Zero()};
  const HistoryWindow w = HistoryWindow::FromPrefix(obs, refs, 20);
  const std::vector<JointVector> model_extra(1, JointVector::Ones());
  const std::vector<JointVector> policy_extra(20, JointVector::Ones());
  EXPECT_EQ(FlattenInputs(w, model_extra).size(), 256);
  EXPECT_EQ(FlattenInputs(w, policy_extra).size(), 332);
}

TEST(FlattenInputsTest, Layout) {
  Observation a, b;
  a.q << 1, 2, 3, 4;
  a.qdot << 5, 6, 7, 8;
  b.q << 9, 10, 11, 12;
  b.qdot << 13, 14, 15, 16;
  const std::vector<Observation> obs = {a, b};
  const std::vector<JointVector> refs = {JointVector(17, 18, 19, 20),
                                         JointVector(21, 22, 23, 24)};
  const std::vector<JointVector> extra = {JointVector(25, 26, 27, 28)};
  const Eigen::VectorXd flat =
      FlattenInputs(HistoryWindow::FromPrefix(obs, refs, 1), extra);
  ASSERT_EQ(flat.size(), 28);
  for (int i = 0; i < 28; ++i) EXPECT_EQ(flat[i], i + 1.0);
}

TEST(FlattenInputsTest, InjectiveOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  auto random_window = [&](int h) {
    std::vector<Observation> obs(h + 1);
    std::vector<JointVector> refs(h + 1);
    for (int t = 0; t <= h; ++t) {
      for (int j = 0; j < kNumJoints; ++j) {
        obs[t].q[j] = u(rng);
        obs[t].qdot[j] = u(rng);
        refs[t][j] = u(rng);
      }
    }
    return HistoryWindow::FromPrefix(obs, refs, h);
  };
  const std::vector<JointVector> extra = {JointVector::Zero()};
  for (int trial = 0; trial < 200; ++trial) {
    const HistoryWindow w1 = random_window(3);
    HistoryWindow w2 = random_window(3);
    if (trial % 2 == 0) {
      // Differ in a single scalar.
      std::vector<Observation> obs = w1.obs();
      obs[trial % 4].qdot[trial % kNumJoints] += 1e-9;
      w2 = HistoryWindow::FromPrefix(obs, w1.refs(), 3);
    }
    ASSERT_NE(w1, w2);
    EXPECT_NE(FlattenInputs(w1, extra), FlattenInputs(w2, extra));
  }
}

TEST(TrajectoryTest, Validate) {
  Trajectory t;
  t.id = "x";
  t.points = {JointVector::Zero()};
  EXPECT_THROW(t.Validate(), std::invalid_argument);
  t.points.push_back(JointVector::Constant(0.05));
  EXPECT_NO_THROW(t.Validate());
  EXPECT_EQ(t.steps(), 1);
  t.points.push_back(JointVector(0.05, 0.05, 0.05, 0.2));
  EXPECT_THROW(t.Validate(), std::invalid_argument);
  t.points.pop_back();
  t.dt = 0.0;
  EXPECT_THROW(t.Validate(), std::invalid_argument);
}

TEST(ObservationTest, FlatRoundTrip) {
  Observation o;
  o.q << 1, 2, 3, 4;
  o.qdot << 5, 6, 7, 8;
  EXPECT_EQ(Observation::FromFlat(o.Flat()), o);
  EXPECT_EQ(o.Flat()[4], 5.0);
}

}  // namespace
}  // namespace reftrack
