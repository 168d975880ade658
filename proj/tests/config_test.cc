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

#include "reftrack/config.h"

#include <set>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

namespace reftrack {
namespace {

using ::testing::HasSubstr;
using ::testing::MatchesRegex;

std::string Error(const std::string& json) {
  try {
    ConfigFromJson(json);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "no error";
}

TEST(ProfileTest, Desk) {
  const RunConfig c = ProfileConfig("desk");
  EXPECT_EQ(c.h, 10);
  EXPECT_EQ(c.n_train, 8);
  EXPECT_EQ(c.n_test, 2);
  EXPECT_EQ(c.model.epochs, 200);
  EXPECT_EQ(c.policy.epochs, 200);
  EXPECT_EQ(c.ratio, (NoiseRatio{9, 2}));
  EXPECT_EQ(c.sigma_max, 0.05);
  EXPECT_EQ(c.policy.gamma, 0.98);
  EXPECT_EQ(c.policy.k_smooth, 1.0);
  EXPECT_NO_THROW(c.Validate());
}

TEST(ProfileTest, Paper) {
  const RunConfig c = ProfileConfig("paper");
  EXPECT_EQ(c.h, 20);
  EXPECT_EQ(c.n_train + c.n_test, 48);
  EXPECT_EQ(c.model.epochs, 2000);
  EXPECT_EQ(c.model.batch_size, 2048);
  EXPECT_EQ(c.model.lr, 1e-5);
  EXPECT_EQ(c.model.hidden_layers, 6);
  EXPECT_EQ(c.model.hidden_width, 512);
  EXPECT_EQ(c.model.weight_decay, 0.003);
  EXPECT_NO_THROW(c.Validate());
}

TEST(ProfileTest, UnknownName) { EXPECT_THROW(ProfileConfig("lab"), std::invalid_argument); }

TEST(ConfigTest, DerivedTrainConfigs) {
  RunConfig c = ProfileConfig("desk");
  c.h = 7;
  EXPECT_EQ(c.ModelTrainConfig().h, 7);
  EXPECT_EQ(c.PolicyTrainConfig().h, 7);
  const std::set<std::uint64_t> seeds = {c.RefgenSeed(), c.SplitSeed(), c.CollectSeed(),
                                         c.EvalSeed(), c.ModelTrainConfig().seed,
                                         c.PolicyTrainConfig().seed};
  EXPECT_EQ(seeds.size(), 6u);
  RunConfig d = c;
  d.seed = 2;
  EXPECT_NE(d.RefgenSeed(), c.RefgenSeed());
}

TEST(ConfigJsonTest, RoundTrip) {
  for (const char* name : {"desk", "paper"}) {
    RunConfig c = ProfileConfig(name);
    c.seed = 12345678901234ull;
    c.plant.joints[2].delay = 5;
    c.gains.kp[3] = 1.75;
    c.cycles.durations[1] = 4.5;
    c.ratio = NoiseRatio{3, 4};
    c.model.lr_final = 0.25;
    c.k_smooth_arms = {0.0, 0.5};
    c.finetune_epochs = 7;
    c.finetune_lr_scale = 0.5;
    c.artifact_dir = "/tmp/x";
    const std::string text = ConfigToJson(c);
    const RunConfig back = ConfigFromJson(text);
    EXPECT_EQ(ConfigToJson(back), text);
    EXPECT_EQ(ConfigHash(back), ConfigHash(c));
    EXPECT_EQ(back.artifact_dir, "/tmp/x");
  }
}

TEST(ConfigJsonTest, PartialFileOverridesProfile) {
  const RunConfig c = ConfigFromJson(R"({"profile": "paper", "seed": 3, "train": {"h": 12}})");
  EXPECT_EQ(c.profile, "paper");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.h, 12);
  EXPECT_EQ(c.model.hidden_width, 512);
  EXPECT_EQ(ConfigFromJson("{}").profile, "desk");
}

TEST(ConfigJsonTest, Errors) {
  EXPECT_THAT(Error(R"({"sede": 1})"), HasSubstr("unknown key 'sede'"));
  EXPECT_THAT(Error(R"({"train": {"model": {"epoch": 3}}})"), HasSubstr("epoch"));
  EXPECT_THAT(Error(R"({"seed": -1})"), HasSubstr("seed"));
  EXPECT_THAT(Error(R"({"profile": "lab"})"), HasSubstr("lab"));
  EXPECT_THAT(Error("{"), HasSubstr("JSON"));
  EXPECT_THAT(Error("[1]"), HasSubstr("object"));
  EXPECT_THAT(Error(R"({"train": {"h": 0}})"), HasSubstr("h"));
  EXPECT_THAT(Error(R"({"pd": {"kp": [1, 2, 3]}})"), HasSubstr("4 entries"));
  EXPECT_THAT(Error(R"({"eval": {"finetune_epochs": 0}})"), HasSubstr("finetune_epochs"));
  EXPECT_THAT(Error(R"({"eval": {"finetune_lr_scale": 1.5}})"), HasSubstr("finetune_lr_scale"));
}

TEST(ConfigHashTest, Properties) {
  const RunConfig c = ProfileConfig("desk");
  EXPECT_THAT(ConfigHash(c), MatchesRegex("[0-9a-f]{16}"));
  RunConfig moved = c;
  moved.artifact_dir = "elsewhere";
  EXPECT_EQ(ConfigHash(moved), ConfigHash(c));
  RunConfig reseeded = c;
  reseeded.seed = 2;
  EXPECT_NE(ConfigHash(reseeded), ConfigHash(c));
  RunConfig tweaked = c;
  tweaked.policy.gamma = 0.97;
  EXPECT_NE(ConfigHash(tweaked), ConfigHash(c));
}

TEST(ConfigHashTest, Fnv1aVectors) {
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(Fnv1a("foobar"), 0x85944171f73967e8ull);
}

}  // namespace
}  // namespace reftrack
