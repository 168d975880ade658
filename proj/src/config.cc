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

#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace reftrack {

namespace {

using nlohmann::json;

const char* const kJointKeys[kNumJoints] = {"swing", "boom", "arm", "bucket"};

// Stage tags for DeriveSeed.
enum : std::uint64_t {
  kRefgenStage = 1,
  kSplitStage = 2,
  kCollectStage = 3,
  kEvalStage = 4,
  kModelStage = 5,
  kPolicyStage = 6,
};

[[noreturn]] void Fail(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

json Vec(const JointVector& v) { return json::array({v[0], v[1], v[2], v[3]}); }

// Applies `handlers` to the members of object `j`; unknown keys fail.
using Handlers = std::map<std::string, std::function<void(const json&)>>;
void Visit(const json& j, const std::string& where, const Handlers& handlers) {
  if (!j.is_object()) Fail(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) Fail("unknown key '" + key + "' in " + where);
    try {
      it->second(value);
    } catch (const json::exception& e) {
      Fail(where + "." + key + ": " + e.what());
    }
  }
}

double Num(const json& j, const std::string& what) {
  if (!j.is_number()) Fail(what + " must be a number");
  return j.get<double>();
}

int Int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) Fail(what + " must be an integer");
  return j.get<int>();
}

JointVector JointsFrom(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != kNumJoints) Fail(what + " must have 4 entries");
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = Num(j[i], what);
  return v;
}

json TrainToJson(const TrainConfig& c, bool policy) {
  json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"lr_final", c.lr_final},
            {"hidden_layers", c.hidden_layers},
            {"hidden_width", c.hidden_width},
            {"windows_per_epoch", c.windows_per_epoch},
            {"chunk_size", c.chunk_size},
            {"eval_windows", c.eval_windows}};
  if (policy) {
    j["gamma"] = c.gamma;
    j["k_smooth"] = c.k_smooth;
  } else {
    j["weight_decay"] = c.weight_decay;
  }
  return j;
}

void TrainFromJson(const json& j, const std::string& where, TrainConfig& c, bool policy) {
  Handlers h = {
      {"epochs", [&](const json& v) { c.epochs = Int(v, where + ".epochs"); }},
      {"batch_size", [&](const json& v) { c.batch_size = Int(v, where + ".batch_size"); }},
      {"lr", [&](const json& v) { c.lr = Num(v, where + ".lr"); }},
      {"lr_final", [&](const json& v) { c.lr_final = Num(v, where + ".lr_final"); }},
      {"hidden_layers",
       [&](const json& v) { c.hidden_layers = Int(v, where + ".hidden_layers"); }},
      {"hidden_width", [&](const json& v) { c.hidden_width = Int(v, where + ".hidden_width"); }},
      {"windows_per_epoch",
       [&](const json& v) { c.windows_per_epoch = Int(v, where + ".windows_per_epoch"); }},
      {"chunk_size", [&](const json& v) { c.chunk_size = Int(v, where + ".chunk_size"); }},
      {"eval_windows", [&](const json& v) { c.eval_windows = Int(v, where + ".eval_windows"); }},
  };
  if (policy) {
    h["gamma"] = [&](const json& v) { c.gamma = Num(v, where + ".gamma"); };
    h["k_smooth"] = [&](const json& v) { c.k_smooth = Num(v, where + ".k_smooth"); };
  } else {
    h["weight_decay"] = [&](const json& v) { c.weight_decay = Num(v, where + ".weight_decay"); };
  }
  Visit(j, where, h);
}

json ToJson(const RunConfig& c, bool with_artifacts) {
  json joints = json::array();
  for (int i = 0; i < kNumJoints; ++i) {
    const JointParams& p = c.plant.joints[i];
    joints.push_back({{"gain", p.gain},
                      {"time_constant", p.time_constant},
                      {"dead_zone", p.dead_zone},
                      {"delay", p.delay},
                      {"velocity_limit", p.velocity_limit},
                      {"position_min", p.position_min},
                      {"position_max", p.position_max}});
  }
  const LinkGeometry& g = c.plant.geometry;
  json keypoints = json::array();
  for (const JointVector& k : c.cycles.keypoints) keypoints.push_back(Vec(k));
  json j = {
      {"profile", c.profile},
      {"seed", c.seed},
      {"plant",
       {{"joints", joints},
        {"gravity_sag", c.plant.gravity_sag},
        {"swing_inertia", c.plant.swing_inertia},
        {"cross_bleed", c.plant.cross_bleed},
        {"substeps", c.plant.substeps},
        {"command_noise", c.plant.command_noise},
        {"geometry",
         {{"boom", g.boom},
          {"arm", g.arm},
          {"bucket", g.bucket},
          {"pivot_x", g.pivot_x},
          {"pivot_z", g.pivot_z}}}}},
      {"pd", {{"kp", Vec(c.gains.kp)}, {"kd", Vec(c.gains.kd)}}},
      {"refgen",
       {{"keypoints", keypoints},
        {"durations", c.cycles.durations},
        {"keypoint_jitter", c.cycles.keypoint_jitter},
        {"duration_jitter", c.cycles.duration_jitter},
        {"max_step", c.cycles.max_step},
        {"dt", c.cycles.dt},
        {"n_train", c.n_train},
        {"n_test", c.n_test}}},
      {"collect",
       {{"sigma_max", c.sigma_max},
        {"noisy_passes", c.ratio.noisy},
        {"clean_passes", c.ratio.clean}}},
      {"train",
       {{"h", c.h},
        {"model", TrainToJson(c.model, false)},
        {"policy", TrainToJson(c.policy, true)}}},
      {"eval",
       {{"rounds", c.rounds},
        {"finetune_epochs", c.finetune_epochs},
        {"finetune_lr_scale", c.finetune_lr_scale},
        {"k_smooth_arms", c.k_smooth_arms}}},
  };
  if (with_artifacts) j["artifact_dir"] = c.artifact_dir;
  return j;
}

}  // namespace

void RunConfig::Validate() const {
  if (profile != "desk" && profile != "paper") Fail("profile must be 'desk' or 'paper'");
  try {
    plant.Validate();
    gains.Validate();
  } catch (const std::invalid_argument& e) {
    Fail(e.what());
  }
  if (n_train < 1) Fail("refgen.n_train must be >= 1");
  if (n_test < 1) Fail("refgen.n_test must be >= 1");
  if (!(cycles.dt > 0.0) || !(cycles.max_step > 0.0)) Fail("refgen dt and max_step must be > 0");
  if (!(cycles.keypoint_jitter >= 0.0) || !(cycles.duration_jitter >= 0.0) ||
      cycles.duration_jitter >= 1.0) {
    Fail("refgen jitter out of range");
  }
  if (!(sigma_max >= 0.0)) Fail("collect.sigma_max must be >= 0");
  if (ratio.noisy < 0 || ratio.clean < 0 || ratio.passes() < 1) {
    Fail("collect passes must be >= 0 with at least one in total");
  }
  if (h < 1) Fail("train.h must be >= 1");
  try {
    ModelTrainConfig().Validate();
    PolicyTrainConfig().Validate();
  } catch (const std::invalid_argument& e) {
    Fail(e.what());
  }
  if (rounds < 1) Fail("eval.rounds must be >= 1");
  if (finetune_epochs < 1) Fail("eval.finetune_epochs must be >= 1");
  if (!(finetune_lr_scale > 0.0 && finetune_lr_scale <= 1.0)) {
    Fail("eval.finetune_lr_scale must be in (0, 1]");
  }
  for (double k : k_smooth_arms) {
    if (!(k >= 0.0)) Fail("eval.k_smooth_arms entries must be >= 0");
  }
}

std::uint64_t RunConfig::RefgenSeed() const { return DeriveSeed(seed, kRefgenStage); }
std::uint64_t RunConfig::SplitSeed() const { return DeriveSeed(seed, kSplitStage); }
std::uint64_t RunConfig::CollectSeed() const { return DeriveSeed(seed, kCollectStage); }
std::uint64_t RunConfig::EvalSeed() const { return DeriveSeed(seed, kEvalStage); }

TrainConfig RunConfig::ModelTrainConfig() const {
  TrainConfig c = model;
  c.h = h;
  c.seed = DeriveSeed(seed, kModelStage);
  return c;
}

TrainConfig RunConfig::PolicyTrainConfig() const {
  TrainConfig c = policy;
  c.h = h;
  c.seed = DeriveSeed(seed, kPolicyStage);
  return c;
}

RunConfig ProfileConfig(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "desk") {
    c.n_train = 8;
    c.n_test = 2;
    c.h = 10;
    for (TrainConfig* t : {&c.model, &c.policy}) {
      t->epochs = 200;
      t->batch_size = 32;
      t->lr = 1e-3;
      t->hidden_layers = 3;
      t->hidden_width = 64;
      t->eval_windows = 256;
    }
    c.model.weight_decay = 0.0;
    c.model.windows_per_epoch = 8192;
    c.policy.windows_per_epoch = 2048;
  } else if (name == "paper") {
    c.n_train = 40;
    c.n_test = 8;
    c.h = 20;
    for (TrainConfig* t : {&c.model, &c.policy}) {
      t->epochs = 2000;
      t->batch_size = 2048;
      t->lr = 1e-5;
      t->hidden_layers = 6;
      t->hidden_width = 512;
      t->windows_per_epoch = 0;
    }
    c.model.weight_decay = 0.003;
    c.finetune_epochs = 200;
  } else {
    Fail("unknown profile '" + name + "'");
  }
  c.policy.weight_decay = 0.0;
  c.policy.gamma = 0.98;
  c.policy.k_smooth = 1.0;
  return c;
}

std::string ConfigToJson(const RunConfig& config) { return ToJson(config, true).dump(2) + "\n"; }

RunConfig ConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    Fail(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) Fail("top level must be an object");
  std::string profile = "desk";
  if (j.contains("profile")) {
    if (!j["profile"].is_string()) Fail("profile must be a string");
    profile = j["profile"].get<std::string>();
  }
  RunConfig c = ProfileConfig(profile);

  auto joint_handlers = [&](JointParams& p, const std::string& where) {
    return Handlers{
        {"gain", [&p, where](const json& v) { p.gain = Num(v, where + ".gain"); }},
        {"time_constant",
         [&p, where](const json& v) { p.time_constant = Num(v, where + ".time_constant"); }},
        {"dead_zone", [&p, where](const json& v) { p.dead_zone = Num(v, where + ".dead_zone"); }},
        {"delay", [&p, where](const json& v) { p.delay = Int(v, where + ".delay"); }},
        {"velocity_limit",
         [&p, where](const json& v) { p.velocity_limit = Num(v, where + ".velocity_limit"); }},
        {"position_min",
         [&p, where](const json& v) { p.position_min = Num(v, where + ".position_min"); }},
        {"position_max",
         [&p, where](const json& v) { p.position_max = Num(v, where + ".position_max"); }},
    };
  };

  Visit(j, "config",
        {
            {"profile", [](const json&) {}},
            {"seed",
             [&](const json& v) {
               if (!v.is_number_unsigned()) Fail("seed must be a non-negative integer");
               c.seed = v.get<std::uint64_t>();
             }},
            {"artifact_dir",
             [&](const json& v) {
               if (!v.is_string()) Fail("artifact_dir must be a string");
               c.artifact_dir = v.get<std::string>();
             }},
            {"plant",
             [&](const json& p) {
               Visit(p, "plant",
                     {
                         {"joints",
                          [&](const json& v) {
                            if (!v.is_array() || v.size() != kNumJoints) {
                              Fail("plant.joints must have 4 entries");
                            }
                            for (int i = 0; i < kNumJoints; ++i) {
                              const std::string where = std::string("plant.joints.") + kJointKeys[i];
                              Visit(v[i], where, joint_handlers(c.plant.joints[i], where));
                            }
                          }},
                         {"gravity_sag",
                          [&](const json& v) { c.plant.gravity_sag = Num(v, "plant.gravity_sag"); }},
                         {"swing_inertia",
                          [&](const json& v) {
                            c.plant.swing_inertia = Num(v, "plant.swing_inertia");
                          }},
                         {"cross_bleed",
                          [&](const json& v) { c.plant.cross_bleed = Num(v, "plant.cross_bleed"); }},
                         {"substeps",
                          [&](const json& v) { c.plant.substeps = Int(v, "plant.substeps"); }},
                         {"command_noise",
                          [&](const json& v) {
                            c.plant.command_noise = Num(v, "plant.command_noise");
                          }},
                         {"geometry",
                          [&](const json& v) {
                            LinkGeometry& g = c.plant.geometry;
                            Visit(v, "plant.geometry",
                                  {{"boom", [&](const json& x) { g.boom = Num(x, "boom"); }},
                                   {"arm", [&](const json& x) { g.arm = Num(x, "arm"); }},
                                   {"bucket", [&](const json& x) { g.bucket = Num(x, "bucket"); }},
                                   {"pivot_x", [&](const json& x) { g.pivot_x = Num(x, "pivot_x"); }},
                                   {"pivot_z",
                                    [&](const json& x) { g.pivot_z = Num(x, "pivot_z"); }}});
                          }},
                     });
             }},
            {"pd",
             [&](const json& p) {
               Visit(p, "pd",
                     {{"kp", [&](const json& v) { c.gains.kp = JointsFrom(v, "pd.kp"); }},
                      {"kd", [&](const json& v) { c.gains.kd = JointsFrom(v, "pd.kd"); }}});
             }},
            {"refgen",
             [&](const json& r) {
               CycleSpec& s = c.cycles;
               Visit(r, "refgen",
                     {
                         {"keypoints",
                          [&](const json& v) {
                            if (!v.is_array() || v.size() != 4) {
                              Fail("refgen.keypoints must have 4 entries");
                            }
                            for (int k = 0; k < 4; ++k) {
                              s.keypoints[k] = JointsFrom(v[k], "refgen.keypoints");
                            }
                          }},
                         {"durations",
                          [&](const json& v) {
                            const JointVector d = JointsFrom(v, "refgen.durations");
                            for (int k = 0; k < 4; ++k) s.durations[k] = d[k];
                          }},
                         {"keypoint_jitter",
                          [&](const json& v) {
                            s.keypoint_jitter = Num(v, "refgen.keypoint_jitter");
                          }},
                         {"duration_jitter",
                          [&](const json& v) {
                            s.duration_jitter = Num(v, "refgen.duration_jitter");
                          }},
                         {"max_step", [&](const json& v) { s.max_step = Num(v, "refgen.max_step"); }},
                         {"dt", [&](const json& v) { s.dt = Num(v, "refgen.dt"); }},
                         {"n_train", [&](const json& v) { c.n_train = Int(v, "refgen.n_train"); }},
                         {"n_test", [&](const json& v) { c.n_test = Int(v, "refgen.n_test"); }},
                     });
             }},
            {"collect",
             [&](const json& v) {
               Visit(v, "collect",
                     {{"sigma_max",
                       [&](const json& x) { c.sigma_max = Num(x, "collect.sigma_max"); }},
                      {"noisy_passes",
                       [&](const json& x) { c.ratio.noisy = Int(x, "collect.noisy_passes"); }},
                      {"clean_passes",
                       [&](const json& x) { c.ratio.clean = Int(x, "collect.clean_passes"); }}});
             }},
            {"train",
             [&](const json& v) {
               Visit(v, "train",
                     {{"h", [&](const json& x) { c.h = Int(x, "train.h"); }},
                      {"model",
                       [&](const json& x) { TrainFromJson(x, "train.model", c.model, false); }},
                      {"policy",
                       [&](const json& x) { TrainFromJson(x, "train.policy", c.policy, true); }}});
             }},
            {"eval",
             [&](const json& v) {
               Visit(v, "eval",
                     {{"rounds", [&](const json& x) { c.rounds = Int(x, "eval.rounds"); }},
                      {"finetune_epochs",
                       [&](const json& x) { c.finetune_epochs = Int(x, "eval.finetune_epochs"); }},
                      {"finetune_lr_scale",
                       [&](const json& x) {
                         c.finetune_lr_scale = Num(x, "eval.finetune_lr_scale");
                       }},
                      {"k_smooth_arms",
                       [&](const json& x) {
                         if (!x.is_array()) Fail("eval.k_smooth_arms must be an array");
                         c.k_smooth_arms.clear();
                         for (const json& k : x) c.k_smooth_arms.push_back(Num(k, "k_smooth"));
                       }}});
             }},
        });
  c.Validate();
  return c;
}

std::uint64_t Fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ConfigHash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a(ToJson(config, false).dump())));
  return buf;
}

}  // namespace reftrack
