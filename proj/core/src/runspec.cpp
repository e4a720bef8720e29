/*
Copyright 2026 The mmpipe Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#include "mmpipe/runspec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mmpipe {

using nlohmann::json;

ModelScale scale_1b() {
  ModelScale s;
  s.name = "1.4B";
  s.param_count = 1'400'000'000;
  s.n_layers = 24;
  s.n_heads = 16;
  s.d_model = 2048;
  s.d_head = 128;
  s.peak_lr = 1e-2;
  s.final_lr = 1e-5;
  s.warmup_steps = 5000;
  s.batch_size = 256;
  s.pretrain_seq_len = 2048;
  s.total_pretrain_tokens = 4'300'000'000'000;
  return s;
}

ModelScale scale_79m() {
  ModelScale s;
  s.name = "79M";
  s.param_count = 79'000'000;
  s.n_layers = 8;
  s.n_heads = 4;
  s.d_model = 512;
  s.d_head = 128;
  s.peak_lr = 3e-3;
  s.final_lr = 1e-5;
  s.warmup_steps = 400;
  s.batch_size = 512;
  s.pretrain_seq_len = 2048;
  s.total_pretrain_tokens = 237'000'000'000;
  return s;
}

TokenId RunSpec::min_reserved_id() const {
  return std::min({separator_token_id, pad_token_id, image_placeholder_token_id});
}

bool ValidationReport::has(std::string_view name) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.name == name; });
}

std::string ValidationReport::to_string() const {
  if (ok()) return "valid";
  std::ostringstream os;
  os << violations.size() << " violation(s):";
  for (const auto& v : violations) os << "\n  - " << v.name << ": " << v.detail;
  return os.str();
}

ValidationError::ValidationError(ValidationReport report)
    : Error("run spec is invalid: " + report.to_string()), report_(std::move(report)) {}

namespace {

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

ValidationReport check(const RunSpec& spec) {
  ValidationReport r;
  auto fail = [&](std::string name, std::string detail) {
    r.violations.push_back({std::move(name), std::move(detail)});
  };
  const auto& s = spec.scale;

  if (s.param_count == 0) fail("param count not positive", "scale.param_count must be > 0");
  if (!(std::isfinite(s.final_lr) && std::isfinite(s.peak_lr) && s.final_lr > 0.0 &&
        s.final_lr < s.peak_lr))
    fail("learning rates not ordered", "require 0 < scale.final_lr < scale.peak_lr");
  if (s.warmup_steps < 1) fail("warmup steps not positive", "scale.warmup_steps must be >= 1");
  if (s.batch_size < 1) fail("batch size not positive", "scale.batch_size must be >= 1");
  if (s.pretrain_seq_len < 1)
    fail("sequence length not positive", "scale.pretrain_seq_len must be >= 1");
  if (s.warmup_tokens() >= s.total_pretrain_tokens)
    fail("warmup exceeds pre-training",
         "warmup_steps * batch_size * pretrain_seq_len (" + std::to_string(s.warmup_tokens()) +
             ") must be < total_pretrain_tokens (" + std::to_string(s.total_pretrain_tokens) + ")");

  if (!in_unit_interval(spec.checkpoint_fraction))
    fail("checkpoint fraction out of range", "checkpoint_fraction must lie in [0, 1]");
  if (!(std::isfinite(spec.token_multiplier) && spec.token_multiplier > 0.0))
    fail("token multiplier not positive", "token_multiplier must be > 0");
  if (!in_unit_interval(spec.image_ratio))
    fail("image ratio out of range", "image_ratio must lie in [0, 1]");
  if (!in_unit_interval(spec.instruction_fraction))
    fail("instruction fraction out of range", "instruction_fraction must lie in [0, 1]");

  if (spec.separator_token_id == spec.pad_token_id ||
      spec.separator_token_id == spec.image_placeholder_token_id ||
      spec.pad_token_id == spec.image_placeholder_token_id)
    fail("token ids not distinct",
         "separator_token_id, pad_token_id and image_placeholder_token_id must differ");
  if (spec.image_patch_count < 1)
    fail("image patch count not positive", "image_patch_tokens must be >= 1");
  if (static_cast<std::uint64_t>(spec.mm_seq_len) <=
      static_cast<std::uint64_t>(spec.image_patch_count) + 1)
    fail("image block cannot fit", "mm_seq_len (" + std::to_string(spec.mm_seq_len) +
                                       ") must exceed image_patch_tokens + 1 (" +
                                       std::to_string(spec.image_patch_count + 1ull) + ")");

  if (!(std::isfinite(spec.min_resume_lr) && spec.min_resume_lr > 0.0))
    fail("min resume lr not positive", "min_resume_lr must be > 0");
  if (!(std::isfinite(spec.rewarmup_peak_lr) && spec.rewarmup_peak_lr > s.final_lr))
    fail("rewarmup peak not above final lr", "rewarmup_peak_lr must be > scale.final_lr");

  const auto& ft = spec.fine_tune;
  if (ft.batch_size < 1) fail("fine-tune batch size not positive", "fine_tune.batch_size >= 1");
  if (!(std::isfinite(ft.peak_lr) && ft.peak_lr > 0.0))
    fail("fine-tune lr not positive", "fine_tune.peak_lr must be > 0");
  if (!(ft.warmup_ratio > 0.0 && ft.warmup_ratio < 1.0))
    fail("fine-tune warmup ratio out of range", "fine_tune.warmup_ratio must lie in (0, 1)");
  return r;
}

RunSpec validate(RunSpec spec) {
  auto report = check(spec);
  if (!report.ok()) throw ValidationError(std::move(report));
  return spec;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json scale_to_json(const ModelScale& s) {
  return json{{"name", s.name},
              {"param_count", s.param_count},
              {"n_layers", s.n_layers},
              {"n_heads", s.n_heads},
              {"d_model", s.d_model},
              {"d_head", s.d_head},
              {"peak_lr", s.peak_lr},
              {"final_lr", s.final_lr},
              {"warmup_steps", s.warmup_steps},
              {"batch_size_sequences", s.batch_size},
              {"pretrain_seq_len_tokens", s.pretrain_seq_len},
              {"total_pretrain_tokens", s.total_pretrain_tokens}};
}

// Reads keys off a JSON object, tracking which were consumed so leftovers can
// be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  bool contains(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void optional(const std::string& key, T& out) {
    if (contains(key)) out = get<T>(key);
  }

  template <typename T>
  T get(const std::string& key) {
    if (!contains(key)) throw InvalidArgument(where_ + ": missing key '" + key + "'");
    const json& v = raw(key);
    const std::string what = where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw InvalidArgument(what + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw InvalidArgument(what + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw InvalidArgument(what + ": expected a number");
      return v.get<T>();
    } else {
      static_assert(std::is_unsigned_v<T>);
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw InvalidArgument(what + ": expected a non-negative integer");
      const auto u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max()) throw InvalidArgument(what + ": value out of range");
      return static_cast<T>(u);
    }
  }

  void reject_unknown() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) throw InvalidArgument(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

ModelScale scale_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "1.4B" || name == "1B") return scale_1b();
    if (name == "79M") return scale_79m();
    throw InvalidArgument("scale: unknown scale name '" + name + "'");
  }
  ObjectReader r(j, "scale");
  ModelScale s;
  s.name = r.get<std::string>("name");
  s.param_count = r.get<std::uint64_t>("param_count");
  s.n_layers = r.get<std::uint32_t>("n_layers");
  s.n_heads = r.get<std::uint32_t>("n_heads");
  s.d_model = r.get<std::uint32_t>("d_model");
  s.d_head = r.get<std::uint32_t>("d_head");
  s.peak_lr = r.get<double>("peak_lr");
  s.final_lr = r.get<double>("final_lr");
  s.warmup_steps = r.get<std::uint64_t>("warmup_steps");
  s.batch_size = r.get<std::uint64_t>("batch_size_sequences");
  s.pretrain_seq_len = r.get<std::uint64_t>("pretrain_seq_len_tokens");
  s.total_pretrain_tokens = r.get<std::uint64_t>("total_pretrain_tokens");
  r.reject_unknown();
  return s;
}

}  // namespace

std::string serialize(const RunSpec& spec) {
  json j;
  j["spec_version"] = RunSpec::kSpecVersion;
  j["scale"] = scale_to_json(spec.scale);
  j["checkpoint_fraction"] = spec.checkpoint_fraction;
  j["token_multiplier"] = spec.token_multiplier;
  j["image_ratio"] = spec.image_ratio;
  j["instruction_fraction"] = spec.instruction_fraction;
  j["ft_epochs"] = spec.ft_epochs;
  j["mm_seq_len_tokens"] = spec.mm_seq_len;
  j["image_patch_tokens"] = spec.image_patch_count;
  j["separator_token_id"] = spec.separator_token_id;
  j["pad_token_id"] = spec.pad_token_id;
  j["image_placeholder_token_id"] = spec.image_placeholder_token_id;
  j["seed"] = spec.seed;
  j["min_resume_lr"] = spec.min_resume_lr;
  j["rewarmup_peak_lr"] = spec.rewarmup_peak_lr;
  j["freeze_encoder"] = spec.freeze_encoder;
  j["fine_tune"] = json{{"examples", spec.fine_tune.examples},
                        {"batch_size_sequences", spec.fine_tune.batch_size},
                        {"peak_lr", spec.fine_tune.peak_lr},
                        {"warmup_ratio", spec.fine_tune.warmup_ratio}};
  return j.dump(2) + "\n";
}

RunSpec parse_runspec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("run spec: not valid JSON: ") + e.what());
  }
  ObjectReader r(j, "spec");
  const auto version = r.get<std::uint32_t>("spec_version");
  if (version != RunSpec::kSpecVersion)
    throw InvalidArgument("spec: unsupported spec_version " + std::to_string(version) +
                          " (expected " + std::to_string(RunSpec::kSpecVersion) + ")");

  RunSpec spec;
  if (r.contains("scale")) spec.scale = scale_from_json(r.raw("scale"));
  r.optional("checkpoint_fraction", spec.checkpoint_fraction);
  r.optional("token_multiplier", spec.token_multiplier);
  r.optional("image_ratio", spec.image_ratio);
  r.optional("instruction_fraction", spec.instruction_fraction);
  r.optional("ft_epochs", spec.ft_epochs);
  r.optional("mm_seq_len_tokens", spec.mm_seq_len);
  r.optional("image_patch_tokens", spec.image_patch_count);
  r.optional("separator_token_id", spec.separator_token_id);
  r.optional("pad_token_id", spec.pad_token_id);
  r.optional("image_placeholder_token_id", spec.image_placeholder_token_id);
  r.optional("seed", spec.seed);
  spec.min_resume_lr = 2.0 * spec.scale.final_lr;
  r.optional("min_resume_lr", spec.min_resume_lr);
  r.optional("rewarmup_peak_lr", spec.rewarmup_peak_lr);
  r.optional("freeze_encoder", spec.freeze_encoder);
  if (r.contains("fine_tune")) {
    ObjectReader ft(r.raw("fine_tune"), "fine_tune");
    ft.optional("examples", spec.fine_tune.examples);
    ft.optional("batch_size_sequences", spec.fine_tune.batch_size);
    ft.optional("peak_lr", spec.fine_tune.peak_lr);
    ft.optional("warmup_ratio", spec.fine_tune.warmup_ratio);
    ft.reject_unknown();
  }
  r.reject_unknown();
  return spec;
}

RunSpec load_runspec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open run spec '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read run spec '" + path + "'");
  return parse_runspec(buf.str());
}

// ---------------------------------------------------------------------------
// Presets

namespace {

struct PresetCall {
  std::string name;
  double arg = 0.0;
};

PresetCall split_preset(std::string_view text) {
  std::string_view name = text;
  std::string_view arg;
  if (auto open = text.find('('); open != std::string_view::npos) {
    if (text.back() != ')') throw InvalidArgument("preset '" + std::string(text) + "': missing ')'");
    name = text.substr(0, open);
    arg = text.substr(open + 1, text.size() - open - 2);
  } else if (auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    arg = text.substr(colon + 1);
  } else {
    throw InvalidArgument("preset '" + std::string(text) + "' needs an argument, e.g. " +
                          std::string(text) + "(0.10)");
  }
  PresetCall call{std::string(name), 0.0};
  const auto* end = arg.data() + arg.size();
  auto [ptr, ec] = std::from_chars(arg.data(), end, call.arg);
  if (ec != std::errc() || ptr != end || arg.empty())
    throw InvalidArgument("preset '" + std::string(text) + "': argument is not a number");
  return call;
}

// The common setup: 80% checkpoint of the 1B model, 90% text / 10% captions,
// 4 fine-tuning epochs.
RunSpec base_setup() {
  RunSpec spec;
  spec.scale = scale_1b();
  spec.checkpoint_fraction = 0.8;
  spec.image_ratio = 0.10;
  spec.instruction_fraction = 0.0;
  spec.ft_epochs = 4;
  spec.min_resume_lr = 2.0 * spec.scale.final_lr;
  return spec;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "text-fraction-sweep", "ratio-sweep-80", "ratio-sweep-scratch",
      "instruction-sweep",   "epoch-sweep",    "79m-chinchilla"};
  return names;
}

RunSpec preset(std::string_view text) {
  const auto call = split_preset(text);
  RunSpec spec = base_setup();
  if (call.name == "text-fraction-sweep") {
    spec.checkpoint_fraction = call.arg;
  } else if (call.name == "ratio-sweep-80") {
    spec.image_ratio = call.arg;
  } else if (call.name == "ratio-sweep-scratch") {
    spec.checkpoint_fraction = 0.0;
    spec.image_ratio = call.arg;
  } else if (call.name == "instruction-sweep") {
    // The argument is the instruction share of all stage tokens, carved out of
    // the 10% image budget.
    if (!(call.arg >= 0.0 && call.arg <= spec.image_ratio))
      throw InvalidArgument("instruction-sweep: share must lie in [0, 0.10]");
    spec.instruction_fraction = call.arg / spec.image_ratio;
  } else if (call.name == "epoch-sweep") {
    if (!(call.arg >= 0.0) || call.arg != std::floor(call.arg) || call.arg > 1e6)
      throw InvalidArgument("epoch-sweep: epochs must be a non-negative integer");
    spec.ft_epochs = static_cast<std::uint32_t>(call.arg);
  } else if (call.name == "79m-chinchilla") {
    if (!(call.arg > 0.0)) throw InvalidArgument("79m-chinchilla: multiple must be > 0");
    spec.scale = scale_79m();
    spec.min_resume_lr = 2.0 * spec.scale.final_lr;
    spec.checkpoint_fraction = 0.6;
    spec.token_multiplier = 20.0 * call.arg;
  } else {
    throw InvalidArgument("unknown preset '" + call.name + "'");
  }
  return validate(std::move(spec));
}

}  // namespace mmpipe
