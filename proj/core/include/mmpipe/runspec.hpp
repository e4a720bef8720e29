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
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mmpipe/error.hpp"

namespace mmpipe {

using TokenId = std::uint32_t;

/// Architecture and text-only pre-training hyperparameters for one model size.
struct ModelScale {
  std::string name;
  std::uint64_t param_count = 0;
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t d_model = 0;
  std::uint32_t d_head = 0;
  double peak_lr = 0.0;
  double final_lr = 0.0;
  std::uint64_t warmup_steps = 0;
  std::uint64_t batch_size = 0;  // sequences per optimizer step
  std::uint64_t pretrain_seq_len = 0;
  std::uint64_t total_pretrain_tokens = 0;

  std::uint64_t warmup_tokens() const { return warmup_steps * batch_size * pretrain_seq_len; }

  bool operator==(const ModelScale&) const = default;
};

/// 1.4B model: 24 layers, 16 heads, d_model 2048.
ModelScale scale_1b();
/// 79M model.
ModelScale scale_79m();

/// Instruction fine-tuning stage parameters.
struct FineTuneParams {
  std::uint64_t examples = 665'000;
  std::uint64_t batch_size = 256;
  double peak_lr = 3e-4;
  double warmup_ratio = 0.05;

  bool operator==(const FineTuneParams&) const = default;
};

/// Declarative description of one training run. Immutable once validated.
struct RunSpec {
  static constexpr int kSpecVersion = 1;

  ModelScale scale = scale_1b();
  double checkpoint_fraction = 0.8;
  double token_multiplier = 20.0;
  double image_ratio = 0.10;
  double instruction_fraction = 0.0;
  std::uint32_t ft_epochs = 4;
  std::uint32_t mm_seq_len = 1024;
  std::uint32_t image_patch_count = 729;
  TokenId separator_token_id = 0xFFFF'FFFDu;
  TokenId pad_token_id = 0xFFFF'FFFEu;
  TokenId image_placeholder_token_id = 0xFFFF'FFFFu;
  std::uint64_t seed = 0;
  double min_resume_lr = 2.0 * scale_1b().final_lr;
  double rewarmup_peak_lr = 3e-3;
  bool freeze_encoder = true;
  FineTuneParams fine_tune;

  /// Smallest of the three reserved ids; every document token must lie below it.
  TokenId min_reserved_id() const;

  bool operator==(const RunSpec&) const = default;
};

struct Violation {
  std::string name;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view name) const;
  std::string to_string() const;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Checks every invariant and reports all violations (never stops at the first).
ValidationReport check(const RunSpec& spec);

/// Returns `spec` unchanged if it is valid; throws ValidationError otherwise.
RunSpec validate(RunSpec spec);

/// Pretty-printed JSON run-spec document with `spec_version`.
std::string serialize(const RunSpec& spec);
/// Parses a run-spec document. Unknown keys and a wrong `spec_version` are
/// rejected with InvalidArgument; missing optional keys take defaults.
RunSpec parse_runspec(std::string_view text);
RunSpec load_runspec(const std::string& path);

/// Builds a RunSpec for a named experiment preset, e.g. "ratio-sweep-80(0.10)"
/// or "ratio-sweep-80:0.10". Known names: text-fraction-sweep, ratio-sweep-80,
/// ratio-sweep-scratch, instruction-sweep, epoch-sweep, 79m-chinchilla.
RunSpec preset(std::string_view name);

/// Names accepted by preset(), without arguments.
const std::vector<std::string>& preset_names();

}  // namespace mmpipe
