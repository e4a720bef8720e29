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

#include "mmpipe/runspec.hpp"

namespace mmpipe {

/// Per-source token targets for the image-text stage. Components always sum
/// to total_tokens exactly; text absorbs any rounding remainder.
struct MixPlan {
  std::uint64_t total_tokens = 0;
  std::uint64_t text_tokens = 0;
  std::uint64_t caption_tokens = 0;
  std::uint64_t instruction_tokens = 0;

  bool operator==(const MixPlan&) const = default;
};

struct StagePlan {
  std::uint64_t pretrain_resume_tokens = 0;
  std::uint64_t mm_tokens = 0;
  std::uint64_t mm_steps = 0;
  std::uint64_t ft_steps_per_epoch = 0;
  std::uint64_t ft_total_steps = 0;

  bool operator==(const StagePlan&) const = default;
};

/// round(param_count * multiplier).
std::uint64_t chinchilla_tokens(std::uint64_t param_count, double multiplier);

/// round(fraction * total_pretrain_tokens).
std::uint64_t checkpoint_tokens(double fraction, std::uint64_t total_pretrain_tokens);

MixPlan mix_plan(std::uint64_t total, double image_ratio, double instruction_fraction);

/// Plan sized from the run spec: mm_tokens = chinchilla_tokens(params, multiplier).
StagePlan stage_plan(const RunSpec& spec, std::uint64_t ft_examples);
inline StagePlan stage_plan(const RunSpec& spec) {
  return stage_plan(spec, spec.fine_tune.examples);
}

/// Splits a plan into `parts` sub-plans whose components sum to the parent's.
/// Each component is divided evenly; remainders go to the last part.
MixPlan sub_plan(const MixPlan& plan, std::uint64_t parts, std::uint64_t index);

}  // namespace mmpipe
