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

// Learning-rate arithmetic. All schedules are parameterized in tokens; callers
// that count optimizer steps convert with batch_size * seq_len.

#include <cstdint>
#include <string_view>

#include "mmpipe/runspec.hpp"

namespace mmpipe {

/// Linear warmup from 0 to peak_lr, then cosine decay to final_lr.
struct WarmupCosine {
  double peak_lr = 0.0;
  double final_lr = 0.0;
  double warmup_tokens = 0.0;
  double total_tokens = 0.0;

  bool operator==(const WarmupCosine&) const = default;
};

/// Text-only pre-training schedule of a model scale.
WarmupCosine parent_schedule(const ModelScale& scale);

/// Throws InvalidArgument unless 0 < final < peak and 0 < warmup < total.
void check(const WarmupCosine& sched);

double lr_at(const WarmupCosine& sched, double t);

enum class BranchMode { kContinuedCooldown, kRewarmup };

std::string_view to_string(BranchMode mode);

/// Learning-rate curve of the image-text stage, resumed from a parent schedule.
///
/// Continued cooldown: cosine from start_lr (the parent LR at the resume point)
/// down to end_lr over duration_tokens. Rewarmup: linear warmup to peak_lr over
/// warmup_tokens, then cosine down to end_lr.
struct BranchSchedule {
  BranchMode mode = BranchMode::kContinuedCooldown;
  double start_lr = 0.0;
  double peak_lr = 0.0;
  double end_lr = 0.0;
  double warmup_tokens = 0.0;
  double duration_tokens = 0.0;

  bool operator==(const BranchSchedule&) const = default;
};

/// Picks the branch mode for resuming `parent` at `fraction` of its tokens.
/// Resumes in place when 0 < fraction < 1 and the parent LR there is at least
/// spec.min_resume_lr; otherwise re-warms to spec.rewarmup_peak_lr.
BranchSchedule branch(const WarmupCosine& parent, double fraction, double duration_tokens,
                      const RunSpec& spec);

double branch_lr_at(const BranchSchedule& b, double t);

/// Per-epoch-count fine-tuning schedule: linear warmup over
/// ceil(warmup_ratio * total_steps) steps then cosine decay to 0.
struct FtSchedule {
  double peak_lr = 0.0;
  double warmup_ratio = 0.0;
  std::uint64_t steps_per_epoch = 0;
  std::uint64_t epochs = 0;

  std::uint64_t total_steps() const { return steps_per_epoch * epochs; }
  std::uint64_t warmup_steps() const;
};

double ft_lr_at(const FtSchedule& f, std::uint64_t step);

}  // namespace mmpipe
