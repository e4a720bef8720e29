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
#include "mmpipe/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mmpipe {

namespace {

// Weight of the upper endpoint along a half cosine: 1 at p = 0, 0 at p = 1.
double cosine_weight(double p) { return 0.5 * (1.0 + std::cos(std::numbers::pi * p)); }

void check_range(double t, double hi, const char* what) {
  if (!(t >= 0.0 && t <= hi))
    throw InvalidArgument(std::string(what) + ": position " + std::to_string(t) +
                          " outside [0, " + std::to_string(hi) + "]");
}

}  // namespace

WarmupCosine parent_schedule(const ModelScale& scale) {
  return {scale.peak_lr, scale.final_lr, static_cast<double>(scale.warmup_tokens()),
          static_cast<double>(scale.total_pretrain_tokens)};
}

void check(const WarmupCosine& s) {
  if (!(s.final_lr > 0.0 && s.final_lr < s.peak_lr))
    throw InvalidArgument("warmup-cosine: require 0 < final_lr < peak_lr");
  if (!(s.warmup_tokens > 0.0 && s.warmup_tokens < s.total_tokens))
    throw InvalidArgument("warmup-cosine: require 0 < warmup_tokens < total_tokens");
}

double lr_at(const WarmupCosine& s, double t) {
  check_range(t, s.total_tokens, "lr_at");
  if (t <= s.warmup_tokens) return s.peak_lr * (t / s.warmup_tokens);
  const double p = (t - s.warmup_tokens) / (s.total_tokens - s.warmup_tokens);
  // std::lerp is exact at both ends, so lr_at(total) == final_lr bit-for-bit.
  return std::lerp(s.final_lr, s.peak_lr, cosine_weight(p));
}

std::string_view to_string(BranchMode mode) {
  switch (mode) {
    case BranchMode::kContinuedCooldown:
      return "continued-cooldown";
    case BranchMode::kRewarmup:
      return "rewarmup";
  }
  return "unknown";
}

BranchSchedule branch(const WarmupCosine& parent, double fraction, double duration_tokens,
                      const RunSpec& spec) {
  if (!(duration_tokens > 0.0)) throw InvalidArgument("branch: duration_tokens must be > 0");
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidArgument("branch: fraction must lie in [0, 1]");

  const double resume_lr = lr_at(parent, fraction * parent.total_tokens);
  BranchSchedule b;
  b.end_lr = parent.final_lr;
  b.duration_tokens = duration_tokens;
  if (fraction > 0.0 && fraction < 1.0 && resume_lr >= spec.min_resume_lr) {
    b.mode = BranchMode::kContinuedCooldown;
    b.start_lr = resume_lr;
    b.peak_lr = resume_lr;
    return b;
  }

  b.mode = BranchMode::kRewarmup;
  b.start_lr = 0.0;
  b.peak_lr = spec.rewarmup_peak_lr;
  const double scaled = parent.warmup_tokens * (duration_tokens / parent.total_tokens);
  const double min_warmup = 100.0 * static_cast<double>(spec.scale.batch_size) *
                            static_cast<double>(spec.mm_seq_len);
  b.warmup_tokens = std::max(scaled, min_warmup);
  if (b.warmup_tokens >= duration_tokens) b.warmup_tokens = std::floor(duration_tokens / 2.0);
  if (b.warmup_tokens <= 0.0) b.warmup_tokens = duration_tokens / 2.0;
  return b;
}

double branch_lr_at(const BranchSchedule& b, double t) {
  check_range(t, b.duration_tokens, "branch_lr_at");
  if (b.mode == BranchMode::kContinuedCooldown) {
    return std::lerp(b.end_lr, b.start_lr, cosine_weight(t / b.duration_tokens));
  }
  if (t <= b.warmup_tokens) return b.peak_lr * (t / b.warmup_tokens);
  const double p = (t - b.warmup_tokens) / (b.duration_tokens - b.warmup_tokens);
  return std::lerp(b.end_lr, b.peak_lr, cosine_weight(p));
}

std::uint64_t FtSchedule::warmup_steps() const {
  return static_cast<std::uint64_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps())));
}

double ft_lr_at(const FtSchedule& f, std::uint64_t step) {
  const auto total = f.total_steps();
  if (step > total)
    throw InvalidArgument("ft_lr_at: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total) + "]");
  const auto warmup = f.warmup_steps();
  if (step <= warmup) {
    return warmup == 0 ? 0.0 : f.peak_lr * (static_cast<double>(step) / static_cast<double>(warmup));
  }
  const double p = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return std::lerp(0.0, f.peak_lr, cosine_weight(p));
}

}  // namespace mmpipe
