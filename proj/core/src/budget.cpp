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
#include "mmpipe/budget.hpp"

#include <algorithm>
#include <cmath>

namespace mmpipe {

namespace {

std::uint64_t round_product(long double a, long double b) {
  return static_cast<std::uint64_t>(std::llroundl(a * b));
}

std::uint64_t ceil_div(std::uint64_t num, std::uint64_t den) { return num / den + (num % den != 0); }

void check_fraction(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::uint64_t chinchilla_tokens(std::uint64_t param_count, double multiplier) {
  if (param_count == 0 || !(multiplier > 0.0))
    throw InvalidArgument("chinchilla_tokens: param_count and multiplier must be positive");
  return round_product(static_cast<long double>(param_count), multiplier);
}

std::uint64_t checkpoint_tokens(double fraction, std::uint64_t total_pretrain_tokens) {
  check_fraction(fraction, "checkpoint fraction");
  return round_product(fraction, static_cast<long double>(total_pretrain_tokens));
}

MixPlan mix_plan(std::uint64_t total, double image_ratio, double instruction_fraction) {
  check_fraction(image_ratio, "image_ratio");
  check_fraction(instruction_fraction, "instruction_fraction");
  const long double image = static_cast<long double>(total) * image_ratio;
  MixPlan plan;
  plan.total_tokens = total;
  plan.caption_tokens = round_product(image, 1.0L - instruction_fraction);
  plan.instruction_tokens =
      std::min(round_product(image, instruction_fraction), total - plan.caption_tokens);
  plan.text_tokens = total - plan.caption_tokens - plan.instruction_tokens;
  return plan;
}

StagePlan stage_plan(const RunSpec& spec, std::uint64_t ft_examples) {
  StagePlan plan;
  plan.pretrain_resume_tokens =
      checkpoint_tokens(spec.checkpoint_fraction, spec.scale.total_pretrain_tokens);
  plan.mm_tokens = chinchilla_tokens(spec.scale.param_count, spec.token_multiplier);
  plan.mm_steps = ceil_div(plan.mm_tokens, spec.scale.batch_size * spec.mm_seq_len);
  plan.ft_steps_per_epoch = ceil_div(ft_examples, spec.fine_tune.batch_size);
  plan.ft_total_steps = plan.ft_steps_per_epoch * spec.ft_epochs;
  return plan;
}

MixPlan sub_plan(const MixPlan& plan, std::uint64_t parts, std::uint64_t index) {
  if (parts == 0 || index >= parts) throw InvalidArgument("sub_plan: index out of range");
  auto share = [&](std::uint64_t v) {
    const auto base = v / parts;
    return index + 1 == parts ? v - base * (parts - 1) : base;
  };
  MixPlan p;
  p.text_tokens = share(plan.text_tokens);
  p.caption_tokens = share(plan.caption_tokens);
  p.instruction_tokens = share(plan.instruction_tokens);
  p.total_tokens = p.text_tokens + p.caption_tokens + p.instruction_tokens;
  return p;
}

}  // namespace mmpipe
