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
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mmpipe/schedule.hpp"

namespace mmpipe {
namespace {

// Values from tests/oracle/lr_oracle.py.
constexpr double kResume[] = {0.009050536357102384, 0.00655400121187452, 0.003465102130614891,
                              0.0009650857151680425};
constexpr double kCooldownMid = 0.00048754285758402125;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const WarmupCosine& parent() {
  static const WarmupCosine p = parent_schedule(scale_1b());
  return p;
}

TEST(WarmupCosine, ParentParameters) {
  EXPECT_DOUBLE_EQ(parent().peak_lr, 1e-2);
  EXPECT_DOUBLE_EQ(parent().final_lr, 1e-5);
  EXPECT_EQ(parent().warmup_tokens, 5000.0 * 256 * 2048);
  EXPECT_EQ(parent().total_tokens, 4.3e12);
  EXPECT_NO_THROW(check(parent()));
}

TEST(WarmupCosine, Endpoints) {
  EXPECT_EQ(lr_at(parent(), 0.0), 0.0);
  EXPECT_EQ(lr_at(parent(), parent().warmup_tokens), parent().peak_lr);
  EXPECT_EQ(lr_at(parent(), parent().total_tokens), parent().final_lr);
  EXPECT_DOUBLE_EQ(lr_at(parent(), parent().warmup_tokens / 2), parent().peak_lr / 2);
}

TEST(WarmupCosine, ResumeValuesMatchOracle) {
  const double fractions[] = {0.2, 0.4, 0.6, 0.8};
  for (int i = 0; i < 4; ++i)
    EXPECT_LE(rel(lr_at(parent(), fractions[i] * parent().total_tokens), kResume[i]), 1e-12);
}

TEST(WarmupCosine, OutOfRangeRejected) {
  EXPECT_THROW(lr_at(parent(), -1.0), InvalidArgument);
  EXPECT_THROW(lr_at(parent(), parent().total_tokens * 1.0001), InvalidArgument);
  EXPECT_THROW(lr_at(parent(), std::nan("")), InvalidArgument);
}

TEST(WarmupCosine, CheckRejectsBadParameters) {
  EXPECT_THROW(check(WarmupCosine{1e-3, 1e-2, 1, 10}), InvalidArgument);
  EXPECT_THROW(check(WarmupCosine{1e-2, 1e-3, 10, 10}), InvalidArgument);
  EXPECT_THROW(check(WarmupCosine{1e-2, 0.0, 1, 10}), InvalidArgument);
}

TEST(WarmupCosine, NonincreasingAfterWarmup) {
  const auto& p = parent();
  double prev = lr_at(p, p.warmup_tokens);
  for (int i = 1; i <= 10000; ++i) {
    const double t = p.warmup_tokens + (p.total_tokens - p.warmup_tokens) * i / 10000.0;
    const double lr = lr_at(p, std::min(t, p.total_tokens));
    ASSERT_LE(lr, prev) << "at " << t;
    prev = lr;
  }
}

TEST(Branch, ContinuedCooldownAtEightyPercent) {
  const RunSpec spec;
  const auto b = branch(parent(), 0.8, 28e9, spec);
  EXPECT_EQ(b.mode, BranchMode::kContinuedCooldown);
  EXPECT_LE(rel(b.start_lr, kResume[3]), 1e-12);
  EXPECT_EQ(b.end_lr, 1e-5);
  EXPECT_EQ(branch_lr_at(b, 0.0), b.start_lr);
  EXPECT_EQ(branch_lr_at(b, 28e9), b.end_lr);
  EXPECT_LE(rel(branch_lr_at(b, 14e9), kCooldownMid), 1e-12);
}

TEST(Branch, ContinuityAtEveryResumableFraction) {
  const RunSpec spec;
  for (int i = 1; i < 1000; ++i) {
    const double f = i / 1000.0;
    const double r = lr_at(parent(), f * parent().total_tokens);
    const auto b = branch(parent(), f, 28e9, spec);
    if (r >= spec.min_resume_lr) {
      ASSERT_EQ(b.mode, BranchMode::kContinuedCooldown) << f;
      ASSERT_LE(std::abs(branch_lr_at(b, 0.0) - r), 1e-12 * r) << f;
    } else {
      ASSERT_EQ(b.mode, BranchMode::kRewarmup) << f;
    }
  }
}

TEST(Branch, EndpointsRewarm) {
  const RunSpec spec;
  for (double f : {0.0, 1.0}) {
    const auto b = branch(parent(), f, 28e9, spec);
    EXPECT_EQ(b.mode, BranchMode::kRewarmup);
    EXPECT_EQ(b.peak_lr, 3e-3);
    EXPECT_EQ(b.end_lr, 1e-5);
    EXPECT_GT(b.warmup_tokens, 0.0);
    EXPECT_LT(b.warmup_tokens, b.duration_tokens);
    EXPECT_EQ(branch_lr_at(b, 0.0), 0.0);
    EXPECT_EQ(branch_lr_at(b, b.warmup_tokens), 3e-3);
    EXPECT_EQ(branch_lr_at(b, b.duration_tokens), 1e-5);
  }
}

TEST(Branch, LowResumeLrFallsBackToRewarmup) {
  RunSpec spec;
  spec.min_resume_lr = 2e-3;  // above the 0.8 resume value
  EXPECT_EQ(branch(parent(), 0.8, 28e9, spec).mode, BranchMode::kRewarmup);
  EXPECT_EQ(branch(parent(), 0.6, 28e9, spec).mode, BranchMode::kContinuedCooldown);
}

TEST(Branch, RewarmupWarmupLength) {
  const RunSpec spec;
  const auto b = branch(parent(), 0.0, 28e9, spec);
  const double scaled = parent().warmup_tokens * 28e9 / parent().total_tokens;
  const double floor100 = 100.0 * 256 * 1024;
  EXPECT_DOUBLE_EQ(b.warmup_tokens, std::max(scaled, floor100));
  const auto tiny = branch(parent(), 0.0, 1000.0, spec);
  EXPECT_EQ(tiny.warmup_tokens, 500.0);
}

TEST(Branch, Deterministic) {
  const RunSpec spec;
  for (double f : {0.0, 0.2, 0.5, 0.8, 1.0}) EXPECT_EQ(branch(parent(), f, 28e9, spec), branch(parent(), f, 28e9, spec));
}

TEST(Branch, RejectsBadArguments) {
  const RunSpec spec;
  EXPECT_THROW(branch(parent(), 0.5, 0.0, spec), InvalidArgument);
  EXPECT_THROW(branch(parent(), 1.5, 1e9, spec), InvalidArgument);
  const auto b = branch(parent(), 0.8, 28e9, spec);
  EXPECT_THROW(branch_lr_at(b, -1.0), InvalidArgument);
  EXPECT_THROW(branch_lr_at(b, 28e9 + 1e6), InvalidArgument);
}

TEST(Branch, CooldownMonotoneOnGrid) {
  const RunSpec spec;
  for (double f : {0.2, 0.4, 0.6, 0.8}) {
    const auto b = branch(parent(), f, 28e9, spec);
    double prev = branch_lr_at(b, 0.0);
    for (int i = 1; i <= 10000; ++i) {
      const double lr = branch_lr_at(b, 28e9 * i / 10000.0);
      ASSERT_LE(lr, prev);
      prev = lr;
    }
  }
}

TEST(FineTune, DefaultSchedule) {
  const FtSchedule f{3e-4, 0.05, 2598, 4};
  EXPECT_EQ(f.total_steps(), 10392u);
  EXPECT_EQ(f.warmup_steps(), 520u);  // ceil(0.05 * 10392) = ceil(519.6)
  EXPECT_EQ(ft_lr_at(f, 0), 0.0);
  EXPECT_EQ(ft_lr_at(f, f.warmup_steps()), 3e-4);
  EXPECT_EQ(ft_lr_at(f, f.total_steps()), 0.0);
  EXPECT_THROW(ft_lr_at(f, f.total_steps() + 1), InvalidArgument);
}

TEST(FineTune, EachEpochCountIsItsOwnSchedule) {
  const FtSchedule one{3e-4, 0.05, 2598, 1};
  const FtSchedule four{3e-4, 0.05, 2598, 4};
  EXPECT_EQ(ft_lr_at(one, 2598), 0.0);
  EXPECT_GT(ft_lr_at(four, 2598), 0.0);
  EXPECT_EQ(one.warmup_steps(), 130u);
}

TEST(FineTune, MonotoneAfterWarmup) {
  const FtSchedule f{3e-4, 0.05, 100, 3};
  double prev = ft_lr_at(f, f.warmup_steps());
  for (auto s = f.warmup_steps() + 1; s <= f.total_steps(); ++s) {
    const double lr = ft_lr_at(f, s);
    ASSERT_LE(lr, prev);
    prev = lr;
  }
}

TEST(FineTune, ZeroEpochs) {
  const FtSchedule f{3e-4, 0.05, 2598, 0};
  EXPECT_EQ(f.total_steps(), 0u);
  EXPECT_EQ(ft_lr_at(f, 0), 0.0);
}

}  // namespace
}  // namespace mmpipe
