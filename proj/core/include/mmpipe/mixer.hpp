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

// Deterministic interleaving of the text, caption and instruction sources.
//
// Shares are enforced greedily at document granularity: the next document
// always comes from the unfinished source with the largest token deficit
// (target_share * emitted_total - emitted[source]). Deficits are evaluated in
// exact integer arithmetic over the plan's token targets, so the schedule is
// identical on every platform.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmpipe/budget.hpp"
#include "mmpipe/document.hpp"

namespace mmpipe {

struct SourceStream {
  Source source = Source::kText;
  std::vector<Document> documents;
  std::uint64_t permutation_seed = 0;
  // Repeatable sources are reshuffled and cycled when their documents run out.
  bool repeatable = false;
};

/// Fisher-Yates order of the stream's documents under its permutation_seed.
std::vector<std::size_t> shuffle(const SourceStream& stream);
std::vector<std::size_t> shuffle_order(std::size_t count, std::uint64_t seed);

class MixError : public Error {
 public:
  using Error::Error;
};

struct MixState {
  std::array<std::uint64_t, kSourceCount> target{};   // token target (share weight)
  std::array<std::uint64_t, kSourceCount> emitted{};  // tokens emitted so far
  std::array<std::size_t, kSourceCount> cursor{};     // next position in the current cycle
  std::array<bool, kSourceCount> exhausted{};         // finished or out of documents

  static MixState from_plan(const MixPlan& plan);

  std::uint64_t target_total() const;
  std::uint64_t emitted_total() const;
  double target_share(Source s) const;
};

/// Unfinished source with the largest deficit; ties go to text, then caption,
/// then instruction. Throws MixError if every source is exhausted.
Source next_source(const MixState& state);

/// Token cost of a document in the mix; documents the packer would skip
/// should cost 0 so the plan is measured in emitted tokens.
using CostFn = std::function<std::uint64_t(const Document&)>;

/// Counts every segment token; layout overhead (image, separators) is ignored.
std::uint64_t raw_token_cost(const Document& doc);

struct MixedDoc {
  const Document* doc = nullptr;
  Source source = Source::kText;
  std::uint64_t tokens = 0;
  std::uint32_t cycle = 0;
};

/// Single-owner iterator over the mixed document stream. Borrows `streams`,
/// which must outlive the mixer. Cycle c of a source is shuffled with
/// (seed XOR permutation_seed) + c.
class Mixer {
 public:
  Mixer(std::span<const SourceStream> streams, const MixPlan& plan, std::uint64_t seed,
        CostFn cost = raw_token_cost);

  /// Next document, or nullopt once every source met its target. Throws
  /// MixError when a non-repeatable source runs out before its target.
  std::optional<MixedDoc> next();

  const MixState& state() const { return state_; }
  std::uint64_t max_doc_tokens() const { return max_doc_tokens_; }

 private:
  struct Lane {
    const SourceStream* stream = nullptr;
    std::vector<std::uint64_t> cost;
    std::vector<std::size_t> order;
    std::uint32_t cycle = 0;
    std::uint64_t cycle_tokens = 0;
  };

  void start_cycle(Lane& lane, std::uint32_t cycle);

  std::array<Lane, kSourceCount> lanes_;
  MixState state_;
  std::uint64_t seed_;
  std::uint64_t max_doc_tokens_ = 0;
};

struct MixResult {
  std::vector<MixedDoc> docs;
  std::array<std::uint64_t, kSourceCount> emitted{};
  std::uint64_t max_doc_tokens = 0;
};

/// Drains a Mixer.
MixResult mix(std::span<const SourceStream> streams, const MixPlan& plan, std::uint64_t seed,
              CostFn cost = raw_token_cost);

}  // namespace mmpipe
