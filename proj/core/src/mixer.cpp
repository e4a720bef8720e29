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
#include "mmpipe/mixer.hpp"

#include <algorithm>
#include <numeric>

#include "mmpipe/rng.hpp"

namespace mmpipe {

std::vector<std::size_t> shuffle_order(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  fisher_yates(std::span<std::size_t>(order), seed);
  return order;
}

std::vector<std::size_t> shuffle(const SourceStream& stream) {
  return shuffle_order(stream.documents.size(), stream.permutation_seed);
}

MixState MixState::from_plan(const MixPlan& plan) {
  MixState s;
  s.target = {plan.text_tokens, plan.caption_tokens, plan.instruction_tokens};
  return s;
}

std::uint64_t MixState::target_total() const {
  return std::accumulate(target.begin(), target.end(), std::uint64_t{0});
}

std::uint64_t MixState::emitted_total() const {
  return std::accumulate(emitted.begin(), emitted.end(), std::uint64_t{0});
}

double MixState::target_share(Source s) const {
  const auto total = target_total();
  return total == 0 ? 0.0 : static_cast<double>(target[index_of(s)]) / static_cast<double>(total);
}

Source next_source(const MixState& state) {
  __extension__ using i128 = __int128;
  const auto weight_total = static_cast<i128>(state.target_total());
  const auto emitted_total = static_cast<i128>(state.emitted_total());

  std::optional<Source> best;
  i128 best_deficit = 0;
  for (Source s : kAllSources) {
    const auto i = index_of(s);
    if (state.exhausted[i]) continue;
    // deficit scaled by weight_total: share * E - e  ->  w * E - e * W
    const i128 deficit = static_cast<i128>(state.target[i]) * emitted_total -
                         static_cast<i128>(state.emitted[i]) * weight_total;
    if (!best || deficit > best_deficit) {
      best = s;
      best_deficit = deficit;
    }
  }
  if (!best) throw MixError("next_source: every source is exhausted");
  return *best;
}

std::uint64_t raw_token_cost(const Document& doc) { return doc.text_token_count(); }

Mixer::Mixer(std::span<const SourceStream> streams, const MixPlan& plan, std::uint64_t seed,
             CostFn cost)
    : state_(MixState::from_plan(plan)), seed_(seed) {
  for (const auto& stream : streams) {
    auto& lane = lanes_[index_of(stream.source)];
    if (lane.stream)
      throw InvalidArgument("mix: more than one stream for source '" +
                            std::string(to_string(stream.source)) + "'");
    for (const auto& d : stream.documents)
      if (d.source != stream.source)
        throw InvalidArgument("mix: document " + std::to_string(d.id) + " in the '" +
                              std::string(to_string(stream.source)) + "' stream is tagged '" +
                              std::string(to_string(d.source)) + "'");
    lane.stream = &stream;
    lane.cost.reserve(stream.documents.size());
    for (const auto& d : stream.documents) lane.cost.push_back(cost(d));
    start_cycle(lane, 0);
  }
}

void Mixer::start_cycle(Lane& lane, std::uint32_t cycle) {
  lane.cycle = cycle;
  lane.cycle_tokens = 0;
  lane.order = shuffle_order(lane.stream->documents.size(),
                             (seed_ ^ lane.stream->permutation_seed) + cycle);
  state_.cursor[index_of(lane.stream->source)] = 0;
}

std::optional<MixedDoc> Mixer::next() {
  for (std::size_t i = 0; i < kSourceCount; ++i)
    if (state_.emitted[i] >= state_.target[i]) state_.exhausted[i] = true;
  if (std::all_of(state_.exhausted.begin(), state_.exhausted.end(), [](bool b) { return b; }))
    return std::nullopt;

  const Source src = next_source(state_);
  const auto i = index_of(src);
  auto& lane = lanes_[i];
  const auto missing = state_.target[i] - state_.emitted[i];
  if (!lane.stream || lane.stream->documents.empty())
    throw MixError("source '" + std::string(to_string(src)) + "' has no documents but needs " +
                   std::to_string(missing) + " more tokens");
  if (state_.cursor[i] == lane.order.size()) {
    if (!lane.stream->repeatable)
      throw MixError("source '" + std::string(to_string(src)) + "' exhausted after " +
                     std::to_string(state_.emitted[i]) + " tokens; " + std::to_string(missing) +
                     " more needed (mark it repeatable to cycle)");
    if (lane.cycle_tokens == 0)
      throw MixError("source '" + std::string(to_string(src)) + "' yields no tokens to cycle");
    start_cycle(lane, lane.cycle + 1);
  }

  const auto idx = lane.order[state_.cursor[i]++];
  const auto tokens = lane.cost[idx];
  state_.emitted[i] += tokens;
  lane.cycle_tokens += tokens;
  max_doc_tokens_ = std::max(max_doc_tokens_, tokens);
  return MixedDoc{&lane.stream->documents[idx], src, tokens, lane.cycle};
}

MixResult mix(std::span<const SourceStream> streams, const MixPlan& plan, std::uint64_t seed,
              CostFn cost) {
  Mixer mixer(streams, plan, seed, std::move(cost));
  MixResult result;
  while (auto d = mixer.next()) result.docs.push_back(*d);
  result.emitted = mixer.state().emitted;
  result.max_doc_tokens = mixer.max_doc_tokens();
  return result;
}

}  // namespace mmpipe
