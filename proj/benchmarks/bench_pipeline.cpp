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
#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mmpipe/mixer.hpp"
#include "mmpipe/packer.hpp"
#include "mmpipe/rng.hpp"
#include "mmpipe/sha256.hpp"
#include "mmpipe/shardio.hpp"

namespace {

using namespace mmpipe;

std::vector<TokenId> tokens(Xoshiro256ss& rng, std::size_t n) {
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng.bounded(50'000));
  return t;
}

std::vector<SourceStream> corpus(std::size_t docs) {
  const RunSpec spec;
  Xoshiro256ss rng(7);
  std::vector<SourceStream> streams = {{Source::kText, {}, 0, false}, {Source::kCaption, {}, 1, false}};
  for (std::size_t i = 0; i < docs; ++i) {
    Document d;
    d.id = i;
    if (i % 8 == 0) {
      d.source = Source::kCaption;
      d.image_patch_count = spec.image_patch_count;
      d.segments.push_back({Role::kCaption, tokens(rng, 1 + rng.bounded(64))});
      streams[1].documents.push_back(std::move(d));
    } else {
      d.segments.push_back({Role::kText, tokens(rng, 50 + rng.bounded(851))});
      streams[0].documents.push_back(std::move(d));
    }
  }
  return streams;
}

std::uint64_t supply(const std::vector<SourceStream>& streams) {
  std::uint64_t text = 0, caption = 0;
  for (const auto& d : streams[0].documents) text += raw_token_cost(d);
  for (const auto& d : streams[1].documents) caption += raw_token_cost(d);
  return std::min<std::uint64_t>(text * 10 / 9, caption * 10) * 9 / 10;
}

void BM_Mix(benchmark::State& state) {
  const auto streams = corpus(static_cast<std::size_t>(state.range(0)));
  const auto plan = mix_plan(supply(streams), 0.10, 0.0);
  std::size_t docs = 0;
  for (auto _ : state) {
    auto r = mix(streams, plan, 1);
    docs = r.docs.size();
    benchmark::DoNotOptimize(r.emitted);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs));
}
BENCHMARK(BM_Mix)->Arg(10'000)->Unit(benchmark::kMillisecond);

void BM_Pack(benchmark::State& state) {
  const RunSpec spec;
  const auto streams = corpus(10'000);
  std::vector<Document> docs;
  for (const auto& s : streams) docs.insert(docs.end(), s.documents.begin(), s.documents.end());
  for (auto _ : state) {
    auto r = pack(docs, spec);
    benchmark::DoNotOptimize(r.stats);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs.size()));
}
BENCHMARK(BM_Pack)->Unit(benchmark::kMillisecond);

class ShardFixture : public benchmark::Fixture {
 public:
  void SetUp(benchmark::State&) override {
    const RunSpec spec;
    const auto streams = corpus(4'000);
    std::vector<Document> docs;
    for (const auto& s : streams) docs.insert(docs.end(), s.documents.begin(), s.documents.end());
    sequences = pack(docs, spec).sequences;
    path = (std::filesystem::temp_directory_path() / "mmpipe-bench.mmshard").string();
    manifest = write_shard(sequences, path, spec.mm_seq_len);
  }
  void TearDown(benchmark::State&) override { std::filesystem::remove(path); }

  std::vector<PackedSequence> sequences;
  std::string path;
  ShardManifest manifest;
};

BENCHMARK_DEFINE_F(ShardFixture, Write)(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(write_shard(sequences, path, 1024));
  state.SetBytesProcessed(state.iterations() *
                          static_cast<std::int64_t>(std::filesystem::file_size(path)));
}
BENCHMARK_REGISTER_F(ShardFixture, Write)->Unit(benchmark::kMillisecond);

BENCHMARK_DEFINE_F(ShardFixture, ReadVerified)(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(read_shard(path, manifest));
  state.SetBytesProcessed(state.iterations() *
                          static_cast<std::int64_t>(std::filesystem::file_size(path)));
}
BENCHMARK_REGISTER_F(ShardFixture, ReadVerified)->Unit(benchmark::kMillisecond);

void BM_Sha256(benchmark::State& state) {
  const std::vector<std::uint8_t> buf(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(sha256_hex(buf));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 20);

}  // namespace
BENCHMARK_MAIN();
