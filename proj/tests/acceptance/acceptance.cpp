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
// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "mmpipe/budget.hpp"
#include "mmpipe/evalagg.hpp"
#include "mmpipe/mixer.hpp"
#include "mmpipe/packer.hpp"
#include "mmpipe/runspec.hpp"
#include "mmpipe/schedule.hpp"
#include "mmpipe/shardio.hpp"
#include "oracle/mask_oracle.hpp"
#include "support/fuzz.hpp"
#include "support/tempdir.hpp"

namespace mmpipe {
namespace {

namespace fs = std::filesystem;
__extension__ using i128 = __int128;
using testing::TempDir;

constexpr double kTextScoreTol = 0.10;
constexpr double kVisionScoreTol = 0.05;
constexpr double kLrContinuityRelTol = 1e-12;
constexpr double kResumeLrRelTol = 1e-6;
constexpr double kResumeLrAt80 = 9.650857151680425e-4;
constexpr double kRewarmupPeak = 3e-3;
constexpr double kMixTimeLimitSeconds = 10.0;
constexpr int kMixCorpusDocs = 10'000;
constexpr std::uint64_t kMinDocTokens = 50;
constexpr std::uint64_t kMaxDocTokens = 900;
constexpr double kMixRatio = 0.10;
constexpr int kFuzzDocs = 10'000;
constexpr int kRoundTripSequences = 10'000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && outcome_.pass) {
      outcome_.pass = false;
      outcome_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (outcome_.pass) outcome_.detail = s;
  }
  Outcome outcome() const { return outcome_; }

 private:
  Outcome outcome_;
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string data_path(const std::string& rel) {
  return std::string(MMPIPE_SOURCE_DIR) + "/data/" + rel;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void expect_scores(Check& c, const std::vector<std::pair<std::string, double>>& expected,
                   double tol) {
  const auto table = BaselineTable::load(data_path("baselines/default.json"));
  std::string summary;
  for (const auto& [name, want] : expected) {
    const auto report = score_report(load_score_inputs(data_path("fixtures/" + name + ".ndjson")), table);
    c.expect(std::abs(report.stable_score - want) <= tol,
             name + fmt(": %.4f, expected %.2f", report.stable_score, want));
    summary += (summary.empty() ? "" : " ") + fmt("%.3f", report.stable_score);
  }
  c.note("scores " + summary);
}

Outcome text_scores() {
  Check c;
  expect_scores(c,
                {{"text-ours", 15.44},
                 {"text-ours-no-ft", 21.26},
                 {"text-base-100", 29.67},
                 {"text-llama-3.2-1b", 23.52},
                 {"text-qwen-2.5-1.5b", 35.68}},
                kTextScoreTol);
  return c.outcome();
}

Outcome vision_scores() {
  Check c;
  expect_scores(c,
                {{"vision-ours-no-ocid", 47.13},
                 {"vision-ours-with-ocid", 46.08},
                 {"vision-prismatic-7b-no-ocid", 51.38},
                 {"vision-prismatic-7b-with-ocid", 51.25},
                 {"vision-paligemma-3b-no-ocid", 58.14}},
                kVisionScoreTol);
  return c.outcome();
}

Outcome budget_exactness() {
  Check c;
  const auto total = scale_1b().total_pretrain_tokens;
  const std::vector<std::pair<double, std::uint64_t>> cps = {
      {0.2, 860'000'000'000ull},
      {0.4, 1'720'000'000'000ull},
      {0.6, 2'580'000'000'000ull},
      {0.8, 3'440'000'000'000ull}};
  for (const auto& [f, want] : cps) {
    const auto got = checkpoint_tokens(f, total);
    c.expect(got == want, "checkpoint_tokens(" + fmt("%.1f", f) + ") = " + std::to_string(got));
  }
  const auto ch = chinchilla_tokens(1'400'000'000ull, 20.0);
  c.expect(ch == 28'000'000'000ull, "chinchilla_tokens = " + std::to_string(ch));
  c.note("checkpoints 860B/1.72T/2.58T/3.44T, chinchilla 28B");
  return c.outcome();
}

Outcome schedule_continuity() {
  Check c;
  const RunSpec spec;
  const auto parent = parent_schedule(spec.scale);
  const double duration = static_cast<double>(stage_plan(spec).mm_tokens);
  double worst = 0.0;
  for (double f : {0.2, 0.4, 0.6, 0.8}) {
    const auto b = branch(parent, f, duration, spec);
    const double at = lr_at(parent, f * parent.total_tokens);
    const double rel = std::abs(b.start_lr - at) / at;
    const double rel0 = std::abs(branch_lr_at(b, 0.0) - at) / at;
    worst = std::max({worst, rel, rel0});
    c.expect(b.mode == BranchMode::kContinuedCooldown, fmt("fraction %.1f did not resume", f));
    c.expect(rel <= kLrContinuityRelTol && rel0 <= kLrContinuityRelTol,
             fmt("fraction %.1f: relative jump %.3g", f, std::max(rel, rel0)));
  }
  for (double f : {0.0, 1.0}) {
    const auto b = branch(parent, f, duration, spec);
    c.expect(b.mode == BranchMode::kRewarmup, fmt("fraction %.0f did not re-warm", f));
    c.expect(b.peak_lr == kRewarmupPeak, fmt("fraction %.0f: peak %.17g", f, b.peak_lr));
  }
  const double resume = branch(parent, 0.8, duration, spec).start_lr;
  const double rel = std::abs(resume - kResumeLrAt80) / kResumeLrAt80;
  c.expect(rel <= kResumeLrRelTol, fmt("resume LR at 0.8 = %.17g (rel err %.3g)", resume, rel));
  c.note(fmt("max jump %.2g, resume LR at 0.8 = %.10g", worst, resume));
  return c.outcome();
}

struct MixCorpus {
  std::vector<SourceStream> streams;
  MixPlan plan;
};

// Text documents have 50..900 tokens. Captions get 1..169 tokens, which puts
// their packed cost (image block + separator + caption) in 732..900.
MixCorpus make_mix_corpus(const RunSpec& spec) {
  testing::Rng rng(20'240'601);
  const std::uint64_t caption_overhead = spec.image_patch_count + 2;
  MixCorpus c;
  c.streams = {{Source::kText, {}, 0, false}, {Source::kCaption, {}, 1, false}};
  std::array<std::uint64_t, 2> supply{};
  for (int i = 0; i < kMixCorpusDocs; ++i) {
    Document d;
    d.id = static_cast<std::uint64_t>(i);
    if (i % 16 == 0) {
      d.source = Source::kCaption;
      d.image_patch_count = spec.image_patch_count;
      const auto n = testing::uniform(rng, 1, kMaxDocTokens - caption_overhead);
      d.segments.push_back({Role::kCaption, testing::random_tokens(rng, n)});
    } else {
      d.source = Source::kText;
      d.segments.push_back(
          {Role::kText, testing::random_tokens(rng, testing::uniform(rng, kMinDocTokens, kMaxDocTokens))});
    }
    const auto lane = d.source == Source::kText ? 0 : 1;
    supply[lane] += packed_cost(d, spec);
    c.streams[lane].documents.push_back(std::move(d));
  }
  const double cap = std::min(supply[0] / (1.0 - kMixRatio), supply[1] / kMixRatio);
  c.plan = mix_plan(static_cast<std::uint64_t>(cap * 0.995), kMixRatio, 0.0);
  return c;
}

Outcome mix_ratio_bound() {
  Check c;
  const RunSpec spec;
  const auto corpus = make_mix_corpus(spec);
  TempDir dir;
  const auto t0 = std::chrono::steady_clock::now();

  std::uint64_t corpus_max = 0;
  for (const auto& s : corpus.streams)
    for (const auto& d : s.documents) {
      const auto cost = packed_cost(d, spec);
      c.expect(cost >= kMinDocTokens && cost <= kMaxDocTokens, "doc cost out of range");
      corpus_max = std::max(corpus_max, cost);
    }

  const auto path = (dir.path() / "mix.mmshard").string();
  ShardWriter writer(path, spec.mm_seq_len, spec.seed);
  Packer packer(spec, [&](PackedSequence&& s) { writer.write(s); });
  Mixer mixer(corpus.streams, corpus.plan, spec.seed,
              [&](const Document& d) { return packed_cost(d, spec); });
  const i128 W = mixer.state().target_total();
  const i128 w_caption = corpus.plan.caption_tokens;
  std::uint64_t prefixes = 0;
  double worst_ratio = 0.0;
  while (auto d = mixer.next()) {
    packer.add(*d->doc);
    const auto& st = mixer.state();
    const i128 E = st.emitted_total();
    const i128 e = st.emitted[index_of(Source::kCaption)];
    const i128 dev = e * W - w_caption * E;
    const i128 limit = static_cast<i128>(corpus_max) * W;
    const i128 mag = dev < 0 ? -dev : dev;
    if (mag > limit) {
      c.expect(false, "prefix " + std::to_string(prefixes + 1) + " exceeds max_doc/total");
      break;
    }
    worst_ratio = std::max(worst_ratio, static_cast<double>(mag) / static_cast<double>(limit));
    ++prefixes;
  }
  packer.finish();
  auto manifest = writer.close();
  manifest.max_doc_tokens = mixer.max_doc_tokens();
  manifest.target = corpus.plan;
  const auto report = audit(std::vector<ShardManifest>{manifest});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  c.expect(prefixes > 0.95 * kMixCorpusDocs,
           "only " + std::to_string(prefixes) + " documents mixed");
  c.expect(report.has_target && report.within_bound, "audit reports a violation");
  c.expect(secs < kMixTimeLimitSeconds, fmt("took %.2f s", secs));
  c.note(std::to_string(prefixes) + " prefixes checked" +
         fmt(", worst |dev|/bound %.3f, %.2f s", worst_ratio, secs));
  return c.outcome();
}

Outcome mask_correctness() {
  Check c;
  const RunSpec spec;
  testing::Rng rng(606);
  std::vector<Document> docs;
  std::uint64_t mask_matches = 0, sep_matches = 0;
  for (int i = 0; i < kFuzzDocs; ++i) {
    auto d = testing::random_document(rng, spec);
    d.id = static_cast<std::uint64_t>(i);
    const auto l = lay_out(d, spec);
    if (l.mask == oracle::derive_mask(d, spec)) ++mask_matches;
    std::vector<std::size_t> seps;
    for (std::size_t p = 0; p < l.size(); ++p)
      if (l.tokens[p] == spec.separator_token_id) seps.push_back(p);
    if (seps == oracle::separator_positions(d, spec)) ++sep_matches;
    docs.push_back(std::move(d));
  }
  c.expect(mask_matches == kFuzzDocs, std::to_string(kFuzzDocs - mask_matches) + " masks differ");
  c.expect(sep_matches == kFuzzDocs,
           std::to_string(kFuzzDocs - sep_matches) + " separator layouts differ");

  std::uint64_t bad_targets = 0;
  for (const auto& s : pack(docs, spec).sequences) {
    std::vector<char> covered(s.seq_len(), 0);
    for (const auto& g : s.segments) std::fill_n(covered.begin() + g.start, g.length, 1);
    for (const auto& span : s.image_spans)
      for (auto p = span.start; p < span.start + span.length; ++p) bad_targets += s.loss_mask[p];
    for (std::uint32_t p = 0; p < s.seq_len(); ++p)
      if (!covered[p]) bad_targets += s.loss_mask[p];
  }
  c.expect(bad_targets == 0, std::to_string(bad_targets) + " targets on image or pad positions");
  c.note(std::to_string(mask_matches) + "/" + std::to_string(kFuzzDocs) +
         " masks and separators match the oracle, 0 image/pad targets");
  return c.outcome();
}

ShardManifest pipeline_shard(const MixCorpus& corpus, const RunSpec& spec, std::uint64_t seed,
                             const std::string& path) {
  ShardWriter writer(path, spec.mm_seq_len, seed);
  Packer packer(spec, [&](PackedSequence&& s) { writer.write(s); });
  Mixer mixer(corpus.streams, corpus.plan, seed,
              [&](const Document& d) { return packed_cost(d, spec); });
  while (auto d = mixer.next()) packer.add(*d->doc);
  packer.finish();
  return writer.close();
}

Outcome shard_determinism() {
  Check c;
  const RunSpec spec;
  TempDir dir;

  auto corpus = make_mix_corpus(spec);
  corpus.plan = sub_plan(corpus.plan, 8, 0);
  const auto a = pipeline_shard(corpus, spec, 11, dir.file("a.mmshard"));
  const auto b = pipeline_shard(corpus, spec, 11, dir.file("b.mmshard"));
  const auto other = pipeline_shard(corpus, spec, 12, dir.file("c.mmshard"));
  c.expect(slurp(dir.file("a.mmshard")) == slurp(dir.file("b.mmshard")),
           "same seed produced different shard bytes");
  c.expect(a.sha256 == b.sha256, "same seed produced different checksums");
  c.expect(a.sha256 != other.sha256, "seed does not affect the shard order");

  testing::Rng rng(7'777);
  std::vector<PackedSequence> seqs;
  for (int i = 0; i < kRoundTripSequences; ++i) seqs.push_back(testing::random_sequence(rng, 61));
  const auto rt_path = dir.file("rt.mmshard");
  const auto m = write_shard(seqs, rt_path, 61, 5);
  c.expect(read_shard(rt_path, m).sequences == seqs, "read(write(x)) != x");

  std::vector<PackedSequence> small;
  for (int i = 0; i < 16; ++i) small.push_back(testing::random_sequence(rng, 24));
  const auto cpath = dir.file("corrupt.mmshard");
  const auto cm = write_shard(small, cpath, 24, 3);
  const std::string clean = slurp(cpath);
  std::uint64_t undetected = 0, trials = 0;
  for (std::size_t pos = 0; pos < clean.size(); ++pos) {
    for (unsigned char flip : {0x01, 0x80, 0xFF}) {
      std::string bytes = clean;
      bytes[pos] = static_cast<char>(bytes[pos] ^ flip);
      std::ofstream(cpath, std::ios::binary | std::ios::trunc) << bytes;
      ++trials;
      try {
        read_shard(cpath, cm);
        ++undetected;
      } catch (const ShardError&) {
      }
    }
  }
  c.expect(undetected == 0, std::to_string(undetected) + " corruptions went undetected");
  c.note("identical bytes and checksum, " + std::to_string(kRoundTripSequences) +
         " sequences round-trip, " + std::to_string(trials) + "/" + std::to_string(trials) +
         " corruptions detected");
  return c.outcome();
}

Outcome packing_conservation() {
  Check c;
  testing::Rng rng(8'888);
  std::uint64_t docs_total = 0, runs = 0;
  for (std::uint32_t seq_len : {1024u, 800u, 2048u}) {
    RunSpec spec;
    spec.mm_seq_len = seq_len;
    testing::DocShape shape;
    shape.empty_caption_p = 0.02;
    shape.max_text_tokens = 3000;
    std::vector<Document> docs;
    for (int i = 0; i < 3000; ++i) {
      docs.push_back(testing::random_document(rng, spec, shape));
      docs.back().id = static_cast<std::uint64_t>(i);
    }
    std::uint64_t layout_sum = 0;
    for (const auto& d : docs) {
      try {
        layout_sum += lay_out(d, spec).size();
      } catch (const DocumentError&) {
      }
    }
    std::uint64_t non_pad = 0;
    for (const auto& s : pack(docs, spec).sequences) {
      std::uint64_t pads = 0;
      for (std::uint32_t p = 0; p < s.seq_len(); ++p) pads += s.tokens[p] == spec.pad_token_id;
      c.expect(pads == s.pad_count(), "pad tokens outside the uncovered positions");
      non_pad += s.seq_len() - pads;
      for (const auto& span : s.image_spans)
        c.expect(span.length == spec.image_patch_count && span.start + span.length <= s.seq_len(),
                 "image span split or overflowing");
    }
    c.expect(non_pad == layout_sum, "seq_len " + std::to_string(seq_len) + ": " +
                                        std::to_string(non_pad) + " non-pad vs " +
                                        std::to_string(layout_sum) + " layout tokens");
    docs_total += docs.size();
    ++runs;
  }
  c.note(std::to_string(docs_total) + " documents over " + std::to_string(runs) +
         " sequence lengths conserve tokens, spans atomic");
  return c.outcome();
}

}  // namespace
}  // namespace mmpipe

int main() {
  using namespace mmpipe;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"text stable scores", text_scores},
      {"vision stable scores", vision_scores},
      {"budget exactness", budget_exactness},
      {"schedule continuity", schedule_continuity},
      {"mix ratio bound", mix_ratio_bound},
      {"mask correctness", mask_correctness},
      {"shard determinism and round-trip", shard_determinism},
      {"packing conservation", packing_conservation},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  return failures == 0 ? 0 : 1;
}
