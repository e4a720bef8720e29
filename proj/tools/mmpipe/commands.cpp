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
#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmpipe/budget.hpp"
#include "mmpipe/document.hpp"
#include "mmpipe/evalagg.hpp"
#include "mmpipe/mixer.hpp"
#include "mmpipe/packer.hpp"
#include "mmpipe/runspec.hpp"
#include "mmpipe/schedule.hpp"
#include "mmpipe/shardio.hpp"

namespace mmpipe::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class AuditViolation : public Error {
 public:
  using Error::Error;
};

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SpecSource {
  std::string spec_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;

  void bind(CLI::App* cmd) {
    auto* s = cmd->add_option("--spec", spec_path, "Run-spec file (JSON)");
    auto* p = cmd->add_option("--preset", preset_name, "Named preset, e.g. 'ratio-sweep-80(0.10)'");
    s->excludes(p);
    cmd->add_option("--seed", seed, "Master seed (overrides the spec's seed)");
  }

  RunSpec load() const {
    RunSpec spec;
    if (!spec_path.empty()) {
      spec = load_runspec(spec_path);
    } else if (!preset_name.empty()) {
      spec = preset(preset_name);
    } else {
      throw InvalidArgument("one of --spec or --preset is required");
    }
    if (seed) spec.seed = *seed;
    return validate(std::move(spec));
  }
};

struct SourceFiles {
  std::string text, caption, instruction;
  std::vector<std::string> repeatable;

  void bind(CLI::App* cmd) {
    cmd->add_option("--text", text, "Text documents (NDJSON)");
    cmd->add_option("--caption", caption, "Image-caption documents (NDJSON)");
    cmd->add_option("--instruction", instruction, "Image-instruction documents (NDJSON)");
    cmd->add_option("--repeatable", repeatable, "Sources to reshuffle and cycle when exhausted")
        ->delimiter(',')
        ->check(CLI::IsMember({"text", "caption", "instruction"}));
  }

  std::vector<SourceStream> load() const {
    std::vector<SourceStream> streams;
    for (auto [src, path] : {std::pair{Source::kText, &text}, std::pair{Source::kCaption, &caption},
                             std::pair{Source::kInstruction, &instruction}}) {
      if (path->empty()) continue;
      SourceStream s;
      s.source = src;
      s.documents = load_documents(*path);
      s.permutation_seed = index_of(src);
      s.repeatable = std::find(repeatable.begin(), repeatable.end(), to_string(src)) != repeatable.end();
      for (const auto& d : s.documents)
        if (d.source != src)
          throw InvalidArgument(*path + ": document " + std::to_string(d.id) + " has source '" +
                                std::string(to_string(d.source)) + "', expected '" +
                                std::string(to_string(src)) + "'");
      streams.push_back(std::move(s));
    }
    return streams;
  }
};

json mix_plan_json(const MixPlan& p) {
  return json{{"total_tokens", p.total_tokens},
              {"text_tokens", p.text_tokens},
              {"caption_tokens", p.caption_tokens},
              {"instruction_tokens", p.instruction_tokens}};
}

BranchSchedule branch_for(const RunSpec& spec, double duration_tokens) {
  return branch(parent_schedule(spec.scale), spec.checkpoint_fraction, duration_tokens, spec);
}

// ---------------------------------------------------------------------------

int cmd_plan(const SpecSource& src, std::ostream& out) {
  const RunSpec spec = src.load();
  const StagePlan stage = stage_plan(spec);
  const MixPlan mix = mix_plan(stage.mm_tokens, spec.image_ratio, spec.instruction_fraction);
  const WarmupCosine parent = parent_schedule(spec.scale);
  const BranchSchedule b = branch_for(spec, static_cast<double>(stage.mm_tokens));
  const FtSchedule ft{spec.fine_tune.peak_lr, spec.fine_tune.warmup_ratio, stage.ft_steps_per_epoch,
                      spec.ft_epochs};

  json branch_j{{"mode", std::string(to_string(b.mode))},
                {"resume_lr", lr_at(parent, spec.checkpoint_fraction * parent.total_tokens)},
                {"start_lr", branch_lr_at(b, 0.0)},
                {"end_lr", b.end_lr},
                {"duration_tokens", b.duration_tokens}};
  if (b.mode == BranchMode::kRewarmup) {
    branch_j["peak_lr"] = b.peak_lr;
    branch_j["warmup_tokens"] = b.warmup_tokens;
  }

  json doc;
  doc["scale"] = spec.scale.name;
  doc["seed"] = spec.seed;
  doc["phases"] = json::array({
      json{{"phase", "text-pretraining"},
           {"checkpoint_fraction", spec.checkpoint_fraction},
           {"resume_tokens", stage.pretrain_resume_tokens},
           {"total_pretrain_tokens", spec.scale.total_pretrain_tokens},
           {"schedule",
            {{"peak_lr", parent.peak_lr},
             {"final_lr", parent.final_lr},
             {"warmup_tokens", parent.warmup_tokens},
             {"total_tokens", parent.total_tokens}}}},
      json{{"phase", "image-text-pretraining"},
           {"mm_tokens", stage.mm_tokens},
           {"mm_steps", stage.mm_steps},
           {"token_multiplier", spec.token_multiplier},
           {"mm_seq_len_tokens", spec.mm_seq_len},
           {"freeze_encoder", spec.freeze_encoder},
           {"mix", mix_plan_json(mix)},
           {"schedule", branch_j}},
      json{{"phase", "instruction-finetuning"},
           {"epochs", spec.ft_epochs},
           {"examples", spec.fine_tune.examples},
           {"steps_per_epoch", stage.ft_steps_per_epoch},
           {"total_steps", stage.ft_total_steps},
           {"schedule",
            {{"peak_lr", ft.peak_lr},
             {"warmup_ratio", ft.warmup_ratio},
             {"warmup_steps", ft.warmup_steps()},
             {"final_lr", 0.0}}}},
  });
  out << doc.dump(2) << "\n";
  return kOk;
}

struct LrDumpOptions {
  std::uint64_t samples = 101;
  std::string schedule = "branch";
  std::optional<std::uint64_t> total_tokens;
};

int cmd_lr_dump(const SpecSource& src, const LrDumpOptions& opt, std::ostream& out) {
  const RunSpec spec = src.load();
  if (opt.samples == 0) throw InvalidArgument("--samples must be >= 1");
  out << "tokens,lr\n";
  auto emit = [&](double end, auto&& f) {
    for (std::uint64_t i = 0; i < opt.samples; ++i) {
      const double t = opt.samples == 1 ? 0.0
                                        : end * static_cast<double>(i) /
                                              static_cast<double>(opt.samples - 1);
      out << g17(t) << "," << g17(f(std::min(t, end))) << "\n";
    }
  };
  if (opt.schedule == "parent") {
    const auto parent = parent_schedule(spec.scale);
    emit(parent.total_tokens, [&](double t) { return lr_at(parent, t); });
  } else {
    const double duration = static_cast<double>(
        opt.total_tokens ? *opt.total_tokens : stage_plan(spec).mm_tokens);
    const auto b = branch_for(spec, duration);
    emit(duration, [&](double t) { return branch_lr_at(b, t); });
  }
  return kOk;
}

struct MixOptions {
  SourceFiles files;
  std::optional<std::uint64_t> total_tokens;
  bool emit_docs = false;
};

MixPlan plan_for(const RunSpec& spec, const std::optional<std::uint64_t>& total) {
  const auto tokens = total ? *total : stage_plan(spec).mm_tokens;
  return mix_plan(tokens, spec.image_ratio, spec.instruction_fraction);
}

int cmd_mix(const SpecSource& src, const MixOptions& opt, std::ostream& out, std::ostream& err) {
  const RunSpec spec = src.load();
  const auto streams = opt.files.load();
  const MixPlan plan = plan_for(spec, opt.total_tokens);
  Mixer mixer(streams, plan, spec.seed, [&](const Document& d) { return packed_cost(d, spec); });
  std::uint64_t docs = 0;
  while (auto d = mixer.next()) {
    ++docs;
    if (opt.emit_docs) out << to_ndjson(*d->doc) << "\n";
  }
  std::ostream& summary = opt.emit_docs ? err : out;
  summary << "documents: " << docs << "\n";
  for (auto s : kAllSources) {
    const auto i = index_of(s);
    summary << to_string(s) << ": emitted " << mixer.state().emitted[i] << " / target "
            << mixer.state().target[i] << "\n";
  }
  summary << "max_doc_tokens: " << mixer.max_doc_tokens() << "\n";
  return kOk;
}

struct PackOptions {
  MixOptions mix;
  std::string out_dir;
  unsigned workers = 1;
  std::uint64_t shards = 1;
  std::optional<std::uint64_t> max_skipped;
};

std::string shard_name(std::uint64_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05llu.mmshard", static_cast<unsigned long long>(k));
  return buf;
}

int cmd_pack(const SpecSource& src, const PackOptions& opt, std::ostream& out, std::ostream& err) {
  const RunSpec spec = src.load();
  if (opt.out_dir.empty()) throw InvalidArgument("--out is required");
  if (opt.shards == 0) throw InvalidArgument("--shards must be >= 1");
  const auto streams = opt.mix.files.load();
  const MixPlan plan = plan_for(spec, opt.mix.total_tokens);

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + opt.out_dir + "': " + ec.message());

  const auto K = opt.shards;
  std::vector<ShardManifest> manifests(K);
  std::vector<PackStats> stats(K);
  std::vector<std::exception_ptr> errors(K);

  auto build_shard = [&](std::uint64_t k) {
    // Shard k owns documents with id % K == k and mixes with seed XOR k.
    std::vector<SourceStream> part;
    for (const auto& s : streams) {
      SourceStream p{s.source, {}, s.permutation_seed, s.repeatable};
      for (const auto& d : s.documents)
        if (d.id % K == k) p.documents.push_back(d);
      part.push_back(std::move(p));
    }
    const MixPlan sub = sub_plan(plan, K, k);
    const std::uint64_t seed = spec.seed ^ k;
    const std::string path = (fs::path(opt.out_dir) / shard_name(k)).string();

    ShardWriter writer(path, spec.mm_seq_len, seed);
    Packer packer(spec, [&](PackedSequence&& s) { writer.write(s); });
    Mixer mixer(part, sub, seed, [&](const Document& d) { return packed_cost(d, spec); });
    while (auto d = mixer.next()) packer.add(*d->doc);
    packer.finish();
    ShardManifest m = writer.close();
    m.max_doc_tokens = mixer.max_doc_tokens();
    m.target = sub;
    write_manifest(manifest_path_for(path), m);
    manifests[k] = std::move(m);
    stats[k] = packer.stats();
  };

  const auto workers = std::max<std::uint64_t>(1, std::min<std::uint64_t>(opt.workers, K));
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (auto k = next++; k < K; k = next++) {
      try {
        build_shard(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::uint64_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PackStats total;
  for (const auto& s : stats) {
    total.documents_packed += s.documents_packed;
    total.layout_tokens += s.layout_tokens;
    total.sequences += s.sequences;
    total.pad_tokens += s.pad_tokens;
    for (std::size_t i = 0; i < total.skipped.size(); ++i) total.skipped[i] += s.skipped[i];
  }
  out << "shards: " << K << "\n"
      << "documents_packed: " << total.documents_packed << "\n"
      << "sequences: " << total.sequences << "\n"
      << "layout_tokens: " << total.layout_tokens << "\n"
      << "pad_tokens: " << total.pad_tokens << "\n";
  for (auto kind : {DocumentError::Kind::kEmptyCaption, DocumentError::Kind::kMalformedRoles,
                    DocumentError::Kind::kReservedToken, DocumentError::Kind::kImageMismatch,
                    DocumentError::Kind::kOversizedImageLayout}) {
    const auto n = total.skipped_of(kind);
    out << "skipped_" << to_string(kind) << ": " << n << "\n";
    if (n > 0) err << "warning: skipped " << n << " document(s): " << to_string(kind) << "\n";
  }

  const AuditReport report = audit(manifests, plan);
  out << report.to_text();
  if (opt.max_skipped && total.skipped_of(DocumentError::Kind::kOversizedImageLayout) > *opt.max_skipped)
    throw InvalidArgument("oversized image layouts (" +
                          std::to_string(total.skipped_of(DocumentError::Kind::kOversizedImageLayout)) +
                          ") exceed --max-skipped " + std::to_string(*opt.max_skipped));
  if (!report.within_bound) throw AuditViolation("realized mix deviates beyond the bound");
  return kOk;
}

struct InspectOptions {
  std::string shard;
  std::string manifest;
  bool sequences = false;
};

int cmd_inspect(const InspectOptions& opt, std::ostream& out) {
  std::optional<ShardManifest> manifest;
  if (!opt.manifest.empty()) {
    manifest = read_manifest(opt.manifest);
  } else if (fs::exists(manifest_path_for(opt.shard))) {
    manifest = read_manifest(manifest_path_for(opt.shard));
  }
  const ShardContents contents = manifest ? read_shard(opt.shard, *manifest) : read_shard(opt.shard);
  const ShardManifest m = summarize(contents);

  out << "shard: " << opt.shard << "\n"
      << "version: " << contents.header.version << "\n"
      << "seq_len: " << m.seq_len << "\n"
      << "sequence_count: " << m.sequence_count << "\n"
      << "seed: " << m.seed << "\n";
  for (auto s : kAllSources) out << "tokens_" << to_string(s) << ": " << m.source_tokens[index_of(s)] << "\n";
  out << "pad_tokens: " << m.pad_tokens << "\n"
      << "loss_targets: " << m.loss_targets << "\n"
      << "image_spans: " << m.image_spans << "\n";
  if (opt.sequences) {
    for (std::size_t i = 0; i < contents.sequences.size(); ++i) {
      const auto& seq = contents.sequences[i];
      out << "  [" << i << "] targets " << seq.loss_target_count() << ", pads " << seq.pad_count()
          << ", spans " << seq.image_spans.size() << ", segments " << seq.segments.size() << "\n";
    }
  }
  if (manifest) {
    const bool counts_match = manifest->sequence_count == m.sequence_count &&
                              manifest->seq_len == m.seq_len &&
                              manifest->source_tokens == m.source_tokens &&
                              manifest->pad_tokens == m.pad_tokens &&
                              manifest->loss_targets == m.loss_targets &&
                              manifest->image_spans == m.image_spans;
    out << "checksum: ok\n"
        << "manifest_counts: " << (counts_match ? "match" : "MISMATCH") << "\n";
    if (!counts_match)
      throw ShardError(ShardError::Kind::kMalformed, "manifest counts differ from shard contents");
  }
  return kOk;
}

struct AuditOptions {
  std::vector<std::string> paths;
  SpecSource spec;
  bool json_out = false;
};

int cmd_audit(const AuditOptions& opt, std::ostream& out) {
  std::vector<std::string> files;
  for (const auto& p : opt.paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (name.size() > 14 && name.ends_with(".manifest.json")) found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw InvalidArgument("audit: no manifests given");
  std::vector<ShardManifest> manifests;
  for (const auto& f : files) manifests.push_back(read_manifest(f));

  std::optional<MixPlan> plan;
  if (!opt.spec.spec_path.empty() || !opt.spec.preset_name.empty()) {
    const RunSpec spec = opt.spec.load();
    plan = mix_plan(stage_plan(spec).mm_tokens, spec.image_ratio, spec.instruction_fraction);
  }
  const AuditReport report = audit(manifests, plan);
  out << (opt.json_out ? report.to_json() + "\n" : report.to_text());
  if (report.has_target && !report.within_bound)
    throw AuditViolation("realized mix deviates beyond the bound");
  return kOk;
}

struct ScoreOptions {
  std::vector<std::string> results;
  std::string baselines;
  std::string format = "text";
};

int cmd_score(const ScoreOptions& opt, std::ostream& out) {
  const BaselineTable table =
      opt.baselines.empty() ? BaselineTable::defaults() : BaselineTable::load(opt.baselines);
  for (const auto& path : opt.results) {
    const auto inputs = load_score_inputs(path);
    const auto report = score_report(inputs, table);
    if (opt.format == "ndjson") {
      out << report.to_ndjson();
    } else {
      if (opt.results.size() > 1) out << "== " << path << "\n";
      out << report.to_text();
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mmpipe: vision-language training recipe compiler", "mmpipe"};
  app.require_subcommand(1);

  SpecSource plan_spec;
  auto* plan = app.add_subcommand("plan", "Print the three-phase stage plan of a run");
  plan_spec.bind(plan);

  SpecSource lr_spec;
  LrDumpOptions lr_opt;
  auto* lr = app.add_subcommand("lr-dump", "Sample a learning-rate schedule as CSV");
  lr_spec.bind(lr);
  lr->add_option("--samples", lr_opt.samples, "Number of evenly spaced sample points")
      ->capture_default_str();
  lr->add_option("--schedule", lr_opt.schedule, "branch (image-text stage) or parent")
      ->check(CLI::IsMember({"branch", "parent"}))
      ->capture_default_str();
  lr->add_option("--total-tokens", lr_opt.total_tokens, "Branch duration override");

  SpecSource mix_spec;
  MixOptions mix_opt;
  auto* mixc = app.add_subcommand("mix", "Interleave source documents to the planned ratios");
  mix_spec.bind(mixc);
  mix_opt.files.bind(mixc);
  mixc->add_option("--total-tokens", mix_opt.total_tokens, "Stage token budget override");
  mixc->add_flag("--emit-docs", mix_opt.emit_docs, "Write the mixed documents to stdout as NDJSON");

  SpecSource pack_spec;
  PackOptions pack_opt;
  auto* packc = app.add_subcommand("pack", "Mix, pack and write shards with manifests");
  pack_spec.bind(packc);
  pack_opt.mix.files.bind(packc);
  packc->add_option("--total-tokens", pack_opt.mix.total_tokens, "Stage token budget override");
  packc->add_option("--out", pack_opt.out_dir, "Output directory")->required();
  packc->add_option("--workers", pack_opt.workers, "Worker threads")->capture_default_str();
  packc->add_option("--shards", pack_opt.shards, "Number of shards")->capture_default_str();
  packc->add_option("--max-skipped", pack_opt.max_skipped,
                    "Fail if more oversized image layouts than this are skipped");

  InspectOptions insp_opt;
  auto* insp = app.add_subcommand("inspect", "Decode a shard and print its counts");
  insp->add_option("shard", insp_opt.shard, "Shard file")->required();
  insp->add_option("--manifest", insp_opt.manifest, "Manifest (default: sidecar if present)");
  insp->add_flag("--sequences", insp_opt.sequences, "Print one line per sequence");

  AuditOptions audit_opt;
  auto* auditc = app.add_subcommand("audit", "Aggregate manifests and check the realized mix");
  auditc->add_option("manifests", audit_opt.paths, "Manifest files or directories")->required();
  audit_opt.spec.bind(auditc);
  auditc->add_flag("--json", audit_opt.json_out, "Machine-readable output");

  ScoreOptions score_opt;
  auto* score = app.add_subcommand("score", "Compute stable scores from results files");
  score->add_option("results", score_opt.results, "Results NDJSON files")->required();
  score->add_option("--baselines", score_opt.baselines, "Baseline table (JSON)");
  score->add_option("--format", score_opt.format, "text or ndjson")
      ->check(CLI::IsMember({"text", "ndjson"}))
      ->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationFailure;
  }

  try {
    if (*plan) return cmd_plan(plan_spec, out);
    if (*lr) return cmd_lr_dump(lr_spec, lr_opt, out);
    if (*mixc) return cmd_mix(mix_spec, mix_opt, out, err);
    if (*packc) return cmd_pack(pack_spec, pack_opt, out, err);
    if (*insp) return cmd_inspect(insp_opt, out);
    if (*auditc) return cmd_audit(audit_opt, out);
    if (*score) return cmd_score(score_opt, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.report().to_string() << "\n";
    return kValidationFailure;
  } catch (const AuditViolation& e) {
    err << "error: " << e.what() << "\n";
    return kAuditViolation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const ShardError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  return kOk;
}

}  // namespace mmpipe::cli
