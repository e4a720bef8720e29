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

// .mmshard binary format. Every integer is little-endian regardless of host.
//
//   header (32 bytes)
//     magic           8 bytes  "MMSHARD1"
//     version         u32      1
//     seq_len         u32
//     sequence_count  u64
//     seed            u64
//   record, repeated sequence_count times
//     tokens          seq_len x u32
//     loss mask       ceil(seq_len / 8) bytes; bit i of byte b is position 8b+i
//     span count      u16
//     spans           span count x (start u32, length u32)
//     segment count   u16
//     segments        segment count x (source u8, doc id u64, start u32, length u32)
//
// Each shard has a single-line JSON manifest sidecar `<name>.manifest.json`
// whose sha256 covers the entire shard file.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpipe/budget.hpp"
#include "mmpipe/document.hpp"
#include "mmpipe/error.hpp"
#include "mmpipe/packer.hpp"

namespace mmpipe {

inline constexpr std::array<char, 8> kShardMagic = {'M', 'M', 'S', 'H', 'A', 'R', 'D', '1'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderSize = 32;

/// Bytes of one record with the given number of spans and segments.
std::size_t record_size(std::uint32_t seq_len, std::size_t spans, std::size_t segments);

struct ShardHeader {
  std::uint32_t version = kShardVersion;
  std::uint32_t seq_len = 0;
  std::uint64_t sequence_count = 0;
  std::uint64_t seed = 0;

  bool operator==(const ShardHeader&) const = default;
};

class ShardError : public Error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kChecksumMismatch, kMalformed };

  ShardError(Kind kind, const std::string& what, std::optional<std::uint64_t> sequence = {})
      : Error(what), kind_(kind), sequence_(sequence) {}

  Kind kind() const { return kind_; }
  /// Index of the record being decoded, when the error is tied to one.
  std::optional<std::uint64_t> sequence() const { return sequence_; }

 private:
  Kind kind_;
  std::optional<std::uint64_t> sequence_;
};

struct ShardManifest {
  std::string shard;  // file name, no directory
  std::uint64_t sequence_count = 0;
  std::uint32_t seq_len = 0;
  std::uint64_t seed = 0;
  std::array<std::uint64_t, kSourceCount> source_tokens{};
  std::uint64_t pad_tokens = 0;
  std::uint64_t loss_targets = 0;
  std::uint64_t image_spans = 0;
  std::uint64_t max_doc_tokens = 0;
  std::optional<MixPlan> target;  // plan this shard was mixed against
  std::string sha256;

  std::uint64_t content_tokens() const;

  bool operator==(const ShardManifest&) const = default;
};

std::string manifest_to_json(const ShardManifest& m);
ShardManifest manifest_from_json(std::string_view line);
void write_manifest(const std::string& path, const ShardManifest& m);
ShardManifest read_manifest(const std::string& path);
/// "dir/name.mmshard" -> "dir/name.manifest.json".
std::string manifest_path_for(const std::string& shard_path);

/// Streams sequences into a shard file. The header's sequence count is patched
/// in close(), which also hashes the finished file and returns the manifest.
class ShardWriter {
 public:
  ShardWriter(const std::string& path, std::uint32_t seq_len, std::uint64_t seed);
  ~ShardWriter();
  ShardWriter(const ShardWriter&) = delete;
  ShardWriter& operator=(const ShardWriter&) = delete;

  void write(const PackedSequence& seq);
  ShardManifest close();

 private:
  std::string path_;
  std::ofstream out_;
  ShardManifest manifest_;
  std::vector<std::uint8_t> buf_;
  bool closed_ = false;
};

/// Throws InvalidArgument if any sequence length differs from seq_len.
ShardManifest write_shard(std::span<const PackedSequence> sequences, const std::string& path,
                          std::uint32_t seq_len, std::uint64_t seed = 0);

struct ShardContents {
  ShardHeader header;
  std::vector<PackedSequence> sequences;
};

/// Decodes a shard (memory-mapped). Throws ShardError for bad magic, version
/// mismatch, truncation (naming the record index) and malformed records.
ShardContents read_shard(const std::string& path);
/// As above, first checking the file hash against the manifest.
ShardContents read_shard(const std::string& path, const ShardManifest& manifest);
/// Throws ShardError(kChecksumMismatch) if the file hash differs.
void verify_shard(const std::string& path, const ShardManifest& manifest);

/// Recomputes manifest statistics from decoded sequences (sha256, shard name
/// and max_doc_tokens are left empty).
ShardManifest summarize(const ShardContents& contents);

struct SourceAudit {
  std::uint64_t tokens = 0;
  double realized_share = 0.0;
  double target_share = 0.0;
  double deviation = 0.0;  // |realized - target|
};

struct AuditReport {
  std::uint64_t shards = 0;
  std::uint64_t total_tokens = 0;
  std::uint64_t sequences = 0;
  std::uint64_t pad_tokens = 0;
  std::uint64_t loss_targets = 0;
  std::array<SourceAudit, kSourceCount> sources{};
  /// Sum over shards of max_doc_tokens, divided by total_tokens.
  double bound = 0.0;
  /// Allowed shortfall: (k - 1) * bound for k sources with a nonzero target
  /// (equal to bound when k <= 2).
  double deficit_bound = 0.0;
  std::uint64_t active_sources = 0;
  bool has_target = false;
  bool within_bound = true;

  std::string to_text() const;
  std::string to_json() const;
};

/// Aggregates per-source token counts. Targets come from `plan` when given,
/// otherwise from the manifests' own targets (if all carry one).
AuditReport audit(std::span<const ShardManifest> manifests,
                  const std::optional<MixPlan>& plan = std::nullopt);

}  // namespace mmpipe
