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

// Token layout and fixed-length packing.
//
// Layout rules, with S = separator and P = image placeholder (one per patch):
//
//   caption:      P*n S caption            mask 0 over P, 1 over S and caption
//   instruction:  [P*n S] system (turn S)*  mask 1 only over model turns and
//                                           the separator that ends each one
//   text:         tokens                    mask 1 everywhere
//
// Layouts that contain an image block are atomic: if one does not fit in the
// room left in the current sequence, the sequence is padded and the layout
// starts the next one. Other layouts split across sequence boundaries.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmpipe/document.hpp"
#include "mmpipe/mixer.hpp"
#include "mmpipe/runspec.hpp"

namespace mmpipe {

struct Layout {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> mask;  // 1 = loss target
  std::uint32_t image_length = 0;  // image block at position 0 when nonzero

  bool has_image() const { return image_length > 0; }
  std::uint64_t size() const { return tokens.size(); }
  std::uint64_t loss_targets() const;
};

Layout lay_out_caption(const Document& doc, const RunSpec& spec);
Layout lay_out_instruction(const Document& doc, const RunSpec& spec);
Layout lay_out_text(const Document& doc, const RunSpec& spec);

/// Validates the document (check_document) and dispatches on its source.
/// Throws DocumentError for skipped documents, including image layouts
/// longer than spec.mm_seq_len.
Layout lay_out(const Document& doc, const RunSpec& spec);

/// Length lay_out() would produce, or 0 if the packer would skip the document.
/// Intended as the mixer's cost function.
std::uint64_t packed_cost(const Document& doc, const RunSpec& spec);

struct ImageSpan {
  std::uint32_t start = 0;
  std::uint32_t length = 0;

  bool operator==(const ImageSpan&) const = default;
};

struct SegmentRef {
  Source source = Source::kText;
  std::uint64_t doc_id = 0;
  std::uint32_t start = 0;
  std::uint32_t length = 0;

  bool operator==(const SegmentRef&) const = default;
};

struct PackedSequence {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> loss_mask;  // one 0/1 entry per position
  std::vector<ImageSpan> image_spans;
  std::vector<SegmentRef> segments;

  std::uint32_t seq_len() const { return static_cast<std::uint32_t>(tokens.size()); }
  std::uint64_t loss_target_count() const;
  /// Positions not covered by any segment.
  std::uint64_t pad_count() const;

  bool operator==(const PackedSequence&) const = default;
};

struct PackStats {
  std::uint64_t documents_packed = 0;
  std::uint64_t layout_tokens = 0;
  std::uint64_t sequences = 0;
  std::uint64_t pad_tokens = 0;
  std::array<std::uint64_t, kSourceCount> source_tokens{};
  std::array<std::uint64_t, 5> skipped{};  // indexed by DocumentError::Kind

  std::uint64_t skipped_total() const;
  std::uint64_t skipped_of(DocumentError::Kind k) const {
    return skipped[static_cast<std::size_t>(k)];
  }
};

/// Streaming greedy packer. Completed sequences are handed to `sink` in order.
class Packer {
 public:
  using Sink = std::function<void(PackedSequence&&)>;

  Packer(const RunSpec& spec, Sink sink);

  void add(const Document& doc);
  /// Pads and emits the partial sequence, if any.
  void finish();

  const PackStats& stats() const { return stats_; }

 private:
  void append(const Layout& layout, const Document& doc, std::size_t from, std::size_t count);
  void pad_and_emit();
  void reset_current();
  std::uint32_t room() const { return seq_len_ - used_; }

  RunSpec spec_;
  Sink sink_;
  std::uint32_t seq_len_;
  PackedSequence current_;
  std::uint32_t used_ = 0;
  PackStats stats_;
};

struct PackResult {
  std::vector<PackedSequence> sequences;
  PackStats stats;
};

PackResult pack(std::span<const Document> docs, const RunSpec& spec);
PackResult pack(std::span<const MixedDoc> docs, const RunSpec& spec);

}  // namespace mmpipe
