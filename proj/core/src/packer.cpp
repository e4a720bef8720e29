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
#include "mmpipe/packer.hpp"

#include <algorithm>
#include <numeric>

namespace mmpipe {

namespace {

void push(Layout& out, std::span<const TokenId> tokens, std::uint8_t bit) {
  out.tokens.insert(out.tokens.end(), tokens.begin(), tokens.end());
  out.mask.insert(out.mask.end(), tokens.size(), bit);
}

void push_one(Layout& out, TokenId token, std::uint8_t bit) {
  out.tokens.push_back(token);
  out.mask.push_back(bit);
}

void push_image(Layout& out, const RunSpec& spec) {
  out.tokens.insert(out.tokens.end(), spec.image_patch_count, spec.image_placeholder_token_id);
  out.mask.insert(out.mask.end(), spec.image_patch_count, 0);
  out.image_length = spec.image_patch_count;
}

}  // namespace

std::uint64_t Layout::loss_targets() const {
  return static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Layout lay_out_caption(const Document& doc, const RunSpec& spec) {
  const auto& caption = doc.segments.at(0).tokens;
  if (caption.empty())
    throw DocumentError(DocumentError::Kind::kEmptyCaption,
                        "caption document " + std::to_string(doc.id) + " has an empty caption");
  Layout out;
  out.tokens.reserve(spec.image_patch_count + 1 + caption.size());
  out.mask.reserve(out.tokens.capacity());
  push_image(out, spec);
  // The image/text separator is a text token and a loss target.
  push_one(out, spec.separator_token_id, 1);
  push(out, caption, 1);
  return out;
}

Layout lay_out_instruction(const Document& doc, const RunSpec& spec) {
  Layout out;
  if (doc.has_image()) {
    push_image(out, spec);
    push_one(out, spec.separator_token_id, 0);
  }
  for (const auto& seg : doc.segments) {
    switch (seg.role) {
      case Role::kSystem:
        push(out, seg.tokens, 0);
        break;
      case Role::kHuman:
        push(out, seg.tokens, 0);
        push_one(out, spec.separator_token_id, 0);
        break;
      case Role::kModel:
        push(out, seg.tokens, 1);
        push_one(out, spec.separator_token_id, 1);
        break;
      default:
        throw DocumentError(DocumentError::Kind::kMalformedRoles,
                            "instruction document " + std::to_string(doc.id) + " has a '" +
                                std::string(to_string(seg.role)) + "' segment");
    }
  }
  return out;
}

Layout lay_out_text(const Document& doc, const RunSpec&) {
  Layout out;
  out.tokens.reserve(doc.text_token_count());
  out.mask.reserve(doc.text_token_count());
  for (const auto& seg : doc.segments) push(out, seg.tokens, 1);
  return out;
}

Layout lay_out(const Document& doc, const RunSpec& spec) {
  check_document(doc, spec);
  Layout out;
  switch (doc.source) {
    case Source::kText:
      out = lay_out_text(doc, spec);
      break;
    case Source::kCaption:
      out = lay_out_caption(doc, spec);
      break;
    case Source::kInstruction:
      out = lay_out_instruction(doc, spec);
      break;
  }
  if (out.has_image() && out.size() > spec.mm_seq_len)
    throw DocumentError(DocumentError::Kind::kOversizedImageLayout,
                        "document " + std::to_string(doc.id) + " image layout of " +
                            std::to_string(out.size()) + " tokens exceeds mm_seq_len " +
                            std::to_string(spec.mm_seq_len));
  return out;
}

std::uint64_t packed_cost(const Document& doc, const RunSpec& spec) {
  try {
    check_document(doc, spec);
  } catch (const DocumentError&) {
    return 0;
  }
  const std::uint64_t text = doc.text_token_count();
  std::uint64_t n = 0;
  switch (doc.source) {
    case Source::kText:
      return text;
    case Source::kCaption:
      if (text == 0) return 0;
      n = spec.image_patch_count + 1 + text;
      break;
    case Source::kInstruction: {
      const auto turns = doc.segments.size() - (doc.segments[0].role == Role::kSystem ? 1 : 0);
      n = text + turns + (doc.has_image() ? spec.image_patch_count + 1 : 0);
      break;
    }
  }
  if (doc.has_image() && n > spec.mm_seq_len) return 0;
  return n;
}

std::uint64_t PackedSequence::loss_target_count() const {
  return static_cast<std::uint64_t>(
      std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
}

std::uint64_t PackedSequence::pad_count() const {
  std::uint64_t covered = 0;
  for (const auto& s : segments) covered += s.length;
  return tokens.size() - covered;
}

std::uint64_t PackStats::skipped_total() const {
  return std::accumulate(skipped.begin(), skipped.end(), std::uint64_t{0});
}

Packer::Packer(const RunSpec& spec, Sink sink)
    : spec_(spec), sink_(std::move(sink)), seq_len_(spec.mm_seq_len) {
  if (seq_len_ == 0) throw InvalidArgument("packer: mm_seq_len must be > 0");
  reset_current();
}

void Packer::reset_current() {
  current_ = PackedSequence{};
  current_.tokens.reserve(seq_len_);
  current_.loss_mask.reserve(seq_len_);
  used_ = 0;
}

void Packer::pad_and_emit() {
  const auto pads = room();
  current_.tokens.insert(current_.tokens.end(), pads, spec_.pad_token_id);
  current_.loss_mask.insert(current_.loss_mask.end(), pads, 0);
  stats_.pad_tokens += pads;
  ++stats_.sequences;
  sink_(std::move(current_));
  reset_current();
}

void Packer::append(const Layout& layout, const Document& doc, std::size_t from,
                    std::size_t count) {
  const auto start = used_;
  current_.tokens.insert(current_.tokens.end(), layout.tokens.begin() + from,
                         layout.tokens.begin() + from + count);
  current_.loss_mask.insert(current_.loss_mask.end(), layout.mask.begin() + from,
                            layout.mask.begin() + from + count);
  if (from == 0 && layout.has_image()) current_.image_spans.push_back({start, layout.image_length});
  current_.segments.push_back({doc.source, doc.id, start, static_cast<std::uint32_t>(count)});
  used_ += static_cast<std::uint32_t>(count);
}

void Packer::add(const Document& doc) {
  Layout layout;
  try {
    layout = lay_out(doc, spec_);
  } catch (const DocumentError& e) {
    ++stats_.skipped[static_cast<std::size_t>(e.kind())];
    return;
  }
  ++stats_.documents_packed;
  stats_.layout_tokens += layout.size();
  stats_.source_tokens[index_of(doc.source)] += layout.size();

  if (layout.has_image()) {
    if (layout.size() > room()) pad_and_emit();
    append(layout, doc, 0, layout.size());
    if (room() == 0) pad_and_emit();
    return;
  }
  std::size_t pos = 0;
  while (pos < layout.size()) {
    const auto n = std::min<std::size_t>(room(), layout.size() - pos);
    append(layout, doc, pos, n);
    pos += n;
    if (room() == 0) pad_and_emit();
  }
}

void Packer::finish() {
  if (used_ > 0) pad_and_emit();
}

namespace {

template <typename Range, typename Get>
PackResult pack_all(const Range& docs, const RunSpec& spec, Get get) {
  PackResult result;
  Packer packer(spec, [&](PackedSequence&& s) { result.sequences.push_back(std::move(s)); });
  for (const auto& d : docs) packer.add(get(d));
  packer.finish();
  result.stats = packer.stats();
  return result;
}

}  // namespace

PackResult pack(std::span<const Document> docs, const RunSpec& spec) {
  return pack_all(docs, spec, [](const Document& d) -> const Document& { return d; });
}

PackResult pack(std::span<const MixedDoc> docs, const RunSpec& spec) {
  return pack_all(docs, spec, [](const MixedDoc& d) -> const Document& { return *d.doc; });
}

}  // namespace mmpipe
