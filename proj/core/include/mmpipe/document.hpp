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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmpipe/runspec.hpp"

namespace mmpipe {

/// Data source of a document. Underlying values are the shard wire ids.
enum class Source : std::uint8_t { kText = 0, kCaption = 1, kInstruction = 2 };

inline constexpr std::size_t kSourceCount = 3;
inline constexpr std::array<Source, kSourceCount> kAllSources = {Source::kText, Source::kCaption,
                                                                 Source::kInstruction};

std::string_view to_string(Source s);
std::optional<Source> source_from_string(std::string_view s);
inline std::size_t index_of(Source s) { return static_cast<std::size_t>(s); }

enum class Role : std::uint8_t { kSystem, kHuman, kModel, kCaption, kText };

std::string_view to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);

struct Segment {
  Role role = Role::kText;
  std::vector<TokenId> tokens;

  bool operator==(const Segment&) const = default;
};

/// One pre-tokenized training sample.
struct Document {
  Source source = Source::kText;
  std::uint32_t image_patch_count = 0;  // 0 when the document carries no image
  std::vector<Segment> segments;
  std::uint64_t id = 0;  // position in its source file; not serialized

  bool has_image() const { return image_patch_count > 0; }
  std::uint64_t text_token_count() const;

  bool operator==(const Document&) const = default;
};

/// Structural problem with a document. The packer counts these per kind and
/// skips the document.
class DocumentError : public InvalidArgument {
 public:
  enum class Kind {
    kEmptyCaption,
    kMalformedRoles,
    kReservedToken,
    kImageMismatch,
    kOversizedImageLayout,
  };

  DocumentError(Kind kind, const std::string& what) : InvalidArgument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(DocumentError::Kind k);

/// Checks the source/role/image rules of `doc` against `spec`, throwing
/// DocumentError on the first problem:
///   text        - one or more `text` segments, no image
///   caption     - exactly one `caption` segment (may be empty), has an image
///   instruction - optional leading `system`, then alternating human/model turns
/// Every token must be below the smallest reserved id, and an image must be
/// spec.image_patch_count tokens.
void check_document(const Document& doc, const RunSpec& spec);

/// Parses one NDJSON line:
///   {"source": "text|caption|instruction", "image_patches": int,
///    "segments": [{"role": "system|human|model|caption|text", "tokens": [uint32...]}]}
/// Unknown keys are rejected.
Document parse_document(std::string_view line);
std::string to_ndjson(const Document& doc);

/// Reads every non-empty line of an NDJSON file. Document ids are assigned
/// from 0 in file order. Parse errors name the line number.
std::vector<Document> load_documents(const std::string& path);
void write_documents(const std::string& path, const std::vector<Document>& docs);

}  // namespace mmpipe
