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
#include "mmpipe/document.hpp"

#include <fstream>
#include <limits>

#include "json.hpp"

namespace mmpipe {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kText:
      return "text";
    case Source::kCaption:
      return "caption";
    case Source::kInstruction:
      return "instruction";
  }
  return "unknown";
}

std::optional<Source> source_from_string(std::string_view s) {
  for (auto src : kAllSources)
    if (to_string(src) == s) return src;
  return std::nullopt;
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem:
      return "system";
    case Role::kHuman:
      return "human";
    case Role::kModel:
      return "model";
    case Role::kCaption:
      return "caption";
    case Role::kText:
      return "text";
  }
  return "unknown";
}

std::optional<Role> role_from_string(std::string_view s) {
  for (auto r : {Role::kSystem, Role::kHuman, Role::kModel, Role::kCaption, Role::kText})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::string_view to_string(DocumentError::Kind k) {
  using K = DocumentError::Kind;
  switch (k) {
    case K::kEmptyCaption:
      return "empty-caption";
    case K::kMalformedRoles:
      return "malformed-roles";
    case K::kReservedToken:
      return "reserved-token";
    case K::kImageMismatch:
      return "image-mismatch";
    case K::kOversizedImageLayout:
      return "oversized-image-layout";
  }
  return "unknown";
}

std::uint64_t Document::text_token_count() const {
  std::uint64_t n = 0;
  for (const auto& seg : segments) n += seg.tokens.size();
  return n;
}

void check_document(const Document& doc, const RunSpec& spec) {
  using K = DocumentError::Kind;
  auto roles_error = [](const std::string& msg) { return DocumentError(K::kMalformedRoles, msg); };

  switch (doc.source) {
    case Source::kText:
      if (doc.has_image())
        throw DocumentError(K::kImageMismatch, "text document must not carry an image");
      if (doc.segments.empty()) throw roles_error("text document has no segments");
      for (const auto& seg : doc.segments)
        if (seg.role != Role::kText) throw roles_error("text document segments must be 'text'");
      break;
    case Source::kCaption:
      if (!doc.has_image())
        throw DocumentError(K::kImageMismatch, "caption document must carry an image");
      if (doc.segments.size() != 1 || doc.segments[0].role != Role::kCaption)
        throw roles_error("caption document must have exactly one 'caption' segment");
      break;
    case Source::kInstruction: {
      std::size_t first = 0;
      if (!doc.segments.empty() && doc.segments[0].role == Role::kSystem) first = 1;
      if (first == doc.segments.size()) throw roles_error("instruction document has no turns");
      for (std::size_t i = first; i < doc.segments.size(); ++i) {
        const Role r = doc.segments[i].role;
        if (r != Role::kHuman && r != Role::kModel)
          throw roles_error("instruction segment " + std::to_string(i) + " has role '" +
                            std::string(to_string(r)) + "'; expected human or model");
        if (i > first && r == doc.segments[i - 1].role)
          throw roles_error("instruction segments " + std::to_string(i - 1) + " and " +
                            std::to_string(i) + " are both '" + std::string(to_string(r)) + "'");
      }
      break;
    }
  }

  if (doc.has_image() && doc.image_patch_count != spec.image_patch_count)
    throw DocumentError(K::kImageMismatch,
                        "image_patches " + std::to_string(doc.image_patch_count) +
                            " != spec image_patch_tokens " +
                            std::to_string(spec.image_patch_count));

  const TokenId limit = spec.min_reserved_id();
  for (const auto& seg : doc.segments)
    for (TokenId t : seg.tokens)
      if (t >= limit)
        throw DocumentError(K::kReservedToken, "token id " + std::to_string(t) +
                                                   " collides with the reserved id range (>= " +
                                                   std::to_string(limit) + ")");
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const char* where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument(std::string(where) + ": unknown key '" + key + "'");
  }
}

}  // namespace

Document parse_document(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("document: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("document: expected an object");
  reject_unknown(j, {"source", "image_patches", "segments"}, "document");

  Document doc;
  if (!j.contains("source") || !j["source"].is_string())
    throw InvalidArgument("document: 'source' must be a string");
  auto src = source_from_string(j["source"].get<std::string>());
  if (!src) throw InvalidArgument("document: unknown source '" + j["source"].get<std::string>() + "'");
  doc.source = *src;

  if (j.contains("image_patches")) {
    const auto& ip = j["image_patches"];
    if (!ip.is_number_unsigned() || ip.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max())
      throw InvalidArgument("document: 'image_patches' must be a non-negative integer");
    doc.image_patch_count = ip.get<std::uint32_t>();
  }

  if (!j.contains("segments") || !j["segments"].is_array())
    throw InvalidArgument("document: 'segments' must be an array");
  for (const auto& s : j["segments"]) {
    if (!s.is_object()) throw InvalidArgument("segment: expected an object");
    reject_unknown(s, {"role", "tokens"}, "segment");
    if (!s.contains("role") || !s["role"].is_string())
      throw InvalidArgument("segment: 'role' must be a string");
    auto role = role_from_string(s["role"].get<std::string>());
    if (!role) throw InvalidArgument("segment: unknown role '" + s["role"].get<std::string>() + "'");
    if (!s.contains("tokens") || !s["tokens"].is_array())
      throw InvalidArgument("segment: 'tokens' must be an array");
    Segment seg{*role, {}};
    seg.tokens.reserve(s["tokens"].size());
    for (const auto& t : s["tokens"]) {
      if (!t.is_number_unsigned() || t.get<std::uint64_t>() > std::numeric_limits<TokenId>::max())
        throw InvalidArgument("segment: token ids must be uint32");
      seg.tokens.push_back(t.get<TokenId>());
    }
    doc.segments.push_back(std::move(seg));
  }
  return doc;
}

std::string to_ndjson(const Document& doc) {
  json segs = json::array();
  for (const auto& s : doc.segments)
    segs.push_back(json{{"role", std::string(to_string(s.role))}, {"tokens", s.tokens}});
  json j{{"source", std::string(to_string(doc.source))},
         {"image_patches", doc.image_patch_count},
         {"segments", std::move(segs)}};
  return j.dump();
}

std::vector<Document> load_documents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open document file '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Document d = parse_document(line);
      d.id = docs.size();
      docs.push_back(std::move(d));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return docs;
}

void write_documents(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create '" + path + "'");
  for (const auto& d : docs) out << to_ndjson(d) << '\n';
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace mmpipe
