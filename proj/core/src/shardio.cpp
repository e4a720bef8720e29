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
#include "mmpipe/shardio.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mmpipe/sha256.hpp"

namespace mmpipe {

using nlohmann::json;

namespace {

std::size_t mask_bytes(std::uint32_t seq_len) { return (seq_len + 7u) / 8u; }

void put_u8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

// Read-only memory mapping of a whole file.
class MappedFile {
 public:
  explicit MappedFile(const std::string& path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) throw IoError("cannot open shard '" + path + "': " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      ::close(fd_);
      throw IoError("cannot stat shard '" + path + "'");
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
      if (p == MAP_FAILED) {
        ::close(fd_);
        throw IoError("cannot map shard '" + path + "'");
      }
      data_ = static_cast<const std::uint8_t*>(p);
    }
  }
  ~MappedFile() {
    if (data_) ::munmap(const_cast<std::uint8_t*>(data_), size_);
    if (fd_ >= 0) ::close(fd_);
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  std::span<const std::uint8_t> bytes() const { return {data_, size_}; }

 private:
  int fd_ = -1;
  const std::uint8_t* data_ = nullptr;
  std::size_t size_ = 0;
};

// Bounds-checked cursor over a mapped shard.
class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, const std::string& path) : b_(bytes), path_(path) {}

  std::size_t remaining() const { return b_.size() - pos_; }

  const std::uint8_t* take(std::size_t n, std::uint64_t record) {
    if (remaining() < n)
      throw ShardError(ShardError::Kind::kTruncated,
                       "shard '" + path_ + "' is truncated in sequence " + std::to_string(record),
                       record);
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename T>
  T read(std::uint64_t record) {
    return get_le<T>(take(sizeof(T), record));
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
  const std::string& path_;
};

json source_map(const std::array<std::uint64_t, kSourceCount>& v) {
  json j = json::object();
  for (auto s : kAllSources) j[std::string(to_string(s))] = v[index_of(s)];
  return j;
}

std::array<std::uint64_t, kSourceCount> source_map_from(const json& j, const char* what) {
  if (!j.is_object()) throw InvalidArgument(std::string("manifest: '") + what + "' must be an object");
  std::array<std::uint64_t, kSourceCount> v{};
  for (const auto& [key, val] : j.items()) {
    auto src = source_from_string(key);
    if (!src) throw InvalidArgument(std::string("manifest: unknown source '") + key + "' in " + what);
    if (!val.is_number_unsigned()) throw InvalidArgument("manifest: token counts must be unsigned");
    v[index_of(*src)] = val.get<std::uint64_t>();
  }
  return v;
}

}  // namespace

std::size_t record_size(std::uint32_t seq_len, std::size_t spans, std::size_t segments) {
  return std::size_t{4} * seq_len + mask_bytes(seq_len) + 2 + 8 * spans + 2 + 17 * segments;
}

std::uint64_t ShardManifest::content_tokens() const {
  std::uint64_t n = 0;
  for (auto t : source_tokens) n += t;
  return n;
}

// ---------------------------------------------------------------------------
// Manifests

std::string manifest_to_json(const ShardManifest& m) {
  json j;
  j["shard"] = m.shard;
  j["sequence_count"] = m.sequence_count;
  j["seq_len"] = m.seq_len;
  j["seed"] = m.seed;
  j["source_tokens"] = source_map(m.source_tokens);
  j["pad_tokens"] = m.pad_tokens;
  j["loss_targets"] = m.loss_targets;
  j["image_spans"] = m.image_spans;
  j["max_doc_tokens"] = m.max_doc_tokens;
  if (m.target)
    j["target_tokens"] = source_map(
        {m.target->text_tokens, m.target->caption_tokens, m.target->instruction_tokens});
  j["sha256"] = m.sha256;
  return j.dump();
}

ShardManifest manifest_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("manifest: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("manifest: expected an object");
  ShardManifest m;
  auto u64 = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_unsigned())
      throw InvalidArgument(std::string("manifest: '") + key + "' must be an unsigned integer");
    return j[key].get<std::uint64_t>();
  };
  for (const auto& [key, _] : j.items()) {
    static const std::array<std::string_view, 11> known = {
        "shard",        "sequence_count", "seq_len",        "seed",          "source_tokens",
        "pad_tokens",   "loss_targets",   "image_spans",    "max_doc_tokens", "target_tokens",
        "sha256"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InvalidArgument("manifest: unknown key '" + key + "'");
  }
  if (!j.contains("shard") || !j["shard"].is_string())
    throw InvalidArgument("manifest: 'shard' must be a string");
  m.shard = j["shard"].get<std::string>();
  m.sequence_count = u64("sequence_count");
  const auto seq_len = u64("seq_len");
  if (seq_len > std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument("manifest: seq_len out of range");
  m.seq_len = static_cast<std::uint32_t>(seq_len);
  m.seed = u64("seed");
  if (!j.contains("source_tokens")) throw InvalidArgument("manifest: missing 'source_tokens'");
  m.source_tokens = source_map_from(j["source_tokens"], "source_tokens");
  m.pad_tokens = u64("pad_tokens");
  m.loss_targets = u64("loss_targets");
  m.image_spans = u64("image_spans");
  m.max_doc_tokens = u64("max_doc_tokens");
  if (j.contains("target_tokens")) {
    const auto t = source_map_from(j["target_tokens"], "target_tokens");
    MixPlan p;
    p.text_tokens = t[0];
    p.caption_tokens = t[1];
    p.instruction_tokens = t[2];
    p.total_tokens = t[0] + t[1] + t[2];
    m.target = p;
  }
  if (!j.contains("sha256") || !j["sha256"].is_string())
    throw InvalidArgument("manifest: 'sha256' must be a string");
  m.sha256 = j["sha256"].get<std::string>();
  return m;
}

void write_manifest(const std::string& path, const ShardManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create manifest '" + path + "'");
  out << manifest_to_json(m) << '\n';
  if (!out) throw IoError("error writing manifest '" + path + "'");
}

ShardManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return manifest_from_json(line);
  }
  throw InvalidArgument("manifest '" + path + "' is empty");
}

std::string manifest_path_for(const std::string& shard_path) {
  std::filesystem::path p(shard_path);
  if (p.extension() == ".mmshard") p.replace_extension();
  return p.string() + ".manifest.json";
}

// ---------------------------------------------------------------------------
// Writing

ShardWriter::ShardWriter(const std::string& path, std::uint32_t seq_len, std::uint64_t seed)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot create shard '" + path + "'");
  if (seq_len == 0) throw InvalidArgument("shard: seq_len must be > 0");
  manifest_.shard = std::filesystem::path(path).filename().string();
  manifest_.seq_len = seq_len;
  manifest_.seed = seed;

  buf_.clear();
  buf_.insert(buf_.end(), kShardMagic.begin(), kShardMagic.end());
  put_u32(buf_, kShardVersion);
  put_u32(buf_, seq_len);
  put_u64(buf_, 0);  // patched in close()
  put_u64(buf_, seed);
  out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
}

ShardWriter::~ShardWriter() {
  if (!closed_) out_.close();
}

void ShardWriter::write(const PackedSequence& seq) {
  if (closed_) throw InvalidArgument("shard: write after close");
  const auto L = manifest_.seq_len;
  if (seq.tokens.size() != L || seq.loss_mask.size() != L)
    throw InvalidArgument("shard: sequence length " + std::to_string(seq.tokens.size()) +
                          " differs from shard seq_len " + std::to_string(L));
  if (seq.image_spans.size() > 0xFFFF || seq.segments.size() > 0xFFFF)
    throw InvalidArgument("shard: more than 65535 spans or segments in one sequence");

  buf_.clear();
  buf_.reserve(record_size(L, seq.image_spans.size(), seq.segments.size()));
  for (TokenId t : seq.tokens) put_u32(buf_, t);
  const auto mask_at = buf_.size();
  buf_.resize(mask_at + mask_bytes(L), 0);
  for (std::uint32_t i = 0; i < L; ++i) {
    if (seq.loss_mask[i] > 1) throw InvalidArgument("shard: loss mask entries must be 0 or 1");
    if (seq.loss_mask[i]) buf_[mask_at + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  put_u16(buf_, static_cast<std::uint16_t>(seq.image_spans.size()));
  for (const auto& s : seq.image_spans) {
    put_u32(buf_, s.start);
    put_u32(buf_, s.length);
  }
  put_u16(buf_, static_cast<std::uint16_t>(seq.segments.size()));
  std::uint64_t covered = 0;
  for (const auto& s : seq.segments) {
    put_u8(buf_, static_cast<std::uint8_t>(s.source));
    put_u64(buf_, s.doc_id);
    put_u32(buf_, s.start);
    put_u32(buf_, s.length);
    manifest_.source_tokens[index_of(s.source)] += s.length;
    covered += s.length;
  }
  out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out_) throw IoError("error writing shard '" + path_ + "'");

  ++manifest_.sequence_count;
  manifest_.pad_tokens += L - covered;
  manifest_.loss_targets += seq.loss_target_count();
  manifest_.image_spans += seq.image_spans.size();
}

ShardManifest ShardWriter::close() {
  if (closed_) throw InvalidArgument("shard: already closed");
  buf_.clear();
  put_u64(buf_, manifest_.sequence_count);
  out_.seekp(16);
  out_.write(reinterpret_cast<const char*>(buf_.data()), 8);
  out_.close();
  closed_ = true;
  if (!out_) throw IoError("error finalizing shard '" + path_ + "'");
  manifest_.sha256 = sha256_file_hex(path_);
  return manifest_;
}

ShardManifest write_shard(std::span<const PackedSequence> sequences, const std::string& path,
                          std::uint32_t seq_len, std::uint64_t seed) {
  ShardWriter w(path, seq_len, seed);
  for (const auto& s : sequences) w.write(s);
  return w.close();
}

// ---------------------------------------------------------------------------
// Reading

ShardContents read_shard(const std::string& path) {
  MappedFile file(path);
  Cursor c(file.bytes(), path);
  const auto bytes = file.bytes();
  if (bytes.size() < kShardHeaderSize) {
    if (bytes.size() >= kShardMagic.size() &&
        !std::equal(kShardMagic.begin(), kShardMagic.end(), bytes.begin()))
      throw ShardError(ShardError::Kind::kBadMagic, "shard '" + path + "' has a bad magic");
    throw ShardError(ShardError::Kind::kTruncated, "shard '" + path + "' is truncated in header");
  }
  const auto* magic = c.take(kShardMagic.size(), 0);
  if (!std::equal(kShardMagic.begin(), kShardMagic.end(), magic))
    throw ShardError(ShardError::Kind::kBadMagic, "shard '" + path + "' has a bad magic");

  ShardContents out;
  out.header.version = c.read<std::uint32_t>(0);
  if (out.header.version != kShardVersion)
    throw ShardError(ShardError::Kind::kVersionMismatch,
                     "shard '" + path + "' has version " + std::to_string(out.header.version) +
                         ", expected " + std::to_string(kShardVersion));
  out.header.seq_len = c.read<std::uint32_t>(0);
  out.header.sequence_count = c.read<std::uint64_t>(0);
  out.header.seed = c.read<std::uint64_t>(0);
  const auto L = out.header.seq_len;
  if (L == 0) throw ShardError(ShardError::Kind::kMalformed, "shard '" + path + "' has seq_len 0");

  // The smallest possible record bounds the count before reserving.
  const auto min_record = record_size(L, 0, 0);
  if (out.header.sequence_count > c.remaining() / min_record + 1)
    out.sequences.reserve(c.remaining() / min_record);
  else
    out.sequences.reserve(out.header.sequence_count);

  auto malformed = [&](std::uint64_t i, const std::string& what) {
    return ShardError(ShardError::Kind::kMalformed,
                      "shard '" + path + "' sequence " + std::to_string(i) + ": " + what, i);
  };

  for (std::uint64_t i = 0; i < out.header.sequence_count; ++i) {
    PackedSequence seq;
    const auto* tok = c.take(std::size_t{4} * L, i);
    seq.tokens.resize(L);
    for (std::uint32_t k = 0; k < L; ++k) seq.tokens[k] = get_le<std::uint32_t>(tok + 4 * k);
    const auto* mask = c.take(mask_bytes(L), i);
    seq.loss_mask.resize(L);
    for (std::uint32_t k = 0; k < L; ++k) seq.loss_mask[k] = (mask[k / 8] >> (k % 8)) & 1u;
    if (L % 8 != 0 && (mask[L / 8] >> (L % 8)) != 0) throw malformed(i, "nonzero mask padding bits");

    const auto spans = c.read<std::uint16_t>(i);
    seq.image_spans.resize(spans);
    for (auto& s : seq.image_spans) {
      s.start = c.read<std::uint32_t>(i);
      s.length = c.read<std::uint32_t>(i);
      if (static_cast<std::uint64_t>(s.start) + s.length > L)
        throw malformed(i, "image span exceeds the sequence");
    }
    const auto segs = c.read<std::uint16_t>(i);
    seq.segments.resize(segs);
    for (auto& s : seq.segments) {
      const auto src = c.read<std::uint8_t>(i);
      if (src >= kSourceCount) throw malformed(i, "unknown source id " + std::to_string(src));
      s.source = static_cast<Source>(src);
      s.doc_id = c.read<std::uint64_t>(i);
      s.start = c.read<std::uint32_t>(i);
      s.length = c.read<std::uint32_t>(i);
      if (static_cast<std::uint64_t>(s.start) + s.length > L)
        throw malformed(i, "segment exceeds the sequence");
    }
    out.sequences.push_back(std::move(seq));
  }
  if (c.remaining() != 0)
    throw ShardError(ShardError::Kind::kMalformed,
                     "shard '" + path + "' has " + std::to_string(c.remaining()) +
                         " trailing bytes after " + std::to_string(out.header.sequence_count) +
                         " sequences");
  return out;
}

void verify_shard(const std::string& path, const ShardManifest& manifest) {
  const auto actual = sha256_file_hex(path);
  if (actual != manifest.sha256)
    throw ShardError(ShardError::Kind::kChecksumMismatch,
                     "shard '" + path + "' checksum mismatch: manifest " + manifest.sha256 +
                         ", file " + actual);
}

ShardContents read_shard(const std::string& path, const ShardManifest& manifest) {
  verify_shard(path, manifest);
  return read_shard(path);
}

ShardManifest summarize(const ShardContents& contents) {
  ShardManifest m;
  m.sequence_count = contents.sequences.size();
  m.seq_len = contents.header.seq_len;
  m.seed = contents.header.seed;
  for (const auto& seq : contents.sequences) {
    std::uint64_t covered = 0;
    for (const auto& s : seq.segments) {
      m.source_tokens[index_of(s.source)] += s.length;
      covered += s.length;
    }
    m.pad_tokens += seq.tokens.size() - covered;
    m.loss_targets += seq.loss_target_count();
    m.image_spans += seq.image_spans.size();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Audit

AuditReport audit(std::span<const ShardManifest> manifests, const std::optional<MixPlan>& plan) {
  if (manifests.empty()) throw InvalidArgument("audit: at least one manifest is required");
  __extension__ using i128 = __int128;

  AuditReport r;
  r.shards = manifests.size();
  std::array<std::uint64_t, kSourceCount> target{};
  bool all_targets = true;
  std::uint64_t max_doc_sum = 0;
  for (const auto& m : manifests) {
    for (std::size_t s = 0; s < kSourceCount; ++s) r.sources[s].tokens += m.source_tokens[s];
    r.sequences += m.sequence_count;
    r.pad_tokens += m.pad_tokens;
    r.loss_targets += m.loss_targets;
    max_doc_sum += m.max_doc_tokens;
    if (m.target) {
      target[0] += m.target->text_tokens;
      target[1] += m.target->caption_tokens;
      target[2] += m.target->instruction_tokens;
    } else {
      all_targets = false;
    }
  }
  if (plan) {
    target = {plan->text_tokens, plan->caption_tokens, plan->instruction_tokens};
    r.has_target = true;
  } else {
    r.has_target = all_targets;
  }
  for (const auto& s : r.sources) r.total_tokens += s.tokens;
  const std::uint64_t target_total = target[0] + target[1] + target[2];

  r.bound = r.total_tokens == 0 ? 0.0
                                : static_cast<double>(max_doc_sum) / static_cast<double>(r.total_tokens);
  const auto active = static_cast<std::uint64_t>(
      std::count_if(target.begin(), target.end(), [](std::uint64_t t) { return t > 0; }));
  r.active_sources = active;
  r.deficit_bound = r.bound * static_cast<double>(std::max<std::uint64_t>(active, 2) - 1);
  r.within_bound = true;
  for (std::size_t s = 0; s < kSourceCount; ++s) {
    auto& a = r.sources[s];
    a.realized_share = r.total_tokens == 0 ? 0.0
                                           : static_cast<double>(a.tokens) /
                                                 static_cast<double>(r.total_tokens);
    if (!r.has_target || target_total == 0) continue;
    a.target_share = static_cast<double>(target[s]) / static_cast<double>(target_total);
    a.deviation = std::abs(a.realized_share - a.target_share);
    // Surplus e/E - w/W <= M/E and deficit w/W - e/E <= (k-1) M/E, both
    // scaled by E*W and evaluated exactly.
    const i128 surplus = static_cast<i128>(a.tokens) * target_total -
                         static_cast<i128>(target[s]) * r.total_tokens;
    const i128 m_w = static_cast<i128>(max_doc_sum) * target_total;
    const i128 k_minus_1 = static_cast<i128>(std::max<std::uint64_t>(active, 2) - 1);
    if (surplus > m_w || -surplus > k_minus_1 * m_w) r.within_bound = false;
  }
  return r;
}

std::string AuditReport::to_text() const {
  std::ostringstream os;
  os << "shards: " << shards << "\n"
     << "sequences: " << sequences << "\n"
     << "content_tokens: " << total_tokens << "\n"
     << "pad_tokens: " << pad_tokens << "\n"
     << "loss_targets: " << loss_targets << "\n";
  os << std::fixed << std::setprecision(6);
  for (auto s : kAllSources) {
    const auto& a = sources[index_of(s)];
    os << to_string(s) << ": tokens " << a.tokens << ", realized " << a.realized_share;
    if (has_target) os << ", target " << a.target_share << ", deviation " << a.deviation;
    os << "\n";
  }
  if (has_target)
    os << "bound: surplus " << bound << ", deficit " << deficit_bound << " ("
       << (within_bound ? "within" : "VIOLATED") << ")\n";
  return os.str();
}

std::string AuditReport::to_json() const {
  json j;
  j["shards"] = shards;
  j["sequences"] = sequences;
  j["content_tokens"] = total_tokens;
  j["pad_tokens"] = pad_tokens;
  j["loss_targets"] = loss_targets;
  for (auto s : kAllSources) {
    const auto& a = sources[index_of(s)];
    json e{{"tokens", a.tokens}, {"realized_share", a.realized_share}};
    if (has_target) {
      e["target_share"] = a.target_share;
      e["deviation"] = a.deviation;
    }
    j["sources"][std::string(to_string(s))] = e;
  }
  if (has_target) {
    j["bound"] = bound;
    j["deficit_bound"] = deficit_bound;
    j["within_bound"] = within_bound;
  }
  return j.dump();
}

}  // namespace mmpipe
