// Copyright 2026 The M3EL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m3el/tensor.hpp"

namespace m3el {

enum class Side : std::uint8_t { kEntity = 0, kMention = 1 };
enum class Modality : std::uint8_t { kText = 0, kVision = 1 };
enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };

std::string_view side_name(Side s);
std::string_view modality_name(Modality m);
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

// One object's global vector (1 x dim) and local rows (rows x dim). For
// text, local row 0 is the end-of-text position; for vision it is the
// class-token position.
struct EmbeddingRecord {
  std::uint64_t id = 0;
  Tensor global;
  Tensor local;

  bool operator==(const EmbeddingRecord&) const = default;
};

// Validated records for one (side, modality) pair, indexed by id.
class FeatureBank {
 public:
  FeatureBank() = default;
  FeatureBank(Side side, Modality modality, std::size_t dim);

  // Throws DataError on dim mismatch, duplicate id, zero local rows or
  // non-finite values.
  void add(EmbeddingRecord record);

  const EmbeddingRecord* find(std::uint64_t id) const;
  const EmbeddingRecord& at(std::uint64_t id) const;  // DataError if absent

  Side side() const { return side_; }
  Modality modality() const { return modality_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  std::span<const EmbeddingRecord> records() const { return records_; }

  bool operator==(const FeatureBank& o) const {
    return side_ == o.side_ && modality_ == o.modality_ && dim_ == o.dim_ && records_ == o.records_;
  }

 private:
  Side side_ = Side::kEntity;
  Modality modality_ = Modality::kText;
  std::size_t dim_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

inline constexpr char kBankMagic[4] = {'M', '3', 'E', 'B'};
inline constexpr std::uint32_t kBankVersion = 1;

// Little-endian bank layout:
//   "M3EB" u32 version u8 modality u8 side u32 dim u32 count
//   per record: u64 id u32 local_rows f32[dim] global f32[rows*dim] local
std::vector<std::uint8_t> encode_bank(const FeatureBank& bank);
FeatureBank decode_bank(std::span<const std::uint8_t> bytes);
void write_bank(const FeatureBank& bank, const std::filesystem::path& path);
FeatureBank load_bank(const std::filesystem::path& path);

struct MentionManifestEntry {
  std::uint64_t mention_id = 0;
  std::uint64_t gold_entity_id = 0;
  std::vector<std::uint64_t> candidates;
  Split split = Split::kTrain;

  bool operator==(const MentionManifestEntry&) const = default;
};

using Manifest = std::vector<MentionManifestEntry>;

// JSON-lines, one entry per mention:
//   {"mention_id":..,"gold_entity_id":..,"candidates":[..],"split":"train"}
std::string encode_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

Manifest filter_split(const Manifest& manifest, Split split);

// The four banks plus the manifest.
struct Dataset {
  FeatureBank entity_text;
  FeatureBank entity_vision;
  FeatureBank mention_text;
  FeatureBank mention_vision;
  Manifest manifest;

  std::size_t text_dim() const { return entity_text.dim(); }
  std::size_t vision_dim() const { return entity_vision.dim(); }
};

// Checks bank roles, dims and that every manifest id resolves. Errors list
// the offending ids.
void validate_dataset(const Dataset& data);

// Files: entity_text.m3eb entity_vision.m3eb mention_text.m3eb
// mention_vision.m3eb manifest.jsonl
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// A record cut/padded to a fixed local row count. Pad rows are zero and
// have mask 0.
struct PaddedRecord {
  std::uint64_t id = 0;
  Tensor global;
  Tensor local;
  Mask mask;
};

// max_rows == 0 keeps the record's own row count.
PaddedRecord pad_record(const EmbeddingRecord& record, std::size_t max_rows);

struct PadConfig {
  std::size_t max_text_rows = 40;
  std::size_t max_patch_rows = 50;
};

// Both modalities of one entity or mention.
struct ObjectFeatures {
  PaddedRecord text;
  PaddedRecord vision;
};

ObjectFeatures entity_features(const Dataset& data, std::uint64_t id, const PadConfig& pad);
ObjectFeatures mention_features(const Dataset& data, std::uint64_t id, const PadConfig& pad);

// Index i across every group refers to the same (mention, gold entity) pair.
struct Batch {
  std::vector<std::uint64_t> mention_ids;
  std::vector<std::uint64_t> entity_ids;
  std::vector<ObjectFeatures> entities;
  std::vector<ObjectFeatures> mentions;

  std::size_t size() const { return mention_ids.size(); }
};

// Batch from entries in the given order.
Batch make_batch(std::span<const MentionManifestEntry> entries, const Dataset& data,
                 const PadConfig& pad);

// Samples u distinct mentions. Mentions whose gold entity is already in the
// batch are taken only when no other entries remain, so in-batch negatives
// are real negatives whenever the data allows.
Batch assemble_batch(std::span<const MentionManifestEntry> entries, const Dataset& data,
                     std::size_t u, std::mt19937_64& rng, const PadConfig& pad);

// Deterministic floor(f * N) sample of the train entries (original order
// kept). Throws ConfigError for f outside (0, 1] or an empty result.
Manifest low_resource_subset(const Manifest& train_entries, double fraction, std::uint64_t seed);

// Applies low_resource_subset to the train split only.
Manifest apply_low_resource(const Manifest& manifest, double fraction, std::uint64_t seed);

struct SynthSpec {
  std::size_t num_entities = 512;
  std::size_t num_mentions = 64;
  std::size_t text_dim = 32;
  std::size_t vision_dim = 16;
  std::size_t tokens = 6;
  std::size_t patches = 5;
  double sigma = 0.01;        // mention global noise
  double local_sigma = 0.1;   // per-row local noise
  std::size_t distractors = 7;
  double valid_fraction = 0.0;
  double test_fraction = 0.0;
};

// Planted data: entity globals are random unit vectors; each mention's
// globals are its gold entity's globals plus N(0, sigma^2) noise,
// re-normalized. Local row 0 is the global; other rows add per-row noise.
// Candidates are the gold plus `distractors` other entities. All values are
// rounded to f32 so the in-memory dataset equals its on-disk form.
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace m3el
